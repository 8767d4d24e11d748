#include "coxkit/numerics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <string>
#include <vector>

#include <boost/math/special_functions/erf.hpp>

#include "coxkit/errors.hpp"

namespace coxkit {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr double kTailStart = 6.0;

// Robert (1995) exponential proposal for N(0,1) restricted to (a, b), a >= 0.
double upper_tail(double a, double b, Rng& rng) {
  if (b - a < 1.0 / a) {
    // Narrow slab: uniform proposal, accept with exp(-(z^2 - a^2)/2).
    for (;;) {
      const double z = a + (b - a) * draw_uniform(rng);
      if (std::log(1.0 - draw_uniform(rng)) <= -0.5 * (z * z - a * a)) return z;
    }
  }
  const double rate = 0.5 * (a + std::sqrt(a * a + 4.0));
  std::exponential_distribution<double> expo(rate);
  for (;;) {
    const double z = a + expo(rng);
    if (z >= b) continue;
    const double d = z - rate;
    if (std::log(1.0 - draw_uniform(rng)) <= -0.5 * d * d) return z;
  }
}

// Inverse-CDF draw on (a, b) with b <= 0 so both CDF values are small and
// carry full relative precision.
double lower_side_inverse_cdf(double a, double b, Rng& rng) {
  const double pa = norm_cdf(a);
  const double pb = norm_cdf(b);
  const double p = pa + (pb - pa) * draw_uniform(rng);
  double z = norm_quantile(p);
  return std::clamp(z, a, b);
}

}  // namespace

double norm_pdf(double x) { return std::exp(norm_log_pdf(x)); }

double norm_log_pdf(double x) {
  return -0.5 * x * x - 0.5 * std::log(2.0 * std::numbers::pi);
}

double norm_cdf(double x) { return 0.5 * std::erfc(-x / std::numbers::sqrt2); }

double norm_log_cdf(double x) {
  if (x > -30.0) return std::log(norm_cdf(x));
  // Asymptotic Mills-ratio expansion.
  const double x2 = x * x;
  const double series = 1.0 - 1.0 / x2 + 3.0 / (x2 * x2) - 15.0 / (x2 * x2 * x2);
  return -0.5 * x2 - std::log(-x) - 0.5 * std::log(2.0 * std::numbers::pi) + std::log(series);
}

double norm_quantile(double p) {
  if (!(p > 0.0)) return -kInf;
  if (!(p < 1.0)) return kInf;
  return -std::numbers::sqrt2 * boost::math::erfc_inv(2.0 * p);
}

double draw_std_normal(Rng& rng) {
  std::normal_distribution<double> normal(0.0, 1.0);
  return normal(rng);
}

double draw_uniform(Rng& rng) {
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  return unif(rng);
}

double draw_gamma(double shape, double rate, Rng& rng) {
  if (!(shape > 0.0) || !(rate > 0.0)) {
    throw InputError("gamma draw needs positive shape and rate (got " + std::to_string(shape) +
                     ", " + std::to_string(rate) + ")");
  }
  std::gamma_distribution<double> gamma(shape, 1.0 / rate);
  return gamma(rng);
}

std::uint64_t draw_poisson(double mean, Rng& rng) {
  if (!(mean >= 0.0) || !std::isfinite(mean)) throw InputError("Poisson mean must be finite and >= 0");
  if (mean == 0.0) return 0;
  std::poisson_distribution<std::uint64_t> pois(mean);
  return pois(rng);
}

double truncated_std_normal(double lo, double hi, Rng& rng) {
  if (lo > hi) {
    if (lo - hi > 1e-9) {
      throw NumericalError("truncated normal interval is empty: (" + std::to_string(lo) + ", " +
                           std::to_string(hi) + ")");
    }
    return 0.5 * (lo + hi);
  }
  if (hi - lo < 1e-14 * std::max(1.0, std::abs(lo))) return 0.5 * (lo + hi);

  if (lo >= kTailStart) return upper_tail(lo, hi, rng);
  if (hi <= -kTailStart) return -upper_tail(-hi, -lo, rng);
  if (lo >= 0.0) return -lower_side_inverse_cdf(-hi, -lo, rng);
  if (hi <= 0.0) return lower_side_inverse_cdf(lo, hi, rng);

  // Interval straddles zero.
  const double pa = norm_cdf(lo);
  const double pb = norm_cdf(hi);
  const double p = pa + (pb - pa) * draw_uniform(rng);
  return std::clamp(norm_quantile(p), lo, hi);
}

std::uint64_t truncated_poisson_at_least(double mean, std::uint64_t lower, Rng& rng) {
  if (!(mean >= 0.0) || !std::isfinite(mean)) throw InputError("Poisson mean must be finite and >= 0");
  if (mean == 0.0) return lower;
  if (static_cast<double>(lower) <= mean) {
    // At least roughly half the mass sits above the truncation point.
    for (;;) {
      const std::uint64_t k = draw_poisson(mean, rng);
      if (k >= lower) return k;
    }
  }
  // Mode of the truncated law is `lower`; inverse CDF walking upward from it
  // over weights relative to the mode, cut where the tail is below 1e-14.
  std::vector<double> weights;
  double total = 0.0;
  double w = 1.0;
  for (std::uint64_t k = lower;; ++k) {
    weights.push_back(w);
    total += w;
    w *= mean / static_cast<double>(k + 1);
    // Remaining tail is bounded by a geometric series with the next ratio.
    const double ratio = mean / static_cast<double>(k + 2);
    if (w / (1.0 - ratio) < 1e-14 * total) break;
  }
  const double u = draw_uniform(rng) * total;
  double acc = 0.0;
  for (std::size_t i = 0; i < weights.size(); ++i) {
    acc += weights[i];
    if (u < acc) return lower + i;
  }
  return lower + weights.size() - 1;
}

}  // namespace coxkit
