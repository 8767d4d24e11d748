#include "coxkit/diagnostics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "coxkit/errors.hpp"

namespace coxkit {

double sample_mean(std::span<const double> x) {
  if (x.empty()) return 0.0;
  double s = 0.0;
  for (double v : x) s += v;
  return s / static_cast<double>(x.size());
}

double sample_sd(std::span<const double> x) {
  if (x.size() < 2) return 0.0;
  const double m = sample_mean(x);
  double s = 0.0;
  for (double v : x) s += (v - m) * (v - m);
  return std::sqrt(s / static_cast<double>(x.size() - 1));
}

double sample_quantile(std::span<const double> x, double p) {
  if (x.empty()) throw InputError("quantile of an empty series");
  if (!(p >= 0.0 && p <= 1.0)) throw InputError("quantile level must lie in [0, 1]");
  std::vector<double> v(x.begin(), x.end());
  std::sort(v.begin(), v.end());
  const double pos = p * static_cast<double>(v.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const auto hi = std::min(lo + 1, v.size() - 1);
  return v[lo] + (pos - static_cast<double>(lo)) * (v[hi] - v[lo]);
}

double effective_sample_size(std::span<const double> x) {
  const std::size_t n = x.size();
  if (n < 4) return static_cast<double>(n);
  const double m = sample_mean(x);
  auto autocov = [&](std::size_t lag) {
    double s = 0.0;
    for (std::size_t i = 0; i + lag < n; ++i) s += (x[i] - m) * (x[i + lag] - m);
    return s / static_cast<double>(n);
  };
  const double c0 = autocov(0);
  if (!(c0 > 0.0)) return static_cast<double>(n);
  double tau = -c0;  // 2 * sum of pairs - c0
  double prev = std::numeric_limits<double>::infinity();
  for (std::size_t k = 0; 2 * k + 1 < n; ++k) {
    double pair = autocov(2 * k) + autocov(2 * k + 1);
    if (!(pair > 0.0)) break;
    pair = std::min(pair, prev);
    prev = pair;
    tau += 2.0 * pair;
  }
  tau /= c0;
  if (!(tau > 0.0)) return static_cast<double>(n);
  return static_cast<double>(n) / tau;
}

SeriesSummary summarize(std::span<const double> x) {
  SeriesSummary s;
  if (x.empty()) return s;
  s.mean = sample_mean(x);
  s.sd = sample_sd(x);
  s.q025 = sample_quantile(x, 0.025);
  s.q500 = sample_quantile(x, 0.5);
  s.q975 = sample_quantile(x, 0.975);
  s.ess = effective_sample_size(x);
  return s;
}

}  // namespace coxkit
