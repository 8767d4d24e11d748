#pragma once

// Independent statistical oracles for tests: goodness-of-fit p-values,
// quadrature and Monte Carlo moment comparisons.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <numeric>
#include <vector>

#include <boost/math/distributions/chi_squared.hpp>
#include <boost/math/distributions/normal.hpp>
#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <boost/math/quadrature/tanh_sinh.hpp>

namespace oracle {

inline double mean(const std::vector<double>& x) {
  return std::accumulate(x.begin(), x.end(), 0.0) / static_cast<double>(x.size());
}

inline double variance(const std::vector<double>& x) {
  const double m = mean(x);
  double s = 0.0;
  for (double v : x) s += (v - m) * (v - m);
  return s / static_cast<double>(x.size() - 1);
}

// Standard error of the sample mean for iid draws.
inline double se(const std::vector<double>& x) { return std::sqrt(variance(x) / static_cast<double>(x.size())); }

// Asymptotic Kolmogorov distribution survival function.
inline double kolmogorov_survival(double lambda) {
  if (lambda < 0.2) return 1.0;
  double sum = 0.0;
  for (int k = 1; k <= 100; ++k) {
    const double term = std::exp(-2.0 * k * k * lambda * lambda);
    sum += (k % 2 ? 1.0 : -1.0) * term;
    if (term < 1e-16) break;
  }
  return std::clamp(2.0 * sum, 0.0, 1.0);
}

// One-sample KS p-value with the Stephens small-sample correction.
inline double ks_pvalue(std::vector<double> x, const std::function<double(double)>& cdf) {
  std::sort(x.begin(), x.end());
  const double n = static_cast<double>(x.size());
  double d = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double f = cdf(x[i]);
    d = std::max({d, f - static_cast<double>(i) / n, static_cast<double>(i + 1) / n - f});
  }
  const double sn = std::sqrt(n);
  return kolmogorov_survival((sn + 0.12 + 0.11 / sn) * d);
}

// Two-sample KS p-value.
inline double ks2_pvalue(std::vector<double> a, std::vector<double> b) {
  std::sort(a.begin(), a.end());
  std::sort(b.begin(), b.end());
  const double na = static_cast<double>(a.size());
  const double nb = static_cast<double>(b.size());
  std::size_t i = 0, j = 0;
  double d = 0.0;
  while (i < a.size() && j < b.size()) {
    const double v = std::min(a[i], b[j]);
    while (i < a.size() && a[i] <= v) ++i;
    while (j < b.size() && b[j] <= v) ++j;
    d = std::max(d, std::abs(static_cast<double>(i) / na - static_cast<double>(j) / nb));
  }
  const double ne = std::sqrt(na * nb / (na + nb));
  return kolmogorov_survival((ne + 0.12 + 0.11 / ne) * d);
}

inline double chi2_survival(double stat, double dof) {
  return boost::math::cdf(boost::math::complement(boost::math::chi_squared(dof), stat));
}

// Pearson chi-square of integer counts against probabilities over
// 0..probs.size()-1; cells with expected count < 5 are pooled with their
// neighbours from the tails inward.
inline double chi2_pvalue(const std::vector<std::size_t>& observed, const std::vector<double>& probs) {
  const double n = static_cast<double>(std::accumulate(observed.begin(), observed.end(), std::size_t{0}));
  std::vector<double> obs, expct;
  double o = 0.0, e = 0.0;
  for (std::size_t k = 0; k < probs.size(); ++k) {
    o += k < observed.size() ? static_cast<double>(observed[k]) : 0.0;
    e += n * probs[k];
    if (e >= 5.0) {
      obs.push_back(o);
      expct.push_back(e);
      o = e = 0.0;
    }
  }
  for (std::size_t k = probs.size(); k < observed.size(); ++k) o += static_cast<double>(observed[k]);
  if (!obs.empty()) {
    obs.back() += o;
    expct.back() += e;
  }
  double stat = 0.0;
  for (std::size_t k = 0; k < obs.size(); ++k) stat += (obs[k] - expct[k]) * (obs[k] - expct[k]) / expct[k];
  return chi2_survival(stat, static_cast<double>(obs.size()) - 1.0);
}

inline double integrate(const std::function<double(double)>& f, double a, double b) {
  return boost::math::quadrature::gauss_kronrod<double, 61>::integrate(f, a, b, 15, 1e-12);
}

inline double std_normal_cdf(double x) { return boost::math::cdf(boost::math::normal(), x); }
inline double std_normal_pdf(double x) { return boost::math::pdf(boost::math::normal(), x); }

// |a - b| in units of the combined standard error.
inline double z_score(double a, double se_a, double b, double se_b = 0.0) {
  return std::abs(a - b) / std::sqrt(se_a * se_a + se_b * se_b);
}

}  // namespace oracle
