#pragma once

#include <cstddef>
#include <cstdint>
#include <random>

namespace coxkit {

using Rng = std::mt19937_64;

double norm_pdf(double x);
double norm_log_pdf(double x);
double norm_cdf(double x);
// log Phi(x), accurate far into the lower tail.
double norm_log_cdf(double x);
double norm_quantile(double p);

double draw_std_normal(Rng& rng);
// Uniform on [0, 1).
double draw_uniform(Rng& rng);
// Gamma with shape-rate parameterization.
double draw_gamma(double shape, double rate, Rng& rng);
std::uint64_t draw_poisson(double mean, Rng& rng);

// Standard normal restricted to (lo, hi); either bound may be infinite.
// Inverse-CDF in the central regime, exponential-proposal rejection when
// the interval lies more than 6 standard deviations into a tail.
double truncated_std_normal(double lo, double hi, Rng& rng);

// Poisson(mean) conditioned on being >= lower.
std::uint64_t truncated_poisson_at_least(double mean, std::uint64_t lower, Rng& rng);

}  // namespace coxkit
