#pragma once

#include <span>
#include <vector>

namespace coxkit {

struct SeriesSummary {
  double mean = 0.0;
  double sd = 0.0;
  double q025 = 0.0;
  double q500 = 0.0;
  double q975 = 0.0;
  double ess = 0.0;
};

// Effective sample size from the initial monotone sequence estimator of the
// integrated autocorrelation time (sums of adjacent autocovariance pairs,
// truncated at the first non-positive pair and forced non-increasing).
double effective_sample_size(std::span<const double> x);

double sample_mean(std::span<const double> x);
double sample_sd(std::span<const double> x);
// Linear interpolation between order statistics.
double sample_quantile(std::span<const double> x, double p);

SeriesSummary summarize(std::span<const double> x);

}  // namespace coxkit
