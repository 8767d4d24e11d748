#include <cmath>
#include <vector>

#include "doctest.h"

#include "coxkit/diagnostics.hpp"
#include "coxkit/errors.hpp"
#include "coxkit/numerics.hpp"

using namespace coxkit;

namespace {

std::vector<double> ar1(double phi, std::size_t n, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<double> x(n);
  double v = draw_std_normal(rng) / std::sqrt(1.0 - phi * phi);
  for (auto& e : x) {
    v = phi * v + draw_std_normal(rng);
    e = v;
  }
  return x;
}

}  // namespace

TEST_CASE("iid draws have an effective size close to n") {
  const auto x = ar1(0.0, 20000, 1);
  const double ess = effective_sample_size(x);
  CHECK(ess > 0.9 * 20000);
  CHECK(ess < 1.1 * 20000);
}

TEST_CASE("AR(1) effective size matches n (1 - phi) / (1 + phi)") {
  for (double phi : {0.5, 0.9}) {
    const std::size_t n = 100000;
    const auto x = ar1(phi, n, 2);
    const double truth = static_cast<double>(n) * (1.0 - phi) / (1.0 + phi);
    INFO("phi = ", phi);
    CHECK(effective_sample_size(x) == doctest::Approx(truth).epsilon(0.1));
  }
}

TEST_CASE("alternating series is not credited with more than n") {
  std::vector<double> x;
  for (int i = 0; i < 1000; ++i) x.push_back(i % 2 ? 1.0 : -1.0);
  CHECK(effective_sample_size(x) <= 1000.0);
}

TEST_CASE("constant and short series fall back to their length") {
  CHECK(effective_sample_size(std::vector<double>(50, 3.0)) == 50.0);
  CHECK(effective_sample_size(std::vector<double>{1.0, 2.0}) == 2.0);
  CHECK(effective_sample_size(std::vector<double>{}) == 0.0);
}

TEST_CASE("quantiles interpolate between order statistics") {
  const std::vector<double> x{4.0, 1.0, 3.0, 2.0, 5.0};
  CHECK(sample_quantile(x, 0.0) == 1.0);
  CHECK(sample_quantile(x, 1.0) == 5.0);
  CHECK(sample_quantile(x, 0.5) == 3.0);
  CHECK(sample_quantile(x, 0.1) == doctest::Approx(1.4));
  CHECK(sample_quantile(std::vector<double>{7.0}, 0.3) == 7.0);
  CHECK_THROWS_AS(sample_quantile(std::vector<double>{}, 0.5), InputError);
  CHECK_THROWS_AS(sample_quantile(x, 1.5), InputError);
}

TEST_CASE("moments of a small series") {
  const std::vector<double> x{1.0, 2.0, 3.0, 4.0};
  CHECK(sample_mean(x) == 2.5);
  CHECK(sample_sd(x) == doctest::Approx(std::sqrt(5.0 / 3.0)));
  CHECK(sample_sd(std::vector<double>{2.0}) == 0.0);
}

TEST_CASE("summary of standard normal draws") {
  const auto x = ar1(0.0, 40000, 3);
  const auto s = summarize(x);
  CHECK(std::abs(s.mean) < 0.02);
  CHECK(s.sd == doctest::Approx(1.0).epsilon(0.02));
  CHECK(s.q025 == doctest::Approx(-1.959964).epsilon(0.03));
  CHECK(s.q975 == doctest::Approx(1.959964).epsilon(0.03));
  CHECK(std::abs(s.q500) < 0.03);
  CHECK(s.ess > 0.9 * 40000);
}
