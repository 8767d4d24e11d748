#pragma once

#include <cstddef>

#include <Eigen/Dense>

#include "coxkit/numerics.hpp"

namespace coxkit {

// Region B = {u : A u > -gamma} for a lower-triangular A with positive
// diagonal.
struct ConstraintRegion {
  Eigen::MatrixXd a_lower;
  Eigen::VectorXd gamma_vec;
};

// SN(xi, Sigma, W): the law of (U1 + xi | U0 > -W xi) where (U0, U1) is a
// zero-mean Gaussian with Cov(U0) = I + W Sigma W', Cov(U1, U0) = Sigma W'.
// Density: phi_d(z - xi; Sigma) Phi_m(W z; I) / Phi_m(W xi; Gamma).
class SkewNormalSpec {
 public:
  SkewNormalSpec(Eigen::VectorXd xi, Eigen::MatrixXd sigma, Eigen::MatrixXd w);

  std::size_t dim() const { return static_cast<std::size_t>(xi_.size()); }
  std::size_t n_constraints() const { return static_cast<std::size_t>(w_.rows()); }

  const Eigen::VectorXd& xi() const { return xi_; }
  const Eigen::MatrixXd& sigma() const { return sigma_; }
  const Eigen::MatrixXd& w() const { return w_; }
  const Eigen::MatrixXd& gamma_mat() const { return gamma_mat_; }
  // Delta' = W Sigma.
  Eigen::MatrixXd delta_t() const { return w_ * sigma_; }
  const Eigen::VectorXd& gamma_vec() const { return gamma_vec_; }

  // Sigma (+ jitter) = L L'.
  const Eigen::MatrixXd& sigma_lower() const { return sigma_lower_; }
  double sigma_jitter() const { return sigma_jitter_; }
  // Gamma = A A'.
  const Eigen::MatrixXd& gamma_lower() const { return gamma_lower_; }
  double gamma_jitter() const { return gamma_jitter_; }

  ConstraintRegion constraint_region() const { return {gamma_lower_, gamma_vec_}; }

  // B = W L and the lower factor of I_d + B'B; the conditional covariance
  // Sigma - Delta Gamma^{-1} Delta' equals L (I + B'B)^{-1} L'.
  const Eigen::MatrixXd& whitened_design() const { return b_; }
  const Eigen::MatrixXd& posterior_lower() const { return post_lower_; }

 private:
  Eigen::VectorXd xi_;
  Eigen::MatrixXd sigma_;
  Eigen::MatrixXd w_;
  Eigen::MatrixXd gamma_mat_;
  Eigen::VectorXd gamma_vec_;
  Eigen::MatrixXd sigma_lower_;
  Eigen::MatrixXd gamma_lower_;
  Eigen::MatrixXd b_;
  Eigen::MatrixXd post_lower_;
  double sigma_jitter_ = 0.0;
  double gamma_jitter_ = 0.0;
};

// log Phi_m(gamma; Gamma). Exact when Gamma is diagonal, otherwise plain
// Monte Carlo with `draws` samples.
double log_orthant_probability(const SkewNormalSpec& spec, Rng& rng, std::size_t draws = 100000);

// Log density with a precomputed log normalizer.
double sn_log_density(const SkewNormalSpec& spec, const Eigen::VectorXd& z, double log_normalizer);
double sn_log_density(const SkewNormalSpec& spec, const Eigen::VectorXd& z, Rng& rng,
                      std::size_t orthant_draws = 100000);

// Gibbs sampler for N(0, I_m) restricted to {u : A u > -gamma}. Without a
// start the chain begins at a point drawn coordinate-by-coordinate using the
// triangular structure of A; it then runs `sweeps` full sweeps (0 means m).
Eigen::VectorXd sample_constrained_gaussian(const ConstraintRegion& region, std::size_t sweeps, Rng& rng,
                                            const Eigen::VectorXd* start = nullptr);

// Exact draw of u* given the skew-normal value z: with U0 = W (z - xi) + e,
// e ~ N(0, I) truncated to e > -W z, and u* = A^{-1} U0.
Eigen::VectorXd latent_given_value(const SkewNormalSpec& spec, const Eigen::VectorXd& z, Rng& rng);

// One draw from SN(xi, Sigma, W).
//
// With `current` (a draw from the same law, typically the previous value in
// an outer Gibbs sampler) the latent u* is drawn exactly given it and then
// refreshed by `sweeps` Gibbs sweeps, so the law is preserved exactly.
//
// Without it, u* is first sought by plain rejection from N(0, I) under a
// bounded budget (exact when it succeeds); otherwise the Gibbs chain runs
// `sweeps` sweeps from its triangular start.
Eigen::VectorXd sample_skew_normal(const SkewNormalSpec& spec, Rng& rng, std::size_t sweeps = 0,
                                   const Eigen::VectorXd* current = nullptr);

}  // namespace coxkit
