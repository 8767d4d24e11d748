#include "coxkit/skew_normal.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "coxkit/errors.hpp"
#include "coxkit/kernel_gp.hpp"

namespace coxkit {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

// Bounds on coordinate i of u given the others, from the rows j >= i of
// A u > -gamma (rows above i do not involve u_i). Writing r = A u,
//   A(j,i) u_i > -gamma_j - (r_j - A(j,i) u_i) =: c_j,
// which is a lower bound when A(j,i) > 0 and an upper bound when A(j,i) < 0.
void coordinate_bounds(const Eigen::MatrixXd& a, const Eigen::VectorXd& gamma, const Eigen::VectorXd& r,
                       const Eigen::VectorXd& u, Eigen::Index i, double& lo, double& hi) {
  lo = -kInf;
  hi = kInf;
  const Eigen::Index m = a.rows();
  for (Eigen::Index j = i; j < m; ++j) {
    const double aji = a(j, i);
    if (aji == 0.0) continue;
    const double c = -gamma(j) - (r(j) - aji * u(i));
    const double b = c / aji;
    if (aji > 0.0) {
      lo = std::max(lo, b);
    } else {
      hi = std::min(hi, b);
    }
  }
}

}  // namespace

SkewNormalSpec::SkewNormalSpec(Eigen::VectorXd xi, Eigen::MatrixXd sigma, Eigen::MatrixXd w)
    : xi_(std::move(xi)), sigma_(std::move(sigma)), w_(std::move(w)) {
  const auto d = xi_.size();
  if (d == 0) throw InputError("skew-normal dimension must be >= 1");
  if (sigma_.rows() != d || sigma_.cols() != d) throw InputError("skew-normal Sigma must be d x d");
  if (w_.cols() != d) throw InputError("skew-normal W must have d columns");
  if (!xi_.allFinite() || !sigma_.allFinite() || !w_.allFinite()) {
    throw InputError("skew-normal parameters must be finite");
  }
  const auto m = w_.rows();

  auto sig = cholesky_with_jitter(sigma_, sigma_.diagonal().maxCoeff());
  sigma_lower_ = std::move(sig.lower);
  sigma_jitter_ = sig.jitter;

  b_.noalias() = w_ * sigma_lower_.triangularView<Eigen::Lower>();
  gamma_mat_ = Eigen::MatrixXd::Identity(m, m);
  gamma_mat_.noalias() += b_ * b_.transpose();
  gamma_vec_.noalias() = w_ * xi_;
  if (m > 0) {
    auto gam = cholesky_with_jitter(gamma_mat_, 1.0);
    gamma_lower_ = std::move(gam.lower);
    gamma_jitter_ = gam.jitter;
  } else {
    gamma_lower_.resize(0, 0);
  }

  Eigen::MatrixXd post = Eigen::MatrixXd::Identity(d, d);
  post.noalias() += b_.transpose() * b_;
  Eigen::LLT<Eigen::MatrixXd> llt(post);
  if (llt.info() != Eigen::Success) throw NumericalError("skew-normal: I + B'B factorization failed");
  post_lower_ = llt.matrixL();
}

double log_orthant_probability(const SkewNormalSpec& spec, Rng& rng, std::size_t draws) {
  const auto& g = spec.gamma_mat();
  const auto& gv = spec.gamma_vec();
  const auto m = g.rows();
  if (m == 0) return 0.0;
  const Eigen::MatrixXd off = g - Eigen::MatrixXd(g.diagonal().asDiagonal());
  if (off.cwiseAbs().maxCoeff() == 0.0) {
    double acc = 0.0;
    for (Eigen::Index i = 0; i < m; ++i) acc += norm_log_cdf(gv(i) / std::sqrt(g(i, i)));
    return acc;
  }
  if (draws == 0) throw InputError("orthant probability needs at least one draw");
  const auto& a = spec.gamma_lower();
  std::size_t hits = 0;
  Eigen::VectorXd eps(m);
  for (std::size_t k = 0; k < draws; ++k) {
    for (Eigen::Index i = 0; i < m; ++i) eps(i) = draw_std_normal(rng);
    const Eigen::VectorXd u = a.triangularView<Eigen::Lower>() * eps;
    if (((u + gv).array() > 0.0).all()) ++hits;
  }
  // Half a hit keeps the log finite when the orthant is rarely visited.
  return std::log((hits > 0 ? static_cast<double>(hits) : 0.5) / static_cast<double>(draws));
}

double sn_log_density(const SkewNormalSpec& spec, const Eigen::VectorXd& z, double log_normalizer) {
  if (static_cast<std::size_t>(z.size()) != spec.dim() || !z.allFinite()) {
    throw InputError("sn_log_density: z must be finite with length d");
  }
  double acc = gaussian_log_density(z, spec.xi(), spec.sigma_lower()) - log_normalizer;
  const Eigen::VectorXd wz = spec.w() * z;
  for (Eigen::Index i = 0; i < wz.size(); ++i) acc += norm_log_cdf(wz(i));
  return acc;
}

double sn_log_density(const SkewNormalSpec& spec, const Eigen::VectorXd& z, Rng& rng,
                      std::size_t orthant_draws) {
  return sn_log_density(spec, z, log_orthant_probability(spec, rng, orthant_draws));
}

Eigen::VectorXd sample_constrained_gaussian(const ConstraintRegion& region, std::size_t sweeps, Rng& rng,
                                            const Eigen::VectorXd* start) {
  const auto& a = region.a_lower;
  const auto& g = region.gamma_vec;
  const Eigen::Index m = a.rows();
  if (a.cols() != m || g.size() != m) throw InputError("constraint region dimensions disagree");
  for (Eigen::Index i = 0; i < m; ++i) {
    if (!(a(i, i) > 0.0)) throw InputError("constraint matrix needs a strictly positive diagonal");
  }
  Eigen::VectorXd u = Eigen::VectorXd::Zero(m);
  if (m == 0) return u;
  if (sweeps == 0) sweeps = static_cast<std::size_t>(m);

  Eigen::VectorXd r = Eigen::VectorXd::Zero(m);
  if (start != nullptr) {
    if (start->size() != m) throw InputError("constrained Gaussian start has the wrong length");
    u = *start;
    r.noalias() = a.triangularView<Eigen::Lower>() * u;
    if (!((r + g).array() > -1e-9).all()) throw InputError("constrained Gaussian start is outside the region");
  } else {
    // Feasible start: row i only involves u_1..u_i, so drawing each u_i from
    // its row-i lower bound (given earlier coordinates) satisfies every row.
    for (Eigen::Index i = 0; i < m; ++i) {
      const double partial = a.row(i).head(i).dot(u.head(i));
      const double lo = (-g(i) - partial) / a(i, i);
      u(i) = truncated_std_normal(lo, kInf, rng);
      r(i) = partial + a(i, i) * u(i);
    }
  }

  for (std::size_t k = 0; k < sweeps; ++k) {
    for (Eigen::Index i = 0; i < m; ++i) {
      double lo, hi;
      coordinate_bounds(a, g, r, u, i, lo, hi);
      const double fresh = truncated_std_normal(lo, hi, rng);
      const double delta = fresh - u(i);
      u(i) = fresh;
      r.tail(m - i) += a.col(i).tail(m - i) * delta;
    }
    r.noalias() = a.triangularView<Eigen::Lower>() * u;
  }
  return u;
}

Eigen::VectorXd latent_given_value(const SkewNormalSpec& spec, const Eigen::VectorXd& z, Rng& rng) {
  if (z.size() != spec.xi().size()) throw InputError("latent_given_value: z must have length d");
  const Eigen::VectorXd wz = spec.w() * z;
  Eigen::VectorXd u0 = spec.w() * (z - spec.xi());
  for (Eigen::Index i = 0; i < u0.size(); ++i) u0(i) += truncated_std_normal(-wz(i), kInf, rng);
  return spec.gamma_lower().triangularView<Eigen::Lower>().solve(u0);
}

namespace {

// Plain rejection for u* ~ N(0, I) on {A u > -gamma}, with work bounded by
// about 1e5 multiply-adds.
bool rejection_latent(const ConstraintRegion& region, Rng& rng, Eigen::VectorXd& out) {
  const Eigen::Index m = region.a_lower.rows();
  const auto tries = std::min<std::size_t>(2000, 100000 / static_cast<std::size_t>(m * m));
  Eigen::VectorXd u(m);
  for (std::size_t t = 0; t < tries; ++t) {
    for (Eigen::Index i = 0; i < m; ++i) u(i) = draw_std_normal(rng);
    const Eigen::VectorXd r = region.a_lower.triangularView<Eigen::Lower>() * u;
    if (((r + region.gamma_vec).array() > 0.0).all()) {
      out = u;
      return true;
    }
  }
  return false;
}

}  // namespace

Eigen::VectorXd sample_skew_normal(const SkewNormalSpec& spec, Rng& rng, std::size_t sweeps,
                                   const Eigen::VectorXd* current) {
  const auto d = static_cast<Eigen::Index>(spec.dim());
  const auto m = static_cast<Eigen::Index>(spec.n_constraints());

  // Steps 1-2: u* from the truncated standard Gaussian, u = A u*.
  Eigen::VectorXd guinv = Eigen::VectorXd::Zero(m);
  if (m > 0) {
    const auto region = spec.constraint_region();
    Eigen::VectorXd ustar;
    if (current != nullptr) {
      const Eigen::VectorXd start = latent_given_value(spec, *current, rng);
      ustar = sample_constrained_gaussian(region, sweeps, rng, &start);
    } else if (!rejection_latent(region, rng, ustar)) {
      ustar = sample_constrained_gaussian(region, sweeps, rng);
    }
    // Gamma^{-1} u = A^{-T} u*.
    guinv = spec.gamma_lower().transpose().triangularView<Eigen::Upper>().solve(ustar);
  }

  // Step 3: U1 | U0 = u ~ N(Delta Gamma^{-1} u, L (I + B'B)^{-1} L').
  Eigen::VectorXd eps(d);
  for (Eigen::Index i = 0; i < d; ++i) eps(i) = draw_std_normal(rng);
  Eigen::VectorXd inner = spec.posterior_lower().transpose().triangularView<Eigen::Upper>().solve(eps);
  if (m > 0) inner.noalias() += spec.whitened_design().transpose() * guinv;
  // Step 4.
  return spec.sigma_lower().triangularView<Eigen::Lower>() * inner + spec.xi();
}

}  // namespace coxkit
