#include "coxkit/kernel_gp.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <sstream>
#include <string>

#include "coxkit/errors.hpp"

namespace coxkit {

void GpHyper::validate() const {
  if (!std::isfinite(mu)) throw InputError("GP mean must be finite");
  if (!(sigma2 > 0.0) || !std::isfinite(sigma2)) throw InputError("GP variance sigma2 must be > 0");
  if (!(tau2 > 0.0) || !std::isfinite(tau2)) throw InputError("GP length-scale tau2 must be > 0");
  if (!(gamma > 0.0 && gamma <= 2.0)) throw InputError("GP shape gamma must lie in (0, 2]");
}

double squared_distance(const Point& a, const Point& b) {
  if (a.size() != b.size() || a.size() == 0) {
    throw InputError("point dimension mismatch (" + std::to_string(a.size()) + " vs " +
                     std::to_string(b.size()) + ")");
  }
  return (a - b).squaredNorm();
}

double kernel_at_squared_distance(const GpHyper& h, double d2) {
  if (d2 == 0.0) return h.sigma2;
  double p;
  if (h.gamma == 2.0) {
    p = d2;
  } else {
    const double r = std::sqrt(d2);
    if (h.gamma == 1.0) {
      p = r;
    } else if (h.gamma == 1.5) {
      p = r * std::sqrt(r);
    } else {
      p = std::pow(r, h.gamma);
    }
  }
  return h.sigma2 * std::exp(-p / (2.0 * h.tau2));
}

double kernel_eval(const GpHyper& h, const Point& s, const Point& s_prime) {
  return kernel_at_squared_distance(h, squared_distance(s, s_prime));
}

StationaryCovariance::StationaryCovariance(const GpHyper& h) : h_(h) { h_.validate(); }

double StationaryCovariance::cov(const Site& a, const Site& b) const {
  return kernel_at_squared_distance(h_, squared_distance(a.x, b.x));
}

std::vector<Site> as_sites(const std::vector<Point>& locations, int t) {
  std::vector<Site> out;
  out.reserve(locations.size());
  for (const auto& p : locations) out.push_back(Site{t, p});
  return out;
}

Eigen::VectorXd mean_vector(const SiteCovariance& cov, std::span<const Site> sites) {
  Eigen::VectorXd m(sites.size());
  for (std::size_t i = 0; i < sites.size(); ++i) m(i) = cov.mean(sites[i]);
  return m;
}

Eigen::MatrixXd cov_matrix(const SiteCovariance& cov, std::span<const Site> sites) {
  const auto n = static_cast<Eigen::Index>(sites.size());
  Eigen::MatrixXd k(n, n);
  for (Eigen::Index j = 0; j < n; ++j) {
    k(j, j) = cov.cov(sites[j], sites[j]);
    for (Eigen::Index i = j + 1; i < n; ++i) {
      const double v = cov.cov(sites[i], sites[j]);
      k(i, j) = v;
      k(j, i) = v;
    }
  }
  return k;
}

Eigen::MatrixXd cross_cov(const SiteCovariance& cov, std::span<const Site> rows,
                          std::span<const Site> cols) {
  Eigen::MatrixXd k(rows.size(), cols.size());
  for (std::size_t j = 0; j < cols.size(); ++j) {
    for (std::size_t i = 0; i < rows.size(); ++i) k(i, j) = cov.cov(rows[i], cols[j]);
  }
  return k;
}

namespace {

bool try_cholesky(const Eigen::MatrixXd& m, Eigen::MatrixXd& lower) {
  Eigen::LLT<Eigen::MatrixXd> llt(m);
  if (llt.info() != Eigen::Success) return false;
  lower = llt.matrixL();
  for (Eigen::Index i = 0; i < lower.rows(); ++i) {
    if (!(lower(i, i) > 0.0) || !std::isfinite(lower(i, i))) return false;
  }
  return true;
}

}  // namespace

JitteredCholesky cholesky_with_jitter(const Eigen::MatrixXd& m, double scale) {
  JitteredCholesky out;
  if (m.rows() == 0) return out;
  if (try_cholesky(m, out.lower)) return out;
  const double base = scale > 0.0 ? scale : std::max(m.diagonal().maxCoeff(), 1e-300);
  for (double j = 1e-10 * base; j <= 1e-6 * base * (1.0 + 1e-9); j *= 10.0) {
    Eigen::MatrixXd shifted = m;
    shifted.diagonal().array() += j;
    if (try_cholesky(shifted, out.lower)) {
      out.jitter = j;
      return out;
    }
  }
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(m, Eigen::EigenvaluesOnly);
  std::ostringstream msg;
  msg << "Cholesky factorization failed at maximum jitter " << 1e-6 * base
      << "; minimum eigenvalue estimate " << eig.eigenvalues().minCoeff();
  throw NumericalError(msg.str());
}

CovFactor build_cov_factor(const GpHyper& h, const std::vector<Point>& locations) {
  h.validate();
  if (locations.empty()) throw InputError("build_cov_factor needs at least one location");
  for (const auto& p : locations) {
    if (!p.allFinite()) throw InputError("build_cov_factor: non-finite location");
  }
  const StationaryCovariance cov(h);
  const auto sites = as_sites(locations);
  CovFactor f;
  f.locations = locations;
  f.matrix = cov_matrix(cov, sites);
  auto chol = cholesky_with_jitter(f.matrix, h.sigma2);
  f.lower = std::move(chol.lower);
  f.jitter_used = chol.jitter;
  return f;
}

GaussianLaw conditional_law(const SiteCovariance& cov, std::span<const Site> known,
                            const Eigen::VectorXd& known_values, std::span<const Site> query) {
  if (static_cast<std::size_t>(known_values.size()) != known.size()) {
    throw InputError("conditional_law: known values and locations differ in length");
  }
  GaussianLaw law;
  law.mean = mean_vector(cov, query);
  law.cov = cov_matrix(cov, query);
  law.scale = cov.scale();
  if (known.empty() || query.empty()) return law;

  // Nugget floor as in IncrementalFactor, on both the known and the query
  // diagonal, so that draws from this law can be conditioned on later.
  const double floor = 1e-10 * cov.scale();
  law.cov.diagonal().array() += floor;
  Eigen::MatrixXd kk = cov_matrix(cov, known);
  kk.diagonal().array() += floor;
  const auto chol = cholesky_with_jitter(kk, cov.scale());
  const auto lower = chol.lower.triangularView<Eigen::Lower>();
  Eigen::MatrixXd v = cross_cov(cov, known, query);
  lower.solveInPlace(v);
  Eigen::VectorXd w = known_values - mean_vector(cov, known);
  lower.solveInPlace(w);
  law.mean.noalias() += v.transpose() * w;
  law.cov.noalias() -= v.transpose() * v;
  law.cov = 0.5 * (law.cov + law.cov.transpose()).eval();
  return law;
}

GaussianLaw gp_conditional(const GpHyper& h, const std::vector<Point>& known_locs,
                           const Eigen::VectorXd& known_vals, const std::vector<Point>& new_locs) {
  const StationaryCovariance cov(h);
  const auto known = as_sites(known_locs);
  const auto query = as_sites(new_locs);
  return conditional_law(cov, known, known_vals, query);
}

Eigen::VectorXd draw_gaussian(const GaussianLaw& law, Rng& rng) {
  const auto n = law.mean.size();
  Eigen::VectorXd eps(n);
  for (Eigen::Index i = 0; i < n; ++i) eps(i) = draw_std_normal(rng);
  if (n == 0 || law.cov.diagonal().maxCoeff() <= 0.0) return law.mean;
  try {
    const auto chol = cholesky_with_jitter(law.cov, law.scale);
    return law.mean + chol.lower.triangularView<Eigen::Lower>() * eps;
  } catch (const NumericalError&) {
    // Conditional covariances of dense query sets can be indefinite at
    // rounding level; fall back to the clipped symmetric square root.
    const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(law.cov);
    if (es.info() != Eigen::Success || es.eigenvalues().minCoeff() < -1e-4 * law.scale) throw;
    const Eigen::VectorXd root = es.eigenvalues().cwiseMax(0.0).cwiseSqrt();
    return law.mean + es.eigenvectors() * (root.asDiagonal() * eps);
  }
}

double gaussian_log_density(const Eigen::VectorXd& x, const Eigen::VectorXd& mean,
                            const Eigen::MatrixXd& lower) {
  const auto n = x.size();
  Eigen::VectorXd r = x - mean;
  lower.triangularView<Eigen::Lower>().solveInPlace(r);
  const double logdet = 2.0 * lower.diagonal().array().log().sum();
  return -0.5 * r.squaredNorm() - 0.5 * logdet - 0.5 * static_cast<double>(n) * std::log(2.0 * std::numbers::pi);
}

// ---------------------------------------------------------------------------

IncrementalFactor::IncrementalFactor(const SiteCovariance& cov, std::vector<Site> sites,
                                     Eigen::VectorXd values)
    : sites_(std::move(sites)), values_(std::move(values)) {
  if (static_cast<std::size_t>(values_.size()) != sites_.size()) {
    throw InputError("IncrementalFactor: values and sites differ in length");
  }
  rebuild(cov);
}

void IncrementalFactor::reserve(std::size_t n) {
  if (static_cast<Eigen::Index>(n) <= l_.rows()) return;
  const auto rows = static_cast<std::size_t>(l_.rows());
  const std::size_t cap = std::max<std::size_t>(n, rows + rows / 2 + 16);
  Eigen::MatrixXd grown = Eigen::MatrixXd::Zero(cap, cap);
  const auto keep = static_cast<Eigen::Index>(std::min(n_, rows));
  grown.topLeftCorner(keep, keep) = l_.topLeftCorner(keep, keep);
  l_.swap(grown);
}

void IncrementalFactor::rebuild(const SiteCovariance& cov) {
  n_ = sites_.size();
  const double floor = 1e-10 * cov.scale();
  Eigen::MatrixXd m = cov_matrix(cov, sites_);
  m.diagonal().array() += floor;
  auto chol = cholesky_with_jitter(m, cov.scale());
  jitter_ = floor + chol.jitter;
  l_.resize(0, 0);
  reserve(n_);
  l_.topLeftCorner(n_, n_) = chol.lower;
  white_ = values_ - mean_vector(cov, sites_);
  l_.topLeftCorner(n_, n_).triangularView<Eigen::Lower>().solveInPlace(white_);
}

Eigen::MatrixXd IncrementalFactor::solve_cross(const SiteCovariance& cov,
                                               std::span<const Site> query) const {
  Eigen::MatrixXd v = cross_cov(cov, sites_, query);
  if (n_ > 0) l_.topLeftCorner(n_, n_).triangularView<Eigen::Lower>().solveInPlace(v);
  return v;
}

double IncrementalFactor::mean_from(const SiteCovariance& cov, const Site& s,
                                    const Eigen::Ref<const Eigen::VectorXd>& v) const {
  return cov.mean(s) + (n_ > 0 ? v.dot(white_) : 0.0);
}

double IncrementalFactor::var_from(const SiteCovariance& cov, const Site& s,
                                   const Eigen::Ref<const Eigen::VectorXd>& v) const {
  return cov.cov(s, s) + jitter_ - (n_ > 0 ? v.squaredNorm() : 0.0);
}

IncrementalFactor::Prediction IncrementalFactor::predict(const SiteCovariance& cov, const Site& s) const {
  Prediction p;
  const std::span<const Site> q(&s, 1);
  p.v = solve_cross(cov, q).col(0);
  p.mean = mean_from(cov, s, p.v);
  p.var = var_from(cov, s, p.v);
  return p;
}

bool IncrementalFactor::extend(const SiteCovariance& cov, const Site& s, double value) {
  const std::span<const Site> q(&s, 1);
  const Eigen::VectorXd v = solve_cross(cov, q).col(0);
  return extend(cov, s, value, v);
}

bool IncrementalFactor::extend(const SiteCovariance& cov, const Site& s, double value,
                               const Eigen::Ref<const Eigen::VectorXd>& v) {
  const double schur = var_from(cov, s, v);
  sites_.push_back(s);
  values_.conservativeResize(values_.size() + 1);
  values_(values_.size() - 1) = value;
  if (!(schur > 1e-12 * cov.scale())) {
    rebuild(cov);
    return false;
  }
  reserve(n_ + 1);
  const double diag = std::sqrt(schur);
  l_.row(n_).head(n_) = v.transpose();
  l_(n_, n_) = diag;
  const double resid = value - cov.mean(s) - (n_ > 0 ? v.dot(white_) : 0.0);
  white_.conservativeResize(n_ + 1);
  white_(n_) = resid / diag;
  ++n_;
  return true;
}

bool IncrementalFactor::extend_block(const SiteCovariance& cov, std::span<const Site> sites,
                                     const Eigen::VectorXd& values) {
  const auto k = static_cast<Eigen::Index>(sites.size());
  if (values.size() != k) throw InputError("extend_block: values and sites differ in length");
  if (k == 0) return true;
  return extend_block(cov, sites, values, cross_cov(cov, sites_, sites), cov_matrix(cov, sites));
}

bool IncrementalFactor::extend_block(const SiteCovariance& cov, std::span<const Site> sites,
                                     const Eigen::VectorXd& values, Eigen::MatrixXd cross, Eigen::MatrixXd block) {
  const auto k = static_cast<Eigen::Index>(sites.size());
  if (values.size() != k || block.rows() != k || block.cols() != k || cross.cols() != k ||
      cross.rows() != static_cast<Eigen::Index>(n_)) {
    throw InputError("extend_block: sizes of values, cross and block covariances disagree");
  }
  if (k == 0) return true;
  Eigen::MatrixXd& v = cross;
  if (n_ > 0) l_.topLeftCorner(n_, n_).triangularView<Eigen::Lower>().solveInPlace(v);
  Eigen::MatrixXd& schur = block;
  schur.diagonal().array() += jitter_;
  if (n_ > 0) schur.noalias() -= v.transpose() * v;
  Eigen::VectorXd resid = values - mean_vector(cov, sites);
  if (n_ > 0) resid.noalias() -= v.transpose() * white_;

  sites_.insert(sites_.end(), sites.begin(), sites.end());
  const auto old = values_.size();
  values_.conservativeResize(old + k);
  values_.tail(k) = values;

  Eigen::LLT<Eigen::MatrixXd> llt(schur);
  bool ok = llt.info() == Eigen::Success;
  if (ok) {
    const auto& d = llt.matrixLLT();
    for (Eigen::Index i = 0; i < k; ++i) {
      if (!(d(i, i) > std::sqrt(1e-12 * cov.scale()))) ok = false;
    }
  }
  if (!ok) {
    rebuild(cov);
    return false;
  }
  const std::size_t n = n_;
  reserve(n + static_cast<std::size_t>(k));
  const auto nn = static_cast<Eigen::Index>(n);
  l_.block(nn, 0, k, nn) = v.transpose();
  l_.block(nn, nn, k, k) = llt.matrixL();
  l_.block(0, nn, nn, k).setZero();
  llt.matrixL().solveInPlace(resid);
  white_.conservativeResize(nn + k);
  white_.tail(k) = resid;
  n_ = n + static_cast<std::size_t>(k);
  return true;
}

void IncrementalFactor::set_values(const SiteCovariance& cov, Eigen::VectorXd values) {
  if (static_cast<std::size_t>(values.size()) != n_) throw InputError("set_values: wrong number of values");
  values_ = std::move(values);
  white_ = values_ - mean_vector(cov, sites_);
  if (n_ > 0) l_.topLeftCorner(n_, n_).triangularView<Eigen::Lower>().solveInPlace(white_);
}

Eigen::MatrixXd IncrementalFactor::inverse() const {
  Eigen::MatrixXd linv = Eigen::MatrixXd::Identity(n_, n_);
  l_.topLeftCorner(n_, n_).triangularView<Eigen::Lower>().solveInPlace(linv);
  return linv.transpose() * linv;
}

}  // namespace coxkit
