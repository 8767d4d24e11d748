#include "coxkit/dynamic_gp.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "coxkit/errors.hpp"
#include "coxkit/point_process.hpp"

namespace coxkit {

void DgpSpec::validate() const {
  if (processes.empty()) throw InputError("dynamic GP needs at least one process");
  const auto p = static_cast<Eigen::Index>(processes.size());
  if (transition.size() != 0 && (transition.rows() != p || transition.cols() != p)) {
    throw InputError("transition matrix must be P x P");
  }
  for (std::size_t j = 0; j < processes.size(); ++j) {
    processes[j].init.validate();
    if (!processes[j].deterministic) {
      processes[j].disturbance.validate();
      if (processes[j].disturbance.mu != 0.0) {
        throw InputError("disturbance GP of process " + std::to_string(j) + " must have zero mean");
      }
    }
  }
  if (seasonal) {
    if (seasonal->period < 2) throw InputError("seasonal period must be >= 2");
    for (auto j : seasonal->processes) {
      if (j >= processes.size()) throw InputError("seasonal process index out of range");
    }
  }
}

bool DgpSpec::scalar_transition() const {
  if (transition.size() == 0) return true;
  const Eigen::MatrixXd off = transition - Eigen::MatrixXd(transition.diagonal().asDiagonal());
  return off.cwiseAbs().maxCoeff() == 0.0;
}

double DgpSpec::alpha(std::size_t j) const {
  if (!scalar_transition()) {
    throw UnsupportedConfiguration("only diagonal (scalar per process) transition matrices are supported");
  }
  if (transition.size() == 0) return 1.0;
  return transition(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(j));
}

DgpCovariance::DgpCovariance(const DgpProcess& process, double alpha, int max_time)
    : process_(process), alpha_(alpha) {
  process_.init.validate();
  if (!process_.deterministic) process_.disturbance.validate();
  if (!std::isfinite(alpha_)) throw InputError("transition coefficient must be finite");
  if (max_time < 0) throw InputError("negative time index");
  scale_ = process_.init.sigma2;
  double v = process_.init.sigma2;
  for (int t = 1; t <= max_time; ++t) {
    v = alpha_ * alpha_ * v + (process_.deterministic ? 0.0 : process_.disturbance.sigma2);
    scale_ = std::max(scale_, v);
  }
  for (int n = 0; n <= 2 * max_time; ++n) powers_.push_back(n == 0 ? 1.0 : std::pow(alpha_, n));
  for (int m = 0; m <= max_time; ++m) {
    double sum = 0.0;
    for (int i = 1; i <= m; ++i) sum += power(2 * (m - i));
    weights_.push_back(sum);
  }
}

double DgpCovariance::power(int n) const {
  if (static_cast<std::size_t>(n) < powers_.size()) return powers_[static_cast<std::size_t>(n)];
  return n == 0 ? 1.0 : std::pow(alpha_, n);
}

double DgpCovariance::disturbance_weight(int m) const {
  if (static_cast<std::size_t>(m) < weights_.size()) return weights_[static_cast<std::size_t>(m)];
  double sum = 0.0;
  for (int i = 1; i <= m; ++i) sum += power(2 * (m - i));
  return sum;
}

double DgpCovariance::mean(const Site& a) const {
  if (a.t < 0) throw InputError("negative time index");
  return power(a.t) * process_.init.mu;
}

double DgpCovariance::cov(const Site& a, const Site& b) const {
  if (a.t < 0 || b.t < 0) throw InputError("negative time index");
  const int lo = std::min(a.t, b.t);
  const int gap = std::max(a.t, b.t) - lo;
  const double d2 = squared_distance(a.x, b.x);
  double acc = power(2 * lo) * kernel_at_squared_distance(process_.init, d2);
  if (!process_.deterministic && lo > 0) acc += disturbance_weight(lo) * kernel_at_squared_distance(process_.disturbance, d2);
  return power(gap) * acc;
}

std::vector<DgpCovariance> dgp_covariances(const DgpSpec& spec) {
  std::vector<DgpCovariance> out;
  out.reserve(spec.n_processes());
  for (std::size_t j = 0; j < spec.n_processes(); ++j) out.emplace_back(spec.processes[j], spec.alpha(j));
  return out;
}

double seasonal_predictor(double beta0, double beta1, int t, int period, double phi) {
  if (period < 2) throw InputError("seasonal period must be >= 2");
  return beta0 + beta1 * harmonic_value(t, period, phi);
}

std::vector<Eigen::VectorXd> evolve(const std::vector<Eigen::VectorXd>& values_t,
                                    const std::vector<Point>& locations, const DgpSpec& spec, Rng& rng) {
  spec.validate();
  const auto p = spec.n_processes();
  if (values_t.size() != p) throw InputError("evolve: one value vector per process expected");
  const auto n = static_cast<Eigen::Index>(locations.size());
  for (const auto& v : values_t) {
    if (v.size() != n) throw InputError("evolve: values and locations differ in length");
  }
  std::vector<Eigen::VectorXd> next(p, Eigen::VectorXd::Zero(n));
  for (std::size_t j = 0; j < p; ++j) {
    for (std::size_t l = 0; l < p; ++l) {
      const double g = spec.transition.size() == 0 ? (j == l ? 1.0 : 0.0)
                                                   : spec.transition(static_cast<Eigen::Index>(j),
                                                                     static_cast<Eigen::Index>(l));
      if (g != 0.0) next[j] += g * values_t[l];
    }
  }
  const auto sites = as_sites(locations);
  for (std::size_t j = 0; j < p; ++j) {
    if (spec.processes[j].deterministic || n == 0) continue;
    const StationaryCovariance dist(spec.processes[j].disturbance);
    GaussianLaw law{mean_vector(dist, sites), cov_matrix(dist, sites), dist.scale()};
    next[j] += draw_gaussian(law, rng);
  }
  return next;
}

std::vector<GaussianLaw> dgp_joint_conditional(const DgpSpec& spec, const std::vector<KnownSlice>& known, int t_q,
                                               const std::vector<Point>& locs_q) {
  spec.validate();
  const auto covs = dgp_covariances(spec);
  const auto p = spec.n_processes();
  std::vector<Site> known_sites;
  for (const auto& slice : known) {
    if (static_cast<std::size_t>(slice.values.rows()) != slice.locations.size() ||
        static_cast<std::size_t>(slice.values.cols()) != p) {
      throw InputError("known slice values must be n x P");
    }
    for (const auto& x : slice.locations) known_sites.push_back(Site{slice.t, x});
  }
  const auto query = as_sites(locs_q, t_q);
  std::vector<GaussianLaw> laws;
  for (std::size_t j = 0; j < p; ++j) {
    Eigen::VectorXd vals(known_sites.size());
    Eigen::Index k = 0;
    for (const auto& slice : known) {
      vals.segment(k, slice.values.rows()) = slice.values.col(static_cast<Eigen::Index>(j));
      k += slice.values.rows();
    }
    laws.push_back(conditional_law(covs[j], known_sites, vals, query));
  }
  return laws;
}

BlockConditioner::BlockConditioner(const SiteCovariance& cov, std::span<const Site> sites, Eigen::VectorXd values,
                                   std::vector<std::size_t> starts)
    : mean_(mean_vector(cov, sites)), values_(std::move(values)), starts_(std::move(starts)), scale_(cov.scale()) {
  const auto n = sites.size();
  if (static_cast<std::size_t>(values_.size()) != n) throw InputError("BlockConditioner: values and sites differ");
  if (starts_.empty() || starts_.front() != 0) throw InputError("BlockConditioner: blocks must start at 0");
  for (std::size_t b = 1; b < starts_.size(); ++b) {
    if (starts_[b] < starts_[b - 1] || starts_[b] > n) throw InputError("BlockConditioner: bad block starts");
  }
  // Same nugget floor as IncrementalFactor: a frozen or strongly persistent
  // field makes the joint covariance over all times nearly singular.
  const double floor = 1e-10 * cov.scale();
  Eigen::MatrixXd m = cov_matrix(cov, sites);
  m.diagonal().array() += floor;
  auto chol = cholesky_with_jitter(m, cov.scale());
  lower_ = std::move(chol.lower);
  jitter_ = floor + chol.jitter;
  white_ = values_ - mean_;
  if (n > 0) lower_.triangularView<Eigen::Lower>().solveInPlace(white_);
}

std::size_t BlockConditioner::block_size(std::size_t b) const {
  const std::size_t end = b + 1 < starts_.size() ? starts_[b + 1] : static_cast<std::size_t>(values_.size());
  return end - starts_.at(b);
}

const Eigen::MatrixXd& BlockConditioner::inverse_columns(std::size_t b) {
  if (cached_block_ == b) return cached_cols_;
  const auto n = values_.size();
  const auto s = static_cast<Eigen::Index>(starts_[b]);
  const auto k = static_cast<Eigen::Index>(block_size(b));
  // L^{-1} e_i vanishes above row i, so only the trailing part is solved.
  cached_cols_ = Eigen::MatrixXd::Zero(n - s, k);
  cached_cols_.topRows(k).setIdentity();
  lower_.bottomRightCorner(n - s, n - s).triangularView<Eigen::Lower>().solveInPlace(cached_cols_);
  cached_block_ = b;
  return cached_cols_;
}

GaussianLaw BlockConditioner::conditional(std::size_t b) {
  const auto n = values_.size();
  const auto s = static_cast<Eigen::Index>(starts_.at(b));
  const auto k = static_cast<Eigen::Index>(block_size(b));
  GaussianLaw law;
  law.scale = scale_;
  if (k == 0) return law;
  const Eigen::MatrixXd& y = inverse_columns(b);
  // Q_ss = Y'Y and Q_s. (x - mu) = Y' L^{-1}(x - mu).
  Eigen::MatrixXd qss = Eigen::MatrixXd::Zero(k, k);
  qss.selfadjointView<Eigen::Lower>().rankUpdate(y.transpose());
  qss = qss.selfadjointView<Eigen::Lower>();
  const Eigen::VectorXd proj = y.transpose() * white_.tail(n - s);
  Eigen::LLT<Eigen::MatrixXd> llt(qss);
  if (llt.info() != Eigen::Success) throw NumericalError("conditional precision block is not positive definite");
  law.cov = llt.solve(Eigen::MatrixXd::Identity(k, k));
  law.cov = 0.5 * (law.cov + law.cov.transpose()).eval();
  // E[x_s | rest] = x_s - Q_ss^{-1} Q_s. (x - mu).
  law.mean = values_.segment(s, k) - llt.solve(proj);
  return law;
}

void BlockConditioner::set_block(std::size_t b, const Eigen::VectorXd& v) {
  const auto n = values_.size();
  const auto s = static_cast<Eigen::Index>(starts_.at(b));
  const auto k = static_cast<Eigen::Index>(block_size(b));
  if (v.size() != k) throw InputError("BlockConditioner: block value has wrong length");
  if (k == 0) return;
  const Eigen::VectorXd delta = v - values_.segment(s, k);
  values_.segment(s, k) = v;
  white_.tail(n - s).noalias() += inverse_columns(b) * delta;
}

}  // namespace coxkit
