#include "coxkit/mcmc_common.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "coxkit/errors.hpp"
#include "coxkit/skew_normal.hpp"

namespace coxkit {

namespace {
constexpr double kNegInf = -std::numeric_limits<double>::infinity();
}

void LambdaPrior::validate() const {
  switch (kind) {
    case Kind::Gamma:
      if (!(shape > 0.0) || !(rate > 0.0)) throw InputError("lambda prior: Gamma shape and rate must be > 0");
      break;
    case Kind::Exponential:
      if (!(rate > 0.0)) throw InputError("lambda prior: Exponential rate must be > 0");
      break;
    case Kind::Fixed:
      if (!(value >= 0.0) || !std::isfinite(value)) throw InputError("lambda prior: fixed value must be >= 0");
      break;
  }
}

double LambdaPrior::prior_mean() const {
  switch (kind) {
    case Kind::Gamma:
      return shape / rate;
    case Kind::Exponential:
      return 1.0 / rate;
    case Kind::Fixed:
      break;
  }
  return value;
}

double LambdaPrior::draw_prior(Rng& rng) const {
  switch (kind) {
    case Kind::Gamma:
      return draw_gamma(shape, rate, rng);
    case Kind::Exponential:
      return draw_gamma(1.0, rate, rng);
    case Kind::Fixed:
      break;
  }
  return value;
}

double LambdaPrior::draw_posterior(double count, double exposure, Rng& rng) const {
  switch (kind) {
    case Kind::Gamma:
      return draw_gamma(shape + count, rate + exposure, rng);
    case Kind::Exponential:
      return draw_gamma(1.0 + count, rate + exposure, rng);
    case Kind::Fixed:
      break;
  }
  return value;
}

void HyperPrior::validate(const std::string& name) const {
  auto check = [&](const ParamPrior& p, const char* field, bool positive) {
    if (p.free) {
      if (!(p.low < p.high) || !std::isfinite(p.low) || !std::isfinite(p.high)) {
        throw InputError(name + "." + field + ": uniform prior needs finite low < high");
      }
      if (positive && !(p.low >= 0.0)) throw InputError(name + "." + field + ": uniform bounds must be >= 0");
    } else if (!std::isfinite(p.value) || (positive && !(p.value > 0.0))) {
      throw InputError(name + "." + field + ": invalid fixed value");
    }
  };
  check(mu, "mu", false);
  check(sigma2, "sigma2", true);
  check(tau2, "tau2", true);
  if (!(gamma > 0.0 && gamma <= 2.0)) throw InputError(name + ".gamma must lie in (0, 2]");
}

GpHyper HyperPrior::initial() const { return GpHyper{mu.initial(), sigma2.initial(), tau2.initial(), gamma}; }

HyperPrior HyperPrior::fixed(const GpHyper& h) {
  return HyperPrior{ParamPrior::fixed(h.mu), ParamPrior::fixed(h.sigma2), ParamPrior::fixed(h.tau2), h.gamma};
}

// ---------------------------------------------------------------------------

ThetaLayout::ThetaLayout(const std::vector<HyperPrior>& priors, const std::vector<std::string>& suffixes) {
  if (suffixes.size() != priors.size()) throw InputError("ThetaLayout: one suffix per hyperparameter set");
  for (std::size_t i = 0; i < priors.size(); ++i) {
    const auto& p = priors[i];
    if (p.sigma2.free) slots_.push_back({i, Field::Sigma2, p.sigma2.low, p.sigma2.high, "sigma2" + suffixes[i]});
    if (p.tau2.free) slots_.push_back({i, Field::Tau2, p.tau2.low, p.tau2.high, "tau2" + suffixes[i]});
    if (p.mu.free) slots_.push_back({i, Field::Mu, p.mu.low, p.mu.high, "mu" + suffixes[i]});
  }
}

std::vector<std::string> ThetaLayout::names() const {
  std::vector<std::string> out;
  for (const auto& s : slots_) out.push_back(s.name);
  return out;
}

namespace {

double& field_of(GpHyper& h, ThetaLayout::Field f) {
  switch (f) {
    case ThetaLayout::Field::Sigma2:
      return h.sigma2;
    case ThetaLayout::Field::Tau2:
      return h.tau2;
    case ThetaLayout::Field::Mu:
      break;
  }
  return h.mu;
}

}  // namespace

Eigen::VectorXd ThetaLayout::pack(const std::vector<GpHyper>& hypers) const {
  Eigen::VectorXd z(slots_.size());
  for (std::size_t k = 0; k < slots_.size(); ++k) {
    auto h = hypers.at(slots_[k].hyper);
    const double v = field_of(h, slots_[k].field);
    z(k) = slots_[k].field == Field::Mu ? v : std::log(v);
  }
  return z;
}

void ThetaLayout::unpack(const Eigen::VectorXd& z, std::vector<GpHyper>& hypers) const {
  for (std::size_t k = 0; k < slots_.size(); ++k) {
    field_of(hypers.at(slots_[k].hyper), slots_[k].field) =
        slots_[k].field == Field::Mu ? z(k) : std::exp(z(k));
  }
}

std::vector<double> ThetaLayout::values(const std::vector<GpHyper>& hypers) const {
  std::vector<double> out;
  for (const auto& s : slots_) {
    auto h = hypers.at(s.hyper);
    out.push_back(field_of(h, s.field));
  }
  return out;
}

double ThetaLayout::log_prior(const Eigen::VectorXd& z) const {
  double acc = 0.0;
  for (std::size_t k = 0; k < slots_.size(); ++k) {
    const auto& s = slots_[k];
    const double v = s.field == Field::Mu ? z(k) : std::exp(z(k));
    if (!(v > s.low && v < s.high)) return kNegInf;
    acc -= std::log(s.high - s.low);
    if (s.field != Field::Mu) acc += z(k);
  }
  return acc;
}

// ---------------------------------------------------------------------------

AdaptiveMetropolis::AdaptiveMetropolis(std::size_t dim, std::size_t adapt_start)
    : dim_(dim),
      adapt_start_(adapt_start),
      mean_(Eigen::VectorXd::Zero(static_cast<Eigen::Index>(dim))),
      m2_(Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(dim), static_cast<Eigen::Index>(dim))) {}

void AdaptiveMetropolis::record(const Eigen::VectorXd& x) {
  ++n_;
  const Eigen::VectorXd delta = x - mean_;
  mean_ += delta / static_cast<double>(n_);
  m2_.noalias() += delta * (x - mean_).transpose();
}

Eigen::MatrixXd AdaptiveMetropolis::proposal_covariance() const {
  const auto d = static_cast<Eigen::Index>(dim_);
  const double dd = static_cast<double>(dim_);
  if (n_ < adapt_start_ || n_ < 2) return Eigen::MatrixXd::Identity(d, d) * (0.01 / dd);
  Eigen::MatrixXd c = m2_ / static_cast<double>(n_ - 1);
  c.diagonal().array() += 1e-6;
  return c * (2.38 * 2.38 / dd);
}

bool AdaptiveMetropolis::step(Eigen::VectorXd& x,
                              const std::function<double(const Eigen::VectorXd&)>& log_target, Rng& rng) {
  if (dim_ == 0) return false;
  if (static_cast<std::size_t>(x.size()) != dim_) throw InputError("AdaptiveMetropolis: wrong state length");
  const auto d = static_cast<Eigen::Index>(dim_);
  Eigen::LLT<Eigen::MatrixXd> llt(proposal_covariance());
  Eigen::MatrixXd lower = llt.info() == Eigen::Success
                              ? Eigen::MatrixXd(llt.matrixL())
                              : Eigen::MatrixXd(Eigen::MatrixXd::Identity(d, d) * std::sqrt(0.01 / double(dim_)));
  Eigen::VectorXd eps(d);
  for (Eigen::Index i = 0; i < d; ++i) eps(i) = draw_std_normal(rng);
  const Eigen::VectorXd prop = x + lower.triangularView<Eigen::Lower>() * eps;
  const double u = draw_uniform(rng);
  ++proposals_;
  bool accept = false;
  const double lp = log_target(prop);
  if (lp > kNegInf) {
    const double lc = log_target(x);
    accept = std::log(u) < lp - lc || lc == kNegInf;
  }
  if (accept) {
    x = prop;
    ++accepted_;
  }
  record(x);
  return accept;
}

double AdaptiveMetropolis::acceptance_rate() const {
  return proposals_ ? static_cast<double>(accepted_) / static_cast<double>(proposals_) : 0.0;
}

double gp_log_density(const SiteCovariance& cov, std::span<const Site> sites, const Eigen::VectorXd& values) {
  if (sites.empty()) return 0.0;
  const auto chol = cholesky_with_jitter(cov_matrix(cov, sites), cov.scale());
  return gaussian_log_density(values, mean_vector(cov, sites), chol.lower);
}

// ---------------------------------------------------------------------------

ThinnedDraw draw_thinned_events(double rate, int t, const Region& region, const Design& design,
                                const std::vector<const SiteCovariance*>& covs,
                                std::vector<IncrementalFactor>& factors, const SamplerSettings& settings,
                                Rng& rng) {
  const auto p = design.n_processes();
  if (covs.size() != p || factors.size() != p) throw InputError("thinned block: one factor per process expected");
  ThinnedDraw out;
  const std::uint64_t count = draw_poisson(rate * region.measure(), rng);
  out.proposals = count;
  if (count > settings.rejection_cap) {
    throw NumericalError("thinned block at time " + std::to_string(t) + ": " + std::to_string(count) +
                         " candidate locations exceed the cap of " + std::to_string(settings.rejection_cap));
  }
  out.values.resize(static_cast<Eigen::Index>(count), static_cast<Eigen::Index>(p));
  const std::size_t batch = std::max<std::size_t>(1, settings.batch);

  std::vector<Site> cand;
  // v[j] holds L_j^{-1} k_j(known, candidate), one column per candidate.
  std::vector<Eigen::MatrixXd> v(p);
  Eigen::VectorXd beta(static_cast<Eigen::Index>(p));
  Eigen::Index kept_rows = 0;

  for (std::uint64_t done = 0; done < count;) {
    const auto size = static_cast<std::size_t>(std::min<std::uint64_t>(batch, count - done));
    cand.resize(size);
    for (std::size_t b = 0; b < size; ++b) cand[b] = Site{t, region.sample_uniform(rng)};
    for (std::size_t j = 0; j < p; ++j) v[j] = factors[j].solve_cross(*covs[j], cand);

    for (std::size_t b = 0; b < size; ++b) {
      ++done;
      const auto bi = static_cast<Eigen::Index>(b);
      for (std::size_t j = 0; j < p; ++j) {
        const auto col = v[j].col(bi);
        const double mean = factors[j].mean_from(*covs[j], cand[b], col);
        const double var = std::max(0.0, factors[j].var_from(*covs[j], cand[b], col));
        beta(static_cast<Eigen::Index>(j)) = mean + std::sqrt(var) * draw_std_normal(rng);
      }
      const double eta = design.row(cand[b]).dot(beta);
      if (draw_uniform(rng) < norm_cdf(-eta)) {
        out.locations.push_back(cand[b].x);
        out.values.row(kept_rows++) = beta.transpose();
      }
      if (done == count) break;

      // Kept or not, the revealed value conditions the later candidates.
      const std::size_t rest = size - b - 1;
      for (std::size_t j = 0; j < p; ++j) {
        const Eigen::VectorXd vnew = v[j].col(bi);
        const bool kept = factors[j].extend(*covs[j], cand[b], beta(static_cast<Eigen::Index>(j)), vnew);
        if (rest == 0) continue;
        const std::span<const Site> tail(cand.data() + b + 1, rest);
        if (!kept) {
          // The factor was rebuilt; recompute the remaining columns.
          Eigen::MatrixXd fresh = factors[j].solve_cross(*covs[j], tail);
          Eigen::MatrixXd grown = Eigen::MatrixXd::Zero(fresh.rows(), static_cast<Eigen::Index>(size));
          grown.rightCols(static_cast<Eigen::Index>(rest)) = fresh;
          v[j].swap(grown);
          continue;
        }
        // New row of L^{-1} k(., c) for the remaining candidates c.
        const double diag = factors[j].last_diagonal();
        const auto n_old = v[j].rows();
        Eigen::MatrixXd grown(n_old + 1, static_cast<Eigen::Index>(size));
        grown.topRows(n_old) = v[j];
        grown.row(n_old).setZero();
        for (std::size_t c = b + 1; c < size; ++c) {
          const auto ci = static_cast<Eigen::Index>(c);
          const double k = covs[j]->cov(cand[c], cand[b]);
          grown(n_old, ci) = (k - v[j].col(ci).dot(vnew)) / diag;
        }
        v[j].swap(grown);
      }
    }
  }
  out.values.conservativeResize(kept_rows, static_cast<Eigen::Index>(p));
  return out;
}

Eigen::MatrixXd signed_design(const Design& design, const std::vector<Site>& observed,
                              const std::vector<Eigen::VectorXd>& observed_covariates,
                              const std::vector<Site>& thinned) {
  const auto p = static_cast<Eigen::Index>(design.n_processes());
  Eigen::MatrixXd rows(static_cast<Eigen::Index>(observed.size() + thinned.size()), p);
  for (std::size_t i = 0; i < observed.size(); ++i) {
    const Eigen::VectorXd* w = i < observed_covariates.size() ? &observed_covariates[i] : nullptr;
    rows.row(static_cast<Eigen::Index>(i)) = design.row(observed[i], w).transpose();
  }
  for (std::size_t i = 0; i < thinned.size(); ++i) {
    rows.row(static_cast<Eigen::Index>(observed.size() + i)) = -design.row(thinned[i]).transpose();
  }
  return rows;
}

Eigen::MatrixXd draw_gp_slice(const std::vector<GaussianLaw>& laws, const Eigen::MatrixXd& rows,
                              const Eigen::MatrixXd& current, std::size_t sweeps, Rng& rng) {
  const auto p = static_cast<Eigen::Index>(laws.size());
  const auto k = rows.rows();
  if (rows.cols() != p) throw InputError("GP block: design has wrong number of columns");
  if (current.rows() != rows.rows() || current.cols() != p) throw InputError("GP block: current values have wrong shape");
  Eigen::MatrixXd out(k, p);
  if (k == 0) return out;
  for (const auto& law : laws) {
    if (law.mean.size() != k) throw InputError("GP block: law size differs from the number of sites");
  }
  // Stacked process-major: (beta_0 at all sites, beta_1 at all sites, ...).
  Eigen::VectorXd xi(k * p);
  Eigen::MatrixXd sigma = Eigen::MatrixXd::Zero(k * p, k * p);
  Eigen::MatrixXd w = Eigen::MatrixXd::Zero(k, k * p);
  for (Eigen::Index j = 0; j < p; ++j) {
    xi.segment(j * k, k) = laws[static_cast<std::size_t>(j)].mean;
    sigma.block(j * k, j * k, k, k) = laws[static_cast<std::size_t>(j)].cov;
    for (Eigen::Index i = 0; i < k; ++i) w(i, j * k + i) = rows(i, j);
  }
  const SkewNormalSpec spec(std::move(xi), std::move(sigma), std::move(w));
  Eigen::VectorXd now(k * p);
  for (Eigen::Index j = 0; j < p; ++j) now.segment(j * k, k) = current.col(j);
  const Eigen::VectorXd z = sample_skew_normal(spec, rng, sweeps, &now);
  for (Eigen::Index j = 0; j < p; ++j) out.col(j) = z.segment(j * k, k);
  return out;
}

// ---------------------------------------------------------------------------

IntensityGrid::IntensityGrid(std::vector<Site> sites, std::size_t n_processes, bool keep_trace)
    : sites_(std::move(sites)), keep_trace_(keep_trace) {
  const auto n = static_cast<Eigen::Index>(sites_.size());
  sum_ = Eigen::VectorXd::Zero(n);
  sum_sq_ = Eigen::VectorXd::Zero(n);
  beta_sum_ = Eigen::MatrixXd::Zero(n, static_cast<Eigen::Index>(n_processes));
}

void IntensityGrid::add(const Eigen::VectorXd& lambda, const Eigen::MatrixXd& beta) {
  if (lambda.size() != sum_.size() || beta.rows() != beta_sum_.rows() || beta.cols() != beta_sum_.cols()) {
    throw InputError("IntensityGrid: draw has the wrong shape");
  }
  sum_ += lambda;
  sum_sq_ += lambda.cwiseAbs2();
  beta_sum_ += beta;
  if (keep_trace_) trace_.push_back(lambda);
  ++n_;
}

Eigen::VectorXd IntensityGrid::mean() const {
  if (n_ == 0) return Eigen::VectorXd::Constant(sum_.size(), std::numeric_limits<double>::quiet_NaN());
  return sum_ / static_cast<double>(n_);
}

Eigen::VectorXd IntensityGrid::sd() const {
  if (n_ < 2) return Eigen::VectorXd::Zero(sum_.size());
  const double n = static_cast<double>(n_);
  Eigen::VectorXd var = (sum_sq_ - sum_.cwiseAbs2() / n) / (n - 1.0);
  return var.cwiseMax(0.0).cwiseSqrt();
}

Eigen::MatrixXd IntensityGrid::beta_mean() const {
  if (n_ == 0) return beta_sum_;
  return beta_sum_ / static_cast<double>(n_);
}

Eigen::VectorXd IntensityGrid::quantile(double p) const {
  if (!keep_trace_) throw InputError("IntensityGrid: quantiles need the full trace");
  if (!(p >= 0.0 && p <= 1.0)) throw InputError("quantile level must lie in [0, 1]");
  const auto n = sum_.size();
  Eigen::VectorXd q(n);
  std::vector<double> col(trace_.size());
  for (Eigen::Index i = 0; i < n; ++i) {
    for (std::size_t k = 0; k < trace_.size(); ++k) col[k] = trace_[k](i);
    if (col.empty()) {
      q(i) = std::numeric_limits<double>::quiet_NaN();
      continue;
    }
    std::sort(col.begin(), col.end());
    const double pos = p * static_cast<double>(col.size() - 1);
    const auto lo = static_cast<std::size_t>(std::floor(pos));
    const auto hi = std::min(lo + 1, col.size() - 1);
    q(i) = col[lo] + (pos - static_cast<double>(lo)) * (col[hi] - col[lo]);
  }
  return q;
}

Eigen::MatrixXd draw_grid_beta(const std::vector<GaussianLaw>& laws, Rng& rng) {
  if (laws.empty()) return {};
  Eigen::MatrixXd beta(laws.front().mean.size(), static_cast<Eigen::Index>(laws.size()));
  for (std::size_t j = 0; j < laws.size(); ++j) beta.col(static_cast<Eigen::Index>(j)) = draw_gaussian(laws[j], rng);
  return beta;
}

Eigen::VectorXd intensity_from_beta(const Design& design, std::span<const Site> sites, const Eigen::MatrixXd& beta,
                                    double lambda_star) {
  Eigen::VectorXd lam(static_cast<Eigen::Index>(sites.size()));
  for (std::size_t i = 0; i < sites.size(); ++i) {
    const auto ii = static_cast<Eigen::Index>(i);
    lam(ii) = lambda_star * norm_cdf(design.row(sites[i]).dot(beta.row(ii).transpose()));
  }
  return lam;
}

std::vector<Point> regular_grid(const Region& region, const std::vector<std::size_t>& per_axis) {
  const auto d = region.dim();
  if (per_axis.size() != d) throw InputError("grid resolution needs one entry per axis");
  std::size_t total = 1;
  for (auto n : per_axis) {
    if (n < 1) throw InputError("grid resolution must be >= 1");
    total *= n;
  }
  std::vector<Point> pts;
  pts.reserve(total);
  std::vector<std::size_t> idx(d, 0);
  for (std::size_t k = 0; k < total; ++k) {
    Point x(d);
    for (std::size_t a = 0; a < d; ++a) {
      const auto [lo, hi] = region.bounds()[a];
      x(a) = lo + (hi - lo) * (static_cast<double>(idx[a]) + 0.5) / static_cast<double>(per_axis[a]);
    }
    pts.push_back(std::move(x));
    // The first axis varies fastest.
    for (std::size_t a = 0; a < d; ++a) {
      if (++idx[a] < per_axis[a]) break;
      idx[a] = 0;
    }
  }
  return pts;
}

std::vector<Region> equal_strata(const Region& r, std::size_t n_strata) {
  const auto d = r.dim();
  if (n_strata < 1) throw InputError("number of strata must be >= 1");
  const auto k = static_cast<std::size_t>(std::llround(std::pow(static_cast<double>(n_strata), 1.0 / double(d))));
  std::size_t check = 1;
  for (std::size_t a = 0; a < d; ++a) check *= k;
  if (check != n_strata) {
    throw InputError("number of strata must be a perfect power of the dimension (k^" + std::to_string(d) + ")");
  }
  std::vector<Region> out;
  out.reserve(n_strata);
  std::vector<std::size_t> idx(d, 0);
  for (std::size_t s = 0; s < n_strata; ++s) {
    std::vector<std::pair<double, double>> b(d);
    for (std::size_t a = 0; a < d; ++a) {
      const auto [lo, hi] = r.bounds()[a];
      const double w = (hi - lo) / static_cast<double>(k);
      b[a] = {lo + w * static_cast<double>(idx[a]), idx[a] + 1 == k ? hi : lo + w * static_cast<double>(idx[a] + 1)};
    }
    out.emplace_back(std::move(b));
    for (std::size_t a = 0; a < d; ++a) {
      if (++idx[a] < k) break;
      idx[a] = 0;
    }
  }
  return out;
}

double stratified_integral_draw(const Region& r, const std::vector<Region>& strata, const IntensityField& field,
                                Rng& rng) {
  std::vector<Point> u;
  u.reserve(strata.size());
  for (const auto& s : strata) u.push_back(s.sample_uniform(rng));
  const Eigen::VectorXd lam = field(u, rng);
  if (lam.size() != static_cast<Eigen::Index>(u.size())) throw InputError("intensity field returned wrong size");
  return r.measure() * lam.mean();
}

void IntegralAccumulator::add(double v) {
  ++n_;
  sum_ += v;
  sum_sq_ += v * v;
}

double IntegralAccumulator::se() const {
  if (n_ < 2) return 0.0;
  const double n = static_cast<double>(n_);
  const double var = std::max(0.0, (sum_sq_ - sum_ * sum_ / n) / (n - 1.0));
  return std::sqrt(var / n);
}

IntegralEstimate estimate_integral(const Region& r, const Region& domain, std::size_t n_strata, std::size_t n_draws,
                                   const IntensityField& field, Rng& rng) {
  if (!domain.contains(r)) throw InputError("integration region must lie inside the domain");
  const auto strata = equal_strata(r, n_strata);
  IntegralAccumulator acc;
  for (std::size_t j = 0; j < n_draws; ++j) acc.add(stratified_integral_draw(r, strata, field, rng));
  return {acc.mean(), acc.se(), acc.n()};
}

double empirical_peak_intensity(const PointPattern& pattern, const Region& region, double fraction) {
  const auto n = pattern.events.size();
  if (n == 0) return 0.0;
  if (!(fraction > 0.0 && fraction <= 1.0)) throw InputError("peak-intensity fraction must lie in (0, 1]");
  const auto k = std::max<std::size_t>(1, static_cast<std::size_t>(std::ceil(fraction * static_cast<double>(n))));
  const auto d = region.dim();
  double best = 0.0;
  std::vector<double> dist(n);
  for (std::size_t i = 0; i < n; ++i) {
    const auto& c = pattern.events[i].x;
    for (std::size_t j = 0; j < n; ++j) dist[j] = (pattern.events[j].x - c).cwiseAbs().maxCoeff();
    std::nth_element(dist.begin(), dist.begin() + static_cast<std::ptrdiff_t>(k - 1), dist.end());
    const double h = dist[k - 1];
    if (!(h > 0.0)) continue;
    double vol = 1.0;
    for (std::size_t a = 0; a < d; ++a) {
      const auto [lo, hi] = region.bounds()[a];
      vol *= std::min(hi, c(a) + h) - std::max(lo, c(a) - h);
    }
    if (vol > 0.0) best = std::max(best, static_cast<double>(k) / vol);
  }
  return best > 0.0 ? best : static_cast<double>(n) / region.measure();
}

}  // namespace coxkit
