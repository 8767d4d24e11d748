#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "coxkit/kernel_gp.hpp"
#include "coxkit/numerics.hpp"
#include "coxkit/point_process.hpp"

namespace coxkit {

// Prior on a dominating rate lambda*. Gamma and Exponential are conjugate
// (shape-rate); Fixed pins the rate.
struct LambdaPrior {
  enum class Kind { Gamma, Exponential, Fixed };
  Kind kind = Kind::Gamma;
  double shape = 1.0;
  double rate = 1.0;
  double value = 1.0;

  static LambdaPrior gamma(double shape, double rate) { return {Kind::Gamma, shape, rate, 1.0}; }
  static LambdaPrior exponential(double rate) { return {Kind::Exponential, 1.0, rate, 1.0}; }
  static LambdaPrior fixed(double value) { return {Kind::Fixed, 1.0, 1.0, value}; }

  void validate() const;
  double prior_mean() const;
  double draw_prior(Rng& rng) const;
  // Draw from the conditional given `count` candidate events over total
  // volume `exposure`: Gamma(shape + count, rate + exposure).
  double draw_posterior(double count, double exposure, Rng& rng) const;
};

// A single hyperparameter: fixed, or uniform on (low, high).
struct ParamPrior {
  bool free = false;
  double value = 0.0;
  double low = 0.0;
  double high = 1.0;

  static ParamPrior fixed(double v) { return {false, v, v, v}; }
  static ParamPrior uniform(double lo, double hi) { return {true, 0.5 * (lo + hi), lo, hi}; }
  double initial() const { return free ? 0.5 * (low + high) : value; }
};

struct HyperPrior {
  ParamPrior mu = ParamPrior::fixed(0.0);
  ParamPrior sigma2 = ParamPrior::fixed(1.0);
  ParamPrior tau2 = ParamPrior::fixed(1.0);
  double gamma = 2.0;

  void validate(const std::string& name) const;
  GpHyper initial() const;
  static HyperPrior fixed(const GpHyper& h);
};

struct SamplerSettings {
  // Gibbs sweeps of the constrained Gaussian sampler; 0 means m.
  std::size_t sn_sweeps = 0;
  // Upper bound on candidate locations per slice in the thinned block.
  std::uint64_t rejection_cap = 1000000;
  // Candidate locations prepared per batch in the thinned-event block.
  std::size_t batch = 16;
};

// Free hyperparameters flattened into an unconstrained vector: log for
// sigma2 and tau2, identity for mu.
class ThetaLayout {
 public:
  enum class Field { Mu, Sigma2, Tau2 };
  struct Slot {
    std::size_t hyper = 0;
    Field field = Field::Mu;
    double low = 0.0;
    double high = 0.0;
    std::string name;
  };

  ThetaLayout() = default;
  // `suffixes[i]` is appended to the column names of hyper i, e.g. "_0".
  ThetaLayout(const std::vector<HyperPrior>& priors, const std::vector<std::string>& suffixes);

  std::size_t dim() const { return slots_.size(); }
  const std::vector<Slot>& slots() const { return slots_; }
  std::vector<std::string> names() const;

  Eigen::VectorXd pack(const std::vector<GpHyper>& hypers) const;
  void unpack(const Eigen::VectorXd& z, std::vector<GpHyper>& hypers) const;
  // Natural-scale values of the free slots.
  std::vector<double> values(const std::vector<GpHyper>& hypers) const;
  // log prior density of the natural parameters plus the log Jacobian of
  // the transform; -inf outside the uniform bounds.
  double log_prior(const Eigen::VectorXd& z) const;

 private:
  std::vector<Slot> slots_;
};

// Gaussian random-walk Metropolis with the empirical covariance of past
// states: (0.1^2/d) I for the first `adapt_start` steps, then
// (2.38^2/d)(C + 1e-6 I).
class AdaptiveMetropolis {
 public:
  explicit AdaptiveMetropolis(std::size_t dim = 0, std::size_t adapt_start = 100);

  // One step from x; returns true on acceptance and overwrites x.
  bool step(Eigen::VectorXd& x, const std::function<double(const Eigen::VectorXd&)>& log_target, Rng& rng);

  std::size_t dim() const { return dim_; }
  std::size_t proposals() const { return proposals_; }
  std::size_t accepted() const { return accepted_; }
  double acceptance_rate() const;
  Eigen::MatrixXd proposal_covariance() const;

 private:
  void record(const Eigen::VectorXd& x);

  std::size_t dim_;
  std::size_t adapt_start_;
  std::size_t n_ = 0;
  Eigen::VectorXd mean_;
  Eigen::MatrixXd m2_;
  std::size_t proposals_ = 0;
  std::size_t accepted_ = 0;
};

// log N(values; mean, K) over `sites`.
double gp_log_density(const SiteCovariance& cov, std::span<const Site> sites, const Eigen::VectorXd& values);

struct ThinnedDraw {
  std::vector<Point> locations;
  // One row per accepted location, one column per process.
  Eigen::MatrixXd values;
  std::uint64_t proposals = 0;
};

// Thinned events of one time slice given the current field. Candidates
// come from a homogeneous process of intensity `rate` on the region; the
// process values at each candidate are drawn from the conditionals held in
// `factors` (which must already contain every current event, thinned ones
// included) and the candidate is kept with probability Phi(-W(s) beta(s)).
// Every candidate, kept or not, is appended to the factors. `proposals`
// counts candidates; more than settings.rejection_cap is a NumericalError.
ThinnedDraw draw_thinned_events(double rate, int t, const Region& region, const Design& design,
                                const std::vector<const SiteCovariance*>& covs,
                                std::vector<IncrementalFactor>& factors, const SamplerSettings& settings,
                                Rng& rng);

// Sign-adjusted design rows: +W(s) for observed events, -W(s) for thinned.
Eigen::MatrixXd signed_design(const Design& design, const std::vector<Site>& observed,
                              const std::vector<Eigen::VectorXd>& observed_covariates,
                              const std::vector<Site>& thinned);

// One draw of all processes at the slice sites from the skew-normal full
// conditional whose Gaussian part is given per process by `laws`. `current`
// (sites x processes) is the present value, used as the warm start that
// keeps the update exact. Returns sites x processes.
Eigen::MatrixXd draw_gp_slice(const std::vector<GaussianLaw>& laws, const Eigen::MatrixXd& rows,
                              const Eigen::MatrixXd& current, std::size_t sweeps, Rng& rng);

// Posterior intensity summaries on a fixed site set.
class IntensityGrid {
 public:
  IntensityGrid() = default;
  IntensityGrid(std::vector<Site> sites, std::size_t n_processes, bool keep_trace);

  const std::vector<Site>& sites() const { return sites_; }
  std::size_t size() const { return sites_.size(); }
  std::size_t n_samples() const { return n_; }
  bool keeps_trace() const { return keep_trace_; }

  // `lambda` holds intensity draws at the sites, `beta` the process draws
  // (sites x processes).
  void add(const Eigen::VectorXd& lambda, const Eigen::MatrixXd& beta);

  Eigen::VectorXd mean() const;
  Eigen::VectorXd sd() const;
  Eigen::MatrixXd beta_mean() const;
  const Eigen::VectorXd& sum_lambda() const { return sum_; }
  const Eigen::VectorXd& sum_lambda_sq() const { return sum_sq_; }
  // Empirical quantile per site; requires keep_trace.
  Eigen::VectorXd quantile(double p) const;

 private:
  std::vector<Site> sites_;
  Eigen::VectorXd sum_;
  Eigen::VectorXd sum_sq_;
  Eigen::MatrixXd beta_sum_;
  std::vector<Eigen::VectorXd> trace_;
  std::size_t n_ = 0;
  bool keep_trace_ = false;
};

// Intensity draws lambda* Phi(W beta) at grid sites given the process laws.
Eigen::MatrixXd draw_grid_beta(const std::vector<GaussianLaw>& laws, Rng& rng);
Eigen::VectorXd intensity_from_beta(const Design& design, std::span<const Site> sites, const Eigen::MatrixXd& beta,
                                    double lambda_star);

// Regular midpoint grid with `per_axis` cells along every axis.
std::vector<Point> regular_grid(const Region& region, const std::vector<std::size_t>& per_axis);

// Equal-volume axis-aligned partition of `r` into k^d cells.
std::vector<Region> equal_strata(const Region& r, std::size_t n_strata);

// One stratified draw of mu(R) (1/J) sum_j lambda(U_j), U_j uniform on
// stratum j. `field` returns intensity values at the given points as one
// joint draw.
using IntensityField = std::function<Eigen::VectorXd(const std::vector<Point>&, Rng&)>;
double stratified_integral_draw(const Region& r, const std::vector<Region>& strata, const IntensityField& field,
                                Rng& rng);

// Streaming mean and naive standard error over iterations.
class IntegralAccumulator {
 public:
  void add(double v);
  std::size_t n() const { return n_; }
  double mean() const { return n_ ? sum_ / static_cast<double>(n_) : 0.0; }
  double se() const;

 private:
  std::size_t n_ = 0;
  double sum_ = 0.0;
  double sum_sq_ = 0.0;
};

struct IntegralEstimate {
  double value = 0.0;
  double se = 0.0;
  std::size_t draws = 0;
};

// Estimator of E[int_R lambda | data] from `n_draws` field draws (one per
// retained iteration), each evaluated at one uniform per stratum.
IntegralEstimate estimate_integral(const Region& r, const Region& domain, std::size_t n_strata, std::size_t n_draws,
                                   const IntensityField& field, Rng& rng);

// Densest event-centred hypercube holding at least `fraction` of the events;
// returns its count divided by its volume. Used to set an Exponential prior
// on lambda* with mean twice this value.
double empirical_peak_intensity(const PointPattern& pattern, const Region& region, double fraction = 0.05);

}  // namespace coxkit
