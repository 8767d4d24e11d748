#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "coxkit/dynamic_gp.hpp"
#include "coxkit/mcmc_common.hpp"
#include "coxkit/mcmc_spatial.hpp"
#include "coxkit/point_process.hpp"

namespace coxkit {

enum class LambdaMode { Independent, Common };

struct StModel {
  Region region;
  PointPattern data;
  // Observed times 0..n_times-1.
  int n_times = 1;
  Design design;
  // Transition and deterministic flags; hyperparameter values are taken
  // from the priors below.
  DgpSpec dgp;
  std::vector<HyperPrior> init_prior;
  std::vector<HyperPrior> dist_prior;
  LambdaPrior lambda;
  LambdaMode lambda_mode = LambdaMode::Common;

  void validate() const;
  std::size_t n_processes() const { return design.n_processes(); }
};

struct StSlice {
  std::uint64_t k = 0;
  std::vector<Point> thinned;
  Eigen::MatrixXd beta_n;
  Eigen::MatrixXd beta_m;
};

struct StState {
  std::vector<StSlice> slices;
  // One entry in common mode, one per time otherwise.
  std::vector<double> lambda;
  std::vector<DgpProcess> theta;
  std::size_t iteration = 0;

  double lambda_at(int t) const { return lambda.size() == 1 ? lambda[0] : lambda.at(static_cast<std::size_t>(t)); }
};

// Static per-model data: observed events split by time.
struct StData {
  std::vector<std::vector<Site>> sites;
  std::vector<std::vector<Eigen::VectorXd>> covariates;
  static StData split(const StModel& model);
};

StState initial_state(const StModel& model, const StData& data);
std::vector<DgpCovariance> st_covariances(const StModel& model, const std::vector<DgpProcess>& theta);

// All current sites in slice order (observed then thinned, t = 0..T) with
// their values (sites x P) and the first index of every slice.
struct StStack {
  std::vector<Site> sites;
  Eigen::MatrixXd values;
  std::vector<std::size_t> starts;
};
StStack stack_state(const StState& state, const StData& data);

void sample_thinned_all_times(StState& state, const StModel& model, const StData& data,
                              const SamplerSettings& settings, Rng& rng, ObservedFactorCache* cache = nullptr);
void sample_gp_all_times(StState& state, const StModel& model, const StData& data, const SamplerSettings& settings,
                         Rng& rng);
bool sample_theta(StState& state, const StModel& model, const StData& data, const ThetaLayout& layout,
                  AdaptiveMetropolis& adapt, Rng& rng);
void sample_lambda_all(StState& state, const StModel& model, Rng& rng);

// Processes at arbitrary (time, location) sites given the state.
Eigen::MatrixXd draw_beta_at(const StState& state, const StModel& model, const StData& data,
                             std::span<const Site> sites, Rng& rng);
void augment_grid(const StState& state, const StModel& model, const StData& data, IntensityGrid& grid, Rng& rng);

ThetaLayout st_theta_layout(const StModel& model);
// Hyperparameter list in layout order: init of every process, then
// disturbance of every process.
std::vector<GpHyper> flatten_theta(const std::vector<DgpProcess>& theta);
void unflatten_theta(const std::vector<GpHyper>& flat, std::vector<DgpProcess>& theta);

// Everything forward simulation from a posterior draw needs.
struct PredictiveModel {
  Region region;
  Design design;
  DgpSpec dgp;
  LambdaPrior lambda;
  LambdaMode lambda_mode = LambdaMode::Common;
  int first_time = 1;

  static PredictiveModel from(const StModel& model);
  // A purely spatial fit seen as a field frozen in time.
  static PredictiveModel from(const SpatialModel& model);
};

// Processes conditioned on the values stored in a snapshot. Successive draws
// are joint: each one conditions on everything drawn before it.
class SnapshotField {
 public:
  SnapshotField(const PredictiveModel& model, const Snapshot& snapshot);
  // sites x P
  Eigen::MatrixXd draw(const std::vector<Site>& sites, Rng& rng);

 private:
  std::vector<DgpCovariance> covs_;
  std::vector<IncrementalFactor> factors_;
};

struct PredictionSpec {
  int horizon = 0;
  std::vector<Point> grid;
  std::vector<Region> regions;
  std::size_t n_strata = 1;
};

struct PredictionDraw {
  int t = 0;
  double lambda = 0.0;
  std::vector<Point> events;
  Eigen::VectorXd grid_lambda;
  Eigen::MatrixXd grid_beta;
  std::vector<double> integrals;
};

// One draw from the predictive at times first_time .. first_time+horizon-1.
std::vector<PredictionDraw> predict_future(const PredictiveModel& model, const Snapshot& snapshot,
                                           const PredictionSpec& spec, Rng& rng);

struct PredictiveSummary {
  int first_time = 1;
  std::vector<std::vector<std::uint64_t>> counts;
  std::vector<IntensityGrid> grids;
  std::vector<std::vector<IntegralAccumulator>> integrals;

  PredictiveSummary() = default;
  PredictiveSummary(int first_time, const PredictionSpec& spec, std::size_t n_processes);
  void add(const std::vector<PredictionDraw>& draws);
  double mean_count(std::size_t k) const;
};

struct StChainOutput : ChainOutput {
  std::optional<PredictiveSummary> prediction;
};

StChainOutput run_st_gibbs(const StModel& model, const ChainConfig& config,
                           const std::optional<PredictionSpec>& prediction = std::nullopt,
                           StState* final_state = nullptr);

}  // namespace coxkit
