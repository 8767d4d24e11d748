#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "coxkit/kernel_gp.hpp"
#include "coxkit/mcmc_common.hpp"
#include "coxkit/numerics.hpp"
#include "coxkit/point_process.hpp"

namespace coxkit {

struct SpatialModel {
  Region region;
  PointPattern data;
  Design design;
  // One entry per process (column of the design).
  std::vector<HyperPrior> hyper;
  LambdaPrior lambda;

  void validate() const;
};

struct SpatialState {
  std::uint64_t k_total = 0;
  std::vector<Point> thinned;
  // N x P and M x P process values at observed and thinned events.
  Eigen::MatrixXd beta_n;
  Eigen::MatrixXd beta_m;
  double lambda_star = 1.0;
  std::vector<GpHyper> theta;
  std::size_t iteration = 0;
};

struct ChainConfig {
  std::size_t n_iter = 1000;
  std::size_t burn_in = 0;
  std::size_t thin = 1;
  std::uint64_t seed = 1;
  SamplerSettings settings;
  // Grid sites for intensity summaries; empty means no grid.
  std::vector<Site> grid;
  bool keep_grid_trace = false;
  bool keep_snapshots = false;

  void validate() const;
  bool retained(std::size_t iter) const { return iter >= burn_in && (iter - burn_in) % thin == 0; }
};

// Process values at every current event of every time slice, with the rate
// parameters, kept at retained iterations.
struct Snapshot {
  std::size_t iteration = 0;
  std::vector<double> lambda;
  std::vector<Site> sites;
  Eigen::MatrixXd values;
  // Hyperparameters of each process at t = 0 and of its disturbance.
  std::vector<GpHyper> init;
  std::vector<GpHyper> disturbance;
};

struct ChainOutput {
  std::vector<std::string> columns;
  std::vector<std::vector<double>> trace;
  IntensityGrid grid;
  std::vector<Snapshot> snapshots;
  double theta_acceptance = 0.0;
  std::uint64_t thinned_proposals = 0;
  std::size_t thinned_accepted = 0;
};

SpatialState initial_state(const SpatialModel& model);

std::vector<Site> observed_sites(const PointPattern& data);
std::vector<Eigen::VectorXd> observed_covariates(const PointPattern& data);

// Conditioning factors over observed events, reused while the
// hyperparameters stay unchanged.
class ObservedFactorCache {
 public:
  // Factor per process over `sites` with current `values` (sites x P).
  std::vector<IncrementalFactor> get(const std::vector<const SiteCovariance*>& covs, const std::vector<Site>& sites,
                                     const Eigen::MatrixXd& values, const std::vector<double>& key);

 private:
  std::vector<double> key_;
  std::vector<IncrementalFactor> factors_;
  bool valid_ = false;
};

std::vector<double> theta_key(const std::vector<GpHyper>& theta);

// Block 1: (K, thinned locations, beta_M) from their exact full conditional.
void sample_thinned_block(SpatialState& state, const SpatialModel& model, const SamplerSettings& settings, Rng& rng,
                          ObservedFactorCache* cache = nullptr);
// Block 2: beta_K from its skew-normal full conditional.
void sample_gp_block(SpatialState& state, const SpatialModel& model, const SamplerSettings& settings, Rng& rng);
// Block 3: adaptive random-walk update of the free hyperparameters.
bool sample_theta(SpatialState& state, const SpatialModel& model, const ThetaLayout& layout,
                  AdaptiveMetropolis& adapt, Rng& rng);
// Block 4: conjugate update of lambda*.
void sample_lambda_star(SpatialState& state, const SpatialModel& model, Rng& rng);

// Draws the processes at `sites` given the chain state and returns them
// (sites x P).
Eigen::MatrixXd draw_beta_at(const SpatialState& state, const SpatialModel& model, std::span<const Site> sites,
                             Rng& rng);
void augment_grid(const SpatialState& state, const SpatialModel& model, IntensityGrid& grid, Rng& rng);

ChainOutput run_gibbs(const SpatialModel& model, const ChainConfig& config, SpatialState* final_state = nullptr);

}  // namespace coxkit
