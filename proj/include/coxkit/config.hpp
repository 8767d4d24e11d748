#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"

#include "coxkit/dynamic_gp.hpp"
#include "coxkit/mcmc_common.hpp"
#include "coxkit/mcmc_spatial.hpp"
#include "coxkit/mcmc_spatiotemporal.hpp"
#include "coxkit/point_process.hpp"

namespace coxkit {

// offset + sum_k a_k exp(-|x[axis_k] - center_k|^power_k / scale_k)
struct ExpTermsField {
  struct Term {
    double a = 0.0;
    std::size_t axis = 0;
    double center = 0.0;
    double power = 2.0;
    double scale = 1.0;
  };
  double offset = 0.0;
  std::vector<Term> terms;

  double operator()(const Point& x) const;
};

struct ProcessConfig {
  Design::Term term;
  HyperPrior gp;
  // Spatio-temporal only.
  HyperPrior disturbance;
  bool deterministic = false;
  double alpha = 1.0;
};

// Generating value of one process for simulation.
struct TruthProcess {
  enum class Kind { Field, Gp };
  Kind kind = Kind::Gp;
  ExpTermsField field;
  // The field is an intensity; the process is Phi^{-1}(field / lambda*).
  bool probit_of_intensity = false;
  GpHyper gp;
  GpHyper disturbance;
  bool deterministic = false;
  double alpha = 1.0;
};

struct LambdaConfig {
  LambdaPrior prior;
  // Exponential prior with mean twice the empirical peak intensity.
  bool empirical = false;
  double fraction = 0.05;
};

struct McmcConfig {
  std::size_t n_iter = 1000;
  std::size_t burn_in = 0;
  std::size_t thin = 1;
  std::vector<std::uint64_t> seeds{1};
  SamplerSettings settings;
  bool snapshots = false;
};

struct GridConfig {
  std::vector<std::size_t> resolution;
  std::vector<int> times{0};
  bool keep_trace = false;
};

struct FunctionalConfig {
  Region region;
  int t = 0;
};

struct PredictionConfig {
  int horizon = 0;
  std::vector<std::size_t> resolution;
  std::vector<Region> regions;
  std::size_t n_strata = 1;
};

struct SimulationConfig {
  double lambda_star = 1.0;
  int n_times = 1;
  std::vector<TruthProcess> truth;
  std::optional<GridConfig> grid;
};

struct RunConfig {
  bool spatiotemporal = false;
  Region region;
  int n_times = 1;
  std::vector<ExpTermsField> covariates;
  std::vector<ProcessConfig> processes;
  LambdaConfig lambda;
  LambdaMode lambda_mode = LambdaMode::Common;
  McmcConfig mcmc;
  std::optional<GridConfig> grid;
  std::vector<FunctionalConfig> functionals;
  std::size_t functional_strata = 1;
  PredictionConfig prediction;
  std::optional<SimulationConfig> simulation;

  Design design() const;
  DgpSpec dgp() const;
  // Needs the data when the lambda* prior is empirical.
  LambdaPrior lambda_prior(const PointPattern& data) const;
  SpatialModel spatial_model(const PointPattern& data) const;
  StModel st_model(const PointPattern& data) const;
  ChainConfig chain(std::uint64_t seed) const;
  PredictionSpec prediction_spec() const;
};

// Throws InputError naming the offending field.
RunConfig parse_config(const nlohmann::json& doc);
// IoError if unreadable, InputError if malformed.
RunConfig load_config(const std::string& path);
// The resolved configuration with every default filled in.
nlohmann::json echo_config(const RunConfig& config);

}  // namespace coxkit
