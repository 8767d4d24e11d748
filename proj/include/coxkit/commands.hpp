#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "json.hpp"

#include "coxkit/config.hpp"
#include "coxkit/mcmc_spatial.hpp"
#include "coxkit/point_process.hpp"

namespace coxkit {

struct SimulationOutput {
  PointPattern retained;
  PointPattern thinned;
  // True processes and intensity on the truth grid, when configured.
  std::vector<Site> grid_sites;
  Eigen::VectorXd grid_lambda;
  Eigen::MatrixXd grid_beta;
  // Midpoint-rule integral of the true intensity per simulated time; NaN for
  // times without grid points.
  std::vector<double> expected_counts;
};

// Exact simulation by thinning: every process value is drawn from its
// conditional given all values drawn before it (candidates in order, then
// the truth grid at that time).
SimulationOutput simulate_truth(const RunConfig& config, std::uint64_t seed);

// Events whose time index is below `n_times`.
PointPattern observed_part(const PointPattern& pattern, int n_times);

void write_snapshots(const std::string& path, const std::vector<Snapshot>& snapshots);
std::vector<Snapshot> read_snapshots(const std::string& path, std::size_t dim);

// Files are written under `out_dir`, which is created if needed. `seed`
// overrides the configured seed(s).
void cmd_simulate(const RunConfig& config, const std::string& out_dir, std::optional<std::uint64_t> seed);
void cmd_fit(const RunConfig& config, const std::string& data_path, const std::string& out_dir,
             std::optional<std::uint64_t> seed);
void cmd_predict(const RunConfig& config, const std::string& fit_dir, const std::string& out_dir,
                 std::optional<std::uint64_t> seed);

}  // namespace coxkit
