#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "coxkit/kernel_gp.hpp"
#include "coxkit/numerics.hpp"

namespace coxkit {

// One univariate dynamic GP: beta_{t+1}(s) = alpha beta_t(s) + w_{t+1}(s),
// beta_0 ~ GP(init), w ~ GP(0, disturbance) independent over time.
struct DgpProcess {
  GpHyper init;
  GpHyper disturbance;
  // No disturbance: the field is frozen after t = 0 (up to alpha).
  bool deterministic = false;
};

struct SeasonalSpec {
  int period = 4;
  double phase = 0.0;
  // Processes multiplied by the harmonic cos(2 pi t / period + phase).
  std::vector<std::size_t> processes;
};

struct DgpSpec {
  std::vector<DgpProcess> processes;
  // P x P transition G; empty means identity.
  Eigen::MatrixXd transition;
  std::optional<SeasonalSpec> seasonal;

  std::size_t n_processes() const { return processes.size(); }
  void validate() const;
  bool scalar_transition() const;
  // Diagonal entry of G for process j; throws UnsupportedConfiguration when
  // G is not diagonal.
  double alpha(std::size_t j) const;
};

// Space-time covariance of a single scalar-transition dynamic GP:
//   Cov(beta_t(s), beta_t'(s')) = alpha^|t'-t| [alpha^{2m} k0(s,s') + sum_{i=1}^{m} alpha^{2(m-i)} kw(s,s')]
// with m = min(t, t'), and E beta_t(s) = alpha^t mu0.
class DgpCovariance final : public SiteCovariance {
 public:
  // `max_time` bounds the times in use; scale() is the largest marginal
  // variance over 0..max_time.
  DgpCovariance(const DgpProcess& process, double alpha, int max_time = 0);
  double mean(const Site& a) const override;
  double cov(const Site& a, const Site& b) const override;
  double scale() const override { return scale_; }

 private:
  double power(int n) const;
  double disturbance_weight(int m) const;

  DgpProcess process_;
  double alpha_;
  double scale_ = 1.0;
  // alpha^n for n <= 2 max_time and sum_{i=1}^{m} alpha^{2(m-i)} for m <= max_time.
  std::vector<double> powers_;
  std::vector<double> weights_;
};

std::vector<DgpCovariance> dgp_covariances(const DgpSpec& spec);

double seasonal_predictor(double beta0, double beta1, int t, int period, double phi);

// One step of the evolution at a shared set of locations. `values_t[j]` holds
// process j at `locations`.
std::vector<Eigen::VectorXd> evolve(const std::vector<Eigen::VectorXd>& values_t,
                                    const std::vector<Point>& locations, const DgpSpec& spec, Rng& rng);

struct KnownSlice {
  int t = 0;
  std::vector<Point> locations;
  // One row per location, one column per process.
  Eigen::MatrixXd values;
};

// Exact Gaussian law of every process at (t_q, locs_q) given the known
// slices, one law per process.
std::vector<GaussianLaw> dgp_joint_conditional(const DgpSpec& spec, const std::vector<KnownSlice>& known, int t_q,
                                               const std::vector<Point>& locs_q);

// Gaussian vector over a site list split into contiguous blocks. Gives the
// law of one block given the current values of all others, as needed by a
// Gibbs sweep over blocks, from one Cholesky factor of the joint covariance.
class BlockConditioner {
 public:
  // `starts` holds the first index of every block, beginning with 0.
  BlockConditioner(const SiteCovariance& cov, std::span<const Site> sites, Eigen::VectorXd values,
                   std::vector<std::size_t> starts);

  std::size_t n_blocks() const { return starts_.size(); }
  std::size_t block_size(std::size_t b) const;
  const Eigen::VectorXd& values() const { return values_; }
  double jitter() const { return jitter_; }

  // Law of block b given all other blocks.
  GaussianLaw conditional(std::size_t b);
  void set_block(std::size_t b, const Eigen::VectorXd& v);

 private:
  // Columns of L^{-1} belonging to block b, rows from the block start on.
  const Eigen::MatrixXd& inverse_columns(std::size_t b);

  Eigen::MatrixXd lower_;
  Eigen::VectorXd mean_;
  Eigen::VectorXd values_;
  // L^{-1} (values - mean).
  Eigen::VectorXd white_;
  std::vector<std::size_t> starts_;
  double jitter_ = 0.0;
  double scale_ = 1.0;
  std::size_t cached_block_ = static_cast<std::size_t>(-1);
  Eigen::MatrixXd cached_cols_;
};

}  // namespace coxkit
