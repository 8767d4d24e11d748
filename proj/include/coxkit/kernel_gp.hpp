#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "coxkit/numerics.hpp"

namespace coxkit {

using Point = Eigen::VectorXd;

// A location in space, tagged with a discrete time index (0 for purely
// spatial models).
struct Site {
  int t = 0;
  Point x;
};

// Hyperparameters of the gamma-exponential kernel
//   h(s, s') = sigma2 * exp(-|s - s'|^gamma / (2 tau2)).
struct GpHyper {
  double mu = 0.0;
  double sigma2 = 1.0;
  double tau2 = 1.0;
  double gamma = 2.0;

  // Throws InputError unless sigma2 > 0, tau2 > 0 and 0 < gamma <= 2.
  void validate() const;
};

double squared_distance(const Point& a, const Point& b);
double kernel_at_squared_distance(const GpHyper& h, double d2);
double kernel_eval(const GpHyper& h, const Point& s, const Point& s_prime);

// Mean and covariance of a univariate Gaussian field over sites.
class SiteCovariance {
 public:
  virtual ~SiteCovariance() = default;
  virtual double mean(const Site& a) const = 0;
  virtual double cov(const Site& a, const Site& b) const = 0;
  // Reference variance used to scale jitter.
  virtual double scale() const = 0;
};

// Stationary isotropic GP; ignores the time index.
class StationaryCovariance final : public SiteCovariance {
 public:
  explicit StationaryCovariance(const GpHyper& h);
  double mean(const Site&) const override { return h_.mu; }
  double cov(const Site& a, const Site& b) const override;
  double scale() const override { return h_.sigma2; }
  const GpHyper& hyper() const { return h_; }

 private:
  GpHyper h_;
};

std::vector<Site> as_sites(const std::vector<Point>& locations, int t = 0);

Eigen::VectorXd mean_vector(const SiteCovariance& cov, std::span<const Site> sites);
Eigen::MatrixXd cov_matrix(const SiteCovariance& cov, std::span<const Site> sites);
Eigen::MatrixXd cross_cov(const SiteCovariance& cov, std::span<const Site> rows,
                          std::span<const Site> cols);

struct JitteredCholesky {
  Eigen::MatrixXd lower;
  double jitter = 0.0;
};

// Cholesky of `m`, retrying with jitter 1e-10*scale, 1e-9*scale, ... up to
// 1e-6*scale. Throws NumericalError with the minimum eigenvalue on failure.
JitteredCholesky cholesky_with_jitter(const Eigen::MatrixXd& m, double scale);

struct CovFactor {
  std::vector<Point> locations;
  Eigen::MatrixXd matrix;
  Eigen::MatrixXd lower;
  double jitter_used = 0.0;
};

CovFactor build_cov_factor(const GpHyper& h, const std::vector<Point>& locations);

struct GaussianLaw {
  Eigen::VectorXd mean;
  Eigen::MatrixXd cov;
  // Prior variance scale of the queried sites, used for jitter when drawing.
  double scale = 1.0;
};

GaussianLaw conditional_law(const SiteCovariance& cov, std::span<const Site> known,
                            const Eigen::VectorXd& known_values, std::span<const Site> query);

GaussianLaw gp_conditional(const GpHyper& h, const std::vector<Point>& known_locs,
                           const Eigen::VectorXd& known_vals, const std::vector<Point>& new_locs);

Eigen::VectorXd draw_gaussian(const GaussianLaw& law, Rng& rng);

// log N(x; mean, L L^T) given a lower-triangular factor.
double gaussian_log_density(const Eigen::VectorXd& x, const Eigen::VectorXd& mean,
                            const Eigen::MatrixXd& lower);

// Cholesky factor of the covariance of a growing set of sites, together with
// the whitened residuals L^{-1}(y - mu). The diagonal always carries a nugget
// of at least 1e-10 * scale (more if the plain factorization needed jitter),
// and var_from includes it, so values drawn from the conditionals and fed
// back through extend stay consistent with the factor. Without it, smooth
// kernels give pivots near rounding level and conditioning on earlier draws
// amplifies the rounding error. Appending a site costs O(n^2) for
// the triangular solve plus O(n) for the new row (Schur complement of the
// extended matrix).
class IncrementalFactor {
 public:
  IncrementalFactor() = default;
  IncrementalFactor(const SiteCovariance& cov, std::vector<Site> sites, Eigen::VectorXd values);

  std::size_t size() const { return n_; }
  const std::vector<Site>& sites() const { return sites_; }
  const Eigen::VectorXd& values() const { return values_; }
  double jitter() const { return jitter_; }

  // L^{-1} k(sites, query), one column per query site.
  Eigen::MatrixXd solve_cross(const SiteCovariance& cov, std::span<const Site> query) const;

  struct Prediction {
    double mean = 0.0;
    double var = 0.0;
    Eigen::VectorXd v;
  };
  Prediction predict(const SiteCovariance& cov, const Site& s) const;

  // Conditional mean/variance from a precomputed v = L^{-1} k(sites, s);
  // the variance includes the nugget.
  double mean_from(const SiteCovariance& cov, const Site& s, const Eigen::Ref<const Eigen::VectorXd>& v) const;
  double var_from(const SiteCovariance& cov, const Site& s, const Eigen::Ref<const Eigen::VectorXd>& v) const;

  // Appends a site with value. Returns false when the Schur complement was
  // not positive and the factor was rebuilt from scratch with jitter.
  bool extend(const SiteCovariance& cov, const Site& s, double value);
  bool extend(const SiteCovariance& cov, const Site& s, double value,
              const Eigen::Ref<const Eigen::VectorXd>& v);
  // Appends several sites at once through one multi-column triangular solve.
  // Returns false when the new block was not positive definite and the
  // factor was rebuilt from scratch.
  bool extend_block(const SiteCovariance& cov, std::span<const Site> sites, const Eigen::VectorXd& values);
  // Same, with k(current sites, sites) and k(sites, sites) supplied by the caller.
  bool extend_block(const SiteCovariance& cov, std::span<const Site> sites, const Eigen::VectorXd& values,
                    Eigen::MatrixXd cross, Eigen::MatrixXd block);
  // Replaces the values at the current sites; the factor is unchanged.
  void set_values(const SiteCovariance& cov, Eigen::VectorXd values);

  // Diagonal entry of the most recently appended row.
  double last_diagonal() const { return l_(n_ - 1, n_ - 1); }
  Eigen::Ref<const Eigen::MatrixXd> lower() const { return l_.topLeftCorner(n_, n_); }
  Eigen::MatrixXd inverse() const;
  const Eigen::VectorXd& whitened() const { return white_; }

 private:
  void rebuild(const SiteCovariance& cov);
  void reserve(std::size_t n);

  std::vector<Site> sites_;
  Eigen::VectorXd values_;
  Eigen::MatrixXd l_;
  Eigen::VectorXd white_;
  std::size_t n_ = 0;
  double jitter_ = 0.0;
};

}  // namespace coxkit
