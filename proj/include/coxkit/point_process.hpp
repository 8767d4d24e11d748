#pragma once

#include <cstddef>
#include <functional>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "coxkit/kernel_gp.hpp"
#include "coxkit/numerics.hpp"

namespace coxkit {

// Axis-aligned hyper-rectangle.
class Region {
 public:
  Region() = default;
  explicit Region(std::vector<std::pair<double, double>> bounds);

  std::size_t dim() const { return bounds_.size(); }
  const std::vector<std::pair<double, double>>& bounds() const { return bounds_; }
  double measure() const { return measure_; }
  bool contains(const Point& x) const;
  bool contains(const Region& other) const;
  Point sample_uniform(Rng& rng) const;

 private:
  std::vector<std::pair<double, double>> bounds_;
  double measure_ = 0.0;
};

struct Event {
  int t = 0;
  Point x;
  Eigen::VectorXd covariates;
};

struct PointPattern {
  std::size_t dim = 1;
  std::size_t n_covariates = 0;
  bool times_present = false;
  std::vector<Event> events;
  // File row of each event when read from CSV (header is row 1).
  std::vector<std::size_t> source_rows;

  std::size_t size() const { return events.size(); }
  // Throws InputError listing the events outside `region`.
  void check_inside(const Region& region) const;
};

using CovariateField = std::function<double(const Site&)>;

// Maps a site to the row W_t(s) multiplying the process vector beta_t(s).
// Each term feeds one univariate process.
class Design {
 public:
  struct Term {
    enum class Kind { Intercept, Covariate, Harmonic };
    Kind kind = Kind::Intercept;
    std::size_t covariate = 0;  // index into the covariate fields
    int period = 0;
    double phase = 0.0;
  };

  // Intercept-only design (a single process).
  Design();
  Design(std::vector<Term> terms, std::vector<CovariateField> fields);

  std::size_t n_processes() const { return terms_.size(); }
  std::size_t n_covariates() const { return fields_.size(); }
  const std::vector<Term>& terms() const { return terms_; }

  // When `observed` is non-null it supplies the covariate values at the site
  // instead of evaluating the fields.
  Eigen::VectorXd row(const Site& s, const Eigen::VectorXd* observed = nullptr) const;
  Eigen::VectorXd covariates_at(const Site& s) const;

 private:
  std::vector<Term> terms_;
  std::vector<CovariateField> fields_;
};

// cos(2 pi t / period + phase).
double harmonic_value(int t, int period, double phase);

std::vector<Point> sim_homogeneous_pp(const Region& region, double rate, Rng& rng);

struct ThinnedRealization {
  PointPattern retained;
  PointPattern thinned;
  // Predictor values W(s) beta(s): retained events first, then thinned.
  std::vector<double> gp_values;
};

// Poisson thinning: candidates from a rate-lambda_star homogeneous process,
// each kept with probability Phi(link_input(s)). `link_input` is called once
// per candidate in generation order.
ThinnedRealization sim_cox_thinning(const Region& region, double lambda_star,
                                    const std::function<double(const Point&)>& link_input, Rng& rng,
                                    int t = 0);

// CSV with header t,x1..xd[,w1..wq]. Floats are written in shortest
// round-trip form.
PointPattern read_pattern(const std::string& path, std::size_t dim);
void write_pattern(const std::string& path, const PointPattern& pattern);

std::string format_double(double v);
double parse_double(const std::string& text);

}  // namespace coxkit
