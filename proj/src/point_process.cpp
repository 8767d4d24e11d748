#include "coxkit/point_process.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <numbers>
#include <sstream>

#include "coxkit/errors.hpp"

namespace coxkit {

Region::Region(std::vector<std::pair<double, double>> bounds) : bounds_(std::move(bounds)) {
  if (bounds_.empty()) throw InputError("region needs at least one axis");
  measure_ = 1.0;
  for (std::size_t i = 0; i < bounds_.size(); ++i) {
    const auto [lo, hi] = bounds_[i];
    if (!std::isfinite(lo) || !std::isfinite(hi) || !(hi > lo)) {
      throw InputError("region axis " + std::to_string(i) + " needs finite bounds with high > low");
    }
    measure_ *= hi - lo;
  }
}

bool Region::contains(const Point& x) const {
  if (static_cast<std::size_t>(x.size()) != dim()) return false;
  for (std::size_t i = 0; i < dim(); ++i) {
    if (!(x(i) >= bounds_[i].first && x(i) <= bounds_[i].second)) return false;
  }
  return true;
}

bool Region::contains(const Region& other) const {
  if (other.dim() != dim()) return false;
  for (std::size_t i = 0; i < dim(); ++i) {
    if (other.bounds_[i].first < bounds_[i].first || other.bounds_[i].second > bounds_[i].second) return false;
  }
  return true;
}

Point Region::sample_uniform(Rng& rng) const {
  Point x(dim());
  for (std::size_t i = 0; i < dim(); ++i) {
    x(i) = bounds_[i].first + (bounds_[i].second - bounds_[i].first) * draw_uniform(rng);
  }
  return x;
}

void PointPattern::check_inside(const Region& region) const {
  std::vector<std::size_t> bad;
  for (std::size_t i = 0; i < events.size(); ++i) {
    if (events[i].x.size() != static_cast<Eigen::Index>(region.dim()) || !region.contains(events[i].x)) {
      bad.push_back(i);
    }
  }
  if (bad.empty()) return;
  const bool rows = source_rows.size() == events.size();
  std::string msg = std::to_string(bad.size()) + (rows ? " event(s) outside the region at rows" : " event(s) outside the region:");
  for (std::size_t k = 0; k < bad.size() && k < 20; ++k) {
    msg += (k ? ", " : " ") + std::to_string(rows ? source_rows[bad[k]] : bad[k] + 1);
  }
  if (bad.size() > 20) msg += ", ...";
  throw InputError(msg);
}

Design::Design() : terms_{Term{}} {}

Design::Design(std::vector<Term> terms, std::vector<CovariateField> fields)
    : terms_(std::move(terms)), fields_(std::move(fields)) {
  if (terms_.empty()) throw InputError("design needs at least one term");
  for (const auto& term : terms_) {
    if (term.kind == Term::Kind::Covariate && term.covariate >= fields_.size()) {
      throw InputError("design term refers to missing covariate " + std::to_string(term.covariate));
    }
    if (term.kind == Term::Kind::Harmonic && term.period < 2) {
      throw InputError("harmonic period must be >= 2");
    }
  }
}

Eigen::VectorXd Design::covariates_at(const Site& s) const {
  Eigen::VectorXd w(fields_.size());
  for (std::size_t i = 0; i < fields_.size(); ++i) w(i) = fields_[i](s);
  return w;
}

Eigen::VectorXd Design::row(const Site& s, const Eigen::VectorXd* observed) const {
  Eigen::VectorXd r(terms_.size());
  for (std::size_t j = 0; j < terms_.size(); ++j) {
    const auto& term = terms_[j];
    switch (term.kind) {
      case Term::Kind::Intercept:
        r(j) = 1.0;
        break;
      case Term::Kind::Covariate:
        if (observed != nullptr && static_cast<std::size_t>(observed->size()) == fields_.size()) {
          r(j) = (*observed)(term.covariate);
        } else {
          r(j) = fields_[term.covariate](s);
        }
        break;
      case Term::Kind::Harmonic:
        r(j) = harmonic_value(s.t, term.period, term.phase);
        break;
    }
  }
  return r;
}

double harmonic_value(int t, int period, double phase) {
  return std::cos(2.0 * std::numbers::pi * static_cast<double>(t) / static_cast<double>(period) + phase);
}

std::vector<Point> sim_homogeneous_pp(const Region& region, double rate, Rng& rng) {
  if (!(rate >= 0.0) || !std::isfinite(rate)) throw InputError("homogeneous rate must be finite and >= 0");
  const auto k = draw_poisson(rate * region.measure(), rng);
  std::vector<Point> pts;
  pts.reserve(k);
  for (std::uint64_t i = 0; i < k; ++i) pts.push_back(region.sample_uniform(rng));
  return pts;
}

ThinnedRealization sim_cox_thinning(const Region& region, double lambda_star,
                                    const std::function<double(const Point&)>& link_input, Rng& rng,
                                    int t) {
  if (!(lambda_star >= 0.0)) throw InputError("lambda_star must be >= 0");
  ThinnedRealization out;
  out.retained.dim = out.thinned.dim = region.dim();
  const auto candidates = sim_homogeneous_pp(region, lambda_star, rng);
  std::vector<double> kept_values;
  std::vector<double> dropped_values;
  for (const auto& x : candidates) {
    const double pred = link_input(x);
    const bool keep = draw_uniform(rng) < norm_cdf(pred);
    Event e{t, x, Eigen::VectorXd()};
    if (keep) {
      out.retained.events.push_back(std::move(e));
      kept_values.push_back(pred);
    } else {
      out.thinned.events.push_back(std::move(e));
      dropped_values.push_back(pred);
    }
  }
  out.gp_values = std::move(kept_values);
  out.gp_values.insert(out.gp_values.end(), dropped_values.begin(), dropped_values.end());
  return out;
}

// ---------------------------------------------------------------------------
// CSV

std::string format_double(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

double parse_double(const std::string& text) {
  double v = 0.0;
  const char* first = text.data();
  const char* last = first + text.size();
  if (first != last && *first == '+') ++first;
  const auto res = std::from_chars(first, last, v);
  if (res.ec != std::errc() || res.ptr != last) throw InputError("not a number: '" + text + "'");
  return v;
}

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> out;
  std::stringstream ss(line);
  std::string cell;
  while (std::getline(ss, cell, ',')) out.push_back(trim(cell));
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

}  // namespace

PointPattern read_pattern(const std::string& path, std::size_t dim) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open pattern file " + path);
  PointPattern p;
  p.dim = dim;
  std::string line;
  if (!std::getline(in, line)) throw InputError(path + ": row 1: missing header");
  const auto header = split_csv(trim(line));
  if (header.empty() || header[0] != "t") throw InputError(path + ": row 1: header must start with 't'");
  if (header.size() < dim + 1) {
    throw InputError(path + ": row 1: expected " + std::to_string(dim) + " coordinate columns");
  }
  for (std::size_t i = 0; i < dim; ++i) {
    if (header[i + 1] != "x" + std::to_string(i + 1)) {
      throw InputError(path + ": row 1: column " + std::to_string(i + 2) + " should be x" + std::to_string(i + 1));
    }
  }
  for (std::size_t i = dim + 1; i < header.size(); ++i) {
    const auto expect = "w" + std::to_string(i - dim);
    if (header[i] != expect) {
      throw InputError(path + ": row 1: column " + std::to_string(i + 1) + " is '" + header[i] +
                       "', expected '" + expect + "' (declared dimension " + std::to_string(dim) + ")");
    }
  }
  p.n_covariates = header.size() - dim - 1;

  std::size_t row = 1;
  while (std::getline(in, line)) {
    ++row;
    if (trim(line).empty()) continue;
    const auto cells = split_csv(trim(line));
    if (cells.size() != header.size()) {
      throw InputError(path + ": row " + std::to_string(row) + ": expected " + std::to_string(header.size()) +
                       " columns, found " + std::to_string(cells.size()));
    }
    Event e;
    try {
      const double tv = parse_double(cells[0]);
      if (tv < 0.0 || tv != std::floor(tv)) throw InputError("time index must be a non-negative integer");
      e.t = static_cast<int>(tv);
      e.x.resize(dim);
      for (std::size_t i = 0; i < dim; ++i) e.x(i) = parse_double(cells[i + 1]);
      e.covariates.resize(p.n_covariates);
      for (std::size_t i = 0; i < p.n_covariates; ++i) e.covariates(i) = parse_double(cells[dim + 1 + i]);
    } catch (const InputError& err) {
      throw InputError(path + ": row " + std::to_string(row) + ": " + err.what());
    }
    if (e.t != 0) p.times_present = true;
    p.events.push_back(std::move(e));
    p.source_rows.push_back(row);
  }
  return p;
}

void write_pattern(const std::string& path, const PointPattern& pattern) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write pattern file " + path);
  out << "t";
  for (std::size_t i = 0; i < pattern.dim; ++i) out << ",x" << i + 1;
  for (std::size_t i = 0; i < pattern.n_covariates; ++i) out << ",w" << i + 1;
  out << "\n";
  for (const auto& e : pattern.events) {
    if (static_cast<std::size_t>(e.x.size()) != pattern.dim) throw InputError("event dimension mismatch");
    out << e.t;
    for (Eigen::Index i = 0; i < e.x.size(); ++i) out << "," << format_double(e.x(i));
    for (std::size_t i = 0; i < pattern.n_covariates; ++i) {
      out << "," << format_double(i < static_cast<std::size_t>(e.covariates.size()) ? e.covariates(i) : 0.0);
    }
    out << "\n";
  }
  if (!out) throw IoError("failed writing pattern file " + path);
}

}  // namespace coxkit
