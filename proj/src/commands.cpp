#include "coxkit/commands.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <exception>
#include <filesystem>
#include <fstream>
#include <limits>
#include <memory>
#include <thread>

#include "coxkit/diagnostics.hpp"
#include "coxkit/dynamic_gp.hpp"
#include "coxkit/errors.hpp"
#include "coxkit/mcmc_spatiotemporal.hpp"

namespace coxkit {

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

void make_dir(const std::string& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec || !fs::is_directory(dir)) throw IoError("cannot create output directory " + dir);
}

std::ofstream open_out(const fs::path& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  return out;
}

void close_out(std::ofstream& out, const fs::path& path) {
  out.close();
  if (!out) throw IoError("write failed for " + path.string());
}

void write_json(const fs::path& path, const json& j) {
  auto out = open_out(path);
  out << j.dump(2) << "\n";
  close_out(out, path);
}

std::string site_cells(const Site& s) {
  std::string line = std::to_string(s.t);
  for (Eigen::Index a = 0; a < s.x.size(); ++a) line += "," + format_double(s.x(a));
  return line;
}

std::string site_header(std::size_t dim) {
  std::string h = "t";
  for (std::size_t a = 0; a < dim; ++a) h += ",x" + std::to_string(a + 1);
  return h;
}

struct TruthCovariances {
  std::vector<std::unique_ptr<DgpCovariance>> covs;
  std::vector<IncrementalFactor> factors;
};

double truth_field_value(const TruthProcess& tp, const Point& x, double lambda_star, std::size_t j) {
  const double f = tp.field(x);
  if (!tp.probit_of_intensity) return f;
  const double r = f / lambda_star;
  if (!(r > 0.0 && r < 1.0)) {
    throw InputError("config: simulation.truth[" + std::to_string(j) +
                     "]: intensity field must lie strictly between 0 and lambda_star");
  }
  return norm_quantile(r);
}

json lambda_prior_json(const LambdaPrior& p) {
  switch (p.kind) {
    case LambdaPrior::Kind::Gamma:
      return {{"kind", "gamma"}, {"shape", p.shape}, {"rate", p.rate}};
    case LambdaPrior::Kind::Exponential:
      return {{"kind", "exponential"}, {"rate", p.rate}};
    case LambdaPrior::Kind::Fixed:
      return {{"kind", "fixed"}, {"value", p.value}};
  }
  return nullptr;
}

LambdaPrior lambda_prior_from(const json& j) {
  const auto kind = j.at("kind").get<std::string>();
  if (kind == "gamma") return LambdaPrior::gamma(j.at("shape").get<double>(), j.at("rate").get<double>());
  if (kind == "exponential") return LambdaPrior::exponential(j.at("rate").get<double>());
  if (kind == "fixed") return LambdaPrior::fixed(j.at("value").get<double>());
  throw InputError("unknown lambda prior kind '" + kind + "'");
}

}  // namespace

SimulationOutput simulate_truth(const RunConfig& c, std::uint64_t seed) {
  if (!c.simulation) throw InputError("config: simulation: is required to simulate");
  const auto& sim = *c.simulation;
  const Design design = c.design();
  const std::size_t p = c.processes.size();
  const auto dim = c.region.dim();
  Rng rng(seed);

  TruthCovariances tc;
  tc.covs.resize(p);
  for (std::size_t j = 0; j < p; ++j) {
    const auto& tp = sim.truth[j];
    if (tp.kind == TruthProcess::Kind::Gp) {
      tc.covs[j] = std::make_unique<DgpCovariance>(DgpProcess{tp.gp, tp.disturbance, tp.deterministic}, tp.alpha,
                                                    sim.n_times - 1);
      tc.factors.emplace_back(*tc.covs[j], std::vector<Site>{}, Eigen::VectorXd());
    } else {
      tc.factors.emplace_back();
    }
  }

  SimulationOutput out;
  out.retained.dim = out.thinned.dim = dim;
  out.retained.n_covariates = out.thinned.n_covariates = c.covariates.size();
  out.retained.times_present = out.thinned.times_present = sim.n_times > 1;
  out.expected_counts.assign(static_cast<std::size_t>(sim.n_times), std::numeric_limits<double>::quiet_NaN());
  std::vector<Point> grid_points;
  if (sim.grid) grid_points = regular_grid(c.region, sim.grid->resolution);
  std::vector<Eigen::VectorXd> lambda_parts;
  std::vector<Eigen::MatrixXd> beta_parts;

  for (int t = 0; t < sim.n_times; ++t) {
    auto link = [&](const Point& x) {
      const Site s{t, x};
      Eigen::VectorXd beta(static_cast<Eigen::Index>(p));
      for (std::size_t j = 0; j < p; ++j) {
        const auto jj = static_cast<Eigen::Index>(j);
        if (!tc.covs[j]) {
          beta(jj) = truth_field_value(sim.truth[j], x, sim.lambda_star, j);
          continue;
        }
        const auto pr = tc.factors[j].predict(*tc.covs[j], s);
        beta(jj) = pr.mean + std::sqrt(std::max(pr.var, 0.0)) * draw_std_normal(rng);
        tc.factors[j].extend(*tc.covs[j], s, beta(jj), pr.v);
      }
      return design.row(s).dot(beta);
    };
    auto real = sim_cox_thinning(c.region, sim.lambda_star, link, rng, t);
    for (auto* part : {&real.retained, &real.thinned}) {
      auto& dst = part == &real.retained ? out.retained : out.thinned;
      for (auto& e : part->events) {
        e.t = t;
        e.covariates = design.covariates_at(Site{t, e.x});
        dst.events.push_back(std::move(e));
      }
    }

    if (!sim.grid || std::find(sim.grid->times.begin(), sim.grid->times.end(), t) == sim.grid->times.end()) continue;
    const auto sites = as_sites(grid_points, t);
    const auto g = static_cast<Eigen::Index>(sites.size());
    Eigen::MatrixXd beta(g, static_cast<Eigen::Index>(p));
    for (std::size_t j = 0; j < p; ++j) {
      const auto jj = static_cast<Eigen::Index>(j);
      if (!tc.covs[j]) {
        for (Eigen::Index i = 0; i < g; ++i) {
          beta(i, jj) = truth_field_value(sim.truth[j], grid_points[static_cast<std::size_t>(i)], sim.lambda_star, j);
        }
        continue;
      }
      const auto& cov = *tc.covs[j];
      auto& f = tc.factors[j];
      GaussianLaw law{mean_vector(cov, sites), cov_matrix(cov, sites), cov.scale()};
      if (f.size() > 0) {
        const Eigen::MatrixXd v = f.solve_cross(cov, sites);
        law.mean.noalias() += v.transpose() * f.whitened();
        law.cov.noalias() -= v.transpose() * v;
        law.cov = 0.5 * (law.cov + law.cov.transpose()).eval();
      }
      beta.col(jj) = draw_gaussian(law, rng);
      f.extend_block(cov, sites, beta.col(jj));
    }
    const Eigen::VectorXd lam = intensity_from_beta(design, sites, beta, sim.lambda_star);
    out.expected_counts[static_cast<std::size_t>(t)] = c.region.measure() * lam.mean();
    out.grid_sites.insert(out.grid_sites.end(), sites.begin(), sites.end());
    lambda_parts.push_back(lam);
    beta_parts.push_back(beta);
  }

  Eigen::Index rows = 0;
  for (const auto& l : lambda_parts) rows += l.size();
  out.grid_lambda.resize(rows);
  out.grid_beta.resize(rows, static_cast<Eigen::Index>(p));
  Eigen::Index at = 0;
  for (std::size_t k = 0; k < lambda_parts.size(); ++k) {
    out.grid_lambda.segment(at, lambda_parts[k].size()) = lambda_parts[k];
    out.grid_beta.middleRows(at, beta_parts[k].rows()) = beta_parts[k];
    at += lambda_parts[k].size();
  }
  return out;
}

PointPattern observed_part(const PointPattern& pattern, int n_times) {
  PointPattern out = pattern;
  out.events.clear();
  out.source_rows.clear();
  for (std::size_t i = 0; i < pattern.events.size(); ++i) {
    if (pattern.events[i].t >= n_times) continue;
    out.events.push_back(pattern.events[i]);
    if (i < pattern.source_rows.size()) out.source_rows.push_back(pattern.source_rows[i]);
  }
  return out;
}

void write_snapshots(const std::string& path, const std::vector<Snapshot>& snapshots) {
  auto out = open_out(path);
  for (const auto& s : snapshots) {
    json j;
    j["iteration"] = s.iteration;
    j["lambda"] = s.lambda;
    auto hypers = [](const std::vector<GpHyper>& hs) {
      json a = json::array();
      for (const auto& h : hs) a.push_back({h.mu, h.sigma2, h.tau2, h.gamma});
      return a;
    };
    j["init"] = hypers(s.init);
    j["disturbance"] = hypers(s.disturbance);
    json sites = json::array();
    for (std::size_t i = 0; i < s.sites.size(); ++i) {
      json row = json::array({s.sites[i].t});
      for (Eigen::Index a = 0; a < s.sites[i].x.size(); ++a) row.push_back(s.sites[i].x(a));
      const auto ii = static_cast<Eigen::Index>(i);
      for (Eigen::Index c = 0; c < s.values.cols(); ++c) row.push_back(s.values(ii, c));
      sites.push_back(std::move(row));
    }
    j["sites"] = std::move(sites);
    out << j.dump() << "\n";
  }
  close_out(out, path);
}

std::vector<Snapshot> read_snapshots(const std::string& path, std::size_t dim) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot read snapshots " + path);
  std::vector<Snapshot> out;
  std::string line;
  std::size_t row = 0;
  while (std::getline(in, line)) {
    ++row;
    if (line.empty()) continue;
    try {
      const json j = json::parse(line);
      Snapshot s;
      s.iteration = j.at("iteration").get<std::size_t>();
      s.lambda = j.at("lambda").get<std::vector<double>>();
      auto hypers = [](const json& a) {
        std::vector<GpHyper> hs;
        for (const auto& h : a) hs.push_back(GpHyper{h.at(0), h.at(1), h.at(2), h.at(3)});
        return hs;
      };
      s.init = hypers(j.at("init"));
      s.disturbance = hypers(j.at("disturbance"));
      const auto& sites = j.at("sites");
      const auto p = static_cast<Eigen::Index>(s.init.size());
      s.values.resize(static_cast<Eigen::Index>(sites.size()), p);
      for (std::size_t i = 0; i < sites.size(); ++i) {
        const auto& r = sites[i];
        if (r.size() != 1 + dim + static_cast<std::size_t>(p)) throw InputError("site entry has the wrong length");
        Site site{r.at(0).get<int>(), Point(static_cast<Eigen::Index>(dim))};
        for (std::size_t a = 0; a < dim; ++a) site.x(static_cast<Eigen::Index>(a)) = r.at(1 + a).get<double>();
        for (Eigen::Index c = 0; c < p; ++c) {
          s.values(static_cast<Eigen::Index>(i), c) = r.at(1 + dim + static_cast<std::size_t>(c)).get<double>();
        }
        s.sites.push_back(std::move(site));
      }
      out.push_back(std::move(s));
    } catch (const json::exception& e) {
      throw InputError(path + ": line " + std::to_string(row) + ": malformed snapshot: " + e.what());
    } catch (const InputError& e) {
      throw InputError(path + ": line " + std::to_string(row) + ": " + e.what());
    }
  }
  return out;
}

void cmd_simulate(const RunConfig& config, const std::string& out_dir, std::optional<std::uint64_t> seed) {
  const std::uint64_t s = seed ? *seed : config.mcmc.seeds.front();
  const auto sim = simulate_truth(config, s);
  make_dir(out_dir);
  const fs::path dir(out_dir);
  write_pattern((dir / "pattern.csv").string(), sim.retained);

  json info;
  info["seed"] = s;
  std::vector<std::size_t> counts(static_cast<std::size_t>(config.simulation->n_times), 0);
  for (const auto& e : sim.retained.events) ++counts[static_cast<std::size_t>(e.t)];
  info["retained_per_time"] = counts;
  info["candidates"] = sim.retained.size() + sim.thinned.size();
  json expected = json::array();
  for (double v : sim.expected_counts) expected.push_back(std::isfinite(v) ? json(v) : json(nullptr));
  info["expected_counts"] = expected;
  info["config_echo"] = echo_config(config);
  write_json(dir / "truth.json", info);

  if (!config.simulation->grid) return;
  const fs::path path = dir / "truth_grid.csv";
  auto out = open_out(path);
  out << site_header(config.region.dim()) << ",lambda";
  for (std::size_t j = 0; j < config.processes.size(); ++j) out << ",beta_" << j;
  out << "\n";
  for (std::size_t i = 0; i < sim.grid_sites.size(); ++i) {
    const auto ii = static_cast<Eigen::Index>(i);
    out << site_cells(sim.grid_sites[i]) << "," << format_double(sim.grid_lambda(ii));
    for (Eigen::Index j = 0; j < sim.grid_beta.cols(); ++j) out << "," << format_double(sim.grid_beta(ii, j));
    out << "\n";
  }
  close_out(out, path);
}

namespace {

PredictiveModel predictive_model(const RunConfig& c, const LambdaPrior& lambda) {
  PredictiveModel pm;
  pm.region = c.region;
  pm.design = c.design();
  pm.dgp = c.dgp();
  pm.lambda = lambda;
  pm.lambda_mode = c.spatiotemporal ? c.lambda_mode : LambdaMode::Common;
  pm.first_time = c.n_times;
  if (!c.spatiotemporal) {
    for (auto& p : pm.dgp.processes) p.deterministic = true;
    pm.dgp.transition.setIdentity();
  }
  return pm;
}

json functional_estimates(const RunConfig& c, const PredictiveModel& pm, const std::vector<Snapshot>& snaps,
                          std::uint64_t seed) {
  json out = json::array();
  if (c.functionals.empty()) return out;
  Rng rng(seed ^ 0x6a09e667f3bcc909ULL);
  std::vector<std::vector<Region>> strata;
  for (const auto& f : c.functionals) strata.push_back(equal_strata(f.region, c.functional_strata));
  std::vector<IntegralAccumulator> acc(c.functionals.size());
  for (const auto& snap : snaps) {
    SnapshotField field(pm, snap);
    std::vector<Site> query;
    for (std::size_t r = 0; r < strata.size(); ++r) {
      for (const auto& cell : strata[r]) query.push_back(Site{c.functionals[r].t, cell.sample_uniform(rng)});
    }
    const Eigen::MatrixXd beta = field.draw(query, rng);
    Eigen::Index i = 0;
    for (std::size_t r = 0; r < strata.size(); ++r) {
      const int t = c.functionals[r].t;
      const double lam = snap.lambda.size() == 1 ? snap.lambda[0] : snap.lambda.at(static_cast<std::size_t>(t));
      double sum = 0.0;
      for (std::size_t k = 0; k < strata[r].size(); ++k, ++i) {
        sum += lam * norm_cdf(pm.design.row(query[static_cast<std::size_t>(i)]).dot(beta.row(i).transpose()));
      }
      acc[r].add(c.functionals[r].region.measure() * sum / static_cast<double>(strata[r].size()));
    }
  }
  for (std::size_t r = 0; r < acc.size(); ++r) {
    json region = json::array();
    for (const auto& [lo, hi] : c.functionals[r].region.bounds()) region.push_back({lo, hi});
    out.push_back({{"bounds", region}, {"t", c.functionals[r].t}, {"mean", acc[r].mean()}, {"se", acc[r].se()},
                   {"draws", acc[r].n()}});
  }
  return out;
}

void write_grid(const fs::path& dir, const IntensityGrid& grid, std::size_t dim, const std::string& stem) {
  const Eigen::VectorXd mean = grid.mean();
  const Eigen::VectorXd sd = grid.sd();
  {
    const auto path = dir / (stem + ".csv");
    auto out = open_out(path);
    out << site_header(dim) << ",mean,sd,n\n";
    for (std::size_t i = 0; i < grid.size(); ++i) {
      const auto ii = static_cast<Eigen::Index>(i);
      out << site_cells(grid.sites()[i]) << "," << format_double(mean(ii)) << "," << format_double(sd(ii)) << ","
          << grid.n_samples() << "\n";
    }
    close_out(out, path);
  }
  {
    const Eigen::MatrixXd beta = grid.beta_mean();
    const auto path = dir / ("beta_" + stem + ".csv");
    auto out = open_out(path);
    out << site_header(dim);
    for (Eigen::Index j = 0; j < beta.cols(); ++j) out << ",beta_" << j;
    out << "\n";
    for (std::size_t i = 0; i < grid.size(); ++i) {
      out << site_cells(grid.sites()[i]);
      for (Eigen::Index j = 0; j < beta.cols(); ++j) {
        out << "," << format_double(beta(static_cast<Eigen::Index>(i), j));
      }
      out << "\n";
    }
    close_out(out, path);
  }
  if (grid.keeps_trace() && grid.n_samples() > 0) {
    const Eigen::VectorXd lo = grid.quantile(0.025);
    const Eigen::VectorXd hi = grid.quantile(0.975);
    const auto path = dir / (stem + "_band.csv");
    auto out = open_out(path);
    out << site_header(dim) << ",q025,q975\n";
    for (std::size_t i = 0; i < grid.size(); ++i) {
      const auto ii = static_cast<Eigen::Index>(i);
      out << site_cells(grid.sites()[i]) << "," << format_double(lo(ii)) << "," << format_double(hi(ii)) << "\n";
    }
    close_out(out, path);
  }
}

void run_chain(const RunConfig& c, const PointPattern& data, std::uint64_t seed, const fs::path& dir) {
  const auto start = std::chrono::steady_clock::now();
  ChainConfig cc = c.chain(seed);
  cc.keep_snapshots = c.mcmc.snapshots || !c.functionals.empty();
  ChainOutput out;
  LambdaPrior lambda;
  if (c.spatiotemporal) {
    const StModel m = c.st_model(data);
    lambda = m.lambda;
    out = run_st_gibbs(m, cc);
  } else {
    const SpatialModel m = c.spatial_model(data);
    lambda = m.lambda;
    out = run_gibbs(m, cc);
  }
  const PredictiveModel pm = predictive_model(c, lambda);
  const json functionals = functional_estimates(c, pm, out.snapshots, seed);

  make_dir(dir.string());
  {
    const auto path = dir / "trace.csv";
    auto f = open_out(path);
    for (std::size_t k = 0; k < out.columns.size(); ++k) f << (k ? "," : "") << out.columns[k];
    f << "\n";
    for (const auto& row : out.trace) {
      for (std::size_t k = 0; k < row.size(); ++k) f << (k ? "," : "") << format_double(row[k]);
      f << "\n";
    }
    close_out(f, path);
  }
  if (out.grid.size() > 0) write_grid(dir, out.grid, c.region.dim(), "grid");
  if (c.mcmc.snapshots) write_snapshots((dir / "snapshots.jsonl").string(), out.snapshots);

  json posterior = json::object();
  json ess = json::object();
  for (std::size_t k = 1; k < out.columns.size(); ++k) {
    std::vector<double> series;
    for (std::size_t it = 0; it < out.trace.size(); ++it) {
      if (cc.retained(it)) series.push_back(out.trace[it][k]);
    }
    if (series.empty()) continue;
    const auto s = summarize(series);
    posterior[out.columns[k]] = {{"mean", s.mean}, {"sd", s.sd}, {"q025", s.q025}, {"q500", s.q500},
                                 {"q975", s.q975}};
    ess[out.columns[k]] = s.ess;
  }
  const double n_iter = static_cast<double>(std::max<std::size_t>(cc.n_iter, 1));
  json summary;
  summary["posterior"] = posterior;
  summary["ess"] = ess;
  summary["acceptance"] = {{"theta", out.theta_acceptance},
                           {"thinned_events_per_iteration", static_cast<double>(out.thinned_accepted) / n_iter}};
  summary["seed"] = seed;
  summary["retained"] = out.grid.n_samples() > 0 ? out.grid.n_samples() : out.snapshots.size();
  summary["lambda_prior"] = lambda_prior_json(lambda);
  summary["functionals"] = functionals;
  summary["config_echo"] = echo_config(c);
  summary["runtime_s"] = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  write_json(dir / "summary.json", summary);
}

std::vector<std::uint64_t> chain_seeds(const RunConfig& c, std::optional<std::uint64_t> seed) {
  return seed ? std::vector<std::uint64_t>{*seed} : c.mcmc.seeds;
}

fs::path chain_dir(const fs::path& base, std::uint64_t seed, std::size_t n_chains) {
  return n_chains == 1 ? base : base / ("chain_" + std::to_string(seed));
}

}  // namespace

void cmd_fit(const RunConfig& config, const std::string& data_path, const std::string& out_dir,
             std::optional<std::uint64_t> seed) {
  PointPattern data = read_pattern(data_path, config.region.dim());
  data.check_inside(config.region);
  if (data.n_covariates != 0 && data.n_covariates != config.covariates.size()) {
    throw InputError(data_path + ": has " + std::to_string(data.n_covariates) + " covariate columns but the config defines " +
                     std::to_string(config.covariates.size()));
  }
  for (std::size_t i = 0; i < data.events.size(); ++i) {
    if (data.events[i].t >= config.n_times) {
      const auto row = i < data.source_rows.size() ? data.source_rows[i] : i + 1;
      throw InputError(data_path + ": row " + std::to_string(row) + ": time index exceeds n_times - 1");
    }
  }
  const auto seeds = chain_seeds(config, seed);
  make_dir(out_dir);
  if (seeds.size() == 1) {
    run_chain(config, data, seeds[0], out_dir);
    return;
  }
  std::vector<std::exception_ptr> errors(seeds.size());
  std::vector<std::thread> workers;
  for (std::size_t k = 0; k < seeds.size(); ++k) {
    workers.emplace_back([&, k] {
      try {
        run_chain(config, data, seeds[k], chain_dir(out_dir, seeds[k], seeds.size()));
      } catch (...) {
        errors[k] = std::current_exception();
      }
    });
  }
  for (auto& w : workers) w.join();
  for (const auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
}

void cmd_predict(const RunConfig& config, const std::string& fit_dir, const std::string& out_dir,
                 std::optional<std::uint64_t> seed) {
  const PredictionSpec spec = config.prediction_spec();
  const std::uint64_t s = seed ? *seed : config.mcmc.seeds.front();
  const auto dim = config.region.dim();

  std::vector<Snapshot> snaps;
  std::optional<LambdaPrior> lambda;
  if (spec.horizon > 0) {
    std::vector<fs::path> dirs;
    if (fs::exists(fs::path(fit_dir) / "snapshots.jsonl")) {
      dirs.push_back(fit_dir);
    } else {
      for (auto cs : config.mcmc.seeds) {
        const auto d = fs::path(fit_dir) / ("chain_" + std::to_string(cs));
        if (fs::exists(d / "snapshots.jsonl")) dirs.push_back(d);
      }
    }
    if (dirs.empty()) {
      throw InputError("no snapshots.jsonl under " + fit_dir +
                       "; rerun fit with \"mcmc\": {\"snapshots\": true} to keep the retained draws");
    }
    for (const auto& d : dirs) {
      auto part = read_snapshots((d / "snapshots.jsonl").string(), dim);
      snaps.insert(snaps.end(), std::make_move_iterator(part.begin()), std::make_move_iterator(part.end()));
      std::ifstream in(d / "summary.json");
      if (in && !lambda) {
        try {
          lambda = lambda_prior_from(json::parse(in).at("lambda_prior"));
        } catch (const json::exception& e) {
          throw InputError((d / "summary.json").string() + ": " + e.what());
        }
      }
    }
  }

  make_dir(out_dir);
  const fs::path dir(out_dir);
  PredictiveSummary summary;
  if (spec.horizon > 0) {
    if (!lambda) {
      if (config.lambda.empirical) throw InputError("fit summary.json is needed to recover the empirical lambda prior");
      lambda = config.lambda.prior;
    }
    const PredictiveModel pm = predictive_model(config, *lambda);
    summary = PredictiveSummary(pm.first_time, spec, config.processes.size());
    Rng rng(s);
    for (const auto& snap : snaps) summary.add(predict_future(pm, snap, spec, rng));
  }

  {
    const auto path = dir / "predictive_counts.csv";
    auto out = open_out(path);
    out << "draw,t,count\n";
    for (std::size_t k = 0; k < summary.counts.size(); ++k) {
      for (std::size_t d = 0; d < summary.counts[k].size(); ++d) {
        out << d << "," << summary.first_time + static_cast<int>(k) << "," << summary.counts[k][d] << "\n";
      }
    }
    close_out(out, path);
  }
  {
    const auto path = dir / "predictive_grid.csv";
    auto out = open_out(path);
    out << site_header(dim) << ",mean,sd,n\n";
    for (const auto& g : summary.grids) {
      if (g.size() == 0 || g.n_samples() == 0) continue;
      const Eigen::VectorXd mean = g.mean();
      const Eigen::VectorXd sd = g.sd();
      for (std::size_t i = 0; i < g.size(); ++i) {
        const auto ii = static_cast<Eigen::Index>(i);
        out << site_cells(g.sites()[i]) << "," << format_double(mean(ii)) << "," << format_double(sd(ii)) << ","
            << g.n_samples() << "\n";
      }
    }
    close_out(out, path);
  }
  {
    const auto path = dir / "predictive_integrals.csv";
    auto out = open_out(path);
    out << "t,region,mean,se,n\n";
    for (std::size_t k = 0; k < summary.integrals.size(); ++k) {
      for (std::size_t r = 0; r < summary.integrals[k].size(); ++r) {
        const auto& a = summary.integrals[k][r];
        out << summary.first_time + static_cast<int>(k) << "," << r << "," << format_double(a.mean()) << ","
            << format_double(a.se()) << "," << a.n() << "\n";
      }
    }
    close_out(out, path);
  }
  json info;
  info["seed"] = s;
  info["draws"] = snaps.size();
  json means = json::array();
  for (std::size_t k = 0; k < summary.counts.size(); ++k) {
    means.push_back({{"t", summary.first_time + static_cast<int>(k)}, {"mean_count", summary.mean_count(k)}});
  }
  info["counts"] = means;
  write_json(dir / "predictive_summary.json", info);
}

}  // namespace coxkit
