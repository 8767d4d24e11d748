#include "coxkit/config.hpp"

#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include "coxkit/errors.hpp"

namespace coxkit {

using nlohmann::json;

double ExpTermsField::operator()(const Point& x) const {
  double v = offset;
  for (const auto& t : terms) {
    v += t.a * std::exp(-std::pow(std::abs(x(static_cast<Eigen::Index>(t.axis)) - t.center), t.power) / t.scale);
  }
  return v;
}

namespace {

[[noreturn]] void fail(const std::string& path, const std::string& what) {
  throw InputError("config: " + path + ": " + what);
}

void allow_keys(const json& j, const std::string& path, std::initializer_list<const char*> keys) {
  if (!j.is_object()) fail(path, "must be an object");
  std::set<std::string> ok(keys.begin(), keys.end());
  for (const auto& [k, v] : j.items()) {
    if (!ok.count(k)) fail(path.empty() ? k : path + "." + k, "unknown key");
  }
}

std::string join(const std::string& path, const std::string& key) { return path.empty() ? key : path + "." + key; }

double number(const json& j, const std::string& path) {
  if (!j.is_number()) fail(path, "must be a number");
  const double v = j.get<double>();
  if (!std::isfinite(v)) fail(path, "must be finite");
  return v;
}

double number_or(const json& j, const std::string& path, const char* key, double dflt) {
  return j.contains(key) ? number(j.at(key), join(path, key)) : dflt;
}

std::uint64_t count(const json& j, const std::string& path) {
  if (!j.is_number_integer() || j.get<long long>() < 0) fail(path, "must be a non-negative integer");
  return j.get<std::uint64_t>();
}

std::uint64_t count_or(const json& j, const std::string& path, const char* key, std::uint64_t dflt) {
  return j.contains(key) ? count(j.at(key), join(path, key)) : dflt;
}

bool flag_or(const json& j, const std::string& path, const char* key, bool dflt) {
  if (!j.contains(key)) return dflt;
  if (!j.at(key).is_boolean()) fail(join(path, key), "must be true or false");
  return j.at(key).get<bool>();
}

std::string text(const json& j, const std::string& path) {
  if (!j.is_string()) fail(path, "must be a string");
  return j.get<std::string>();
}

Region region_from(const json& j, const std::string& path) {
  if (!j.is_array() || j.empty()) fail(path, "must be a non-empty list of [low, high] pairs");
  std::vector<std::pair<double, double>> b;
  for (std::size_t a = 0; a < j.size(); ++a) {
    const auto p = path + "[" + std::to_string(a) + "]";
    const auto& e = j[a];
    if (!e.is_array() || e.size() != 2) fail(p, "must be a [low, high] pair");
    const double lo = number(e[0], p + "[0]");
    const double hi = number(e[1], p + "[1]");
    if (!(hi > lo)) fail(p, "high must exceed low");
    b.emplace_back(lo, hi);
  }
  return Region(std::move(b));
}

std::vector<std::size_t> resolution_from(const json& j, const std::string& path, std::size_t dim) {
  std::vector<std::size_t> out;
  if (j.is_number()) {
    out.assign(dim, static_cast<std::size_t>(count(j, path)));
  } else {
    if (!j.is_array() || j.size() != dim) fail(path, "must be an integer or one integer per axis");
    for (std::size_t a = 0; a < dim; ++a) out.push_back(count(j[a], path + "[" + std::to_string(a) + "]"));
  }
  for (auto r : out) {
    if (r < 1) fail(path, "grid resolution must be >= 1");
  }
  return out;
}

ParamPrior param_from(const json& j, const std::string& path) {
  if (j.is_number()) return ParamPrior::fixed(number(j, path));
  if (j.is_object() && j.contains("uniform")) {
    allow_keys(j, path, {"uniform"});
    const auto& u = j.at("uniform");
    if (!u.is_array() || u.size() != 2) fail(path + ".uniform", "must be a [low, high] pair");
    const double lo = number(u[0], path + ".uniform[0]");
    const double hi = number(u[1], path + ".uniform[1]");
    if (!(hi > lo)) fail(path + ".uniform", "high must exceed low");
    return ParamPrior::uniform(lo, hi);
  }
  fail(path, "must be a number (fixed) or {\"uniform\": [low, high]}");
}

HyperPrior hyper_prior_from(const json& j, const std::string& path) {
  allow_keys(j, path, {"mu", "sigma2", "tau2", "gamma"});
  HyperPrior h;
  if (j.contains("mu")) h.mu = param_from(j.at("mu"), path + ".mu");
  if (j.contains("sigma2")) h.sigma2 = param_from(j.at("sigma2"), path + ".sigma2");
  if (j.contains("tau2")) h.tau2 = param_from(j.at("tau2"), path + ".tau2");
  h.gamma = number_or(j, path, "gamma", h.gamma);
  try {
    h.validate(path);
  } catch (const InputError& e) {
    throw InputError(std::string("config: ") + e.what());
  }
  return h;
}

GpHyper hyper_from(const json& j, const std::string& path) {
  allow_keys(j, path, {"mu", "sigma2", "tau2", "gamma"});
  GpHyper h;
  h.mu = number_or(j, path, "mu", h.mu);
  h.sigma2 = number_or(j, path, "sigma2", h.sigma2);
  h.tau2 = number_or(j, path, "tau2", h.tau2);
  h.gamma = number_or(j, path, "gamma", h.gamma);
  try {
    h.validate();
  } catch (const InputError& e) {
    fail(path, e.what());
  }
  return h;
}

ExpTermsField field_from(const json& j, const std::string& path, std::size_t dim) {
  allow_keys(j, path, {"offset", "terms"});
  ExpTermsField f;
  f.offset = number_or(j, path, "offset", 0.0);
  if (j.contains("terms")) {
    const auto& ts = j.at("terms");
    if (!ts.is_array()) fail(path + ".terms", "must be a list");
    for (std::size_t k = 0; k < ts.size(); ++k) {
      const auto p = path + ".terms[" + std::to_string(k) + "]";
      allow_keys(ts[k], p, {"a", "axis", "center", "power", "scale"});
      ExpTermsField::Term t;
      t.a = number_or(ts[k], p, "a", 0.0);
      t.axis = count_or(ts[k], p, "axis", 0);
      t.center = number_or(ts[k], p, "center", 0.0);
      t.power = number_or(ts[k], p, "power", 2.0);
      t.scale = number_or(ts[k], p, "scale", 1.0);
      if (t.axis >= dim) fail(p + ".axis", "exceeds the region dimension");
      if (!(t.power > 0.0)) fail(p + ".power", "must be positive");
      if (!(t.scale > 0.0)) fail(p + ".scale", "must be positive");
      f.terms.push_back(t);
    }
  }
  return f;
}

Design::Term term_from(const json& j, const std::string& path) {
  Design::Term t;
  if (j.is_string()) {
    if (j.get<std::string>() != "intercept") fail(path, "must be \"intercept\", {\"covariate\": i} or {\"harmonic\": {...}}");
    return t;
  }
  if (j.is_object() && j.contains("covariate")) {
    allow_keys(j, path, {"covariate"});
    t.kind = Design::Term::Kind::Covariate;
    t.covariate = count(j.at("covariate"), path + ".covariate");
    return t;
  }
  if (j.is_object() && j.contains("harmonic")) {
    allow_keys(j, path, {"harmonic"});
    const auto& h = j.at("harmonic");
    const auto p = path + ".harmonic";
    allow_keys(h, p, {"period", "phase"});
    t.kind = Design::Term::Kind::Harmonic;
    t.period = static_cast<int>(count_or(h, p, "period", 4));
    if (t.period < 1) fail(p + ".period", "must be >= 1");
    t.phase = number_or(h, p, "phase", 0.0);
    return t;
  }
  fail(path, "must be \"intercept\", {\"covariate\": i} or {\"harmonic\": {...}}");
}

GridConfig grid_from(const json& j, const std::string& path, std::size_t dim) {
  allow_keys(j, path, {"resolution", "times", "keep_trace"});
  GridConfig g;
  if (!j.contains("resolution")) fail(path + ".resolution", "is required");
  g.resolution = resolution_from(j.at("resolution"), path + ".resolution", dim);
  if (j.contains("times")) {
    const auto& ts = j.at("times");
    if (!ts.is_array()) fail(path + ".times", "must be a list of integers");
    g.times.clear();
    for (std::size_t k = 0; k < ts.size(); ++k) {
      g.times.push_back(static_cast<int>(count(ts[k], path + ".times[" + std::to_string(k) + "]")));
    }
  }
  g.keep_trace = flag_or(j, path, "keep_trace", false);
  return g;
}

LambdaConfig lambda_from(const json& j, const std::string& path) {
  allow_keys(j, path, {"prior", "shape", "rate", "value", "fraction"});
  LambdaConfig c;
  const std::string kind = j.contains("prior") ? text(j.at("prior"), path + ".prior") : "gamma";
  if (kind == "gamma") {
    c.prior = LambdaPrior::gamma(number_or(j, path, "shape", 1.0), number_or(j, path, "rate", 1.0));
  } else if (kind == "exponential") {
    c.prior = LambdaPrior::exponential(number_or(j, path, "rate", 1.0));
  } else if (kind == "fixed") {
    if (!j.contains("value")) fail(path + ".value", "is required for a fixed lambda*");
    c.prior = LambdaPrior::fixed(number(j.at("value"), path + ".value"));
  } else if (kind == "empirical") {
    c.empirical = true;
    c.fraction = number_or(j, path, "fraction", 0.05);
    if (!(c.fraction > 0.0 && c.fraction <= 1.0)) fail(path + ".fraction", "must lie in (0, 1]");
    c.prior = LambdaPrior::exponential(1.0);
  } else {
    fail(path + ".prior", "must be gamma, exponential, fixed or empirical");
  }
  if (!c.empirical) {
    try {
      c.prior.validate();
    } catch (const InputError& e) {
      fail(path, e.what());
    }
  }
  return c;
}

TruthProcess truth_from(const json& j, const std::string& path, std::size_t dim) {
  allow_keys(j, path, {"field", "transform", "gp", "disturbance", "deterministic", "alpha"});
  TruthProcess t;
  if (j.contains("field")) {
    if (j.contains("gp")) fail(path, "give either field or gp, not both");
    t.kind = TruthProcess::Kind::Field;
    t.field = field_from(j.at("field"), path + ".field", dim);
    if (j.contains("transform")) {
      const auto tr = text(j.at("transform"), path + ".transform");
      if (tr == "probit_of_intensity") {
        t.probit_of_intensity = true;
      } else if (tr != "none") {
        fail(path + ".transform", "must be none or probit_of_intensity");
      }
    }
    return t;
  }
  t.kind = TruthProcess::Kind::Gp;
  if (j.contains("gp")) t.gp = hyper_from(j.at("gp"), path + ".gp");
  if (j.contains("disturbance")) t.disturbance = hyper_from(j.at("disturbance"), path + ".disturbance");
  t.deterministic = flag_or(j, path, "deterministic", false);
  t.alpha = number_or(j, path, "alpha", 1.0);
  return t;
}

std::vector<Region> region_list(const json& j, const std::string& path) {
  if (!j.is_array()) fail(path, "must be a list of regions");
  std::vector<Region> out;
  for (std::size_t k = 0; k < j.size(); ++k) out.push_back(region_from(j[k], path + "[" + std::to_string(k) + "]"));
  return out;
}

std::size_t strata_or(const json& j, const std::string& path, std::size_t dim) {
  const auto s = count_or(j, path, "strata", 1);
  const auto k = static_cast<std::size_t>(std::llround(std::pow(static_cast<double>(s), 1.0 / static_cast<double>(dim))));
  std::size_t kd = 1;
  for (std::size_t a = 0; a < dim; ++a) kd *= k;
  if (s < 1 || kd != s) fail(join(path, "strata"), "must be k^d for an integer k >= 1");
  return static_cast<std::size_t>(s);
}

void check_inside(const Region& outer, const Region& r, const std::string& path) {
  if (r.dim() != outer.dim()) fail(path, "dimension differs from the model region");
  if (!outer.contains(r)) fail(path, "must lie inside the model region");
}

json param_json(const ParamPrior& p) {
  if (p.free) return json{{"uniform", {p.low, p.high}}};
  return p.value;
}

json hyper_prior_json(const HyperPrior& h) {
  return json{{"mu", param_json(h.mu)}, {"sigma2", param_json(h.sigma2)}, {"tau2", param_json(h.tau2)},
              {"gamma", h.gamma}};
}

json hyper_json(const GpHyper& h) {
  return json{{"mu", h.mu}, {"sigma2", h.sigma2}, {"tau2", h.tau2}, {"gamma", h.gamma}};
}

json region_json(const Region& r) {
  json out = json::array();
  for (const auto& [lo, hi] : r.bounds()) out.push_back({lo, hi});
  return out;
}

json field_json(const ExpTermsField& f) {
  json terms = json::array();
  for (const auto& t : f.terms) {
    terms.push_back({{"a", t.a}, {"axis", t.axis}, {"center", t.center}, {"power", t.power}, {"scale", t.scale}});
  }
  return json{{"offset", f.offset}, {"terms", terms}};
}

json term_json(const Design::Term& t) {
  switch (t.kind) {
    case Design::Term::Kind::Intercept:
      return "intercept";
    case Design::Term::Kind::Covariate:
      return json{{"covariate", t.covariate}};
    case Design::Term::Kind::Harmonic:
      return json{{"harmonic", {{"period", t.period}, {"phase", t.phase}}}};
  }
  return nullptr;
}

json grid_json(const GridConfig& g) {
  return json{{"resolution", g.resolution}, {"times", g.times}, {"keep_trace", g.keep_trace}};
}

}  // namespace

RunConfig parse_config(const json& doc) {
  allow_keys(doc, "", {"model", "region", "n_times", "covariates", "processes", "lambda", "lambda_mode", "mcmc",
                       "grid", "functionals", "prediction", "simulation"});
  RunConfig c;
  const std::string model = doc.contains("model") ? text(doc.at("model"), "model") : "spatial";
  if (model == "spatiotemporal") {
    c.spatiotemporal = true;
  } else if (model != "spatial") {
    fail("model", "must be spatial or spatiotemporal");
  }
  if (!doc.contains("region")) fail("region", "is required");
  c.region = region_from(doc.at("region"), "region");
  const auto dim = c.region.dim();
  c.n_times = static_cast<int>(count_or(doc, "", "n_times", 1));
  if (c.n_times < 1) fail("n_times", "must be >= 1");
  if (!c.spatiotemporal && c.n_times != 1) fail("n_times", "must be 1 for a spatial model");

  if (doc.contains("covariates")) {
    const auto& cv = doc.at("covariates");
    if (!cv.is_array()) fail("covariates", "must be a list of fields");
    for (std::size_t k = 0; k < cv.size(); ++k) {
      c.covariates.push_back(field_from(cv[k], "covariates[" + std::to_string(k) + "]", dim));
    }
  }

  if (doc.contains("processes")) {
    const auto& ps = doc.at("processes");
    if (!ps.is_array() || ps.empty()) fail("processes", "must be a non-empty list");
    for (std::size_t k = 0; k < ps.size(); ++k) {
      const auto path = "processes[" + std::to_string(k) + "]";
      allow_keys(ps[k], path, {"term", "gp", "disturbance", "deterministic", "alpha"});
      ProcessConfig p;
      if (ps[k].contains("term")) p.term = term_from(ps[k].at("term"), path + ".term");
      if (p.term.kind == Design::Term::Kind::Covariate && p.term.covariate >= c.covariates.size()) {
        fail(path + ".term.covariate", "refers to a covariate that is not defined");
      }
      if (ps[k].contains("gp")) p.gp = hyper_prior_from(ps[k].at("gp"), path + ".gp");
      if (ps[k].contains("disturbance")) {
        p.disturbance = hyper_prior_from(ps[k].at("disturbance"), path + ".disturbance");
      }
      p.deterministic = flag_or(ps[k], path, "deterministic", false);
      p.alpha = number_or(ps[k], path, "alpha", 1.0);
      if (!c.spatiotemporal && (ps[k].contains("disturbance") || ps[k].contains("alpha") ||
                                ps[k].contains("deterministic"))) {
        fail(path, "disturbance, deterministic and alpha apply to spatiotemporal models only");
      }
      c.processes.push_back(p);
    }
  } else {
    c.processes.push_back(ProcessConfig{});
  }

  if (doc.contains("lambda")) c.lambda = lambda_from(doc.at("lambda"), "lambda");
  if (doc.contains("lambda_mode")) {
    const auto m = text(doc.at("lambda_mode"), "lambda_mode");
    if (m == "independent") {
      c.lambda_mode = LambdaMode::Independent;
    } else if (m != "common") {
      fail("lambda_mode", "must be common or independent");
    }
    if (c.lambda_mode == LambdaMode::Independent && c.lambda.prior.kind == LambdaPrior::Kind::Fixed) {
      fail("lambda_mode", "independent rates need a non-fixed lambda prior");
    }
  }

  if (doc.contains("mcmc")) {
    const auto& m = doc.at("mcmc");
    allow_keys(m, "mcmc", {"n_iter", "burn_in", "thin", "seed", "seeds", "sn_sweeps", "rejection_cap", "batch",
                           "snapshots"});
    c.mcmc.n_iter = count_or(m, "mcmc", "n_iter", c.mcmc.n_iter);
    c.mcmc.burn_in = count_or(m, "mcmc", "burn_in", c.mcmc.burn_in);
    c.mcmc.thin = count_or(m, "mcmc", "thin", c.mcmc.thin);
    if (m.contains("seed") && m.contains("seeds")) fail("mcmc", "give seed or seeds, not both");
    if (m.contains("seed")) c.mcmc.seeds = {count(m.at("seed"), "mcmc.seed")};
    if (m.contains("seeds")) {
      const auto& s = m.at("seeds");
      if (!s.is_array() || s.empty()) fail("mcmc.seeds", "must be a non-empty list");
      c.mcmc.seeds.clear();
      for (std::size_t k = 0; k < s.size(); ++k) {
        c.mcmc.seeds.push_back(count(s[k], "mcmc.seeds[" + std::to_string(k) + "]"));
      }
      if (std::set<std::uint64_t>(c.mcmc.seeds.begin(), c.mcmc.seeds.end()).size() != c.mcmc.seeds.size()) {
        fail("mcmc.seeds", "must be distinct");
      }
    }
    c.mcmc.settings.sn_sweeps = count_or(m, "mcmc", "sn_sweeps", c.mcmc.settings.sn_sweeps);
    c.mcmc.settings.rejection_cap = count_or(m, "mcmc", "rejection_cap", c.mcmc.settings.rejection_cap);
    c.mcmc.settings.batch = count_or(m, "mcmc", "batch", c.mcmc.settings.batch);
    c.mcmc.snapshots = flag_or(m, "mcmc", "snapshots", false);
  }
  if (c.mcmc.thin < 1) fail("mcmc.thin", "must be >= 1");
  if (c.mcmc.burn_in > c.mcmc.n_iter) fail("mcmc.burn_in", "must not exceed mcmc.n_iter");
  if (c.mcmc.settings.rejection_cap < 1) fail("mcmc.rejection_cap", "must be >= 1");
  if (c.mcmc.settings.batch < 1) fail("mcmc.batch", "must be >= 1");

  if (doc.contains("grid")) {
    c.grid = grid_from(doc.at("grid"), "grid", dim);
    for (int t : c.grid->times) {
      if (t >= c.n_times) fail("grid.times", "must lie in 0 .. n_times-1");
    }
  }

  if (doc.contains("functionals")) {
    const auto& f = doc.at("functionals");
    allow_keys(f, "functionals", {"regions", "strata"});
    if (f.contains("regions")) {
      const auto& rs = f.at("regions");
      if (!rs.is_array()) fail("functionals.regions", "must be a list");
      for (std::size_t k = 0; k < rs.size(); ++k) {
        const auto path = "functionals.regions[" + std::to_string(k) + "]";
        allow_keys(rs[k], path, {"bounds", "t"});
        if (!rs[k].contains("bounds")) fail(path + ".bounds", "is required");
        FunctionalConfig fc;
        fc.region = region_from(rs[k].at("bounds"), path + ".bounds");
        check_inside(c.region, fc.region, path + ".bounds");
        fc.t = static_cast<int>(count_or(rs[k], path, "t", 0));
        if (fc.t >= c.n_times) fail(path + ".t", "must lie in 0 .. n_times-1");
        c.functionals.push_back(fc);
      }
    }
    c.functional_strata = strata_or(f, "functionals", dim);
  }

  if (doc.contains("prediction")) {
    const auto& p = doc.at("prediction");
    allow_keys(p, "prediction", {"horizon", "resolution", "regions", "strata"});
    c.prediction.horizon = static_cast<int>(count_or(p, "prediction", "horizon", 0));
    if (p.contains("resolution")) {
      c.prediction.resolution = resolution_from(p.at("resolution"), "prediction.resolution", dim);
    }
    if (p.contains("regions")) {
      c.prediction.regions = region_list(p.at("regions"), "prediction.regions");
      for (std::size_t k = 0; k < c.prediction.regions.size(); ++k) {
        check_inside(c.region, c.prediction.regions[k], "prediction.regions[" + std::to_string(k) + "]");
      }
    }
    c.prediction.n_strata = strata_or(p, "prediction", dim);
  }

  if (doc.contains("simulation")) {
    const auto& s = doc.at("simulation");
    allow_keys(s, "simulation", {"lambda_star", "n_times", "truth", "grid"});
    SimulationConfig sim;
    if (!s.contains("lambda_star")) fail("simulation.lambda_star", "is required");
    sim.lambda_star = number(s.at("lambda_star"), "simulation.lambda_star");
    if (sim.lambda_star < 0.0) fail("simulation.lambda_star", "must be >= 0");
    sim.n_times = static_cast<int>(count_or(s, "simulation", "n_times", static_cast<std::uint64_t>(c.n_times)));
    if (sim.n_times < 1) fail("simulation.n_times", "must be >= 1");
    if (!c.spatiotemporal && sim.n_times != 1) fail("simulation.n_times", "must be 1 for a spatial model");
    if (s.contains("truth")) {
      const auto& ts = s.at("truth");
      if (!ts.is_array()) fail("simulation.truth", "must be a list");
      for (std::size_t k = 0; k < ts.size(); ++k) {
        sim.truth.push_back(truth_from(ts[k], "simulation.truth[" + std::to_string(k) + "]", dim));
      }
    }
    if (sim.truth.size() != c.processes.size()) fail("simulation.truth", "needs one entry per process");
    for (std::size_t k = 0; k < sim.truth.size(); ++k) {
      if (sim.truth[k].probit_of_intensity && !(sim.lambda_star > 0.0)) {
        fail("simulation.truth[" + std::to_string(k) + "].transform", "needs lambda_star > 0");
      }
    }
    if (s.contains("grid")) {
      sim.grid = grid_from(s.at("grid"), "simulation.grid", dim);
      for (int t : sim.grid->times) {
        if (t >= sim.n_times) fail("simulation.grid.times", "must lie in 0 .. simulation.n_times-1");
      }
    }
    c.simulation = sim;
  }
  return c;
}

RunConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot read config file " + path);
  std::stringstream buf;
  buf << in.rdbuf();
  json doc;
  try {
    doc = json::parse(buf.str());
  } catch (const json::parse_error& e) {
    throw InputError("config: not valid JSON: " + std::string(e.what()));
  }
  return parse_config(doc);
}

json echo_config(const RunConfig& c) {
  json out;
  out["model"] = c.spatiotemporal ? "spatiotemporal" : "spatial";
  out["region"] = region_json(c.region);
  out["n_times"] = c.n_times;
  out["covariates"] = json::array();
  for (const auto& f : c.covariates) out["covariates"].push_back(field_json(f));
  out["processes"] = json::array();
  for (const auto& p : c.processes) {
    json pj{{"term", term_json(p.term)}, {"gp", hyper_prior_json(p.gp)}};
    if (c.spatiotemporal) {
      pj["disturbance"] = hyper_prior_json(p.disturbance);
      pj["deterministic"] = p.deterministic;
      pj["alpha"] = p.alpha;
    }
    out["processes"].push_back(pj);
  }
  json lj;
  if (c.lambda.empirical) {
    lj = {{"prior", "empirical"}, {"fraction", c.lambda.fraction}};
  } else {
    switch (c.lambda.prior.kind) {
      case LambdaPrior::Kind::Gamma:
        lj = {{"prior", "gamma"}, {"shape", c.lambda.prior.shape}, {"rate", c.lambda.prior.rate}};
        break;
      case LambdaPrior::Kind::Exponential:
        lj = {{"prior", "exponential"}, {"rate", c.lambda.prior.rate}};
        break;
      case LambdaPrior::Kind::Fixed:
        lj = {{"prior", "fixed"}, {"value", c.lambda.prior.value}};
        break;
    }
  }
  out["lambda"] = lj;
  if (c.spatiotemporal) out["lambda_mode"] = c.lambda_mode == LambdaMode::Common ? "common" : "independent";
  out["mcmc"] = {{"n_iter", c.mcmc.n_iter},
                 {"burn_in", c.mcmc.burn_in},
                 {"thin", c.mcmc.thin},
                 {"seeds", c.mcmc.seeds},
                 {"sn_sweeps", c.mcmc.settings.sn_sweeps},
                 {"rejection_cap", c.mcmc.settings.rejection_cap},
                 {"batch", c.mcmc.settings.batch},
                 {"snapshots", c.mcmc.snapshots}};
  if (c.grid) out["grid"] = grid_json(*c.grid);
  json regions = json::array();
  for (const auto& f : c.functionals) regions.push_back({{"bounds", region_json(f.region)}, {"t", f.t}});
  out["functionals"] = {{"regions", regions}, {"strata", c.functional_strata}};
  json pregions = json::array();
  for (const auto& r : c.prediction.regions) pregions.push_back(region_json(r));
  out["prediction"] = {{"horizon", c.prediction.horizon},
                       {"resolution", c.prediction.resolution},
                       {"regions", pregions},
                       {"strata", c.prediction.n_strata}};
  if (c.simulation) {
    const auto& s = *c.simulation;
    json truth = json::array();
    for (const auto& t : s.truth) {
      if (t.kind == TruthProcess::Kind::Field) {
        truth.push_back({{"field", field_json(t.field)},
                         {"transform", t.probit_of_intensity ? "probit_of_intensity" : "none"}});
      } else {
        truth.push_back({{"gp", hyper_json(t.gp)},
                         {"disturbance", hyper_json(t.disturbance)},
                         {"deterministic", t.deterministic},
                         {"alpha", t.alpha}});
      }
    }
    out["simulation"] = {{"lambda_star", s.lambda_star}, {"n_times", s.n_times}, {"truth", truth}};
    if (s.grid) out["simulation"]["grid"] = grid_json(*s.grid);
  }
  return out;
}

Design RunConfig::design() const {
  std::vector<Design::Term> terms;
  for (const auto& p : processes) terms.push_back(p.term);
  std::vector<CovariateField> fields;
  for (const auto& f : covariates) fields.push_back([f](const Site& s) { return f(s.x); });
  return Design(std::move(terms), std::move(fields));
}

DgpSpec RunConfig::dgp() const {
  DgpSpec spec;
  const auto p = static_cast<Eigen::Index>(processes.size());
  spec.transition = Eigen::MatrixXd::Identity(p, p);
  for (Eigen::Index j = 0; j < p; ++j) {
    const auto& pc = processes[static_cast<std::size_t>(j)];
    DgpProcess proc;
    proc.init = pc.gp.initial();
    proc.disturbance = pc.disturbance.initial();
    proc.deterministic = pc.deterministic;
    spec.processes.push_back(proc);
    spec.transition(j, j) = pc.alpha;
  }
  return spec;
}

LambdaPrior RunConfig::lambda_prior(const PointPattern& data) const {
  if (!lambda.empirical) return lambda.prior;
  // Peak intensity pooled over time slices.
  const double peak = empirical_peak_intensity(data, region, lambda.fraction) / static_cast<double>(n_times);
  if (!(peak > 0.0)) throw InputError("config: lambda: empirical prior needs at least one event");
  return LambdaPrior::exponential(1.0 / (2.0 * peak));
}

SpatialModel RunConfig::spatial_model(const PointPattern& data) const {
  SpatialModel m;
  m.region = region;
  m.data = data;
  m.design = design();
  for (const auto& p : processes) m.hyper.push_back(p.gp);
  m.lambda = lambda_prior(data);
  return m;
}

StModel RunConfig::st_model(const PointPattern& data) const {
  StModel m;
  m.region = region;
  m.data = data;
  m.n_times = n_times;
  m.design = design();
  m.dgp = dgp();
  for (const auto& p : processes) {
    m.init_prior.push_back(p.gp);
    m.dist_prior.push_back(p.disturbance);
  }
  m.lambda = lambda_prior(data);
  m.lambda_mode = lambda_mode;
  return m;
}

ChainConfig RunConfig::chain(std::uint64_t seed) const {
  ChainConfig cc;
  cc.n_iter = mcmc.n_iter;
  cc.burn_in = mcmc.burn_in;
  cc.thin = mcmc.thin;
  cc.seed = seed;
  cc.settings = mcmc.settings;
  cc.keep_snapshots = mcmc.snapshots;
  if (grid) {
    const auto pts = regular_grid(region, grid->resolution);
    for (int t : grid->times) {
      for (const auto& x : pts) cc.grid.push_back(Site{t, x});
    }
    cc.keep_grid_trace = grid->keep_trace;
  }
  return cc;
}

PredictionSpec RunConfig::prediction_spec() const {
  PredictionSpec ps;
  ps.horizon = prediction.horizon;
  if (!prediction.resolution.empty()) ps.grid = regular_grid(region, prediction.resolution);
  ps.regions = prediction.regions;
  ps.n_strata = prediction.n_strata;
  return ps;
}

}  // namespace coxkit
