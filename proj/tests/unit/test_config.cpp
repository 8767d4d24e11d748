#include <string>

#include "doctest.h"

#include "coxkit/config.hpp"
#include "coxkit/errors.hpp"

using namespace coxkit;
using nlohmann::json;

namespace {

json base() { return json::parse(R"({"region": [[0, 10]]})"); }

// Message of the InputError thrown by parsing `doc`, or "" if it parses.
std::string error_of(const json& doc) {
  try {
    parse_config(doc);
  } catch (const InputError& e) {
    return e.what();
  }
  return "";
}

}  // namespace

TEST_CASE("defaults are filled in and echoed") {
  const auto c = parse_config(base());
  CHECK_FALSE(c.spatiotemporal);
  CHECK(c.n_times == 1);
  REQUIRE(c.processes.size() == 1);
  CHECK(c.mcmc.n_iter == 1000);
  CHECK(c.mcmc.thin == 1);
  CHECK(c.mcmc.seeds == std::vector<std::uint64_t>{1});
  CHECK(c.mcmc.settings.rejection_cap == 1000000);
  const auto e = echo_config(c);
  CHECK(e["model"] == "spatial");
  CHECK(e["mcmc"]["n_iter"] == 1000);
  CHECK(e["mcmc"]["rejection_cap"] == 1000000);
  CHECK(e["lambda"]["prior"] == "gamma");
  CHECK(e["processes"][0]["term"] == "intercept");
  CHECK(e["prediction"]["horizon"] == 0);
}

TEST_CASE("the echo parses back to itself") {
  auto doc = json::parse(R"({
    "model": "spatiotemporal", "region": [[0, 10], [0, 10]], "n_times": 3,
    "covariates": [{"offset": 1, "terms": [{"a": 2, "axis": 1, "center": 5}]}],
    "processes": [{"gp": {"mu": 0, "sigma2": {"uniform": [0.5, 4]}, "tau2": 2, "gamma": 1.5},
                   "disturbance": {"sigma2": 0.5, "tau2": 2}, "alpha": 0.9},
                  {"term": {"covariate": 0}, "deterministic": true}],
    "lambda": {"prior": "exponential", "rate": 0.2}, "lambda_mode": "independent",
    "mcmc": {"n_iter": 50, "burn_in": 10, "thin": 2, "seeds": [3, 4], "snapshots": true},
    "grid": {"resolution": [4, 5], "times": [0, 2]},
    "functionals": {"regions": [{"bounds": [[0, 5], [0, 5]], "t": 1}], "strata": 4},
    "prediction": {"horizon": 2, "resolution": 3, "regions": [[[1, 2], [1, 2]]]},
    "simulation": {"lambda_star": 3, "truth": [{"gp": {"sigma2": 1}}, {"field": {"offset": 0.5}}]}
  })");
  const auto e = echo_config(parse_config(doc));
  CHECK(echo_config(parse_config(e)) == e);
  CHECK(e["processes"][0]["gp"]["sigma2"]["uniform"][1] == 4.0);
  CHECK(e["processes"][1]["deterministic"] == true);
  CHECK(e["grid"]["resolution"][1] == 5);
  CHECK(e["prediction"]["resolution"] == json::array({3, 3}));
}

TEST_CASE("errors name the offending field") {
  auto with = [](const char* patch) {
    auto d = base();
    d.merge_patch(json::parse(patch));
    return error_of(d);
  };
  CHECK(error_of(json::parse("{}")).find("region") != std::string::npos);
  CHECK(with(R"({"region": [[1, 0]]})").find("region[0]") != std::string::npos);
  CHECK(with(R"({"mcmc": {"thin": 0}})").find("mcmc.thin") != std::string::npos);
  CHECK(with(R"({"mcmc": {"n_iter": 5, "burn_in": 6}})").find("mcmc.burn_in") != std::string::npos);
  CHECK(with(R"({"mcmc": {"n_iter": -1}})").find("mcmc.n_iter") != std::string::npos);
  CHECK(with(R"({"mcmc": {"seeds": [1, 1]}})").find("mcmc.seeds") != std::string::npos);
  CHECK(with(R"({"grid": {"resolution": 0}})").find("grid.resolution") != std::string::npos);
  CHECK(with(R"({"processes": [{"gp": {"tau2": -1}}]})").find("processes[0].gp") != std::string::npos);
  CHECK(with(R"({"processes": [{"term": {"covariate": 0}}]})").find("processes[0].term.covariate") !=
        std::string::npos);
  CHECK(with(R"({"lambda": {"prior": "beta"}})").find("lambda.prior") != std::string::npos);
  CHECK(with(R"({"n_times": 2})").find("n_times") != std::string::npos);
  CHECK(with(R"({"mcmc": {"nsteps": 3}})").find("mcmc.nsteps") != std::string::npos);
  CHECK(with(R"({"functionals": {"regions": [{"bounds": [[0, 20]]}]}})").find("functionals.regions[0].bounds") !=
        std::string::npos);
  CHECK(with(R"({"functionals": {"strata": 3}, "region": [[0, 1], [0, 1]]})").find("functionals.strata") !=
        std::string::npos);
  CHECK(with(R"({"simulation": {"lambda_star": 2, "truth": []}})").find("simulation.truth") != std::string::npos);
}

TEST_CASE("missing and malformed config files") {
  CHECK_THROWS_AS(load_config("/nonexistent/dir/config.json"), IoError);
}

TEST_CASE("empirical lambda prior doubles the peak intensity") {
  auto d = base();
  d["lambda"] = {{"prior", "empirical"}, {"fraction", 0.5}};
  const auto c = parse_config(d);
  PointPattern data;
  data.dim = 1;
  for (double x : {1.0, 1.5, 2.0, 9.0}) {
    Point p(1);
    p << x;
    data.events.push_back(Event{0, p, Eigen::VectorXd()});
  }
  // Two nearest events of 1.0 or 2.0 lie within 0.5: two events in a cube of
  // side 1, so the peak is 2 and the prior mean 4.
  const auto prior = c.lambda_prior(data);
  CHECK(prior.kind == LambdaPrior::Kind::Exponential);
  CHECK(prior.prior_mean() == doctest::Approx(4.0));
  CHECK_THROWS_AS(c.lambda_prior(PointPattern{}), InputError);
}

TEST_CASE("chain settings follow the mcmc block") {
  auto d = base();
  d["mcmc"] = {{"n_iter", 20}, {"burn_in", 5}, {"thin", 3}, {"sn_sweeps", 2}};
  d["grid"] = {{"resolution", 4}};
  const auto c = parse_config(d);
  const auto cc = c.chain(9);
  CHECK(cc.n_iter == 20);
  CHECK(cc.burn_in == 5);
  CHECK(cc.thin == 3);
  CHECK(cc.seed == 9);
  CHECK(cc.settings.sn_sweeps == 2);
  CHECK(cc.grid.size() == 4);
}
