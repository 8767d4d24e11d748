#include <sys/wait.h>
#include <unistd.h>

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "doctest.h"
#include "json.hpp"

#include "oracles.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

// Fresh scratch directory per test case.
struct Scratch {
  fs::path dir;
  explicit Scratch(const std::string& name) {
    dir = fs::temp_directory_path() / ("coxkit_cli_" + name + "_" + std::to_string(::getpid()));
    fs::remove_all(dir);
    fs::create_directories(dir);
  }
  ~Scratch() {
    std::error_code ec;
    fs::remove_all(dir, ec);
  }
  std::string path(const std::string& leaf) const { return (dir / leaf).string(); }
  std::string write(const std::string& leaf, const std::string& text) const {
    std::ofstream(path(leaf)) << text;
    return path(leaf);
  }
  std::string write_json(const std::string& leaf, const json& j) const { return write(leaf, j.dump()); }
};

std::string slurp(const std::string& path) {
  std::ifstream in(path);
  std::stringstream s;
  s << in.rdbuf();
  return s.str();
}

std::vector<std::string> lines(const std::string& path) {
  std::vector<std::string> out;
  std::ifstream in(path);
  for (std::string l; std::getline(in, l);) out.push_back(l);
  return out;
}

// Exit status of `coxkit <args>`; stderr goes to `log`.
int run(const std::string& args, const std::string& log) {
  const std::string cmd = std::string(COXKIT_BIN) + " " + args + " > /dev/null 2> " + log;
  const int rc = std::system(cmd.c_str());
  return WIFEXITED(rc) ? WEXITSTATUS(rc) : -1;
}

json fit_config() {
  return json::parse(R"({
    "region": [[0, 10]],
    "processes": [{"gp": {"mu": {"uniform": [-2, 2]}, "sigma2": {"uniform": [0.5, 4]}, "tau2": 2, "gamma": 1.5}}],
    "lambda": {"prior": "gamma", "shape": 2, "rate": 1},
    "mcmc": {"n_iter": 10, "seed": 4},
    "grid": {"resolution": 5}
  })");
}

const char* kToyData = "t,x1\n0,1.0\n0,2.5\n0,2.75\n0,6.0\n0,9.5\n";

json one_d_truth(double lambda_star) {
  auto c = json::parse(R"({
    "region": [[0, 50]],
    "simulation": {"truth": [{"field": {"terms": [{"a": 2, "center": 0, "power": 1, "scale": 15},
                                                 {"a": 1, "center": 25, "power": 2, "scale": 100}]},
                              "transform": "probit_of_intensity"}]}
  })");
  c["simulation"]["lambda_star"] = lambda_star;
  return c;
}

}  // namespace

TEST_CASE("zero envelope gives a header-only pattern") {
  Scratch s("zero");
  auto c = json::parse(R"({"region": [[0, 5], [0, 5]], "simulation": {"lambda_star": 0, "truth": [{"gp": {}}]}})");
  const auto cfg = s.write_json("c.json", c);
  REQUIRE(run("simulate --config " + cfg + " --out " + s.path("o"), s.path("log")) == 0);
  CHECK(slurp(s.path("o/pattern.csv")) == "t,x1,x2\n");
}

TEST_CASE("simulation is deterministic given the seed") {
  Scratch s("det");
  auto c = json::parse(R"({"region": [[0, 5], [0, 5]],
    "simulation": {"lambda_star": 4, "truth": [{"gp": {"mu": 0.5, "sigma2": 1, "tau2": 2}}],
                   "grid": {"resolution": 4}}})");
  const auto cfg = s.write_json("c.json", c);
  REQUIRE(run("simulate --config " + cfg + " --out " + s.path("a") + " --seed 7", s.path("log")) == 0);
  REQUIRE(run("simulate --config " + cfg + " --out " + s.path("b") + " --seed 7", s.path("log")) == 0);
  REQUIRE(run("simulate --config " + cfg + " --out " + s.path("c") + " --seed 8", s.path("log")) == 0);
  for (const auto* f : {"pattern.csv", "truth.json", "truth_grid.csv"}) {
    CHECK(slurp(s.path(std::string("a/") + f)) == slurp(s.path(std::string("b/") + f)));
  }
  CHECK(slurp(s.path("a/pattern.csv")) != slurp(s.path("c/pattern.csv")));
  CHECK(lines(s.path("a/truth_grid.csv")).size() == 17);
}

TEST_CASE("one-dimensional truth: mean retained count is the integral of the intensity") {
  Scratch s("integral");
  const auto cfg = s.write_json("c.json", one_d_truth(3.0));
  std::vector<double> counts;
  for (int seed = 1; seed <= 100; ++seed) {
    const auto out = s.path("o" + std::to_string(seed));
    REQUIRE(run("simulate --config " + cfg + " --out " + out + " --seed " + std::to_string(seed), s.path("log")) == 0);
    counts.push_back(static_cast<double>(lines(out + "/pattern.csv").size() - 1));
  }
  // 30 (1 - e^{-10/3}) + 10 sqrt(pi) erf(2.5)
  const double truth = 30.0 * (1.0 - std::exp(-10.0 / 3.0)) + 10.0 * std::sqrt(M_PI) * std::erf(2.5);
  CHECK(truth == doctest::Approx(46.6471).epsilon(1e-5));
  CHECK(std::abs(oracle::mean(counts) - truth) < 3.0 * oracle::se(counts));
}

TEST_CASE("an envelope below the intensity is an input error") {
  Scratch s("envelope");
  const auto cfg = s.write_json("c.json", one_d_truth(1.5));
  CHECK(run("simulate --config " + cfg + " --out " + s.path("o"), s.path("log")) == 1);
  CHECK(slurp(s.path("log")).find("simulation.truth[0]") != std::string::npos);
}

TEST_CASE("fit smoke run writes every output") {
  Scratch s("smoke");
  const auto cfg = s.write_json("c.json", fit_config());
  const auto data = s.write("d.csv", kToyData);
  REQUIRE(run("fit --config " + cfg + " --data " + data + " --out " + s.path("o"), s.path("log")) == 0);
  const auto trace = lines(s.path("o/trace.csv"));
  REQUIRE(trace.size() == 11);
  CHECK(trace[0] == "iter,lambda_star,sigma2_0,mu_0,K");
  const auto grid = lines(s.path("o/grid.csv"));
  REQUIRE(grid.size() == 6);
  CHECK(grid[0] == "t,x1,mean,sd,n");
  const auto summary = json::parse(slurp(s.path("o/summary.json")));
  for (const auto* key : {"posterior", "ess", "acceptance", "runtime_s", "config_echo"}) {
    CHECK_MESSAGE(summary.contains(key), key);
  }
  CHECK(summary["posterior"].contains("lambda_star"));
  CHECK(summary["config_echo"]["mcmc"]["n_iter"] == 10);
}

TEST_CASE("fixed hyperparameters leave no theta columns") {
  Scratch s("fixed");
  auto c = fit_config();
  c["processes"][0]["gp"] = {{"mu", 0}, {"sigma2", 1}, {"tau2", 2}};
  const auto cfg = s.write_json("c.json", c);
  const auto data = s.write("d.csv", kToyData);
  REQUIRE(run("fit --config " + cfg + " --data " + data + " --out " + s.path("o"), s.path("log")) == 0);
  CHECK(lines(s.path("o/trace.csv"))[0] == "iter,lambda_star,K");
}

TEST_CASE("fit reruns are byte-identical apart from the wall time") {
  Scratch s("rerun");
  auto c = fit_config();
  c["mcmc"]["n_iter"] = 40;
  c["mcmc"]["snapshots"] = true;
  const auto cfg = s.write_json("c.json", c);
  const auto data = s.write("d.csv", kToyData);
  REQUIRE(run("fit --config " + cfg + " --data " + data + " --out " + s.path("a"), s.path("log")) == 0);
  REQUIRE(run("fit --config " + cfg + " --data " + data + " --out " + s.path("b"), s.path("log")) == 0);
  for (const auto* f : {"trace.csv", "grid.csv", "snapshots.jsonl"}) {
    CHECK(slurp(s.path(std::string("a/") + f)) == slurp(s.path(std::string("b/") + f)));
  }
  auto sa = json::parse(slurp(s.path("a/summary.json")));
  auto sb = json::parse(slurp(s.path("b/summary.json")));
  sa.erase("runtime_s");
  sb.erase("runtime_s");
  CHECK(sa.dump() == sb.dump());
}

TEST_CASE("concurrent chains match single-seed runs") {
  Scratch s("chains");
  auto c = fit_config();
  c["mcmc"].erase("seed");
  c["mcmc"]["seeds"] = {3, 5};
  const auto multi = s.write_json("multi.json", c);
  c["mcmc"].erase("seeds");
  c["mcmc"]["seed"] = 5;
  const auto single = s.write_json("single.json", c);
  const auto data = s.write("d.csv", kToyData);
  REQUIRE(run("fit --config " + multi + " --data " + data + " --out " + s.path("m"), s.path("log")) == 0);
  REQUIRE(run("fit --config " + single + " --data " + data + " --out " + s.path("s"), s.path("log")) == 0);
  CHECK(fs::exists(s.path("m/chain_3/trace.csv")));
  CHECK(slurp(s.path("m/chain_5/trace.csv")) == slurp(s.path("s/trace.csv")));
}

TEST_CASE("exit codes by error class") {
  Scratch s("exit");
  const auto cfg = s.write_json("c.json", fit_config());
  const auto data = s.write("d.csv", kToyData);

  SUBCASE("events outside the region list the offending rows") {
    const auto bad = s.write("bad.csv", "t,x1\n0,1.0\n0,12.0\n");
    CHECK(run("fit --config " + cfg + " --data " + bad + " --out " + s.path("o"), s.path("log")) == 1);
    CHECK(slurp(s.path("log")).find("rows 3") != std::string::npos);
  }
  SUBCASE("config errors name the field") {
    auto c = fit_config();
    c["mcmc"]["thin"] = 0;
    const auto badcfg = s.write_json("bad.json", c);
    CHECK(run("fit --config " + badcfg + " --data " + data + " --out " + s.path("o"), s.path("log")) == 1);
    CHECK(slurp(s.path("log")).find("mcmc.thin") != std::string::npos);
  }
  SUBCASE("malformed JSON and missing arguments") {
    const auto junk = s.write("junk.json", "{ region: ");
    CHECK(run("fit --config " + junk + " --data " + data + " --out " + s.path("o"), s.path("log")) == 1);
    CHECK(run("fit --config " + cfg + " --out " + s.path("o"), s.path("log")) == 1);
  }
  SUBCASE("unreadable inputs and unwritable outputs") {
    CHECK(run("fit --config " + s.path("none.json") + " --data " + data + " --out " + s.path("o"), s.path("log")) == 2);
    CHECK(run("fit --config " + cfg + " --data " + s.path("none.csv") + " --out " + s.path("o"), s.path("log")) == 2);
    CHECK(run("fit --config " + cfg + " --data " + data + " --out " + data + "/sub", s.path("log")) == 2);
  }
  SUBCASE("an exhausted candidate cap is a numerical failure") {
    auto c = fit_config();
    c["lambda"] = {{"prior", "fixed"}, {"value", 1000}};
    c["mcmc"]["rejection_cap"] = 10;
    const auto capped = s.write_json("cap.json", c);
    CHECK(run("fit --config " + capped + " --data " + data + " --out " + s.path("o"), s.path("log")) == 3);
  }
}

TEST_CASE("prediction outputs") {
  Scratch s("predict");
  auto c = json::parse(R"({
    "model": "spatiotemporal", "region": [[0, 4], [0, 4]], "n_times": 2,
    "processes": [{"gp": {"mu": 0, "sigma2": 1, "tau2": 2}, "disturbance": {"sigma2": 0.5, "tau2": 2}}],
    "lambda": {"prior": "gamma", "shape": 2, "rate": 1},
    "mcmc": {"n_iter": 30, "burn_in": 10, "thin": 2, "seed": 2, "snapshots": true},
    "prediction": {"horizon": 1, "resolution": 3, "regions": [[[0, 2], [0, 2]]]}
  })");
  const auto data = s.write("d.csv", "t,x1,x2\n0,1,1\n0,3,2\n1,2,2\n1,0.5,3.5\n");

  SUBCASE("horizon zero writes empty tables") {
    auto h0 = c;
    h0["prediction"]["horizon"] = 0;
    const auto cfg = s.write_json("h0.json", h0);
    REQUIRE(run("predict --config " + cfg + " --data " + s.path("nofit") + " --out " + s.path("p"), s.path("log")) == 0);
    CHECK(lines(s.path("p/predictive_counts.csv")).size() == 1);
    CHECK(lines(s.path("p/predictive_grid.csv")).size() == 1);
  }
  SUBCASE("missing snapshots point at the remedy") {
    auto nosnap = c;
    nosnap["mcmc"]["snapshots"] = false;
    const auto cfg = s.write_json("ns.json", nosnap);
    REQUIRE(run("fit --config " + cfg + " --data " + data + " --out " + s.path("f"), s.path("log")) == 0);
    CHECK(run("predict --config " + cfg + " --data " + s.path("f") + " --out " + s.path("p"), s.path("log")) == 1);
    CHECK(slurp(s.path("log")).find("snapshots") != std::string::npos);
  }
  SUBCASE("same seed and artifacts give identical forecasts") {
    const auto cfg = s.write_json("c.json", c);
    REQUIRE(run("fit --config " + cfg + " --data " + data + " --out " + s.path("f"), s.path("log")) == 0);
    REQUIRE(run("predict --config " + cfg + " --data " + s.path("f") + " --out " + s.path("p"), s.path("log")) == 0);
    REQUIRE(run("predict --config " + cfg + " --data " + s.path("f") + " --out " + s.path("q"), s.path("log")) == 0);
    for (const auto* f : {"predictive_counts.csv", "predictive_grid.csv", "predictive_integrals.csv",
                          "predictive_summary.json"}) {
      CHECK(slurp(s.path(std::string("p/") + f)) == slurp(s.path(std::string("q/") + f)));
    }
    // 10 retained draws of one future time.
    CHECK(lines(s.path("p/predictive_counts.csv")).size() == 11);
    CHECK(lines(s.path("p/predictive_grid.csv")).size() == 10);
    CHECK(lines(s.path("p/predictive_integrals.csv")).size() == 2);
  }
}
