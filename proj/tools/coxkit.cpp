#include <cstdint>
#include <exception>
#include <iostream>
#include <optional>
#include <string>

#include "CLI11.hpp"
#include "json.hpp"

#include "coxkit/commands.hpp"
#include "coxkit/config.hpp"
#include "coxkit/errors.hpp"

namespace {

enum Exit { kOk = 0, kInput = 1, kIo = 2, kNumerical = 3 };

struct Args {
  std::string config;
  std::string data;
  std::string out;
  std::optional<std::uint64_t> seed;
};

void add_common(CLI::App* cmd, Args& a, bool needs_data, const std::string& data_help) {
  cmd->add_option("--config", a.config, "JSON run configuration")->required();
  auto* d = cmd->add_option("--data", a.data, data_help);
  if (needs_data) d->required();
  cmd->add_option("--out", a.out, "output directory")->required();
  cmd->add_option("--seed", a.seed, "overrides the configured seed(s)");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"coxkit: sigmoidal Gaussian Cox process simulation, inference and prediction"};
  app.require_subcommand(1);
  Args args;
  auto* sim = app.add_subcommand("simulate", "simulate a point pattern from the configured truth");
  add_common(sim, args, false, "unused");
  auto* fit = app.add_subcommand("fit", "run the MCMC sampler on a point pattern");
  add_common(fit, args, true, "pattern CSV");
  auto* pred = app.add_subcommand("predict", "forecast future time slices from fit snapshots");
  add_common(pred, args, true, "directory written by fit");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kInput;
  }

  try {
    const auto config = coxkit::load_config(args.config);
    if (sim->parsed()) {
      coxkit::cmd_simulate(config, args.out, args.seed);
    } else if (fit->parsed()) {
      coxkit::cmd_fit(config, args.data, args.out, args.seed);
    } else {
      coxkit::cmd_predict(config, args.data, args.out, args.seed);
    }
  } catch (const coxkit::InputError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kInput;
  } catch (const coxkit::IoError& e) {
    std::cerr << "I/O error: " << e.what() << "\n";
    return kIo;
  } catch (const coxkit::NumericalError& e) {
    std::cerr << "numerical error: " << e.what() << "\n";
    return kNumerical;
  } catch (const nlohmann::json::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kInput;
  } catch (const std::exception& e) {
    std::cerr << "numerical error: " << e.what() << "\n";
    return kNumerical;
  }
  return kOk;
}
