// Command-line runner for the device, synapse and network experiments.
//
//   fefet <experiment> [--config PATH] [--seed N] [--out DIR] [--jobs N]
//   fefet print-config [--config PATH]
//
// Exit codes: 0 success, 2 bad command line or config, 3 runtime failure.

#include <filesystem>
#include <iostream>
#include <optional>
#include <string>

#if __has_include("CLI11.hpp")
#include "CLI11.hpp"
#else
#include <CLI/CLI.hpp>
#endif

#include "fefet/experiment.hpp"

namespace {

constexpr int kExitConfig = 2;
constexpr int kExitRuntime = 3;

struct Overrides {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> out;
  std::optional<int> jobs;
  bool quiet = false;
};

fefet::ExperimentConfig resolve(const Overrides& o, std::optional<fefet::ExperimentKind> kind) {
  fefet::ExperimentConfig cfg = o.config.empty() ? fefet::config_from_json(fefet::json::object()) : fefet::load_config(o.config);
  if (kind) cfg.experiment = *kind;
  if (o.seed) cfg.seed = *o.seed;
  if (o.out) cfg.out_dir = *o.out;
  if (o.jobs) cfg.jobs = *o.jobs;
  cfg.validate();
  return cfg;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Stochastic FeFET synapse experiments"};
  app.require_subcommand(1);
  Overrides o;

  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--config", o.config, "experiment config (JSON)")->check(CLI::ExistingFile);
    sub->add_option("--seed", o.seed, "overrides the config seed");
    sub->add_option("--out", o.out, "output directory");
    sub->add_option("--jobs", o.jobs, "worker threads")->check(CLI::PositiveNumber);
    sub->add_flag("-q,--quiet", o.quiet, "no progress output");
  };

  struct Sub {
    const char* name;
    const char* help;
    fefet::ExperimentKind kind;
  };
  const Sub subs[] = {
      {"calibrate", "fit device parameters to target switching curves", fefet::ExperimentKind::Calibrate},
      {"curves", "accumulative switching curves over the voltage grid", fefet::ExperimentKind::Curves},
      {"domain-sweep", "distinct conductance plateaus versus domain count", fefet::ExperimentKind::DomainSweep},
      {"train-eval", "train and evaluate the spiking network", fefet::ExperimentKind::TrainEval},
      {"binary-fraction-sweep", "accuracy versus fraction of binary synapses",
       fefet::ExperimentKind::BinaryFractionSweep},
  };
  std::optional<fefet::ExperimentKind> chosen;
  for (const auto& s : subs) {
    auto* sub = app.add_subcommand(s.name, s.help);
    add_common(sub);
    sub->callback([&chosen, kind = s.kind] { chosen = kind; });
  }
  auto* print = app.add_subcommand("print-config", "print the effective config with every default filled in");
  add_common(print);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitConfig;
  }

  try {
    const auto cfg = resolve(o, chosen);
    if (print->parsed()) {
      std::cout << fefet::json(cfg).dump(2) << "\n";
      return 0;
    }
    const auto report = fefet::run_experiment(cfg, o.quiet ? nullptr : &std::cerr);
    if (!o.quiet) std::cerr << "outputs in " << cfg.out_dir << "\n";
    (void)report;
    return 0;
  } catch (const fefet::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitRuntime;
  }
}
