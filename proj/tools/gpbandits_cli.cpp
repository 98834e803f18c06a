// Command-line experiment runner. Exit codes: 0 success, 1 configuration or
// input error, 2 runtime numerical failure.

#include "gpbandits/config.hpp"
#include "gpbandits/runner.hpp"
#include "gpbandits/version.hpp"

#include <CLI11.hpp>

#include <cstdint>
#include <iostream>
#include <optional>
#include <string>

namespace {

struct CommonOptions {
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::optional<int> replications;
  std::optional<std::string> out_dir;
  bool validate_only = false;
};

void add_common(CLI::App* cmd, CommonOptions& opts) {
  cmd->add_option("--config", opts.config_path, "experiment config file (key=value lines)")
      ->required();
  cmd->add_option("--seed", [&opts](const CLI::results_t& res) {
        opts.seed = std::stoull(res.front());
        return true;
      },
      "override the master seed");
  cmd->add_option("--reps", [&opts](const CLI::results_t& res) {
        opts.replications = std::stoi(res.front());
        return true;
      },
      "override the replication count");
  cmd->add_option("--out", [&opts](const CLI::results_t& res) {
        opts.out_dir = res.front();
        return true;
      },
      "override the output directory");
  cmd->add_flag("--validate", opts.validate_only, "parse and validate the config, then exit");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Gaussian-process bandit experiments in periodic environments"};
  app.set_version_flag("--version", std::string(gpb::kVersion));
  app.require_subcommand(1);

  CommonOptions opts;
  struct ModeCommand {
    const char* name;
    const char* description;
    std::optional<gpb::RunMode> mode;
  };
  const ModeCommand commands[] = {
      {"run", "run the mode named in the config file", std::nullopt},
      {"synthetic", "GP-sampled periodic environment, all policies", gpb::RunMode::synthetic},
      {"replay", "recorded-reward environment from a CSV file", gpb::RunMode::replay},
      {"sweep-tau", "periodic policy under a list of period values", gpb::RunMode::sweep_tau},
      {"info-gain", "information-gain identities, bounds and rank checks", gpb::RunMode::info_gain},
  };
  for (const auto& c : commands) {
    add_common(app.add_subcommand(c.name, c.description), opts);
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 1;
  }

  try {
    gpb::CliOverrides overrides;
    for (const auto& c : commands) {
      if (c.mode && app.got_subcommand(c.name)) {
        overrides.mode = c.mode;
      }
    }
    overrides.seed = opts.seed;
    overrides.replications = opts.replications;
    overrides.out_dir = opts.out_dir;

    const auto raw = gpb::read_config_file(opts.config_path);
    const auto cfg = gpb::resolve_config(raw, overrides);

    if (opts.validate_only) {
      for (const auto& [k, v] : cfg.resolved) {
        std::cout << k << "=" << v << "\n";
      }
      std::cout << "config OK\n";
      return 0;
    }
    gpb::run(cfg, std::cout);
    return 0;
  } catch (const gpb::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 1;
  } catch (const std::invalid_argument& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 1;
  } catch (const gpb::DegeneracyError& e) {
    std::cerr << "numerical error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "runtime error: " << e.what() << "\n";
    return 2;
  }
}
