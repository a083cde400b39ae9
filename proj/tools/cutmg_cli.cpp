// Command-line driver for the cut finite element multigrid experiments.
//
//   cutmg_cli <convergence|mg-table|diagnostics|solve> [--config file] [--key value ...]
//
// Exit status: 0 success, 2 solver divergence, 1 configuration or input error.

#include <iostream>
#include <map>

#include <CLI11.hpp>

#include "cutmg/cutmg.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitError = 1;
constexpr int kExitDiverged = 2;

struct Overrides {
  std::string config_path;
  std::map<std::string, std::string> values;
  std::map<std::string, CLI::Option*> options;
};

void add_config_options(CLI::App* cmd, Overrides& o) {
  cmd->add_option("--config", o.config_path, "config file (key = value lines, [section] headers)");
  for (const auto& key : cutmg::config_keys())
    o.options[key] = cmd->add_option("--" + key, o.values[key], "overrides config key '" + key + "'");
}

cutmg::ExperimentConfig resolve(const Overrides& o, cutmg::ExperimentConfig base) {
  if (!o.config_path.empty()) base = cutmg::load_config(o.config_path, base);
  for (const auto& key : cutmg::config_keys())
    if (o.options.at(key)->count() > 0) {
      try {
        cutmg::set_config_value(base, key, o.values.at(key));
      } catch (const cutmg::ConfigError& e) {
        throw cutmg::ConfigError(std::string("--") + e.what());
      }
    }
  base.validate();
  return base;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Multigrid for unfitted finite element interface problems"};
  app.require_subcommand(1);

  Overrides conv, table, diag, solve;
  auto* c_conv = app.add_subcommand("convergence", "L2 errors and orders on levels 0..levels (direct solves)");
  auto* c_table = app.add_subcommand("mg-table", "multigrid iteration counts per level and swept parameter");
  auto* c_diag = app.add_subcommand("diagnostics", "condition numbers and interface Cholesky fill-in");
  auto* c_solve = app.add_subcommand("solve", "one multigrid solve on the finest level");
  add_config_options(c_conv, conv);
  add_config_options(c_table, table);
  add_config_options(c_diag, diag);
  add_config_options(c_solve, solve);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitError;
  }

  try {
    bool diverged = false;
    if (c_conv->parsed()) {
      const auto cfg = resolve(conv, {});
      const auto r = cutmg::run_convergence(cfg);
      cutmg::emit_outputs({r.table()}, cfg, std::cout);
      diverged = r.any_failure();
    } else if (c_table->parsed()) {
      const auto cfg = resolve(table, {});
      const auto r = cutmg::run_mg_table(cfg);
      cutmg::emit_outputs({r.table()}, cfg, std::cout);
      diverged = r.any_divergence();
    } else if (c_diag->parsed()) {
      const auto cfg = resolve(diag, {});
      const auto r = cutmg::run_diagnostics(cfg);
      cutmg::emit_outputs({r.table()}, cfg, std::cout);
      std::cout << '\n';
      cutmg::print_table(r.timing_table(), std::cout);
    } else if (c_solve->parsed()) {
      const auto cfg = resolve(solve, {});
      const auto r = cutmg::run_solve(cfg);
      cutmg::emit_outputs({r.summary(), r.table()}, cfg, std::cout);
      diverged = r.mg.diverged;
    }
    if (diverged) {
      std::cerr << "solver diverged\n";
      return kExitDiverged;
    }
    return kExitOk;
  } catch (const cutmg::ConfigError& e) {
    std::cerr << "configuration error: " << e.what() << '\n';
  } catch (const cutmg::AssumptionError& e) {
    std::cerr << "hierarchy assumption violated: " << e.what() << '\n';
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
  }
  return kExitError;
}
