#include <iostream>
#include <string>

#include "CLI11.hpp"

#include "dephase/app.hpp"
#include "dephase/config.hpp"

using namespace dephase;

namespace {

// Returns kExitConfig (after printing) when the config cannot be loaded.
bool load(const std::string& path, const std::string& builtin, RunConfig& out) {
  try {
    if (!path.empty()) {
      out = load_config(path);
    } else if (builtin == "laplace") {
      out = parse_config(default_laplace_config());
    } else {
      out = parse_config(default_lorentzian_config());
    }
    return true;
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return false;
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Kinetic Kuramoto dephasing from prescribed asymptotic data"};
  app.require_subcommand(1);

  std::string config_path;
  std::string builtin = "lorentzian";
  auto add_config = [&](CLI::App* sub) {
    sub->add_option("-c,--config", config_path, "JSON run configuration")->check(CLI::ExistingFile);
    sub->add_option("--builtin", builtin, "built-in configuration when no file is given")
        ->check(CLI::IsMember({"lorentzian", "laplace"}));
  };

  auto* solve = app.add_subcommand("solve", "kinetic solve, reconstruction and decay certification");
  add_config(solve);

  auto* sim = app.add_subcommand("simulate", "finite-N particle run started from the kinetic solution");
  add_config(sim);
  SimulateOptions sim_opts;
  std::string kinetic_csv;
  sim->add_option("--kinetic", kinetic_csv, "order_parameter.csv to compare against")->check(CLI::ExistingFile);
  sim->add_option("--record-every", sim_opts.record_every, "record z_N every k steps")->check(CLI::PositiveNumber);

  auto* verify = app.add_subcommand("verify", "acceptance suite on the built-in configurations");
  VerifyOptions verify_opts;
  verify->add_option("-c,--config", verify_opts.configs, "configs to preflight (grid and quadrature)");
  verify->add_option("--criteria", verify_opts.criteria, "run only these criteria (1-10)")
      ->check(CLI::Range(1, 10))
      ->delimiter(',');

  auto* fit = app.add_subcommand("fit", "decay fit and envelope certificate of one CSV column");
  FitOptions fit_opts;
  std::string kind = "exponential";
  std::vector<double> window{2.0, 15.0};
  fit->add_option("csv", fit_opts.csv, "CSV file with a t column")->required()->check(CLI::ExistingFile);
  fit->add_option("--column", fit_opts.column, "column to fit");
  fit->add_option("--kind", kind, "decay model")->check(CLI::IsMember({"exponential", "polynomial"}));
  fit->add_option("--window", window, "fit window t_a t_b")->expected(2);
  fit->add_option("--floor", fit_opts.floor, "ignore values at or below this");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*solve) {
      RunConfig cfg;
      if (!load(config_path, builtin, cfg)) return kExitConfig;
      return run_solve(cfg, std::cout);
    }
    if (*sim) {
      RunConfig cfg;
      if (!load(config_path, builtin, cfg)) return kExitConfig;
      if (!kinetic_csv.empty()) sim_opts.kinetic_csv = kinetic_csv;
      return run_simulate(cfg, sim_opts, std::cout);
    }
    if (*verify) return run_verify(verify_opts, std::cout);
    if (*fit) {
      fit_opts.kind = decay_model_kind_from_string(kind);
      if (!(window[1] > window[0])) {
        std::cerr << "fit: window must satisfy t_a < t_b\n";
        return kExitConfig;
      }
      fit_opts.window = {window[0], window[1]};
      return run_fit(fit_opts, std::cout);
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitCheckFailed;
  }
  return kExitOk;
}
