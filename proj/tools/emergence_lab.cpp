// Command-line front end: check-coords | md | ensemble | quantum.
// Exit codes: 0 success, 2 configuration/validation error, 3 numerical
// blow-up, 4 runtime guard tripped.

#include <cstdlib>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "emergence/lab.hpp"

namespace {

int default_workers() {
  if (const char* env = std::getenv("EMERGENCE_LAB_WORKERS")) {
    try {
      const int w = std::stoi(env);
      if (w >= 1) return w;
    } catch (...) {
    }
    std::cerr << "warning: ignoring invalid EMERGENCE_LAB_WORKERS='" << env << "'\n";
  }
  return 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Numerical laboratory for classical dynamics emerging from a chain of atoms"};
  app.require_subcommand(1);

  std::string config_path, out_dir;
  std::uint64_t seed = 0;
  int workers = default_workers();

  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--config", config_path, "JSON experiment configuration")
        ->required();
    sub->add_option("--out", out_dir, "output directory (default: config output_dir)");
    sub->add_option("--seed", seed, "override the config seed (0 keeps it)");
  };

  CLI::App* coords = app.add_subcommand("check-coords", "coordinate identity checks");
  add_common(coords);
  CLI::App* md = app.add_subcommand("md", "single molecular-dynamics trajectory");
  add_common(md);
  CLI::App* ens = app.add_subcommand("ensemble", "trajectory ensemble / scaling study");
  add_common(ens);
  ens->add_option("--workers", workers,
                  "worker threads (default: EMERGENCE_LAB_WORKERS or 1)");
  CLI::App* qm = app.add_subcommand("quantum", "two-atom factorization experiment");
  add_common(qm);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == static_cast<int>(CLI::ExitCodes::Success))
      return app.exit(e);
    app.exit(e);
    return 2;
  }

  try {
    const emergence::ExperimentConfig cfg = emergence::load_config(config_path);
    emergence::CliOptions opt;
    opt.out_dir = out_dir;
    opt.seed = seed;
    opt.workers = workers;

    emergence::RunSummary summary;
    if (coords->parsed())
      summary = emergence::check_coords_cmd(cfg, opt);
    else if (md->parsed())
      summary = emergence::run_md_cmd(cfg, opt);
    else if (ens->parsed())
      summary = emergence::run_ensemble_cmd(cfg, opt);
    else
      summary = emergence::run_quantum_cmd(cfg, opt);

    std::cout << summary.to_text();
    if (!summary.all_passed()) {
      for (const auto& check : summary.checks)
        if (!check.pass) std::cerr << "check failed: " << check.name << "\n";
      return 4;
    }
    return 0;
  } catch (const emergence::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const emergence::GuardError& e) {
    std::cerr << "guard tripped: " << e.what() << "\n";
    return 4;
  } catch (const emergence::NumericalError& e) {
    std::cerr << "numerical error: " << e.what() << "\n";
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  }
}
