// Command-line driver: one subcommand per named experiment.
//
//   vpl <experiment> [--config PATH] [--out DIR] [--set KEY=VALUE]... [--threads N] [--check]
//
// Exit codes: 0 all checks pass, 1 invariant failure (or --check mismatch),
// 2 configuration error, 3 numerical failure.

#include <CLI11.hpp>
#include <chrono>
#include <iostream>

#include "vpl/outputs.hpp"

namespace {

struct Options {
  std::string config_path;
  std::string out_dir;
  std::vector<std::string> sets;
  int threads = 0;
  bool check = false;
};

int run(const std::string& experiment, const Options& opt) {
  using namespace vpl;
  ExperimentConfig cfg;
  try {
    std::string text;
    if (!opt.config_path.empty()) text = read_file(opt.config_path);
    cfg = validate_config(text, experiment, opt.sets);
    if (!opt.out_dir.empty()) cfg.out_dir = opt.out_dir;
    if (opt.threads > 0) cfg.threads = opt.threads;
    check_config(cfg);
  } catch (const std::exception& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return exit_code(RunStatus::config_error);
  }

  const auto start = std::chrono::steady_clock::now();
  ExperimentResult res;
  RunStatus status = RunStatus::pass;
  std::string error;
  try {
    run_experiment(cfg, res);
    status = res.all_pass() ? RunStatus::pass : RunStatus::invariant_failure;
  } catch (const ConfigError& e) {
    status = RunStatus::config_error;
    error = e.what();
  } catch (const std::exception& e) {
    status = RunStatus::numerical_failure;
    error = e.what();
  }
  const double wall = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  if (!error.empty()) std::cerr << "stage '" << res.stage << "' failed: " << error << '\n';

  for (const auto& c : res.checks) std::cout << (c.pass ? "PASS " : "FAIL ") << c.name << ": " << c.detail << '\n';

  if (opt.check) {
    if (!error.empty()) return exit_code(status);
    std::vector<std::string> issues;
    try {
      issues = compare_outputs(res, cfg.out_dir);
    } catch (const std::exception& e) {
      issues.push_back(e.what());
    }
    for (const auto& s : issues) std::cout << "MISMATCH " << s << '\n';
    std::cout << (issues.empty() ? "stored outputs match" : "stored outputs differ") << " (" << cfg.out_dir << ")\n";
    if (!issues.empty()) return exit_code(RunStatus::invariant_failure);
    return exit_code(status);
  }

  try {
    write_outputs(cfg, res, cfg.out_dir, wall, status, error);
  } catch (const std::exception& e) {
    std::cerr << "cannot write outputs: " << e.what() << '\n';
    return exit_code(RunStatus::config_error);
  }
  std::cout << "wrote " << cfg.out_dir << "/manifest.json (" << to_string(status) << ", " << wall << " s)\n";
  return exit_code(status);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Linearized Vlasov-Poisson-Landau experiments at fixed spatial modes"};
  app.require_subcommand(1);
  Options opt;
  std::string chosen;
  for (const auto& name : vpl::experiment_names()) {
    auto* sub = app.add_subcommand(name, "run the " + name + " experiment");
    sub->add_option("--config", opt.config_path, "INI configuration file")->check(CLI::ExistingFile);
    sub->add_option("--out", opt.out_dir, "output directory (overrides run.out)");
    sub->add_option("--set", opt.sets, "override one setting, KEY=VALUE with KEY = section.key (repeatable)");
    sub->add_option("--threads", opt.threads, "worker threads for sweep points")->check(CLI::PositiveNumber);
    sub->add_flag("--check", opt.check, "re-run and compare against the stored outputs instead of writing");
    sub->callback([&chosen, name] { chosen = name; });
  }
  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : vpl::exit_code(vpl::RunStatus::config_error);
  }
  return run(chosen, opt);
}
