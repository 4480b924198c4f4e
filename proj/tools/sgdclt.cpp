#include <algorithm>
#include <cstdlib>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "sgdclt/errors.hpp"
#include "sgdclt/experiment.hpp"

namespace {

// Default worker count when --threads is absent; 0 means all cores.
int default_threads() {
  const char* env = std::getenv("SGDCLT_THREADS");
  if (!env || !*env) return 0;
  try {
    return std::max(0, std::stoi(env));
  } catch (const std::exception&) {
    std::cerr << "warning: ignoring SGDCLT_THREADS=" << env << "\n";
    return 0;
  }
}

void print_error(const sgdclt::Error& e) {
  sgdclt::Json j{{"error", std::string(sgdclt::to_string(e.code()))}, {"message", e.what()}};
  std::cerr << sgdclt::dump_json(j);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Ensemble experiments for the stochastic-gradient CLT"};
  app.require_subcommand(1);

  std::string config;
  bool check = false;
  int threads = default_threads();
  std::string out_dir;

  auto* run = app.add_subcommand("run", "Run an experiment and write its artifacts");
  run->add_option("config", config, "Experiment config (JSON)")->required();
  run->add_flag("--check", check, "Exit 4 when the config's acceptance thresholds fail");
  run->add_option("--threads", threads, "Worker threads (0 = all cores; default from SGDCLT_THREADS)")
      ->check(CLI::NonNegativeNumber);
  run->add_option("--out", out_dir, "Output directory (overrides output_dir)");

  auto* certify = app.add_subcommand("certify", "Print the schedule certificate");
  certify->add_option("config", config, "Experiment config (JSON)")->required();

  auto* wstar = app.add_subcommand("wstar", "Print the limit covariance W*");
  wstar->add_option("config", config, "Experiment config (JSON)")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 2;
  }

  try {
    const auto cfg = sgdclt::load_config(config);
    if (*run) {
      sgdclt::RunOptions opt;
      opt.check = check;
      opt.threads = threads;
      if (!out_dir.empty()) opt.out_dir = out_dir;
      const auto result = sgdclt::run_experiment(cfg, opt);
      std::cout << sgdclt::dump_json(result.summary);
      for (const auto& f : result.check_failures) std::cerr << "check failed: " << f << "\n";
      std::cerr << "artifacts in " << result.output_dir << "\n";
      return result.exit_code;
    }
    if (*certify) {
      std::cout << sgdclt::dump_json(sgdclt::certify_report(cfg));
      return 0;
    }
    std::cout << sgdclt::dump_json(sgdclt::wstar_report(cfg));
    return 0;
  } catch (const sgdclt::Error& e) {
    print_error(e);
    return sgdclt::exit_code_for(e);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  }
}
