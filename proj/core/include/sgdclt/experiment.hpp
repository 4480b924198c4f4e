#pragma once

#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "sgdclt/errors.hpp"
#include "sgdclt/io.hpp"
#include "sgdclt/lyapunov.hpp"
#include "sgdclt/optimizers.hpp"
#include "sgdclt/problems.hpp"
#include "sgdclt/schedules.hpp"

namespace sgdclt {

/// Parsed experiment description. Unknown keys anywhere are rejected.
struct ExperimentConfig {
  Json raw;
  std::string path;
  /// Directory relative paths in the config resolve against.
  std::string base_dir;
  std::string name;
  std::uint64_t seed = 1;
  std::string output_dir;
};

/// Throws Config (malformed or unknown keys) or Io.
ExperimentConfig load_config(const std::string& path);
ExperimentConfig parse_config(const Json& raw, const std::string& base_dir = ".");

struct BuiltProblem {
  std::shared_ptr<const Problem> problem;
  NoiseModel noise;
  Matrix Sigma;
};

BuiltProblem build_problem(const ExperimentConfig& cfg);
Schedule build_schedule(const Json& spec);
std::optional<DampingSchedule> build_damping(const ExperimentConfig& cfg, const Schedule& s, std::int64_t horizon);
MethodSpec build_method(const ExperimentConfig& cfg, const Schedule& s, std::int64_t horizon);

struct LimitCovariance {
  LyapunovSolution solution;
  /// Residual of the cross-check against the general solver (NaN if skipped).
  double cross_check_rel_diff = 0.0;
  double d0 = 0.0;
  std::optional<SystemMatrices> system;
  /// d0 < 2 mu for vSGD, d0 < 2 lambda_D for the momentum methods.
  bool d0_admissible = true;
};

LimitCovariance compute_limit_covariance(const Problem& p, const Matrix& Sigma, const MethodSpec& spec, double d0);

struct RunOptions {
  bool check = false;
  int threads = 0;
  std::optional<std::string> out_dir;
};

struct RunResult {
  /// 0 on success, 4 if --check thresholds failed.
  int exit_code = 0;
  std::vector<std::string> check_failures;
  std::string output_dir;
  Json summary;
};

/// certify -> problem -> W* -> ensemble -> artifacts + manifest.json.
RunResult run_experiment(const ExperimentConfig& cfg, const RunOptions& options);

/// Schedule certificate (and damping certificate, if configured) as JSON.
Json certify_report(const ExperimentConfig& cfg);

/// W*, residual, lambda_D, h_D and the admissibility of d0.
Json wstar_report(const ExperimentConfig& cfg);

Json to_json(const ScheduleCertificate& cert);

/// 2 for config errors, 3 for numeric failures.
int exit_code_for(const Error& e) noexcept;

}  // namespace sgdclt
