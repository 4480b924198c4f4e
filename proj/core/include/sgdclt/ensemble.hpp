#pragma once

#include <cstdint>
#include <vector>

#include "sgdclt/linalg.hpp"
#include "sgdclt/optimizers.hpp"
#include "sgdclt/problems.hpp"
#include "sgdclt/schedules.hpp"

namespace sgdclt {

/// Normalization of the covariance: alpha_k, or beta_k = alpha_k / mu_k.
enum class ScaleRule { Alpha, Beta };
/// Centered sample covariance, or the uncentered second moment about x*.
enum class Estimator { Centered, Uncentered };

/// Scale rule the CLT prescribes for `method`.
ScaleRule natural_scale_rule(Method method);

struct EnsembleConfig {
  const Problem* problem = nullptr;
  const NoiseModel* noise = nullptr;
  Schedule schedule = Schedule::constant(1.0);
  MethodSpec method;
  std::int64_t replicas = 1000;
  std::int64_t n_steps = 10000;
  std::int64_t checkpoint_every = 10000;
  std::uint64_t master_seed = 1;
  /// x_0 = x* + init_scale * N(0, I); v_0 = 0.
  double init_scale = 1.0;
  ScaleRule scale_rule = ScaleRule::Alpha;
  Estimator estimator = Estimator::Centered;
  /// Target for rel_err; empty skips the comparison.
  Matrix W_star;
  /// 0 picks std::thread::hardware_concurrency().
  int threads = 0;
  double max_failure_fraction = 0.01;
};

struct Checkpoint {
  std::int64_t k = 0;
  double scale = 0.0;
  Matrix V;
  Matrix W;
  double rel_err = 0.0;
  Vector mean;
  double frob_V = 0.0;
};

struct EnsembleTrace {
  std::vector<Checkpoint> checkpoints;
  /// Deviations Z_k of the surviving replicas at each checkpoint, one row
  /// per replica in replica order.
  std::vector<Matrix> snapshots;
  ScaleRule scale_rule = ScaleRule::Alpha;
  Estimator estimator = Estimator::Centered;
  std::int64_t replicas = 0;
  std::int64_t failed_replicas = 0;
  /// Replica indices that went non-finite.
  std::vector<std::int64_t> failed_ids;
};

/// Runs the replicas in parallel with one random stream per replica, so the
/// result does not depend on the thread count. Throws TooManyFailures when
/// more than `max_failure_fraction` of the replicas overflow.
EnsembleTrace run_ensemble(const EnsembleConfig& config);

/// V / scale for the chosen estimator over the first `rows` rows of a snapshot.
Matrix normalized_covariance(const Matrix& snapshot, Eigen::Index rows, double scale, Estimator estimator);

struct ScalingRow {
  std::int64_t M = 0;
  double rel_err = 0.0;
};

struct ScalingTable {
  std::vector<ScalingRow> rows;
  /// rel_err(M_{i+1}) / rel_err(M_i).
  std::vector<double> ratios;
  double mean_ratio = 0.0;
};

/// rel_err of the final checkpoint evaluated on nested replica prefixes of
/// the sizes in `Ms` (ascending). The surviving replicas are split into
/// `blocks` equal consecutive blocks and each row averages rel_err over the
/// blocks, so every M must be at most the block size.
ScalingTable sampling_error_scaling(const EnsembleTrace& trace, const std::vector<std::int64_t>& Ms,
                                    const Matrix& W_star, int blocks = 1);

struct LpRow {
  std::int64_t k = 0;
  /// E|Z_k|^(2p) / scale_k^p for each requested p.
  std::vector<double> ratio;
};

struct LpReport {
  std::vector<double> p_list;
  std::vector<LpRow> rows;
  std::vector<double> max_ratio;
  /// Last checkpoint at most `growth_factor` times the median, per p.
  std::vector<bool> bounded;
};

LpReport lp_bound_diagnostic(const EnsembleTrace& trace, const std::vector<double>& p_list = {1.0, 1.5},
                             double growth_factor = 2.0);

struct TimeAverageConfig {
  const Problem* problem = nullptr;
  const NoiseModel* noise = nullptr;
  Schedule schedule = Schedule::constant(1.0);
  std::int64_t replicas = 1000;
  std::int64_t n_steps = 100000;
  /// Steps at which the scaled average is summarized; n_steps is always added.
  std::vector<std::int64_t> report_at;
  std::uint64_t master_seed = 1;
  double init_scale = 0.0;
  int threads = 0;
  double max_failure_fraction = 0.01;
};

struct TimeAveragePoint {
  std::int64_t n = 0;
  double T = 0.0;
  double S = 0.0;
  /// Mean over replicas of (T_n / sqrt S_n) xbar_n.
  Vector mean_scaled;
  Matrix cov_scaled;
  /// |mean_scaled|, the bias the counterexample accumulates.
  double drift_stat = 0.0;
  /// sqrt(E |scaled|^2), the spread including bias.
  double rms_scaled = 0.0;
  double rel_err = 0.0;
};

struct TimeAverageReport {
  std::vector<TimeAveragePoint> points;
  /// A^-1 Sigma A^-1.
  Matrix target;
  std::int64_t failed_replicas = 0;
  /// Scaled statistic of the surviving replicas at n_steps.
  Matrix final_scaled;
};

/// vSGD with the alpha-weighted average xbar_n = sum_k alpha_k X_{k-1} / T_n.
/// Throws WrongRegime for power-law schedules with exponent above 1/2.
TimeAverageReport time_average_experiment(const TimeAverageConfig& config);

}  // namespace sgdclt
