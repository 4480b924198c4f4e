#include "sgdclt/ensemble.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <mutex>
#include <sstream>
#include <thread>

#include "sgdclt/errors.hpp"
#include "sgdclt/rng.hpp"

namespace sgdclt {

namespace {

int resolve_threads(int requested) {
  if (requested > 0) return requested;
  const unsigned hw = std::thread::hardware_concurrency();
  return hw == 0 ? 1 : static_cast<int>(hw);
}

/// Calls fn(i) for i in [0, count) on a small worker pool. The first
/// exception thrown by any worker is rethrown after all workers join.
template <class Fn>
void parallel_for(std::int64_t count, int threads, Fn&& fn) {
  std::atomic<std::int64_t> next{0};
  std::exception_ptr error;
  std::mutex error_mutex;
  auto worker = [&] {
    for (;;) {
      const auto i = next.fetch_add(1);
      if (i >= count) return;
      try {
        fn(i);
      } catch (...) {
        std::lock_guard lock(error_mutex);
        if (!error) error = std::current_exception();
        next.store(count);
        return;
      }
    }
  };
  const int n = std::max(1, std::min<int>(resolve_threads(threads), static_cast<int>(std::max<std::int64_t>(count, 1))));
  if (n == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    pool.reserve(static_cast<std::size_t>(n));
    for (int t = 0; t < n; ++t) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
  }
  if (error) std::rethrow_exception(error);
}

void check_failures(std::int64_t failed, std::int64_t total, double max_fraction) {
  if (static_cast<double>(failed) > max_fraction * static_cast<double>(total)) {
    std::ostringstream os;
    os << failed << " of " << total << " replicas went non-finite";
    throw Error(ErrorCode::TooManyFailures, os.str());
  }
}

std::vector<std::int64_t> checkpoint_steps(std::int64_t n_steps, std::int64_t every) {
  std::vector<std::int64_t> ks;
  for (std::int64_t k = every; k < n_steps; k += every) ks.push_back(k);
  ks.push_back(n_steps);
  return ks;
}

Vector initial_point(const Problem& p, double scale, Rng& rng) {
  Vector x = p.x_star();
  if (scale != 0.0) {
    for (Eigen::Index j = 0; j < x.size(); ++j) x(j) += scale * rng.normal();
  }
  return x;
}

/// Rows of `m` whose replica index is not in the sorted `failed` list.
Matrix drop_rows(const Matrix& m, const std::vector<std::int64_t>& failed) {
  if (failed.empty()) return m;
  Matrix out(m.rows() - static_cast<Eigen::Index>(failed.size()), m.cols());
  Eigen::Index r = 0;
  std::size_t f = 0;
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    if (f < failed.size() && failed[f] == i) {
      ++f;
      continue;
    }
    out.row(r++) = m.row(i);
  }
  return out;
}

}  // namespace

ScaleRule natural_scale_rule(Method method) {
  return method == Method::MSGD_Vanishing ? ScaleRule::Beta : ScaleRule::Alpha;
}

Matrix normalized_covariance(const Matrix& snapshot, Eigen::Index rows, double scale, Estimator estimator) {
  const Matrix top = snapshot.topRows(rows);
  const Matrix V = estimator == Estimator::Centered ? sample_covariance(top) : second_moment(top);
  return V / scale;
}

EnsembleTrace run_ensemble(const EnsembleConfig& cfg) {
  if (!cfg.problem || !cfg.noise) throw Error(ErrorCode::InvalidArgument, "ensemble needs a problem and a noise model");
  if (cfg.replicas < 2) throw Error(ErrorCode::InvalidArgument, "ensemble needs at least two replicas");
  if (cfg.n_steps < 1 || cfg.checkpoint_every < 1) {
    throw Error(ErrorCode::InvalidArgument, "n_steps and checkpoint_every must be positive");
  }
  if (cfg.scale_rule == ScaleRule::Beta && cfg.method.method != Method::MSGD_Vanishing) {
    throw Error(ErrorCode::IncompatiblePair, "beta scaling needs a damping schedule");
  }
  const Problem& p = *cfg.problem;
  const auto steps = checkpoint_steps(cfg.n_steps, cfg.checkpoint_every);
  const Eigen::Index dim = cfg.method.method == Method::VSGD ? p.dim() : 2 * p.dim();

  EnsembleTrace trace;
  trace.scale_rule = cfg.scale_rule;
  trace.estimator = cfg.estimator;
  trace.replicas = cfg.replicas;
  std::vector<Matrix> raw(steps.size(), Matrix::Zero(cfg.replicas, dim));
  std::vector<char> failed(static_cast<std::size_t>(cfg.replicas), 0);

  // Workers own disjoint rows of `raw` and disjoint entries of `failed`.
  parallel_for(cfg.replicas, cfg.threads, [&](std::int64_t r) {
    Rng rng(cfg.master_seed, static_cast<std::uint64_t>(r));
    Stepper stepper(p, *cfg.noise, cfg.schedule, cfg.method);
    OptState st = initial_state(cfg.method.method, initial_point(p, cfg.init_scale, rng));
    std::size_t next = 0;
    try {
      while (next < steps.size()) {
        stepper.step(st, rng);
        if (st.k == steps[next]) {
          raw[next].row(r) = st.deviation(p.x_star()).transpose();
          ++next;
        }
      }
    } catch (const Error& e) {
      if (e.code() != ErrorCode::NonFinite) throw;
      failed[static_cast<std::size_t>(r)] = 1;
    }
  });

  for (std::int64_t r = 0; r < cfg.replicas; ++r) {
    if (failed[static_cast<std::size_t>(r)]) trace.failed_ids.push_back(r);
  }
  trace.failed_replicas = static_cast<std::int64_t>(trace.failed_ids.size());
  check_failures(trace.failed_replicas, cfg.replicas, cfg.max_failure_fraction);

  const Stepper scaler(p, *cfg.noise, cfg.schedule, cfg.method);
  for (std::size_t c = 0; c < steps.size(); ++c) {
    Matrix snap = drop_rows(raw[c], trace.failed_ids);
    Checkpoint cp;
    cp.k = steps[c];
    cp.scale = cfg.scale_rule == ScaleRule::Beta ? scaler.scale_at(cp.k) : cfg.schedule.alpha_at(cp.k);
    cp.V = cfg.estimator == Estimator::Centered ? sample_covariance(snap) : second_moment(snap);
    cp.W = cp.V / cp.scale;
    cp.mean = snap.colwise().mean().transpose();
    cp.frob_V = cp.V.norm();
    cp.rel_err = cfg.W_star.size() > 0 ? relative_frobenius_error(cp.W, cfg.W_star) : 0.0;
    trace.checkpoints.push_back(std::move(cp));
    trace.snapshots.push_back(std::move(snap));
  }
  return trace;
}

ScalingTable sampling_error_scaling(const EnsembleTrace& trace, const std::vector<std::int64_t>& Ms,
                                    const Matrix& W_star, int blocks) {
  if (trace.checkpoints.empty()) throw Error(ErrorCode::InvalidArgument, "empty trace");
  if (blocks < 1) throw Error(ErrorCode::InvalidArgument, "blocks must be >= 1");
  const Matrix& snap = trace.snapshots.back();
  const double scale = trace.checkpoints.back().scale;
  const Eigen::Index block_rows = snap.rows() / blocks;
  ScalingTable table;
  for (auto M : Ms) {
    if (M < 2 || M > block_rows) throw Error(ErrorCode::InvalidArgument, "prefix size outside the ensemble block");
    double sum = 0.0;
    for (int b = 0; b < blocks; ++b) {
      const Matrix block = snap.middleRows(b * block_rows, block_rows);
      sum += relative_frobenius_error(normalized_covariance(block, static_cast<Eigen::Index>(M), scale, trace.estimator),
                                      W_star);
    }
    table.rows.push_back({M, sum / blocks});
  }
  for (std::size_t i = 1; i < table.rows.size(); ++i) {
    table.ratios.push_back(table.rows[i].rel_err / table.rows[i - 1].rel_err);
  }
  if (!table.ratios.empty()) {
    double s = 0.0;
    for (double r : table.ratios) s += r;
    table.mean_ratio = s / static_cast<double>(table.ratios.size());
  }
  return table;
}

LpReport lp_bound_diagnostic(const EnsembleTrace& trace, const std::vector<double>& p_list, double growth_factor) {
  if (trace.checkpoints.size() < 5) throw Error(ErrorCode::InvalidArgument, "lp diagnostic needs >= 5 checkpoints");
  LpReport rep;
  rep.p_list = p_list;
  for (std::size_t c = 0; c < trace.checkpoints.size(); ++c) {
    const auto& snap = trace.snapshots[c];
    const double scale = trace.checkpoints[c].scale;
    LpRow row;
    row.k = trace.checkpoints[c].k;
    for (double p : p_list) {
      double sum = 0.0;
      for (Eigen::Index i = 0; i < snap.rows(); ++i) sum += std::pow(snap.row(i).squaredNorm(), p);
      row.ratio.push_back(sum / static_cast<double>(snap.rows()) / std::pow(scale, p));
    }
    rep.rows.push_back(std::move(row));
  }
  for (std::size_t j = 0; j < p_list.size(); ++j) {
    std::vector<double> col;
    for (const auto& row : rep.rows) col.push_back(row.ratio[j]);
    rep.max_ratio.push_back(*std::max_element(col.begin(), col.end()));
    std::vector<double> sorted = col;
    std::sort(sorted.begin(), sorted.end());
    const std::size_t n = sorted.size();
    const double median = n % 2 ? sorted[n / 2] : 0.5 * (sorted[n / 2 - 1] + sorted[n / 2]);
    rep.bounded.push_back(col.back() <= growth_factor * median);
  }
  return rep;
}

TimeAverageReport time_average_experiment(const TimeAverageConfig& cfg) {
  if (!cfg.problem || !cfg.noise) throw Error(ErrorCode::InvalidArgument, "time average needs a problem and noise");
  if (cfg.replicas < 2 || cfg.n_steps < 1) throw Error(ErrorCode::InvalidArgument, "bad replica or step count");
  const auto& s = cfg.schedule;
  if ((s.kind() == Schedule::Kind::PowerLaw || s.kind() == Schedule::Kind::PowerLawLog) && s.exponent() > 0.5) {
    throw Error(ErrorCode::WrongRegime, "sum alpha_k^2 converges for exponent > 1/2; no CLT for the average");
  }
  const Problem& p = *cfg.problem;
  const auto d = p.dim();

  std::vector<std::int64_t> at = cfg.report_at;
  at.push_back(cfg.n_steps);
  std::sort(at.begin(), at.end());
  at.erase(std::unique(at.begin(), at.end()), at.end());
  at.erase(std::remove_if(at.begin(), at.end(), [&](auto n) { return n < 1 || n > cfg.n_steps; }), at.end());

  // Deterministic sums shared by all replicas.
  std::vector<double> T_at, S_at;
  {
    double T = 0.0, S = 0.0;
    std::size_t next = 0;
    for (std::int64_t k = 1; k <= cfg.n_steps && next < at.size(); ++k) {
      const double a = s.alpha_at(k);
      T += a;
      S += a * a;
      if (k == at[next]) {
        T_at.push_back(T);
        S_at.push_back(S);
        ++next;
      }
    }
  }

  std::vector<Matrix> raw(at.size(), Matrix::Zero(cfg.replicas, d));
  std::vector<char> failed(static_cast<std::size_t>(cfg.replicas), 0);
  const MethodSpec spec{Method::VSGD, 0.0, std::nullopt};
  parallel_for(cfg.replicas, cfg.threads, [&](std::int64_t r) {
    Rng rng(cfg.master_seed, static_cast<std::uint64_t>(r));
    Stepper stepper(p, *cfg.noise, s, spec);
    OptState st = initial_state(Method::VSGD, initial_point(p, cfg.init_scale, rng));
    Vector weighted = Vector::Zero(d);
    std::size_t next = 0;
    try {
      while (next < at.size()) {
        // alpha_k X_{k-1} enters before step k is taken.
        weighted.noalias() += s.alpha_at(st.k + 1) * (st.x - p.x_star());
        stepper.step(st, rng);
        if (st.k == at[next]) {
          raw[next].row(r) = weighted.transpose() / std::sqrt(S_at[next]);
          ++next;
        }
      }
    } catch (const Error& e) {
      if (e.code() != ErrorCode::NonFinite) throw;
      failed[static_cast<std::size_t>(r)] = 1;
    }
  });

  TimeAverageReport rep;
  std::vector<std::int64_t> failed_ids;
  for (std::int64_t r = 0; r < cfg.replicas; ++r) {
    if (failed[static_cast<std::size_t>(r)]) failed_ids.push_back(r);
  }
  rep.failed_replicas = static_cast<std::int64_t>(failed_ids.size());
  check_failures(rep.failed_replicas, cfg.replicas, cfg.max_failure_fraction);

  const Matrix Ainv = p.hessian().inverse();
  rep.target = symmetrize(Ainv * sigma_at_min_unchecked(p, *cfg.noise) * Ainv);
  for (std::size_t c = 0; c < at.size(); ++c) {
    const Matrix snap = drop_rows(raw[c], failed_ids);
    TimeAveragePoint pt;
    pt.n = at[c];
    pt.T = T_at[c];
    pt.S = S_at[c];
    pt.mean_scaled = snap.colwise().mean().transpose();
    pt.cov_scaled = sample_covariance(snap);
    pt.drift_stat = pt.mean_scaled.norm();
    pt.rms_scaled = std::sqrt(snap.rowwise().squaredNorm().mean());
    pt.rel_err = relative_frobenius_error(pt.cov_scaled, rep.target);
    rep.points.push_back(std::move(pt));
    if (c + 1 == at.size()) rep.final_scaled = snap;
  }
  return rep;
}

}  // namespace sgdclt
