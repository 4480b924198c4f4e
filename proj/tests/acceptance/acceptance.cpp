// Acceptance checks, one PASS/FAIL line per criterion.
//
//   sgdclt_acceptance c1 ... c9 | c4_control | all
//
// Sub-checks print indented lines with the measured value next to the
// threshold; the criterion line summarizes them. The exit status is nonzero
// when any selected criterion fails.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <iostream>
#include <map>
#include <random>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "oracles.hpp"
#include "sgdclt/ensemble.hpp"
#include "sgdclt/errors.hpp"
#include "sgdclt/experiment.hpp"
#include "sgdclt/lyapunov.hpp"
#include "sgdclt/optimizers.hpp"
#include "sgdclt/stats.hpp"

using namespace sgdclt;

namespace {

class Criterion {
 public:
  explicit Criterion(std::string id) : id_(std::move(id)) {}

  void check(bool ok, const std::string& what) {
    ok_ = ok_ && ok;
    std::printf("    %s  %s\n", ok ? "ok  " : "FAIL", what.c_str());
    std::fflush(stdout);
  }

  void note(const std::string& what) {
    std::printf("    info  %s\n", what.c_str());
    std::fflush(stdout);
  }

  bool finish(const std::string& title) const {
    std::printf("%s %s: %s\n", ok_ ? "PASS" : "FAIL", id_.c_str(), title.c_str());
    std::fflush(stdout);
    return ok_;
  }

 private:
  std::string id_;
  bool ok_ = true;
};

std::string fmt(const char* f, double a) {
  char buf[128];
  std::snprintf(buf, sizeof buf, f, a);
  return buf;
}

std::string fmt(const char* f, double a, double b) {
  char buf[256];
  std::snprintf(buf, sizeof buf, f, a, b);
  return buf;
}

std::string fmt(const char* f, double a, double b, double c) {
  char buf[256];
  std::snprintf(buf, sizeof buf, f, a, b, c);
  return buf;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

Matrix diag(std::initializer_list<double> v) {
  Vector d(static_cast<Eigen::Index>(v.size()));
  Eigen::Index i = 0;
  for (double x : v) d(i++) = x;
  return d.asDiagonal();
}

// Feature scales of the shipped logistic configs.
Vector logistic_scales() {
  Vector s = Vector::Constant(10, 0.05);
  s(0) = 2.0;
  return s;
}

std::string config_path(const std::string& name) { return std::string(SGDCLT_CONFIG_DIR) + "/" + name; }

RunResult run_config(const std::string& name) {
  RunOptions opt;
  opt.check = true;
  opt.out_dir = std::string(SGDCLT_ACCEPTANCE_OUT) + "/" + name.substr(0, name.size() - 5);
  return run_experiment(load_config(config_path(name)), opt);
}

// ------------------------------------------------------------------ c1

bool c1() {
  Criterion c("c1");
  const auto t0 = std::chrono::steady_clock::now();
  std::mt19937_64 gen(20240601);
  std::normal_distribution<double> nd;
  double worst_res = 0.0, worst_int = 0.0;
  int res_ok = 0, int_ok = 0;
  for (int t = 0; t < 100; ++t) {
    const int n = 1 + t % 20;
    const Matrix M = oracle::random_stable(n, 0.2 + 0.05 * (t % 7), gen);
    Matrix G(n, n);
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) G(i, j) = nd(gen);
    const Matrix S = G * G.transpose() + 0.1 * Matrix::Identity(n, n);
    const double d0 = 0.1 * (t % 3);
    const auto sol = solve_general(M, S, d0);
    const double bound = 1e-9 * std::max(1.0, S.norm());
    worst_res = std::max(worst_res, sol.residual / bound);
    res_ok += sol.residual <= bound;
    const double diff = relative_frobenius_error(sol.W, integral_oracle(M, S, d0, 1e-9));
    worst_int = std::max(worst_int, diff);
    int_ok += diff <= 1e-6;
  }
  c.check(res_ok == 100, fmt("residual <= 1e-9 max(1, |S|) on %g/100 instances (worst residual/bound %.3g)", res_ok, worst_res));
  c.check(int_ok == 100, fmt("agreement with the integral oracle <= 1e-6 on %g/100 (worst %.3g)", int_ok, worst_int));

  double worst_v = 0.0, worst_m = 0.0, worst_h = 0.0;
  for (int t = 0; t < 100; ++t) {
    const int n = 1 + t % 10;
    const Matrix A = oracle::random_spd(n, 0.3, 3.0, gen);
    Matrix G(n, n);
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) G(i, j) = nd(gen);
    const Matrix Sigma = G * G.transpose() + 0.1 * Matrix::Identity(n, n);
    const double d0 = 0.2 * (t % 3);
    worst_v = std::max(worst_v, relative_frobenius_error(vsgd_limit_cov(A, Sigma, d0).W, solve_general(A, Sigma, d0).W));
    const double mu_tilde = 0.1 + 0.2 * (t % 5);
    const auto sys = system_matrices(A, min_eigenvalue(A), max_eigenvalue(A), Method::MSGD_Const, mu_tilde);
    worst_m = std::max(worst_m, relative_frobenius_error(msgd_limit_cov(A, Sigma, mu_tilde).W,
                                                         solve_general(sys.D, lifted_sigma(Sigma, Method::MSGD_Const), 0.0).W));
    // Commuting pair: Sigma shares A's eigenvectors. The block form solves
    // the stationarity conditions of the vanishing-damping recursion:
    // A H = Sigma / 2 (position) and J = Sigma / 2 (velocity).
    Eigen::SelfAdjointEigenSolver<Matrix> es(A);
    const Matrix Sc = es.eigenvectors() * (Vector::LinSpaced(n, 0.5, 3.0)).asDiagonal() * es.eigenvectors().transpose();
    const Matrix W = vanishing_limit_cov(A, Sc).W;
    const Matrix H_ref = solve_general(A, Sc, 0.0).W * 2.0 * 0.5;  // A H + H A = Sigma  =>  H = A^-1 Sigma / 2
    const Matrix J_ref = 0.5 * Sc;
    worst_h = std::max(worst_h, std::max(relative_frobenius_error(W.topLeftCorner(n, n), H_ref),
                                         relative_frobenius_error(W.bottomRightCorner(n, n), J_ref)));
  }
  c.check(worst_v <= 1e-8, fmt("vSGD closed form vs general solver, worst relative difference %.3g <= 1e-8", worst_v));
  c.check(worst_m <= 1e-8, fmt("mSGD closed form vs general solver, worst relative difference %.3g <= 1e-8", worst_m));
  c.check(worst_h <= 1e-8, fmt("vanishing-damping block form vs general solver, worst %.3g <= 1e-8", worst_h));
  const double secs = seconds_since(t0);
  c.check(secs < 10.0, fmt("runtime %.2f s < 10 s", secs));
  return c.finish("Lyapunov solver correctness");
}

// ------------------------------------------------------------------ c2

bool c2() {
  Criterion c("c2");
  const auto t0 = std::chrono::steady_clock::now();
  const auto r = run_config("table1.json");
  for (const auto& row : r.summary["table1"]) {
    const double a = row["a"].get<double>();
    std::ostringstream cells;
    for (const auto& cell : row["cells"]) {
      cells << " M=" << cell["M"].get<int>() << ":" << fmt("%.4f", cell["rel_err"].get<double>()) << "("
            << cell["published"].get<double>() << ")";
    }
    c.note(fmt("a=%.2f rel_err (published):", a) + cells.str());
    std::ostringstream ratios;
    for (const auto& x : row["ratios"]) ratios << " " << fmt("%.3f", x.get<double>());
    c.note(fmt("a=%.2f M-doubling ratios:", a) + ratios.str() + fmt(", mean %.3f", row["mean_ratio"].get<double>()));
  }
  // The run's --check thresholds are the criterion: factor-2 band and mean
  // ratio in [0.55, 0.85] for a <= 0.5, a ratio above 0.85 for a = 0.75.
  for (const auto& f : r.check_failures) c.check(false, f);
  c.check(r.check_failures.empty(), "all cells within factor 2, mean ratios in [0.55, 0.85], a=0.75 shows a ratio > 0.85");
  c.note(fmt("cells average %g independent ensembles", r.summary["table1"][0]["repetitions"].get<double>()));
  c.note(fmt("runtime %.1f s", seconds_since(t0)));
  return c.finish("vSGD relative error against replica count");
}

// ------------------------------------------------------------------ c3

bool c3() {
  Criterion c("c3");
  const auto t0 = std::chrono::steady_clock::now();
  const auto r = run_config("msgd_const.json");
  const double err = r.summary["final_rel_err"].get<double>();
  c.check(err <= 0.15, fmt("final |W_k - diag(2.5, 2.5)| / |W*| = %.4f <= 0.15", err));
  c.note(fmt("runtime %.1f s", seconds_since(t0)));
  return c.finish("mSGD constant damping, A = cI");
}

// ------------------------------------------------------------------ c4

struct VanishingRun {
  EnsembleTrace trace;
  Matrix W_star;
  Schedule s = Schedule::power_law(0.5, 0.75);
  DampingSchedule d = DampingSchedule::power_law(1.0, 0.15);
};

VanishingRun run_vanishing(std::int64_t n_steps) {
  static const Problem p = make_quadratic(diag({1, 2}));
  static const NoiseModel noise = NoiseModel::additive(diag({3, 4}), NoiseDistribution::Gaussian);
  VanishingRun run;
  run.W_star = vanishing_limit_cov(p.hessian(), noise.sigma()).W;
  EnsembleConfig ec;
  ec.problem = &p;
  ec.noise = &noise;
  ec.schedule = run.s;
  ec.method = {Method::MSGD_Vanishing, 0.0, run.d};
  ec.replicas = 2000;
  ec.n_steps = n_steps;
  ec.checkpoint_every = n_steps / 10;
  ec.master_seed = 6;
  ec.init_scale = 0.0;
  ec.scale_rule = ScaleRule::Beta;
  ec.W_star = run.W_star;
  run.trace = run_ensemble(ec);
  return run;
}

bool c4(bool control_only) {
  Criterion c(control_only ? "c4_control" : "c4");
  const auto t0 = std::chrono::steady_clock::now();
  const std::int64_t n = 1'000'000;
  const auto run = run_vanishing(n);
  const auto& last = run.trace.checkpoints.back();
  for (const auto& cp : run.trace.checkpoints) {
    c.note(fmt("k=%.0f rel_err(beta scaling)=%.4f", static_cast<double>(cp.k), cp.rel_err));
  }
  // The same snapshots normalized by alpha_n instead of beta_n.
  const double alpha_n = run.s.alpha_at(n);
  const Matrix W_alpha = last.V / alpha_n;
  const double alpha_err = relative_frobenius_error(W_alpha, run.W_star);
  if (!control_only) {
    // Deterministic part of the error: the exact second-moment recursion of
    // the same linear iteration, free of sampling noise.
    const Matrix exact = oracle::exact_second_moment(
        oracle::Linear::MSGD, diag({1, 2}), diag({3, 4}), Vector::Zero(4),
        [&](std::int64_t k) { return run.s.alpha_at(k); }, [&](std::int64_t k) { return run.d.mu_at(k); }, n);
    const double beta_n = alpha_n / run.d.mu_at(n);
    c.note(fmt("exact-recursion rel_err at n=%.0f: %.4f (bias floor independent of M)", static_cast<double>(n),
               relative_frobenius_error(exact / beta_n, run.W_star)));
    c.check(last.rel_err <= 0.15, fmt("final rel_err of Cov(Z_n)/beta_n = %.4f <= 0.15", last.rel_err));
  } else {
    c.check(alpha_err > 0.5, fmt("alpha-scaled control rel_err = %.4g > 0.5", alpha_err));
  }
  c.note(fmt("runtime %.1f s", seconds_since(t0)));
  return c.finish(control_only ? "vanishing damping, alpha-scaling negative control"
                               : "vanishing damping, beta-scaled covariance");
}

// ------------------------------------------------------------------ c5

// Fraction of 20 seeded ensembles whose whitened final snapshot passes.
double normality_pass_rate(const Problem& p, const NoiseModel& noise, const Schedule& s, const MethodSpec& spec,
                           std::int64_t M, std::int64_t n, std::uint64_t seed0) {
  int passed = 0;
  for (int r = 0; r < 20; ++r) {
    EnsembleConfig ec;
    ec.problem = &p;
    ec.noise = &noise;
    ec.schedule = s;
    ec.method = spec;
    ec.replicas = M;
    ec.n_steps = n;
    ec.checkpoint_every = n;
    ec.master_seed = seed0 + static_cast<std::uint64_t>(r);
    ec.init_scale = 1.0;
    const auto trace = run_ensemble(ec);
    const Matrix& snap = trace.snapshots.back();
    passed += whiten_and_test(snap, sample_covariance(snap), 0.05).passed;
  }
  return passed / 20.0;
}

bool c5() {
  Criterion c("c5");
  const auto t0 = std::chrono::steady_clock::now();
  const auto data = std::make_shared<const LogisticDataset>(generate_logistic(10, 1000, 0.05, 7, logistic_scales()));
  const Problem logistic = make_logistic(data);
  const NoiseModel minibatch = NoiseModel::minibatch(1);
  const Problem quad = make_quadratic(diag({1, 2}));
  const NoiseModel uniform = NoiseModel::additive(diag({1, 1}), NoiseDistribution::BoundedUniform);
  const Problem quad_v = make_quadratic(diag({1, 2}));
  const NoiseModel uniform_v = NoiseModel::additive(diag({3, 4}), NoiseDistribution::BoundedUniform);

  struct Case {
    const char* name;
    const Problem* p;
    const NoiseModel* noise;
    Schedule s;
    MethodSpec spec;
  };
  const std::vector<Case> cases = {
      {"vSGD (logistic, mini-batch 1)", &logistic, &minibatch, Schedule::power_law(0.1, 0.25),
       {Method::VSGD, 0.0, std::nullopt}},
      {"mSGD constant damping (uniform noise)", &quad, &uniform, Schedule::power_law(0.1, 0.5),
       {Method::MSGD_Const, 0.2, std::nullopt}},
      {"NaSGD (uniform noise)", &quad, &uniform, Schedule::power_law(0.1, 0.5), {Method::NASGD_Const, 0.2, std::nullopt}},
      {"mSGD vanishing damping (uniform noise)", &quad_v, &uniform_v, Schedule::power_law(0.5, 0.75),
       {Method::MSGD_Vanishing, 0.0, DampingSchedule::power_law(1.0, 0.15)}},
  };
  std::uint64_t seed = 500;
  for (const auto& cs : cases) {
    const double rate = normality_pass_rate(*cs.p, *cs.noise, cs.s, cs.spec, 500, 20000, seed);
    seed += 100;
    c.check(rate >= 0.8, std::string(cs.name) + fmt(": pass rate %.2f >= 0.80 over 20 ensembles", rate));
  }

  int rejections = 0;
  for (int t = 0; t < 200; ++t) {
    Rng rng(kAuxStreamBase + 5000, static_cast<std::uint64_t>(t));
    Matrix X(2000, 10);
    for (Eigen::Index i = 0; i < X.rows(); ++i)
      for (Eigen::Index j = 0; j < X.cols(); ++j) X(i, j) = rng.normal();
    rejections += !royston_test(X, 0.05).passed;
  }
  const double size = rejections / 200.0;
  c.check(size >= 0.01 && size <= 0.10, fmt("size under N(0, I_10), M=2000: rejection rate %.3f in [0.01, 0.10]", size));

  rejections = 0;
  for (int t = 0; t < 200; ++t) {
    Rng rng(kAuxStreamBase + 5001, static_cast<std::uint64_t>(t));
    Matrix X(500, 10);
    for (Eigen::Index i = 0; i < X.rows(); ++i)
      for (Eigen::Index j = 0; j < X.cols(); ++j) X(i, j) = rng.normal();
    X.col(0) = X.col(0).array().cube().matrix();
    rejections += !royston_test(X, 0.05).passed;
  }
  const double power = rejections / 200.0;
  c.check(power >= 0.95, fmt("power against a cubed coordinate, M=500: %.3f >= 0.95", power));
  c.note(fmt("runtime %.1f s", seconds_since(t0)));
  return c.finish("normality of whitened ensembles");
}

// ------------------------------------------------------------------ c6

bool c6() {
  Criterion c("c6");
  const auto t0 = std::chrono::steady_clock::now();
  const auto r = run_config("time_average_linear.json");
  const auto& ta = r.summary["time_average"];
  const double var = ta["cov_scaled"][0][0].get<double>();
  c.check(std::abs(var - 1.0) <= 0.1, fmt("Var((T_n / sqrt S_n) xbar_n) = %.4f, within 10%% of 1", var));
  c.note(fmt("runtime %.1f s", seconds_since(t0)));
  return c.finish("time-average CLT, linear problem");
}

// ------------------------------------------------------------------ c7

bool c7() {
  Criterion c("c7");
  const auto t0 = std::chrono::steady_clock::now();
  const auto r = run_config("counterexample.json");
  const auto& ta = r.summary["time_average"];
  const double growth = ta["drift_growth"].get<double>();
  const double control = ta["control_rms_growth"].get<double>();
  c.check(growth >= 5.0, fmt("counterexample drift statistic n=1e5 / n=1e3 = %.3f >= 5", growth));
  c.check(control <= 2.0, fmt("linear control final/initial = %.3f <= 2", control));
  c.note(fmt("runtime %.1f s", seconds_since(t0)));
  return c.finish("counterexample: no CLT for the time average");
}

// ------------------------------------------------------------------ c8

bool c8() {
  Criterion c("c8");
  const std::int64_t horizon = 1'000'000;
  double worst_zero = 0.0;
  for (double K : {0.1, 0.5, 1.0, 2.0})
    for (double a : {0.25, 0.5, 0.75, 0.9}) {
      worst_zero = std::max(worst_zero, std::abs(estimate_d0(Schedule::power_law(K, a), 1, horizon)));
    }
  c.check(worst_zero <= 1e-3, fmt("a < 1: worst |d0 estimate| = %.3g <= 1e-3 (16 schedules)", worst_zero));
  double worst_inv = 0.0;
  for (double K : {0.1, 0.5, 1.0, 2.0, 5.0}) {
    worst_inv = std::max(worst_inv, std::abs(estimate_d0(Schedule::power_law(K, 1.0), 1, horizon) - 1.0 / K));
  }
  c.check(worst_inv <= 1e-3, fmt("a = 1: worst |d0 estimate - 1/K| = %.3g <= 1e-3 (5 schedules)", worst_inv));

  const std::vector<double> grid{0.01, 0.05, 0.1, 0.2, 0.3, 0.34, 0.5, 1.0, 2.0, 5.0, 9.0, 10.5, 20.0};
  bool monotone = true;
  int schedules = 0;
  for (const auto& s : {Schedule::power_law(0.1, 0.5), Schedule::power_law(1.0, 0.25), Schedule::power_law(3.0, 1.0),
                        Schedule::power_law(0.1, 1.0), Schedule::power_law_log(0.1, 0.5)}) {
    bool seen = false;
    std::ostringstream row;
    for (double h0 : grid) {
      bool passed = false;
      try {
        passed = check_h0_slow(s, h0, 256, horizon).passed;
      } catch (const Error&) {
        row << " " << h0 << ":invalid";
        continue;
      }
      row << " " << h0 << ":" << (passed ? "pass" : "fail");
      if (seen && !passed) monotone = false;
      seen = seen || passed;
    }
    ++schedules;
    c.note(s.describe() + row.str());
  }
  c.check(monotone, fmt("h0-slow pass/fail is monotone in h0 on a %g-point grid for %g schedules",
                        static_cast<double>(grid.size()), schedules));
  return c.finish("schedule certificates");
}

// ------------------------------------------------------------------ c9

bool c9() {
  Criterion c("c9");
  std::mt19937_64 gen(99);
  std::normal_distribution<double> nd;
  Matrix A(3, 3);
  A << 2, 0.3, 0, 0.3, 1, 0.1, 0, 0.1, 0.5;
  const auto data = std::make_shared<const LogisticDataset>(generate_logistic(10, 1000, 0.05, 7, logistic_scales()));
  const std::vector<std::pair<const char*, Problem>> problems = {
      {"quadratic", make_quadratic(A)}, {"logistic", make_logistic(data)}, {"counterexample", make_counterexample()}};
  for (const auto& [name, p] : problems) {
    double worst_fd = 0.0;
    int smooth_fail = 0, convex_fail = 0;
    for (int t = 0; t < 200; ++t) {
      Vector x = p.x_star(), y = p.x_star();
      for (Eigen::Index i = 0; i < p.dim(); ++i) {
        x(i) += 1.5 * nd(gen);
        y(i) += 1.5 * nd(gen);
      }
      const Vector g = p.gradient(x);
      const Vector fd = oracle::fd_gradient([&](const Vector& z) { return p.value(z); }, x);
      worst_fd = std::max(worst_fd, (g - fd).norm() / std::max(1.0, g.norm()));
      const Vector dg = g - p.gradient(y);
      const double dx = (x - y).norm();
      smooth_fail += dg.norm() > p.L() * dx * (1 + 1e-9);
      if (p.globally_convex()) convex_fail += dg.dot(x - y) < p.mu() * dx * dx * (1 - 1e-9);
    }
    c.check(worst_fd <= 1e-6, std::string(name) + fmt(": gradient vs finite differences, worst %.2g <= 1e-6", worst_fd));
    c.check(smooth_fail == 0, std::string(name) + fmt(": L-smoothness violations %g / 200 pairs", smooth_fail));
    if (p.globally_convex()) {
      c.check(convex_fail == 0, std::string(name) + fmt(": strong-convexity violations %g / 200 pairs", convex_fail));
    }
  }

  int spd_fail = 0;
  for (int t = 0; t < 100; ++t) {
    const int n = 1 + t % 12;
    const Matrix M = oracle::random_stable(n, 0.2, gen);
    Matrix G(n, n);
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) G(i, j) = nd(gen);
    const Matrix W = solve_general(M, G * G.transpose() + 0.01 * Matrix::Identity(n, n), 0.0).W;
    spd_fail += !(is_symmetric(W, 1e-10) && min_eigenvalue(W) > 0.0);
  }
  c.check(spd_fail == 0, fmt("Lyapunov solutions SPD for SPD right-hand sides: %g failures / 100", spd_fail));

  const Problem q = make_quadratic(diag({1, 2}));
  const NoiseModel noise = NoiseModel::additive(diag({1, 1}), NoiseDistribution::BoundedUniform);
  bool same = true;
  for (Method m : {Method::VSGD, Method::MSGD_Const, Method::NASGD_Const, Method::MSGD_Vanishing}) {
    EnsembleConfig ec;
    ec.problem = &q;
    ec.noise = &noise;
    ec.schedule = Schedule::power_law(0.1, 0.5);
    ec.method = {m, 0.2, m == Method::MSGD_Vanishing ? std::optional(DampingSchedule::power_law(1.0, 0.15)) : std::nullopt};
    ec.replicas = 257;
    ec.n_steps = 1000;
    ec.checkpoint_every = 250;
    ec.threads = 1;
    const auto a = run_ensemble(ec);
    for (int threads : {2, 3, 7}) {
      ec.threads = threads;
      const auto b = run_ensemble(ec);
      for (std::size_t i = 0; i < a.snapshots.size(); ++i) same = same && a.snapshots[i] == b.snapshots[i];
    }
  }
  c.check(same, "ensembles bit-identical for 1, 2, 3 and 7 threads (all four methods)");
  return c.finish("property suites");
}

}  // namespace

int main(int argc, char** argv) {
  const std::map<std::string, std::function<bool()>> table = {
      {"c1", c1}, {"c2", c2}, {"c3", c3}, {"c4", [] { return c4(false); }}, {"c4_control", [] { return c4(true); }},
      {"c5", c5}, {"c6", c6}, {"c7", c7}, {"c8", c8}, {"c9", c9}};
  std::vector<std::string> selected;
  for (int i = 1; i < argc; ++i) selected.emplace_back(argv[i]);
  if (selected.empty() || (selected.size() == 1 && selected[0] == "all")) {
    selected = {"c1", "c2", "c3", "c4", "c4_control", "c5", "c6", "c7", "c8", "c9"};
  }
  bool ok = true;
  for (const auto& id : selected) {
    const auto it = table.find(id);
    if (it == table.end()) {
      std::cerr << "unknown criterion " << id << "\n";
      return 2;
    }
    try {
      ok = it->second() && ok;
    } catch (const std::exception& e) {
      std::printf("FAIL %s: error: %s\n", id.c_str(), e.what());
      ok = false;
    }
  }
  return ok ? 0 : 1;
}
