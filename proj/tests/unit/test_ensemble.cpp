#include <cmath>

#include <gtest/gtest.h>

#include "oracles.hpp"
#include "sgdclt/ensemble.hpp"
#include "sgdclt/errors.hpp"
#include "sgdclt/lyapunov.hpp"

using namespace sgdclt;

namespace {

struct Fixture {
  Problem p;
  NoiseModel noise;
  EnsembleConfig ec;

  Fixture(const Matrix& A, const Matrix& Sigma)
      : p(make_quadratic(A)), noise(NoiseModel::additive(Sigma, NoiseDistribution::Gaussian)) {
    ec.problem = &p;
    ec.noise = &noise;
    ec.schedule = Schedule::power_law(0.1, 0.5);
    ec.method = {Method::VSGD, 0.0, std::nullopt};
    ec.replicas = 500;
    ec.n_steps = 2000;
    ec.checkpoint_every = 500;
    ec.master_seed = 123;
    ec.threads = 1;
    ec.W_star = vsgd_limit_cov(A, Sigma, 0.0).W;
  }
};

Matrix diag(std::initializer_list<double> v) {
  Vector d(static_cast<Eigen::Index>(v.size()));
  Eigen::Index i = 0;
  for (double x : v) d(i++) = x;
  return d.asDiagonal();
}

ErrorCode code_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  ADD_FAILURE() << "no error thrown";
  return ErrorCode::InvalidArgument;
}

}  // namespace

TEST(Ensemble, CheckpointLayout) {
  Fixture f(diag({1, 2}), diag({1, 1}));
  const auto t = run_ensemble(f.ec);
  ASSERT_EQ(t.checkpoints.size(), 4u);
  EXPECT_EQ(t.checkpoints.front().k, 500);
  EXPECT_EQ(t.checkpoints.back().k, 2000);
  EXPECT_EQ(t.snapshots.back().rows(), 500);
  EXPECT_EQ(t.snapshots.back().cols(), 2);
  const auto& cp = t.checkpoints.back();
  EXPECT_DOUBLE_EQ(cp.scale, f.ec.schedule.alpha_at(2000));
  EXPECT_LE((cp.W - cp.V / cp.scale).norm(), 1e-12 * cp.W.norm());
  EXPECT_NEAR(cp.rel_err, relative_frobenius_error(cp.W, f.ec.W_star), 1e-14);
}

TEST(Ensemble, IdenticalAcrossThreadCounts) {
  Fixture f(diag({1, 2}), diag({1, 1}));
  f.ec.method = {Method::NASGD_Const, 0.3, std::nullopt};
  f.ec.W_star = Matrix();
  const auto a = run_ensemble(f.ec);
  f.ec.threads = 3;
  const auto b = run_ensemble(f.ec);
  f.ec.threads = 8;
  const auto c = run_ensemble(f.ec);
  for (std::size_t i = 0; i < a.snapshots.size(); ++i) {
    EXPECT_EQ(a.snapshots[i], b.snapshots[i]);
    EXPECT_EQ(a.snapshots[i], c.snapshots[i]);
    EXPECT_EQ(a.checkpoints[i].V, c.checkpoints[i].V);
  }
}

TEST(Ensemble, ReplicasUseDisjointStreams) {
  Fixture f(diag({1}), diag({1}));
  f.ec.replicas = 2000;
  f.ec.n_steps = 500;
  f.ec.checkpoint_every = 500;
  const auto t = run_ensemble(f.ec);
  const Matrix& s = t.snapshots.back();
  // Neighbouring replicas are uncorrelated.
  const auto n = s.rows() - 1;
  const Vector a = s.col(0).head(n), b = s.col(0).tail(n);
  const double corr = ((a.array() - a.mean()) * (b.array() - b.mean())).mean() /
                      std::sqrt((a.array() - a.mean()).square().mean() * (b.array() - b.mean()).square().mean());
  EXPECT_LE(std::abs(corr), 4.0 / std::sqrt(static_cast<double>(n)));
  f.ec.master_seed = 124;
  EXPECT_NE(run_ensemble(f.ec).snapshots.back(), s);
}

TEST(Ensemble, MatchesExactRecursion) {
  Matrix A(2, 2), Sigma(2, 2);
  A << 1.0, 0.2, 0.2, 0.5;
  Sigma << 1.0, 0.3, 0.3, 2.0;
  Fixture f(A, Sigma);
  f.ec.replicas = 20000;
  f.ec.n_steps = 3000;
  f.ec.checkpoint_every = 3000;
  f.ec.init_scale = 0.5;
  f.ec.estimator = Estimator::Uncentered;
  const auto t = run_ensemble(f.ec);
  // x0 = 0.5 N(0, I): start the recursion at E X0 X0^T = 0.25 I.
  const auto s = f.ec.schedule;
  Matrix V = 0.25 * Matrix::Identity(2, 2);
  for (std::int64_t k = 1; k <= 3000; ++k) {
    const double a = s.alpha_at(k);
    const Matrix T = Matrix::Identity(2, 2) - a * A;
    V = T * V * T.transpose() + a * a * Sigma;
  }
  EXPECT_LE(relative_frobenius_error(t.checkpoints.back().V, V), 0.04);
}

TEST(Ensemble, ZeroNoiseCollapses) {
  const auto p = make_quadratic(diag({1, 2}));
  const auto noise = NoiseModel::none();
  EnsembleConfig ec;
  ec.problem = &p;
  ec.noise = &noise;
  ec.schedule = Schedule::power_law(0.5, 0.5);
  ec.replicas = 50;
  ec.n_steps = 20000;
  ec.checkpoint_every = 20000;
  ec.threads = 1;
  ec.W_star = 0.5 * Matrix::Identity(2, 2);
  const auto t = run_ensemble(ec);
  EXPECT_LE(t.checkpoints.back().V.norm(), 1e-20);
  EXPECT_NEAR(t.checkpoints.back().rel_err, 1.0, 1e-6);
}

TEST(Ensemble, ConvergesTowardsLimit) {
  Fixture f(diag({1, 2}), diag({1, 1}));
  f.ec.replicas = 4000;
  f.ec.n_steps = 40000;
  f.ec.checkpoint_every = 2000;
  f.ec.init_scale = 3.0;
  const auto t = run_ensemble(f.ec);
  EXPECT_LT(t.checkpoints.back().rel_err, t.checkpoints.front().rel_err);
  EXPECT_LT(t.checkpoints.back().rel_err, 0.1);
}

TEST(Ensemble, TooManyFailures) {
  Fixture f(diag({1}), diag({1}));
  f.ec.schedule = Schedule::constant(5.0);
  f.ec.n_steps = 2000;
  f.ec.checkpoint_every = 2000;
  EXPECT_EQ(code_of([&] { run_ensemble(f.ec); }), ErrorCode::TooManyFailures);
}

TEST(Ensemble, NormalizedCovarianceEstimators) {
  Matrix S(4, 1);
  S << 1, 2, 3, 6;
  EXPECT_NEAR(normalized_covariance(S, 4, 2.0, Estimator::Uncentered)(0, 0), (1 + 4 + 9 + 36) / 4.0 / 2.0, 1e-14);
  EXPECT_NEAR(normalized_covariance(S, 4, 1.0, Estimator::Centered)(0, 0), 14.0 / 3.0, 1e-14);
  EXPECT_NEAR(normalized_covariance(S, 2, 1.0, Estimator::Uncentered)(0, 0), 2.5, 1e-14);
}

TEST(Ensemble, SamplingErrorShrinksLikeSqrtM) {
  Fixture f(diag({1, 2, 0.5}), diag({1, 1, 1}));
  f.ec.replicas = 4000;
  f.ec.n_steps = 20000;
  f.ec.checkpoint_every = 20000;
  f.ec.init_scale = 0.0;
  f.ec.estimator = Estimator::Uncentered;
  f.ec.schedule = Schedule::power_law(0.5, 0.25);
  const auto t = run_ensemble(f.ec);
  const auto table = sampling_error_scaling(t, {250, 500, 1000, 2000, 4000}, f.ec.W_star);
  ASSERT_EQ(table.rows.size(), 5u);
  ASSERT_EQ(table.ratios.size(), 4u);
  EXPECT_GT(table.mean_ratio, 0.55);
  EXPECT_LT(table.mean_ratio, 0.85);
  EXPECT_THROW(sampling_error_scaling(t, {100, 8000}, f.ec.W_star), Error);

  // Block averaging equals the mean of the per-block tables.
  const auto avg = sampling_error_scaling(t, {250, 1000}, f.ec.W_star, 4);
  EnsembleTrace block = t;
  double sum250 = 0.0, sum1000 = 0.0;
  for (int b = 0; b < 4; ++b) {
    block.snapshots.back() = t.snapshots.back().middleRows(b * 1000, 1000);
    const auto one = sampling_error_scaling(block, {250, 1000}, f.ec.W_star);
    sum250 += one.rows[0].rel_err;
    sum1000 += one.rows[1].rel_err;
  }
  EXPECT_NEAR(avg.rows[0].rel_err, sum250 / 4.0, 1e-12);
  EXPECT_NEAR(avg.rows[1].rel_err, sum1000 / 4.0, 1e-12);
  EXPECT_THROW(sampling_error_scaling(t, {2000}, f.ec.W_star, 4), Error);
}

TEST(Ensemble, LpDiagnosticBounded) {
  Fixture f(diag({1}), diag({1}));
  f.ec.replicas = 4000;
  f.ec.n_steps = 50000;
  f.ec.checkpoint_every = 5000;
  f.ec.init_scale = 0.0;
  const auto t = run_ensemble(f.ec);
  const auto lp = lp_bound_diagnostic(t, {1.0, 2.0});
  ASSERT_EQ(lp.rows.size(), 10u);
  EXPECT_TRUE(lp.bounded[0]);
  EXPECT_TRUE(lp.bounded[1]);
  // E X^2 / alpha -> 1/2 and E X^4 / alpha^2 -> 3/4 for the normal limit.
  EXPECT_NEAR(lp.rows.back().ratio[0], 0.5, 0.05);
  EXPECT_NEAR(lp.rows.back().ratio[1], 0.75, 0.1);
}

TEST(TimeAverage, ZeroNoiseDrift) {
  const auto p = make_quadratic(diag({1}));
  const auto noise = NoiseModel::none();
  TimeAverageConfig tc;
  tc.problem = &p;
  tc.noise = &noise;
  tc.schedule = Schedule::power_law(1.0, 0.3);
  tc.replicas = 10;
  tc.n_steps = 1000;
  tc.threads = 1;
  const auto r = time_average_experiment(tc);
  EXPECT_EQ(r.points.back().n, 1000);
  EXPECT_EQ(r.points.back().drift_stat, 0.0);
}

TEST(TimeAverage, LinearScaledVariance) {
  const auto p = make_quadratic(diag({1}));
  const auto noise = NoiseModel::additive(diag({1}), NoiseDistribution::Gaussian);
  TimeAverageConfig tc;
  tc.problem = &p;
  tc.noise = &noise;
  tc.schedule = Schedule::power_law(1.0, 0.3);
  tc.replicas = 2000;
  tc.n_steps = 20000;
  tc.report_at = {1000};
  tc.threads = 1;
  const auto r = time_average_experiment(tc);
  ASSERT_EQ(r.points.size(), 2u);
  EXPECT_NEAR(r.target(0, 0), 1.0, 1e-14);
  EXPECT_LT(r.points.back().rel_err, 0.15);
  // T_n and S_n are the partial sums of alpha_k and alpha_k^2.
  double T = 0.0, S = 0.0;
  for (std::int64_t k = 1; k <= 1000; ++k) {
    T += tc.schedule.alpha_at(k);
    S += std::pow(tc.schedule.alpha_at(k), 2);
  }
  EXPECT_NEAR(r.points.front().T, T, 1e-9 * T);
  EXPECT_NEAR(r.points.front().S, S, 1e-9 * S);
}

TEST(TimeAverage, WrongRegime) {
  const auto p = make_quadratic(diag({1}));
  const auto noise = NoiseModel::additive(diag({1}), NoiseDistribution::Gaussian);
  TimeAverageConfig tc;
  tc.problem = &p;
  tc.noise = &noise;
  tc.schedule = Schedule::power_law(1.0, 0.75);
  tc.replicas = 10;
  tc.n_steps = 100;
  EXPECT_EQ(code_of([&] { time_average_experiment(tc); }), ErrorCode::WrongRegime);
}

TEST(TimeAverage, IdenticalAcrossThreadCounts) {
  const auto p = make_counterexample();
  const auto noise = NoiseModel::additive(diag({1}), NoiseDistribution::Gaussian);
  TimeAverageConfig tc;
  tc.problem = &p;
  tc.noise = &noise;
  tc.schedule = Schedule::power_law(1.0, 0.4);
  tc.replicas = 64;
  tc.n_steps = 2000;
  tc.threads = 1;
  const auto a = time_average_experiment(tc);
  tc.threads = 4;
  const auto b = time_average_experiment(tc);
  EXPECT_EQ(a.final_scaled, b.final_scaled);
}
