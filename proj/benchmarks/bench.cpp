#include <benchmark/benchmark.h>

#include "sgdclt/ensemble.hpp"
#include "sgdclt/lyapunov.hpp"
#include "sgdclt/optimizers.hpp"
#include "sgdclt/stats.hpp"

using namespace sgdclt;

namespace {

void BM_StepLogistic(benchmark::State& state) {
  const auto data = std::make_shared<const LogisticDataset>(generate_logistic(10, 1000, 0.05, 7));
  const auto p = make_logistic(data);
  const auto noise = NoiseModel::minibatch(1);
  const auto s = Schedule::power_law(0.1, 0.5);
  const auto method = static_cast<Method>(state.range(0));
  Stepper stepper(p, noise, s, {method, 0.2, std::nullopt});
  Rng rng(1, 0);
  OptState st = initial_state(method, p.x_star());
  for (auto _ : state) {
    stepper.step(st, rng);
    benchmark::DoNotOptimize(st.x.data());
  }
  state.SetItemsProcessed(state.iterations());
}
BENCHMARK(BM_StepLogistic)->Arg(0)->Arg(1)->Arg(2);

void BM_StepQuadratic(benchmark::State& state) {
  const auto d = state.range(0);
  const auto p = make_quadratic(Matrix::Identity(d, d));
  const auto noise = NoiseModel::additive(Matrix::Identity(d, d), NoiseDistribution::Gaussian);
  const auto s = Schedule::power_law(0.1, 0.5);
  Stepper stepper(p, noise, s, {Method::VSGD, 0.0, std::nullopt});
  Rng rng(1, 0);
  OptState st = initial_state(Method::VSGD, Vector::Zero(d));
  for (auto _ : state) {
    stepper.step(st, rng);
    benchmark::DoNotOptimize(st.x.data());
  }
  state.SetItemsProcessed(state.iterations());
}
BENCHMARK(BM_StepQuadratic)->Arg(1)->Arg(2)->Arg(10);

void BM_SolveGeneral(benchmark::State& state) {
  const auto n = state.range(0);
  Matrix M = Matrix::Random(n, n) / std::sqrt(static_cast<double>(n)) + 2.0 * Matrix::Identity(n, n);
  const Matrix S = Matrix::Identity(n, n);
  for (auto _ : state) benchmark::DoNotOptimize(solve_general(M, S, 0.0).W.data());
}
BENCHMARK(BM_SolveGeneral)->Arg(4)->Arg(10)->Arg(20);

void BM_ShapiroWilk(benchmark::State& state) {
  Rng rng(2, 0);
  std::vector<double> x(static_cast<std::size_t>(state.range(0)));
  for (auto& v : x) v = rng.normal();
  for (auto _ : state) benchmark::DoNotOptimize(shapiro_wilk(x).W);
}
BENCHMARK(BM_ShapiroWilk)->Arg(100)->Arg(1000)->Arg(5000);

}  // namespace
BENCHMARK_MAIN();
