#include <benchmark/benchmark.h>

#include <random>

#include "cbs/expectation.hpp"

namespace {

void BM_WeightedLogistic(benchmark::State& state) {
  const auto n = static_cast<Eigen::Index>(state.range(0));
  const Eigen::Index p = 12;
  std::mt19937_64 rng(7);
  std::normal_distribution<double> norm(0.0, 1.0);
  std::uniform_real_distribution<double> unif(0.2, 3.0);
  Eigen::MatrixXd x(n, p);
  Eigen::VectorXd y(n), w(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    x(i, 0) = 1.0;
    for (Eigen::Index j = 1; j < p; ++j) x(i, j) = norm(rng);
    y(i) = norm(rng) > 0 ? 1.0 : 0.0;
    w(i) = unif(rng);
  }
  cbs::IrlsOptions opts;
  for (auto _ : state)
    benchmark::DoNotOptimize(cbs::irls_weighted_logistic(x, y, w, opts));
}
BENCHMARK(BM_WeightedLogistic)->Arg(1000)->Arg(6000)->Arg(20000)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
