#include <benchmark/benchmark.h>

#include <random>

#include "cbs/common.hpp"
#include "cbs/scan.hpp"

namespace {

cbs::ScanInput make_input(std::size_t n_rows, const std::vector<int>& arities,
                          cbs::Family family) {
  std::mt19937_64 rng(99);
  cbs::ScanInput input;
  input.family = family;
  for (std::size_t j = 0; j < arities.size(); ++j) {
    input.attr_names.push_back("a" + std::to_string(j));
    std::vector<std::string> values;
    for (int v = 0; v < arities[j]; ++v) values.push_back("v" + std::to_string(v));
    input.vocab.push_back(values);
    std::uniform_int_distribution<int> pick(0, arities[j] - 1);
    auto& col = input.columns.emplace_back();
    for (std::size_t i = 0; i < n_rows; ++i) col.push_back(static_cast<uint16_t>(pick(rng)));
  }
  std::uniform_real_distribution<double> unif(0.05, 0.95);
  std::bernoulli_distribution coin(0.4);
  for (std::size_t i = 0; i < n_rows; ++i) {
    const double ih = unif(rng);
    input.expectations.push_back(ih);
    input.row_ids.push_back(static_cast<uint32_t>(i));
    if (family == cbs::Family::Bernoulli) {
      input.events.push_back(coin(rng) ? 1.0 : 0.0);
    } else {
      const double p = unif(rng);
      input.events.push_back(p);
      input.deltas.push_back(cbs::logit(p) - cbs::logit(ih));
    }
  }
  if (family == cbs::Family::Gaussian) input.sigma = cbs::estimate_sigma(input.deltas);
  return input;
}

void BM_ScanBernoulli(benchmark::State& state) {
  const auto input =
      make_input(static_cast<std::size_t>(state.range(0)), {2, 3, 4, 5}, cbs::Family::Bernoulli);
  cbs::ScanSettings settings;
  settings.n_iterations = 10;
  settings.penalty = 1.0;
  for (auto _ : state) benchmark::DoNotOptimize(cbs::scan(input, settings));
}
BENCHMARK(BM_ScanBernoulli)->Arg(500)->Arg(2000)->Arg(8000)->Unit(benchmark::kMillisecond);

void BM_ScanGaussian(benchmark::State& state) {
  const auto input =
      make_input(static_cast<std::size_t>(state.range(0)), {2, 3, 4, 5}, cbs::Family::Gaussian);
  cbs::ScanSettings settings;
  settings.n_iterations = 10;
  settings.penalty = 1.0;
  for (auto _ : state) benchmark::DoNotOptimize(cbs::scan(input, settings));
}
BENCHMARK(BM_ScanGaussian)->Arg(500)->Arg(2000)->Arg(8000)->Unit(benchmark::kMillisecond);

void BM_OptimizeAttribute(benchmark::State& state) {
  const auto input = make_input(4000, {static_cast<int>(state.range(0))}, cbs::Family::Bernoulli);
  const auto all = cbs::Subgroup::all_values(input.vocab);
  for (auto _ : state)
    benchmark::DoNotOptimize(
        cbs::optimize_attribute(input, all, 0, cbs::Direction::Positive, 1.0));
}
BENCHMARK(BM_OptimizeAttribute)->Arg(4)->Arg(8)->Arg(16)->Unit(benchmark::kMicrosecond);

}  // namespace
