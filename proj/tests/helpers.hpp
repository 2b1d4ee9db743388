#pragma once

#include <cmath>
#include <random>
#include <string>
#include <vector>

#include "cbs/scan.hpp"

namespace cbs::testing {

// Random scan instance over the given attribute arities.
inline ScanInput random_scan_input(std::mt19937_64& rng, std::size_t n_rows,
                                   const std::vector<int>& arities, Family family) {
  ScanInput input;
  input.family = family;
  for (std::size_t j = 0; j < arities.size(); ++j) {
    input.attr_names.push_back("a" + std::to_string(j + 1));
    std::vector<std::string> values;
    for (int v = 0; v < arities[j]; ++v) values.push_back("v" + std::to_string(v + 1));
    input.vocab.push_back(std::move(values));
    std::uniform_int_distribution<int> pick(0, arities[j] - 1);
    auto& col = input.columns.emplace_back();
    for (std::size_t i = 0; i < n_rows; ++i) col.push_back(static_cast<uint16_t>(pick(rng)));
  }
  std::uniform_real_distribution<double> unif(0.05, 0.95);
  std::bernoulli_distribution coin(0.5);
  for (std::size_t i = 0; i < n_rows; ++i) {
    const double ih = unif(rng);
    input.expectations.push_back(ih);
    input.row_ids.push_back(static_cast<uint32_t>(i));
    if (family == Family::Bernoulli) {
      input.events.push_back(coin(rng) ? 1.0 : 0.0);
    } else {
      const double p = unif(rng);
      input.events.push_back(p);
      input.deltas.push_back(logit(p) - logit(ih));
    }
  }
  if (family == Family::Gaussian) input.sigma = estimate_sigma(input.deltas);
  return input;
}

// Exhaustive maximum of the penalized score over every combination of
// non-empty value subsets; feasible only for small vocabularies.
inline double brute_force_best(const ScanInput& input, Direction dir, double lambda) {
  const std::size_t m = input.n_attrs();
  std::vector<uint32_t> masks(m), limits(m);
  for (std::size_t j = 0; j < m; ++j) {
    limits[j] = (1u << input.vocab[j].size()) - 1;
    masks[j] = 1;
  }
  double best = -1e300;
  while (true) {
    Subgroup sub;
    for (std::size_t j = 0; j < m; ++j) {
      std::vector<uint8_t> inc(input.vocab[j].size());
      for (std::size_t v = 0; v < inc.size(); ++v) inc[v] = (masks[j] >> v) & 1u;
      sub.included.push_back(std::move(inc));
    }
    best = std::max(best, score_subgroup(input, sub, dir, lambda).first);

    std::size_t j = 0;
    while (j < m) {
      if (++masks[j] <= limits[j]) break;
      masks[j] = 1;
      ++j;
    }
    if (j == m) break;
  }
  return best;
}

}  // namespace cbs::testing
