#pragma once

#include <cstdint>
#include <vector>

#include "cbs/pipeline.hpp"

namespace cbs {

struct PermutationReport {
  double observed_score = 0.0;
  std::vector<double> null_scores;  // one max score per permutation
  std::vector<uint64_t> replicate_seeds;
  double p_value = 1.0;
  double alpha = 0.05;
  bool reject = false;
  int redraws = 0;  // replicates redrawn because the conditional filter emptied a class
};

// Shuffles the protected indicator uniformly, re-runs the full pipeline on each
// null dataset, and compares the observed score against the null maxima.
// p = (1 + #{null >= observed}) / (n_perm + 1). Deterministic in (seed, n_perm)
// regardless of thread count.
PermutationReport permutation_test(const Dataset& ds, const ScanConfig& cfg, int n_perm,
                                   double alpha, uint64_t seed);

// The dataset with its A column replaced by a uniform permutation.
Dataset permute_protected(const Dataset& ds, uint64_t seed);

}  // namespace cbs
