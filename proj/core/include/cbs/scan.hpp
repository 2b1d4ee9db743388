#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "cbs/score.hpp"

namespace cbs {

// A conjunction of non-empty included-value sets, one per scan attribute. A row
// belongs to the subgroup iff every attribute's value is included.
struct Subgroup {
  std::vector<std::vector<uint8_t>> included;  // [attr][value] -> 0/1

  static Subgroup all_values(const std::vector<std::vector<std::string>>& vocab);

  bool contains(const std::vector<std::vector<uint16_t>>& columns, std::size_t row) const;
  int included_count(std::size_t attr) const;
  int total_included() const;
  bool attribute_is_full(std::size_t attr) const;
  std::vector<std::pair<int, int>> included_arity() const;

  bool operator==(const Subgroup& other) const { return included == other.included; }
};

// Protected-class rows handed to the scanner: covariate codes, event values I,
// clamped expectations i_hat, and (Gaussian) precomputed log-odds gaps.
struct ScanInput {
  std::vector<std::string> attr_names;
  std::vector<std::vector<std::string>> vocab;
  std::vector<std::vector<uint16_t>> columns;  // [attr][row]
  std::vector<double> events;
  std::vector<double> expectations;
  std::vector<double> deltas;  // logit(I) - logit(i_hat); Gaussian family only
  std::vector<uint32_t> row_ids;
  Family family = Family::Bernoulli;
  double sigma = 1.0;

  std::size_t n_rows() const { return events.size(); }
  std::size_t n_attrs() const { return attr_names.size(); }
};

struct ScanSettings {
  Direction direction = Direction::Positive;
  double penalty = 0.0;
  int n_iterations = 1;
  uint64_t seed = 0;
  int n_threads = 1;
};

struct ScanOutcome {
  Subgroup subgroup;
  double score = 0.0;  // penalized
  double theta = 0.0;  // q (Bernoulli) or mu (Gaussian)
  int found_iteration = 0;
};

// One coordinate-ascent step: the optimal value subset for `attr` conditioned on
// the other attributes' current inclusion sets. `score` is the full penalized
// subgroup score with the attribute replaced by `included`.
struct AttributeStep {
  std::vector<uint8_t> included;
  double score = 0.0;
  double theta = 0.0;
  int n_intervals = 0;
  int n_aggregate_evals = 0;
};

AttributeStep optimize_attribute(const ScanInput& input, const Subgroup& current,
                                 std::size_t attr, Direction dir, double lambda);

// Re-scores a subgroup from scratch: (penalized score, theta).
std::pair<double, double> score_subgroup(const ScanInput& input, const Subgroup& sub,
                                         Direction dir, double lambda);

// Multi-restart coordinate ascent; deterministic for fixed (input, settings)
// regardless of thread count.
ScanOutcome scan(const ScanInput& input, const ScanSettings& settings);

// Row positions (indices into the input) covered by a subgroup.
std::vector<std::size_t> subgroup_members(const ScanInput& input, const Subgroup& sub);

}  // namespace cbs
