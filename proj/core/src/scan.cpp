#include "cbs/scan.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <random>
#include <thread>

#include "cbs/common.hpp"

namespace cbs {

namespace {

constexpr double kImprove = 1e-12;

// Prefers higher score, then fewer included values, then earlier values.
bool mask_precedes(const std::vector<uint8_t>& a, const std::vector<uint8_t>& b) {
  int na = 0, nb = 0;
  for (uint8_t v : a) na += v;
  for (uint8_t v : b) nb += v;
  if (na != nb) return na < nb;
  for (std::size_t v = 0; v < a.size(); ++v)
    if (a[v] != b[v]) return a[v] > b[v];
  return false;
}

bool subgroup_precedes(const Subgroup& a, const Subgroup& b) {
  const int na = a.total_included(), nb = b.total_included();
  if (na != nb) return na < nb;
  for (std::size_t j = 0; j < a.included.size(); ++j)
    if (a.included[j] != b.included[j]) return mask_precedes(a.included[j], b.included[j]);
  return false;
}

struct IterationResult {
  Subgroup subgroup;
  double score = 0.0;
  double theta = 0.0;
};

}  // namespace

Subgroup Subgroup::all_values(const std::vector<std::vector<std::string>>& vocab) {
  Subgroup s;
  s.included.reserve(vocab.size());
  for (const auto& values : vocab) s.included.emplace_back(values.size(), uint8_t{1});
  return s;
}

bool Subgroup::contains(const std::vector<std::vector<uint16_t>>& columns, std::size_t row) const {
  for (std::size_t j = 0; j < included.size(); ++j)
    if (!included[j][columns[j][row]]) return false;
  return true;
}

int Subgroup::included_count(std::size_t attr) const {
  int n = 0;
  for (uint8_t v : included[attr]) n += v;
  return n;
}

int Subgroup::total_included() const {
  int n = 0;
  for (std::size_t j = 0; j < included.size(); ++j) n += included_count(j);
  return n;
}

bool Subgroup::attribute_is_full(std::size_t attr) const {
  return included_count(attr) == static_cast<int>(included[attr].size());
}

std::vector<std::pair<int, int>> Subgroup::included_arity() const {
  std::vector<std::pair<int, int>> out;
  out.reserve(included.size());
  for (std::size_t j = 0; j < included.size(); ++j)
    out.emplace_back(included_count(j), static_cast<int>(included[j].size()));
  return out;
}

std::vector<std::size_t> subgroup_members(const ScanInput& input, const Subgroup& sub) {
  std::vector<std::size_t> rows;
  for (std::size_t i = 0; i < input.n_rows(); ++i)
    if (sub.contains(input.columns, i)) rows.push_back(i);
  return rows;
}

std::pair<double, double> score_subgroup(const ScanInput& input, const Subgroup& sub,
                                         Direction dir, double lambda) {
  SubsetStats stats;
  for (std::size_t i = 0; i < input.n_rows(); ++i) {
    if (!sub.contains(input.columns, i)) continue;
    if (input.family == Family::Bernoulli)
      stats.add_bernoulli(input.events[i], input.expectations[i]);
    else
      stats.add_gaussian(input.deltas[i]);
  }
  const double penalty = subgroup_penalty(sub.included_arity(), lambda);
  if (stats.empty()) return {-penalty, input.family == Family::Bernoulli ? 1.0 : 0.0};
  const auto [f, theta] = input.family == Family::Bernoulli
                              ? bernoulli_score(stats, dir)
                              : gaussian_score(stats, input.sigma, dir);
  return {f - penalty, theta};
}

AttributeStep optimize_attribute(const ScanInput& input, const Subgroup& current,
                                 std::size_t attr, Direction dir, double lambda) {
  const std::size_t arity = input.vocab[attr].size();

  // Cells restricted to rows matching the other attributes' inclusion sets.
  std::vector<SubsetStats> cells(arity);
  for (std::size_t i = 0; i < input.n_rows(); ++i) {
    bool match = true;
    for (std::size_t j = 0; j < input.n_attrs() && match; ++j)
      if (j != attr && !current.included[j][input.columns[j][i]]) match = false;
    if (!match) continue;
    SubsetStats& cell = cells[input.columns[attr][i]];
    if (input.family == Family::Bernoulli)
      cell.add_bernoulli(input.events[i], input.expectations[i]);
    else
      cell.add_gaussian(input.deltas[i]);
  }

  // Penalty contributed by the attributes held fixed.
  double other_penalty = 0.0;
  for (std::size_t j = 0; j < input.n_attrs(); ++j)
    if (j != attr && !current.attribute_is_full(j))
      other_penalty += lambda * current.included_count(j);

  std::vector<std::optional<ThetaProfile>> profiles(arity);
  std::vector<double> crossings;
  for (std::size_t v = 0; v < arity; ++v) {
    profiles[v] = input.family == Family::Bernoulli
                      ? bernoulli_profile(cells[v], dir, lambda)
                      : gaussian_profile(cells[v], input.sigma, dir, lambda);
    if (profiles[v]) {
      crossings.push_back(profiles[v]->theta_min);
      crossings.push_back(profiles[v]->theta_max);
    }
  }
  std::sort(crossings.begin(), crossings.end());
  crossings.erase(std::unique(crossings.begin(), crossings.end()), crossings.end());

  AttributeStep best;
  bool have_best = false;
  auto consider = [&](const std::vector<uint8_t>& mask, double score, double theta) {
    if (!have_best || score > best.score + kImprove ||
        (score > best.score - kImprove && mask_precedes(mask, best.included))) {
      best.included = mask;
      best.score = score;
      best.theta = theta;
      have_best = true;
    }
  };

  // All-values subset: the attribute carries no penalty when fully included.
  {
    StatsGroup all;
    for (const SubsetStats& c : cells)
      if (!c.empty()) all.push_back(&c);
    double f = 0.0, theta = input.family == Family::Bernoulli ? 1.0 : 0.0;
    if (!all.empty()) {
      if (input.family == Family::Bernoulli) {
        std::tie(f, theta) = bernoulli_score(all, dir);
      } else {
        SubsetStats merged;
        for (const SubsetStats* c : all) {
          merged.sum_delta += c->sum_delta;
          merged.count += c->count;
        }
        std::tie(f, theta) = gaussian_score(merged, input.sigma, dir);
      }
    }
    consider(std::vector<uint8_t>(arity, uint8_t{1}), f - other_penalty, theta);
  }

  AttributeStep result;
  // Between consecutive crossings the set of penalty-clearing cells is constant;
  // aggregate them at the interval midpoint and rescore at the aggregate's own MLE.
  for (std::size_t k = 0; k + 1 < crossings.size(); ++k) {
    const double mid = 0.5 * (crossings[k] + crossings[k + 1]);
    ++result.n_intervals;
    std::vector<uint8_t> mask(arity, uint8_t{0});
    StatsGroup group;
    int n_included = 0;
    for (std::size_t v = 0; v < arity; ++v) {
      if (!profiles[v]) continue;
      if (profiles[v]->theta_min < mid && mid < profiles[v]->theta_max) {
        mask[v] = 1;
        group.push_back(&cells[v]);
        ++n_included;
      }
    }
    if (group.empty()) continue;
    ++result.n_aggregate_evals;
    double f, theta;
    if (input.family == Family::Bernoulli) {
      std::tie(f, theta) = bernoulli_score(group, dir);
    } else {
      SubsetStats merged;
      for (const SubsetStats* c : group) {
        merged.sum_delta += c->sum_delta;
        merged.count += c->count;
      }
      std::tie(f, theta) = gaussian_score(merged, input.sigma, dir);
    }
    const double own_penalty = n_included == static_cast<int>(arity) ? 0.0 : lambda * n_included;
    consider(mask, f - own_penalty - other_penalty, theta);
  }

  result.included = std::move(best.included);
  result.score = best.score;
  result.theta = best.theta;
  return result;
}

namespace {

IterationResult run_iteration(const ScanInput& input, const ScanSettings& settings, int iter) {
  std::mt19937_64 rng(derive_seed(settings.seed, static_cast<uint64_t>(iter)));
  const std::size_t n_attrs = input.n_attrs();

  Subgroup sub = Subgroup::all_values(input.vocab);
  if (iter > 0) {
    // Random restart: each value included with probability 1/2, redrawn until
    // the attribute keeps at least one value.
    std::uniform_int_distribution<int> coin(0, 1);
    for (std::size_t j = 0; j < n_attrs; ++j) {
      int total = 0;
      do {
        total = 0;
        for (auto& bit : sub.included[j]) {
          bit = static_cast<uint8_t>(coin(rng));
          total += bit;
        }
      } while (total == 0);
    }
  }

  auto [score, theta] = score_subgroup(input, sub, settings.direction, settings.penalty);

  std::vector<uint8_t> scanned(n_attrs, uint8_t{0});
  std::size_t n_scanned = 0;
  while (n_scanned < n_attrs) {
    std::uniform_int_distribution<std::size_t> pick(0, n_attrs - n_scanned - 1);
    std::size_t skip = pick(rng), attr = 0;
    for (std::size_t j = 0; j < n_attrs; ++j) {
      if (scanned[j]) continue;
      if (skip == 0) {
        attr = j;
        break;
      }
      --skip;
    }

    AttributeStep step = optimize_attribute(input, sub, attr, settings.direction,
                                            settings.penalty);
    if (step.score > score + kImprove) {
      sub.included[attr] = step.included;
      score = step.score;
      theta = step.theta;
      std::fill(scanned.begin(), scanned.end(), uint8_t{0});
      n_scanned = 0;
    }
    scanned[attr] = 1;
    ++n_scanned;
  }

  return {std::move(sub), score, theta};
}

}  // namespace

ScanOutcome scan(const ScanInput& input, const ScanSettings& settings) {
  if (settings.n_iterations < 1) throw ConfigError("scan: n_iterations must be >= 1");
  if (input.n_attrs() == 0) throw DataError("scan: no attributes to scan");
  if (input.family == Family::Gaussian && input.deltas.size() != input.n_rows())
    throw DataError("scan: Gaussian input requires one delta per row");

  const int n_iters = settings.n_iterations;
  std::vector<IterationResult> results(static_cast<std::size_t>(n_iters));

  const int n_threads = std::max(1, std::min(settings.n_threads, n_iters));
  if (n_threads == 1) {
    for (int j = 0; j < n_iters; ++j) results[j] = run_iteration(input, settings, j);
  } else {
    std::vector<std::thread> pool;
    std::atomic<int> next{0};
    pool.reserve(static_cast<std::size_t>(n_threads));
    for (int t = 0; t < n_threads; ++t)
      pool.emplace_back([&] {
        for (int j = next.fetch_add(1); j < n_iters; j = next.fetch_add(1))
          results[j] = run_iteration(input, settings, j);
      });
    for (auto& th : pool) th.join();
  }

  ScanOutcome best;
  bool have = false;
  for (int j = 0; j < n_iters; ++j) {
    const IterationResult& r = results[j];
    const bool better =
        !have || r.score > best.score + kImprove ||
        (r.score > best.score - kImprove && subgroup_precedes(r.subgroup, best.subgroup));
    if (better) {
      best.subgroup = r.subgroup;
      best.score = r.score;
      best.theta = r.theta;
      best.found_iteration = j;
      have = true;
    }
  }
  return best;
}

}  // namespace cbs
