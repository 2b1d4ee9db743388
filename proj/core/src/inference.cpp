#include "cbs/inference.hpp"

#include <algorithm>
#include <atomic>
#include <mutex>
#include <numeric>
#include <random>
#include <thread>

#include "cbs/common.hpp"

namespace cbs {

Dataset permute_protected(const Dataset& ds, uint64_t seed) {
  std::mt19937_64 rng(seed);
  Dataset out = ds;
  std::vector<std::size_t> order(ds.n_rows());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::shuffle(order.begin(), order.end(), rng);
  for (std::size_t i = 0; i < order.size(); ++i)
    out.protected_flag[i] = ds.protected_flag[order[i]];
  return out;
}

namespace {

constexpr int kMaxRedraws = 10;

struct Replicate {
  double score = 0.0;
  uint64_t seed = 0;
  int redraws = 0;
};

Replicate run_replicate(const Dataset& ds, const ScanConfig& cfg, uint64_t master, int index) {
  Replicate rep;
  for (int attempt = 0;; ++attempt) {
    rep.seed = derive_seed(master, static_cast<uint64_t>(index),
                           static_cast<uint64_t>(attempt));
    Dataset null_ds = permute_protected(ds, rep.seed);
    try {
      rep.score = run_audit(null_ds, cfg).score;
      rep.redraws = attempt;
      return rep;
    } catch (const DataError&) {
      // Conditional filter emptied a class under this shuffle; redraw.
      if (attempt + 1 >= kMaxRedraws)
        throw DataError("permutation replicate " + std::to_string(index) + " failed after " +
                        std::to_string(kMaxRedraws) + " redraws");
    }
  }
}

}  // namespace

PermutationReport permutation_test(const Dataset& ds, const ScanConfig& cfg, int n_perm,
                                   double alpha, uint64_t seed) {
  if (n_perm < 1) throw ConfigError("n_perm must be >= 1");
  if (!(alpha > 0.0 && alpha < 1.0)) throw ConfigError("alpha must be in (0, 1)");

  PermutationReport report;
  report.alpha = alpha;
  report.observed_score = run_audit(ds, cfg).score;

  std::vector<Replicate> reps(static_cast<std::size_t>(n_perm));
  const int n_threads = std::max(1, std::min(cfg.n_threads, n_perm));
  ScanConfig rep_cfg = cfg;
  rep_cfg.n_threads = 1;  // parallelism lives at the replicate level here
  if (n_threads == 1) {
    for (int k = 0; k < n_perm; ++k) reps[k] = run_replicate(ds, rep_cfg, seed, k);
  } else {
    std::vector<std::thread> pool;
    std::atomic<int> next{0};
    std::exception_ptr error;
    std::mutex error_mutex;
    pool.reserve(static_cast<std::size_t>(n_threads));
    for (int t = 0; t < n_threads; ++t)
      pool.emplace_back([&] {
        try {
          for (int k = next.fetch_add(1); k < n_perm; k = next.fetch_add(1))
            reps[k] = run_replicate(ds, rep_cfg, seed, k);
        } catch (...) {
          std::lock_guard<std::mutex> lock(error_mutex);
          if (!error) error = std::current_exception();
        }
      });
    for (auto& th : pool) th.join();
    if (error) std::rethrow_exception(error);
  }

  int n_ge = 0;
  for (const Replicate& rep : reps) {
    report.null_scores.push_back(rep.score);
    report.replicate_seeds.push_back(rep.seed);
    report.redraws += rep.redraws;
    if (rep.score >= report.observed_score) ++n_ge;
  }
  report.p_value = (1.0 + n_ge) / static_cast<double>(n_perm + 1);
  report.reject = report.p_value <= alpha;
  return report;
}

}  // namespace cbs
