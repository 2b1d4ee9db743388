#include "cbs/synth.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <iterator>
#include <numeric>
#include <ostream>
#include <random>
#include <thread>

#include "cbs/common.hpp"

namespace cbs {

BiasKind parse_bias_kind(const std::string& name) {
  if (name == "mu_sep") return BiasKind::MuSep;
  if (name == "mu_suf") return BiasKind::MuSuf;
  if (name == "delta") return BiasKind::Delta;
  throw ConfigError("unknown bias kind: " + name + " (expected mu_sep, mu_suf, or delta)");
}

std::string bias_kind_name(BiasKind kind) {
  switch (kind) {
    case BiasKind::MuSep: return "mu_sep";
    case BiasKind::MuSuf: return "mu_suf";
    case BiasKind::Delta: return "delta";
  }
  return "?";
}

CovariateTable make_random_covariates(std::size_t n_rows, const std::vector<int>& arities,
                                      uint64_t seed) {
  if (n_rows == 0) throw ConfigError("covariate table needs at least one row");
  CovariateTable t;
  std::mt19937_64 rng(seed);
  for (std::size_t j = 0; j < arities.size(); ++j) {
    if (arities[j] < 2) throw ConfigError("covariate arity must be >= 2");
    t.attr_names.push_back("attr" + std::to_string(j + 1));
    std::vector<std::string> values;
    for (int v = 0; v < arities[j]; ++v) values.push_back("v" + std::to_string(v + 1));
    t.vocab.push_back(std::move(values));
    std::uniform_int_distribution<int> pick(0, arities[j] - 1);
    auto& col = t.columns.emplace_back();
    col.reserve(n_rows);
    for (std::size_t i = 0; i < n_rows; ++i) col.push_back(static_cast<uint16_t>(pick(rng)));
  }
  return t;
}

CovariateTable covariates_from_dataset(const Dataset& ds) {
  CovariateTable t;
  t.attr_names = ds.attr_names;
  t.vocab = ds.vocab;
  t.columns = ds.columns;
  return t;
}

namespace {

uint8_t draw_outcome(uint64_t seed, uint32_t row_id, int epoch, double true_log_odds) {
  const double u = hashed_uniform(seed, row_id, static_cast<uint64_t>(epoch));
  return u < sigmoid(true_log_odds) ? 1 : 0;
}

}  // namespace

SynthDataset generate_dataset(const CovariateTable& covariates, const SynthSpec& spec) {
  if (covariates.n_rows() == 0) throw ConfigError("covariate table is empty");
  if (covariates.n_attrs() < 2)
    throw ConfigError("need at least two covariate attributes (one becomes the protected class)");
  if (spec.sigma_true < 0.0 || spec.sigma_predict < 0.0)
    throw ConfigError("noise scales must be nonnegative");

  const std::size_t n = covariates.n_rows();
  std::mt19937_64 rng(derive_seed(spec.seed, 0));

  // Protected class: one random attribute-value pair, redrawn while degenerate.
  std::size_t prot_attr = 0;
  uint16_t prot_value = 0;
  bool ok = false;
  for (int attempt = 0; attempt < 10 && !ok; ++attempt) {
    std::uniform_int_distribution<std::size_t> pick_attr(0, covariates.n_attrs() - 1);
    prot_attr = pick_attr(rng);
    std::uniform_int_distribution<int> pick_value(
        0, static_cast<int>(covariates.vocab[prot_attr].size()) - 1);
    prot_value = static_cast<uint16_t>(pick_value(rng));
    std::size_t n_prot = 0;
    for (uint16_t code : covariates.columns[prot_attr]) n_prot += code == prot_value;
    ok = n_prot > 0 && n_prot < n;
  }
  if (!ok) throw DataError("could not find a protected class with both classes non-empty");

  SynthDataset sd;
  sd.seed = spec.seed;
  sd.threshold = spec.threshold;
  sd.protected_attr = covariates.attr_names[prot_attr];
  sd.protected_value = covariates.vocab[prot_attr][prot_value];

  Dataset& ds = sd.data;
  for (std::size_t j = 0; j < covariates.n_attrs(); ++j) {
    if (j == prot_attr) continue;
    ds.attr_names.push_back(covariates.attr_names[j]);
    ds.vocab.push_back(covariates.vocab[j]);
    ds.columns.push_back(covariates.columns[j]);
  }
  ds.protected_flag.resize(n);
  for (std::size_t i = 0; i < n; ++i)
    ds.protected_flag[i] = covariates.columns[prot_attr][i] == prot_value ? 1 : 0;

  std::normal_distribution<double> weight_dist(0.0, spec.weight_sd);
  std::vector<std::vector<double>> weights(ds.n_attrs());
  for (std::size_t j = 0; j < ds.n_attrs(); ++j) {
    weights[j].resize(ds.vocab[j].size());
    for (double& w : weights[j]) w = weight_dist(rng);
  }

  std::normal_distribution<double> true_noise(0.0, spec.sigma_true);
  std::normal_distribution<double> pred_noise(0.0, spec.sigma_predict);
  sd.true_log_odds.resize(n);
  sd.pred_log_odds.resize(n);
  ds.outcome.resize(n);
  ds.prediction.resize(n);
  ds.recommendation.resize(n);
  ds.row_ids.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    double lo = 0.0;
    for (std::size_t j = 0; j < ds.n_attrs(); ++j) lo += weights[j][ds.columns[j][i]];
    if (spec.sigma_true > 0.0) lo += true_noise(rng);
    double pred = lo;
    if (spec.sigma_predict > 0.0) pred += pred_noise(rng);
    sd.true_log_odds[i] = lo;
    sd.pred_log_odds[i] = pred;
    ds.row_ids[i] = static_cast<uint32_t>(i);
    ds.outcome[i] = draw_outcome(spec.seed, ds.row_ids[i], 0, lo);
    ds.prediction[i] = sigmoid(pred);
    ds.recommendation[i] = ds.prediction[i] >= spec.threshold ? 1 : 0;
  }

  sd.s_bias = Subgroup::all_values(ds.vocab);
  sd.in_bias.assign(n, uint8_t{1});
  return sd;
}

Subgroup select_bias_subgroup(const std::vector<std::vector<std::string>>& vocab, int n_bias,
                              double p_bias, uint64_t seed) {
  if (n_bias < 1 || n_bias > static_cast<int>(vocab.size()))
    throw ConfigError("n_bias must be between 1 and the attribute count");
  if (p_bias < 0.0 || p_bias > 1.0) throw ConfigError("p_bias must be in [0, 1]");

  std::mt19937_64 rng(seed);
  std::vector<std::size_t> order(vocab.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::shuffle(order.begin(), order.end(), rng);

  Subgroup sub = Subgroup::all_values(vocab);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  for (int k = 0; k < n_bias; ++k) {
    auto& mask = sub.included[order[static_cast<std::size_t>(k)]];
    int total = 0;
    for (int attempt = 0; attempt < 100 && total == 0; ++attempt) {
      total = 0;
      for (auto& bit : mask) {
        bit = unif(rng) < p_bias ? 1 : 0;
        total += bit;
      }
    }
    if (total == 0) {
      // Degenerate p_bias; force a single random value.
      std::fill(mask.begin(), mask.end(), uint8_t{0});
      std::uniform_int_distribution<std::size_t> pick(0, mask.size() - 1);
      mask[pick(rng)] = 1;
    }
  }
  return sub;
}

SynthDataset inject_bias(const SynthDataset& sd, const Subgroup& s_bias, BiasKind kind,
                         double magnitude) {
  SynthDataset out = sd;
  out.s_bias = s_bias;
  for (std::size_t i = 0; i < sd.data.n_rows(); ++i)
    out.in_bias[i] = s_bias.contains(sd.data.columns, i) ? 1 : 0;
  if (magnitude == 0.0) return out;

  const bool redraw = kind != BiasKind::MuSep;
  const int epoch = redraw ? sd.redraw_epoch + 1 : sd.redraw_epoch;
  out.redraw_epoch = epoch;

  Dataset& ds = out.data;
  for (std::size_t i = 0; i < ds.n_rows(); ++i) {
    if (!ds.protected_flag[i] || !out.in_bias[i]) continue;
    switch (kind) {
      case BiasKind::MuSep:
        out.pred_log_odds[i] += magnitude;
        break;
      case BiasKind::MuSuf:
        out.true_log_odds[i] -= magnitude;
        break;
      case BiasKind::Delta:
        out.true_log_odds[i] += magnitude;
        out.pred_log_odds[i] += magnitude;
        break;
    }
    if (kind != BiasKind::MuSuf) {
      ds.prediction[i] = sigmoid(out.pred_log_odds[i]);
      ds.recommendation[i] = ds.prediction[i] >= sd.threshold ? 1 : 0;
    }
    if (redraw) ds.outcome[i] = draw_outcome(sd.seed, ds.row_ids[i], epoch, out.true_log_odds[i]);
  }
  return out;
}

double jaccard_accuracy(const std::vector<uint32_t>& detected, const std::vector<uint32_t>& truth) {
  std::vector<uint32_t> a = detected, b = truth;
  std::sort(a.begin(), a.end());
  std::sort(b.begin(), b.end());
  std::vector<uint32_t> inter, uni;
  std::set_intersection(a.begin(), a.end(), b.begin(), b.end(), std::back_inserter(inter));
  std::set_union(a.begin(), a.end(), b.begin(), b.end(), std::back_inserter(uni));
  if (uni.empty()) return 1.0;
  return static_cast<double>(inter.size()) / static_cast<double>(uni.size());
}

namespace {

bool is_separation(ScanVariant v) {
  return v == ScanVariant::SeparationPredictions || v == ScanVariant::SeparationRecommendations;
}

struct ReplicateValues {
  std::vector<double> jaccard;  // per variant, NaN on failure
  std::vector<std::string> errors;
};

ReplicateValues run_replicate(const CovariateTable& covariates, const SweepArm& arm,
                              const std::vector<ScanVariant>& variants,
                              const SweepSettings& settings, std::size_t arm_index,
                              int replicate) {
  const uint64_t ds_seed =
      derive_seed(settings.seed, static_cast<uint64_t>(arm_index), static_cast<uint64_t>(replicate));
  SynthSpec spec = arm.spec;
  spec.seed = ds_seed;

  ReplicateValues out;
  out.jaccard.assign(variants.size(), std::nan(""));
  out.errors.resize(variants.size());
  SynthDataset sd;
  try {
    sd = generate_dataset(covariates, spec);
    const Subgroup s_bias =
        select_bias_subgroup(sd.data.vocab, spec.n_bias, spec.p_bias, derive_seed(ds_seed, 1));
    sd = inject_bias(sd, s_bias, arm.kind, arm.magnitude);
  } catch (const std::exception& e) {
    for (auto& err : out.errors) err = e.what();
    return out;
  }

  std::vector<uint32_t> truth;
  for (std::size_t i = 0; i < sd.data.n_rows(); ++i)
    if (sd.data.protected_flag[i] && sd.in_bias[i]) truth.push_back(sd.data.row_ids[i]);

  for (std::size_t v = 0; v < variants.size(); ++v) {
    ScanConfig cfg;
    cfg.variant = variants[v];
    cfg.direction = is_separation(variants[v]) ? Direction::Positive : Direction::Negative;
    cfg.penalty = settings.penalty;
    cfg.n_iterations = settings.n_iterations;
    cfg.seed = derive_seed(ds_seed, 2, static_cast<uint64_t>(v));
    try {
      const ScanResult result = run_audit(sd.data, cfg);
      out.jaccard[v] = jaccard_accuracy(result.member_row_ids, truth);
    } catch (const std::exception& e) {
      out.errors[v] = e.what();
    }
  }
  return out;
}

}  // namespace

std::vector<SweepCell> run_experiment_sweep(const CovariateTable& covariates,
                                            const std::vector<SweepArm>& arms,
                                            const std::vector<ScanVariant>& variants,
                                            const SweepSettings& settings) {
  if (arms.empty() || variants.empty()) throw ConfigError("sweep needs at least one arm and variant");
  if (settings.n_datasets < 1) throw ConfigError("n_datasets must be >= 1");

  const std::size_t n_jobs = arms.size() * static_cast<std::size_t>(settings.n_datasets);
  std::vector<ReplicateValues> results(n_jobs);
  auto run_job = [&](std::size_t job) {
    const std::size_t arm_index = job / static_cast<std::size_t>(settings.n_datasets);
    const int replicate = static_cast<int>(job % static_cast<std::size_t>(settings.n_datasets));
    results[job] =
        run_replicate(covariates, arms[arm_index], variants, settings, arm_index, replicate);
  };

  const int n_threads = std::max(1, std::min<int>(settings.n_threads, static_cast<int>(n_jobs)));
  if (n_threads == 1) {
    for (std::size_t job = 0; job < n_jobs; ++job) run_job(job);
  } else {
    std::vector<std::thread> pool;
    std::atomic<std::size_t> next{0};
    pool.reserve(static_cast<std::size_t>(n_threads));
    for (int t = 0; t < n_threads; ++t)
      pool.emplace_back([&] {
        for (std::size_t job = next.fetch_add(1); job < n_jobs; job = next.fetch_add(1))
          run_job(job);
      });
    for (auto& th : pool) th.join();
  }

  std::vector<SweepCell> cells;
  for (std::size_t a = 0; a < arms.size(); ++a) {
    for (std::size_t v = 0; v < variants.size(); ++v) {
      SweepCell cell;
      cell.arm_id = arms[a].id;
      cell.variant = variant_name(variants[v]);
      cell.kind = bias_kind_name(arms[a].kind);
      cell.magnitude = arms[a].magnitude;
      for (int d = 0; d < settings.n_datasets; ++d) {
        const ReplicateValues& rep =
            results[a * static_cast<std::size_t>(settings.n_datasets) + static_cast<std::size_t>(d)];
        if (std::isnan(rep.jaccard[v])) {
          cell.failures.push_back("replicate " + std::to_string(d) + ": " + rep.errors[v]);
        } else {
          cell.values.push_back(rep.jaccard[v]);
        }
      }
      cell.n = static_cast<int>(cell.values.size());
      if (cell.n > 0) {
        double sum = 0.0;
        for (double x : cell.values) sum += x;
        cell.mean_jaccard = sum / cell.n;
        if (cell.n > 1) {
          double ss = 0.0;
          for (double x : cell.values) ss += (x - cell.mean_jaccard) * (x - cell.mean_jaccard);
          const double sd = std::sqrt(ss / (cell.n - 1));
          cell.ci_half_width = 1.96 * sd / std::sqrt(static_cast<double>(cell.n));
        }
      }
      cells.push_back(std::move(cell));
    }
  }
  return cells;
}

void write_sweep_table(std::ostream& out, const std::vector<SweepCell>& cells, char delimiter) {
  const char d = delimiter;
  out << "arm" << d << "variant" << d << "kind" << d << "magnitude" << d << "mean_jaccard" << d
      << "ci_half_width" << d << "n" << d << "values" << d << "failures\n";
  char buf[64];
  for (const SweepCell& c : cells) {
    out << c.arm_id << d << c.variant << d << c.kind << d << c.magnitude << d;
    std::snprintf(buf, sizeof buf, "%.6f", c.mean_jaccard);
    out << buf << d;
    std::snprintf(buf, sizeof buf, "%.6f", c.ci_half_width);
    out << buf << d << c.n << d;
    for (std::size_t i = 0; i < c.values.size(); ++i) {
      std::snprintf(buf, sizeof buf, "%.4f", c.values[i]);
      out << (i ? ";" : "") << buf;
    }
    out << d << c.failures.size() << "\n";
  }
}

}  // namespace cbs
