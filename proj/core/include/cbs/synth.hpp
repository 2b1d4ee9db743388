#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "cbs/dataset.hpp"
#include "cbs/pipeline.hpp"
#include "cbs/scan.hpp"

namespace cbs {

// Categorical covariate table feeding the generator; either sampled uniformly
// or lifted from a real dataset's covariates.
struct CovariateTable {
  std::vector<std::string> attr_names;
  std::vector<std::vector<std::string>> vocab;
  std::vector<std::vector<uint16_t>> columns;  // [attr][row]

  std::size_t n_rows() const { return columns.empty() ? 0 : columns[0].size(); }
  std::size_t n_attrs() const { return attr_names.size(); }
};

CovariateTable make_random_covariates(std::size_t n_rows, const std::vector<int>& arities,
                                      uint64_t seed);
CovariateTable covariates_from_dataset(const Dataset& ds);

struct SynthSpec {
  double sigma_true = 0.6;
  double sigma_predict = 0.2;
  double weight_sd = 0.2;  // attribute-value weight scale (standard deviation)
  int n_bias = 2;
  double p_bias = 0.5;
  double threshold = 0.5;
  uint64_t seed = 0;
};

// A generated dataset plus its ground truth: per-row log-odds and the injected
// subgroup. Covariates exclude the attribute consumed by the protected class.
struct SynthDataset {
  Dataset data;
  std::vector<double> true_log_odds;
  std::vector<double> pred_log_odds;
  Subgroup s_bias;               // over data.attr_names; all-values until selected
  std::vector<uint8_t> in_bias;  // membership of s_bias, per row
  std::string protected_attr;
  std::string protected_value;
  double threshold = 0.5;  // recommendation cutoff, reused when injections recompute P_bin
  uint64_t seed = 0;
  int redraw_epoch = 0;  // bumped by each outcome-redrawing injection
};

enum class BiasKind { MuSep, MuSuf, Delta };
BiasKind parse_bias_kind(const std::string& name);
std::string bias_kind_name(BiasKind kind);

// Draws one attribute-value weight per (attribute, value) from N(0, weight_sd),
// per-row noise, outcomes, predictions, and the protected-class definition
// (random attribute + value, redrawn up to 10 times if a class would be empty).
SynthDataset generate_dataset(const CovariateTable& covariates, const SynthSpec& spec);

// n_bias randomly chosen attributes get Bernoulli(p_bias)-included value sets,
// redrawn while empty; the rest include all values.
Subgroup select_bias_subgroup(const std::vector<std::vector<std::string>>& vocab, int n_bias,
                              double p_bias, uint64_t seed);

// Applies one injection to rows with A=1 inside s_bias. mu_sep shifts
// predicted log-odds; mu_suf lowers true log-odds and redraws Y; delta shifts
// both and redraws Y. Magnitude 0 returns the input unchanged.
SynthDataset inject_bias(const SynthDataset& sd, const Subgroup& s_bias, BiasKind kind,
                         double magnitude);

double jaccard_accuracy(const std::vector<uint32_t>& detected, const std::vector<uint32_t>& truth);

struct SweepArm {
  std::string id;
  SynthSpec spec;
  BiasKind kind = BiasKind::MuSep;
  double magnitude = 0.0;
};

struct SweepCell {
  std::string arm_id;
  std::string variant;
  std::string kind;
  double magnitude = 0.0;
  double mean_jaccard = 0.0;
  double ci_half_width = 0.0;  // 95% normal approximation
  int n = 0;
  std::vector<double> values;
  std::vector<std::string> failures;
};

struct SweepSettings {
  int n_datasets = 20;
  int n_iterations = 50;
  double penalty = 1.0;
  uint64_t seed = 0;
  int n_threads = 1;
};

// Runs every arm x variant cell: generate, select S_bias, inject, audit, score
// Jaccard of detected vs injected protected rows. Scan direction is positive
// for separation variants and negative for sufficiency variants. Failures are
// recorded per replicate, not fatal.
std::vector<SweepCell> run_experiment_sweep(const CovariateTable& covariates,
                                            const std::vector<SweepArm>& arms,
                                            const std::vector<ScanVariant>& variants,
                                            const SweepSettings& settings);

void write_sweep_table(std::ostream& out, const std::vector<SweepCell>& cells,
                       char delimiter = '\t');

}  // namespace cbs
