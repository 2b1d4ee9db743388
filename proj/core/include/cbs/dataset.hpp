#pragma once

#include <cstdint>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace cbs {

// Canonical tabular audit data: categorical covariates X, protected indicator A,
// binary outcome Y, optional probabilistic prediction P and binary recommendation P_bin.
// Immutable after construction; safe to share across workers.
struct Dataset {
  std::vector<std::string> attr_names;                // covariate attributes X^1..X^m
  std::vector<std::vector<std::string>> vocab;        // per attribute, first-appearance order
  std::vector<std::vector<uint16_t>> columns;         // [attr][row] -> vocab code
  std::vector<uint8_t> protected_flag;                // A
  std::vector<uint8_t> outcome;                       // Y
  std::vector<double> prediction;                     // P, empty when absent
  std::vector<uint8_t> recommendation;                // P_bin, empty when absent
  std::vector<uint32_t> row_ids;                      // original load-order ids, survive filtering

  std::size_t n_rows() const { return outcome.size(); }
  std::size_t n_attrs() const { return attr_names.size(); }
  bool has_prediction() const { return !prediction.empty(); }
  bool has_recommendation() const { return !recommendation.empty(); }
  int attr_index(const std::string& name) const;

  std::size_t count_protected() const;
};

// Column mapping for loading delimited text into a Dataset.
struct SchemaSpec {
  std::vector<std::string> covariates;
  std::string outcome_column;
  std::string prediction_column;       // optional, "" when absent
  std::string recommendation_column;   // optional, "" when absent
  std::string sensitive_column;
  std::string protected_value;
  double binarize_threshold = 0.5;     // P_bin = 1{P >= threshold} when no recommendation column
  char delimiter = ',';
  std::map<std::string, int> bin_columns;  // continuous covariate -> n_bins
  std::string bin_strategy = "equal-frequency";
};

enum class BinStrategy { EqualWidth, EqualFrequency };

BinStrategy parse_bin_strategy(const std::string& name);

// Bins real values into categorical labels. Labels are "bin_1".."bin_k" in
// ascending value order; boundaries (upper edges of all but the last bin) are
// reported through `boundaries` when non-null. Equal-value quantile ties go to
// the lower bin. Sets *warned when all values are identical but n_bins > 1.
std::vector<std::string> discretize_column(const std::vector<double>& values, int n_bins,
                                           BinStrategy strategy,
                                           std::vector<double>* boundaries = nullptr,
                                           bool* warned = nullptr);

Dataset load_dataset(std::istream& source, const SchemaSpec& schema);
Dataset load_dataset_file(const std::string& path, const SchemaSpec& schema);

enum class ConditionalColumn { Outcome, Recommendation };

// Keeps only rows with the conditional column equal to z; vocabularies unchanged.
// Throws DataError when the result lacks A=1 or A=0 rows.
Dataset filter_by_conditional(const Dataset& ds, ConditionalColumn which, int z);

// Canonical on-disk echo: same delimited layout plus the derived A column.
void write_dataset(std::ostream& out, const Dataset& ds, char delimiter = ',');

}  // namespace cbs
