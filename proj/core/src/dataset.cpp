#include "cbs/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <istream>
#include <limits>
#include <ostream>
#include <sstream>
#include <unordered_map>

#include "cbs/common.hpp"

namespace cbs {

namespace {

const std::string kMissingLabel = "(missing)";

// Splits one delimited line; double quotes protect embedded delimiters.
std::vector<std::string> split_line(const std::string& line, char delim) {
  std::vector<std::string> out;
  std::string field;
  bool in_quotes = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (c == '"') {
      if (in_quotes && i + 1 < line.size() && line[i + 1] == '"') {
        field.push_back('"');
        ++i;
      } else {
        in_quotes = !in_quotes;
      }
    } else if (c == delim && !in_quotes) {
      out.push_back(field);
      field.clear();
    } else if (c == '\r' && i + 1 == line.size()) {
      // strip trailing CR
    } else {
      field.push_back(c);
    }
  }
  out.push_back(field);
  return out;
}

bool parse_double(const std::string& s, double* out) {
  try {
    std::size_t pos = 0;
    *out = std::stod(s, &pos);
    while (pos < s.size() && std::isspace(static_cast<unsigned char>(s[pos]))) ++pos;
    return pos == s.size();
  } catch (const std::exception&) {
    return false;
  }
}

int find_column(const std::vector<std::string>& header, const std::string& name) {
  for (std::size_t i = 0; i < header.size(); ++i)
    if (header[i] == name) return static_cast<int>(i);
  return -1;
}

}  // namespace

int Dataset::attr_index(const std::string& name) const {
  for (std::size_t i = 0; i < attr_names.size(); ++i)
    if (attr_names[i] == name) return static_cast<int>(i);
  return -1;
}

std::size_t Dataset::count_protected() const {
  std::size_t c = 0;
  for (uint8_t a : protected_flag) c += a;
  return c;
}

BinStrategy parse_bin_strategy(const std::string& name) {
  if (name == "equal-width") return BinStrategy::EqualWidth;
  if (name == "equal-frequency") return BinStrategy::EqualFrequency;
  throw ConfigError("unknown binning strategy: " + name);
}

std::vector<std::string> discretize_column(const std::vector<double>& values, int n_bins,
                                           BinStrategy strategy,
                                           std::vector<double>* boundaries, bool* warned) {
  if (n_bins < 1) throw ConfigError("n_bins must be >= 1");
  if (values.empty()) throw DataError("discretize_column: empty value list");
  if (warned) *warned = false;

  std::vector<double> sorted(values);
  std::sort(sorted.begin(), sorted.end());
  sorted.erase(std::unique(sorted.begin(), sorted.end()), sorted.end());
  const std::size_t distinct = sorted.size();
  const int k = static_cast<int>(std::min<std::size_t>(n_bins, distinct));
  if (distinct == 1 && n_bins > 1 && warned) *warned = true;

  std::vector<double> cuts;  // upper boundary of each bin but the last
  if (k > 1) {
    if (strategy == BinStrategy::EqualWidth) {
      const double lo = sorted.front(), hi = sorted.back();
      for (int j = 1; j < k; ++j) cuts.push_back(lo + (hi - lo) * j / k);
    } else {
      std::vector<double> all(values);
      std::sort(all.begin(), all.end());
      const std::size_t n = all.size();
      for (int j = 1; j < k; ++j) cuts.push_back(all[n * j / k - (n * j % k == 0 ? 1 : 0)]);
      cuts.erase(std::unique(cuts.begin(), cuts.end()), cuts.end());
    }
  }
  if (boundaries) *boundaries = cuts;

  // Raw bin index = number of cut points strictly below the value, so equal
  // values always land in the same (lower) bin.
  std::vector<int> raw(values.size());
  std::vector<char> used(cuts.size() + 1, 0);
  for (std::size_t i = 0; i < values.size(); ++i) {
    int b = 0;
    if (strategy == BinStrategy::EqualWidth) {
      for (double c : cuts)
        if (values[i] > c) ++b;
    } else {
      for (double c : cuts)
        if (values[i] > c) ++b;
    }
    raw[i] = b;
    used[b] = 1;
  }
  // Compact away bins emptied by ties, keeping monotone order.
  std::vector<int> remap(used.size(), -1);
  int next = 0;
  for (std::size_t b = 0; b < used.size(); ++b)
    if (used[b]) remap[b] = next++;

  std::vector<std::string> labels(values.size());
  for (std::size_t i = 0; i < values.size(); ++i)
    labels[i] = "bin_" + std::to_string(remap[raw[i]] + 1);
  return labels;
}

Dataset load_dataset(std::istream& source, const SchemaSpec& schema) {
  for (const auto& cov : schema.covariates) {
    if (cov == schema.outcome_column)
      throw ConfigError("outcome column '" + cov + "' may not also be a covariate");
    if (cov == schema.sensitive_column)
      throw ConfigError("sensitive column '" + cov + "' may not also be a covariate");
  }
  if (schema.prediction_column.empty() && schema.recommendation_column.empty())
    throw ConfigError("at least one of prediction/recommendation columns is required");

  std::string header_line;
  if (!std::getline(source, header_line)) throw DataError("empty input: no header row");
  const auto header = split_line(header_line, schema.delimiter);

  auto require = [&](const std::string& name) {
    const int idx = find_column(header, name);
    if (idx < 0) throw DataError("schema error: column '" + name + "' not found");
    return idx;
  };

  std::vector<int> cov_idx;
  for (const auto& cov : schema.covariates) cov_idx.push_back(require(cov));
  const int out_idx = require(schema.outcome_column);
  const int sens_idx = require(schema.sensitive_column);
  const int pred_idx = schema.prediction_column.empty() ? -1 : require(schema.prediction_column);
  const int rec_idx =
      schema.recommendation_column.empty() ? -1 : require(schema.recommendation_column);

  Dataset ds;
  ds.attr_names = schema.covariates;
  ds.vocab.resize(ds.attr_names.size());
  ds.columns.resize(ds.attr_names.size());
  std::vector<std::unordered_map<std::string, uint16_t>> code_of(ds.attr_names.size());

  // Raw values for covariates that need binning are collected first.
  std::vector<int> bin_attr;  // attr positions requiring discretization
  for (std::size_t a = 0; a < ds.attr_names.size(); ++a)
    if (schema.bin_columns.count(ds.attr_names[a])) bin_attr.push_back(static_cast<int>(a));
  std::vector<std::vector<double>> bin_raw(ds.attr_names.size());

  std::string line;
  std::size_t data_row = 0;
  bool saw_protected = false, saw_nonprotected = false;
  while (std::getline(source, line)) {
    ++data_row;
    if (line.empty()) continue;
    const auto fields = split_line(line, schema.delimiter);
    if (fields.size() != header.size())
      throw DataError("row " + std::to_string(data_row) + ": expected " +
                      std::to_string(header.size()) + " fields, got " +
                      std::to_string(fields.size()));

    // Rows missing a required field are rejected (not an error).
    const std::string& sens = fields[sens_idx];
    const std::string& outc = fields[out_idx];
    if (sens.empty() || outc.empty()) continue;
    if (pred_idx >= 0 && fields[pred_idx].empty()) continue;
    if (rec_idx >= 0 && fields[rec_idx].empty()) continue;

    double y;
    if (!parse_double(outc, &y) || (y != 0.0 && y != 1.0))
      throw DataError("row " + std::to_string(data_row) + ": outcome '" + outc +
                      "' not in {0,1}");
    double p = 0.0;
    if (pred_idx >= 0) {
      if (!parse_double(fields[pred_idx], &p))
        throw DataError("row " + std::to_string(data_row) + ": non-numeric prediction '" +
                        fields[pred_idx] + "'");
      if (p < 0.0 || p > 1.0)
        throw DataError("row " + std::to_string(data_row) + ": prediction " +
                        fields[pred_idx] + " outside [0,1]");
    }
    double pb = 0.0;
    if (rec_idx >= 0) {
      if (!parse_double(fields[rec_idx], &pb) || (pb != 0.0 && pb != 1.0))
        throw DataError("row " + std::to_string(data_row) + ": recommendation '" +
                        fields[rec_idx] + "' not in {0,1}");
    }

    for (std::size_t a = 0; a < ds.attr_names.size(); ++a) {
      std::string v = fields[cov_idx[a]];
      if (v.empty()) v = kMissingLabel;
      if (schema.bin_columns.count(ds.attr_names[a])) {
        double x;
        if (!parse_double(v, &x))
          throw DataError("row " + std::to_string(data_row) + ": non-numeric value '" + v +
                          "' in binned column " + ds.attr_names[a]);
        bin_raw[a].push_back(x);
        ds.columns[a].push_back(0);  // placeholder until binning
      } else {
        auto [it, inserted] =
            code_of[a].emplace(v, static_cast<uint16_t>(ds.vocab[a].size()));
        if (inserted) ds.vocab[a].push_back(v);
        ds.columns[a].push_back(it->second);
      }
    }
    const uint8_t a_flag = (sens == schema.protected_value) ? 1 : 0;
    saw_protected |= a_flag == 1;
    saw_nonprotected |= a_flag == 0;
    ds.protected_flag.push_back(a_flag);
    ds.outcome.push_back(static_cast<uint8_t>(y));
    if (pred_idx >= 0) ds.prediction.push_back(p);
    if (rec_idx >= 0) ds.recommendation.push_back(static_cast<uint8_t>(pb));
  }

  if (ds.outcome.empty()) throw DataError("empty dataset: no usable rows after filtering");
  if (!saw_protected)
    throw DataError("protected value '" + schema.protected_value +
                    "' not observed in sensitive column '" + schema.sensitive_column + "'");

  // Discretize continuous covariates collected above; vocab in bin order.
  const BinStrategy strat = parse_bin_strategy(schema.bin_strategy);
  for (int a : bin_attr) {
    const int n_bins = schema.bin_columns.at(ds.attr_names[a]);
    const auto labels = discretize_column(bin_raw[a], n_bins, strat);
    std::unordered_map<std::string, uint16_t> codes;
    for (std::size_t i = 0; i < labels.size(); ++i) {
      auto [it, inserted] =
          codes.emplace(labels[i], static_cast<uint16_t>(ds.vocab[a].size()));
      if (inserted) ds.vocab[a].push_back(labels[i]);
      ds.columns[a][i] = it->second;
    }
  }

  // Derive recommendations from predictions when no recommendation column exists.
  if (rec_idx < 0 && pred_idx >= 0) {
    ds.recommendation.resize(ds.n_rows());
    for (std::size_t i = 0; i < ds.n_rows(); ++i)
      ds.recommendation[i] = ds.prediction[i] >= schema.binarize_threshold ? 1 : 0;
  }

  ds.row_ids.resize(ds.n_rows());
  for (std::size_t i = 0; i < ds.n_rows(); ++i) ds.row_ids[i] = static_cast<uint32_t>(i);
  return ds;
}

Dataset load_dataset_file(const std::string& path, const SchemaSpec& schema) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open dataset file: " + path);
  return load_dataset(in, schema);
}

Dataset filter_by_conditional(const Dataset& ds, ConditionalColumn which, int z) {
  if (which == ConditionalColumn::Recommendation && !ds.has_recommendation())
    throw DataError("filter_by_conditional: recommendation column is absent");

  Dataset out;
  out.attr_names = ds.attr_names;
  out.vocab = ds.vocab;
  out.columns.resize(ds.n_attrs());

  bool any_protected = false, any_nonprotected = false;
  for (std::size_t i = 0; i < ds.n_rows(); ++i) {
    const int c = which == ConditionalColumn::Outcome ? ds.outcome[i] : ds.recommendation[i];
    if (c != z) continue;
    for (std::size_t a = 0; a < ds.n_attrs(); ++a) out.columns[a].push_back(ds.columns[a][i]);
    out.protected_flag.push_back(ds.protected_flag[i]);
    out.outcome.push_back(ds.outcome[i]);
    if (ds.has_prediction()) out.prediction.push_back(ds.prediction[i]);
    if (ds.has_recommendation()) out.recommendation.push_back(ds.recommendation[i]);
    out.row_ids.push_back(ds.row_ids[i]);
    any_protected |= ds.protected_flag[i] == 1;
    any_nonprotected |= ds.protected_flag[i] == 0;
  }
  if (out.outcome.empty() || !any_protected || !any_nonprotected)
    throw DataError("degenerate filter: conditional value " + std::to_string(z) +
                    " leaves an empty protected or non-protected class");
  return out;
}

void write_dataset(std::ostream& out, const Dataset& ds, char delimiter) {
  const char d = delimiter;
  for (const auto& name : ds.attr_names) out << name << d;
  out << "A" << d << "Y";
  if (ds.has_prediction()) out << d << "P";
  if (ds.has_recommendation()) out << d << "P_bin";
  out << "\n";
  char buf[64];
  for (std::size_t i = 0; i < ds.n_rows(); ++i) {
    for (std::size_t a = 0; a < ds.n_attrs(); ++a) out << ds.vocab[a][ds.columns[a][i]] << d;
    out << int(ds.protected_flag[i]) << d << int(ds.outcome[i]);
    if (ds.has_prediction()) {
      std::snprintf(buf, sizeof(buf), "%.17g", ds.prediction[i]);
      out << d << buf;
    }
    if (ds.has_recommendation()) out << d << int(ds.recommendation[i]);
    out << "\n";
  }
}

}  // namespace cbs
