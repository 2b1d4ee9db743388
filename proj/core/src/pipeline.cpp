#include "cbs/pipeline.hpp"

#include <algorithm>
#include <cmath>

#include "cbs/common.hpp"

namespace cbs {

void ScanConfig::validate() const {
  if (penalty < 0.0) throw ConfigError("penalty must be >= 0");
  if (n_iterations < 1) throw ConfigError("n_iterations must be >= 1");
  if (n_threads < 1) throw ConfigError("n_threads must be >= 1");
  if (z && *z != 0 && *z != 1) throw ConfigError("conditional value must be 0 or 1");
  if (z && variant == ScanVariant::SufficiencyPredictions)
    throw ConfigError("sufficiency-for-predictions has a continuous conditional; "
                      "no conditional value can be fixed");
}

double event_value(const Dataset& ds, ScanVariant variant, std::size_t row) {
  switch (variant) {
    case ScanVariant::SeparationPredictions:
      return ds.prediction[row];
    case ScanVariant::SeparationRecommendations:
      return static_cast<double>(ds.recommendation[row]);
    case ScanVariant::SufficiencyPredictions:
    case ScanVariant::SufficiencyRecommendations:
      return static_cast<double>(ds.outcome[row]);
  }
  throw ConfigError("unknown scan variant");
}

namespace {

void require_columns(const Dataset& ds, ScanVariant variant) {
  const bool needs_prediction = variant == ScanVariant::SeparationPredictions ||
                                variant == ScanVariant::SufficiencyPredictions;
  if (needs_prediction && !ds.has_prediction())
    throw DataError("variant " + variant_name(variant) + " requires a prediction column");
  const bool needs_recommendation = variant == ScanVariant::SeparationRecommendations ||
                                    variant == ScanVariant::SufficiencyRecommendations;
  if (needs_recommendation && !ds.has_recommendation())
    throw DataError("variant " + variant_name(variant) + " requires recommendations");
}

std::vector<std::string> resolve_attrs(const Dataset& ds, const std::vector<std::string>& attrs) {
  if (attrs.empty()) return ds.attr_names;
  for (const auto& a : attrs)
    if (ds.attr_index(a) < 0) throw ConfigError("unknown attribute: " + a);
  return attrs;
}

}  // namespace

PreparedScan prepare_scan(const Dataset& ds, const ScanConfig& cfg) {
  cfg.validate();
  require_columns(ds, cfg.variant);
  const auto expectation_attrs = resolve_attrs(ds, cfg.expectation_attrs);
  const auto scan_attrs = resolve_attrs(ds, cfg.scan_attrs);

  // Propensity weights come from the full dataset even when the scan itself is
  // value-conditional; the filter applies downstream of this fit.
  GlmModel propensity_model = fit_propensity(ds, expectation_attrs, cfg.irls);

  PreparedScan prep;
  prep.propensity_diag = propensity_model.diag;
  if (cfg.z) {
    const auto which = cfg.variant == ScanVariant::SeparationRecommendations ||
                               cfg.variant == ScanVariant::SeparationPredictions
                           ? ConditionalColumn::Outcome
                           : ConditionalColumn::Recommendation;
    prep.data = filter_by_conditional(ds, which, *cfg.z);
  } else {
    prep.data = ds;
  }
  const Dataset& view = prep.data;

  const std::vector<double> propensity = predict_propensity(propensity_model, view);
  GlmModel expectation_model =
      fit_expectation_model(view, cfg.variant, cfg.z, propensity, expectation_attrs, cfg.irls);
  prep.expectation_diag = expectation_model.diag;

  ExpectationSet expectations = predict_expectations(expectation_model, view, cfg.variant, cfg.z);
  prep.unseen_value_warnings = expectations.unseen_value_warnings;

  ScanInput& input = prep.input;
  input.family = cfg.variant == ScanVariant::SeparationPredictions ? Family::Gaussian
                                                                   : Family::Bernoulli;
  input.attr_names = scan_attrs;
  for (const auto& name : scan_attrs) {
    const int j = view.attr_index(name);
    input.vocab.push_back(view.vocab[static_cast<std::size_t>(j)]);
    auto& col = input.columns.emplace_back();
    col.reserve(expectations.row_positions.size());
    for (uint32_t pos : expectations.row_positions)
      col.push_back(view.columns[static_cast<std::size_t>(j)][pos]);
  }
  for (std::size_t k = 0; k < expectations.row_positions.size(); ++k) {
    const uint32_t pos = expectations.row_positions[k];
    const double i_val = event_value(view, cfg.variant, pos);
    const double i_hat = expectations.i_hat[k];
    input.events.push_back(i_val);
    input.expectations.push_back(i_hat);
    input.row_ids.push_back(view.row_ids[pos]);
    if (input.family == Family::Gaussian) input.deltas.push_back(logit(i_val) - logit(i_hat));
  }
  if (input.family == Family::Gaussian) input.sigma = estimate_sigma(input.deltas);
  return prep;
}

ScanResult run_audit(const Dataset& ds, const ScanConfig& cfg) {
  PreparedScan prep = prepare_scan(ds, cfg);
  const ScanInput& input = prep.input;

  ScanSettings settings;
  settings.direction = cfg.direction;
  settings.penalty = cfg.penalty;
  settings.n_iterations = cfg.n_iterations;
  settings.seed = cfg.seed;
  settings.n_threads = cfg.n_threads;
  ScanOutcome outcome = scan(input, settings);

  ScanResult result;
  result.subgroup = outcome.subgroup;
  result.attr_names = input.attr_names;
  result.vocab = input.vocab;
  result.score = outcome.score;
  result.theta = outcome.theta;
  result.found_iteration = outcome.found_iteration;
  result.unseen_value_warnings = prep.unseen_value_warnings;
  result.propensity_diag = prep.propensity_diag;
  result.expectation_diag = prep.expectation_diag;

  const auto members = subgroup_members(input, outcome.subgroup);
  result.protected_size = members.size();
  double event_sum = 0.0;
  for (std::size_t i : members) {
    result.member_row_ids.push_back(input.row_ids[i]);
    event_sum += input.events[i];
  }
  if (!members.empty())
    result.protected_event_rate = event_sum / static_cast<double>(members.size());

  // Counterpart statistics: non-protected rows of the same filtered view that
  // fall inside S*'s attribute-value sets.
  const Dataset& view = prep.data;
  std::vector<int> attr_cols(result.attr_names.size());
  for (std::size_t j = 0; j < result.attr_names.size(); ++j)
    attr_cols[j] = view.attr_index(result.attr_names[j]);
  double cmp_sum = 0.0;
  std::size_t cmp_n = 0;
  for (std::size_t row = 0; row < view.n_rows(); ++row) {
    if (view.protected_flag[row]) continue;
    bool match = true;
    for (std::size_t j = 0; j < attr_cols.size() && match; ++j) {
      const uint16_t code = view.columns[static_cast<std::size_t>(attr_cols[j])][row];
      if (!outcome.subgroup.included[j][code]) match = false;
    }
    if (!match) continue;
    ++cmp_n;
    cmp_sum += event_value(view, cfg.variant, row);
  }
  result.comparison_size = cmp_n;
  if (cmp_n > 0) result.comparison_event_rate = cmp_sum / static_cast<double>(cmp_n);
  return result;
}

std::vector<std::vector<std::string>> ScanResult::included_values() const {
  std::vector<std::vector<std::string>> out(attr_names.size());
  for (std::size_t j = 0; j < attr_names.size(); ++j)
    for (std::size_t v = 0; v < vocab[j].size(); ++v)
      if (subgroup.included[j][v]) out[j].push_back(vocab[j][v]);
  return out;
}

}  // namespace cbs
