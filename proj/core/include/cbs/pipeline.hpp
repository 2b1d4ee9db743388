#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "cbs/dataset.hpp"
#include "cbs/expectation.hpp"
#include "cbs/scan.hpp"

namespace cbs {

// Full parameter set for one audit run. Empty attribute lists mean all
// covariates; the scan and expectation lists may differ.
struct ScanConfig {
  ScanVariant variant = ScanVariant::SeparationRecommendations;
  std::optional<int> z;  // value-conditional scans fix C = z
  Direction direction = Direction::Positive;
  double penalty = 1.0;
  int n_iterations = 500;
  uint64_t seed = 0;
  int n_threads = 1;
  std::vector<std::string> scan_attrs;
  std::vector<std::string> expectation_attrs;
  IrlsOptions irls;

  void validate() const;
};

struct ScanResult {
  Subgroup subgroup;
  std::vector<std::string> attr_names;
  std::vector<std::vector<std::string>> vocab;
  double score = 0.0;
  double theta = 0.0;
  int found_iteration = 0;
  std::vector<uint32_t> member_row_ids;  // protected rows in S*
  std::size_t protected_size = 0;        // |S*| within the protected class
  std::size_t comparison_size = 0;       // matching non-protected rows
  double protected_event_rate = 0.0;
  double comparison_event_rate = 0.0;
  int unseen_value_warnings = 0;
  IrlsDiagnostics propensity_diag;
  IrlsDiagnostics expectation_diag;

  // Included values per attribute, for reporting.
  std::vector<std::vector<std::string>> included_values() const;
};

// Protected-row scan input plus the filtered dataset view it was built from.
struct PreparedScan {
  Dataset data;  // after any value-conditional filter
  ScanInput input;
  IrlsDiagnostics propensity_diag;
  IrlsDiagnostics expectation_diag;
  int unseen_value_warnings = 0;
};

// Propensity on the unfiltered data, conditional filter, expectation model,
// per-row expectations, and the scan input they induce.
PreparedScan prepare_scan(const Dataset& ds, const ScanConfig& cfg);

// End-to-end audit: prepare_scan then the multi-restart scan, with comparison
// statistics from the matching non-protected rows.
ScanResult run_audit(const Dataset& ds, const ScanConfig& cfg);

// Raw event value I for one row under a variant.
double event_value(const Dataset& ds, ScanVariant variant, std::size_t row);

}  // namespace cbs
