#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "cbs/dataset.hpp"

namespace cbs {

// The four scan families of the framework. The fairness family fixes which of
// Y / P / P_bin plays the event variable I and which the conditional C:
// separation audits predictions given outcomes, sufficiency audits outcomes
// given predictions.
enum class ScanVariant {
  SeparationPredictions,      // I = P,     C = Y      (Gaussian score)
  SeparationRecommendations,  // I = P_bin, C = Y      (Bernoulli)
  SufficiencyPredictions,     // I = Y,     C = P      (Bernoulli)
  SufficiencyRecommendations  // I = Y,     C = P_bin  (Bernoulli)
};

bool event_is_binary(ScanVariant v);
bool conditional_is_binary(ScanVariant v);
ScanVariant parse_variant(const std::string& name);
std::string variant_name(ScanVariant v);

struct IrlsDiagnostics {
  double grad_norm = 0.0;  // max-norm of the penalized gradient at the solution
  int iterations = 0;
  bool converged = false;
};

// Logistic regression over one-hot encoded covariates (reference level per
// attribute dropped) plus intercept plus an optional numeric conditional feature.
struct GlmModel {
  Eigen::VectorXd beta;  // [intercept, dummies..., conditional?]
  std::vector<std::string> attr_names;
  std::vector<std::vector<std::string>> vocab;  // encoding frozen at fit time
  bool has_conditional = false;
  IrlsDiagnostics diag;

  int n_features() const { return static_cast<int>(beta.size()); }
};

struct IrlsOptions {
  double ridge = 1e-4;  // on non-intercept coefficients
  double tol = 1e-8;    // gradient max-norm
  int max_iter = 100;
};

// Minimizes the weighted negative log-likelihood plus ridge/2 * ||beta_slopes||^2
// by Newton steps with step-halving. Labels may be fractional in [0,1].
Eigen::VectorXd irls_weighted_logistic(const Eigen::MatrixXd& features,
                                       const Eigen::VectorXd& labels,
                                       const Eigen::VectorXd& sample_weights,
                                       const IrlsOptions& opts, IrlsDiagnostics* diag = nullptr);

// Penalized weighted log-likelihood and its analytic gradient, exposed for
// finite-difference checks.
double weighted_logistic_objective(const Eigen::MatrixXd& features,
                                   const Eigen::VectorXd& labels,
                                   const Eigen::VectorXd& sample_weights, double ridge,
                                   const Eigen::VectorXd& beta);
Eigen::VectorXd weighted_logistic_gradient(const Eigen::MatrixXd& features,
                                           const Eigen::VectorXd& labels,
                                           const Eigen::VectorXd& sample_weights, double ridge,
                                           const Eigen::VectorXd& beta);

// Pr(A=1 | X) fit on all rows with unit weights; covariates only.
GlmModel fit_propensity(const Dataset& ds, const std::vector<std::string>& attrs,
                        const IrlsOptions& opts = {});

// Propensity odds weight p/(1-p); p is clamped into [eps, 1-eps] first.
double compute_odds_weights(double p);

// Per-row propensity predictions for the given dataset view.
std::vector<double> predict_propensity(const GlmModel& model, const Dataset& ds);

// E_{H0}[I | C, X] fit on non-protected rows, each weighted by its propensity
// odds. Real-valued I (separation for predictions) uses the two-record
// construction with weights w*P and w*(1-P). The conditional feature is log-odds
// of P for sufficiency-for-predictions, the raw 0/1 value for binary C, and
// absent for value-conditional scans.
GlmModel fit_expectation_model(const Dataset& ds, ScanVariant variant, std::optional<int> z,
                               const std::vector<double>& propensity,
                               const std::vector<std::string>& attrs,
                               const IrlsOptions& opts = {});

// Clamped expectation of I for each protected-class row.
struct ExpectationSet {
  std::vector<double> i_hat;           // one entry per A=1 row, clamped
  std::vector<uint32_t> row_positions; // positions of those rows in the dataset
  int unseen_value_warnings = 0;       // prediction-time values absent from training
};

ExpectationSet predict_expectations(const GlmModel& model, const Dataset& ds,
                                    ScanVariant variant, std::optional<int> z);

}  // namespace cbs
