#include "cbs/expectation.hpp"

#include <cmath>
#include <unordered_map>

#include "cbs/common.hpp"

namespace cbs {

bool event_is_binary(ScanVariant v) { return v != ScanVariant::SeparationPredictions; }

bool conditional_is_binary(ScanVariant v) { return v != ScanVariant::SufficiencyPredictions; }

ScanVariant parse_variant(const std::string& name) {
  if (name == "sep-pred") return ScanVariant::SeparationPredictions;
  if (name == "sep-rec") return ScanVariant::SeparationRecommendations;
  if (name == "suf-pred") return ScanVariant::SufficiencyPredictions;
  if (name == "suf-rec") return ScanVariant::SufficiencyRecommendations;
  throw ConfigError("unknown scan variant: " + name +
                    " (expected sep-pred, sep-rec, suf-pred, or suf-rec)");
}

std::string variant_name(ScanVariant v) {
  switch (v) {
    case ScanVariant::SeparationPredictions: return "sep-pred";
    case ScanVariant::SeparationRecommendations: return "sep-rec";
    case ScanVariant::SufficiencyPredictions: return "suf-pred";
    case ScanVariant::SufficiencyRecommendations: return "suf-rec";
  }
  return "?";
}

namespace {

// Stable per-row log-likelihood terms: w * (y*eta - log(1+exp(eta))).
double log1pexp(double x) { return x > 30.0 ? x : std::log1p(std::exp(x)); }

Eigen::VectorXd ridge_mask(int n_features) {
  Eigen::VectorXd m = Eigen::VectorXd::Ones(n_features);
  m(0) = 0.0;  // intercept unpenalized
  return m;
}

}  // namespace

double weighted_logistic_objective(const Eigen::MatrixXd& X, const Eigen::VectorXd& y,
                                   const Eigen::VectorXd& w, double ridge,
                                   const Eigen::VectorXd& beta) {
  const Eigen::VectorXd eta = X * beta;
  double ll = 0.0;
  for (Eigen::Index i = 0; i < y.size(); ++i)
    ll += w(i) * (y(i) * eta(i) - log1pexp(eta(i)));
  const Eigen::VectorXd mask = ridge_mask(static_cast<int>(beta.size()));
  return ll - 0.5 * ridge * (mask.array() * beta.array().square()).sum();
}

Eigen::VectorXd weighted_logistic_gradient(const Eigen::MatrixXd& X, const Eigen::VectorXd& y,
                                           const Eigen::VectorXd& w, double ridge,
                                           const Eigen::VectorXd& beta) {
  const Eigen::VectorXd eta = X * beta;
  Eigen::VectorXd resid(y.size());
  for (Eigen::Index i = 0; i < y.size(); ++i) resid(i) = w(i) * (y(i) - sigmoid(eta(i)));
  const Eigen::VectorXd mask = ridge_mask(static_cast<int>(beta.size()));
  return X.transpose() * resid - ridge * (mask.array() * beta.array()).matrix();
}

Eigen::VectorXd irls_weighted_logistic(const Eigen::MatrixXd& X, const Eigen::VectorXd& y,
                                       const Eigen::VectorXd& w, const IrlsOptions& opts,
                                       IrlsDiagnostics* diag) {
  if (X.rows() != y.size() || X.rows() != w.size())
    throw DataError("irls: feature/label/weight row counts disagree");
  bool any_positive = false;
  for (Eigen::Index i = 0; i < w.size(); ++i) {
    if (w(i) < 0.0) throw DataError("irls: negative sample weight");
    any_positive |= w(i) > 0.0;
  }
  if (!any_positive) throw DataError("irls: all sample weights are zero");

  const int p = static_cast<int>(X.cols());
  Eigen::VectorXd beta = Eigen::VectorXd::Zero(p);
  const Eigen::VectorXd mask = ridge_mask(p);
  double obj = weighted_logistic_objective(X, y, w, opts.ridge, beta);
  IrlsDiagnostics d;

  for (d.iterations = 0; d.iterations < opts.max_iter; ++d.iterations) {
    const Eigen::VectorXd g = weighted_logistic_gradient(X, y, w, opts.ridge, beta);
    d.grad_norm = g.lpNorm<Eigen::Infinity>();
    if (d.grad_norm < opts.tol) {
      d.converged = true;
      break;
    }
    const Eigen::VectorXd eta = X * beta;
    Eigen::VectorXd ww(y.size());
    for (Eigen::Index i = 0; i < y.size(); ++i) {
      const double pi = sigmoid(eta(i));
      ww(i) = w(i) * pi * (1.0 - pi);
    }
    Eigen::MatrixXd H = X.transpose() * ww.asDiagonal() * X;
    H.diagonal() += opts.ridge * mask;
    // Tiny Levenberg floor keeps the working matrix invertible when cells separate.
    H.diagonal().array() += 1e-10;
    const Eigen::VectorXd step = H.ldlt().solve(g);
    if (!step.allFinite())
      throw NumericalError("irls: singular working matrix, Newton step not finite");

    double t = 1.0;
    bool accepted = false;
    for (int h = 0; h < 50; ++h) {
      const Eigen::VectorXd cand = beta + t * step;
      const double cand_obj = weighted_logistic_objective(X, y, w, opts.ridge, cand);
      if (cand_obj >= obj) {
        beta = cand;
        obj = cand_obj;
        accepted = true;
        break;
      }
      t *= 0.5;
    }
    if (!accepted) break;  // no ascent direction left; flagged via grad_norm
  }
  if (!beta.allFinite()) throw NumericalError("irls: non-finite coefficients");
  d.grad_norm =
      weighted_logistic_gradient(X, y, w, opts.ridge, beta).lpNorm<Eigen::Infinity>();
  if (d.grad_norm < opts.tol) d.converged = true;
  if (diag) *diag = d;
  return beta;
}

namespace {

struct Encoder {
  const std::vector<std::string>* attr_names;
  const std::vector<std::vector<std::string>>* vocab;
  bool has_conditional;
  int n_features;

  static Encoder make(const std::vector<std::string>& names,
                      const std::vector<std::vector<std::string>>& vocab, bool conditional) {
    Encoder e{&names, &vocab, conditional, 1};
    for (const auto& v : vocab) e.n_features += static_cast<int>(v.size()) - 1;
    if (conditional) ++e.n_features;
    return e;
  }

  // One-hot with the first vocab entry as the dropped reference level.
  void encode_row(const std::vector<uint16_t>& codes, double conditional_value,
                  Eigen::Ref<Eigen::RowVectorXd, 0, Eigen::InnerStride<>> out) const {
    out.setZero();
    out(0) = 1.0;
    int base = 1;
    for (std::size_t a = 0; a < vocab->size(); ++a) {
      const int arity = static_cast<int>((*vocab)[a].size());
      const int code = codes[a];
      if (code > 0) out(base + code - 1) = 1.0;
      base += arity - 1;
    }
    if (has_conditional) out(base) = conditional_value;
  }
};

std::vector<int> resolve_attrs(const Dataset& ds, const std::vector<std::string>& attrs) {
  std::vector<int> idx;
  for (const auto& name : attrs) {
    const int i = ds.attr_index(name);
    if (i < 0) throw ConfigError("unknown covariate attribute: " + name);
    idx.push_back(i);
  }
  return idx;
}

double conditional_value(const Dataset& ds, ScanVariant v, std::size_t row) {
  switch (v) {
    case ScanVariant::SeparationPredictions:
    case ScanVariant::SeparationRecommendations:
      return static_cast<double>(ds.outcome[row]);
    case ScanVariant::SufficiencyPredictions:
      return logit(ds.prediction[row]);
    case ScanVariant::SufficiencyRecommendations:
      return static_cast<double>(ds.recommendation[row]);
  }
  return 0.0;
}

}  // namespace

double compute_odds_weights(double p) {
  p = clamp_prob(p);
  return p / (1.0 - p);
}

GlmModel fit_propensity(const Dataset& ds, const std::vector<std::string>& attrs,
                        const IrlsOptions& opts) {
  const std::size_t n_prot = ds.count_protected();
  if (n_prot == 0 || n_prot == ds.n_rows())
    throw DataError("fit_propensity: both protected and non-protected rows are required");

  const auto attr_idx = resolve_attrs(ds, attrs);
  GlmModel model;
  model.attr_names = attrs;
  for (int a : attr_idx) model.vocab.push_back(ds.vocab[a]);
  model.has_conditional = false;

  const Encoder enc = Encoder::make(model.attr_names, model.vocab, false);
  const std::size_t n = ds.n_rows();
  Eigen::MatrixXd X(n, enc.n_features);
  Eigen::VectorXd y(n), w = Eigen::VectorXd::Ones(n);
  std::vector<uint16_t> codes(attr_idx.size());
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t a = 0; a < attr_idx.size(); ++a) codes[a] = ds.columns[attr_idx[a]][i];
    enc.encode_row(codes, 0.0, X.row(i));
    y(i) = ds.protected_flag[i];
  }
  model.beta = irls_weighted_logistic(X, y, w, opts, &model.diag);
  return model;
}

std::vector<double> predict_propensity(const GlmModel& model, const Dataset& ds) {
  const auto attr_idx = resolve_attrs(ds, model.attr_names);
  const Encoder enc = Encoder::make(model.attr_names, model.vocab, model.has_conditional);
  std::vector<double> out(ds.n_rows());
  Eigen::RowVectorXd x(enc.n_features);
  std::vector<uint16_t> codes(attr_idx.size());
  for (std::size_t i = 0; i < ds.n_rows(); ++i) {
    for (std::size_t a = 0; a < attr_idx.size(); ++a) codes[a] = ds.columns[attr_idx[a]][i];
    enc.encode_row(codes, 0.0, x);
    out[i] = sigmoid(x.dot(model.beta));
  }
  return out;
}

GlmModel fit_expectation_model(const Dataset& ds, ScanVariant variant, std::optional<int> z,
                               const std::vector<double>& propensity,
                               const std::vector<std::string>& attrs, const IrlsOptions& opts) {
  if (propensity.size() != ds.n_rows())
    throw DataError("fit_expectation_model: propensity size mismatch");
  if (!event_is_binary(variant) && !ds.has_prediction())
    throw DataError("separation-for-predictions requires a prediction column");
  if (variant == ScanVariant::SeparationRecommendations && !ds.has_recommendation())
    throw DataError("separation-for-recommendations requires a recommendation column");
  if (variant == ScanVariant::SufficiencyPredictions && !ds.has_prediction())
    throw DataError("sufficiency-for-predictions requires a prediction column");
  if (variant == ScanVariant::SufficiencyRecommendations && !ds.has_recommendation())
    throw DataError("sufficiency-for-recommendations requires a recommendation column");

  const auto attr_idx = resolve_attrs(ds, attrs);
  GlmModel model;
  model.attr_names = attrs;
  for (int a : attr_idx) model.vocab.push_back(ds.vocab[a]);
  // Value-conditional scans hold C constant, so the model carries no conditional feature.
  model.has_conditional = !z.has_value();

  std::vector<std::size_t> rows;  // non-protected rows only
  for (std::size_t i = 0; i < ds.n_rows(); ++i)
    if (ds.protected_flag[i] == 0) rows.push_back(i);
  if (rows.empty()) throw DataError("fit_expectation_model: no non-protected rows");

  const Encoder enc = Encoder::make(model.attr_names, model.vocab, model.has_conditional);
  const bool binary_event = event_is_binary(variant);
  const std::size_t n_records = binary_event ? rows.size() : 2 * rows.size();
  Eigen::MatrixXd X(n_records, enc.n_features);
  Eigen::VectorXd y(n_records), w(n_records);

  std::vector<uint16_t> codes(attr_idx.size());
  std::size_t r = 0;
  for (std::size_t i : rows) {
    for (std::size_t a = 0; a < attr_idx.size(); ++a) codes[a] = ds.columns[attr_idx[a]][i];
    const double cond = model.has_conditional ? conditional_value(ds, variant, i) : 0.0;
    const double wa = compute_odds_weights(propensity[i]);
    if (binary_event) {
      enc.encode_row(codes, cond, X.row(r));
      y(r) = variant == ScanVariant::SeparationRecommendations
                 ? static_cast<double>(ds.recommendation[i])
                 : static_cast<double>(ds.outcome[i]);
      w(r) = wa;
      ++r;
    } else {
      // Real-valued event: split into a positive and a negative record.
      const double p = ds.prediction[i];
      enc.encode_row(codes, cond, X.row(r));
      y(r) = 1.0;
      w(r) = wa * p;
      ++r;
      enc.encode_row(codes, cond, X.row(r));
      y(r) = 0.0;
      w(r) = wa * (1.0 - p);
      ++r;
    }
  }
  model.beta = irls_weighted_logistic(X, y, w, opts, &model.diag);
  return model;
}

ExpectationSet predict_expectations(const GlmModel& model, const Dataset& ds,
                                    ScanVariant variant, std::optional<int> z) {
  const Encoder enc = Encoder::make(model.attr_names, model.vocab, model.has_conditional);
  ExpectationSet out;
  Eigen::RowVectorXd x(enc.n_features);
  std::vector<uint16_t> codes(model.attr_names.size());

  // Map dataset attribute/value codes onto the model's frozen encoding; values
  // unseen at fit time fall back to the reference level.
  std::vector<int> ds_attr(model.attr_names.size());
  std::vector<std::vector<int>> code_map(model.attr_names.size());
  for (std::size_t a = 0; a < model.attr_names.size(); ++a) {
    const int idx = ds.attr_index(model.attr_names[a]);
    if (idx < 0) throw ConfigError("dataset lacks model attribute: " + model.attr_names[a]);
    ds_attr[a] = idx;
    code_map[a].assign(ds.vocab[idx].size(), -1);
    for (std::size_t v = 0; v < ds.vocab[idx].size(); ++v) {
      for (std::size_t mv = 0; mv < model.vocab[a].size(); ++mv)
        if (model.vocab[a][mv] == ds.vocab[idx][v]) {
          code_map[a][v] = static_cast<int>(mv);
          break;
        }
    }
  }

  for (std::size_t i = 0; i < ds.n_rows(); ++i) {
    if (ds.protected_flag[i] != 1) continue;
    for (std::size_t a = 0; a < model.attr_names.size(); ++a) {
      const int mapped = code_map[a][ds.columns[ds_attr[a]][i]];
      if (mapped < 0) ++out.unseen_value_warnings;
      codes[a] = mapped < 0 ? 0 : static_cast<uint16_t>(mapped);
    }
    const double cond = model.has_conditional ? conditional_value(ds, variant, i) : 0.0;
    enc.encode_row(codes, cond, x);
    out.i_hat.push_back(clamp_prob(sigmoid(x.dot(model.beta))));
    out.row_positions.push_back(static_cast<uint32_t>(i));
  }
  (void)z;
  return out;
}

}  // namespace cbs
