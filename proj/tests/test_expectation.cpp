#include <cmath>
#include <random>
#include <sstream>

#include "doctest.h"

#include "cbs/common.hpp"
#include "cbs/dataset.hpp"
#include "cbs/expectation.hpp"

using namespace cbs;

namespace {

// Dataset with two binary covariates, a protected flag driven by `race`, and
// P/Y columns; generated deterministically.
Dataset synth_dataset(std::size_t n, uint64_t seed, double protected_rate = 0.4) {
  std::mt19937_64 rng(seed);
  std::bernoulli_distribution prot(protected_rate), g(0.5), c(0.3);
  std::uniform_real_distribution<double> unif(0.05, 0.95);
  std::ostringstream text;
  text << "g,h,race,y,p\n";
  for (std::size_t i = 0; i < n; ++i) {
    const double p = unif(rng);
    text << (g(rng) ? "a" : "b") << "," << (c(rng) ? "x" : "z") << ","
         << (prot(rng) ? "prot" : "other") << "," << (unif(rng) < p ? 1 : 0) << "," << p << "\n";
  }
  SchemaSpec schema;
  schema.covariates = {"g", "h"};
  schema.outcome_column = "y";
  schema.prediction_column = "p";
  schema.sensitive_column = "race";
  schema.protected_value = "prot";
  std::istringstream in(text.str());
  return load_dataset(in, schema);
}

}  // namespace

TEST_CASE("variant parsing and variable roles") {
  CHECK(parse_variant("sep-pred") == ScanVariant::SeparationPredictions);
  CHECK(parse_variant("sep-rec") == ScanVariant::SeparationRecommendations);
  CHECK(parse_variant("suf-pred") == ScanVariant::SufficiencyPredictions);
  CHECK(parse_variant("suf-rec") == ScanVariant::SufficiencyRecommendations);
  CHECK_THROWS_AS(parse_variant("nope"), ConfigError);
  CHECK(!event_is_binary(ScanVariant::SeparationPredictions));
  CHECK(event_is_binary(ScanVariant::SufficiencyPredictions));
  CHECK(!conditional_is_binary(ScanVariant::SufficiencyPredictions));
  CHECK(conditional_is_binary(ScanVariant::SeparationPredictions));
}

TEST_CASE("intercept-only fit recovers the label mean") {
  Eigen::MatrixXd x = Eigen::MatrixXd::Ones(8, 1);
  Eigen::VectorXd y(8);
  y << 1, 0, 0, 0, 1, 0, 0, 0;  // mean 0.25
  Eigen::VectorXd w = Eigen::VectorXd::Ones(8);
  IrlsOptions opts;
  opts.ridge = 0.0;
  IrlsDiagnostics diag;
  const Eigen::VectorXd beta = irls_weighted_logistic(x, y, w, opts, &diag);
  CHECK(diag.converged);
  CHECK(beta(0) == doctest::Approx(std::log(0.25 / 0.75)).epsilon(1e-6));
}

TEST_CASE("all-0.5 labels give the symmetric fit") {
  std::mt19937_64 rng(5);
  std::normal_distribution<double> norm(0.0, 1.0);
  Eigen::MatrixXd x(20, 3);
  for (Eigen::Index i = 0; i < 20; ++i) {
    x(i, 0) = 1.0;
    x(i, 1) = norm(rng);
    x(i, 2) = norm(rng);
  }
  Eigen::VectorXd y = Eigen::VectorXd::Constant(20, 0.5);
  Eigen::VectorXd w = Eigen::VectorXd::Ones(20);
  const Eigen::VectorXd beta = irls_weighted_logistic(x, y, w, IrlsOptions{});
  for (Eigen::Index i = 0; i < 20; ++i)
    CHECK(sigmoid(x.row(i).dot(beta)) == doctest::Approx(0.5).epsilon(1e-4));
}

TEST_CASE("perfect separation stays finite under ridge") {
  Eigen::MatrixXd x(6, 2);
  Eigen::VectorXd y(6);
  for (int i = 0; i < 6; ++i) {
    x(i, 0) = 1.0;
    x(i, 1) = i < 3 ? 1.0 : 0.0;
    y(i) = i < 3 ? 1.0 : 0.0;
  }
  Eigen::VectorXd w = Eigen::VectorXd::Ones(6);
  IrlsOptions opts;  // ridge 1e-4
  const Eigen::VectorXd beta = irls_weighted_logistic(x, y, w, opts);
  CHECK(beta.allFinite());
  for (int i = 0; i < 6; ++i) {
    const double p = sigmoid(x.row(i).dot(beta));
    CHECK(p > 0.0);
    CHECK(p < 1.0);
  }
}

TEST_CASE("negative weights are rejected") {
  Eigen::MatrixXd x = Eigen::MatrixXd::Ones(2, 1);
  Eigen::VectorXd y(2);
  y << 0, 1;
  Eigen::VectorXd w(2);
  w << 1.0, -0.5;
  CHECK_THROWS_AS(irls_weighted_logistic(x, y, w, IrlsOptions{}), DataError);
}

TEST_CASE("analytic gradient matches central finite differences") {
  std::mt19937_64 rng(77);
  std::normal_distribution<double> norm(0.0, 1.0);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  for (int trial = 0; trial < 20; ++trial) {
    const int n = 12, p = 4;
    Eigen::MatrixXd x(n, p);
    Eigen::VectorXd y(n), w(n), beta(p);
    for (int i = 0; i < n; ++i) {
      x(i, 0) = 1.0;
      for (int j = 1; j < p; ++j) x(i, j) = norm(rng);
      y(i) = unif(rng);
      w(i) = 0.2 + unif(rng);
    }
    for (int j = 0; j < p; ++j) beta(j) = 0.5 * norm(rng);
    const double ridge = 1e-3;
    const Eigen::VectorXd grad = weighted_logistic_gradient(x, y, w, ridge, beta);
    const double h = 1e-6;
    for (int j = 0; j < p; ++j) {
      Eigen::VectorXd bp = beta, bm = beta;
      bp(j) += h;
      bm(j) -= h;
      const double fd = (weighted_logistic_objective(x, y, w, ridge, bp) -
                         weighted_logistic_objective(x, y, w, ridge, bm)) /
                        (2 * h);
      CHECK(grad(j) == doctest::Approx(fd).epsilon(1e-4));
    }
  }
}

TEST_CASE("odds weights") {
  CHECK(compute_odds_weights(0.5) == doctest::Approx(1.0));
  CHECK(compute_odds_weights(0.8) == doctest::Approx(4.0).epsilon(1e-5));
  CHECK(compute_odds_weights(1.0) == doctest::Approx((1.0 - 1e-6) / 1e-6).epsilon(1e-6));
}

TEST_CASE("propensity recovers deterministic membership") {
  std::ostringstream text;
  text << "g,race,y,p\n";
  for (int i = 0; i < 40; ++i) {
    const bool f = i % 2 == 0;
    text << (f ? "f" : "m") << "," << (f ? "prot" : "other") << "," << (i % 3 == 0) << ",0.5\n";
  }
  SchemaSpec schema;
  schema.covariates = {"g"};
  schema.outcome_column = "y";
  schema.prediction_column = "p";
  schema.sensitive_column = "race";
  schema.protected_value = "prot";
  std::istringstream in(text.str());
  const Dataset ds = load_dataset(in, schema);
  const GlmModel model = fit_propensity(ds, {"g"});
  const auto probs = predict_propensity(model, ds);
  for (std::size_t i = 0; i < ds.n_rows(); ++i) {
    if (ds.protected_flag[i])
      CHECK(probs[i] > 0.95);
    else
      CHECK(probs[i] < 0.05);
  }
}

TEST_CASE("propensity requires both classes") {
  Dataset ds = synth_dataset(30, 3);
  for (auto& a : ds.protected_flag) a = 1;
  CHECK_THROWS_AS(fit_propensity(ds, {"g", "h"}), DataError);
}

TEST_CASE("independent assignment concentrates near the base rate") {
  const Dataset ds = synth_dataset(5000, 9, 0.3);
  const GlmModel model = fit_propensity(ds, {"g", "h"});
  for (double p : predict_propensity(model, ds)) CHECK(p == doctest::Approx(0.3).epsilon(0.15));
}

TEST_CASE("unit weights reduce to the unweighted fit") {
  const Dataset ds = synth_dataset(300, 13);
  const std::vector<double> flat(ds.n_rows(), 0.5);  // odds weight exactly 1
  const GlmModel weighted = fit_expectation_model(ds, ScanVariant::SufficiencyRecommendations,
                                                  std::nullopt, flat, {"g", "h"});

  // Direct unweighted fit on the same records.
  std::vector<std::size_t> rows;
  for (std::size_t i = 0; i < ds.n_rows(); ++i)
    if (!ds.protected_flag[i]) rows.push_back(i);
  const Eigen::Index n = static_cast<Eigen::Index>(rows.size());
  Eigen::MatrixXd x(n, 4);  // intercept, g dummy, h dummy, conditional
  Eigen::VectorXd y(n), w = Eigen::VectorXd::Ones(n);
  for (Eigen::Index r = 0; r < n; ++r) {
    const std::size_t i = rows[static_cast<std::size_t>(r)];
    x(r, 0) = 1.0;
    x(r, 1) = ds.columns[0][i] == 1 ? 1.0 : 0.0;
    x(r, 2) = ds.columns[1][i] == 1 ? 1.0 : 0.0;
    x(r, 3) = static_cast<double>(ds.recommendation[i]);
    y(r) = ds.outcome[i];
  }
  const Eigen::VectorXd direct = irls_weighted_logistic(x, y, w, IrlsOptions{});
  REQUIRE(weighted.beta.size() == direct.size());
  for (Eigen::Index j = 0; j < direct.size(); ++j)
    CHECK(weighted.beta(j) == doctest::Approx(direct(j)).epsilon(1e-6));
}

TEST_CASE("binary-valued predictions match the binary-label path") {
  // P in {0,1} pushed through the two-record construction must equal the
  // recommendation fit (one duplicate record gets zero weight).
  std::ostringstream text;
  text << "g,race,y,p\n";
  std::mt19937_64 rng(21);
  std::bernoulli_distribution coin(0.5), prot(0.4), yd(0.4);
  for (int i = 0; i < 200; ++i) {
    const int p = coin(rng) ? 1 : 0;
    text << (coin(rng) ? "a" : "b") << "," << (prot(rng) ? "prot" : "other") << "," << yd(rng)
         << "," << p << "\n";
  }
  SchemaSpec schema;
  schema.covariates = {"g"};
  schema.outcome_column = "y";
  schema.prediction_column = "p";
  schema.sensitive_column = "race";
  schema.protected_value = "prot";
  std::istringstream in(text.str());
  const Dataset ds = load_dataset(in, schema);

  const GlmModel prop = fit_propensity(ds, {"g"});
  const auto propensity = predict_propensity(prop, ds);
  const GlmModel real_path = fit_expectation_model(ds, ScanVariant::SeparationPredictions,
                                                   std::nullopt, propensity, {"g"});
  const GlmModel bin_path = fit_expectation_model(ds, ScanVariant::SeparationRecommendations,
                                                  std::nullopt, propensity, {"g"});
  REQUIRE(real_path.beta.size() == bin_path.beta.size());
  for (Eigen::Index j = 0; j < real_path.beta.size(); ++j)
    CHECK(real_path.beta(j) == doctest::Approx(bin_path.beta(j)).epsilon(1e-5));
}

TEST_CASE("all-zero model predicts one half") {
  const Dataset ds = synth_dataset(50, 31);
  GlmModel model;
  model.attr_names = {"g", "h"};
  model.vocab = {ds.vocab[0], ds.vocab[1]};
  model.has_conditional = true;
  model.beta = Eigen::VectorXd::Zero(4);
  const auto exp = predict_expectations(model, ds, ScanVariant::SufficiencyRecommendations,
                                        std::nullopt);
  CHECK(exp.i_hat.size() == ds.count_protected());
  for (double ih : exp.i_hat) CHECK(ih == doctest::Approx(0.5));
}

TEST_CASE("two-cell model reproduces weighted cell means") {
  // One binary covariate, no conditional (value-conditional scan): the fitted
  // expectations must equal the propensity-weighted event means per cell.
  std::ostringstream text;
  text << "g,race,y,p\n";
  std::mt19937_64 rng(41);
  std::bernoulli_distribution cell(0.5), prot(0.35);
  for (int i = 0; i < 400; ++i) {
    const bool a = cell(rng);
    const bool y = std::bernoulli_distribution(a ? 0.7 : 0.3)(rng);
    text << (a ? "a" : "b") << "," << (prot(rng) ? "prot" : "other") << "," << y << ",0.5\n";
  }
  SchemaSpec schema;
  schema.covariates = {"g"};
  schema.outcome_column = "y";
  schema.prediction_column = "p";
  schema.sensitive_column = "race";
  schema.protected_value = "prot";
  std::istringstream in(text.str());
  const Dataset ds = load_dataset(in, schema);

  const GlmModel prop = fit_propensity(ds, {"g"});
  const auto propensity = predict_propensity(prop, ds);
  const GlmModel model =
      fit_expectation_model(ds, ScanVariant::SufficiencyRecommendations, 1, propensity, {"g"});
  CHECK(!model.has_conditional);
  const auto exp = predict_expectations(model, ds, ScanVariant::SufficiencyRecommendations, 1);

  // Hand-computed weighted means per cell over A=0 rows.
  double num[2] = {0, 0}, den[2] = {0, 0};
  for (std::size_t i = 0; i < ds.n_rows(); ++i) {
    if (ds.protected_flag[i]) continue;
    const double w = compute_odds_weights(propensity[i]);
    num[ds.columns[0][i]] += w * ds.outcome[i];
    den[ds.columns[0][i]] += w;
  }
  std::size_t k = 0;
  for (std::size_t i = 0; i < ds.n_rows(); ++i) {
    if (!ds.protected_flag[i]) continue;
    const double expect = num[ds.columns[0][i]] / den[ds.columns[0][i]];
    CHECK(exp.i_hat[k] == doctest::Approx(expect).epsilon(2e-3));
    ++k;
  }
}

TEST_CASE("unseen covariate values fall back to the reference level") {
  const Dataset train = synth_dataset(200, 51);
  const GlmModel prop = fit_propensity(train, {"g", "h"});
  const auto propensity = predict_propensity(prop, train);
  const GlmModel model = fit_expectation_model(train, ScanVariant::SufficiencyRecommendations,
                                               std::nullopt, propensity, {"g", "h"});

  Dataset probe = train;
  probe.vocab[0].push_back("brand-new");
  const uint16_t code = static_cast<uint16_t>(probe.vocab[0].size() - 1);
  std::size_t changed = 0;
  for (std::size_t i = 0; i < probe.n_rows() && changed < 3; ++i) {
    if (probe.protected_flag[i]) {
      probe.columns[0][i] = code;
      ++changed;
    }
  }
  const auto exp =
      predict_expectations(model, probe, ScanVariant::SufficiencyRecommendations, std::nullopt);
  CHECK(exp.unseen_value_warnings == 3);
  for (double ih : exp.i_hat) {
    CHECK(ih >= 1e-6);
    CHECK(ih <= 1.0 - 1e-6);
  }
}

TEST_CASE("degenerate labels predict near the clamp floor") {
  Dataset ds = synth_dataset(120, 61);
  for (std::size_t i = 0; i < ds.n_rows(); ++i)
    if (!ds.protected_flag[i]) ds.outcome[i] = 0;
  const GlmModel prop = fit_propensity(ds, {"g", "h"});
  const auto propensity = predict_propensity(prop, ds);
  const GlmModel model = fit_expectation_model(ds, ScanVariant::SufficiencyRecommendations,
                                               std::nullopt, propensity, {"g", "h"});
  const auto exp =
      predict_expectations(model, ds, ScanVariant::SufficiencyRecommendations, std::nullopt);
  for (double ih : exp.i_hat) CHECK(ih < 0.02);
}
