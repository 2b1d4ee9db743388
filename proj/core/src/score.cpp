#include "cbs/score.hpp"

#include <cmath>

#include "cbs/common.hpp"

namespace cbs {

Direction parse_direction(const std::string& name) {
  if (name == "positive") return Direction::Positive;
  if (name == "negative") return Direction::Negative;
  throw ConfigError("unknown direction: " + name + " (expected positive or negative)");
}

std::string direction_name(Direction d) {
  return d == Direction::Positive ? "positive" : "negative";
}

namespace {

constexpr int kMaxBisect = 80;
constexpr double kLogTol = 1e-12;  // bisection tolerance in log(q) space

double bern_F(const StatsGroup& cells, double q) {
  const double logq = std::log(q);
  double f = 0.0;
  for (const SubsetStats* s : cells) {
    f += s->sum_events * logq;
    for (double ih : s->expectations) f -= std::log1p(ih * (q - 1.0));
  }
  return f;
}

double bern_dF(const StatsGroup& cells, double q) {
  double d = 0.0;
  for (const SubsetStats* s : cells) {
    d += s->sum_events / q;
    for (double ih : s->expectations) d -= ih / (1.0 + ih * (q - 1.0));
  }
  return d;
}

double unconstrained_mle_q(const StatsGroup& cells) {
  if (bern_dF(cells, kThetaLo) <= 0.0) return kThetaLo;
  if (bern_dF(cells, kThetaHi) >= 0.0) return kThetaHi;
  double lo = std::log(kThetaLo), hi = std::log(kThetaHi);
  for (int it = 0; it < kMaxBisect && hi - lo > kLogTol; ++it) {
    const double mid = 0.5 * (lo + hi);
    (bern_dF(cells, std::exp(mid)) > 0.0 ? lo : hi) = mid;
  }
  return std::exp(0.5 * (lo + hi));
}

// Root of F(q) = level on [qa, qb]; F is monotone on either side of the MLE.
double bisect_level(const StatsGroup& cells, double level, double qa, double qb) {
  double lo = std::log(qa), hi = std::log(qb);
  const bool rising = bern_F(cells, qa) < level;
  for (int it = 0; it < kMaxBisect && hi - lo > kLogTol; ++it) {
    const double mid = 0.5 * (lo + hi);
    const bool below = bern_F(cells, std::exp(mid)) < level;
    (below == rising ? lo : hi) = mid;
  }
  return std::exp(0.5 * (lo + hi));
}

std::size_t total_count(const StatsGroup& cells) {
  std::size_t n = 0;
  for (const SubsetStats* s : cells) n += s->count;
  return n;
}

}  // namespace

double bernoulli_log_likelihood_ratio(const StatsGroup& cells, double q) {
  return bern_F(cells, q);
}
double bernoulli_log_likelihood_ratio(const SubsetStats& stats, double q) {
  return bern_F({&stats}, q);
}

double mle_q(const StatsGroup& cells, Direction dir) {
  if (total_count(cells) == 0) return 1.0;
  const double q = unconstrained_mle_q(cells);
  if (dir == Direction::Positive) return std::max(q, 1.0);
  return std::min(q, 1.0);
}
double mle_q(const SubsetStats& stats, Direction dir) { return mle_q(StatsGroup{&stats}, dir); }

std::pair<double, double> bernoulli_score(const StatsGroup& cells, Direction dir) {
  if (total_count(cells) == 0) return {0.0, 1.0};
  const double q = mle_q(cells, dir);
  const double f = bern_F(cells, q);
  return {f > 0.0 ? f : 0.0, q};
}
std::pair<double, double> bernoulli_score(const SubsetStats& stats, Direction dir) {
  return bernoulli_score(StatsGroup{&stats}, dir);
}

std::pair<double, double> q_zero_crossings(const SubsetStats& stats) {
  const StatsGroup cells{&stats};
  const double q_mle = unconstrained_mle_q(cells);
  if (q_mle > 1.0) {
    double upper = kThetaHi;
    if (bern_F(cells, kThetaHi) < 0.0) upper = bisect_level(cells, 0.0, q_mle, kThetaHi);
    return {1.0, upper};
  }
  double lower = kThetaLo;
  if (bern_F(cells, kThetaLo) < 0.0) lower = bisect_level(cells, 0.0, kThetaLo, q_mle);
  return {lower, 1.0};
}

std::pair<double, double> gaussian_score(const SubsetStats& stats, double sigma, Direction dir) {
  if (sigma <= 0.0) throw ConfigError("gaussian_score: sigma must be positive");
  if (stats.count == 0) return {0.0, 0.0};
  const double mu = stats.sum_delta / static_cast<double>(stats.count);
  const bool feasible = dir == Direction::Positive ? mu > 0.0 : mu < 0.0;
  if (!feasible) return {0.0, 0.0};
  const double score = stats.sum_delta * stats.sum_delta /
                       (2.0 * sigma * sigma * static_cast<double>(stats.count));
  return {score, mu};
}

double gaussian_log_likelihood_ratio(const StatsGroup& cells, double mu, double sigma) {
  double sum_delta = 0.0;
  std::size_t n = 0;
  for (const SubsetStats* s : cells) {
    sum_delta += s->sum_delta;
    n += s->count;
  }
  return (2.0 * mu * sum_delta - static_cast<double>(n) * mu * mu) / (2.0 * sigma * sigma);
}

double estimate_sigma(const std::vector<double>& all_deltas) {
  double ss = 0.0;
  for (double d : all_deltas) ss += d * d;
  const double sigma =
      all_deltas.empty() ? 0.0 : std::sqrt(ss / static_cast<double>(all_deltas.size()));
  return std::max(sigma, 1e-6);
}

std::optional<ThetaProfile> bernoulli_profile(const SubsetStats& stats, Direction dir,
                                              double lambda) {
  if (stats.count == 0) return std::nullopt;
  const StatsGroup cells{&stats};
  double q_mle = unconstrained_mle_q(cells);
  if (dir == Direction::Positive && q_mle < 1.0) q_mle = 1.0;
  if (dir == Direction::Negative && q_mle > 1.0) q_mle = 1.0;
  const double peak = bern_F(cells, q_mle);
  if (peak <= lambda) return std::nullopt;  // never clears the penalty on this side

  ThetaProfile p;
  p.theta_mle = q_mle;
  p.score = peak;
  p.theta_min = bern_F(cells, kThetaLo) >= lambda ? kThetaLo
                                                  : bisect_level(cells, lambda, kThetaLo, q_mle);
  p.theta_max = bern_F(cells, kThetaHi) >= lambda ? kThetaHi
                                                  : bisect_level(cells, lambda, q_mle, kThetaHi);
  if (dir == Direction::Positive) {
    p.theta_min = std::max(p.theta_min, 1.0);
    if (p.theta_max <= 1.0) return std::nullopt;
  } else {
    p.theta_max = std::min(p.theta_max, 1.0);
    if (p.theta_min >= 1.0) return std::nullopt;
  }
  return p;
}

std::optional<ThetaProfile> gaussian_profile(const SubsetStats& stats, double sigma,
                                             Direction dir, double lambda) {
  if (sigma <= 0.0) throw ConfigError("gaussian_profile: sigma must be positive");
  if (stats.count == 0) return std::nullopt;
  const double n = static_cast<double>(stats.count);
  const double disc = stats.sum_delta * stats.sum_delta - 2.0 * n * sigma * sigma * lambda;
  if (disc <= 0.0) return std::nullopt;
  const double root = std::sqrt(disc);
  ThetaProfile p;
  p.theta_min = (stats.sum_delta - root) / n;
  p.theta_max = (stats.sum_delta + root) / n;
  p.theta_mle = stats.sum_delta / n;
  p.score = stats.sum_delta * stats.sum_delta / (2.0 * sigma * sigma * n);
  if (dir == Direction::Positive) {
    p.theta_min = std::max(p.theta_min, 0.0);
    if (p.theta_max <= 0.0) return std::nullopt;
  } else {
    p.theta_max = std::min(p.theta_max, 0.0);
    if (p.theta_min >= 0.0) return std::nullopt;
  }
  return p;
}

double subgroup_penalty(const std::vector<std::pair<int, int>>& included_arity, double lambda) {
  double total = 0.0;
  for (const auto& [included, arity] : included_arity)
    if (included < arity) total += included;
  return lambda * total;
}

}  // namespace cbs
