#pragma once

#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace cbs {

enum class Family { Bernoulli, Gaussian };
enum class Direction { Positive, Negative };  // under- vs over-estimation bias

Direction parse_direction(const std::string& name);
std::string direction_name(Direction d);

// Sufficient statistics of one candidate subset (or one attribute-value cell).
// Bernoulli keeps per-member expectations because the likelihood term is not
// collapsible; Gaussian needs only |S| and the sum of log-odds gaps.
struct SubsetStats {
  double sum_events = 0.0;
  std::vector<double> expectations;  // clamped i_hat per member (Bernoulli)
  std::size_t count = 0;
  double sum_delta = 0.0;  // sum of logit(I) - logit(i_hat) (Gaussian)

  void add_bernoulli(double event, double i_hat_clamped) {
    sum_events += event;
    expectations.push_back(i_hat_clamped);
    ++count;
  }
  void add_gaussian(double delta) {
    sum_delta += delta;
    ++count;
  }
  bool empty() const { return count == 0; }
};

using StatsGroup = std::vector<const SubsetStats*>;

// F(S|q) = sum_i I_i log q - log(q*ihat - ihat + 1).
double bernoulli_log_likelihood_ratio(const StatsGroup& cells, double q);
double bernoulli_log_likelihood_ratio(const SubsetStats& stats, double q);

// Root of dF/dq by bisection on [1e-6, 1e6] (derivative strictly decreasing),
// clamped to the direction's feasible side of 1.
double mle_q(const StatsGroup& cells, Direction dir);
double mle_q(const SubsetStats& stats, Direction dir);

// Direction-constrained maximum of F over q; q = 1 is always feasible so the
// score is nonnegative. Empty subsets score 0 with q = 1.
std::pair<double, double> bernoulli_score(const StatsGroup& cells, Direction dir);
std::pair<double, double> bernoulli_score(const SubsetStats& stats, Direction dir);

// The two zero crossings of F(q); one is q = 1 exactly, the other is located by
// bisection past the MLE and capped at the domain bound when F never recrosses.
// Requires the subset to be scorable (max_q F > 0 somewhere off q = 1).
std::pair<double, double> q_zero_crossings(const SubsetStats& stats);

// F(S|mu) = (2*mu*sum_delta - |S|*mu^2) / (2*sigma^2), closed form.
std::pair<double, double> gaussian_score(const SubsetStats& stats, double sigma, Direction dir);
double gaussian_log_likelihood_ratio(const StatsGroup& cells, double mu, double sigma);

// sqrt(mean delta^2) over all protected-class rows, floored at 1e-6; the MLE of
// sigma under the zero-mean null.
double estimate_sigma(const std::vector<double>& all_deltas);

// Zero crossings and maximizer of F(theta) - lambda, clamped to the feasible
// side (q >= 1 or mu >= 0 for positive scans, mirrored for negative). Returns
// nullopt when the cell is never positive there (non-contributing).
struct ThetaProfile {
  double theta_min = 0.0;
  double theta_max = 0.0;
  double theta_mle = 0.0;
  double score = 0.0;  // unpenalized F at theta_mle
};

std::optional<ThetaProfile> bernoulli_profile(const SubsetStats& stats, Direction dir,
                                              double lambda);
std::optional<ThetaProfile> gaussian_profile(const SubsetStats& stats, double sigma,
                                             Direction dir, double lambda);

// lambda times the included-value count, waived for fully included attributes.
// Each pair is (included values, arity) for one attribute.
double subgroup_penalty(const std::vector<std::pair<int, int>>& included_arity, double lambda);

}  // namespace cbs
