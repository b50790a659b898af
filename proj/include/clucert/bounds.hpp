#pragma once

#include <map>
#include <string>
#include <vector>

namespace clucert {

// Inputs of the sampling-shift computation: sentence length n, retained
// position count s, and the perturbation budget d in words.
struct ShiftParams {
  long n = 0;
  long s = 0;
  long d = 0;
};

// Exact two-sided Clopper-Pearson interval for successes/trials at level
// alpha.
struct ConfidenceBound {
  double lower = 0.0;
  double upper = 1.0;
  long successes = 0;
  long trials = 0;
  double alpha = 0.05;
};

// Result of the certified-radius search. Abstain is a distinct outcome, not a
// sentinel radius.
struct RadiusOutcome {
  enum class Kind { Certified, Abstain };
  Kind kind = Kind::Abstain;
  long radius = 0;  // meaningful when kind == Certified
  double gap = 0.0;
  double gamma = 0.0;
  bool capped_at_length = false;  // search hit t = n (gamma = 0 degenerate case)

  bool certified() const { return kind == Kind::Certified; }
};

// Sampling distribution shift 1 - C(n-d,s)/C(n,s). The ratio is evaluated as
// a telescoping product of exact integers and converted to double with a
// single correctly rounded division, so no binomial is ever accumulated in
// floating point. Returns 1 for d > n - s; monotone non-decreasing in d.
double delta_shift(const ShiftParams& p);

// First-order approximation s*d/(n - s/2), clamped to 1 since the result is
// typed as a probability. Used by the improvement predictor and cross-checks
// only, never for certification.
double delta_shift_asymptotic(const ShiftParams& p);

// Exact interval via bisection on binomial tail sums (no beta-quantile
// dependency); bisection runs to an interval width below 1e-12.
ConfidenceBound clopper_pearson(long successes, long trials, double alpha);

// Two-sided exact binomial test: total probability of outcomes no more likely
// than the observation, capped at 1.
double binom_p_value(long count_a, long total, double p0);

// Largest integer t in [0, n] with lower(top) - max upper(other) > 2*gamma*
// Delta_t, found by binary search over the monotone shift. Abstains when the
// gap is non-positive. The search is capped at n, which is only reachable
// when gamma = 0; the cap is flagged in the outcome.
RadiusOutcome certified_radius(const std::map<std::string, ConfidenceBound>& bounds,
                               const std::string& top_label, double gamma, long n,
                               long s);

// Closed-form predicted radius after a probability shift of epsilon with
// certification slack delta: r* + floor((n - s/2)(delta + 2 eps)/(2 gamma s)).
long predict_improved_radius(long r_star, double slack_delta, double epsilon,
                             double gamma, long n, long s);

// Enumerates all C(n,s) retention sets (n <= 20) and returns the exact
// fraction that intersect the differing position set (0-based indices).
double brute_force_delta(const ShiftParams& p, const std::vector<int>& differing_positions);

}  // namespace clucert
