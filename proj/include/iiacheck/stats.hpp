// Apache License, Version 2.0, refer to LICENSE.txt

#ifndef IIACHECK_STATS_HPP
#define IIACHECK_STATS_HPP

#include <string>
#include <vector>

#include "iiacheck/core.hpp"
#include "iiacheck/mle.hpp"

namespace iia {

struct GftResult {
  double D = 0.0;       // Pearson chi-square statistic
  int nu = 0;           // degrees of freedom
  double p_value = 1.0;
};

struct AggregateResult {
  std::string method;             // "min_bonferroni" or "sum"
  std::vector<GftResult> per_set;
  double aggregate_p = 1.0;       // min method: raw minimum p; sum: tail of the summed statistic
  double corrected_alpha = 0.0;   // min method only (alpha/m)
  bool reject = false;
  double aggregate_D = 0.0;       // sum method
  long aggregate_nu = 0;          // sum method
};

// Upper-tail probability of the chi-square distribution with nu degrees of
// freedom, via the regularized incomplete gamma function (series for
// x < nu + 1, Lentz continued fraction otherwise). Absolute error <= 1e-10.
double chi2_sf(double x, double nu);
// Lower tail; chi2_sf + chi2_cdf = 1 within 1e-10.
double chi2_cdf(double x, double nu);

// Pearson statistic D = sum_Q sum_k (n pi - a)^2 / (n pi) with probabilities
// from the given scores. Questions with zero responses contribute nothing.
// Throws ValidationError on a zero expected count (an item that should have
// been excluded upstream).
double chi2_statistic(const QuestionSet& set, const ResponseTable& table,
                      const ScoreVector& scores);
// Dense variant over an indexed layout; `probs[q]` aligned with layout cells.
double chi2_statistic(const SetLayout& layout,
                      const std::vector<std::vector<double>>& probs);

// nu = sum_Q (|C_Q| - 1) - (K - 1) where the sizes and the item count K are
// both taken after never-chosen exclusions and zero-response questions are
// skipped. Throws UntestableError when nu < 1.
int degrees_of_freedom(const SetLayout& layout);
// Spec-level variant: sizes from the raw set, item count supplied.
int degrees_of_freedom(const QuestionSet& set, int effective_item_count);

// The classical goodness-of-fit test on one question set: MLE fit under IIA,
// Pearson statistic, degrees of freedom, chi-square tail p-value.
GftResult gft(const QuestionSet& set, const ResponseTable& table,
              const MleConfig& config = {});

// Reject iff min p < alpha/m; aggregate_p is the raw minimum.
AggregateResult aggregate_min(const std::vector<GftResult>& per_set,
                              double alpha);
// Convenience for plain p-value lists (used by the PPC aggregation as well).
AggregateResult aggregate_min_p(const std::vector<double>& p_values,
                                double alpha);

// D = sum D_i, nu = sum nu_i, p = chi2_sf(D, nu). Assumes independent sets.
AggregateResult aggregate_sum(const std::vector<GftResult>& per_set);

// Count of p-values strictly below each alpha in the grid.
std::vector<int> rejection_curve(const std::vector<double>& p_values,
                                 const std::vector<double>& alpha_grid);

}  // namespace iia

#endif  // IIACHECK_STATS_HPP
