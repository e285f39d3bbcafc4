// Apache License, Version 2.0, refer to LICENSE.txt

#include "iiacheck/stats.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace iia {

namespace {

constexpr double kGammaEps = 1e-15;
constexpr double kFpMin = std::numeric_limits<double>::min() / kGammaEps;
constexpr int kMaxGammaIters = 800;

// Regularized lower incomplete gamma P(a, x) by its power series.
double gamma_p_series(double a, double x) {
  double ap = a;
  double sum = 1.0 / a;
  double del = sum;
  for (int i = 0; i < kMaxGammaIters; ++i) {
    ap += 1.0;
    del *= x / ap;
    sum += del;
    if (std::abs(del) < std::abs(sum) * kGammaEps)
      return sum * std::exp(-x + a * std::log(x) - std::lgamma(a));
  }
  throw std::runtime_error("incomplete gamma series failed to converge");
}

// Regularized upper incomplete gamma Q(a, x) by Lentz's continued fraction.
double gamma_q_cf(double a, double x) {
  double b = x + 1.0 - a;
  double c = 1.0 / kFpMin;
  double d = 1.0 / b;
  double h = d;
  for (int i = 1; i <= kMaxGammaIters; ++i) {
    double an = -static_cast<double>(i) * (static_cast<double>(i) - a);
    b += 2.0;
    d = an * d + b;
    if (std::abs(d) < kFpMin) d = kFpMin;
    c = b + an / c;
    if (std::abs(c) < kFpMin) c = kFpMin;
    d = 1.0 / d;
    double del = d * c;
    h *= del;
    if (std::abs(del - 1.0) < kGammaEps)
      return h * std::exp(-x + a * std::log(x) - std::lgamma(a));
  }
  throw std::runtime_error("incomplete gamma continued fraction failed to converge");
}

double gamma_q(double a, double x) {
  if (x < 0.0 || a <= 0.0)
    throw ValidationError("incomplete gamma arguments out of domain");
  if (x == 0.0) return 1.0;
  if (x < a + 1.0) return 1.0 - gamma_p_series(a, x);
  return gamma_q_cf(a, x);
}

double gamma_p(double a, double x) {
  if (x < 0.0 || a <= 0.0)
    throw ValidationError("incomplete gamma arguments out of domain");
  if (x == 0.0) return 0.0;
  if (x < a + 1.0) return gamma_p_series(a, x);
  return 1.0 - gamma_q_cf(a, x);
}

}  // namespace

double chi2_sf(double x, double nu) {
  if (x < 0.0) throw ValidationError("chi2_sf requires x >= 0");
  if (nu <= 0.0) throw ValidationError("chi2_sf requires nu >= 1");
  return gamma_q(0.5 * nu, 0.5 * x);
}

double chi2_cdf(double x, double nu) {
  if (x < 0.0) throw ValidationError("chi2_cdf requires x >= 0");
  if (nu <= 0.0) throw ValidationError("chi2_cdf requires nu >= 1");
  return gamma_p(0.5 * nu, 0.5 * x);
}

double chi2_statistic(const SetLayout& layout,
                      const std::vector<std::vector<double>>& probs) {
  double d = 0.0;
  for (std::size_t q = 0; q < layout.num_questions(); ++q) {
    double n = layout.totals[q];
    if (n == 0.0) continue;
    for (std::size_t k = 0; k < layout.counts[q].size(); ++k) {
      double expect = n * probs[q][k];
      if (expect <= 0.0)
        throw ValidationError(
            "zero expected count in chi-square statistic (item should have "
            "been excluded upstream)");
      double diff = expect - layout.counts[q][k];
      d += diff * diff / expect;
    }
  }
  return d;
}

double chi2_statistic(const QuestionSet& set, const ResponseTable& table,
                      const ScoreVector& scores) {
  SetLayout layout = SetLayout::build(set, table);
  std::vector<std::vector<double>> probs(set.questions.size());
  for (std::size_t q = 0; q < set.questions.size(); ++q)
    probs[q] = choice_probabilities(scores, set.questions[q]);
  return chi2_statistic(layout, probs);
}

int degrees_of_freedom(const SetLayout& layout) {
  long unrestricted = 0;
  for (std::size_t q = 0; q < layout.num_questions(); ++q) {
    if (layout.totals[q] == 0.0) continue;
    unrestricted += static_cast<long>(layout.choice_idx[q].size()) - 1;
  }
  long nu = unrestricted - (static_cast<long>(layout.num_items()) - 1);
  if (nu < 1)
    throw UntestableError("question set is too small to test (nu = " +
                          std::to_string(nu) + " < 1)");
  return static_cast<int>(nu);
}

int degrees_of_freedom(const QuestionSet& set, int effective_item_count) {
  long unrestricted = 0;
  for (const auto& q : set.questions)
    unrestricted += static_cast<long>(q.choice_set.size()) - 1;
  long nu = unrestricted - (static_cast<long>(effective_item_count) - 1);
  if (nu < 1)
    throw UntestableError("question set is too small to test (nu = " +
                          std::to_string(nu) + " < 1)");
  return static_cast<int>(nu);
}

GftResult gft(const QuestionSet& set, const ResponseTable& table,
              const MleConfig& config) {
  MleResult fit = fit_mle(set, table, config);
  SetLayout layout = SetLayout::build(set, table);
  if (!fit.excluded_items.empty())
    layout = layout.without_items(fit.excluded_items);

  std::vector<double> s(layout.num_items());
  for (std::size_t i = 0; i < layout.items.size(); ++i)
    s[i] = fit.score_vector.at(layout.items[i]);

  std::vector<std::vector<double>> probs(layout.num_questions());
  for (std::size_t q = 0; q < layout.num_questions(); ++q) {
    probs[q].resize(layout.choice_idx[q].size());
    for (std::size_t k = 0; k < probs[q].size(); ++k)
      probs[q][k] = s[static_cast<std::size_t>(layout.choice_idx[q][k])];
    softmax_inplace(probs[q]);
  }

  GftResult out;
  out.nu = degrees_of_freedom(layout);
  out.D = chi2_statistic(layout, probs);
  out.p_value = chi2_sf(out.D, out.nu);
  return out;
}

AggregateResult aggregate_min(const std::vector<GftResult>& per_set,
                              double alpha) {
  if (per_set.empty())
    throw ValidationError("aggregate_min requires at least one result");
  AggregateResult out;
  out.method = "min_bonferroni";
  out.per_set = per_set;
  double minp = per_set[0].p_value;
  for (const auto& r : per_set) minp = std::min(minp, r.p_value);
  out.aggregate_p = minp;
  out.corrected_alpha = alpha / static_cast<double>(per_set.size());
  out.reject = minp < out.corrected_alpha;
  return out;
}

AggregateResult aggregate_min_p(const std::vector<double>& p_values,
                                double alpha) {
  if (p_values.empty())
    throw ValidationError("aggregate_min requires at least one p-value");
  AggregateResult out;
  out.method = "min_bonferroni";
  out.aggregate_p = *std::min_element(p_values.begin(), p_values.end());
  out.corrected_alpha = alpha / static_cast<double>(p_values.size());
  out.reject = out.aggregate_p < out.corrected_alpha;
  return out;
}

AggregateResult aggregate_sum(const std::vector<GftResult>& per_set) {
  if (per_set.empty())
    throw ValidationError("aggregate_sum requires at least one result");
  AggregateResult out;
  out.method = "sum";
  out.per_set = per_set;
  for (const auto& r : per_set) {
    out.aggregate_D += r.D;
    out.aggregate_nu += r.nu;
  }
  out.aggregate_p = chi2_sf(out.aggregate_D, static_cast<double>(out.aggregate_nu));
  return out;
}

std::vector<int> rejection_curve(const std::vector<double>& p_values,
                                 const std::vector<double>& alpha_grid) {
  if (p_values.empty())
    throw ValidationError("rejection_curve requires at least one p-value");
  std::vector<int> counts(alpha_grid.size(), 0);
  for (std::size_t i = 0; i < alpha_grid.size(); ++i)
    for (double p : p_values)
      if (p < alpha_grid[i]) ++counts[i];
  return counts;
}

}  // namespace iia
