// Apache License, Version 2.0, refer to LICENSE.txt

#include "iiacheck/mle.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

namespace iia {

void MleConfig::validate() const {
  if (!(learning_rate > 0.0) || !(improvement_tol > 0.0) || max_iters < 1)
    throw ValidationError("MleConfig fields must be positive");
}

namespace {

constexpr std::size_t kStackCells = kMaxChoiceSetSize;

double dense_log_likelihood(const SetLayout& layout,
                            const std::vector<double>& s) {
  double ll = 0.0;
  double u[kStackCells];
  for (std::size_t q = 0; q < layout.num_questions(); ++q) {
    if (layout.totals[q] == 0.0) continue;
    const auto& idx = layout.choice_idx[q];
    const auto& a = layout.counts[q];
    std::size_t kq = idx.size();
    double mx = -std::numeric_limits<double>::infinity();
    for (std::size_t k = 0; k < kq; ++k) {
      u[k] = s[static_cast<std::size_t>(idx[k])];
      mx = std::max(mx, u[k]);
    }
    double sum = 0.0;
    for (std::size_t k = 0; k < kq; ++k) sum += std::exp(u[k] - mx);
    double lse = mx + std::log(sum);
    for (std::size_t k = 0; k < kq; ++k) ll += a[k] * (u[k] - lse);
  }
  return ll;
}

void dense_gradient(const SetLayout& layout, const std::vector<double>& s,
                    std::vector<double>& grad) {
  grad.assign(layout.num_items(), 0.0);
  double u[kStackCells];
  for (std::size_t q = 0; q < layout.num_questions(); ++q) {
    double n = layout.totals[q];
    if (n == 0.0) continue;
    const auto& idx = layout.choice_idx[q];
    const auto& a = layout.counts[q];
    std::size_t kq = idx.size();
    double mx = -std::numeric_limits<double>::infinity();
    for (std::size_t k = 0; k < kq; ++k) {
      u[k] = s[static_cast<std::size_t>(idx[k])];
      mx = std::max(mx, u[k]);
    }
    double sum = 0.0;
    for (std::size_t k = 0; k < kq; ++k) {
      u[k] = std::exp(u[k] - mx);
      sum += u[k];
    }
    for (std::size_t k = 0; k < kq; ++k)
      grad[static_cast<std::size_t>(idx[k])] += a[k] - n * (u[k] / sum);
  }
}

ScoreVector to_score_vector(const std::string& target, const SetLayout& layout,
                            const std::vector<double>& s) {
  ScoreVector out;
  out.target = target;
  for (std::size_t i = 0; i < layout.items.size(); ++i)
    out.scores.emplace(layout.items[i], s[i]);
  return out;
}

}  // namespace

double log_likelihood(const SetLayout& layout, const std::vector<double>& s) {
  return dense_log_likelihood(layout, s);
}

void log_likelihood_gradient(const SetLayout& layout,
                             const std::vector<double>& s,
                             std::vector<double>& grad) {
  dense_gradient(layout, s, grad);
}

double log_likelihood(const QuestionSet& set, const ResponseTable& table,
                      const ScoreVector& scores) {
  SetLayout layout = SetLayout::build(set, table);
  std::vector<double> s(layout.num_items());
  for (std::size_t i = 0; i < layout.items.size(); ++i)
    s[i] = scores.at(layout.items[i]);
  return dense_log_likelihood(layout, s);
}

ScoreVector log_likelihood_gradient(const QuestionSet& set,
                                    const ResponseTable& table,
                                    const ScoreVector& scores) {
  SetLayout layout = SetLayout::build(set, table);
  std::vector<double> s(layout.num_items());
  for (std::size_t i = 0; i < layout.items.size(); ++i)
    s[i] = scores.at(layout.items[i]);
  std::vector<double> grad;
  dense_gradient(layout, s, grad);
  return to_score_vector(set.target, layout, grad);
}

MleResult fit_mle(const QuestionSet& set, const ResponseTable& table,
                  const MleConfig& config) {
  config.validate();
  if (table.total_responses() < 1)
    throw ValidationError("fit_mle requires at least one recorded response");

  SetLayout layout = SetLayout::build(set, table);
  MleResult result;
  result.excluded_items = layout.never_chosen();
  if (!result.excluded_items.empty())
    layout = layout.without_items(result.excluded_items);

  const std::size_t dim = layout.num_items();
  std::vector<double> s(dim, 0.0), grad(dim), trial(dim);
  double ll = dense_log_likelihood(layout, s);
  result.ll_trace.push_back(ll);

  long iter = 0;
  for (; iter < config.max_iters; ++iter) {
    dense_gradient(layout, s, grad);
    double step = config.learning_rate;
    double new_ll = -std::numeric_limits<double>::infinity();
    // The objective is concave; the configured rate is accepted as-is at
    // typical survey sizes (n ~ 30), and halving only engages when n is large
    // enough that the fixed rate would overshoot.
    int halvings = 0;
    for (; halvings < 64; ++halvings) {
      for (std::size_t i = 0; i < dim; ++i) trial[i] = s[i] + step * grad[i];
      new_ll = dense_log_likelihood(layout, trial);
      if (std::isfinite(new_ll) && new_ll >= ll) break;
      step *= 0.5;
    }
    if (halvings == 64) break;  // no ascent direction left at double precision
    std::swap(s, trial);
    double improvement = new_ll - ll;
    ll = new_ll;
    result.ll_trace.push_back(ll);
    if (improvement < config.improvement_tol) {
      ++iter;
      break;
    }
  }
  if (!std::isfinite(ll))
    throw ValidationError("non-finite log-likelihood at iteration " +
                          std::to_string(iter));

  result.iterations = iter;
  result.hit_max_iters = iter >= config.max_iters;
  result.final_log_likelihood = ll;
  result.score_vector = to_score_vector(set.target, layout, s);
  result.score_vector.center();
  return result;
}

}  // namespace iia
