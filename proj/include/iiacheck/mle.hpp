// Apache License, Version 2.0, refer to LICENSE.txt

#ifndef IIACHECK_MLE_HPP
#define IIACHECK_MLE_HPP

#include <string>
#include <vector>

#include "iiacheck/core.hpp"

namespace iia {

struct MleConfig {
  double learning_rate = 0.005;
  double improvement_tol = 1e-4;  // absolute improvement stopping criterion
  long max_iters = 100000;

  void validate() const;
};

struct MleResult {
  ScoreVector score_vector;        // centered gauge, excluded items absent
  double final_log_likelihood = 0.0;
  long iterations = 0;
  std::vector<std::string> excluded_items;  // never selected in any question
  bool hit_max_iters = false;
  std::vector<double> ll_trace;    // log-likelihood after each accepted step
};

// sum_Q sum_k a_Qk log pi_Qk(s)
double log_likelihood(const QuestionSet& set, const ResponseTable& table,
                      const ScoreVector& scores);

// d/ds_k = sum_{Q: k in C_Q} (a_Qk - n_Q pi_Qk); entries sum to zero over
// each question's contribution.
ScoreVector log_likelihood_gradient(const QuestionSet& set,
                                    const ResponseTable& table,
                                    const ScoreVector& scores);

// Dense variants over an indexed layout (scores aligned with layout.items).
double log_likelihood(const SetLayout& layout, const std::vector<double>& s);
void log_likelihood_gradient(const SetLayout& layout,
                             const std::vector<double>& s,
                             std::vector<double>& grad);

// Full-batch gradient ascent from s = 0 with the configured learning rate.
// Steps that would decrease the log-likelihood are halved until they do not
// (the problem is concave; at the configured rate this never triggers at
// survey scale, but guarantees a monotone trace for any n). Never-chosen
// items are excluded before optimization and do not appear in the result.
MleResult fit_mle(const QuestionSet& set, const ResponseTable& table,
                  const MleConfig& config = {});

}  // namespace iia

#endif  // IIACHECK_MLE_HPP
