// Apache License, Version 2.0, refer to LICENSE.txt

#ifndef IIACHECK_PPC_HPP
#define IIACHECK_PPC_HPP

#include <cstdint>
#include <functional>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "iiacheck/bayes.hpp"
#include "iiacheck/core.hpp"
#include "iiacheck/rng.hpp"

namespace iia {

// Posterior predictive check: p = (1/N) sum 1[T_rep >= T_obs], ties counted
// as exceedances.

struct PpcConfig {
  double alpha = 0.05;
  std::uint64_t seed = 0;
  long max_draws = 0;           // 0: use every kept draw; else thin to about this many
  bool store_set_traces = false;
  // Sampling runs whose divergence fraction exceeds this are not trusted.
  double max_divergence_fraction = 0.01;

  void validate() const;
};

struct PpcSetSummary {
  std::string target;
  double p_value = 1.0;
  double t_obs_mean = 0.0;
  double t_rep_mean = 0.0;
  std::vector<double> t_obs, t_rep;  // per used draw; only with store_set_traces
};

struct PpcReport {
  long draws_used = 0;
  double alpha = 0.05;
  std::vector<PpcSetSummary> per_set;
  // Summed-statistic traces (one entry per used draw); sum_p is their
  // exceedance fraction.
  std::vector<double> t_obs_sum, t_rep_sum;
  double sum_p = 1.0;
  bool sum_reject = false;
  // Bonferroni over the per-set PPC p-values.
  double min_p = 1.0;
  double corrected_alpha = 0.0;
  bool min_reject = false;
};

// Chi-square discrepancy of every question set at the draw's probabilities,
// replicated data drawn per question from the same probabilities with the
// observed n_Q. Throws SamplerError when the draws carry too many
// divergences to trust.
PpcReport run_model_ppc(const PosteriorModel& model, const PosteriorDraws& draws,
                        const PpcConfig& config);

// Generic Algorithm-1 driver: `eval(draw, rng)` returns (T_obs, T_rep) for
// one posterior draw, replicating internally from the provided substream.
struct PpcTraces {
  std::vector<double> t_obs, t_rep;
  double p_value = 1.0;
};
PpcTraces ppc_pvalue(
    long n_draws, std::uint64_t seed,
    const std::function<std::pair<double, double>(long, RngStream&)>& eval);

// Fraction of draws with t_rep >= t_obs (the sum-aggregate decision rule).
double exceedance_fraction(const std::vector<double>& t_obs,
                           const std::vector<double>& t_rep);

// Eq.-style discrepancy at fixed scores, summed over all question sets
// (equals the chi-square statistic when the scores are the MLE).
double iia_discrepancy(const Dataset& data,
                       const std::vector<ScoreVector>& scores);

// ---- Population homogeneity -------------------------------------------------

// How the replicate-generating probabilities are drawn: from a per-question
// Dirichlet(1 + counts) posterior, or plugged in as the empirical proportions.
enum class HomogeneityMode { dirichlet, plugin };

std::string to_string(HomogeneityMode mode);
HomogeneityMode homogeneity_mode_from_string(const std::string& name);

struct HomogeneityConfig {
  HomogeneityMode mode = HomogeneityMode::dirichlet;
  long replicates = 1000;
  double alpha = 0.05;
  double smoothing_eps = 0.0;      // optional add-eps for plug-in proportions
  double outlier_quantile = 0.99;  // pooled replicate I_p threshold
  std::uint64_t seed = 0;

  void validate() const;
};

struct ParticipantInfo {
  std::string participant;
  double information = 0.0;  // nats, under the empirical proportions
};

struct HomogeneityResult {
  std::vector<ParticipantInfo> per_participant;
  double t_obs = 0.0;  // max - min of the observed information contents
  double p_value = 1.0;
  long replicates = 0;
  double outlier_threshold = 0.0;
  std::vector<std::string> outliers;
  std::vector<double> t_rep;  // replicate statistic trace
};

// Spread test on per-participant information content: T = max I_p - min I_p,
// replicates re-answer each participant's own questions from per-question
// probabilities estimated on the observed counts. Requires participant
// records.
HomogeneityResult homogeneity_test(const Dataset& data,
                                   const HomogeneityConfig& config);

// I_p = -sum log pi(selected) over the participant's records. `probs` maps a
// question id to a probability vector aligned with its choice set. Throws
// on a zero probability at a selected item.
double information_content(
    const std::vector<ResponseRecord>& participant_records, const Dataset& data,
    const std::map<std::string, std::vector<double>>& probs);

}  // namespace iia

#endif  // IIACHECK_PPC_HPP
