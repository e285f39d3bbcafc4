// Apache License, Version 2.0, refer to LICENSE.txt

#include "iiacheck/ppc.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <sstream>

#include "iiacheck/stats.hpp"

namespace iia {

namespace {

constexpr double kMinExpected = 1e-300;  // underflow clamp for nπ denominators

double chi2_term(double expected, double observed) {
  const double e = std::max(expected, kMinExpected);
  const double d = e - observed;
  return d * d / e;
}

double quantile_type7(std::vector<double>& values, double p) {
  std::sort(values.begin(), values.end());
  const std::size_t n = values.size();
  const double h = p * static_cast<double>(n - 1);
  const std::size_t lo = static_cast<std::size_t>(std::floor(h));
  const std::size_t hi = std::min(lo + 1, n - 1);
  const double w = h - static_cast<double>(lo);
  return (1.0 - w) * values[lo] + w * values[hi];
}

}  // namespace

void PpcConfig::validate() const {
  if (!(alpha > 0.0 && alpha < 1.0))
    throw ValidationError("alpha must lie in (0, 1)");
  if (max_draws < 0) throw ValidationError("max_draws must be non-negative");
  if (!(max_divergence_fraction >= 0.0 && max_divergence_fraction <= 1.0))
    throw ValidationError("max_divergence_fraction must lie in [0, 1]");
}

PpcTraces ppc_pvalue(
    long n_draws, std::uint64_t seed,
    const std::function<std::pair<double, double>(long, RngStream&)>& eval) {
  if (n_draws < 1) throw ValidationError("need at least one draw");
  PpcTraces out;
  out.t_obs.reserve(static_cast<std::size_t>(n_draws));
  out.t_rep.reserve(static_cast<std::size_t>(n_draws));
  RngStream root = RngStream(seed).derive("ppc");
  long exceed = 0;
  for (long i = 0; i < n_draws; ++i) {
    RngStream rng = root.derive(static_cast<std::uint64_t>(i));
    auto [t_obs, t_rep] = eval(i, rng);
    if (t_rep >= t_obs) ++exceed;
    out.t_obs.push_back(t_obs);
    out.t_rep.push_back(t_rep);
  }
  out.p_value = static_cast<double>(exceed) / static_cast<double>(n_draws);
  return out;
}

double exceedance_fraction(const std::vector<double>& t_obs,
                           const std::vector<double>& t_rep) {
  if (t_obs.size() != t_rep.size() || t_obs.empty())
    throw ValidationError("trace lengths differ or are empty");
  long exceed = 0;
  for (std::size_t i = 0; i < t_obs.size(); ++i)
    if (t_rep[i] >= t_obs[i]) ++exceed;
  return static_cast<double>(exceed) / static_cast<double>(t_obs.size());
}

PpcReport run_model_ppc(const PosteriorModel& model,
                        const PosteriorDraws& draws, const PpcConfig& config) {
  config.validate();
  if (draws.diag.divergence_fraction > config.max_divergence_fraction) {
    std::ostringstream msg;
    msg << "posterior draws are not trustworthy: "
        << 100.0 * draws.diag.divergence_fraction
        << "% divergent transitions (limit "
        << 100.0 * config.max_divergence_fraction << "%)";
    throw SamplerError(msg.str());
  }
  const long total = draws.total_draws();
  if (total < 100)
    throw ValidationError("posterior predictive check needs at least 100 draws, got " +
                          std::to_string(total));
  long stride = 1;
  if (config.max_draws > 0 && total > config.max_draws) {
    stride = (total + config.max_draws - 1) / config.max_draws;
  }

  const int num_sets = model.num_sets();
  PpcReport report;
  report.alpha = config.alpha;
  report.per_set.resize(static_cast<std::size_t>(num_sets));
  for (int i = 0; i < num_sets; ++i) {
    report.per_set[static_cast<std::size_t>(i)].target = model.set_target(i);
  }

  std::vector<long> set_exceed(static_cast<std::size_t>(num_sets), 0);
  std::vector<double> flat;
  std::vector<int> rep(kMaxChoiceSetSize);
  RngStream root = RngStream(config.seed).derive("ppc");

  for (std::size_t c = 0; c < draws.chains.size(); ++c) {
    const Eigen::MatrixXd& chain = draws.chains[c];
    RngStream chain_rng = root.derive(static_cast<std::uint64_t>(c));
    for (long r = 0; r < chain.rows(); r += stride) {
      const Eigen::VectorXd q = chain.row(r).transpose();
      model.fill_probabilities(q, flat);
      RngStream rng = chain_rng.derive(static_cast<std::uint64_t>(r));
      double sum_obs = 0.0;
      double sum_rep = 0.0;
      for (int i = 0; i < num_sets; ++i) {
        const SetLayout& lay = model.layout(i);
        double t_obs = 0.0;
        double t_rep = 0.0;
        for (std::size_t qi = 0; qi < lay.num_questions(); ++qi) {
          const double n = lay.totals[qi];
          if (n <= 0.0) continue;
          const auto& counts = lay.counts[qi];
          const std::size_t kk = counts.size();
          const int off = model.cell_offset(i, static_cast<int>(qi));
          const double* pi = flat.data() + off;
          rng.multinomial(std::span<const double>(pi, kk),
                          static_cast<int>(n), std::span<int>(rep.data(), kk));
          for (std::size_t k = 0; k < kk; ++k) {
            const double expected = n * pi[k];
            t_obs += chi2_term(expected, counts[k]);
            t_rep += chi2_term(expected, static_cast<double>(rep[k]));
          }
        }
        PpcSetSummary& s = report.per_set[static_cast<std::size_t>(i)];
        if (t_rep >= t_obs) ++set_exceed[static_cast<std::size_t>(i)];
        s.t_obs_mean += t_obs;
        s.t_rep_mean += t_rep;
        if (config.store_set_traces) {
          s.t_obs.push_back(t_obs);
          s.t_rep.push_back(t_rep);
        }
        sum_obs += t_obs;
        sum_rep += t_rep;
      }
      report.t_obs_sum.push_back(sum_obs);
      report.t_rep_sum.push_back(sum_rep);
      ++report.draws_used;
    }
  }

  std::vector<double> per_set_p(static_cast<std::size_t>(num_sets));
  for (int i = 0; i < num_sets; ++i) {
    PpcSetSummary& s = report.per_set[static_cast<std::size_t>(i)];
    s.p_value = static_cast<double>(set_exceed[static_cast<std::size_t>(i)]) /
                static_cast<double>(report.draws_used);
    s.t_obs_mean /= static_cast<double>(report.draws_used);
    s.t_rep_mean /= static_cast<double>(report.draws_used);
    per_set_p[static_cast<std::size_t>(i)] = s.p_value;
  }

  report.sum_p = exceedance_fraction(report.t_obs_sum, report.t_rep_sum);
  report.sum_reject = report.sum_p < config.alpha;
  const AggregateResult min_agg = aggregate_min_p(per_set_p, config.alpha);
  report.min_p = min_agg.aggregate_p;
  report.corrected_alpha = min_agg.corrected_alpha;
  report.min_reject = min_agg.reject;
  return report;
}

double iia_discrepancy(const Dataset& data,
                       const std::vector<ScoreVector>& scores) {
  double total = 0.0;
  for (std::size_t i = 0; i < data.size(); ++i) {
    const ScoreVector* sv = nullptr;
    for (const ScoreVector& s : scores) {
      if (s.target == data.sets[i].target) {
        sv = &s;
        break;
      }
    }
    if (sv == nullptr)
      throw ValidationError("no scores provided for question set '" +
                            data.sets[i].target + "'");
    total += chi2_statistic(data.sets[i], data.tables[i], *sv);
  }
  return total;
}

// ---- Population homogeneity -------------------------------------------------

std::string to_string(HomogeneityMode mode) {
  return mode == HomogeneityMode::dirichlet ? "dirichlet" : "plugin";
}

HomogeneityMode homogeneity_mode_from_string(const std::string& name) {
  if (name == "dirichlet") return HomogeneityMode::dirichlet;
  if (name == "plugin") return HomogeneityMode::plugin;
  throw ValidationError("unknown homogeneity mode: '" + name +
                        "' (expected dirichlet or plugin)");
}

void HomogeneityConfig::validate() const {
  if (replicates < 1) throw ValidationError("replicates must be positive");
  if (!(alpha > 0.0 && alpha < 1.0))
    throw ValidationError("alpha must lie in (0, 1)");
  if (smoothing_eps < 0.0)
    throw ValidationError("smoothing_eps must be non-negative");
  if (!(outlier_quantile > 0.0 && outlier_quantile < 1.0))
    throw ValidationError("outlier_quantile must lie in (0, 1)");
}

namespace {

// Flattened question view used by the homogeneity replicator.
struct FlatQuestion {
  std::vector<double> counts;   // observed a_Qk
  std::vector<double> phat;     // empirical proportions (optionally smoothed)
  std::vector<double> theta;    // replicate-generating probabilities
  std::vector<double> alpha;    // Dirichlet parameters 1 + a_Qk
  double total = 0.0;
  bool used = false;            // answered by at least one participant
};

}  // namespace

HomogeneityResult homogeneity_test(const Dataset& data,
                                   const HomogeneityConfig& config) {
  config.validate();
  if (!data.has_records())
    throw ValidationError(
        "homogeneity test requires per-participant records; this dataset is "
        "aggregate-only");

  // Flatten questions and index them by id.
  std::vector<FlatQuestion> questions;
  std::map<std::string, int> q_index;
  for (std::size_t i = 0; i < data.size(); ++i) {
    const QuestionSet& set = data.sets[i];
    const ResponseTable& table = data.tables[i];
    for (std::size_t qi = 0; qi < set.questions.size(); ++qi) {
      FlatQuestion fq;
      const auto& counts = table.counts_for(qi);
      fq.counts.assign(counts.begin(), counts.end());
      fq.total = static_cast<double>(table.total_for(qi));
      const std::size_t kk = fq.counts.size();
      fq.phat.assign(kk, 1.0 / static_cast<double>(kk));
      fq.alpha.assign(kk, 1.0);
      if (fq.total > 0.0) {
        const double denom =
            fq.total + config.smoothing_eps * static_cast<double>(kk);
        for (std::size_t k = 0; k < kk; ++k) {
          fq.phat[k] = (fq.counts[k] + config.smoothing_eps) / denom;
          fq.alpha[k] = 1.0 + fq.counts[k];
        }
      }
      fq.theta = fq.phat;
      q_index[set.questions[qi].id] = static_cast<int>(questions.size());
      questions.push_back(std::move(fq));
    }
  }

  // Per-participant question assignments (sorted by participant id).
  std::map<std::string, std::vector<std::pair<int, int>>> assignment;
  for (std::size_t i = 0; i < data.size(); ++i) {
    const QuestionSet& set = data.sets[i];
    for (const ResponseRecord& rec : data.tables[i].records()) {
      const int qi = set.question_index(rec.question_id);
      const int fq = q_index.at(rec.question_id);
      const int k = set.questions[static_cast<std::size_t>(qi)].option_index(
          rec.selected);
      assignment[rec.participant].push_back({fq, k});
      questions[static_cast<std::size_t>(fq)].used = true;
    }
  }
  if (assignment.size() < 2)
    throw ValidationError(
        "homogeneity test needs at least two participants, got " +
        std::to_string(assignment.size()));

  HomogeneityResult result;
  const std::size_t num_p = assignment.size();
  std::vector<const std::vector<std::pair<int, int>>*> selections;
  selections.reserve(num_p);
  for (const auto& [pid, sel] : assignment) {
    double info = 0.0;
    for (const auto& [fq, k] : sel) {
      const double p = questions[static_cast<std::size_t>(fq)]
                           .phat[static_cast<std::size_t>(k)];
      if (!(p > 0.0))
        throw ValidationError(
            "zero empirical probability at a selected item; enable smoothing");
      info -= std::log(p);
    }
    result.per_participant.push_back({pid, info});
    selections.push_back(&sel);
  }
  auto spread = [](const std::vector<double>& v) {
    const auto [lo, hi] = std::minmax_element(v.begin(), v.end());
    return *hi - *lo;
  };
  std::vector<double> obs_info(num_p);
  for (std::size_t p = 0; p < num_p; ++p)
    obs_info[p] = result.per_participant[p].information;
  result.t_obs = spread(obs_info);

  const bool dirichlet = config.mode == HomogeneityMode::dirichlet;
  RngStream root = RngStream(config.seed).derive("homogeneity");
  std::vector<double> rep_info(num_p);
  std::vector<double> obs_info_theta(num_p);
  std::vector<double> pooled;
  pooled.reserve(static_cast<std::size_t>(config.replicates) * num_p);
  std::vector<double> log_theta;
  long exceed = 0;

  for (long repi = 0; repi < config.replicates; ++repi) {
    RngStream rng = root.derive(static_cast<std::uint64_t>(repi));
    if (dirichlet) {
      RngStream theta_rng = rng.derive("theta");
      for (FlatQuestion& fq : questions) {
        if (!fq.used) continue;
        theta_rng.dirichlet(fq.alpha, fq.theta);
      }
    }
    // Observed statistic under this draw's probabilities (fixed at the
    // plug-in value when theta is the plug-in).
    double t_obs = result.t_obs;
    if (dirichlet) {
      for (std::size_t p = 0; p < num_p; ++p) {
        double info = 0.0;
        for (const auto& [fq, k] : *selections[p]) {
          info -= std::log(questions[static_cast<std::size_t>(fq)]
                               .theta[static_cast<std::size_t>(k)]);
        }
        obs_info_theta[p] = info;
      }
      t_obs = spread(obs_info_theta);
    }
    RngStream ans_rng = rng.derive("answers");
    for (std::size_t p = 0; p < num_p; ++p) {
      double info = 0.0;
      for (const auto& [fq, k] : *selections[p]) {
        (void)k;
        const FlatQuestion& fqq = questions[static_cast<std::size_t>(fq)];
        const int pick = ans_rng.categorical(fqq.theta);
        info -= std::log(fqq.theta[static_cast<std::size_t>(pick)]);
      }
      rep_info[p] = info;
      pooled.push_back(info);
    }
    const double t_rep = spread(rep_info);
    result.t_rep.push_back(t_rep);
    if (t_rep >= t_obs) ++exceed;
  }

  result.replicates = config.replicates;
  result.p_value =
      static_cast<double>(exceed) / static_cast<double>(config.replicates);
  result.outlier_threshold = quantile_type7(pooled, config.outlier_quantile);
  for (const ParticipantInfo& pi : result.per_participant) {
    if (pi.information > result.outlier_threshold)
      result.outliers.push_back(pi.participant);
  }
  return result;
}

double information_content(
    const std::vector<ResponseRecord>& participant_records, const Dataset& data,
    const std::map<std::string, std::vector<double>>& probs) {
  // Index questions by id across the dataset.
  std::map<std::string, const Question*> by_id;
  for (const QuestionSet& set : data.sets)
    for (const Question& q : set.questions) by_id[q.id] = &q;

  double info = 0.0;
  for (const ResponseRecord& rec : participant_records) {
    auto qit = by_id.find(rec.question_id);
    if (qit == by_id.end())
      throw ValidationError("record references unknown question: " +
                            rec.question_id);
    const Question& q = *qit->second;
    auto pit = probs.find(rec.question_id);
    if (pit == probs.end())
      throw ValidationError("no probabilities for question: " + rec.question_id);
    if (pit->second.size() != q.choice_set.size())
      throw ValidationError("probability vector for question " +
                            rec.question_id + " has wrong arity");
    const int k = q.option_index(rec.selected);
    if (k < 0)
      throw ValidationError("record selects an item outside the choice set of " +
                            rec.question_id);
    const double p = pit->second[static_cast<std::size_t>(k)];
    if (!(p > 0.0))
      throw ValidationError("zero probability at the selected item of " +
                            rec.question_id);
    info -= std::log(p);
  }
  return info;
}

}  // namespace iia
