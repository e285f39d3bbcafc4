// Apache License, Version 2.0, refer to LICENSE.txt

#include "iiacheck/synthgen.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>

namespace iia {

void SynthConfig::validate() const {
  if (!(sigma > 0.0)) throw ValidationError("sigma must be positive");
  if (sigma_p < 0.0 || sigma_m < 0.0)
    throw ValidationError("perturbation scales must be non-negative");
  if (m < 1 || n < 1) throw ValidationError("m and n must be at least 1");
}

namespace {

std::string zero_pad(std::size_t value, int width) {
  std::string s = std::to_string(value);
  if (static_cast<int>(s.size()) < width)
    s.insert(s.begin(), width - s.size(), '0');
  return s;
}

// Sample `count` distinct indices from [0, pool_size) by partial
// Fisher-Yates over an index vector.
std::vector<std::size_t> sample_without_replacement(RngStream& rng,
                                                    std::size_t pool_size,
                                                    std::size_t count) {
  std::vector<std::size_t> pool(pool_size);
  for (std::size_t i = 0; i < pool_size; ++i) pool[i] = i;
  for (std::size_t i = 0; i < count; ++i) {
    std::size_t j = i + static_cast<std::size_t>(
                            rng.uniform() * static_cast<double>(pool_size - i));
    if (j >= pool_size) j = pool_size - 1;
    std::swap(pool[i], pool[j]);
  }
  pool.resize(count);
  return pool;
}

// Shared response-drawing step: every question answered by n participants
// sampled from the per-question ground-truth probabilities.
ResponseTable draw_responses(const QuestionSet& set,
                             const std::vector<std::vector<double>>& probs,
                             int n, RngStream responses_rng) {
  std::vector<ResponseRecord> records;
  records.reserve(set.questions.size() * static_cast<std::size_t>(n));
  for (std::size_t q = 0; q < set.questions.size(); ++q) {
    RngStream qrng = responses_rng.derive(q);
    const auto& question = set.questions[q];
    for (int p = 0; p < n; ++p) {
      std::size_t pick = qrng.categorical(probs[q]);
      records.push_back(ResponseRecord{
          "s" + zero_pad(set.index, 3) + "_q" + std::to_string(q) + "_p" +
              zero_pad(static_cast<std::size_t>(p), 3),
          question.id, question.choice_set[pick]});
    }
  }
  return ResponseTable::from_records(set, std::move(records));
}

ScoreVector draw_scores(const QuestionSet& set, double sigma,
                        RngStream scores_rng) {
  ScoreVector scores;
  scores.target = set.target;
  for (const auto& item : set.items())
    scores.scores.emplace(item, sigma * scores_rng.normal());
  return scores;
}

}  // namespace

QuestionSet make_drop_one_set(std::uint64_t seed,
                              const std::vector<std::string>& universe,
                              const std::string& target,
                              std::size_t set_index) {
  if (universe.size() < 5)
    throw ValidationError(
        "drop-one construction needs a universe of at least 5 items");
  std::vector<std::string> pool;
  pool.reserve(universe.size());
  for (const auto& item : universe)
    if (item != target) pool.push_back(item);
  if (pool.size() < 4)
    throw ValidationError("universe minus target has fewer than 4 items");

  RngStream rng = RngStream(seed).derive("drop_one").derive(target);
  std::vector<std::string> base(4);
  auto picks = sample_without_replacement(rng, pool.size(), 4);
  for (std::size_t k = 0; k < 4; ++k) base[k] = pool[picks[k]];

  QuestionSet set;
  set.target = target;
  set.index = set_index;
  set.questions.push_back(
      Question{target + ":Q0", target, base});
  for (std::size_t drop = 0; drop < 4; ++drop) {
    std::vector<std::string> reduced;
    reduced.reserve(3);
    for (std::size_t k = 0; k < 4; ++k)
      if (k != drop) reduced.push_back(base[k]);
    set.questions.push_back(Question{
        target + ":Q" + std::to_string(drop + 1), target, std::move(reduced)});
  }
  set.validate();
  return set;
}

SynthSet gen_iia_responses(const QuestionSet& set, double sigma, int n,
                           std::uint64_t seed) {
  if (n < 1) throw ValidationError("n must be at least 1");
  RngStream root(seed);
  SynthSet out;
  out.set = set;
  out.truth.scores = draw_scores(set, sigma, root.derive("scores"));
  out.truth.question_probs.resize(set.questions.size());
  for (std::size_t q = 0; q < set.questions.size(); ++q)
    out.truth.question_probs[q] =
        choice_probabilities(out.truth.scores, set.questions[q]);
  out.table =
      draw_responses(set, out.truth.question_probs, n, root.derive("responses"));
  return out;
}

SynthSet gen_additive_responses(const QuestionSet& set, double sigma,
                                double sigma_p, int n, std::uint64_t seed) {
  if (n < 1) throw ValidationError("n must be at least 1");
  if (sigma_p < 0.0) throw ValidationError("sigma_p must be non-negative");
  RngStream root(seed);
  SynthSet out;
  out.set = set;
  out.truth.scores = draw_scores(set, sigma, root.derive("scores"));

  // One perturbation per (drop-one question, choice-set item); the first
  // question is the unperturbed base. With sigma_p = 0 the perturbations
  // vanish exactly and the probabilities match gen_iia_responses.
  RngStream perturb = root.derive("perturb");
  out.truth.question_probs.resize(set.questions.size());
  for (std::size_t q = 0; q < set.questions.size(); ++q) {
    const auto& question = set.questions[q];
    std::vector<double> logits(question.choice_set.size());
    for (std::size_t k = 0; k < logits.size(); ++k) {
      logits[k] = out.truth.scores.at(question.choice_set[k]);
      if (q > 0) logits[k] += sigma_p * perturb.normal();
    }
    softmax_inplace(logits);
    out.truth.question_probs[q] = std::move(logits);
  }
  out.table =
      draw_responses(set, out.truth.question_probs, n, root.derive("responses"));
  return out;
}

SynthSet gen_multiplicative_responses(const QuestionSet& set, double sigma,
                                      double sigma_m, int n,
                                      std::uint64_t seed) {
  if (n < 1) throw ValidationError("n must be at least 1");
  if (sigma_m < 0.0) throw ValidationError("sigma_m must be non-negative");
  RngStream root(seed);
  SynthSet out;
  out.set = set;
  out.truth.scores = draw_scores(set, sigma, root.derive("scores"));

  RngStream perturb = root.derive("perturb");
  out.truth.question_probs.resize(set.questions.size());
  for (std::size_t q = 0; q < set.questions.size(); ++q) {
    const auto& question = set.questions[q];
    double eps = q == 0 ? 1.0 : 1.0 + sigma_m * perturb.normal();
    std::vector<double> logits(question.choice_set.size());
    for (std::size_t k = 0; k < logits.size(); ++k)
      logits[k] = eps * out.truth.scores.at(question.choice_set[k]);
    softmax_inplace(logits);
    out.truth.question_probs[q] = std::move(logits);
  }
  out.table =
      draw_responses(set, out.truth.question_probs, n, root.derive("responses"));
  return out;
}

void MixturePopulation::validate(const std::vector<Question>& questions) const {
  if (components.empty())
    throw ValidationError("mixture needs at least one component");
  double total = 0.0;
  for (const auto& comp : components) {
    if (!(comp.weight >= 0.0))
      throw ValidationError("mixture weights must be non-negative");
    total += comp.weight;
    if (comp.probs.size() != questions.size())
      throw ValidationError(
          "mixture component does not cover every question (" +
          std::to_string(comp.probs.size()) + " vectors for " +
          std::to_string(questions.size()) + " questions)");
    for (std::size_t q = 0; q < questions.size(); ++q) {
      if (comp.probs[q].size() != questions[q].choice_set.size())
        throw ValidationError("mixture probabilities for question " +
                              questions[q].id + " have the wrong arity");
      double sum = 0.0;
      for (double p : comp.probs[q]) {
        if (p < 0.0)
          throw ValidationError("negative probability in mixture component");
        sum += p;
      }
      if (std::abs(sum - 1.0) > 1e-9)
        throw ValidationError("mixture probabilities for question " +
                              questions[q].id + " do not sum to 1");
    }
  }
  if (std::abs(total - 1.0) > 1e-9)
    throw ValidationError("mixture weights do not sum to 1");
}

std::vector<ResponseRecord> gen_mixture_responses(
    const std::vector<Question>& questions, const MixturePopulation& mixture,
    int n, std::uint64_t seed) {
  if (n < 1) throw ValidationError("n must be at least 1");
  mixture.validate(questions);

  std::vector<double> weights;
  weights.reserve(mixture.components.size());
  for (const auto& comp : mixture.components) weights.push_back(comp.weight);

  RngStream root(seed);
  std::vector<ResponseRecord> records;
  records.reserve(static_cast<std::size_t>(n) * questions.size());
  for (int p = 0; p < n; ++p) {
    RngStream prng = root.derive("participant").derive(static_cast<std::uint64_t>(p));
    std::size_t comp = prng.categorical(weights);
    const auto& probs = mixture.components[comp].probs;
    std::string pid = "p" + zero_pad(static_cast<std::size_t>(p), 4);
    for (std::size_t q = 0; q < questions.size(); ++q) {
      std::size_t pick = prng.categorical(probs[q]);
      records.push_back(
          ResponseRecord{pid, questions[q].id, questions[q].choice_set[pick]});
    }
  }
  return records;
}

Dataset make_mixture_dataset(const std::vector<Question>& questions,
                             const MixturePopulation& mixture, int n,
                             std::uint64_t seed) {
  return build_question_sets(questions,
                             gen_mixture_responses(questions, mixture, n, seed));
}

SynthDataset make_synthetic_dataset(const SynthConfig& config, ModelKind kind) {
  config.validate();
  SynthDataset out;
  std::size_t universe_size =
      std::max<std::size_t>(static_cast<std::size_t>(config.m), 5);
  out.universe.reserve(universe_size);
  for (std::size_t i = 0; i < universe_size; ++i)
    out.universe.push_back("item_" + zero_pad(i, 3));

  RngStream root(config.seed);
  for (int i = 0; i < config.m; ++i) {
    const std::string& target =
        out.universe[static_cast<std::size_t>(i) % universe_size];
    QuestionSet set = make_drop_one_set(
        root.derive("topology").derive(static_cast<std::uint64_t>(i)).next_u64(),
        out.universe, target, static_cast<std::size_t>(i));
    std::uint64_t set_seed =
        root.derive("set").derive(static_cast<std::uint64_t>(i)).next_u64();
    SynthSet synth;
    switch (kind) {
      case ModelKind::iia:
        synth = gen_iia_responses(set, config.sigma, config.n, set_seed);
        break;
      case ModelKind::additive:
        synth = gen_additive_responses(set, config.sigma, config.sigma_p,
                                       config.n, set_seed);
        break;
      case ModelKind::multiplicative:
        synth = gen_multiplicative_responses(set, config.sigma, config.sigma_m,
                                             config.n, set_seed);
        break;
    }
    out.data.sets.push_back(std::move(synth.set));
    out.data.tables.push_back(std::move(synth.table));
    out.truths.push_back(std::move(synth.truth));
  }
  return out;
}

}  // namespace iia
