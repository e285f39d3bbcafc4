// Apache License, Version 2.0, refer to LICENSE.txt

#ifndef IIACHECK_SYNTHGEN_HPP
#define IIACHECK_SYNTHGEN_HPP

#include <cstdint>
#include <string>
#include <vector>

#include "iiacheck/core.hpp"
#include "iiacheck/rng.hpp"

namespace iia {

struct SynthConfig {
  double sigma = 2.0;     // baseline score scale
  double sigma_p = 0.0;   // additive perturbation scale
  double sigma_m = 0.0;   // multiplicative perturbation scale
  int m = 100;            // question sets
  int n = 30;             // simulated participants per question
  std::uint64_t seed = 0;

  void validate() const;
};

// Everything the recovery experiments need: the scores actually drawn and the
// exact per-question probability vectors responses were sampled from.
struct SetGroundTruth {
  ScoreVector scores;
  std::vector<std::vector<double>> question_probs;  // [question][slot]
};

struct SynthSet {
  QuestionSet set;
  ResponseTable table;
  SetGroundTruth truth;
};

struct SynthDataset {
  Dataset data;
  std::vector<SetGroundTruth> truths;  // parallel to data.sets
  std::vector<std::string> universe;
};

// One 4-option question Q0 plus the four 3-option questions formed by
// dropping each option once. Choice items drawn from the universe minus the
// target; deterministic under seed.
QuestionSet make_drop_one_set(std::uint64_t seed,
                              const std::vector<std::string>& universe,
                              const std::string& target,
                              std::size_t set_index = 0);

// Scores s_k ~ N(0, sigma^2) once per item; every question answered by n
// simulated participants with softmax probabilities of those scores.
SynthSet gen_iia_responses(const QuestionSet& set, double sigma, int n,
                           std::uint64_t seed);

// Adds eps_k^i ~ N(0, sigma_p^2) per (drop-one question i = 1..4, item k) to
// the scores inside each perturbed question; the 4-option base question is
// not perturbed.
SynthSet gen_additive_responses(const QuestionSet& set, double sigma,
                                double sigma_p, int n, std::uint64_t seed);

// Multiplies scores by eps^i ~ N(1, sigma_m^2) per drop-one question; the
// base question is not perturbed. sigma_m is a standard deviation; negative
// draws are kept as-is (they invert the preference ordering).
SynthSet gen_multiplicative_responses(const QuestionSet& set, double sigma,
                                      double sigma_m, int n,
                                      std::uint64_t seed);

struct MixtureComponent {
  double weight = 0.0;
  // probs[q] is a distribution over questions[q].choice_set.
  std::vector<std::vector<double>> probs;
};

struct MixturePopulation {
  std::vector<MixtureComponent> components;

  void validate(const std::vector<Question>& questions) const;
};

// Each of n simulated participants is assigned a component by weight and
// answers every question from that component's vectors. Records carry
// participant identities, so the homogeneity test applies. Questions may
// span multiple targets; route the records with build_question_sets.
std::vector<ResponseRecord> gen_mixture_responses(
    const std::vector<Question>& questions, const MixturePopulation& mixture,
    int n, std::uint64_t seed);

// Convenience: generate and route into a Dataset in one call.
Dataset make_mixture_dataset(const std::vector<Question>& questions,
                             const MixturePopulation& mixture, int n,
                             std::uint64_t seed);

// The randomized-survey emulation: a universe of max(m, 5) items, one
// drop-one question set per target, responses from the chosen model.
// `perturbed` selects additive (sigma_p) or multiplicative (sigma_m) noise.
SynthDataset make_synthetic_dataset(const SynthConfig& config, ModelKind kind);

}  // namespace iia

#endif  // IIACHECK_SYNTHGEN_HPP
