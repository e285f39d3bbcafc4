// Apache License, Version 2.0, refer to LICENSE.txt
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "iiacheck/synthgen.hpp"

using iia::MixtureComponent;
using iia::MixturePopulation;
using iia::Question;
using iia::QuestionSet;
using iia::SynthConfig;
using iia::ValidationError;

TEST_SUITE_BEGIN("synthgen");

namespace {

std::vector<std::string> universe10() {
  std::vector<std::string> u;
  for (int i = 0; i < 10; ++i) u.push_back("item" + std::to_string(i));
  return u;
}

}  // namespace

TEST_CASE("drop-one sets have the expected shape") {
  const auto set = iia::make_drop_one_set(3, universe10(), "item0");
  REQUIRE(set.questions.size() == 5);
  CHECK(set.questions[0].choice_set.size() == 4);
  const auto& base = set.questions[0].choice_set;
  for (int i = 1; i <= 4; ++i) {
    const auto& sub = set.questions[static_cast<std::size_t>(i)].choice_set;
    REQUIRE(sub.size() == 3);
    // Question i drops the i-th base option and keeps the rest in order.
    std::vector<std::string> expected;
    for (int k = 0; k < 4; ++k)
      if (k != i - 1) expected.push_back(base[static_cast<std::size_t>(k)]);
    CHECK(sub == expected);
  }
  for (const auto& q : set.questions) {
    CHECK(q.target == "item0");
    CHECK_NOTHROW(q.validate());
  }
  CHECK(set.items().size() == 4);

  // Deterministic under the seed; different seeds vary the drawn items.
  const auto again = iia::make_drop_one_set(3, universe10(), "item0");
  CHECK(again.questions[0].choice_set == base);
}

TEST_CASE("drop-one set requires a large enough universe") {
  CHECK_THROWS_AS(
      (void)iia::make_drop_one_set(1, {"a", "b", "c", "d"}, "a"),
      ValidationError);
}

TEST_CASE("iia generation is deterministic and consistent with its truth") {
  const auto set = iia::make_drop_one_set(5, universe10(), "item1");
  const auto a = iia::gen_iia_responses(set, 2.0, 30, 77);
  const auto b = iia::gen_iia_responses(set, 2.0, 30, 77);
  REQUIRE(a.table.counts() == b.table.counts());
  for (std::size_t q = 0; q < set.questions.size(); ++q) {
    CHECK(a.table.total_for(q) == 30);
    // Truth probabilities are the softmax of the truth scores.
    const auto pi =
        iia::choice_probabilities(a.truth.scores, set.questions[q]);
    REQUIRE(a.truth.question_probs[q].size() == pi.size());
    for (std::size_t k = 0; k < pi.size(); ++k)
      CHECK(a.truth.question_probs[q][k] == doctest::Approx(pi[k]).epsilon(1e-12));
  }
  const auto c = iia::gen_iia_responses(set, 2.0, 30, 78);
  CHECK(a.table.counts() != c.table.counts());
}

TEST_CASE("iia truth probabilities obey odds invariance across questions") {
  const auto set = iia::make_drop_one_set(5, universe10(), "item1");
  const auto g = iia::gen_iia_responses(set, 2.0, 30, 91);
  // Odds of the two shared surviving items agree between the base question
  // and every drop-one question.
  for (int i = 1; i <= 4; ++i) {
    const auto& sub = set.questions[static_cast<std::size_t>(i)];
    const auto& base = set.questions[0];
    const auto& pb = g.truth.question_probs[0];
    const auto& ps = g.truth.question_probs[static_cast<std::size_t>(i)];
    const int a0 = base.option_index(sub.choice_set[0]);
    const int a1 = base.option_index(sub.choice_set[1]);
    REQUIRE(a0 >= 0);
    REQUIRE(a1 >= 0);
    CHECK(ps[0] / ps[1] ==
          doctest::Approx(pb[static_cast<std::size_t>(a0)] /
                          pb[static_cast<std::size_t>(a1)])
              .epsilon(1e-9));
  }
}

TEST_CASE("zero-scale perturbations reduce to the iia generator") {
  const auto set = iia::make_drop_one_set(6, universe10(), "item2");
  const auto base = iia::gen_iia_responses(set, 2.0, 40, 123);
  const auto add = iia::gen_additive_responses(set, 2.0, 0.0, 40, 123);
  const auto mul = iia::gen_multiplicative_responses(set, 2.0, 0.0, 40, 123);
  for (std::size_t q = 0; q < set.questions.size(); ++q) {
    for (std::size_t k = 0; k < base.truth.question_probs[q].size(); ++k) {
      CHECK(add.truth.question_probs[q][k] ==
            doctest::Approx(base.truth.question_probs[q][k]).epsilon(1e-12));
      CHECK(mul.truth.question_probs[q][k] ==
            doctest::Approx(base.truth.question_probs[q][k]).epsilon(1e-12));
    }
  }
}

TEST_CASE("additive noise perturbs every question except the base") {
  const auto set = iia::make_drop_one_set(6, universe10(), "item2");
  const auto g = iia::gen_additive_responses(set, 2.0, 0.6, 40, 5);
  // Base question probabilities still match the unperturbed scores.
  const auto pi0 = iia::choice_probabilities(g.truth.scores, set.questions[0]);
  for (std::size_t k = 0; k < pi0.size(); ++k)
    CHECK(g.truth.question_probs[0][k] == doctest::Approx(pi0[k]).epsilon(1e-12));
  // Drop-one questions deviate from the IIA prediction.
  int deviating = 0;
  for (int i = 1; i <= 4; ++i) {
    const auto pi =
        iia::choice_probabilities(g.truth.scores,
                                  set.questions[static_cast<std::size_t>(i)]);
    for (std::size_t k = 0; k < pi.size(); ++k)
      if (std::abs(pi[k] - g.truth.question_probs[static_cast<std::size_t>(i)][k]) >
          1e-6)
        ++deviating;
  }
  CHECK(deviating > 0);
}

TEST_CASE("sampled frequencies match the truth probabilities") {
  const auto set = iia::make_drop_one_set(8, universe10(), "item3");
  const int n = 30000;  // > 1e5 draws across the five questions
  const auto g = iia::gen_additive_responses(set, 2.0, 0.4, n, 321);
  for (std::size_t q = 0; q < set.questions.size(); ++q) {
    const auto& counts = g.table.counts()[q];
    for (std::size_t k = 0; k < counts.size(); ++k) {
      const double p = g.truth.question_probs[q][k];
      const double se = std::sqrt(p * (1.0 - p) / n);
      CHECK(std::abs(counts[k] / double(n) - p) <= 3.0 * se + 1e-12);
    }
  }
}

TEST_CASE("synthetic datasets are reproducible end to end") {
  SynthConfig cfg;
  cfg.m = 4;
  cfg.n = 25;
  cfg.sigma_p = 0.3;
  cfg.seed = 2024;
  const auto a = iia::make_synthetic_dataset(cfg, iia::ModelKind::additive);
  const auto b = iia::make_synthetic_dataset(cfg, iia::ModelKind::additive);
  REQUIRE(a.data.size() == 4);
  REQUIRE(a.truths.size() == 4);
  CHECK(a.universe == b.universe);
  for (std::size_t i = 0; i < a.data.size(); ++i) {
    CHECK(a.data.sets[i].target == b.data.sets[i].target);
    CHECK(a.data.tables[i].counts() == b.data.tables[i].counts());
  }
  // Each set contributes 5 questions with n responses each.
  CHECK(a.data.total_questions() == 20);
  CHECK(a.data.total_responses() == 4L * 5L * 25L);
  // Synthetic responses carry participant identities.
  CHECK(a.data.has_records());
}

TEST_CASE("config validation rejects nonsense") {
  SynthConfig cfg;
  cfg.sigma = -1.0;
  CHECK_THROWS_AS(cfg.validate(), ValidationError);
  cfg = SynthConfig{};
  cfg.m = 0;
  CHECK_THROWS_AS(cfg.validate(), ValidationError);
  cfg = SynthConfig{};
  cfg.n = 0;
  CHECK_THROWS_AS(cfg.validate(), ValidationError);
  cfg = SynthConfig{};
  cfg.sigma_p = -0.1;
  CHECK_THROWS_AS(cfg.validate(), ValidationError);
}

TEST_CASE("mixture marginals match the weighted component probabilities") {
  const std::vector<Question> questions{
      {"q1", "t", {"a", "b", "c"}},
      {"q2", "t", {"a", "b", "c"}},
  };
  MixturePopulation mix;
  mix.components = {
      {0.5, {{0.4, 0.6, 0.0}, {0.2, 0.3, 0.5}}},
      {0.5, {{0.09, 0.01, 0.9}, {0.9, 0.1, 0.0}}},
  };
  // Marginals: q1 (0.245, 0.305, 0.45); q2 (0.55, 0.2, 0.25). The odds of
  // a against b differ across the questions, so the marginal violates IIA.
  const int n = 40000;
  const auto data = iia::make_mixture_dataset(questions, mix, n, 99);
  REQUIRE(data.size() == 1);
  CHECK(data.has_records());
  const std::vector<std::vector<double>> expected{
      {0.245, 0.305, 0.45}, {0.55, 0.2, 0.25}};
  for (std::size_t q = 0; q < 2; ++q) {
    CHECK(data.tables[0].total_for(q) == n);
    for (std::size_t k = 0; k < 3; ++k) {
      const double p = expected[q][k];
      const double se = std::sqrt(p * (1.0 - p) / n);
      CHECK(std::abs(data.tables[0].counts()[q][k] / double(n) - p) <=
            4.0 * se);
    }
  }
}

TEST_CASE("mixture participants answer consistently from one component") {
  // With disjoint supports, every participant stays inside one component's
  // support on both questions.
  const std::vector<Question> questions{
      {"q1", "t", {"a", "b"}},
      {"q2", "t", {"a", "b"}},
  };
  MixturePopulation mix;
  mix.components = {
      {0.5, {{1.0, 0.0}, {1.0, 0.0}}},
      {0.5, {{0.0, 1.0}, {0.0, 1.0}}},
  };
  const auto records = iia::gen_mixture_responses(questions, mix, 50, 7);
  REQUIRE(records.size() == 100);
  std::map<std::string, std::set<std::string>> by_participant;
  for (const auto& r : records) by_participant[r.participant].insert(r.selected);
  CHECK(by_participant.size() == 50);
  for (const auto& [pid, selections] : by_participant)
    CHECK(selections.size() == 1);
}

TEST_CASE("mixture validation") {
  const std::vector<Question> questions{{"q1", "t", {"a", "b"}}};
  MixturePopulation bad_weights;
  bad_weights.components = {{0.4, {{0.5, 0.5}}}, {0.4, {{0.5, 0.5}}}};
  CHECK_THROWS_AS(bad_weights.validate(questions), ValidationError);

  MixturePopulation bad_probs;
  bad_probs.components = {{1.0, {{0.7, 0.7}}}};
  CHECK_THROWS_AS(bad_probs.validate(questions), ValidationError);

  MixturePopulation bad_arity;
  bad_arity.components = {{1.0, {{0.5, 0.3, 0.2}}}};
  CHECK_THROWS_AS(bad_arity.validate(questions), ValidationError);

  MixturePopulation empty;
  CHECK_THROWS_AS(empty.validate(questions), ValidationError);
}

TEST_SUITE_END();
