// Apache License, Version 2.0, refer to LICENSE.txt

#include "iiacheck/core.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>
#include <unordered_map>
#include <unordered_set>

namespace iia {

std::string to_string(ModelKind kind) {
  switch (kind) {
    case ModelKind::iia: return "iia";
    case ModelKind::additive: return "additive";
    case ModelKind::multiplicative: return "multiplicative";
  }
  throw std::logic_error("unknown ModelKind");
}

ModelKind model_kind_from_string(const std::string& name) {
  if (name == "iia") return ModelKind::iia;
  if (name == "additive") return ModelKind::additive;
  if (name == "multiplicative") return ModelKind::multiplicative;
  throw ValidationError("unknown model kind: '" + name +
                        "' (expected iia, additive, or multiplicative)");
}

ItemUniverse ItemUniverse::of(std::vector<std::string> items) {
  std::unordered_set<std::string> seen;
  for (const auto& it : items) {
    if (it.empty()) throw ValidationError("universe contains an empty item id");
    if (!seen.insert(it).second)
      throw ValidationError("duplicate item in universe: " + it);
  }
  return ItemUniverse{std::move(items)};
}

bool ItemUniverse::contains(const std::string& item) const {
  return std::find(items.begin(), items.end(), item) != items.end();
}

void Question::validate(const ItemUniverse* universe) const {
  if (id.empty()) throw ValidationError("question has an empty id");
  if (target.empty())
    throw ValidationError("question " + id + " has an empty target");
  if (choice_set.size() < 2)
    throw ValidationError("question " + id +
                          " has fewer than two options");
  if (choice_set.size() > kMaxChoiceSetSize)
    throw ValidationError("question " + id + " has more than " +
                          std::to_string(kMaxChoiceSetSize) + " options");
  std::unordered_set<std::string> seen;
  for (const auto& opt : choice_set) {
    if (opt.empty())
      throw ValidationError("question " + id + " has an empty option id");
    if (opt == target)
      throw ValidationError("question " + id +
                            " lists its target among the options");
    if (!seen.insert(opt).second)
      throw ValidationError("question " + id + " has a duplicate option: " + opt);
    if (universe != nullptr && !universe->contains(opt))
      throw ValidationError("question " + id + " option not in universe: " + opt);
  }
  if (universe != nullptr && !universe->contains(target))
    throw ValidationError("question " + id + " target not in universe: " + target);
}

bool Question::has_option(const std::string& item) const {
  return option_index(item) >= 0;
}

int Question::option_index(const std::string& item) const {
  for (std::size_t k = 0; k < choice_set.size(); ++k)
    if (choice_set[k] == item) return static_cast<int>(k);
  return -1;
}

void QuestionSet::validate() const {
  if (questions.empty())
    throw ValidationError("question set '" + target + "' has no questions");
  std::unordered_set<std::string> ids;
  for (const auto& q : questions) {
    q.validate();
    if (q.target != target)
      throw ValidationError("question " + q.id + " has target '" + q.target +
                            "' inside set '" + target + "'");
    if (!ids.insert(q.id).second)
      throw ValidationError("duplicate question id in set '" + target +
                            "': " + q.id);
  }
}

std::vector<std::string> QuestionSet::items() const {
  std::set<std::string> distinct;
  for (const auto& q : questions)
    distinct.insert(q.choice_set.begin(), q.choice_set.end());
  return {distinct.begin(), distinct.end()};
}

int QuestionSet::question_index(const std::string& question_id) const {
  for (std::size_t q = 0; q < questions.size(); ++q)
    if (questions[q].id == question_id) return static_cast<int>(q);
  return -1;
}

ResponseTable ResponseTable::from_records(const QuestionSet& set,
                                          std::vector<ResponseRecord> records) {
  ResponseTable table;
  table.has_records_ = true;
  table.counts_.assign(set.questions.size(), {});
  table.totals_.assign(set.questions.size(), 0);
  for (std::size_t q = 0; q < set.questions.size(); ++q)
    table.counts_[q].assign(set.questions[q].choice_set.size(), 0);
  for (const auto& rec : records) {
    int q = set.question_index(rec.question_id);
    if (q < 0)
      throw ValidationError("response references unknown question: " +
                            rec.question_id);
    int k = set.questions[q].option_index(rec.selected);
    if (k < 0)
      throw ValidationError("response to question " + rec.question_id +
                            " selects '" + rec.selected +
                            "', which is not among its options");
    ++table.counts_[q][k];
    ++table.totals_[q];
  }
  table.records_ = std::move(records);
  return table;
}

ResponseTable ResponseTable::from_counts(const QuestionSet& set,
                                         std::vector<std::vector<int>> counts) {
  if (counts.size() != set.questions.size())
    throw ValidationError("count rows (" + std::to_string(counts.size()) +
                          ") do not match questions (" +
                          std::to_string(set.questions.size()) + ") for set '" +
                          set.target + "'");
  ResponseTable table;
  table.has_records_ = false;
  table.totals_.assign(counts.size(), 0);
  for (std::size_t q = 0; q < counts.size(); ++q) {
    if (counts[q].size() != set.questions[q].choice_set.size())
      throw ValidationError("count row for question " + set.questions[q].id +
                            " has wrong arity");
    for (int c : counts[q]) {
      if (c < 0)
        throw ValidationError("negative count for question " +
                              set.questions[q].id);
      table.totals_[q] += c;
    }
  }
  table.counts_ = std::move(counts);
  return table;
}

long ResponseTable::total_responses() const {
  return std::accumulate(totals_.begin(), totals_.end(), 0L);
}

double ScoreVector::at(const std::string& item) const {
  auto it = scores.find(item);
  if (it == scores.end())
    throw ValidationError("no score for item '" + item + "' (target '" +
                          target + "')");
  return it->second;
}

void ScoreVector::center() {
  if (scores.empty()) return;
  double mean = 0.0;
  for (const auto& [_, s] : scores) mean += s;
  mean /= static_cast<double>(scores.size());
  for (auto& [_, s] : scores) s -= mean;
}

void ScoreVector::validate() const {
  for (const auto& [item, s] : scores)
    if (!std::isfinite(s))
      throw ValidationError("non-finite score for item '" + item + "'");
}

bool Dataset::has_records() const {
  for (const auto& t : tables)
    if (t.has_records()) return true;
  return false;
}

long Dataset::total_questions() const {
  long n = 0;
  for (const auto& s : sets) n += static_cast<long>(s.questions.size());
  return n;
}

long Dataset::total_responses() const {
  long n = 0;
  for (const auto& t : tables) n += t.total_responses();
  return n;
}

Dataset build_question_sets(const std::vector<Question>& questions,
                            const std::vector<ResponseRecord>& responses,
                            const ItemUniverse* universe) {
  std::unordered_set<std::string> qids;
  for (const auto& q : questions) {
    q.validate(universe);
    if (!qids.insert(q.id).second)
      throw ValidationError("duplicate question id: " + q.id);
  }

  std::map<std::string, QuestionSet> by_target;  // ordered -> deterministic
  for (const auto& q : questions) {
    auto& set = by_target[q.target];
    set.target = q.target;
    set.questions.push_back(q);
  }

  std::unordered_map<std::string, std::string> target_of;
  for (const auto& q : questions) target_of.emplace(q.id, q.target);

  std::map<std::string, std::vector<ResponseRecord>> recs_by_target;
  bool any_pid = false;
  bool all_pid = true;
  for (const auto& r : responses) {
    auto it = target_of.find(r.question_id);
    if (it == target_of.end())
      throw ValidationError("response references unknown question: " +
                            r.question_id);
    if (r.participant.empty()) {
      all_pid = false;
    } else {
      any_pid = true;
    }
    recs_by_target[it->second].push_back(r);
  }
  if (any_pid && !all_pid)
    throw ValidationError(
        "responses mix empty and non-empty participant ids; provide "
        "participant ids for all rows or for none");

  Dataset ds;
  std::size_t idx = 0;
  for (auto& [target, set] : by_target) {
    set.index = idx++;
    set.validate();
    ResponseTable table =
        ResponseTable::from_records(set, std::move(recs_by_target[target]));
    if (!any_pid) {
      // Aggregate-only input: keep the counts, drop the anonymous records so
      // participant-level analyses refuse to run.
      std::vector<std::vector<int>> counts = table.counts();
      table = ResponseTable::from_counts(set, std::move(counts));
    }
    ds.tables.push_back(std::move(table));
    ds.sets.push_back(std::move(set));
  }
  return ds;
}

void softmax_inplace(std::span<double> logits) {
  if (logits.empty()) return;
  double mx = logits[0];
  for (double v : logits) mx = std::max(mx, v);
  double sum = 0.0;
  for (double& v : logits) {
    v = std::exp(v - mx);
    sum += v;
  }
  for (double& v : logits) v /= sum;
}

std::vector<double> choice_probabilities(const ScoreVector& scores,
                                         const Question& question) {
  std::vector<double> p(question.choice_set.size());
  for (std::size_t k = 0; k < p.size(); ++k)
    p[k] = scores.at(question.choice_set[k]);
  softmax_inplace(p);
  return p;
}

SetLayout SetLayout::build(const QuestionSet& set, const ResponseTable& table) {
  SetLayout layout;
  layout.items = set.items();
  std::unordered_map<std::string, int> index;
  for (std::size_t i = 0; i < layout.items.size(); ++i)
    index.emplace(layout.items[i], static_cast<int>(i));

  layout.choice_idx.resize(set.questions.size());
  layout.counts.resize(set.questions.size());
  layout.totals.resize(set.questions.size());
  for (std::size_t q = 0; q < set.questions.size(); ++q) {
    const auto& cs = set.questions[q].choice_set;
    layout.choice_idx[q].resize(cs.size());
    layout.counts[q].resize(cs.size());
    for (std::size_t k = 0; k < cs.size(); ++k) {
      layout.choice_idx[q][k] = index.at(cs[k]);
      layout.counts[q][k] = static_cast<double>(table.counts()[q][k]);
    }
    layout.totals[q] = static_cast<double>(table.total_for(q));
  }
  return layout;
}

std::vector<std::string> SetLayout::never_chosen() const {
  std::vector<double> chosen(items.size(), 0.0);
  for (std::size_t q = 0; q < counts.size(); ++q)
    for (std::size_t k = 0; k < counts[q].size(); ++k)
      chosen[static_cast<std::size_t>(choice_idx[q][k])] += counts[q][k];
  std::vector<std::string> out;
  for (std::size_t i = 0; i < items.size(); ++i)
    if (chosen[i] == 0.0) out.push_back(items[i]);
  return out;
}

SetLayout SetLayout::without_items(const std::vector<std::string>& drop) const {
  std::unordered_set<std::string> dropped(drop.begin(), drop.end());
  SetLayout out;
  std::unordered_map<std::string, int> index;
  for (const auto& item : items) {
    if (dropped.count(item)) continue;
    index.emplace(item, static_cast<int>(out.items.size()));
    out.items.push_back(item);
  }
  out.choice_idx.resize(choice_idx.size());
  out.counts.resize(counts.size());
  out.totals = totals;
  for (std::size_t q = 0; q < choice_idx.size(); ++q) {
    for (std::size_t k = 0; k < choice_idx[q].size(); ++k) {
      const auto& item = items[static_cast<std::size_t>(choice_idx[q][k])];
      auto it = index.find(item);
      if (it == index.end()) continue;  // dropped: zero observed count
      out.choice_idx[q].push_back(it->second);
      out.counts[q].push_back(counts[q][k]);
    }
  }
  return out;
}

}  // namespace iia
