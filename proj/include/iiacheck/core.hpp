// Apache License, Version 2.0, refer to LICENSE.txt

#ifndef IIACHECK_CORE_HPP
#define IIACHECK_CORE_HPP

#include <cstdint>
#include <map>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace iia {

// Bad inputs: schema violations, invariant breaches, untestable configurations.
class ValidationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Question sets too small to test (degrees of freedom below one).
class UntestableError : public ValidationError {
 public:
  using ValidationError::ValidationError;
};

// MCMC failures: non-finite density at initialization, broken runs.
class SamplerError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class ModelKind { iia, additive, multiplicative };

std::string to_string(ModelKind kind);
ModelKind model_kind_from_string(const std::string& name);

// Choice sets beyond this size are rejected on input. Survey-style data has
// three or four options per question.
inline constexpr std::size_t kMaxChoiceSetSize = 64;

struct ItemUniverse {
  std::vector<std::string> items;

  static ItemUniverse of(std::vector<std::string> items);
  std::size_t size() const { return items.size(); }
  bool contains(const std::string& item) const;
};

// One similarity question: which member of `choice_set` is most similar to
// `target`?
struct Question {
  std::string id;
  std::string target;
  std::vector<std::string> choice_set;

  void validate(const ItemUniverse* universe = nullptr) const;
  bool has_option(const std::string& item) const;
  int option_index(const std::string& item) const;  // -1 when absent
};

// All questions sharing one target; the unit over which choice consistency
// is defined and tested.
struct QuestionSet {
  std::string target;
  std::vector<Question> questions;
  std::size_t index = 0;

  void validate() const;
  // Distinct non-target items across the choice sets, sorted.
  std::vector<std::string> items() const;
  int question_index(const std::string& question_id) const;  // -1 when absent
};

struct ResponseRecord {
  std::string participant;
  std::string question_id;
  std::string selected;

  bool operator==(const ResponseRecord&) const = default;
};

// Per-set observations: raw records (when participant identities exist) and
// per-question counts aligned with each question's choice_set order.
class ResponseTable {
 public:
  static ResponseTable from_records(const QuestionSet& set,
                                    std::vector<ResponseRecord> records);
  // Aggregate-only tables: counts[q][k] aligned with set.questions[q].choice_set.
  static ResponseTable from_counts(const QuestionSet& set,
                                   std::vector<std::vector<int>> counts);

  bool has_records() const { return has_records_; }
  const std::vector<ResponseRecord>& records() const { return records_; }
  const std::vector<std::vector<int>>& counts() const { return counts_; }
  const std::vector<int>& counts_for(std::size_t question_idx) const {
    return counts_[question_idx];
  }
  int total_for(std::size_t question_idx) const { return totals_[question_idx]; }
  long total_responses() const;

 private:
  std::vector<ResponseRecord> records_;
  std::vector<std::vector<int>> counts_;
  std::vector<int> totals_;
  bool has_records_ = false;
};

// Similarity scores of items to one target. Canonical gauge: scores sum to 0
// (the choice probabilities are invariant under a common shift).
struct ScoreVector {
  std::string target;
  std::map<std::string, double> scores;

  double at(const std::string& item) const;
  bool has(const std::string& item) const { return scores.count(item) != 0; }
  void center();
  void validate() const;  // finite entries
};

// A partitioned dataset: question sets (grouped by target) with their
// response tables, parallel by index.
struct Dataset {
  std::vector<QuestionSet> sets;
  std::vector<ResponseTable> tables;

  std::size_t size() const { return sets.size(); }
  bool has_records() const;
  long total_questions() const;
  long total_responses() const;
};

// Partition questions by target and route each response to its set.
// Set ordering is deterministic (by target identifier).
Dataset build_question_sets(const std::vector<Question>& questions,
                            const std::vector<ResponseRecord>& responses,
                            const ItemUniverse* universe = nullptr);

// Softmax choice probabilities over the question's choice set, computed with
// max-subtraction: entries positive, summing to one within 1e-12.
std::vector<double> choice_probabilities(const ScoreVector& scores,
                                         const Question& question);

// In-place softmax over arbitrary logits.
void softmax_inplace(std::span<double> logits);

// Indexed view of one question set: items mapped to dense indices, counts as
// doubles, everything the numeric modules iterate over.
struct SetLayout {
  std::vector<std::string> items;               // sorted distinct non-target items
  std::vector<std::vector<int>> choice_idx;     // [question][slot] -> item index
  std::vector<std::vector<double>> counts;      // [question][slot]
  std::vector<double> totals;                   // responses per question

  static SetLayout build(const QuestionSet& set, const ResponseTable& table);

  std::size_t num_items() const { return items.size(); }
  std::size_t num_questions() const { return choice_idx.size(); }
  // Items never selected in any question of the set.
  std::vector<std::string> never_chosen() const;
  // Copy with the given items removed from the item list and from every
  // choice set (their observed counts are all zero by construction).
  SetLayout without_items(const std::vector<std::string>& drop) const;
};

}  // namespace iia

#endif  // IIACHECK_CORE_HPP
