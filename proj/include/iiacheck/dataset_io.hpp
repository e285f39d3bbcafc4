// Apache License, Version 2.0, refer to LICENSE.txt

#ifndef IIACHECK_DATASET_IO_HPP
#define IIACHECK_DATASET_IO_HPP

#include <string>
#include <vector>

#include "iiacheck/core.hpp"

namespace iia {

// Minimal CSV support: comma-separated, double-quote quoting with "" escapes,
// LF or CRLF line endings. Every row keeps its 1-based source line for error
// messages.
struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;
  std::vector<long> row_lines;
  std::string origin;  // file name used in error messages
};

CsvTable parse_csv(const std::string& text, const std::string& origin);
CsvTable read_csv(const std::string& path);

// Quote a field if it contains commas, quotes, or newlines.
std::string csv_quote(const std::string& field);

// Canonical decimal rendering of a double, shared by the JSON and CSV writers
// so that both files carry byte-identical numbers.
std::string format_number(double v);

std::string read_file(const std::string& path);
// Writes via a temporary file in the same directory plus an atomic rename, so
// readers never observe a half-written file.
void write_file_atomic(const std::string& path, const std::string& content);

// questions.csv: header `question_id,target,opt1..optK`; rows may use fewer
// option columns than the header (shorter choice sets leave a suffix empty).
std::vector<Question> read_questions_csv(const std::string& path);
void write_questions_csv(const std::string& path,
                         const std::vector<Question>& questions);

// responses.csv: header `participant_id,question_id,selected`. Participant
// ids are either present on every row or absent on every row (aggregate-only
// data). Duplicate (participant_id, question_id) pairs are rejected.
std::vector<ResponseRecord> read_responses_csv(const std::string& path);
void write_responses_csv(const std::string& path,
                         const std::vector<ResponseRecord>& records);

// Distinct targets and options across all questions, sorted.
ItemUniverse derive_universe(const std::vector<Question>& questions);

// Convenience: read both files and partition into question sets.
Dataset load_dataset(const std::string& questions_path,
                     const std::string& responses_path);

}  // namespace iia

#endif  // IIACHECK_DATASET_IO_HPP
