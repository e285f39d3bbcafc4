// Apache License, Version 2.0, refer to LICENSE.txt

#include "iiacheck/dataset_io.hpp"

#include <unistd.h>

#include <cctype>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <utility>

#include <json.hpp>

namespace iia {

namespace {

[[noreturn]] void fail(const std::string& origin, long line,
                       const std::string& what) {
  std::ostringstream msg;
  msg << origin << ":" << line << ": " << what;
  throw ValidationError(msg.str());
}

}  // namespace

CsvTable parse_csv(const std::string& text, const std::string& origin) {
  CsvTable table;
  table.origin = origin;

  std::vector<std::string> row;
  std::string field;
  bool in_quotes = false;
  bool row_has_content = false;
  long line = 1;
  long row_start_line = 1;

  auto end_field = [&]() {
    row.push_back(std::move(field));
    field.clear();
  };
  auto end_row = [&]() {
    end_field();
    if (row.size() == 1 && row[0].empty() && !row_has_content) {
      row.clear();  // blank line
      return;
    }
    if (table.header.empty() && table.rows.empty() && table.row_lines.empty()) {
      table.header = std::move(row);
    } else {
      table.rows.push_back(std::move(row));
      table.row_lines.push_back(row_start_line);
    }
    row.clear();
    row_has_content = false;
  };

  for (std::size_t i = 0; i < text.size(); ++i) {
    const char c = text[i];
    if (in_quotes) {
      if (c == '"') {
        if (i + 1 < text.size() && text[i + 1] == '"') {
          field.push_back('"');
          ++i;
        } else {
          in_quotes = false;
        }
      } else {
        if (c == '\n') ++line;
        field.push_back(c);
      }
      continue;
    }
    switch (c) {
      case '"':
        if (!field.empty()) fail(origin, line, "unexpected quote inside field");
        in_quotes = true;
        row_has_content = true;
        break;
      case ',':
        end_field();
        row_has_content = true;
        break;
      case '\r':
        break;  // tolerate CRLF
      case '\n':
        end_row();
        ++line;
        row_start_line = line;
        break;
      default:
        field.push_back(c);
        row_has_content = true;
        break;
    }
  }
  if (in_quotes) fail(origin, line, "unterminated quoted field");
  if (row_has_content || !field.empty() || !row.empty()) end_row();
  if (table.header.empty()) fail(origin, 1, "missing header row");
  return table;
}

CsvTable read_csv(const std::string& path) {
  return parse_csv(read_file(path), path);
}

std::string csv_quote(const std::string& field) {
  bool needs = false;
  for (char c : field) {
    if (c == ',' || c == '"' || c == '\n' || c == '\r') {
      needs = true;
      break;
    }
  }
  if (!needs) return field;
  std::string out = "\"";
  for (char c : field) {
    if (c == '"') out += "\"\"";
    else out.push_back(c);
  }
  out += "\"";
  return out;
}

std::string format_number(double v) { return nlohmann::json(v).dump(); }

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ValidationError("cannot open file: " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  if (in.bad()) throw ValidationError("error reading file: " + path);
  return buf.str();
}

void write_file_atomic(const std::string& path, const std::string& content) {
  namespace fs = std::filesystem;
  const fs::path target(path);
  if (target.has_parent_path()) {
    std::error_code ec;
    fs::create_directories(target.parent_path(), ec);
  }
  const fs::path tmp =
      target.parent_path() /
      (target.filename().string() + ".tmp." + std::to_string(::getpid()));
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw ValidationError("cannot write file: " + tmp.string());
    out << content;
    out.flush();
    if (!out) throw ValidationError("error writing file: " + tmp.string());
  }
  std::error_code ec;
  fs::rename(tmp, target, ec);
  if (ec) {
    fs::remove(tmp, ec);
    throw ValidationError("cannot move temporary file onto " + path);
  }
}

std::vector<Question> read_questions_csv(const std::string& path) {
  const CsvTable table = read_csv(path);
  if (table.header.size() < 4 || table.header[0] != "question_id" ||
      table.header[1] != "target") {
    fail(table.origin, 1,
         "questions header must be question_id,target,opt1,... (at least two "
         "option columns)");
  }
  for (std::size_t j = 2; j < table.header.size(); ++j) {
    const std::string expected = "opt" + std::to_string(j - 1);
    if (table.header[j] != expected) {
      fail(table.origin, 1,
           "option column " + std::to_string(j + 1) + " must be named " +
               expected + ", got '" + table.header[j] + "'");
    }
  }
  std::vector<Question> questions;
  for (std::size_t r = 0; r < table.rows.size(); ++r) {
    const auto& row = table.rows[r];
    const long line = table.row_lines[r];
    if (row.size() > table.header.size()) {
      fail(table.origin, line, "row has more fields than header columns");
    }
    if (row.size() < 2 || row[0].empty()) {
      fail(table.origin, line, "row is missing question_id");
    }
    if (row[1].empty()) fail(table.origin, line, "row is missing target");
    Question q;
    q.id = row[0];
    q.target = row[1];
    bool seen_empty = false;
    for (std::size_t j = 2; j < row.size(); ++j) {
      if (row[j].empty()) {
        seen_empty = true;
        continue;
      }
      if (seen_empty) {
        fail(table.origin, line,
             "options must be contiguous (empty option cell before '" +
                 row[j] + "')");
      }
      q.choice_set.push_back(row[j]);
    }
    try {
      q.validate();
    } catch (const ValidationError& e) {
      fail(table.origin, line, e.what());
    }
    questions.push_back(std::move(q));
  }
  if (questions.empty()) fail(table.origin, 1, "no questions in file");
  return questions;
}

void write_questions_csv(const std::string& path,
                         const std::vector<Question>& questions) {
  std::size_t max_opts = 2;
  for (const Question& q : questions)
    max_opts = std::max(max_opts, q.choice_set.size());
  std::ostringstream out;
  out << "question_id,target";
  for (std::size_t j = 1; j <= max_opts; ++j) out << ",opt" << j;
  out << "\n";
  for (const Question& q : questions) {
    out << csv_quote(q.id) << "," << csv_quote(q.target);
    for (std::size_t j = 0; j < max_opts; ++j) {
      out << ",";
      if (j < q.choice_set.size()) out << csv_quote(q.choice_set[j]);
    }
    out << "\n";
  }
  write_file_atomic(path, out.str());
}

std::vector<ResponseRecord> read_responses_csv(const std::string& path) {
  const CsvTable table = read_csv(path);
  const std::vector<std::string> expected = {"participant_id", "question_id",
                                             "selected"};
  if (table.header != expected) {
    fail(table.origin, 1,
         "responses header must be participant_id,question_id,selected");
  }
  std::vector<ResponseRecord> records;
  std::map<std::pair<std::string, std::string>, long> seen;
  for (std::size_t r = 0; r < table.rows.size(); ++r) {
    const auto& row = table.rows[r];
    const long line = table.row_lines[r];
    if (row.size() != 3) {
      fail(table.origin, line,
           "expected 3 fields, got " + std::to_string(row.size()));
    }
    if (row[1].empty()) fail(table.origin, line, "row is missing question_id");
    if (row[2].empty()) fail(table.origin, line, "row is missing selected");
    if (!row[0].empty()) {
      auto [it, inserted] = seen.emplace(std::make_pair(row[0], row[1]), line);
      if (!inserted) {
        fail(table.origin, line,
             "duplicate response for participant '" + row[0] +
                 "' on question '" + row[1] + "' (first at line " +
                 std::to_string(it->second) + ")");
      }
    }
    records.push_back(ResponseRecord{row[0], row[1], row[2]});
  }
  if (records.empty()) fail(table.origin, 1, "no responses in file");
  return records;
}

void write_responses_csv(const std::string& path,
                         const std::vector<ResponseRecord>& records) {
  std::ostringstream out;
  out << "participant_id,question_id,selected\n";
  for (const ResponseRecord& r : records) {
    out << csv_quote(r.participant) << "," << csv_quote(r.question_id) << ","
        << csv_quote(r.selected) << "\n";
  }
  write_file_atomic(path, out.str());
}

ItemUniverse derive_universe(const std::vector<Question>& questions) {
  std::set<std::string> items;
  for (const Question& q : questions) {
    items.insert(q.target);
    items.insert(q.choice_set.begin(), q.choice_set.end());
  }
  return ItemUniverse::of({items.begin(), items.end()});
}

Dataset load_dataset(const std::string& questions_path,
                     const std::string& responses_path) {
  const std::vector<Question> questions = read_questions_csv(questions_path);
  const std::vector<ResponseRecord> responses =
      read_responses_csv(responses_path);
  return build_question_sets(questions, responses);
}

}  // namespace iia
