// Apache License, Version 2.0, refer to LICENSE.txt
#include <doctest.h>

#include <unistd.h>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "iiacheck/dataset_io.hpp"

using iia::Question;
using iia::ResponseRecord;
using iia::ValidationError;
namespace fs = std::filesystem;

TEST_SUITE_BEGIN("io");

namespace {

struct TempDir {
  fs::path path;
  TempDir() {
    path = fs::temp_directory_path() /
           ("iiacheck_io_" + std::to_string(::getpid()) + "_" +
            std::to_string(counter()++));
    fs::create_directories(path);
  }
  ~TempDir() {
    std::error_code ec;
    fs::remove_all(path, ec);
  }
  static int& counter() {
    static int c = 0;
    return c;
  }
  std::string file(const std::string& name) const { return (path / name).string(); }
};

std::string slurp(const std::string& path) { return iia::read_file(path); }

}  // namespace

TEST_CASE("csv parser handles quoting, escapes, and CRLF") {
  const std::string text =
      "a,b,c\r\n"
      "1,\"x,y\",\"he said \"\"hi\"\"\"\n"
      "\"multi\nline\",2,3\n"
      "\n";
  const auto table = iia::parse_csv(text, "test.csv");
  CHECK(table.header == std::vector<std::string>{"a", "b", "c"});
  REQUIRE(table.rows.size() == 2);
  CHECK(table.rows[0][1] == "x,y");
  CHECK(table.rows[0][2] == "he said \"hi\"");
  CHECK(table.rows[1][0] == "multi\nline");
  CHECK(table.row_lines[0] == 2);
}

TEST_CASE("csv_quote round-trips awkward fields") {
  for (const std::string field :
       {std::string("plain"), std::string("a,b"), std::string("say \"hi\""),
        std::string("two\nlines"), std::string("")}) {
    // Paired with a second column so an empty field is not a blank line.
    const std::string text = "h1,h2\n" + iia::csv_quote(field) + ",x\n";
    const auto table = iia::parse_csv(text, "t");
    REQUIRE(table.rows.size() == 1);
    CHECK(table.rows[0][0] == field);
    CHECK(table.rows[0][1] == "x");
  }
}

TEST_CASE("format_number matches JSON serialization") {
  for (double v : {0.05, 1.0, 0.5, 1e-12, 3.141592653589793, -2.5, 0.0})
    CHECK(iia::format_number(v) == nlohmann::json(v).dump());
  // Round-trip exactness.
  for (double v : {0.1, 1.0 / 3.0, 1e300, 123456.789}) {
    const double back = std::stod(iia::format_number(v));
    CHECK(back == v);
  }
}

TEST_CASE("write_file_atomic writes, overwrites, and leaves no temp files") {
  TempDir dir;
  const std::string path = dir.file("sub/out.txt");
  iia::write_file_atomic(path, "first");
  CHECK(slurp(path) == "first");
  iia::write_file_atomic(path, "second");
  CHECK(slurp(path) == "second");
  int entries = 0;
  for ([[maybe_unused]] const auto& e : fs::directory_iterator(dir.file("sub")))
    ++entries;
  CHECK(entries == 1);
}

TEST_CASE("questions csv round-trip with ragged arities") {
  TempDir dir;
  const std::vector<Question> questions{
      {"q1", "t", {"a", "b", "c", "d"}},
      {"q2", "t", {"a", "b"}},
      {"q3", "u", {"b", "c", "d"}},
  };
  const std::string path = dir.file("questions.csv");
  iia::write_questions_csv(path, questions);
  const auto back = iia::read_questions_csv(path);
  REQUIRE(back.size() == questions.size());
  for (std::size_t i = 0; i < questions.size(); ++i) {
    CHECK(back[i].id == questions[i].id);
    CHECK(back[i].target == questions[i].target);
    CHECK(back[i].choice_set == questions[i].choice_set);
  }
  // Emit -> ingest -> emit is idempotent.
  const std::string again = dir.file("questions2.csv");
  iia::write_questions_csv(again, back);
  CHECK(slurp(path) == slurp(again));
}

TEST_CASE("questions csv errors carry the source line") {
  TempDir dir;
  const std::string path = dir.file("questions.csv");

  iia::write_file_atomic(path, "question_id,target\nq1,t\n");
  CHECK_THROWS_WITH_AS((void)iia::read_questions_csv(path),
                       doctest::Contains("header"), ValidationError);

  iia::write_file_atomic(path,
                         "question_id,target,opt1,opt2,opt3\n"
                         "q1,t,a,b,\n"
                         ",t,a,b,c\n");
  try {
    (void)iia::read_questions_csv(path);
    FAIL("expected ValidationError");
  } catch (const ValidationError& e) {
    CHECK(std::string(e.what()).find(":3:") != std::string::npos);
  }

  // Non-contiguous option columns.
  iia::write_file_atomic(path,
                         "question_id,target,opt1,opt2,opt3\n"
                         "q1,t,a,,c\n");
  CHECK_THROWS_AS((void)iia::read_questions_csv(path), ValidationError);

  // Fewer than two options.
  iia::write_file_atomic(path,
                         "question_id,target,opt1,opt2\n"
                         "q1,t,a,\n");
  CHECK_THROWS_AS((void)iia::read_questions_csv(path), ValidationError);
}

TEST_CASE("responses csv round-trip and duplicate detection") {
  TempDir dir;
  const std::vector<ResponseRecord> records{
      {"p1", "q1", "a"}, {"p1", "q2", "b"}, {"p2", "q1", "c"}};
  const std::string path = dir.file("responses.csv");
  iia::write_responses_csv(path, records);
  const auto back = iia::read_responses_csv(path);
  CHECK(back == records);

  iia::write_file_atomic(path,
                         "participant_id,question_id,selected\n"
                         "p1,q1,a\n"
                         "p2,q1,b\n"
                         "p1,q1,c\n");
  try {
    (void)iia::read_responses_csv(path);
    FAIL("expected ValidationError");
  } catch (const ValidationError& e) {
    const std::string what = e.what();
    CHECK(what.find(":4:") != std::string::npos);
    CHECK(what.find("2") != std::string::npos);  // first occurrence line
  }

  iia::write_file_atomic(path, "participant,question_id,selected\np1,q1,a\n");
  CHECK_THROWS_WITH_AS((void)iia::read_responses_csv(path),
                       doctest::Contains("header"), ValidationError);

  // Aggregate-only responses (no participant ids) are allowed.
  iia::write_file_atomic(path,
                         "participant_id,question_id,selected\n"
                         ",q1,a\n"
                         ",q1,a\n");
  const auto agg = iia::read_responses_csv(path);
  CHECK(agg.size() == 2);
}

TEST_CASE("load_dataset wires files into question sets") {
  TempDir dir;
  iia::write_questions_csv(dir.file("q.csv"),
                           {{"q1", "t", {"a", "b", "c"}}, {"q2", "t", {"a", "b"}}});
  iia::write_responses_csv(dir.file("r.csv"),
                           {{"p1", "q1", "a"}, {"p2", "q1", "b"}, {"p1", "q2", "a"}});
  const auto data = iia::load_dataset(dir.file("q.csv"), dir.file("r.csv"));
  REQUIRE(data.size() == 1);
  CHECK(data.has_records());
  CHECK(data.tables[0].counts()[0] == std::vector<int>{1, 1, 0});

  // Orphan response: question id absent from questions.csv.
  iia::write_responses_csv(dir.file("bad.csv"), {{"p1", "zz", "a"}});
  CHECK_THROWS_AS((void)iia::load_dataset(dir.file("q.csv"), dir.file("bad.csv")),
                  ValidationError);

  // Aggregate-only file yields a dataset without records.
  iia::write_file_atomic(dir.file("agg.csv"),
                         "participant_id,question_id,selected\n,q1,a\n,q2,b\n");
  const auto agg = iia::load_dataset(dir.file("q.csv"), dir.file("agg.csv"));
  CHECK(!agg.has_records());
}

TEST_CASE("derive_universe collects targets and options") {
  const auto uni = iia::derive_universe(
      {{"q1", "t", {"a", "b"}}, {"q2", "u", {"b", "c"}}});
  CHECK(uni.items == std::vector<std::string>{"a", "b", "c", "t", "u"});
}

TEST_CASE("missing file raises a validation error") {
  CHECK_THROWS_AS((void)iia::read_file("/nonexistent/iiacheck/file.csv"),
                  ValidationError);
}

TEST_SUITE_END();
