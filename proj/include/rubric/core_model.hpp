#pragma once

// Shared data model and the (optionally gzip-compressed) JSON-lines
// interchange format read and written by every phase.
//
// One line holds one query: [query_id, [passage, ...]]. Field names follow the
// reference tool (paragraph_id, paragraph_data.judgments, exam_grades, ...).
// Fields this code does not know about are kept in `extra` and written back
// unchanged, so files produced by other tools survive a read/write cycle.

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

namespace rubric {

using Json = nlohmann::json;

enum class EntryKind { question, nugget };

std::string to_string(EntryKind kind);
EntryKind entry_kind_from_string(const std::string& s);

struct Judgment {
  std::string paragraph_id;
  std::string query;
  int relevance = 0;  // negative grades are legal
  std::string title_query;
  Json extra = Json::object();

  bool operator==(const Judgment&) const = default;
};

struct RankingEntry {
  std::string method;
  std::string paragraph_id;
  std::string query_id;
  int rank = 1;
  double score = 0.0;
  Json extra = Json::object();

  bool operator==(const RankingEntry&) const = default;
};

struct SelfRating {
  std::string entry_id;
  EntryKind kind = EntryKind::question;  // selects "question_id" vs "nugget_id"
  int rating = 0;                        // 0..5
  Json extra = Json::object();

  bool operator==(const SelfRating&) const = default;
};

struct PromptInfo {
  std::string prompt_class;
  std::string prompt_style;
  bool context_first = false;
  bool check_unanswerable = false;
  bool check_answer_key = false;
  bool is_self_rated = false;
  Json extra = Json::object();

  bool operator==(const PromptInfo&) const = default;
};

/// Verdicts of one test-bank grading pass over one passage.
struct ExamGrade {
  std::vector<std::string> correct_answered;
  std::vector<std::string> wrong_answered;
  std::vector<std::pair<std::string, std::string>> answers;  // (entry_id, answer text)
  std::vector<SelfRating> self_ratings;
  std::string llm;
  PromptInfo prompt_info;
  double exam_ratio = 0.0;
  Json extra = Json::object();

  /// |correct| / (|correct| + |wrong|), or 0 when nothing was graded.
  static double ratio(std::size_t correct, std::size_t wrong) noexcept;
  void recompute_ratio() noexcept { exam_ratio = ratio(correct_answered.size(), wrong_answered.size()); }

  bool operator==(const ExamGrade&) const = default;
};

/// Passage-level verdict of a direct relevance prompt (no test bank).
struct DirectGrade {
  bool correct_answered = false;
  int self_rating = 0;
  std::string answer;
  std::string llm;
  PromptInfo prompt_info;
  Json extra = Json::object();

  bool operator==(const DirectGrade&) const = default;
};

struct GradedPassage {
  std::string paragraph_id;
  std::string text;
  std::optional<Json> markup;  // "paragraph": opaque payload
  std::vector<Judgment> judgments;
  std::vector<RankingEntry> rankings;
  std::vector<ExamGrade> exam_grades;
  std::vector<DirectGrade> grades;
  Json extra = Json::object();                // unknown top-level passage fields
  Json paragraph_data_extra = Json::object();  // unknown fields inside paragraph_data

  /// Maximum judgment grade, if judged at all.
  std::optional<int> max_judgment() const;
  /// Smallest rank across all methods, if ranked at all.
  std::optional<int> best_rank() const;
  /// Rank assigned by `method`, if any.
  std::optional<int> rank_for(const std::string& method) const;

  bool operator==(const GradedPassage&) const = default;
};

struct QueryResponseSet {
  std::string query_id;
  std::vector<GradedPassage> passages;

  bool operator==(const QueryResponseSet&) const = default;
};

/// Subset selector for exam grades. Unset fields match everything.
struct GradeFilter {
  std::optional<std::string> llm;
  std::optional<std::string> prompt_class;
  std::optional<bool> is_self_rated;

  bool matches(const ExamGrade& grade) const;
  bool matches(const PromptInfo& info, const std::string& llm_name) const;
};

std::vector<ExamGrade> select_grades(const GradedPassage& passage, const GradeFilter& filter);

/// Per-entry self-ratings from all grades matching `filter`. When several
/// matching grades rate the same entry, the one appended last wins.
std::map<std::string, int> collect_ratings(const GradedPassage& passage, const GradeFilter& filter);

/// Per-entry answers from grades matching `filter`, last grade wins.
std::map<std::string, std::string> collect_answers(const GradedPassage& passage,
                                                   const GradeFilter& filter);

// JSON mapping. Parsing validates field presence and types.
Json to_json(const GradedPassage& passage);
GradedPassage passage_from_json(const Json& j);
Json to_json(const QueryResponseSet& record);
QueryResponseSet record_from_json(const Json& j);
Json to_json(const ExamGrade& grade);
ExamGrade exam_grade_from_json(const Json& j, const std::string& paragraph_id = {});
Json to_json(const PromptInfo& info);
PromptInfo prompt_info_from_json(const Json& j, const std::string& paragraph_id = {});

/// Parses JSON-lines text (already decompressed). Blank lines are skipped.
std::vector<QueryResponseSet> parse_response_lines(const std::string& text);
std::string serialize_response_lines(const std::vector<QueryResponseSet>& records);

std::vector<QueryResponseSet> read_response_file(const std::filesystem::path& path);
void write_response_file(const std::vector<QueryResponseSet>& records,
                         const std::filesystem::path& path, bool compress);

/// Queries file: JSON dictionary query_id -> query text.
std::map<std::string, std::string> read_queries(const std::filesystem::path& path);
void write_queries(const std::map<std::string, std::string>& queries,
                   const std::filesystem::path& path);

}  // namespace rubric
