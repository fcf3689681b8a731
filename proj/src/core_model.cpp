#include "rubric/core_model.hpp"

#include <algorithm>
#include <charconv>

#include "rubric/error.hpp"
#include "rubric/gzip_io.hpp"

namespace rubric {

std::string to_string(EntryKind kind) {
  return kind == EntryKind::question ? "question" : "nugget";
}

EntryKind entry_kind_from_string(const std::string& s) {
  if (s == "question" || s == "questions") return EntryKind::question;
  if (s == "nugget" || s == "nuggets") return EntryKind::nugget;
  throw ValidationError("unknown entry kind '" + s + "'");
}

double ExamGrade::ratio(std::size_t correct, std::size_t wrong) noexcept {
  const std::size_t total = correct + wrong;
  return total == 0 ? 0.0 : static_cast<double>(correct) / static_cast<double>(total);
}

std::optional<int> GradedPassage::max_judgment() const {
  std::optional<int> best;
  for (const auto& j : judgments) {
    if (!best || j.relevance > *best) best = j.relevance;
  }
  return best;
}

std::optional<int> GradedPassage::best_rank() const {
  std::optional<int> best;
  for (const auto& r : rankings) {
    if (!best || r.rank < *best) best = r.rank;
  }
  return best;
}

std::optional<int> GradedPassage::rank_for(const std::string& method) const {
  std::optional<int> best;
  for (const auto& r : rankings) {
    if (r.method == method && (!best || r.rank < *best)) best = r.rank;
  }
  return best;
}

bool GradeFilter::matches(const PromptInfo& info, const std::string& llm_name) const {
  if (llm && *llm != llm_name) return false;
  if (prompt_class && *prompt_class != info.prompt_class) return false;
  if (is_self_rated && *is_self_rated != info.is_self_rated) return false;
  return true;
}

bool GradeFilter::matches(const ExamGrade& grade) const {
  return matches(grade.prompt_info, grade.llm);
}

std::vector<ExamGrade> select_grades(const GradedPassage& passage, const GradeFilter& filter) {
  std::vector<ExamGrade> out;
  for (const auto& g : passage.exam_grades) {
    if (filter.matches(g)) out.push_back(g);
  }
  return out;
}

std::map<std::string, int> collect_ratings(const GradedPassage& passage,
                                           const GradeFilter& filter) {
  std::map<std::string, int> out;
  for (const auto& g : passage.exam_grades) {
    if (!filter.matches(g)) continue;
    for (const auto& r : g.self_ratings) out[r.entry_id] = r.rating;
  }
  return out;
}

std::map<std::string, std::string> collect_answers(const GradedPassage& passage,
                                                   const GradeFilter& filter) {
  std::map<std::string, std::string> out;
  for (const auto& g : passage.exam_grades) {
    if (!filter.matches(g)) continue;
    for (const auto& [id, text] : g.answers) out[id] = text;
  }
  return out;
}

namespace {

bool present(const Json& obj, const char* key) {
  auto it = obj.find(key);
  return it != obj.end() && !it->is_null();
}

const Json& require(const Json& obj, const char* key, const std::string& pid) {
  auto it = obj.find(key);
  if (it == obj.end() || it->is_null()) throw MissingFieldError(key, pid);
  return *it;
}

template <typename T>
T field_as(const Json& value, const char* key, const std::string& pid) {
  try {
    return value.get<T>();
  } catch (const nlohmann::json::exception&) {
    throw ValidationError("field '" + std::string(key) + "' has the wrong type" +
                          (pid.empty() ? std::string() : " in paragraph '" + pid + "'"));
  }
}

template <typename T>
T required_as(const Json& obj, const char* key, const std::string& pid) {
  return field_as<T>(require(obj, key, pid), key, pid);
}

template <typename T>
T optional_as(const Json& obj, const char* key, const std::string& pid, T fallback) {
  if (!present(obj, key)) return fallback;
  return field_as<T>(obj.at(key), key, pid);
}

const Json& optional_array(const Json& obj, const char* key, const std::string& pid) {
  static const Json empty = Json::array();
  if (!present(obj, key)) return empty;
  const Json& v = obj.at(key);
  if (!v.is_array()) {
    throw ValidationError("field '" + std::string(key) + "' must be a list" +
                          (pid.empty() ? std::string() : " in paragraph '" + pid + "'"));
  }
  return v;
}

Json remainder(const Json& obj, std::initializer_list<const char*> known) {
  Json rest = Json::object();
  for (auto it = obj.begin(); it != obj.end(); ++it) {
    if (std::none_of(known.begin(), known.end(), [&](const char* k) { return it.key() == k; })) {
      rest[it.key()] = it.value();
    }
  }
  return rest;
}

void require_object(const Json& j, const char* what, const std::string& pid) {
  if (!j.is_object()) {
    throw ValidationError(std::string(what) + " must be a JSON object" +
                          (pid.empty() ? std::string() : " in paragraph '" + pid + "'"));
  }
}

int rank_value(const Json& v, const std::string& pid) {
  // Some producers quote the rank ("1"); accept both forms.
  if (v.is_string()) {
    const std::string s = v.get<std::string>();
    int out = 0;
    auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
    if (ec != std::errc() || ptr != s.data() + s.size()) {
      throw ValidationError("field 'rank' is not an integer in paragraph '" + pid + "'");
    }
    return out;
  }
  return field_as<int>(v, "rank", pid);
}

Json to_json(const Judgment& j) {
  Json out = j.extra;
  out["paragraphId"] = j.paragraph_id;
  out["query"] = j.query;
  out["relevance"] = j.relevance;
  out["titleQuery"] = j.title_query;
  return out;
}

Judgment judgment_from_json(const Json& j, const std::string& pid) {
  require_object(j, "judgment", pid);
  Judgment out;
  out.paragraph_id = optional_as<std::string>(j, "paragraphId", pid, pid);
  out.query = optional_as<std::string>(j, "query", pid, "");
  out.relevance = required_as<int>(j, "relevance", pid);
  out.title_query = optional_as<std::string>(j, "titleQuery", pid, "");
  out.extra = remainder(j, {"paragraphId", "query", "relevance", "titleQuery"});
  return out;
}

Json to_json(const RankingEntry& r) {
  Json out = r.extra;
  out["method"] = r.method;
  out["paragraphId"] = r.paragraph_id;
  out["queryId"] = r.query_id;
  out["rank"] = r.rank;
  out["score"] = r.score;
  return out;
}

RankingEntry ranking_from_json(const Json& j, const std::string& pid) {
  require_object(j, "ranking", pid);
  RankingEntry out;
  out.method = required_as<std::string>(j, "method", pid);
  out.paragraph_id = optional_as<std::string>(j, "paragraphId", pid, pid);
  out.query_id = optional_as<std::string>(j, "queryId", pid, "");
  out.rank = rank_value(require(j, "rank", pid), pid);
  if (out.rank < 1) throw ValidationError("rank must be >= 1 in paragraph '" + pid + "'");
  out.score = optional_as<double>(j, "score", pid, 0.0);
  out.extra = remainder(j, {"method", "paragraphId", "queryId", "rank", "score"});
  return out;
}

Json to_json(const SelfRating& r) {
  Json out = r.extra;
  out[r.kind == EntryKind::question ? "question_id" : "nugget_id"] = r.entry_id;
  out["self_rating"] = r.rating;
  return out;
}

SelfRating self_rating_from_json(const Json& j, const std::string& pid) {
  require_object(j, "self rating", pid);
  SelfRating out;
  if (present(j, "question_id")) {
    out.entry_id = required_as<std::string>(j, "question_id", pid);
    out.kind = EntryKind::question;
  } else if (present(j, "nugget_id")) {
    out.entry_id = required_as<std::string>(j, "nugget_id", pid);
    out.kind = EntryKind::nugget;
  } else {
    throw MissingFieldError("question_id", pid);
  }
  out.rating = required_as<int>(j, "self_rating", pid);
  if (out.rating < 0 || out.rating > 5) {
    throw ValidationError("self_rating " + std::to_string(out.rating) +
                          " outside [0,5] in paragraph '" + pid + "'");
  }
  out.extra = remainder(j, {"question_id", "nugget_id", "self_rating"});
  return out;
}

Json to_json(const DirectGrade& g) {
  Json out = g.extra;
  out["correctAnswered"] = g.correct_answered;
  out["self_ratings"] = g.self_rating;
  out["answers"] = g.answer;
  out["llm"] = g.llm;
  out["prompt_info"] = to_json(g.prompt_info);
  return out;
}

DirectGrade direct_grade_from_json(const Json& j, const std::string& pid) {
  require_object(j, "grade", pid);
  DirectGrade out;
  out.correct_answered = optional_as<bool>(j, "correctAnswered", pid, false);
  out.self_rating = optional_as<int>(j, "self_ratings", pid, 0);
  out.answer = optional_as<std::string>(j, "answers", pid, "");
  out.llm = optional_as<std::string>(j, "llm", pid, "");
  out.prompt_info = prompt_info_from_json(require(j, "prompt_info", pid), pid);
  out.extra = remainder(j, {"correctAnswered", "self_ratings", "answers", "llm", "prompt_info"});
  return out;
}

}  // namespace

Json to_json(const PromptInfo& info) {
  Json out = info.extra;
  out["prompt_class"] = info.prompt_class;
  out["prompt_style"] = info.prompt_style;
  out["context_first"] = info.context_first;
  out["check_unanswerable"] = info.check_unanswerable;
  out["check_answer_key"] = info.check_answer_key;
  out["is_self_rated"] = info.is_self_rated;
  return out;
}

PromptInfo prompt_info_from_json(const Json& j, const std::string& pid) {
  require_object(j, "prompt_info", pid);
  PromptInfo out;
  out.prompt_class = required_as<std::string>(j, "prompt_class", pid);
  out.prompt_style = optional_as<std::string>(j, "prompt_style", pid, "");
  out.context_first = optional_as<bool>(j, "context_first", pid, false);
  out.check_unanswerable = optional_as<bool>(j, "check_unanswerable", pid, false);
  out.check_answer_key = optional_as<bool>(j, "check_answer_key", pid, false);
  out.is_self_rated = optional_as<bool>(j, "is_self_rated", pid, false);
  out.extra = remainder(j, {"prompt_class", "prompt_style", "context_first", "check_unanswerable",
                            "check_answer_key", "is_self_rated"});
  return out;
}

Json to_json(const ExamGrade& g) {
  Json out = g.extra;
  out["correctAnswered"] = g.correct_answered;
  out["wrongAnswered"] = g.wrong_answered;
  Json answers = Json::array();
  for (const auto& [id, text] : g.answers) answers.push_back(Json::array({id, text}));
  out["answers"] = std::move(answers);
  Json ratings = Json::array();
  for (const auto& r : g.self_ratings) ratings.push_back(to_json(r));
  out["self_ratings"] = std::move(ratings);
  out["llm"] = g.llm;
  out["prompt_info"] = to_json(g.prompt_info);
  out["exam_ratio"] = g.exam_ratio;
  return out;
}

ExamGrade exam_grade_from_json(const Json& j, const std::string& pid) {
  require_object(j, "exam grade", pid);
  ExamGrade out;
  out.correct_answered =
      field_as<std::vector<std::string>>(optional_array(j, "correctAnswered", pid), "correctAnswered", pid);
  out.wrong_answered =
      field_as<std::vector<std::string>>(optional_array(j, "wrongAnswered", pid), "wrongAnswered", pid);
  for (const auto& a : optional_array(j, "answers", pid)) {
    if (!a.is_array() || a.size() != 2 || !a[0].is_string() || !a[1].is_string()) {
      throw ValidationError("each answer must be [entry_id, text] in paragraph '" + pid + "'");
    }
    out.answers.emplace_back(a[0].get<std::string>(), a[1].get<std::string>());
  }
  for (const auto& r : optional_array(j, "self_ratings", pid)) {
    out.self_ratings.push_back(self_rating_from_json(r, pid));
  }
  out.llm = optional_as<std::string>(j, "llm", pid, "");
  out.prompt_info = prompt_info_from_json(require(j, "prompt_info", pid), pid);
  out.exam_ratio = present(j, "exam_ratio")
                       ? field_as<double>(j.at("exam_ratio"), "exam_ratio", pid)
                       : ExamGrade::ratio(out.correct_answered.size(), out.wrong_answered.size());
  out.extra = remainder(j, {"correctAnswered", "wrongAnswered", "answers", "self_ratings", "llm",
                            "prompt_info", "exam_ratio"});
  return out;
}

Json to_json(const GradedPassage& p) {
  Json out = p.extra;
  out["paragraph_id"] = p.paragraph_id;
  out["text"] = p.text;
  if (p.markup) out["paragraph"] = *p.markup;
  Json data = p.paragraph_data_extra;
  Json judgments = Json::array();
  for (const auto& j : p.judgments) judgments.push_back(to_json(j));
  Json rankings = Json::array();
  for (const auto& r : p.rankings) rankings.push_back(to_json(r));
  data["judgments"] = std::move(judgments);
  data["rankings"] = std::move(rankings);
  out["paragraph_data"] = std::move(data);
  Json exam = Json::array();
  for (const auto& g : p.exam_grades) exam.push_back(to_json(g));
  out["exam_grades"] = std::move(exam);
  Json grades = Json::array();
  for (const auto& g : p.grades) grades.push_back(to_json(g));
  out["grades"] = std::move(grades);
  return out;
}

GradedPassage passage_from_json(const Json& j) {
  require_object(j, "passage", "");
  GradedPassage p;
  p.paragraph_id = required_as<std::string>(j, "paragraph_id", "");
  if (p.paragraph_id.empty()) throw ValidationError("paragraph_id must be non-empty");
  const std::string& pid = p.paragraph_id;
  p.text = required_as<std::string>(j, "text", pid);
  if (auto it = j.find("paragraph"); it != j.end()) p.markup = *it;
  if (present(j, "paragraph_data")) {
    const Json& data = j.at("paragraph_data");
    require_object(data, "paragraph_data", pid);
    for (const auto& x : optional_array(data, "judgments", pid)) {
      p.judgments.push_back(judgment_from_json(x, pid));
    }
    for (const auto& x : optional_array(data, "rankings", pid)) {
      p.rankings.push_back(ranking_from_json(x, pid));
    }
    p.paragraph_data_extra = remainder(data, {"judgments", "rankings"});
  }
  for (const auto& x : optional_array(j, "exam_grades", pid)) {
    p.exam_grades.push_back(exam_grade_from_json(x, pid));
  }
  for (const auto& x : optional_array(j, "grades", pid)) {
    p.grades.push_back(direct_grade_from_json(x, pid));
  }
  p.extra = remainder(j, {"paragraph_id", "text", "paragraph", "paragraph_data", "exam_grades",
                          "grades"});
  return p;
}

Json to_json(const QueryResponseSet& record) {
  Json passages = Json::array();
  for (const auto& p : record.passages) passages.push_back(to_json(p));
  return Json::array({record.query_id, std::move(passages)});
}

QueryResponseSet record_from_json(const Json& j) {
  if (!j.is_array() || j.size() != 2 || !j[0].is_string() || !j[1].is_array()) {
    throw ValidationError("record must be a two-element array [query_id, [passages]]");
  }
  QueryResponseSet out;
  out.query_id = j[0].get<std::string>();
  for (const auto& p : j[1]) out.passages.push_back(passage_from_json(p));
  std::vector<std::string> ids;
  for (const auto& p : out.passages) ids.push_back(p.paragraph_id);
  std::sort(ids.begin(), ids.end());
  if (auto dup = std::adjacent_find(ids.begin(), ids.end()); dup != ids.end()) {
    throw ValidationError("duplicate paragraph_id '" + *dup + "' in query '" + out.query_id + "'");
  }
  return out;
}

std::vector<QueryResponseSet> parse_response_lines(const std::string& text) {
  std::vector<QueryResponseSet> out;
  std::size_t offset = 0;
  std::size_t line_no = 0;
  while (offset < text.size()) {
    std::size_t end = text.find('\n', offset);
    if (end == std::string::npos) end = text.size();
    ++line_no;
    std::string_view line(text.data() + offset, end - offset);
    if (line.find_first_not_of(" \t\r") != std::string_view::npos) {
      Json j;
      try {
        j = Json::parse(line);
      } catch (const nlohmann::json::parse_error& e) {
        throw ParseError(std::string("malformed JSON: ") + e.what(), line_no, offset);
      }
      try {
        out.push_back(record_from_json(j));
      } catch (const MissingFieldError&) {
        throw;
      } catch (const ValidationError& e) {
        throw ParseError(e.what(), line_no, offset);
      }
    }
    offset = end + 1;
  }
  return out;
}

std::string serialize_response_lines(const std::vector<QueryResponseSet>& records) {
  std::string out;
  for (const auto& r : records) {
    out += to_json(r).dump();
    out += '\n';
  }
  return out;
}

std::vector<QueryResponseSet> read_response_file(const std::filesystem::path& path) {
  return parse_response_lines(io::read_text_file(path));
}

void write_response_file(const std::vector<QueryResponseSet>& records,
                         const std::filesystem::path& path, bool compress) {
  io::write_file_atomic(path, serialize_response_lines(records), compress);
}

std::map<std::string, std::string> read_queries(const std::filesystem::path& path) {
  Json j;
  try {
    j = Json::parse(io::read_text_file(path));
  } catch (const nlohmann::json::parse_error& e) {
    throw ParseError(std::string("malformed queries file: ") + e.what(), 1, 0);
  }
  if (!j.is_object()) throw ValidationError("queries file must be a JSON dictionary");
  std::map<std::string, std::string> out;
  for (auto it = j.begin(); it != j.end(); ++it) {
    if (!it.value().is_string()) {
      throw ValidationError("query '" + it.key() + "' text must be a string");
    }
    out[it.key()] = it.value().get<std::string>();
  }
  return out;
}

void write_queries(const std::map<std::string, std::string>& queries,
                   const std::filesystem::path& path) {
  Json j = queries;
  io::write_file_atomic(path, j.dump(2) + "\n", io::wants_gzip(path));
}

}  // namespace rubric
