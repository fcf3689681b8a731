#include "support.hpp"

#include <cstdlib>
#include <fstream>
#include <sstream>

#include "cli.hpp"

namespace testing_support {

fs::path source_dir() { return RUBRIC_SOURCE_DIR; }
fs::path toy_dir() { return source_dir() / "data" / "toy"; }
fs::path golden_dir() { return source_dir() / "tests" / "golden"; }
fs::path data_dir() { return source_dir() / "tests" / "data"; }

std::string slurp(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void spit(const fs::path& path, const std::string& content) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  out << content;
}

TempDir::TempDir() {
  static std::random_device rd;
  for (int attempt = 0; attempt < 100; ++attempt) {
    auto candidate = fs::temp_directory_path() / ("rubric-test-" + std::to_string(rd()));
    if (fs::create_directory(candidate)) {
      path_ = candidate;
      return;
    }
  }
  throw std::runtime_error("cannot create temporary directory");
}

TempDir::~TempDir() {
  std::error_code ec;
  fs::remove_all(path_, ec);
}

CliResult run_cli(const std::vector<std::string>& args) {
  std::ostringstream out;
  std::ostringstream err;
  CliResult r;
  r.code = rubric::cli::run(args, out, err);
  r.out = out.str();
  r.err = err.str();
  return r;
}

bool updating_goldens() {
  const char* v = std::getenv("RUBRIC_UPDATE_GOLDEN");
  return v && std::string(v) == "1";
}

std::string compare_golden(const std::string& name, const std::string& actual) {
  const auto path = golden_dir() / name;
  if (updating_goldens()) {
    spit(path, actual);
    return {};
  }
  if (!fs::exists(path)) return "missing golden file " + path.string();
  const std::string expected = slurp(path);
  if (expected == actual) return {};
  std::size_t i = 0;
  while (i < expected.size() && i < actual.size() && expected[i] == actual[i]) ++i;
  const auto line = std::count(expected.begin(), expected.begin() + static_cast<std::ptrdiff_t>(i), '\n') + 1;
  return name + " differs from golden at byte " + std::to_string(i) + " (line " + std::to_string(line) +
         "), sizes " + std::to_string(expected.size()) + " vs " + std::to_string(actual.size());
}

int uniform_int(Rng& rng, int lo, int hi) { return std::uniform_int_distribution<int>(lo, hi)(rng); }

std::string random_word(Rng& rng, int min_len, int max_len) {
  std::string w;
  const int n = uniform_int(rng, min_len, max_len);
  for (int i = 0; i < n; ++i) w.push_back(static_cast<char>('a' + uniform_int(rng, 0, 25)));
  return w;
}

std::string random_words(Rng& rng, int n) {
  std::string out;
  for (int i = 0; i < n; ++i) {
    if (i) out.push_back(' ');
    out += random_word(rng);
  }
  return out;
}

rubric::PromptInfo self_rated_info(const std::string& prompt_class) {
  rubric::PromptInfo info;
  info.prompt_class = prompt_class;
  info.prompt_style = "self-rated";
  info.is_self_rated = true;
  return info;
}

rubric::ExamGrade self_rated_grade(const std::string& prompt_class,
                                   const std::map<std::string, int>& ratings,
                                   const std::map<std::string, std::string>& answers) {
  rubric::ExamGrade g;
  g.llm = "fixture";
  g.prompt_info = self_rated_info(prompt_class);
  for (const auto& [id, r] : ratings) {
    rubric::SelfRating s;
    s.entry_id = id;
    s.rating = r;
    g.self_ratings.push_back(s);
    g.answers.emplace_back(id, answers.count(id) ? answers.at(id) : std::string("answer"));
  }
  g.recompute_ratio();
  return g;
}

rubric::GradedPassage passage(const std::string& pid, const std::string& text,
                              std::optional<int> judgment, const std::string& query_id) {
  rubric::GradedPassage p;
  p.paragraph_id = pid;
  p.text = text;
  if (judgment) {
    rubric::Judgment j;
    j.paragraph_id = pid;
    j.query = query_id;
    j.relevance = *judgment;
    p.judgments.push_back(j);
  }
  return p;
}

void add_ranking(rubric::GradedPassage& p, const std::string& method, int rank,
                 const std::string& query_id) {
  rubric::RankingEntry e;
  e.method = method;
  e.paragraph_id = p.paragraph_id;
  e.query_id = query_id;
  e.rank = rank;
  e.score = 100.0 - rank;
  p.rankings.push_back(e);
}

rubric::QueryTestBank question_bank(const std::string& query_id, const std::vector<std::string>& texts,
                                    const std::string& query_text) {
  rubric::QueryTestBank b;
  b.query_id = query_id;
  b.query_text = query_text;
  b.prompt_target = rubric::EntryKind::question;
  for (const auto& t : texts) b.items.push_back(rubric::make_entry(query_id, rubric::EntryKind::question, t));
  return b;
}

}  // namespace testing_support
