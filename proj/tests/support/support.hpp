#pragma once

#include <atomic>
#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "rubric/core_model.hpp"
#include "rubric/llm_backend.hpp"
#include "rubric/testbank.hpp"

namespace testing_support {

namespace fs = std::filesystem;

fs::path source_dir();
fs::path toy_dir();
fs::path golden_dir();
fs::path data_dir();  // tests/data

std::string slurp(const fs::path& path);
void spit(const fs::path& path, const std::string& content);

/// Removed with its contents on destruction.
class TempDir {
 public:
  TempDir();
  ~TempDir();
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;
  const fs::path& path() const { return path_; }
  fs::path operator/(const std::string& name) const { return path_ / name; }

 private:
  fs::path path_;
};

struct CliResult {
  int code = 0;
  std::string out;
  std::string err;
};
CliResult run_cli(const std::vector<std::string>& args);

/// Set RUBRIC_UPDATE_GOLDEN=1 to rewrite golden files instead of comparing.
bool updating_goldens();
/// Empty on match; otherwise a description of the first difference.
std::string compare_golden(const std::string& name, const std::string& actual);

using Rng = std::mt19937_64;
int uniform_int(Rng& rng, int lo, int hi);  // inclusive
std::string random_word(Rng& rng, int min_len = 2, int max_len = 9);
std::string random_words(Rng& rng, int n);

// Builders for graded data.
rubric::PromptInfo self_rated_info(const std::string& prompt_class);
rubric::ExamGrade self_rated_grade(const std::string& prompt_class,
                                   const std::map<std::string, int>& ratings,
                                   const std::map<std::string, std::string>& answers = {});
rubric::GradedPassage passage(const std::string& pid, const std::string& text,
                              std::optional<int> judgment = std::nullopt,
                              const std::string& query_id = "q");
void add_ranking(rubric::GradedPassage& p, const std::string& method, int rank,
                 const std::string& query_id = "q");
rubric::QueryTestBank question_bank(const std::string& query_id,
                                    const std::vector<std::string>& texts,
                                    const std::string& query_text = "query");

/// Backend answering through a callback; counts calls.
class ScriptedBackend final : public rubric::Backend {
 public:
  using Fn = std::function<std::string(const std::string&)>;
  explicit ScriptedBackend(Fn fn, std::string id = "scripted", int budget = 8)
      : Backend(budget), fn_(std::move(fn)), id_(std::move(id)) {}
  std::string identifier() const override { return id_; }
  int calls() const { return calls_.load(); }

 protected:
  std::string do_complete(const std::string& prompt) override {
    ++calls_;
    return fn_(prompt);
  }

 private:
  Fn fn_;
  std::string id_;
  std::atomic<int> calls_{0};
};

inline const std::string kSelfRated = "QuestionSelfRatedUnanswerablePromptWithChoices";

}  // namespace testing_support
