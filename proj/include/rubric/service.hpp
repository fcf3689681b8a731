#pragma once

// JSON-over-HTTP API for the verification UI. The workspace directory holds
// the queries, test bank, graded responses and an optional reference
// leaderboard; every write replaces a file atomically.

#include <filesystem>
#include <memory>
#include <optional>
#include <string>

#include "rubric/llm_backend.hpp"

namespace rubric {

struct ServiceConfig {
  std::filesystem::path workspace;
  std::filesystem::path queries_file = "queries.json";
  std::filesystem::path testbank_file = "testbank.jsonl";
  std::filesystem::path responses_file = "responses.jsonl";
  std::filesystem::path reference_file = "reference.json";  // optional
  std::optional<std::filesystem::path> static_dir;          // built UI bundle

  std::string host = "127.0.0.1";
  int port = 8080;  // 0 picks a free port

  std::string prompt_class = "QuestionSelfRatedUnanswerablePromptWithChoices";
  int min_rating = 4;
  int min_answers = 1;
  int min_relevant_judgment = 1;
  int spurious_max_judgment = 0;
  int k = 20;
  int jobs = 1;

  std::string backend = "mock";  // mock | remote
  BackendConfig backend_config;

  /// Paths relative to the workspace are resolved against it.
  std::filesystem::path resolve(const std::filesystem::path& p) const;
};

class Service {
 public:
  explicit Service(ServiceConfig config);
  ~Service();
  Service(const Service&) = delete;
  Service& operator=(const Service&) = delete;

  /// Binds and serves on a background thread; returns the bound port.
  int start();
  /// Blocks until the server stops.
  void wait();
  void stop();

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

}  // namespace rubric
