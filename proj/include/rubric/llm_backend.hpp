#pragma once

#include <chrono>
#include <filesystem>
#include <optional>
#include <semaphore>
#include <string>
#include <string_view>
#include <vector>

namespace rubric {

/// Completion provider. Implementations must be callable from several
/// grading workers at once; `complete` admits at most `concurrency_budget`
/// requests concurrently.
class Backend {
 public:
  explicit Backend(int concurrency_budget = 1);
  virtual ~Backend() = default;
  Backend(const Backend&) = delete;
  Backend& operator=(const Backend&) = delete;

  std::string complete(const std::string& prompt);

  /// Recorded as ExamGrade.llm; stable for the lifetime of the backend.
  virtual std::string identifier() const = 0;

  int concurrency_budget() const noexcept { return budget_; }

 protected:
  virtual std::string do_complete(const std::string& prompt) = 0;

 private:
  int budget_;
  std::counting_semaphore<> slots_;
};

enum class ApiStyle { chat, completions };

struct BackendConfig {
  std::string endpoint_url = "http://127.0.0.1:8000/v1/chat/completions";
  std::string model_name = "google/flan-t5-large";
  std::string api_key_env = "GRADER_API_KEY";
  int max_input_tokens = 512;
  std::chrono::milliseconds request_timeout{60000};
  int max_retries = 3;
  int concurrency_budget = 1;
  std::chrono::milliseconds initial_backoff{500};
  int max_completion_tokens = 256;
  double temperature = 0.0;
  ApiStyle api_style = ApiStyle::chat;

  void validate() const;
};

enum class PromptTarget { question, nugget, direct };

std::string to_string(PromptTarget target);
PromptTarget prompt_target_from_string(const std::string& s);

struct PromptTemplate {
  std::string prompt_class;
  std::string template_text;
  bool is_self_rated = false;
  PromptTarget target = PromptTarget::question;
  bool context_first = false;

  /// "{question}", "{nugget}" or "{query}" depending on target.
  std::string entry_placeholder() const;
  /// Template text with the context line moved ahead of the entry line when
  /// context_first is set.
  std::string effective_text() const;
  /// First line of the template, recorded as PromptInfo.prompt_style.
  std::string prompt_style() const;
  void validate() const;
};

/// Default grading prompts shipped with the workbench.
const std::vector<PromptTemplate>& builtin_templates();
std::optional<PromptTemplate> find_builtin_template(const std::string& prompt_class);
/// Direct-grading prompt classes that require a user-supplied template file.
const std::vector<std::string>& external_direct_classes();

PromptTemplate load_prompt_template(const std::filesystem::path& path, std::string prompt_class,
                                    PromptTarget target, bool is_self_rated);

/// Token count used for prompt budgets (whitespace-delimited words).
std::size_t prompt_token_count(std::string_view s);

/// Default budget in words: conservative against a 512-token model limit.
inline constexpr int kDefaultPromptBudget = 480;

/// Substitutes entry text and context. When the result exceeds `budget`
/// tokens, only the context is cut (from the end); the returned prompt never
/// exceeds the budget. Throws BudgetError when even an empty context does
/// not fit.
std::string render_prompt(const PromptTemplate& tmpl, std::string_view entry_text,
                          std::string_view context, int budget);

struct RatingParse {
  int rating = 0;
  bool fallback = false;  // no digit 0-5 was found
};

/// First standalone digit 0..5 in the completion; 0 with fallback otherwise.
RatingParse parse_self_rating(std::string_view completion);

/// One chat/completions request with retries. Retries timeouts, connection
/// failures, 429 and 5xx with exponential backoff; other 4xx fail at once.
std::string remote_complete(const BackendConfig& config, const std::string& prompt);

class RemoteBackend final : public Backend {
 public:
  explicit RemoteBackend(BackendConfig config);
  std::string identifier() const override { return config_.model_name; }
  const BackendConfig& config() const noexcept { return config_; }

 protected:
  std::string do_complete(const std::string& prompt) override;

 private:
  BackendConfig config_;
};

/// Deterministic offline test double. Recognizes prompts rendered from the
/// templates it was given or the built-ins, plus generation and
/// answer-equivalence prompts.
///  - self-rated: round(5 * |entry content words found in context| / |entry content words|)
///  - extraction: context sentence with maximal overlap, or "unanswerable"
///  - direct (not self-rated): "yes" when at least half the query words occur
///  - generation: fenced JSON list built from the query's content words
///  - answer equivalence: "yes" iff answer and gold agree after normalization
class MockBackend final : public Backend {
 public:
  MockBackend();
  explicit MockBackend(std::vector<PromptTemplate> templates);
  std::string identifier() const override { return "mock"; }

  std::string mock_complete(const std::string& prompt) const;

 protected:
  std::string do_complete(const std::string& prompt) override { return mock_complete(prompt); }

 private:
  std::vector<PromptTemplate> templates_;
};

}  // namespace rubric
