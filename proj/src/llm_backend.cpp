#include "rubric/llm_backend.hpp"

#include "rubric/error.hpp"

namespace rubric {

namespace {

int checked_budget(int budget) {
  if (budget < 1) throw ValidationError("concurrency_budget must be at least 1");
  return budget;
}

}  // namespace

Backend::Backend(int concurrency_budget)
    : budget_(checked_budget(concurrency_budget)), slots_(concurrency_budget) {}

std::string Backend::complete(const std::string& prompt) {
  slots_.acquire();
  struct Release {
    std::counting_semaphore<>& s;
    ~Release() { s.release(); }
  } release{slots_};
  return do_complete(prompt);
}

void BackendConfig::validate() const {
  if (endpoint_url.empty()) throw ValidationError("endpoint_url must not be empty");
  if (model_name.empty()) throw ValidationError("model_name must not be empty");
  if (max_input_tokens < 64) throw ValidationError("max_input_tokens must be at least 64");
  if (concurrency_budget < 1) throw ValidationError("concurrency_budget must be at least 1");
  if (max_retries < 0) throw ValidationError("max_retries must not be negative");
  if (request_timeout.count() <= 0) throw ValidationError("request_timeout must be positive");
  if (initial_backoff.count() < 0) throw ValidationError("initial_backoff must not be negative");
  if (max_completion_tokens < 1) throw ValidationError("max_completion_tokens must be positive");
}

}  // namespace rubric
