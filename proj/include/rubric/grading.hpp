#pragma once

// Phase 2: passage segmentation, per-(passage, entry) grading in one of four
// modes, answer verification, and assembly of graded response files.

#include <chrono>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "rubric/core_model.hpp"
#include "rubric/error.hpp"
#include "rubric/llm_backend.hpp"
#include "rubric/testbank.hpp"

namespace rubric {

struct Segment {
  std::string text;
  std::string passage_id;  // md5 of text

  bool operator==(const Segment&) const = default;
};

/// Packs blank-line separated paragraphs greedily into passages of at most
/// `target_tokens` words. Longer paragraphs are cut at sentence ends, longer
/// sentences into chunks of exactly `target_tokens` words.
std::vector<Segment> segment_text(std::string_view text, int target_tokens = 400);

struct SelfRatedOutcome {
  SelfRating rating;
  std::string raw_answer;
  bool fallback = false;  // completion held no digit 0-5
};

SelfRatedOutcome grade_passage_self_rated(const TestBankEntry& entry, const GradedPassage& passage,
                                          const PromptTemplate& tmpl, Backend& backend,
                                          int budget = kDefaultPromptBudget);

/// Lowercased, Porter-stemmed words joined by single spaces; punctuation at
/// word edges is dropped.
std::string normalize_for_matching(std::string_view s);

/// True iff 1 - lev/max(len) >= 0.8 between the normalized answer and any
/// normalized gold answer.
bool verify_answer_key(std::string_view answer, const std::vector<std::string>& gold_answers);

std::string render_equivalence_prompt(std::string_view question, std::string_view gold,
                                      std::string_view answer);
/// True iff the completion's first word is "yes", ignoring case and punctuation.
bool llm_answer_equivalence(std::string_view question, std::string_view gold,
                            std::string_view answer, Backend& backend);

const std::vector<std::string>& unanswerable_expressions();
/// Empty answers, single letters or roman numerals ("a.", "(iii)") and the
/// unanswerable lexicon count. "no" must form a clause on its own.
bool is_unanswerable(std::string_view answer);

enum class GradingMode { self_rated, extract_and_verify, extract_informational, direct };

std::string to_string(GradingMode mode);
GradingMode grading_mode_from_string(const std::string& s);

enum class VerificationOrder { levenshtein_first, llm_first };

struct GradingJob {
  std::vector<QueryResponseSet> responses;
  std::vector<QueryTestBank> banks;
  PromptTemplate prompt;
  Backend* backend = nullptr;
  GradingMode mode = GradingMode::self_rated;
  bool check_answer_key = false;
  bool check_unanswerable = false;
  // Answer-key verification: either enabled check suffices.
  bool use_levenshtein = true;
  bool use_llm_equivalence = true;
  VerificationOrder order = VerificationOrder::levenshtein_first;
  std::map<std::string, std::string> queries;  // required for mode=direct
  int prompt_budget = kDefaultPromptBudget;
  int jobs = 1;
  double max_failure_fraction = 0.1;

  /// Throws ValidationError when the job cannot run as configured.
  void validate() const;
};

struct PairFailure {
  std::string query_id;
  std::string paragraph_id;
  std::string entry_id;  // empty for direct grading
  std::string message;
};

struct GradingReport {
  std::size_t pairs_total = 0;
  std::size_t pairs_failed = 0;
  std::size_t rating_fallbacks = 0;
  std::vector<PairFailure> failures;
  std::chrono::system_clock::time_point started;
  std::chrono::system_clock::time_point finished;
};

struct GradingResult {
  std::vector<QueryResponseSet> responses;
  GradingReport report;
};

/// Too many pairs failed; carries the failures seen so far.
class GradingAbortedError : public Error {
 public:
  GradingAbortedError(const std::string& what, GradingReport report)
      : Error(what), report_(std::move(report)) {}
  const GradingReport& report() const noexcept { return report_; }

 private:
  GradingReport report_;
};

/// Appends one ExamGrade (or DirectGrade for mode=direct) to every passage.
/// Output is independent of `jobs`: entries are stored sorted by entry_id.
GradingResult grade_job(const GradingJob& job);

/// Job parameters, timestamps and failures, kept apart from the graded file
/// so that file stays byte-stable.
Json grading_manifest(const GradingJob& job, const GradingReport& report);

PromptInfo prompt_info_for(const GradingJob& job);

}  // namespace rubric
