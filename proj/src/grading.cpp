#include "rubric/grading.hpp"

#include <algorithm>
#include <atomic>
#include <cctype>
#include <ctime>
#include <mutex>
#include <optional>
#include <regex>
#include <thread>

#include "rubric/text.hpp"

namespace rubric {

namespace {

bool is_blank(std::string_view line) {
  return std::all_of(line.begin(), line.end(),
                     [](char c) { return std::isspace(static_cast<unsigned char>(c)) != 0; });
}

std::vector<std::string> split_paragraphs(std::string_view text) {
  std::vector<std::string> out;
  std::string current;
  std::size_t start = 0;
  while (start <= text.size()) {
    auto nl = text.find('\n', start);
    if (nl == std::string_view::npos) nl = text.size();
    const auto line = text.substr(start, nl - start);
    if (is_blank(line)) {
      if (auto t = text::trim(current); !t.empty()) out.push_back(std::move(t));
      current.clear();
    } else {
      if (!current.empty()) current.push_back('\n');
      current.append(line);
    }
    start = nl + 1;
  }
  if (auto t = text::trim(current); !t.empty()) out.push_back(std::move(t));
  return out;
}

struct Unit {
  std::string text;
  std::size_t words;
  bool joins_previous;  // continues the previous unit's paragraph
};

void push_hard_split(std::vector<Unit>& units, std::string_view sentence, std::size_t target,
                     bool first) {
  const auto words = text::split_words(sentence);
  for (std::size_t i = 0; i < words.size(); i += target) {
    std::string chunk;
    const auto end = std::min(words.size(), i + target);
    for (std::size_t k = i; k < end; ++k) {
      if (k > i) chunk.push_back(' ');
      chunk.append(words[k]);
    }
    units.push_back({std::move(chunk), end - i, !(first && i == 0)});
  }
}

}  // namespace

std::vector<Segment> segment_text(std::string_view text, int target_tokens) {
  if (target_tokens < 1) throw ValidationError("target_tokens must be at least 1");
  const auto target = static_cast<std::size_t>(target_tokens);

  std::vector<Unit> units;
  for (const auto& para : split_paragraphs(text)) {
    const auto n = text::word_count(para);
    if (n <= target) {
      units.push_back({para, n, false});
      continue;
    }
    bool first = true;
    for (const auto& sentence : text::split_sentences(para)) {
      const auto m = text::word_count(sentence);
      if (m <= target) {
        units.push_back({sentence, m, !first});
      } else {
        push_hard_split(units, sentence, target, first);
      }
      first = false;
    }
  }

  std::vector<Segment> out;
  std::string current;
  std::size_t current_words = 0;
  auto flush = [&] {
    if (current.empty()) return;
    out.push_back({current, text::md5_hex(current)});
    current.clear();
    current_words = 0;
  };
  for (const auto& u : units) {
    if (!current.empty() && current_words + u.words > target) flush();
    if (!current.empty()) current += u.joins_previous ? " " : "\n\n";
    current += u.text;
    current_words += u.words;
  }
  flush();
  return out;
}

namespace {

// Re-raises backend failures with the pair that caused them.
template <typename F>
auto with_pair_context(const std::string& where, F&& f) -> decltype(f()) {
  try {
    return f();
  } catch (const TransportError& e) {
    throw TransportError(where + ": " + e.what(), e.last_status());
  } catch (const RequestError& e) {
    throw RequestError(where + ": " + e.what(), e.status());
  }
}

std::string pair_label(const std::string& query_id, const std::string& paragraph_id,
                       const std::string& entry_id) {
  return "query '" + query_id + "', paragraph '" + paragraph_id + "', entry '" + entry_id + "'";
}

}  // namespace

SelfRatedOutcome grade_passage_self_rated(const TestBankEntry& entry, const GradedPassage& passage,
                                          const PromptTemplate& tmpl, Backend& backend,
                                          int budget) {
  if (!tmpl.is_self_rated) {
    throw ValidationError("template '" + tmpl.prompt_class + "' is not self-rated");
  }
  const std::string prompt = render_prompt(tmpl, entry.text, passage.text, budget);
  const std::string completion =
      with_pair_context(pair_label(entry.query_id, passage.paragraph_id, entry.entry_id),
                        [&] { return backend.complete(prompt); });
  const auto parsed = parse_self_rating(completion);
  SelfRatedOutcome out;
  out.rating.entry_id = entry.entry_id;
  out.rating.kind = entry.kind;
  out.rating.rating = parsed.rating;
  out.raw_answer = completion;
  out.fallback = parsed.fallback;
  return out;
}

std::string normalize_for_matching(std::string_view s) {
  std::string out;
  for (auto w : text::split_words(s)) {
    std::string t = text::to_lower(w);
    std::size_t b = 0;
    std::size_t e = t.size();
    while (b < e && !std::isalnum(static_cast<unsigned char>(t[b]))) ++b;
    while (e > b && !std::isalnum(static_cast<unsigned char>(t[e - 1]))) --e;
    if (b == e) continue;
    if (!out.empty()) out.push_back(' ');
    out += text::porter_stem(std::string_view(t).substr(b, e - b));
  }
  return out;
}

bool verify_answer_key(std::string_view answer, const std::vector<std::string>& gold_answers) {
  const std::string a = normalize_for_matching(answer);
  for (const auto& gold : gold_answers) {
    const std::string g = normalize_for_matching(gold);
    const auto longest = std::max(a.size(), g.size());
    // 1 - d / longest >= 0.8, kept in integers
    if (5 * text::levenshtein(a, g) <= longest) return true;
  }
  return false;
}

std::string render_equivalence_prompt(std::string_view question, std::string_view gold,
                                      std::string_view answer) {
  return text::substitute(
      "For the question \"{question}\" the correct answer is \"{correct_answer}\". "
      "Is \"{answer}\" an equally correct response to this question? Answer yes or no.",
      {{"{question}", question}, {"{correct_answer}", gold}, {"{answer}", answer}});
}

namespace {

std::string first_word(std::string_view completion) {
  const auto words = text::split_words(completion);
  if (words.empty()) return {};
  std::string w;
  for (char c : words.front()) {
    if (std::isalnum(static_cast<unsigned char>(c))) {
      w.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
    }
  }
  return w;
}

}  // namespace

bool llm_answer_equivalence(std::string_view question, std::string_view gold,
                            std::string_view answer, Backend& backend) {
  return first_word(backend.complete(render_equivalence_prompt(question, gold, answer))) == "yes";
}

const std::vector<std::string>& unanswerable_expressions() {
  static const std::vector<std::string> kExpressions = {"unanswerable",
                                                        "no",
                                                        "no answer",
                                                        "not enough information",
                                                        "unknown",
                                                        "it is not possible to tell",
                                                        "it does not say",
                                                        "no relevant information"};
  return kExpressions;
}

namespace {

bool word_bounded(std::string_view hay, std::string_view needle) {
  auto alnum = [](char c) { return std::isalnum(static_cast<unsigned char>(c)) != 0; };
  for (auto pos = hay.find(needle); pos != std::string_view::npos; pos = hay.find(needle, pos + 1)) {
    const bool left = pos == 0 || !alnum(hay[pos - 1]);
    const auto end = pos + needle.size();
    const bool right = end == hay.size() || !alnum(hay[end]);
    if (left && right) return true;
  }
  return false;
}

std::vector<std::string> clauses(std::string_view s) {
  std::vector<std::string> out;
  std::string current;
  for (char c : s) {
    if (std::string_view(",.;:!?()\"").find(c) != std::string_view::npos) {
      out.push_back(text::trim(current));
      current.clear();
    } else {
      current.push_back(c);
    }
  }
  out.push_back(text::trim(current));
  return out;
}

}  // namespace

bool is_unanswerable(std::string_view answer) {
  const std::string norm = text::collapse_whitespace(text::to_lower(answer));
  if (norm.empty()) return true;
  // Well-formed roman numerals only, so words such as "did" or "civil" pass.
  static const std::regex kInvalid(
      R"(^\(?([a-z]|m{0,3}(cm|cd|d?c{0,3})(xc|xl|l?x{0,3})(ix|iv|v?i{0,3}))\)?[.):]?$)");
  if (std::regex_match(norm, kInvalid)) return true;
  for (const auto& expr : unanswerable_expressions()) {
    if (expr == "no") {
      for (const auto& c : clauses(norm)) {
        if (c == "no") return true;
      }
    } else if (word_bounded(norm, expr)) {
      return true;
    }
  }
  return false;
}

std::string to_string(GradingMode mode) {
  switch (mode) {
    case GradingMode::self_rated: return "self_rated";
    case GradingMode::extract_and_verify: return "extract_and_verify";
    case GradingMode::extract_informational: return "extract_informational";
    case GradingMode::direct: return "direct";
  }
  return "self_rated";
}

GradingMode grading_mode_from_string(const std::string& s) {
  for (auto m : {GradingMode::self_rated, GradingMode::extract_and_verify,
                 GradingMode::extract_informational, GradingMode::direct}) {
    if (to_string(m) == s) return m;
  }
  throw ValidationError("unknown grading mode '" + s + "'");
}

void GradingJob::validate() const {
  if (!backend) throw ValidationError("grading job has no backend");
  prompt.validate();
  if (jobs < 1) throw ValidationError("jobs must be at least 1");
  if (!(max_failure_fraction >= 0.0 && max_failure_fraction <= 1.0)) {
    throw ValidationError("max_failure_fraction must lie in [0, 1]");
  }
  const bool direct = mode == GradingMode::direct;
  if (direct != (prompt.target == PromptTarget::direct)) {
    throw ValidationError("prompt '" + prompt.prompt_class + "' does not fit mode " +
                          to_string(mode));
  }
  if (mode == GradingMode::self_rated && !prompt.is_self_rated) {
    throw ValidationError("mode self_rated needs a self-rated prompt, got '" +
                          prompt.prompt_class + "'");
  }
  if ((mode == GradingMode::extract_and_verify || mode == GradingMode::extract_informational) &&
      prompt.is_self_rated) {
    throw ValidationError("answer extraction needs an extraction prompt, got '" +
                          prompt.prompt_class + "'");
  }
  if (mode == GradingMode::extract_and_verify && !check_answer_key && !check_unanswerable) {
    throw ValidationError("extract_and_verify needs check_answer_key or check_unanswerable");
  }
  if (check_answer_key && !use_levenshtein && !use_llm_equivalence) {
    throw ValidationError("check_answer_key needs Levenshtein or LLM verification enabled");
  }

  std::map<std::string, const QueryTestBank*> by_query;
  for (const auto& b : banks) {
    b.validate();
    if (!by_query.emplace(b.query_id, &b).second) {
      throw ValidationError("two test banks for query '" + b.query_id + "'");
    }
  }
  for (const auto& r : responses) {
    if (direct) {
      if (!queries.count(r.query_id)) {
        throw ValidationError("no query text for query '" + r.query_id + "'");
      }
      continue;
    }
    const auto it = by_query.find(r.query_id);
    if (it == by_query.end()) throw ValidationError("no test bank for query '" + r.query_id + "'");
    const EntryKind kind = prompt.target == PromptTarget::question ? EntryKind::question
                                                                   : EntryKind::nugget;
    if (it->second->prompt_target != kind) {
      throw ValidationError("prompt '" + prompt.prompt_class + "' grades " + to_string(kind) +
                            "s, bank for query '" + r.query_id + "' holds " +
                            to_string(it->second->prompt_target) + "s");
    }
    if (mode == GradingMode::extract_and_verify && check_answer_key) {
      for (const auto& e : it->second->items) {
        if (e.gold_answers.empty()) {
          throw ValidationError("entry '" + e.entry_id + "' has no gold answers for answer-key checking");
        }
      }
    }
  }
}

PromptInfo prompt_info_for(const GradingJob& job) {
  PromptInfo info;
  info.prompt_class = job.prompt.prompt_class;
  info.prompt_style = job.prompt.prompt_style();
  info.context_first = job.prompt.context_first;
  info.is_self_rated = job.prompt.is_self_rated;
  if (job.mode == GradingMode::extract_and_verify) {
    info.check_answer_key = job.check_answer_key;
    info.check_unanswerable = job.check_unanswerable;
  }
  return info;
}

namespace {

struct Task {
  std::size_t record;
  std::size_t passage;
  const TestBankEntry* entry;  // null for direct grading
};

struct TaskResult {
  bool ok = false;
  std::string error;
  std::string answer;
  int rating = 0;
  bool fallback = false;
  bool correct = false;
};

bool answer_key_passes(const GradingJob& job, const TestBankEntry& entry,
                       const std::string& answer) {
  auto by_levenshtein = [&] { return job.use_levenshtein && verify_answer_key(answer, entry.gold_answers); };
  auto by_llm = [&] {
    if (!job.use_llm_equivalence) return false;
    for (const auto& gold : entry.gold_answers) {
      if (llm_answer_equivalence(entry.text, gold, answer, *job.backend)) return true;
    }
    return false;
  };
  if (job.order == VerificationOrder::levenshtein_first) return by_levenshtein() || by_llm();
  return by_llm() || by_levenshtein();
}

TaskResult run_task(const GradingJob& job, const Task& task, const std::string& entry_text,
                    const GradedPassage& passage) {
  TaskResult r;
  const std::string prompt = render_prompt(job.prompt, entry_text, passage.text, job.prompt_budget);
  r.answer = job.backend->complete(prompt);
  switch (job.mode) {
    case GradingMode::self_rated: {
      const auto parsed = parse_self_rating(r.answer);
      r.rating = parsed.rating;
      r.fallback = parsed.fallback;
      break;
    }
    case GradingMode::extract_and_verify: {
      bool correct = true;
      if (job.check_unanswerable && is_unanswerable(r.answer)) correct = false;
      if (correct && job.check_answer_key) correct = answer_key_passes(job, *task.entry, r.answer);
      r.correct = correct;
      break;
    }
    case GradingMode::extract_informational:
      break;
    case GradingMode::direct: {
      const std::string w = first_word(r.answer);
      if (w == "yes" || w == "no") {
        r.rating = w == "yes" ? 1 : 0;
      } else {
        const auto parsed = parse_self_rating(r.answer);
        r.rating = parsed.rating;
        r.fallback = parsed.fallback;
      }
      r.correct = r.rating >= 1;
      break;
    }
  }
  r.ok = true;
  return r;
}

}  // namespace

GradingResult grade_job(const GradingJob& job) {
  job.validate();
  GradingResult result;
  result.report.started = std::chrono::system_clock::now();
  result.responses = job.responses;

  std::map<std::string, std::vector<const TestBankEntry*>> entries_by_query;
  for (const auto& b : job.banks) {
    auto& list = entries_by_query[b.query_id];
    for (const auto& e : b.items) list.push_back(&e);
    std::sort(list.begin(), list.end(),
              [](const auto* x, const auto* y) { return x->entry_id < y->entry_id; });
  }

  std::vector<Task> tasks;
  for (std::size_t r = 0; r < job.responses.size(); ++r) {
    const auto& rec = job.responses[r];
    for (std::size_t p = 0; p < rec.passages.size(); ++p) {
      if (job.mode == GradingMode::direct) {
        tasks.push_back({r, p, nullptr});
      } else {
        for (const auto* e : entries_by_query[rec.query_id]) tasks.push_back({r, p, e});
      }
    }
  }
  result.report.pairs_total = tasks.size();

  std::vector<TaskResult> results(tasks.size());
  const auto allowed_failures =
      static_cast<std::size_t>(job.max_failure_fraction * static_cast<double>(tasks.size()));
  std::atomic<std::size_t> next{0};
  std::atomic<std::size_t> failed{0};
  std::atomic<bool> abort{false};
  auto worker = [&] {
    while (!abort.load()) {
      const auto i = next.fetch_add(1);
      if (i >= tasks.size()) return;
      const auto& t = tasks[i];
      const auto& rec = job.responses[t.record];
      const auto& passage = rec.passages[t.passage];
      const std::string& entry_text = t.entry ? t.entry->text : job.queries.at(rec.query_id);
      try {
        results[i] = run_task(job, t, entry_text, passage);
      } catch (const BudgetError&) {
        throw;
      } catch (const Error& e) {
        results[i].error = e.what();
        if (failed.fetch_add(1) + 1 > allowed_failures) abort.store(true);
      }
    }
  };
  std::exception_ptr worker_error;
  std::mutex error_mutex;
  auto guarded = [&] {
    try {
      worker();
    } catch (...) {
      std::lock_guard lock(error_mutex);
      if (!worker_error) worker_error = std::current_exception();
      abort.store(true);
    }
  };
  {
    std::vector<std::jthread> pool;
    const auto n = std::min<std::size_t>(static_cast<std::size_t>(job.jobs),
                                         std::max<std::size_t>(tasks.size(), 1));
    for (std::size_t i = 1; i < n; ++i) pool.emplace_back(guarded);
    guarded();
  }
  if (worker_error) std::rethrow_exception(worker_error);

  auto& report = result.report;
  for (std::size_t i = 0; i < tasks.size(); ++i) {
    if (!results[i].ok && !results[i].error.empty()) {
      const auto& t = tasks[i];
      const auto& rec = job.responses[t.record];
      report.failures.push_back({rec.query_id, rec.passages[t.passage].paragraph_id,
                                 t.entry ? t.entry->entry_id : std::string(), results[i].error});
    }
    if (results[i].fallback) ++report.rating_fallbacks;
  }
  report.pairs_failed = report.failures.size();
  report.finished = std::chrono::system_clock::now();
  if (abort.load()) {
    throw GradingAbortedError("grading aborted: " + std::to_string(report.pairs_failed) + " of " +
                                  std::to_string(report.pairs_total) + " pairs failed",
                              report);
  }

  const PromptInfo info = prompt_info_for(job);
  const std::string llm = job.backend->identifier();
  std::size_t i = 0;
  while (i < tasks.size()) {
    const auto& t = tasks[i];
    auto& passage = result.responses[t.record].passages[t.passage];
    if (job.mode == GradingMode::direct) {
      DirectGrade g;
      g.llm = llm;
      g.prompt_info = info;
      if (results[i].ok) {
        g.correct_answered = results[i].correct;
        g.self_rating = results[i].rating;
        g.answer = results[i].answer;
      }
      passage.grades.push_back(std::move(g));
      ++i;
      continue;
    }
    ExamGrade g;
    g.llm = llm;
    g.prompt_info = info;
    for (; i < tasks.size() && tasks[i].record == t.record && tasks[i].passage == t.passage; ++i) {
      const auto& r = results[i];
      if (!r.ok) continue;
      const auto& entry = *tasks[i].entry;
      g.answers.emplace_back(entry.entry_id, r.answer);
      if (job.mode == GradingMode::self_rated) {
        g.self_ratings.push_back({entry.entry_id, entry.kind, r.rating, Json::object()});
      } else if (job.mode == GradingMode::extract_and_verify) {
        (r.correct ? g.correct_answered : g.wrong_answered).push_back(entry.entry_id);
      }
    }
    g.recompute_ratio();
    passage.exam_grades.push_back(std::move(g));
  }
  // Passages of queries whose bank is empty still receive an (empty) grade.
  if (job.mode != GradingMode::direct) {
    for (auto& rec : result.responses) {
      if (!entries_by_query[rec.query_id].empty()) continue;
      for (auto& passage : rec.passages) {
        ExamGrade g;
        g.llm = llm;
        g.prompt_info = info;
        passage.exam_grades.push_back(std::move(g));
      }
    }
  }
  return result;
}

namespace {

std::string iso8601(std::chrono::system_clock::time_point tp) {
  const std::time_t t = std::chrono::system_clock::to_time_t(tp);
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

}  // namespace

Json grading_manifest(const GradingJob& job, const GradingReport& report) {
  Json failures = Json::array();
  for (const auto& f : report.failures) {
    failures.push_back({{"query_id", f.query_id},
                        {"paragraph_id", f.paragraph_id},
                        {"entry_id", f.entry_id},
                        {"message", f.message}});
  }
  return {{"prompt_class", job.prompt.prompt_class},
          {"prompt_style", job.prompt.prompt_style()},
          {"template", job.prompt.template_text},
          {"context_first", job.prompt.context_first},
          {"backend", job.backend ? job.backend->identifier() : std::string()},
          {"mode", to_string(job.mode)},
          {"check_answer_key", job.check_answer_key},
          {"check_unanswerable", job.check_unanswerable},
          {"prompt_budget", job.prompt_budget},
          {"jobs", job.jobs},
          {"started", iso8601(report.started)},
          {"finished", iso8601(report.finished)},
          {"pairs_total", report.pairs_total},
          {"pairs_failed", report.pairs_failed},
          {"rating_fallbacks", report.rating_fallbacks},
          {"failures", std::move(failures)}};
}

}  // namespace rubric
