#include <algorithm>
#include <cctype>
#include <optional>
#include <set>

#include <json.hpp>

#include "rubric/llm_backend.hpp"
#include "rubric/text.hpp"

namespace rubric {

namespace {

struct Match {
  std::string entry;
  std::string context;
};

// Matches `prompt` against a template with exactly the entry and context
// placeholders, in either order.
std::optional<Match> match_template(const std::string& tmpl, const std::string& placeholder,
                                    const std::string& prompt) {
  const auto pe = tmpl.find(placeholder);
  const auto pc = tmpl.find("{context}");
  if (pe == std::string::npos || pc == std::string::npos) return std::nullopt;
  const bool entry_first = pe < pc;
  const auto p1 = entry_first ? pe : pc;
  const auto len1 = entry_first ? placeholder.size() : std::string("{context}").size();
  const auto p2 = entry_first ? pc : pe;
  const auto len2 = entry_first ? std::string("{context}").size() : placeholder.size();
  const std::string s0 = tmpl.substr(0, p1);
  const std::string s1 = tmpl.substr(p1 + len1, p2 - p1 - len1);
  const std::string s2 = tmpl.substr(p2 + len2);

  if (prompt.compare(0, s0.size(), s0) != 0) return std::nullopt;
  if (prompt.size() < s0.size() + s1.size() + s2.size()) return std::nullopt;
  if (prompt.compare(prompt.size() - s2.size(), s2.size(), s2) != 0) return std::nullopt;
  const std::string middle = prompt.substr(s0.size(), prompt.size() - s0.size() - s2.size());
  // The context is free text and may contain the separator, the entry may not.
  const auto sep = entry_first ? middle.find(s1) : middle.rfind(s1);
  if (sep == std::string::npos) return std::nullopt;
  std::string first = middle.substr(0, sep);
  std::string second = middle.substr(sep + s1.size());
  if (entry_first) return Match{std::move(first), std::move(second)};
  return Match{std::move(second), std::move(first)};
}

std::set<std::string> word_set(std::string_view s) {
  auto words = text::content_words(s);
  return {words.begin(), words.end()};
}

std::size_t overlap(const std::vector<std::string>& entry_words, const std::set<std::string>& ctx) {
  std::size_t n = 0;
  for (const auto& w : entry_words) n += ctx.count(w);
  return n;
}

std::string self_rating(const Match& m) {
  const auto entry_words = text::content_words(m.entry);
  if (entry_words.empty()) return "0";
  const auto hit = overlap(entry_words, word_set(m.context));
  const auto n = entry_words.size();
  // round(5 * hit / n), halves rounded up
  const auto rating = (10 * hit + n) / (2 * n);
  return std::to_string(std::min<std::size_t>(rating, 5));
}

std::string extraction(const Match& m) {
  const auto entry_words = text::content_words(m.entry);
  std::string best;
  std::size_t best_hit = 0;
  for (const auto& sentence : text::split_sentences(m.context)) {
    const auto hit = overlap(entry_words, word_set(sentence));
    if (hit > best_hit) {
      best_hit = hit;
      best = sentence;
    }
  }
  return best_hit == 0 ? "unanswerable" : best;
}

std::string direct_verdict(const Match& m) {
  const auto query_words = text::content_words(m.entry);
  if (query_words.empty()) return "no";
  const auto hit = overlap(query_words, word_set(m.context));
  return 2 * hit >= query_words.size() ? "yes" : "no";
}

std::optional<std::string> between(const std::string& s, const std::string& open,
                                   const std::string& close) {
  const auto a = s.find(open);
  if (a == std::string::npos) return std::nullopt;
  const auto b = s.find(close, a + open.size());
  if (b == std::string::npos) return std::nullopt;
  return s.substr(a + open.size(), b - a - open.size());
}

std::optional<std::string> generation(const std::string& prompt) {
  const bool questions = prompt.find("\"questions\" : [") != std::string::npos;
  const bool nuggets = prompt.find("\"nuggets\" : [") != std::string::npos;
  if (!questions && !nuggets) return std::nullopt;
  auto topic = between(prompt, "Break the query '", "' into concise");
  if (!topic) topic = between(prompt, "the subtopic '", "'.");
  if (!topic) return std::nullopt;
  nlohmann::json items = nlohmann::json::array();
  for (const auto& w : text::content_words(*topic)) {
    if (items.size() == 10) break;
    items.push_back(questions ? "What about " + w + "?" : w);
  }
  nlohmann::json body = {{questions ? "questions" : "nuggets", items}};
  return "```json\n" + body.dump() + "\n```";
}

std::string normalize_answer(std::string_view s) {
  const std::string lower = text::to_lower(s);
  std::string out;
  for (auto w : text::split_words(lower)) {
    std::string t(w);
    while (!t.empty() && !std::isalnum(static_cast<unsigned char>(t.back()))) t.pop_back();
    std::size_t b = 0;
    while (b < t.size() && !std::isalnum(static_cast<unsigned char>(t[b]))) ++b;
    t.erase(0, b);
    if (t.empty()) continue;
    if (!out.empty()) out.push_back(' ');
    out += t;
  }
  return out;
}

std::optional<std::string> equivalence(const std::string& prompt) {
  static const std::string kHead = "For the question \"";
  static const std::string kGold = "\" the correct answer is \"";
  static const std::string kAnswer = "\". Is \"";
  static const std::string kTail = "\" an equally correct response to this question? Answer yes or no.";
  if (prompt.rfind(kHead, 0) != 0) return std::nullopt;
  const auto g = prompt.find(kGold);
  const auto t = prompt.rfind(kTail);
  if (g == std::string::npos || t == std::string::npos || t < g) return std::nullopt;
  const auto a = prompt.find(kAnswer, g + kGold.size());
  if (a == std::string::npos || a > t) return std::nullopt;
  const auto gold = prompt.substr(g + kGold.size(), a - g - kGold.size());
  const auto answer = prompt.substr(a + kAnswer.size(), t - a - kAnswer.size());
  return normalize_answer(gold) == normalize_answer(answer) ? "yes" : "no";
}

}  // namespace

MockBackend::MockBackend() : MockBackend(std::vector<PromptTemplate>{}) {}

// User templates are tried before the built-ins.
MockBackend::MockBackend(std::vector<PromptTemplate> templates)
    : Backend(1 << 20), templates_(std::move(templates)) {
  const auto& builtin = builtin_templates();
  templates_.insert(templates_.end(), builtin.begin(), builtin.end());
}

std::string MockBackend::mock_complete(const std::string& prompt) const {
  if (auto eq = equivalence(prompt)) return *eq;
  if (auto gen = generation(prompt)) return *gen;
  for (const auto& base : templates_) {
    for (bool context_first : {false, true}) {
      PromptTemplate t = base;
      t.context_first = context_first;
      const auto m = match_template(t.effective_text(), t.entry_placeholder(), prompt);
      if (!m) continue;
      if (t.is_self_rated) return self_rating(*m);
      if (t.target == PromptTarget::direct) return direct_verdict(*m);
      return extraction(*m);
    }
  }
  return "";
}

}  // namespace rubric
