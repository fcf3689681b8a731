#include <algorithm>
#include <cctype>

#include "rubric/error.hpp"
#include "rubric/gzip_io.hpp"
#include "rubric/llm_backend.hpp"
#include "rubric/text.hpp"

namespace rubric {

std::string to_string(PromptTarget target) {
  switch (target) {
    case PromptTarget::question: return "question";
    case PromptTarget::nugget: return "nugget";
    case PromptTarget::direct: return "direct";
  }
  return "question";
}

PromptTarget prompt_target_from_string(const std::string& s) {
  if (s == "question" || s == "questions") return PromptTarget::question;
  if (s == "nugget" || s == "nuggets") return PromptTarget::nugget;
  if (s == "direct") return PromptTarget::direct;
  throw ValidationError("unknown prompt target '" + s + "'");
}

std::string PromptTemplate::entry_placeholder() const {
  switch (target) {
    case PromptTarget::question: return "{question}";
    case PromptTarget::nugget: return "{nugget}";
    case PromptTarget::direct: return "{query}";
  }
  return "{question}";
}

namespace {

std::vector<std::string> split_lines(const std::string& s) {
  std::vector<std::string> lines;
  std::size_t start = 0;
  while (true) {
    const auto nl = s.find('\n', start);
    lines.push_back(s.substr(start, nl == std::string::npos ? std::string::npos : nl - start));
    if (nl == std::string::npos) break;
    start = nl + 1;
  }
  return lines;
}

}  // namespace

std::string PromptTemplate::effective_text() const {
  if (!context_first) return template_text;
  auto lines = split_lines(template_text);
  const std::string entry = entry_placeholder();
  auto entry_line = std::find_if(lines.begin(), lines.end(),
                                 [&](const std::string& l) { return l.find(entry) != std::string::npos; });
  auto context_line = std::find_if(lines.begin(), lines.end(), [](const std::string& l) {
    return l.find("{context}") != std::string::npos;
  });
  if (entry_line == lines.end() || context_line == lines.end() || entry_line == context_line) {
    return template_text;
  }
  std::iter_swap(entry_line, context_line);
  std::string out;
  for (std::size_t i = 0; i < lines.size(); ++i) {
    if (i) out.push_back('\n');
    out += lines[i];
  }
  return out;
}

std::string PromptTemplate::prompt_style() const {
  return template_text.substr(0, template_text.find('\n'));
}

void PromptTemplate::validate() const {
  if (prompt_class.empty()) throw ValidationError("prompt template lacks a prompt_class");
  if (template_text.find(entry_placeholder()) == std::string::npos) {
    throw ValidationError("template '" + prompt_class + "' lacks placeholder " + entry_placeholder());
  }
  if (template_text.find("{context}") == std::string::npos) {
    throw ValidationError("template '" + prompt_class + "' lacks placeholder {context}");
  }
}

const std::vector<PromptTemplate>& builtin_templates() {
  static const std::vector<PromptTemplate> kTemplates = {
      {"QuestionSelfRatedUnanswerablePromptWithChoices",
       "Can the question be answered based on the available context? choose one:\n"
       "- 5: The answer is highly relevant, complete, and accurate.\n"
       "- 4: The answer is mostly relevant and complete but may have minor gaps or inaccuracies.\n"
       "- 3: The answer is partially relevant and complete, with noticeable gaps or inaccuracies.\n"
       "- 2: The answer has limited relevance and completeness, with significant gaps or "
       "inaccuracies.\n"
       "- 1: The answer is minimally relevant or complete, with substantial shortcomings.\n"
       "- 0: The answer is not relevant or complete at all.\n"
       "Question: {question}\n"
       "Context: {context}",
       true, PromptTarget::question, false},
      {"NuggetSelfRatedPrompt",
       "Given the context, evaluate the coverage of the specified key fact (nugget). Use this "
       "scale:\n"
       "- 5: Detailed, clear coverage.\n"
       "- 4: Sufficient coverage, minor omissions.\n"
       "- 3: Mentioned, some inaccuracies or lacks detail.\n"
       "- 2: Briefly mentioned, significant omissions or inaccuracies.\n"
       "- 1: Minimally mentioned, largely inaccurate.\n"
       "- 0: Not mentioned at all.\n"
       "Key Fact: {nugget}\n"
       "Context: {context}",
       true, PromptTarget::nugget, false},
      {"QuestionCompleteConciseUnanswerablePromptWithChoices",
       "provide a complete and concise answer to the question based on the context.\n"
       "Question: {question}\n"
       "Context: {context}",
       false, PromptTarget::question, false},
      {"NuggetExtractionPrompt",
       "Extract the passage from the text that best relates to the key fact (nugget), ensuring "
       "relevance and clarity.\n"
       "Key Fact: {nugget}\n"
       "Context: {context}",
       false, PromptTarget::nugget, false},
      {"MinimalRelevance",
       "Does the passage answer the query? Answer yes or no.\n"
       "Query: {query}\n"
       "Passage: {context}",
       false, PromptTarget::direct, false},
  };
  return kTemplates;
}

std::optional<PromptTemplate> find_builtin_template(const std::string& prompt_class) {
  for (const auto& t : builtin_templates()) {
    if (t.prompt_class == prompt_class) return t;
  }
  return std::nullopt;
}

const std::vector<std::string>& external_direct_classes() {
  static const std::vector<std::string> kClasses = {"Sun", "Sun_few", "Fag", "Fag_fewshot",
                                                    "Thom", "HELM"};
  return kClasses;
}

PromptTemplate load_prompt_template(const std::filesystem::path& path, std::string prompt_class,
                                    PromptTarget target, bool is_self_rated) {
  std::string body = io::read_text_file(path);
  while (!body.empty() && (body.back() == '\n' || body.back() == '\r')) body.pop_back();
  PromptTemplate t{std::move(prompt_class), std::move(body), is_self_rated, target, false};
  t.validate();
  return t;
}

std::size_t prompt_token_count(std::string_view s) { return text::word_count(s); }

std::string render_prompt(const PromptTemplate& tmpl, std::string_view entry_text,
                          std::string_view context, int budget) {
  const std::string text = tmpl.effective_text();
  const std::string placeholder = tmpl.entry_placeholder();
  auto render = [&](std::string_view ctx) {
    return text::substitute(text, {{placeholder, entry_text}, {"{context}", ctx}});
  };
  const auto limit = static_cast<std::size_t>(std::max(budget, 0));
  const std::size_t base = prompt_token_count(render(""));
  if (base > limit) {
    throw BudgetError("prompt '" + tmpl.prompt_class + "' needs " + std::to_string(base) +
                      " tokens without context, budget is " + std::to_string(budget));
  }
  std::string full = render(context);
  if (prompt_token_count(full) <= limit) return full;

  // Substituting k context words adds at most k tokens, so a prefix of
  // (limit - base) words always fits.
  const auto words = text::split_words(context);
  const std::size_t keep = std::min(words.size(), limit - base);
  if (keep == 0) return render("");
  const auto& last = words[keep - 1];
  return render(context.substr(0, static_cast<std::size_t>(last.data() + last.size() - context.data())));
}

RatingParse parse_self_rating(std::string_view completion) {
  auto alnum = [](char c) { return std::isalnum(static_cast<unsigned char>(c)) != 0; };
  for (std::size_t i = 0; i < completion.size(); ++i) {
    const char c = completion[i];
    if (c < '0' || c > '5') continue;
    if (i > 0 && alnum(completion[i - 1])) continue;
    if (i + 1 < completion.size() && alnum(completion[i + 1])) continue;
    return {c - '0', false};
  }
  return {0, true};
}

}  // namespace rubric
