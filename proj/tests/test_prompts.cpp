#include <gtest/gtest.h>

#include "rubric/error.hpp"
#include "rubric/llm_backend.hpp"
#include "rubric/text.hpp"
#include "support.hpp"

using namespace rubric;
using namespace testing_support;

namespace {

PromptTemplate builtin(const std::string& name) {
  auto t = find_builtin_template(name);
  EXPECT_TRUE(t.has_value()) << name;
  return *t;
}

// Whitespace between words varies so budgets cannot rely on single spaces.
std::string ragged_words(Rng& rng, int n) {
  static const char* kGaps[] = {" ", "  ", "\n", "\t", " \n\n "};
  std::string out;
  for (int i = 0; i < n; ++i) {
    if (i) out += kGaps[uniform_int(rng, 0, 4)];
    out += random_word(rng, 1, 8);
  }
  return out;
}

}  // namespace

TEST(Prompts, ShippedTemplateFilesMatchBuiltins) {
  for (const auto& t : builtin_templates()) {
    const auto path = source_dir() / "data" / "prompts" / (t.prompt_class + ".txt");
    const auto loaded = load_prompt_template(path, t.prompt_class, t.target, t.is_self_rated);
    EXPECT_EQ(loaded.template_text, t.template_text) << t.prompt_class;
  }
}

TEST(Prompts, TemplateValidation) {
  TempDir dir;
  spit(dir / "bad.txt", "Question: {question}\n");
  EXPECT_THROW(load_prompt_template(dir / "bad.txt", "X", PromptTarget::question, true), ValidationError);
  spit(dir / "nug.txt", "Question: {question}\nContext: {context}\n");
  EXPECT_THROW(load_prompt_template(dir / "nug.txt", "X", PromptTarget::nugget, true), ValidationError);
  EXPECT_NO_THROW(load_prompt_template(dir / "nug.txt", "X", PromptTarget::question, true));
}

TEST(Prompts, ContextFirstSwapsLines) {
  auto t = builtin("QuestionCompleteConciseUnanswerablePromptWithChoices");
  t.context_first = true;
  EXPECT_EQ(t.effective_text(),
            "provide a complete and concise answer to the question based on the context.\n"
            "Context: {context}\n"
            "Question: {question}");
  EXPECT_EQ(t.prompt_style(), "provide a complete and concise answer to the question based on the context.");
}

TEST(Prompts, RenderSubstitutesWithinBudget) {
  const auto t = builtin("QuestionCompleteConciseUnanswerablePromptWithChoices");
  EXPECT_EQ(render_prompt(t, "Who?", "Elvis.", 100),
            "provide a complete and concise answer to the question based on the context.\n"
            "Question: Who?\nContext: Elvis.");
}

TEST(Prompts, LongContextIsCutToAPrefix) {
  Rng rng(11);
  const auto t = builtin(kSelfRated);
  const auto context = random_words(rng, 1000);
  const auto prompt = render_prompt(t, "When did rock n roll begin?", context, 512);
  EXPECT_LE(prompt_token_count(prompt), 512u);
  const auto at = prompt.find("Context: ");
  ASSERT_NE(at, std::string::npos);
  const auto kept = prompt.substr(at + 9);
  EXPECT_FALSE(kept.empty());
  EXPECT_EQ(context.compare(0, kept.size(), kept), 0);
  EXPECT_EQ(prompt_token_count(prompt), 512u);
}

TEST(Prompts, TemplateAloneOverBudgetIsRejected) {
  const auto t = builtin(kSelfRated);
  ASSERT_GE(prompt_token_count(render_prompt(t, "", "", 1000)), 50u);
  EXPECT_THROW(render_prompt(t, "q", "context", 10), BudgetError);
}

TEST(Prompts, RenderNeverExceedsBudget) {
  Rng rng(2024);
  const auto& templates = builtin_templates();
  int rendered = 0;
  for (int trial = 0; trial < 10000; ++trial) {
    const auto& t = templates[static_cast<std::size_t>(uniform_int(rng, 0, static_cast<int>(templates.size()) - 1))];
    const auto entry = ragged_words(rng, uniform_int(rng, 0, 20));
    const auto context = ragged_words(rng, uniform_int(rng, 0, 800));
    const int budget = uniform_int(rng, 0, 700);
    const auto base = prompt_token_count(render_prompt(t, entry, "", 1 << 20));
    try {
      const auto prompt = render_prompt(t, entry, context, budget);
      ASSERT_LE(prompt_token_count(prompt), static_cast<std::size_t>(budget));
      ++rendered;
    } catch (const BudgetError&) {
      ASSERT_GT(base, static_cast<std::size_t>(budget));
    }
  }
  EXPECT_GT(rendered, 5000);
}

TEST(Prompts, SelfRatingParse) {
  EXPECT_EQ(parse_self_rating("4").rating, 4);
  EXPECT_FALSE(parse_self_rating("4").fallback);
  EXPECT_EQ(parse_self_rating("- 5: The answer is highly relevant, complete, and accurate.").rating, 5);
  const auto none = parse_self_rating("no relevant information here");
  EXPECT_EQ(none.rating, 0);
  EXPECT_TRUE(none.fallback);
  EXPECT_EQ(parse_self_rating("rating 7, then 3").rating, 3);
  EXPECT_EQ(parse_self_rating("x2 and 12 then (1)").rating, 1);
}

TEST(Prompts, TargetNames) {
  EXPECT_EQ(prompt_target_from_string("nuggets"), PromptTarget::nugget);
  EXPECT_EQ(to_string(PromptTarget::direct), "direct");
  EXPECT_THROW(prompt_target_from_string("essay"), ValidationError);
}
