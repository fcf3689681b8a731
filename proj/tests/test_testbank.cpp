#include <gtest/gtest.h>

#include <cmath>
#include <set>

#include "rubric/error.hpp"
#include "rubric/testbank.hpp"
#include "support.hpp"

using namespace rubric;
using namespace testing_support;

TEST(TestBank, EntryIdsMatchKnownExamples) {
  EXPECT_EQ(entry_id_for("940547", "Which musicians or bands are considered pioneers of rock n roll?"),
            "940547/a4c82219840e6d197d185ed1eda27c61");
  EXPECT_EQ(entry_id_for("940547", "Early 1950s innovation"), "940547/3e9afdb8aeb54b6f496bb72040d7f212");
}

TEST(TestBank, EmptyTextHasNoId) {
  EXPECT_THROW(entry_id_for("q", ""), ValidationError);
}

TEST(TestBank, EntryIdIsInjectiveOverDistinctTexts) {
  Rng rng(99);
  std::set<std::string> texts;
  std::set<std::string> ids;
  while (texts.size() < 10000) {
    const auto t = random_words(rng, uniform_int(rng, 1, 6));
    if (texts.insert(t).second) ids.insert(entry_id_for("q", t));
  }
  EXPECT_EQ(ids.size(), texts.size());
}

TEST(TestBank, ReplaceChangesTextAndId) {
  const auto bank = question_bank("1108651", {"How does soaking clothes in bleach affect their whiteness?"});
  const auto old_id = bank.items[0].entry_id;
  const auto edited = apply_edit(bank, ReplaceEntry{old_id, "How to use bleach to wash white clothes?"});
  ASSERT_EQ(edited.items.size(), 1u);
  EXPECT_EQ(edited.items[0].text, "How to use bleach to wash white clothes?");
  EXPECT_NE(edited.items[0].entry_id, old_id);
  EXPECT_EQ(edited.items[0].entry_id, entry_id_for("1108651", "How to use bleach to wash white clothes?"));
  EXPECT_EQ(bank.items[0].entry_id, old_id);
}

TEST(TestBank, AddThenRemoveRestoresBank) {
  Rng rng(5);
  for (int trial = 0; trial < 100; ++trial) {
    std::vector<std::string> texts;
    std::set<std::string> seen;
    const int n = uniform_int(rng, 0, 8);
    while (static_cast<int>(texts.size()) < n) {
      auto t = random_words(rng, 3) + "?";
      if (seen.insert(t).second) texts.push_back(t);
    }
    const auto bank = question_bank("q", texts);
    std::string added;
    do added = random_words(rng, 4) + "?";
    while (seen.count(added));
    const auto grown = apply_edit(bank, AddEntry{added, EntryKind::question, {}});
    EXPECT_EQ(grown.items.size(), bank.items.size() + 1);
    EXPECT_EQ(apply_edit(grown, RemoveEntry{entry_id_for("q", added)}), bank);
  }
}

TEST(TestBank, EditErrors) {
  const auto bank = question_bank("q", {"A?", "B?"});
  EXPECT_THROW(apply_edit(bank, AddEntry{"A?", EntryKind::question, {}}), ConflictError);
  EXPECT_THROW(apply_edit(bank, AddEntry{"", EntryKind::question, {}}), ValidationError);
  EXPECT_THROW(apply_edit(bank, AddEntry{"n", EntryKind::nugget, {}}), ValidationError);
  EXPECT_THROW(apply_edit(bank, RemoveEntry{"q/none"}), NotFoundError);
  EXPECT_THROW(apply_edit(bank, ReplaceEntry{bank.items[0].entry_id, "B?"}), ConflictError);
  EXPECT_THROW(apply_edit(bank, ReplaceEntry{bank.items[0].entry_id, ""}), ValidationError);
  EXPECT_EQ(apply_edit(bank, ReplaceEntry{bank.items[0].entry_id, "A?"}), bank);
}

TEST(TestBank, ValidateRejectsBrokenBanks) {
  auto bank = question_bank("q", {"A?"});
  auto dup = bank;
  dup.items.push_back(dup.items[0]);
  EXPECT_THROW(dup.validate(), ValidationError);
  auto foreign = bank;
  foreign.items[0].query_id = "other";
  EXPECT_THROW(foreign.validate(), ValidationError);
  auto mixed = bank;
  mixed.items[0].kind = EntryKind::nugget;
  EXPECT_THROW(mixed.validate(), ValidationError);
}

TEST(TestBank, SaveLoadRoundTrip) {
  TempDir dir;
  auto questions = question_bank("940547", {"Which musicians or bands are considered pioneers of rock n roll?"},
                                 "when did rock n roll begin?");
  questions.items[0].gold_answers = {"Elvis Presley", "Chuck Berry"};
  questions.items[0].choices = std::vector<std::string>{"A", "B"};
  questions.items[0].extra["note"] = "kept";
  questions.extra["source"] = "manual";
  QueryTestBank nuggets;
  nuggets.query_id = "940547";
  nuggets.query_text = "when did rock n roll begin?";
  nuggets.prompt_target = EntryKind::nugget;
  nuggets.items.push_back(make_entry("940547", EntryKind::nugget, "Early 1950s innovation"));
  for (const auto* name : {"bank.jsonl", "bank.jsonl.gz"}) {
    save_test_bank({questions, nuggets}, dir / name);
    const auto loaded = load_test_bank(dir / name);
    ASSERT_EQ(loaded.size(), 2u);
    EXPECT_EQ(loaded[0], questions);
    EXPECT_EQ(loaded[1], nuggets);
  }
  const auto j = to_json(nuggets);
  EXPECT_EQ(j["info"]["prompt_target"], "nuggets");
  EXPECT_EQ(j["items"][0]["nugget_id"], "940547/3e9afdb8aeb54b6f496bb72040d7f212");
}

TEST(TestBank, LoadRejectsConflictingTextKeys) {
  TempDir dir;
  spit(dir / "bad.jsonl",
       R"({"query_id":"q","items":[{"query_id":"q","question_text":"A?"}]})"
       "\n"
       R"({"query_id":"q","items":[{"query_id":"q","question_text":"A?","nugget_text":"A"}]})"
       "\n");
  try {
    load_test_bank(dir / "bad.jsonl");
    FAIL() << "expected ParseError";
  } catch (const ParseError& e) {
    EXPECT_EQ(e.line(), 2u);
  }
}

TEST(TestBank, LoadFillsMissingIds) {
  TempDir dir;
  spit(dir / "b.jsonl", R"({"query_id":"940547","items":[{"query_id":"940547","nugget_text":"Early 1950s innovation"}]})");
  const auto banks = load_test_bank(dir / "b.jsonl");
  ASSERT_EQ(banks.size(), 1u);
  EXPECT_EQ(banks[0].prompt_target, EntryKind::nugget);
  EXPECT_EQ(banks[0].items[0].entry_id, "940547/3e9afdb8aeb54b6f496bb72040d7f212");
}

TEST(TestBank, GenerationParsesFencedQuestions) {
  ScriptedBackend backend([](const std::string&) {
    return "Here you go:\n```json\n{\"questions\":[\"Q1\",\"Q2\"]}\n```\n";
  });
  const auto bank = generate_test_bank("940547", "when did rock n roll begin?", EntryKind::question, backend);
  ASSERT_EQ(bank.items.size(), 2u);
  EXPECT_EQ(bank.items[0].text, "Q1");
  EXPECT_EQ(bank.items[1].entry_id, entry_id_for("940547", "Q2"));
  EXPECT_EQ(backend.calls(), 1);
}

TEST(TestBank, GenerationParsesNuggets) {
  ScriptedBackend backend([](const std::string&) { return R"({"nuggets":["Early 1950s innovation"]})"; });
  const auto bank = generate_test_bank("940547", "when did rock n roll begin?", EntryKind::nugget, backend);
  ASSERT_EQ(bank.items.size(), 1u);
  EXPECT_EQ(bank.items[0].entry_id, "940547/3e9afdb8aeb54b6f496bb72040d7f212");
  EXPECT_EQ(bank.prompt_target, EntryKind::nugget);
}

TEST(TestBank, GenerationAcceptsMissingClosingBrace) {
  EXPECT_EQ(parse_generated_items("```json \n{ \"questions\" : [\"A?\", \"B?\"]\n```", EntryKind::question),
            (std::vector<std::string>{"A?", "B?"}));
}

TEST(TestBank, GenerationFailures) {
  ScriptedBackend prose([](const std::string&) { return "Rock and roll began in the 1950s."; });
  try {
    generate_test_bank("q", "x", EntryKind::question, prose);
    FAIL() << "expected GenerationParseError";
  } catch (const GenerationParseError& e) {
    EXPECT_EQ(e.raw_completion(), "Rock and roll began in the 1950s.");
  }
  ScriptedBackend empty([](const std::string&) { return R"({"questions":[]})"; });
  EXPECT_THROW(generate_test_bank("q", "x", EntryKind::question, empty), EmptyTestBankError);
  EXPECT_THROW(parse_generated_items(R"({"nuggets":["a"]})", EntryKind::question), GenerationParseError);
  EXPECT_THROW(parse_generated_items(R"({"questions":[1]})", EntryKind::question), GenerationParseError);
}

TEST(TestBank, GenerationDropsDuplicateTexts) {
  ScriptedBackend backend([](const std::string&) { return R"({"questions":["A?","B?","A?",""]})"; });
  const auto bank = generate_test_bank("q", "x", EntryKind::question, backend);
  EXPECT_EQ(bank.items.size(), 2u);
}

TEST(TestBank, GenerationPromptCarriesQueryAndInstruction) {
  const auto dl = render_generation_prompt("when did rock n roll begin?", EntryKind::question);
  EXPECT_NE(dl.find("Break the query 'when did rock n roll begin?'"), std::string::npos);
  EXPECT_NE(dl.find("{ \"questions\" : [question_text_1"), std::string::npos);
  GenerationOptions car;
  car.style = GenerationStyle::trec_car;
  car.query_title = "Rock music";
  car.query_subtopic = "Origins";
  const auto c = render_generation_prompt("ignored", EntryKind::nugget, car);
  EXPECT_NE(c.find("'Rock music' with a specific focus on the subtopic 'Origins'"), std::string::npos);
  EXPECT_NE(c.find("\"nuggets\""), std::string::npos);
  GenerationOptions custom;
  custom.template_text = "Q={query_text}";
  EXPECT_EQ(render_generation_prompt("x", EntryKind::question, custom), "Q=x");
}

TEST(TestBank, WithholdIsReproducibleAndPartitions) {
  Rng rng(3);
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<std::string> texts;
    std::set<std::string> seen;
    const int n = uniform_int(rng, 0, 12);
    while (static_cast<int>(texts.size()) < n) {
      auto t = random_words(rng, 3);
      if (seen.insert(t).second) texts.push_back(t);
    }
    const std::vector<QueryTestBank> banks = {question_bank("q", texts)};
    const double fraction = uniform_int(rng, 0, 10) / 10.0;
    const auto [shared, withheld] = withhold_entries(banks, fraction, "seed");
    const auto again = withhold_entries(banks, fraction, "seed");
    EXPECT_EQ(shared, again.first);
    EXPECT_EQ(withheld, again.second);
    EXPECT_EQ(shared[0].items.size() + withheld[0].items.size(), texts.size());
    EXPECT_EQ(withheld[0].items.size(),
              static_cast<std::size_t>(std::ceil(fraction * static_cast<double>(n) - 1e-9)));
    std::set<std::string> ids;
    for (const auto& e : shared[0].items) ids.insert(e.entry_id);
    for (const auto& e : withheld[0].items) EXPECT_EQ(ids.count(e.entry_id), 0u);
  }
  EXPECT_THROW(withhold_entries({}, 1.5, "s"), ValidationError);
}
