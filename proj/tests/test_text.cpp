#include <gtest/gtest.h>

#include <sstream>

#include "oracles.hpp"
#include "rubric/text.hpp"
#include "support.hpp"

using namespace rubric;
using namespace testing_support;

TEST(Text, Md5KnownDigests) {
  EXPECT_EQ(text::md5_hex(""), "d41d8cd98f00b204e9800998ecf8427e");
  EXPECT_EQ(text::md5_hex("The quick brown fox jumps over the lazy dog"), "9e107d9d372bb6826bd81d3542a419d6");
}

TEST(Text, PorterMatchesReferenceStems) {
  std::istringstream in(slurp(data_dir() / "porter_pairs.tsv"));
  std::string line;
  int checked = 0;
  std::vector<std::string> mismatches;
  while (std::getline(in, line)) {
    const auto tab = line.find('\t');
    ASSERT_NE(tab, std::string::npos);
    const auto word = line.substr(0, tab);
    const auto stem = line.substr(tab + 1);
    if (text::porter_stem(word) != stem) mismatches.push_back(word + " -> " + text::porter_stem(word) + " (want " + stem + ")");
    ++checked;
  }
  EXPECT_GT(checked, 2000);
  EXPECT_TRUE(mismatches.empty()) << mismatches.size() << " mismatches, first: " << mismatches.front();
}

TEST(Text, PorterSpotChecks) {
  EXPECT_EQ(text::porter_stem("rising"), "rise");
  EXPECT_EQ(text::porter_stem("caresses"), "caress");
  EXPECT_EQ(text::porter_stem("ponies"), "poni");
  EXPECT_EQ(text::porter_stem("relational"), "relat");
  EXPECT_EQ(text::porter_stem("is"), "is");
}

TEST(Text, LevenshteinMatchesDynamicProgrammingOracle) {
  Rng rng(17);
  for (int trial = 0; trial < 500; ++trial) {
    const auto a = random_word(rng, 0, 12);
    const auto b = uniform_int(rng, 0, 3) == 0 ? a : random_word(rng, 0, 12);
    EXPECT_EQ(text::levenshtein(a, b), levenshtein_oracle(a, b)) << a << " / " << b;
  }
  EXPECT_EQ(text::levenshtein("fall", "rise"), 4u);
}

TEST(Text, NormalizedSimilarityBounds) {
  EXPECT_DOUBLE_EQ(text::normalized_similarity("", ""), 1.0);
  EXPECT_DOUBLE_EQ(text::normalized_similarity("fall", "rise"), 0.0);
  EXPECT_DOUBLE_EQ(text::normalized_similarity("rise", "rise"), 1.0);
}

TEST(Text, WordHelpers) {
  EXPECT_EQ(text::word_count("  a  b\tc\n"), 3u);
  EXPECT_EQ(text::collapse_whitespace("  a \n b  "), "a b");
  EXPECT_EQ(text::trim("\t x \n"), "x");
  const auto cw = text::content_words("Which musicians or bands are considered pioneers of rock n roll?");
  EXPECT_EQ(cw, (std::vector<std::string>{"musicians", "bands", "considered", "pioneers", "rock", "roll"}));
}

TEST(Text, SentencesKeepPunctuation) {
  EXPECT_EQ(text::split_sentences("One. Two? Three!  Four"),
            (std::vector<std::string>{"One.", "Two?", "Three!", "Four"}));
  EXPECT_EQ(text::split_sentences("Version 1.5 ships."), (std::vector<std::string>{"Version 1.5 ships."}));
}

TEST(Text, SubstituteDoesNotRescanInsertedText) {
  EXPECT_EQ(text::substitute("Q: {question} C: {context}", {{"{question}", "{context}"}, {"{context}", "ctx"}}),
            "Q: {context} C: ctx");
}
