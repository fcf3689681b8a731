#include <gtest/gtest.h>

#include "oracles.hpp"
#include "rubric/error.hpp"
#include "rubric/trec_formats.hpp"
#include "support.hpp"

using namespace rubric;
using namespace testing_support;

TEST(TrecRun, ParsesSixColumnLine) {
  const auto run = parse_run("940547 Q0 p12 1 17.5606 pash_f3\n");
  ASSERT_EQ(run.size(), 1u);
  EXPECT_EQ(run[0].query_id, "940547");
  EXPECT_EQ(run[0].paragraph_id, "p12");
  EXPECT_EQ(run[0].rank, 1);
  EXPECT_DOUBLE_EQ(run[0].score, 17.5606);
  EXPECT_EQ(run[0].method, "pash_f3");
}

TEST(TrecRun, AcceptsTabsAndBlankLines) {
  const auto run = parse_run("\nq1\tQ0\td1\t1\t-2.5e1\tr\n\n  q1 Q0 d2 2 3 r  \r\n");
  ASSERT_EQ(run.size(), 2u);
  EXPECT_DOUBLE_EQ(run[0].score, -25.0);
  EXPECT_EQ(run[1].paragraph_id, "d2");
}

TEST(TrecRun, SameRankUnderDifferentTagsOrQueries) {
  EXPECT_EQ(parse_run("q1 Q0 d1 1 1 a\nq1 Q0 d1 1 1 b\nq2 Q0 d1 1 1 a\n").size(), 3u);
}

TEST(TrecRun, MalformedFixturesReportTheirLine) {
  for (const auto& fx : malformed_runs()) {
    try {
      parse_run(fx.text);
      ADD_FAILURE() << fx.name << ": accepted";
    } catch (const DuplicateRankError& e) {
      EXPECT_EQ(e.line(), fx.line) << fx.name;
    } catch (const ParseError& e) {
      EXPECT_EQ(e.line(), fx.line) << fx.name;
    }
  }
}

TEST(TrecRun, FormatRoundTrip) {
  Rng rng(4);
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<RankingEntry> run;
    const int n = uniform_int(rng, 0, 30);
    for (int i = 0; i < n; ++i) {
      RankingEntry e;
      e.query_id = "q" + std::to_string(uniform_int(rng, 1, 3));
      e.method = "m" + std::to_string(uniform_int(rng, 1, 2));
      e.paragraph_id = random_word(rng);
      e.rank = i + 1;
      e.score = uniform_int(rng, -1000, 1000) / 8.0;
      run.push_back(e);
    }
    const auto back = parse_run(format_run(run));
    ASSERT_EQ(back.size(), run.size());
    for (std::size_t i = 0; i < run.size(); ++i) {
      EXPECT_EQ(back[i].query_id, run[i].query_id);
      EXPECT_EQ(back[i].paragraph_id, run[i].paragraph_id);
      EXPECT_EQ(back[i].rank, run[i].rank);
      EXPECT_DOUBLE_EQ(back[i].score, run[i].score);
      EXPECT_EQ(back[i].method, run[i].method);
    }
  }
}

TEST(TrecQrels, ParsesFourColumnLine) {
  const auto q = parse_qrels("940547 0 p12 2\n");
  ASSERT_EQ(q.size(), 1u);
  EXPECT_EQ(q[0].query, "940547");
  EXPECT_EQ(q[0].paragraph_id, "p12");
  EXPECT_EQ(q[0].relevance, 2);
}

TEST(TrecQrels, RejectsMalformedLines) {
  auto line_of = [](const std::string& text) -> std::size_t {
    try {
      parse_qrels(text);
    } catch (const ParseError& e) {
      return e.line();
    }
    return 0;
  };
  EXPECT_EQ(line_of("q 0 d 1\nq 0 d2\n"), 2u);
  EXPECT_EQ(line_of("q 0 d x\n"), 1u);
  EXPECT_EQ(line_of("q 0 d 1\nq 0 e 1\nq 0 d 2\n"), 3u);
  EXPECT_EQ(parse_qrels("q 0 d -1\n")[0].relevance, -1);
}

TEST(TrecQrels, FormatIsSortedAndReparsesLosslessly) {
  Rng rng(6);
  for (int trial = 0; trial < 100; ++trial) {
    std::map<std::pair<std::string, std::string>, int> unique;
    const int n = uniform_int(rng, 0, 40);
    for (int i = 0; i < n; ++i) {
      unique[{std::to_string(uniform_int(rng, 1, 999)), random_word(rng)}] = uniform_int(rng, 0, 5);
    }
    std::vector<QrelsLine> lines;
    for (const auto& [key, label] : unique) lines.push_back({key.first, key.second, label});
    std::shuffle(lines.begin(), lines.end(), rng);
    const auto text = format_qrels(lines);
    const auto parsed = parse_qrels(text);
    ASSERT_EQ(parsed.size(), unique.size());
    std::vector<QrelsLine> back;
    for (const auto& j : parsed) back.push_back({j.query, j.paragraph_id, j.relevance});
    std::sort(lines.begin(), lines.end(), [](const QrelsLine& a, const QrelsLine& b) {
      return std::tie(a.query_id, a.paragraph_id) < std::tie(b.query_id, b.paragraph_id);
    });
    EXPECT_EQ(back, lines);
    std::vector<QrelsLine> again;
    for (const auto& j : parse_qrels(format_qrels(back))) again.push_back({j.query, j.paragraph_id, j.relevance});
    EXPECT_EQ(format_qrels(again), text);
  }
}

TEST(TrecFiles, ReadFromDisk) {
  TempDir dir;
  spit(dir / "run.txt", "q1 Q0 d1 1 2 r\n");
  spit(dir / "qrels.txt", "q1 0 d1 1\n");
  EXPECT_EQ(parse_run_file(dir / "run.txt").size(), 1u);
  EXPECT_EQ(parse_qrels_file(dir / "qrels.txt").size(), 1u);
  EXPECT_THROW(parse_run_file(dir / "missing.txt"), IoError);
}
