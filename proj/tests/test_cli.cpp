#include <gtest/gtest.h>

#include <cstdlib>

#include "reference_tables.hpp"
#include "rubric/core_model.hpp"
#include "rubric/testbank.hpp"
#include "support.hpp"

using namespace rubric;
using namespace testing_support;

namespace {

class ScopedEnv {
 public:
  ScopedEnv(std::string name, const std::string& value) : name_(std::move(name)) {
    ::setenv(name_.c_str(), value.c_str(), 1);
  }
  ~ScopedEnv() { ::unsetenv(name_.c_str()); }

 private:
  std::string name_;
};

/// generate -> grade -> export-qrels -> leaderboard -> cover over the toy corpus.
struct Pipeline {
  TempDir dir;
  std::string bank;
  std::string graded;

  Pipeline() {
    const auto toy = toy_dir();
    bank = (dir / "rubric-questions.jsonl.gz").string();
    graded = (dir / (kSelfRated + "-responses.jsonl")).string();
    run({"generate", "--queries", (toy / "queries.json").string(), "--out-dir", dir.path().string()});
    run({"grade", "--responses", (toy / "responses.jsonl").string(), "--testbank", bank, "--prompt-class",
         kSelfRated, "--out-dir", dir.path().string(), "--jobs", "3"});
  }

  CliResult run(const std::vector<std::string>& args) const {
    auto r = run_cli(args);
    EXPECT_EQ(r.code, 0) << args.front() << ": " << r.err;
    return r;
  }
};

}  // namespace

TEST(Cli, HelpAndUsageErrors) {
  const auto help = run_cli({"--help"});
  EXPECT_EQ(help.code, 0);
  for (const char* sub : {"generate", "grade", "analyze", "export-qrels", "leaderboard", "cover", "correlate",
                          "kappa", "serve"}) {
    EXPECT_NE(help.out.find(sub), std::string::npos) << sub;
  }
  EXPECT_EQ(run_cli({"grade", "--help"}).code, 0);
  EXPECT_EQ(run_cli({}).code, 1);
  EXPECT_EQ(run_cli({"frobnicate"}).code, 1);
  const auto missing = run_cli({"grade", "--prompt-class", kSelfRated});
  EXPECT_EQ(missing.code, 1);
  EXPECT_NE(missing.err.find("--responses is required"), std::string::npos) << missing.err;
  EXPECT_EQ(run_cli({"cover", "--responses", "/nonexistent/x.jsonl", "--testbank", "/nonexistent/y"}).code, 1);
  EXPECT_EQ(run_cli({"export-qrels", "--responses", "x", "--min-answers", "0"}).code, 1);
  EXPECT_EQ(run_cli({"generate", "--queries", "q.json", "--withhold", "1.5"}).code, 1);
}

TEST(Cli, RuntimeFailureExitsTwo) {
  TempDir dir;
  spit(dir / "queries.json", R"({"q": "when did rock n roll begin?"})");
  // Nothing listens on port 1.
  const auto r = run_cli({"generate", "--queries", (dir / "queries.json").string(), "--backend", "remote",
                          "--endpoint", "http://127.0.0.1:1/v1/chat/completions", "--model", "m",
                          "--max-retries", "0", "--out-dir", dir.path().string()});
  EXPECT_EQ(r.code, 2) << r.err;
}

TEST(Cli, EndToEndMatchesGoldens) {
  Pipeline p;
  const auto& dir = p.dir;
  const std::string qrels_name = "rubric-rubric-qrels-" + kSelfRated + "-minrating-4.solo.qrels";
  p.run({"export-qrels", "--responses", p.graded, "--prompt-class", kSelfRated, "--out-dir", dir.path().string()});
  ASSERT_TRUE(fs::exists(dir / qrels_name));
  EXPECT_EQ(compare_golden("toy.qrels", slurp(dir / qrels_name)), "");

  const auto board = p.run({"leaderboard", "--responses", p.graded, "--prompt-class", kSelfRated, "--qrels",
                            (dir / qrels_name).string(), "--reference", (toy_dir() / "reference.json").string(),
                            "--out-dir", dir.path().string()});
  EXPECT_EQ(compare_golden("toy-leaderboard-mrr.tsv", board.out), "");

  const auto cover = p.run({"cover", "--responses", p.graded, "--testbank", p.bank, "--prompt-class", kSelfRated,
                            "--k", "2", "--reference", (toy_dir() / "reference.json").string(), "--out-dir",
                            dir.path().string()});
  EXPECT_EQ(compare_golden("toy-cover-k2.tsv", cover.out), "");
  const auto solo = dir / ("rubric-rubric-cover-leaderboard-" + kSelfRated + "-minrating-4.solo.tsv");
  ASSERT_TRUE(fs::exists(solo));
  EXPECT_EQ(slurp(solo).find("spearman"), std::string::npos);
  EXPECT_TRUE(fs::exists(dir / ("rubric-rubric-cover-leaderboard-" + kSelfRated + "-minlevel-4.correlation.tsv")));

  const auto corr = p.run({"correlate", "--leaderboard", solo.string(), "--reference",
                           (toy_dir() / "reference.json").string(), "--out-dir", dir.path().string()});
  EXPECT_EQ(corr.out, cover.out);
}

TEST(Cli, GradingIsIndependentOfWorkerCount) {
  Pipeline p;
  const auto one = p.dir / "one.jsonl";
  p.run({"grade", "--responses", (toy_dir() / "responses.jsonl").string(), "--testbank", p.bank,
         "--prompt-class", kSelfRated, "--output", one.string(), "--jobs", "1"});
  EXPECT_EQ(slurp(one), slurp(p.graded));
  const auto manifest = Json::parse(slurp(one.string() + ".manifest.json"));
  EXPECT_TRUE(manifest.contains("failures"));
}

TEST(Cli, GradeRefusesToOverwriteInput) {
  Pipeline p;
  const auto r = run_cli({"grade", "--responses", p.graded, "--testbank", p.bank, "--prompt-class", kSelfRated,
                          "--output", p.graded});
  EXPECT_EQ(r.code, 1);
}

TEST(Cli, AnalyzeWritesFourReports) {
  Pipeline p;
  p.run({"analyze", "--responses", p.graded, "--testbank", p.bank, "--prompt-class", kSelfRated, "--out-dir",
         p.dir.path().string()});
  for (const char* stem : {"verify-grading", "bad-question", "uncovered-passages", "grid-display"}) {
    EXPECT_TRUE(fs::exists(p.dir / (std::string("rubric-") + stem + ".txt"))) << stem;
    EXPECT_NO_THROW(Json::parse(slurp(p.dir / (std::string("rubric-") + stem + ".json")))) << stem;
  }
}

TEST(Cli, KappaOnReferenceResponses) {
  TempDir dir;
  const auto& a = dl20_question_tables()[1];
  ASSERT_EQ(a.min_answers, 2);
  const auto path = dir / "dl20.jsonl.gz";
  write_response_file(table_responses(a, kSelfRated), path, true);
  const auto r = run_cli({"kappa", "--responses", path.string(), "--prompt-class", kSelfRated, "--min-answers",
                          "2", "--min-relevant-judgment", "2", "--out-dir", dir.path().string()});
  ASSERT_EQ(r.code, 0) << r.err;
  const auto strict = r.out.find("STRICT min_answers=2");
  ASSERT_NE(strict, std::string::npos) << r.out;
  const std::string row = "4+5\t998\t2377\t3375\t";
  const auto at = r.out.find(row, strict);
  ASSERT_NE(at, std::string::npos) << r.out;
  EXPECT_NEAR(std::stod(r.out.substr(at + row.size())), 0.25, kKappaTolerance);
  const auto latex = slurp(dir / ("rubric-rubric-inter-annotator-" + kSelfRated + ".tex"));
  EXPECT_NE(latex.find("\\fbox{998}&2377&3375&0.25"), std::string::npos);
}

TEST(Cli, FlagsOverrideEnvironmentWhichOverridesConfig) {
  Pipeline p;
  const auto config = p.dir / "config.json";
  spit(config, R"({"min_rating": 5, "prefix": "fromconfig"})");
  const std::string out = p.dir.path().string();
  auto name = [&](const std::string& prefix, int rating) {
    return p.dir / (prefix + "-rubric-qrels-" + kSelfRated + "-minrating-" + std::to_string(rating) + ".solo.qrels");
  };

  p.run({"export-qrels", "--config", config.string(), "--responses", p.graded, "--prompt-class", kSelfRated,
         "--out-dir", out});
  EXPECT_TRUE(fs::exists(name("fromconfig", 5)));
  {
    ScopedEnv env("RUBRIC_MIN_RATING", "3");
    p.run({"export-qrels", "--config", config.string(), "--responses", p.graded, "--prompt-class", kSelfRated,
           "--out-dir", out});
    EXPECT_TRUE(fs::exists(name("fromconfig", 3)));
    p.run({"export-qrels", "--config", config.string(), "--responses", p.graded, "--prompt-class", kSelfRated,
           "--min-rating", "2", "--prefix", "flag", "--out-dir", out});
    EXPECT_TRUE(fs::exists(name("flag", 2)));
  }
  {
    ScopedEnv env("RUBRIC_CONFIG", config.string());
    p.run({"export-qrels", "--responses", p.graded, "--prompt-class", kSelfRated, "--out-dir", out, "--prefix",
           "viaenv"});
    EXPECT_TRUE(fs::exists(name("viaenv", 5)));
  }
  spit(p.dir / "bad.json", "[1]");
  EXPECT_EQ(run_cli({"export-qrels", "--config", (p.dir / "bad.json").string(), "--responses", p.graded}).code, 1);
}

TEST(Cli, WithholdSplitsTheGeneratedBank) {
  TempDir dir;
  const auto out = dir / "bank.jsonl.gz";
  const auto r = run_cli({"generate", "--queries", (toy_dir() / "queries.json").string(), "--output",
                          out.string(), "--withhold", "0.5", "--withhold-seed", "s"});
  ASSERT_EQ(r.code, 0) << r.err;
  const auto shared = load_test_bank(out);
  const auto withheld = load_test_bank(dir / "bank.withheld.jsonl.gz");
  std::size_t shared_n = 0;
  std::size_t withheld_n = 0;
  for (const auto& b : shared) shared_n += b.items.size();
  for (const auto& b : withheld) withheld_n += b.items.size();
  EXPECT_GT(withheld_n, 0u);
  EXPECT_GT(shared_n, 0u);

  TempDir full_dir;
  const auto full = full_dir / "bank.jsonl.gz";
  ASSERT_EQ(run_cli({"generate", "--queries", (toy_dir() / "queries.json").string(), "--output", full.string()}).code,
            0);
  std::size_t total = 0;
  for (const auto& b : load_test_bank(full)) total += b.items.size();
  EXPECT_EQ(shared_n + withheld_n, total);
}
