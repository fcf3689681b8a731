#include <gtest/gtest.h>

#include <chrono>
#include <thread>

#include <httplib.h>

#include "rubric/evaluation.hpp"
#include "rubric/grading.hpp"
#include "rubric/leaderboard.hpp"
#include "rubric/service.hpp"
#include "rubric/verification.hpp"
#include "support.hpp"

using namespace rubric;
using namespace testing_support;

namespace {

std::vector<QueryResponseSet> grade_toy(const fs::path& dir) {
  const auto tmpl = *find_builtin_template(kSelfRated);
  MockBackend backend({tmpl});
  GradingJob job;
  job.prompt = tmpl;
  job.backend = &backend;
  job.mode = GradingMode::self_rated;
  job.responses = read_response_file(dir / "responses.jsonl");
  job.banks = load_test_bank(dir / "testbank.jsonl");
  job.queries = read_queries(dir / "queries.json");
  auto result = grade_job(job);
  write_response_file(result.responses, dir / "responses.jsonl", false);
  return result.responses;
}

class ServiceTest : public ::testing::Test {
 protected:
  void SetUp() override {
    for (const auto& f : fs::directory_iterator(toy_dir())) {
      fs::copy_file(f.path(), dir / f.path().filename().string());
    }
    grade_toy(dir.path());
    ServiceConfig config;
    config.workspace = dir.path();
    config.port = 0;
    config.k = 2;
    service = std::make_unique<Service>(config);
    port = service->start();
    client = std::make_unique<httplib::Client>("127.0.0.1", port);
    client->set_read_timeout(30, 0);
  }

  void TearDown() override {
    if (service) service->stop();
  }

  Json get(const std::string& path, int expected = 200) {
    auto res = client->Get(path);
    EXPECT_TRUE(res) << path;
    if (!res) return Json();
    EXPECT_EQ(res->status, expected) << path << ": " << res->body;
    return Json::parse(res->body);
  }

  std::map<std::string, std::string> snapshot() const {
    std::map<std::string, std::string> out;
    for (const auto& f : fs::directory_iterator(dir.path())) out[f.path().filename().string()] = slurp(f.path());
    return out;
  }

  Json wait_for_job(const std::string& id) {
    const std::vector<std::string> order = {"queued", "running", "done"};
    std::size_t seen = 0;
    const auto deadline = std::chrono::steady_clock::now() + std::chrono::seconds(120);
    while (std::chrono::steady_clock::now() < deadline) {
      const auto job = get("/api/jobs/" + id);
      const std::string state = job["state"];
      if (state == "failed") return job;
      const auto at = std::find(order.begin(), order.end(), state);
      EXPECT_NE(at, order.end()) << state;
      const auto index = static_cast<std::size_t>(at - order.begin());
      EXPECT_GE(index, seen) << "state went backwards to " << state;
      seen = index;
      if (state == "done") return job;
      std::this_thread::sleep_for(std::chrono::milliseconds(20));
    }
    ADD_FAILURE() << "job " << id << " did not finish";
    return Json();
  }

  TempDir dir;
  std::unique_ptr<Service> service;
  int port = 0;
  std::unique_ptr<httplib::Client> client;
};

std::string hex_of(const std::string& entry_id) { return entry_id.substr(entry_id.find('/') + 1); }

}  // namespace

TEST_F(ServiceTest, ListsQueries) {
  const auto q = get("/api/queries");
  ASSERT_EQ(q.size(), 3u);
  EXPECT_EQ(q[0]["query_id"], "1108651");
  EXPECT_EQ(q[0]["passages"], 5);
  EXPECT_EQ(q[0]["entries"], 3);
  EXPECT_EQ(q[2]["query_text"], "when did rock n roll begin?");
}

TEST_F(ServiceTest, GridHasOneCellPerEntryPerRow) {
  const auto g = get("/api/queries/940547/grid");
  EXPECT_EQ(g["query_id"], "940547");
  EXPECT_EQ(g["entry_ids"].size(), 4u);
  EXPECT_EQ(g["entry_texts"].size(), 4u);
  ASSERT_EQ(g["rows"].size(), 6u);
  for (const auto& row : g["rows"]) {
    EXPECT_EQ(row["cells"].size(), 4u);
    for (const auto& cell : row["cells"]) EXPECT_TRUE(cell["rating"].is_number());
  }
  const auto err = get("/api/queries/nope/grid", 404);
  EXPECT_EQ(err["error"]["kind"], "not_found");
}

TEST_F(ServiceTest, ReportsMatchLibrary) {
  const auto responses = read_response_file(dir / "responses.jsonl");
  const auto banks = load_test_bank(dir / "testbank.jsonl");
  GradeFilter f;
  f.prompt_class = kSelfRated;
  EXPECT_EQ(get("/api/reports/uncovered"), to_json(report_uncovered(responses, banks, f, 1, 4)));
  EXPECT_EQ(get("/api/reports/uncovered?min_judgment=3&min_rating=5"),
            to_json(report_uncovered(responses, banks, f, 3, 5)));
  EXPECT_EQ(get("/api/reports/spurious"), to_json(report_spurious(responses, banks, f, 0, 4)));
  std::vector<QueryResponseSet> rock;
  for (const auto& r : responses) {
    if (r.query_id == "940547") rock.push_back(r);
  }
  EXPECT_EQ(get("/api/reports/verify-grading?query=940547"), to_json(report_verify_grading(rock, banks, f)));
  const auto vg = get("/api/reports/verify-grading");
  EXPECT_FALSE(vg.empty());
}

TEST_F(ServiceTest, KappaEndpoint) {
  const auto tables = get("/api/kappa?min_answers=1&min_relevant_judgment=2");
  ASSERT_EQ(tables.size(), 4u);
  for (const auto& t : tables) EXPECT_EQ(t["total"], 16);
  EXPECT_EQ(get("/api/kappa?min_answers=0", 422)["error"]["field"], "min_answers");
}

TEST_F(ServiceTest, EmptyTextIsRejectedWithoutTouchingFiles) {
  const auto before = snapshot();
  const auto bank = get("/api/testbank/940547");
  const std::string hex = hex_of(bank["items"][0]["question_id"]);

  auto post = client->Post("/api/testbank/940547/entries", R"({"text": ""})", "application/json");
  ASSERT_TRUE(post);
  EXPECT_EQ(post->status, 422);
  EXPECT_EQ(Json::parse(post->body)["error"]["field"], "text");

  auto put = client->Put("/api/testbank/940547/entries/" + hex, R"({"text": ""})", "application/json");
  ASSERT_TRUE(put);
  EXPECT_EQ(put->status, 422);
  EXPECT_EQ(Json::parse(put->body)["error"]["field"], "text");

  auto bad = client->Post("/api/testbank/940547/entries", "{not json", "application/json");
  ASSERT_TRUE(bad);
  EXPECT_EQ(bad->status, 422);
  EXPECT_EQ(snapshot(), before);
}

TEST_F(ServiceTest, EditsPersistToTestBank) {
  auto post = client->Post("/api/testbank/940547/entries",
                           R"({"text": "Who recorded Rocket 88?", "gold_answers": ["Jackie Brenston"]})",
                           "application/json");
  ASSERT_TRUE(post);
  ASSERT_EQ(post->status, 201) << post->body;
  const auto added = Json::parse(post->body);
  EXPECT_EQ(added["question_text"], "Who recorded Rocket 88?");
  EXPECT_EQ(added["question_id"], entry_id_for("940547", "Who recorded Rocket 88?"));

  auto dup = client->Post("/api/testbank/940547/entries", R"({"text": "Who recorded Rocket 88?"})",
                          "application/json");
  ASSERT_TRUE(dup);
  EXPECT_EQ(dup->status, 409);

  const std::string old_hex = hex_of(added["question_id"]);
  auto put = client->Put("/api/testbank/940547/entries/" + old_hex, R"({"text": "Who sang Rocket 88?"})",
                         "application/json");
  ASSERT_TRUE(put);
  ASSERT_EQ(put->status, 200) << put->body;
  EXPECT_EQ(Json::parse(put->body)["question_id"], entry_id_for("940547", "Who sang Rocket 88?"));

  auto missing = client->Delete("/api/testbank/940547/entries/" + old_hex);
  ASSERT_TRUE(missing);
  EXPECT_EQ(missing->status, 404);

  const auto banks = load_test_bank(dir / "testbank.jsonl");
  const auto* bank = find_bank(banks, "940547");
  ASSERT_NE(bank, nullptr);
  EXPECT_EQ(bank->items.size(), 5u);
  EXPECT_EQ(bank->items.back().text, "Who sang Rocket 88?");
}

TEST_F(ServiceTest, DeleteRegradeAndLeaderboard) {
  const auto bank = get("/api/testbank/940547");
  const std::string removed = bank["items"][0]["question_id"];
  auto del = client->Delete("/api/testbank/940547/entries/" + hex_of(removed));
  ASSERT_TRUE(del);
  ASSERT_EQ(del->status, 200) << del->body;
  EXPECT_EQ(Json::parse(del->body)["deleted"], removed);
  EXPECT_EQ(get("/api/queries/940547/grid")["entry_ids"].size(), 3u);

  auto start = client->Post("/api/regrade", "{}", "application/json");
  ASSERT_TRUE(start);
  ASSERT_EQ(start->status, 202) << start->body;
  const auto job = Json::parse(start->body);
  EXPECT_EQ(job["mode"], "self_rated");
  EXPECT_EQ(job["prompt_class"], kSelfRated);
  const auto done = wait_for_job(job["job_id"]);
  ASSERT_EQ(done["state"], "done") << done.dump();
  EXPECT_EQ(done["pairs_total"], 48);

  // Library oracle over the same files.
  const auto responses = read_response_file(dir / "responses.jsonl");
  const auto banks = load_test_bank(dir / "testbank.jsonl");
  for (const auto& r : responses) {
    for (const auto& p : r.passages) {
      ASSERT_FALSE(p.exam_grades.empty());
      for (const auto& s : p.exam_grades.back().self_ratings) EXPECT_NE(s.entry_id, removed);
    }
  }
  GradeFilter f;
  f.prompt_class = kSelfRated;
  const auto expected = build_leaderboard(cover_scores(responses, banks, f, 2, 4), "rubric-cover",
                                          read_reference_ranks(dir / "reference.json"));
  const auto board = get("/api/leaderboard");
  EXPECT_EQ(board["cover"], to_json(expected));
  EXPECT_TRUE(board["qrels"].is_object());
}

TEST_F(ServiceTest, ConcurrentRegradeConflicts) {
  // Enough passages to keep the first job busy while the second request lands.
  auto responses = read_response_file(dir / "responses.jsonl");
  for (auto& r : responses) {
    const auto base = r.passages;
    for (int copy = 0; copy < 300; ++copy) {
      for (auto p : base) {
        p.paragraph_id += "-" + std::to_string(copy);
        r.passages.push_back(p);
      }
    }
  }
  write_response_file(responses, dir / "responses.jsonl", false);

  auto first = client->Post("/api/regrade", "{}", "application/json");
  ASSERT_TRUE(first);
  ASSERT_EQ(first->status, 202);
  auto second = client->Post("/api/regrade", "{}", "application/json");
  ASSERT_TRUE(second);
  EXPECT_EQ(second->status, 409);
  EXPECT_EQ(Json::parse(second->body)["error"]["kind"], "conflict");
  EXPECT_EQ(wait_for_job(Json::parse(first->body)["job_id"])["state"], "done");

  auto third = client->Post("/api/regrade", "{}", "application/json");
  ASSERT_TRUE(third);
  EXPECT_EQ(third->status, 202);
  wait_for_job(Json::parse(third->body)["job_id"]);
}

TEST_F(ServiceTest, RegradeValidation) {
  auto bad = client->Post("/api/regrade", R"({"prompt_class": "Nope"})", "application/json");
  ASSERT_TRUE(bad);
  EXPECT_EQ(bad->status, 422);
  EXPECT_EQ(Json::parse(bad->body)["error"]["field"], "prompt_class");
  auto backend = client->Post("/api/regrade", R"({"backend": "cloud"})", "application/json");
  ASSERT_TRUE(backend);
  EXPECT_EQ(Json::parse(backend->body)["error"]["field"], "backend");
  EXPECT_EQ(get("/api/jobs/job-99", 404)["error"]["kind"], "not_found");
}
