#include "rubric/service.hpp"

#include <httplib.h>

#include <atomic>
#include <map>
#include <mutex>
#include <shared_mutex>
#include <thread>

#include "rubric/agreement.hpp"
#include "rubric/core_model.hpp"
#include "rubric/error.hpp"
#include "rubric/grading.hpp"
#include "rubric/leaderboard.hpp"
#include "rubric/testbank.hpp"
#include "rubric/verification.hpp"

namespace rubric {

std::filesystem::path ServiceConfig::resolve(const std::filesystem::path& p) const {
  return p.is_absolute() ? p : workspace / p;
}

namespace {

/// Validation failure attributable to one request field.
class FieldError : public ValidationError {
 public:
  FieldError(const std::string& field, const std::string& what)
      : ValidationError(what), field_(field) {}
  const std::string& field() const noexcept { return field_; }

 private:
  std::string field_;
};

struct Workspace {
  std::map<std::string, std::string> queries;
  std::vector<QueryTestBank> banks;
  std::vector<QueryResponseSet> responses;
  std::optional<std::map<std::string, int>> reference;
};

enum class JobState { queued, running, done, failed };

std::string to_string(JobState s) {
  switch (s) {
    case JobState::queued: return "queued";
    case JobState::running: return "running";
    case JobState::done: return "done";
    case JobState::failed: return "failed";
  }
  return "queued";
}

struct Job {
  std::string id;
  JobState state = JobState::queued;
  std::string mode;
  std::string prompt_class;
  std::string backend;
  std::string error;
  Json failures = Json::array();
  std::size_t pairs_total = 0;
};

Json job_json(const Job& j) {
  return {{"job_id", j.id},         {"state", to_string(j.state)}, {"mode", j.mode},
          {"prompt_class", j.prompt_class}, {"backend", j.backend}, {"error", j.error},
          {"failures", j.failures}, {"pairs_total", j.pairs_total}};
}

void send_json(httplib::Response& res, const Json& body, int status = 200) {
  res.status = status;
  res.set_content(body.dump(), "application/json");
}

void send_error(httplib::Response& res, int status, const std::string& kind,
                const std::string& message, const std::string& field = {}) {
  Json err = {{"kind", kind}, {"message", message}};
  if (!field.empty()) err["field"] = field;
  send_json(res, {{"error", std::move(err)}}, status);
}

int int_param(const httplib::Request& req, const char* name, int fallback) {
  if (!req.has_param(name)) return fallback;
  const std::string v = req.get_param_value(name);
  try {
    std::size_t used = 0;
    const int n = std::stoi(v, &used);
    if (used != v.size()) throw std::invalid_argument(v);
    return n;
  } catch (const std::exception&) {
    throw FieldError(name, std::string("parameter '") + name + "' must be an integer");
  }
}

Json parse_body(const httplib::Request& req) {
  if (req.body.empty()) return Json::object();
  Json j = Json::parse(req.body, nullptr, false);
  if (j.is_discarded() || !j.is_object()) throw FieldError("body", "request body must be a JSON object");
  return j;
}

std::string string_member(const Json& body, const char* key, bool required) {
  if (!body.contains(key)) {
    if (required) throw FieldError(key, std::string("field '") + key + "' is required");
    return {};
  }
  if (!body[key].is_string()) throw FieldError(key, std::string("field '") + key + "' must be a string");
  return body[key].get<std::string>();
}

}  // namespace

struct Service::Impl {
  ServiceConfig config;
  httplib::Server server;
  std::thread server_thread;
  int port = 0;

  std::shared_mutex state_mutex;  // guards workspace files
  std::mutex jobs_mutex;
  std::map<std::string, Job> jobs;
  std::atomic<bool> regrade_running{false};
  std::jthread regrade_thread;
  std::size_t next_job = 0;

  explicit Impl(ServiceConfig c) : config(std::move(c)) {}

  GradeFilter filter() const {
    GradeFilter f;
    f.prompt_class = config.prompt_class;
    return f;
  }

  Workspace load() const {
    Workspace w;
    w.queries = read_queries(config.resolve(config.queries_file));
    const auto bank_path = config.resolve(config.testbank_file);
    if (std::filesystem::exists(bank_path)) w.banks = load_test_bank(bank_path);
    w.responses = read_response_file(config.resolve(config.responses_file));
    const auto ref = config.resolve(config.reference_file);
    if (std::filesystem::exists(ref)) w.reference = read_reference_ranks(ref);
    return w;
  }

  Workspace read_locked() {
    std::shared_lock lock(state_mutex);
    return load();
  }

  template <typename F>
  auto handler(F&& f) {
    return [this, f = std::forward<F>(f)](const httplib::Request& req, httplib::Response& res) {
      try {
        f(req, res);
      } catch (const FieldError& e) {
        send_error(res, 422, "validation", e.what(), e.field());
      } catch (const MissingFieldError& e) {
        send_error(res, 422, "validation", e.what(), e.field());
      } catch (const NotFoundError& e) {
        send_error(res, 404, "not_found", e.what());
      } catch (const ConflictError& e) {
        send_error(res, 409, "conflict", e.what());
      } catch (const ValidationError& e) {
        send_error(res, 422, "validation", e.what());
      } catch (const std::exception& e) {
        send_error(res, 500, "internal", e.what());
      }
    };
  }

  static const QueryResponseSet* find_record(const Workspace& w, const std::string& qid) {
    for (const auto& r : w.responses) {
      if (r.query_id == qid) return &r;
    }
    return nullptr;
  }

  static std::vector<QueryResponseSet> only_query(const Workspace& w, const std::string& qid) {
    std::vector<QueryResponseSet> out;
    for (const auto& r : w.responses) {
      if (r.query_id == qid) out.push_back(r);
    }
    return out;
  }

  void require_query(const Workspace& w, const std::string& qid) const {
    if (!w.queries.count(qid) && !find_record(w, qid) && !find_bank(w.banks, qid)) {
      throw NotFoundError("unknown query '" + qid + "'");
    }
  }

  Json leaderboards(const Workspace& w) const {
    const auto f = filter();
    const auto cover = build_leaderboard(
        cover_scores(w.responses, w.banks, f, config.k, config.min_rating), "rubric-cover",
        w.reference);
    Json out = {{"cover", to_json(cover)}};
    const auto qrels = qrels_scores(w.responses, &w.banks, f, LabelScheme::max_grade,
                                    config.min_rating, config.min_answers, RankMetric::mrr, config.k);
    out["qrels"] = qrels.empty() ? Json(nullptr) : to_json(build_leaderboard(qrels, "mrr", w.reference));
    return out;
  }

  void edit_bank(const std::string& qid, const std::function<BankEdit(const QueryTestBank&)>& make,
                 const std::function<Json(const QueryTestBank&)>& reply, httplib::Response& res,
                 int status, std::optional<EntryKind> new_bank_kind = std::nullopt) {
    std::unique_lock lock(state_mutex);
    const auto bank_path = config.resolve(config.testbank_file);
    std::vector<QueryTestBank> banks;
    if (std::filesystem::exists(bank_path)) banks = load_test_bank(bank_path);
    auto it = std::find_if(banks.begin(), banks.end(),
                           [&](const QueryTestBank& b) { return b.query_id == qid; });
    if (it == banks.end()) {
      const auto queries = read_queries(config.resolve(config.queries_file));
      if (!new_bank_kind || !queries.count(qid)) {
        throw NotFoundError("no test bank for query '" + qid + "'");
      }
      QueryTestBank fresh;
      fresh.query_id = qid;
      fresh.query_text = queries.at(qid);
      fresh.prompt_target = *new_bank_kind;
      banks.push_back(std::move(fresh));
      it = banks.end() - 1;
    }
    *it = apply_edit(*it, make(*it));
    save_test_bank(banks, bank_path);
    send_json(res, reply(*it), status);
  }

  void start_regrade(const Json& body, httplib::Response& res) {
    const std::string prompt_class =
        body.contains("prompt_class") ? string_member(body, "prompt_class", true) : config.prompt_class;
    const auto tmpl = find_builtin_template(prompt_class);
    if (!tmpl) throw FieldError("prompt_class", "unknown prompt class '" + prompt_class + "'");
    const std::string backend =
        body.contains("backend") ? string_member(body, "backend", true) : config.backend;
    if (backend != "mock" && backend != "remote") {
      throw FieldError("backend", "backend must be 'mock' or 'remote'");
    }
    GradingMode mode = tmpl->is_self_rated ? GradingMode::self_rated
                       : tmpl->target == PromptTarget::direct ? GradingMode::direct
                                                              : GradingMode::extract_informational;
    if (body.contains("mode")) {
      try {
        mode = grading_mode_from_string(string_member(body, "mode", true));
      } catch (const FieldError&) {
        throw;
      } catch (const ValidationError& e) {
        throw FieldError("mode", e.what());
      }
    }
    const bool check_answer_key = body.value("check_answer_key", false);
    const bool check_unanswerable = body.value("check_unanswerable", false);

    bool expected = false;
    if (!regrade_running.compare_exchange_strong(expected, true)) {
      throw ConflictError("a regrade job is already running for this workspace");
    }
    Job job;
    {
      std::lock_guard lock(jobs_mutex);
      job.id = "job-" + std::to_string(++next_job);
      job.mode = to_string(mode);
      job.prompt_class = prompt_class;
      job.backend = backend;
      jobs[job.id] = job;
    }
    if (regrade_thread.joinable()) regrade_thread.join();
    regrade_thread = std::jthread([this, id = job.id, t = *tmpl, mode, backend, check_answer_key,
                                   check_unanswerable] {
      run_regrade(id, t, mode, backend, check_answer_key, check_unanswerable);
    });
    send_json(res, job_json(job), 202);
  }

  void set_job(const std::string& id, const std::function<void(Job&)>& f) {
    std::lock_guard lock(jobs_mutex);
    f(jobs[id]);
  }

  void run_regrade(const std::string& id, const PromptTemplate& tmpl, GradingMode mode,
                   const std::string& backend_kind, bool check_answer_key, bool check_unanswerable) {
    set_job(id, [](Job& j) { j.state = JobState::running; });
    try {
      const Workspace w = read_locked();
      std::unique_ptr<Backend> backend;
      int budget = kDefaultPromptBudget;
      if (backend_kind == "remote") {
        backend = std::make_unique<RemoteBackend>(config.backend_config);
        budget = std::min(budget, config.backend_config.max_input_tokens);
      } else {
        backend = std::make_unique<MockBackend>(std::vector<PromptTemplate>{tmpl});
      }
      GradingJob job;
      job.prompt = tmpl;
      job.backend = backend.get();
      job.mode = mode;
      job.check_answer_key = check_answer_key;
      job.check_unanswerable = check_unanswerable;
      job.queries = w.queries;
      job.prompt_budget = budget;
      job.jobs = config.jobs;
      job.banks = w.banks;
      // Queries without a bank stay as they are unless grading is direct.
      std::vector<std::size_t> graded_index;
      for (std::size_t i = 0; i < w.responses.size(); ++i) {
        if (mode == GradingMode::direct || find_bank(w.banks, w.responses[i].query_id)) {
          job.responses.push_back(w.responses[i]);
          graded_index.push_back(i);
        }
      }
      auto result = grade_job(job);
      auto merged = w.responses;
      for (std::size_t i = 0; i < graded_index.size(); ++i) {
        merged[graded_index[i]] = std::move(result.responses[i]);
      }
      {
        std::unique_lock lock(state_mutex);
        const auto path = config.resolve(config.responses_file);
        write_response_file(merged, path, io_wants_gzip(path));
      }
      Json failures = grading_manifest(job, result.report)["failures"];
      // Cleared first: a client that sees "done" may start the next job.
      regrade_running.store(false);
      set_job(id, [&](Job& j) {
        j.state = JobState::done;
        j.failures = std::move(failures);
        j.pairs_total = result.report.pairs_total;
      });
    } catch (const std::exception& e) {
      regrade_running.store(false);
      set_job(id, [&](Job& j) {
        j.state = JobState::failed;
        j.error = e.what();
      });
    }
  }

  static bool io_wants_gzip(const std::filesystem::path& p) { return p.extension() == ".gz"; }

  void routes() {
    server.Get("/api/queries", handler([this](const httplib::Request&, httplib::Response& res) {
      const auto w = read_locked();
      std::map<std::string, Json> rows;
      for (const auto& [qid, text] : w.queries) rows[qid] = {{"query_id", qid}, {"query_text", text}};
      for (const auto& r : w.responses) {
        auto& row = rows[r.query_id];
        row["query_id"] = r.query_id;
        row["passages"] = row.value("passages", 0) + static_cast<int>(r.passages.size());
      }
      Json out = Json::array();
      for (auto& [qid, row] : rows) {
        if (!row.contains("query_text")) row["query_text"] = "";
        if (!row.contains("passages")) row["passages"] = 0;
        const auto* bank = find_bank(w.banks, qid);
        row["entries"] = bank ? bank->items.size() : 0;
        out.push_back(std::move(row));
      }
      send_json(res, out);
    }));

    server.Get(R"(/api/queries/([^/]+)/grid)",
               handler([this](const httplib::Request& req, httplib::Response& res) {
                 const auto w = read_locked();
                 const std::string qid = req.matches[1];
                 require_query(w, qid);
                 const auto grids = report_grid(only_query(w, qid), w.banks, filter());
                 if (grids.empty()) {
                   send_json(res, to_json(QueryGrid{qid, {}, {}, {}}));
                 } else {
                   send_json(res, to_json(grids.front()));
                 }
               }));

    server.Get("/api/reports/verify-grading",
               handler([this](const httplib::Request& req, httplib::Response& res) {
                 const auto w = read_locked();
                 std::optional<GradeFilter> answers;
                 if (req.has_param("answer_prompt_class")) {
                   answers = GradeFilter{};
                   answers->prompt_class = req.get_param_value("answer_prompt_class");
                 }
                 const auto responses =
                     req.has_param("query") ? only_query(w, req.get_param_value("query")) : w.responses;
                 send_json(res, to_json(report_verify_grading(responses, w.banks, filter(), answers)));
               }));

    server.Get("/api/reports/uncovered",
               handler([this](const httplib::Request& req, httplib::Response& res) {
                 const auto w = read_locked();
                 send_json(res, to_json(report_uncovered(
                                    w.responses, w.banks, filter(),
                                    int_param(req, "min_judgment", config.min_relevant_judgment),
                                    int_param(req, "min_rating", config.min_rating))));
               }));

    server.Get("/api/reports/spurious",
               handler([this](const httplib::Request& req, httplib::Response& res) {
                 const auto w = read_locked();
                 send_json(res, to_json(report_spurious(
                                    w.responses, w.banks, filter(),
                                    int_param(req, "max_judgment", config.spurious_max_judgment),
                                    int_param(req, "min_rating", config.min_rating))));
               }));

    server.Get("/api/leaderboard", handler([this](const httplib::Request&, httplib::Response& res) {
      send_json(res, leaderboards(read_locked()));
    }));

    server.Get("/api/kappa", handler([this](const httplib::Request& req, httplib::Response& res) {
      const auto w = read_locked();
      const int m = int_param(req, "min_answers", config.min_answers);
      const int rel = int_param(req, "min_relevant_judgment", config.min_relevant_judgment);
      if (m < 1) throw FieldError("min_answers", "min_answers must be at least 1");
      Json out = Json::array();
      for (const auto& t : agreement_tables(w.responses, filter(), m, rel, &w.banks)) {
        out.push_back(to_json(t));
      }
      send_json(res, out);
    }));

    server.Get(R"(/api/testbank/([^/]+))",
               handler([this](const httplib::Request& req, httplib::Response& res) {
                 const auto w = read_locked();
                 const std::string qid = req.matches[1];
                 const auto* bank = find_bank(w.banks, qid);
                 if (!bank) throw NotFoundError("no test bank for query '" + qid + "'");
                 send_json(res, to_json(*bank));
               }));

    server.Post(R"(/api/testbank/([^/]+)/entries)",
                handler([this](const httplib::Request& req, httplib::Response& res) {
                  const std::string qid = req.matches[1];
                  const Json body = parse_body(req);
                  const std::string text = string_member(body, "text", true);
                  if (text.empty()) throw FieldError("text", "entry text must not be empty");
                  std::optional<EntryKind> kind;
                  if (body.contains("kind")) {
                    try {
                      kind = entry_kind_from_string(string_member(body, "kind", true));
                    } catch (const FieldError&) {
                      throw;
                    } catch (const ValidationError& e) {
                      throw FieldError("kind", e.what());
                    }
                  }
                  std::vector<std::string> gold;
                  if (body.contains("gold_answers")) {
                    if (!body["gold_answers"].is_array()) {
                      throw FieldError("gold_answers", "gold_answers must be a list of strings");
                    }
                    for (const auto& g : body["gold_answers"]) {
                      if (!g.is_string()) throw FieldError("gold_answers", "gold_answers must be a list of strings");
                      gold.push_back(g.get<std::string>());
                    }
                  }
                  const std::string new_id = entry_id_for(qid, text);
                  edit_bank(
                      qid,
                      [&](const QueryTestBank& b) -> BankEdit {
                        return AddEntry{text, kind.value_or(b.prompt_target), gold};
                      },
                      [&](const QueryTestBank& b) { return entry_json(b, new_id); }, res, 201,
                      kind.value_or(EntryKind::question));
                }));

    server.Put(R"(/api/testbank/([^/]+)/entries/([0-9a-fA-F]+))",
               handler([this](const httplib::Request& req, httplib::Response& res) {
                 const std::string qid = req.matches[1];
                 const std::string entry_id = qid + "/" + std::string(req.matches[2]);
                 const Json body = parse_body(req);
                 const std::string text = string_member(body, "text", true);
                 if (text.empty()) throw FieldError("text", "entry text must not be empty");
                 const std::string new_id = entry_id_for(qid, text);
                 edit_bank(
                     qid, [&](const QueryTestBank&) -> BankEdit { return ReplaceEntry{entry_id, text}; },
                     [&](const QueryTestBank& b) { return entry_json(b, new_id); }, res, 200);
               }));

    server.Delete(R"(/api/testbank/([^/]+)/entries/([0-9a-fA-F]+))",
                  handler([this](const httplib::Request& req, httplib::Response& res) {
                    const std::string qid = req.matches[1];
                    const std::string entry_id = qid + "/" + std::string(req.matches[2]);
                    edit_bank(
                        qid, [&](const QueryTestBank&) -> BankEdit { return RemoveEntry{entry_id}; },
                        [&](const QueryTestBank&) { return Json{{"deleted", entry_id}}; }, res, 200);
                  }));

    server.Post("/api/regrade", handler([this](const httplib::Request& req, httplib::Response& res) {
      start_regrade(parse_body(req), res);
    }));

    server.Get(R"(/api/jobs/([^/]+))", handler([this](const httplib::Request& req, httplib::Response& res) {
      std::lock_guard lock(jobs_mutex);
      const auto it = jobs.find(req.matches[1]);
      if (it == jobs.end()) throw NotFoundError("unknown job '" + std::string(req.matches[1]) + "'");
      send_json(res, job_json(it->second));
    }));

    if (config.static_dir && std::filesystem::is_directory(*config.static_dir)) {
      server.set_mount_point("/", config.static_dir->string());
    }
  }

  static Json entry_json(const QueryTestBank& bank, const std::string& entry_id) {
    const std::string key = bank.prompt_target == EntryKind::question ? "question_id" : "nugget_id";
    const Json j = to_json(bank);
    for (const auto& item : j["items"]) {
      if (item.contains(key) && item[key].get<std::string>() == entry_id) return item;
    }
    return Json::object();
  }
};

Service::Service(ServiceConfig config) : impl_(std::make_unique<Impl>(std::move(config))) {
  impl_->routes();
}

Service::~Service() { stop(); }

int Service::start() {
  auto& s = impl_->server;
  if (impl_->config.port == 0) {
    impl_->port = s.bind_to_any_port(impl_->config.host);
  } else if (s.bind_to_port(impl_->config.host, impl_->config.port)) {
    impl_->port = impl_->config.port;
  } else {
    impl_->port = -1;
  }
  if (impl_->port < 0) {
    throw IoError("cannot bind " + impl_->config.host + ":" + std::to_string(impl_->config.port));
  }
  impl_->server_thread = std::thread([&s] { s.listen_after_bind(); });
  s.wait_until_ready();
  return impl_->port;
}

void Service::wait() {
  if (impl_->server_thread.joinable()) impl_->server_thread.join();
}

void Service::stop() {
  if (!impl_) return;
  impl_->server.stop();
  if (impl_->server_thread.joinable()) impl_->server_thread.join();
  if (impl_->regrade_thread.joinable()) impl_->regrade_thread.join();
}

}  // namespace rubric
