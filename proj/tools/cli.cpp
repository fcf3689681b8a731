#include "cli.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <cctype>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <iostream>
#include <memory>
#include <sstream>

#include "rubric/agreement.hpp"
#include "rubric/core_model.hpp"
#include "rubric/correlation.hpp"
#include "rubric/error.hpp"
#include "rubric/evaluation.hpp"
#include "rubric/grading.hpp"
#include "rubric/gzip_io.hpp"
#include "rubric/leaderboard.hpp"
#include "rubric/llm_backend.hpp"
#include "rubric/service.hpp"
#include "rubric/testbank.hpp"
#include "rubric/trec_formats.hpp"
#include "rubric/verification.hpp"

namespace rubric::cli {

namespace fs = std::filesystem;

namespace {

/// Bad invocation: unknown value, missing flag, missing input file.
class UsageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct Options {
  std::string config;
  std::string prefix = "rubric";
  std::string out_dir = ".";
  std::string output;

  std::string queries;
  std::string responses;
  std::string testbank;
  std::string qrels;
  std::vector<std::string> runs;
  std::string reference;
  std::string leaderboard;
  std::string workspace;
  std::string static_dir;

  std::string prompt_class;
  std::string answer_prompt_class;
  std::string prompt_file;
  std::string target = "question";
  std::string style = "dl";
  std::string mode;
  bool check_answer_key = false;
  bool check_unanswerable = false;
  bool no_levenshtein = false;
  bool no_llm_equivalence = false;
  bool llm_first = false;
  double max_failure_fraction = 0.1;
  double withhold = 0.0;
  std::string withhold_seed = "rubric";
  int prompt_budget = kDefaultPromptBudget;

  std::string backend = "mock";
  std::string model;
  std::string endpoint;
  std::string api_style = "chat";
  std::string api_key_env = "GRADER_API_KEY";
  int max_input_tokens = 512;
  int max_retries = 3;
  int timeout_ms = 60000;
  int concurrency = 1;

  int min_rating = 4;
  std::vector<int> min_answers = {1};
  int min_relevant_judgment = 1;
  int spurious_max_judgment = 0;
  int k = 20;
  int jobs = 1;
  std::string label_scheme = "max_grade";
  std::string metric = "mrr";
  bool nexam = false;

  std::string host = "127.0.0.1";
  int port = 8080;
};

std::string env_name(const std::string& flag) {
  std::string out = "RUBRIC_";
  for (char c : flag) out.push_back(c == '-' ? '_' : static_cast<char>(std::toupper(static_cast<unsigned char>(c))));
  return out;
}

std::vector<std::string> config_values(const Json& v) {
  std::vector<std::string> out;
  auto one = [&](const Json& x) {
    if (x.is_string()) {
      out.push_back(x.get<std::string>());
    } else if (x.is_boolean()) {
      out.push_back(x.get<bool>() ? "true" : "false");
    } else if (x.is_number()) {
      out.push_back(x.dump());
    } else {
      throw UsageError("config values must be strings, numbers, booleans or lists of these");
    }
  };
  if (v.is_array()) {
    for (const auto& x : v) one(x);
  } else {
    one(v);
  }
  return out;
}

Json load_config(const std::string& path) {
  if (path.empty()) return Json::object();
  if (!fs::exists(path)) throw UsageError("config file not found: " + path);
  Json j = Json::parse(io::read_text_file(path), nullptr, false);
  if (j.is_discarded() || !j.is_object()) throw UsageError("config file must hold a JSON object: " + path);
  return j;
}

/// Fills options absent from the command line: environment first, then the
/// JSON config file. Keys may use dashes or underscores.
void apply_fallbacks(CLI::App& app, const std::string& config_path) {
  std::string path = config_path;
  if (path.empty()) {
    if (const char* e = std::getenv("RUBRIC_CONFIG")) path = e;
  }
  const Json config = load_config(path);
  for (CLI::Option* opt : app.get_options()) {
    if (opt == app.get_help_ptr() || opt->count() > 0) continue;
    const std::string& name = opt->get_single_name();
    if (name.empty() || name == "config") continue;
    std::vector<std::string> values;
    if (const char* e = std::getenv(env_name(name).c_str())) {
      values.emplace_back(e);
    } else {
      std::string underscored = name;
      std::replace(underscored.begin(), underscored.end(), '-', '_');
      for (const auto& key : {name, underscored}) {
        if (config.contains(key)) {
          values = config_values(config[key]);
          break;
        }
      }
    }
    if (values.empty()) continue;
    for (auto& v : values) opt->add_result(v);
    try {
      opt->run_callback();
    } catch (const CLI::Error& e) {
      throw UsageError("invalid value for --" + name + ": " + e.what());
    }
  }
}

void require(CLI::App& app, std::initializer_list<const char*> flags) {
  for (const char* f : flags) {
    if (app.get_option(std::string("--") + f)->count() == 0) {
      throw UsageError(std::string("--") + f + " is required");
    }
  }
}

void require_file(const std::string& path, const char* flag) {
  if (!fs::exists(path)) throw UsageError(std::string("--") + flag + ": file not found: " + path);
}

void add_common(CLI::App& app, Options& o) {
  app.add_option("--config", o.config, "JSON config file; flags override environment, which overrides it");
  app.add_option("--prefix", o.prefix, "Output filename prefix")->capture_default_str();
  app.add_option("--out-dir", o.out_dir, "Directory for output files")->capture_default_str();
  app.add_option("--jobs", o.jobs, "Maximum concurrent workers")->capture_default_str()->check(CLI::PositiveNumber);
}

void add_backend(CLI::App& app, Options& o) {
  app.add_option("--backend", o.backend, "Completion backend")
      ->capture_default_str()
      ->check(CLI::IsMember({"mock", "remote"}));
  app.add_option("--model", o.model, "Model name sent to the remote endpoint");
  app.add_option("--endpoint", o.endpoint, "OpenAI-compatible chat or completions URL");
  app.add_option("--api-style", o.api_style, "Remote request shape")
      ->capture_default_str()
      ->check(CLI::IsMember({"chat", "completions"}));
  app.add_option("--api-key-env", o.api_key_env, "Name of the environment variable holding the API key")
      ->capture_default_str();
  app.add_option("--max-input-tokens", o.max_input_tokens, "Model input limit")->capture_default_str();
  app.add_option("--max-retries", o.max_retries, "Retries for transient failures")->capture_default_str();
  app.add_option("--timeout-ms", o.timeout_ms, "Per-request timeout")->capture_default_str();
  app.add_option("--concurrency", o.concurrency, "Concurrent requests to the backend")->capture_default_str();
}

void add_filter(CLI::App& app, Options& o) {
  app.add_option("--prompt-class", o.prompt_class, "Prompt class whose grades are used");
}

BackendConfig backend_config(const Options& o) {
  BackendConfig c;
  if (!o.endpoint.empty()) c.endpoint_url = o.endpoint;
  if (!o.model.empty()) c.model_name = o.model;
  c.api_key_env = o.api_key_env;
  c.api_style = o.api_style == "completions" ? ApiStyle::completions : ApiStyle::chat;
  c.max_input_tokens = o.max_input_tokens;
  c.max_retries = o.max_retries;
  c.request_timeout = std::chrono::milliseconds(o.timeout_ms);
  c.concurrency_budget = std::max(o.concurrency, o.jobs);
  c.validate();
  return c;
}

std::unique_ptr<Backend> make_backend(const Options& o, std::vector<PromptTemplate> templates = {}) {
  if (o.backend == "remote") return std::make_unique<RemoteBackend>(backend_config(o));
  return std::make_unique<MockBackend>(std::move(templates));
}

GradeFilter grade_filter(const Options& o) {
  GradeFilter f;
  if (!o.prompt_class.empty()) f.prompt_class = o.prompt_class;
  return f;
}

std::string class_tag(const Options& o) { return o.prompt_class.empty() ? "all" : o.prompt_class; }

fs::path out_path(const Options& o, const std::string& name) { return fs::path(o.out_dir) / name; }

void write_out(const fs::path& path, const std::string& content) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  io::write_file_atomic(path, content, io::wants_gzip(path));
}

std::vector<QueryTestBank> optional_banks(const Options& o) {
  if (o.testbank.empty()) return {};
  require_file(o.testbank, "testbank");
  return load_test_bank(o.testbank);
}

std::vector<QueryResponseSet> load_responses(const Options& o) {
  require_file(o.responses, "responses");
  return read_response_file(o.responses);
}

// ---------------------------------------------------------------- generate

int cmd_generate(CLI::App& app, Options& o, std::ostream& out) {
  require(app, {"queries"});
  require_file(o.queries, "queries");
  const EntryKind target = entry_kind_from_string(o.target);
  GenerationOptions gen;
  if (o.style == "car") gen.style = GenerationStyle::trec_car;
  if (!o.prompt_file.empty()) {
    require_file(o.prompt_file, "prompt-file");
    gen.template_text = io::read_text_file(o.prompt_file);
  }
  const auto queries = read_queries(o.queries);
  auto backend = make_backend(o);
  std::vector<QueryTestBank> banks;
  for (const auto& [qid, text] : queries) {
    banks.push_back(generate_test_bank(qid, text, target, *backend, gen));
  }
  const fs::path path = o.output.empty()
                            ? out_path(o, o.prefix + "-" + to_string(target) + "s.jsonl.gz")
                            : fs::path(o.output);
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  if (o.withhold > 0.0) {
    auto [shared, withheld] = withhold_entries(banks, o.withhold, o.withhold_seed);
    std::string stem = path.filename().string();
    for (const char* ext : {".gz", ".jsonl"}) {
      if (stem.size() > std::string(ext).size() && stem.ends_with(ext)) stem.resize(stem.size() - std::string(ext).size());
    }
    const fs::path secret = path.parent_path() / (stem + ".withheld.jsonl.gz");
    save_test_bank(withheld, secret);
    out << "withheld entries written to " << secret.string() << "\n";
    banks = std::move(shared);
  }
  save_test_bank(banks, path);
  out << "wrote " << banks.size() << " test banks to " << path.string() << "\n";
  return 0;
}

// ------------------------------------------------------------------- grade

PromptTemplate resolve_template(const Options& o) {
  if (!o.prompt_file.empty()) {
    require_file(o.prompt_file, "prompt-file");
    const bool direct = o.mode == "direct" ||
                        std::find(external_direct_classes().begin(), external_direct_classes().end(),
                                  o.prompt_class) != external_direct_classes().end();
    const PromptTarget target = direct ? PromptTarget::direct : prompt_target_from_string(o.target);
    return load_prompt_template(o.prompt_file, o.prompt_class, target, o.mode == "self_rated");
  }
  if (auto t = find_builtin_template(o.prompt_class)) return *t;
  const auto& ext = external_direct_classes();
  if (std::find(ext.begin(), ext.end(), o.prompt_class) != ext.end()) {
    throw UsageError("prompt class " + o.prompt_class + " needs --prompt-file with its template text");
  }
  throw UsageError("unknown prompt class '" + o.prompt_class + "'");
}

int cmd_grade(CLI::App& app, Options& o, std::ostream& out, std::ostream& err) {
  require(app, {"responses", "prompt-class"});
  const PromptTemplate tmpl = resolve_template(o);

  GradingJob job;
  job.prompt = tmpl;
  job.mode = !o.mode.empty()                       ? grading_mode_from_string(o.mode)
             : tmpl.is_self_rated                  ? GradingMode::self_rated
             : tmpl.target == PromptTarget::direct ? GradingMode::direct
                                                   : GradingMode::extract_informational;
  if (job.mode != GradingMode::direct) require(app, {"testbank"});
  job.responses = load_responses(o);
  job.banks = optional_banks(o);
  if (!o.queries.empty()) {
    require_file(o.queries, "queries");
    job.queries = read_queries(o.queries);
  }
  job.check_answer_key = o.check_answer_key;
  job.check_unanswerable = o.check_unanswerable;
  job.use_levenshtein = !o.no_levenshtein;
  job.use_llm_equivalence = !o.no_llm_equivalence;
  job.order = o.llm_first ? VerificationOrder::llm_first : VerificationOrder::levenshtein_first;
  job.jobs = o.jobs;
  job.max_failure_fraction = o.max_failure_fraction;
  job.prompt_budget = o.backend == "remote" ? std::min(o.prompt_budget, o.max_input_tokens) : o.prompt_budget;

  auto backend = make_backend(o, {tmpl});
  job.backend = backend.get();
  job.validate();

  const fs::path path =
      o.output.empty() ? out_path(o, o.prompt_class + "-" + fs::path(o.responses).filename().string())
                       : fs::path(o.output);
  if (fs::exists(path) && fs::equivalent(path, o.responses)) {
    throw UsageError("--output must differ from --responses; the input is preserved");
  }
  GradingResult result;
  try {
    result = grade_job(job);
  } catch (const GradingAbortedError& e) {
    write_out(path.string() + ".manifest.json", grading_manifest(job, e.report()).dump(2) + "\n");
    throw;
  }
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  write_response_file(result.responses, path, io::wants_gzip(path));
  write_out(path.string() + ".manifest.json", grading_manifest(job, result.report).dump(2) + "\n");
  const auto& r = result.report;
  if (r.pairs_failed > 0) {
    err << "warning: " << r.pairs_failed << " of " << r.pairs_total << " pairs failed; see "
        << path.string() << ".manifest.json\n";
  }
  if (r.rating_fallbacks > 0) {
    err << "warning: " << r.rating_fallbacks << " completions carried no rating and were graded 0\n";
  }
  out << "graded " << r.pairs_total << " pairs into " << path.string() << "\n";
  return 0;
}

// ----------------------------------------------------------------- analyze

int cmd_analyze(CLI::App& app, Options& o, std::ostream& out) {
  require(app, {"responses", "testbank"});
  const auto responses = load_responses(o);
  const auto banks = optional_banks(o);
  const GradeFilter filter = grade_filter(o);
  std::optional<GradeFilter> answers;
  if (!o.answer_prompt_class.empty()) {
    answers = GradeFilter{};
    answers->prompt_class = o.answer_prompt_class;
  }
  const auto verify = report_verify_grading(responses, banks, filter, answers);
  const auto spurious = report_spurious(responses, banks, filter, o.spurious_max_judgment, o.min_rating);
  const auto uncovered = report_uncovered(responses, banks, filter, o.min_relevant_judgment, o.min_rating);
  const auto grid = report_grid(responses, banks, filter, answers);

  auto emit = [&](const std::string& stem, const std::string& text, const Json& json) {
    write_out(out_path(o, o.prefix + "-" + stem + ".txt"), text);
    write_out(out_path(o, o.prefix + "-" + stem + ".json"), json.dump(2) + "\n");
  };
  emit("verify-grading", render_text(verify), to_json(verify));
  emit("bad-question", render_text(spurious), to_json(spurious));
  emit("uncovered-passages", render_text(uncovered), to_json(uncovered));
  emit("grid-display", render_text(grid), to_json(grid));
  if (verify.no_matching_grades) out << "warning: no grades match the filter\n";
  out << "wrote 4 reports to " << o.out_dir << "\n";
  return 0;
}

// ------------------------------------------------------------ export-qrels

fs::path qrels_name(const Options& o) {
  return o.output.empty() ? out_path(o, o.prefix + "-rubric-qrels-" + class_tag(o) + "-minrating-" +
                                            std::to_string(o.min_rating) + ".solo.qrels")
                          : fs::path(o.output);
}

int cmd_export_qrels(CLI::App& app, Options& o, std::ostream& out, std::ostream& err) {
  require(app, {"responses"});
  const auto responses = load_responses(o);
  const auto banks = optional_banks(o);
  const auto path = qrels_name(o);
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  const auto result = export_qrels(responses, grade_filter(o), label_scheme_from_string(o.label_scheme),
                                   o.min_rating, o.min_answers.front(), path,
                                   o.testbank.empty() ? nullptr : &banks);
  if (result.holes > 0) {
    err << "warning: " << result.holes << " passages carry no matching grade and are labelled 0\n";
  }
  out << "wrote " << result.lines.size() << " qrels lines to " << path.string() << "\n";
  return 0;
}

// ------------------------------------------------------ leaderboard & cover

std::optional<std::map<std::string, int>> reference_ranks(const Options& o) {
  if (o.reference.empty()) return std::nullopt;
  require_file(o.reference, "reference");
  return read_reference_ranks(o.reference);
}

std::string metric_tag(const Options& o) { return o.metric == "mrr" ? "mrr" : "p" + std::to_string(o.k); }

void write_boards(const Options& o, const Leaderboard& board, const std::string& stem,
                  const std::string& solo_suffix, std::ostream& out) {
  Leaderboard solo = board;
  solo.spearman.reset();
  solo.kendall.reset();
  const fs::path solo_path =
      out_path(o, stem + "-minrating-" + std::to_string(o.min_rating) + solo_suffix);
  write_out(solo_path, format_leaderboard_tsv(solo));
  out << format_leaderboard_tsv(board);
  if (!o.reference.empty()) {
    const fs::path corr_path =
        out_path(o, stem + "-minlevel-" + std::to_string(o.min_rating) + ".correlation.tsv");
    write_out(corr_path, format_leaderboard_tsv(board));
    if (!board.uncorrelated_methods.empty()) {
      out << "# not in reference:";
      for (const auto& m : board.uncorrelated_methods) out << " " << m;
      out << "\n";
    }
  }
}

int cmd_leaderboard(CLI::App& app, Options& o, std::ostream& out) {
  require(app, {"responses"});
  const auto responses = load_responses(o);
  const auto banks = optional_banks(o);
  const RankMetric metric = o.metric == "mrr" ? RankMetric::mrr : RankMetric::precision_at_k;

  std::vector<RankingEntry> run;
  for (const auto& r : o.runs) {
    require_file(r, "run");
    auto entries = parse_run_file(r);
    run.insert(run.end(), entries.begin(), entries.end());
  }
  if (o.runs.empty()) run = rankings_of(responses);

  std::vector<Judgment> qrels;
  if (!o.qrels.empty()) {
    require_file(o.qrels, "qrels");
    qrels = parse_qrels_file(o.qrels);
  } else {
    const auto derived = derive_qrels(responses, grade_filter(o), label_scheme_from_string(o.label_scheme),
                                      o.min_rating, o.min_answers.front(),
                                      o.testbank.empty() ? nullptr : &banks);
    for (const auto& l : derived.lines) {
      Judgment j;
      j.paragraph_id = l.paragraph_id;
      j.query = l.query_id;
      j.relevance = l.label;
      qrels.push_back(std::move(j));
    }
  }
  if (run.empty()) throw ValidationError("no rankings: pass --run or embed rankings in the responses");
  const auto scores = evaluate_runs(run, qrels, metric, o.k, 1);
  const auto board = build_leaderboard(scores, metric_tag(o), reference_ranks(o));
  write_boards(o, board, o.prefix + "-rubric-qrels-leaderboard-" + class_tag(o),
               ".solo." + metric_tag(o) + ".tsv", out);
  return 0;
}

int cmd_cover(CLI::App& app, Options& o, std::ostream& out) {
  require(app, {"responses", "testbank"});
  const auto responses = load_responses(o);
  const auto banks = optional_banks(o);
  const GradeFilter filter = grade_filter(o);
  auto scores = cover_scores(responses, banks, filter, o.k, o.min_rating);
  std::string metric = "rubric-cover";
  if (o.nexam) {
    const auto answerable = answerable_fraction(responses, banks, filter, o.min_rating);
    for (auto& [method, s] : scores) {
      const auto n = nexam_normalize(s.per_query, answerable);
      s = MethodScore{n.mean, n.std_error, n.per_query};
    }
    metric = "nexam";
  }
  const auto board = build_leaderboard(scores, metric, reference_ranks(o));
  write_boards(o, board, o.prefix + "-rubric-cover-leaderboard-" + class_tag(o),
               o.nexam ? ".solo.nexam.tsv" : ".solo.tsv", out);
  return 0;
}

// --------------------------------------------------------------- correlate

std::map<std::string, MethodScore> read_leaderboard_tsv(const std::string& path) {
  std::istringstream in(io::read_text_file(path));
  std::string line;
  std::map<std::string, MethodScore> scores;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line_no == 1 || line.empty() || line.front() == '#') continue;
    std::vector<std::string> cols;
    std::istringstream fields(line);
    for (std::string c; std::getline(fields, c, '\t');) cols.push_back(c);
    if (cols.empty() || cols[0] == "spearman" || cols[0] == "kendall") continue;
    if (cols.size() < 2) throw ParseError("leaderboard row needs method and score", line_no, 0);
    try {
      MethodScore s;
      s.score = std::stod(cols[1]);
      if (cols.size() > 2 && !cols[2].empty()) s.std_error = std::stod(cols[2]);
      scores[cols[0]] = s;
    } catch (const std::logic_error&) {
      throw ParseError("score is not a number", line_no, 0);
    }
  }
  return scores;
}

int cmd_correlate(CLI::App& app, Options& o, std::ostream& out) {
  require(app, {"leaderboard", "reference"});
  require_file(o.leaderboard, "leaderboard");
  const auto scores = read_leaderboard_tsv(o.leaderboard);
  if (scores.empty()) throw ValidationError("leaderboard has no method rows");
  const std::string metric = [&] {
    std::ifstream in(o.leaderboard);
    std::string header;
    std::getline(in, header);
    const auto a = header.find('\t');
    const auto b = header.find('\t', a + 1);
    return a == std::string::npos ? std::string("score") : header.substr(a + 1, b - a - 1);
  }();
  const auto board = build_leaderboard(scores, metric, reference_ranks(o));
  fs::path path = o.output;
  if (path.empty()) {
    std::string name = fs::path(o.leaderboard).filename().string();
    const auto solo = name.find(".solo");
    if (solo != std::string::npos) name.erase(solo);
    const auto mr = name.find("-minrating-");
    if (mr != std::string::npos) name.replace(mr, 11, "-minlevel-");
    path = out_path(o, name + ".correlation.tsv");
  }
  write_out(path, format_leaderboard_tsv(board));
  out << format_leaderboard_tsv(board);
  return 0;
}

// ------------------------------------------------------------------- kappa

int cmd_kappa(CLI::App& app, Options& o, std::ostream& out) {
  require(app, {"responses"});
  const auto responses = load_responses(o);
  const auto banks = optional_banks(o);
  std::vector<ContingencyTable> tables;
  for (int m : o.min_answers) {
    auto t = agreement_tables(responses, grade_filter(o), m, o.min_relevant_judgment,
                              o.testbank.empty() ? nullptr : &banks);
    tables.insert(tables.end(), t.begin(), t.end());
  }
  const fs::path path = o.output.empty()
                            ? out_path(o, o.prefix + "-rubric-inter-annotator-" + class_tag(o) + ".tex")
                            : fs::path(o.output);
  write_out(path, render_latex(tables));
  out << render_text(tables);
  return 0;
}

// ------------------------------------------------------------------- serve

int cmd_serve(CLI::App& app, Options& o, std::ostream& out) {
  require(app, {"workspace"});
  if (!fs::is_directory(o.workspace)) throw UsageError("--workspace: not a directory: " + o.workspace);
  ServiceConfig c;
  c.workspace = o.workspace;
  if (!o.queries.empty()) c.queries_file = o.queries;
  if (!o.testbank.empty()) c.testbank_file = o.testbank;
  if (!o.responses.empty()) c.responses_file = o.responses;
  if (!o.reference.empty()) c.reference_file = o.reference;
  if (!o.static_dir.empty()) c.static_dir = o.static_dir;
  c.host = o.host;
  c.port = o.port;
  if (!o.prompt_class.empty()) c.prompt_class = o.prompt_class;
  c.min_rating = o.min_rating;
  c.min_answers = o.min_answers.front();
  c.min_relevant_judgment = o.min_relevant_judgment;
  c.spurious_max_judgment = o.spurious_max_judgment;
  c.k = o.k;
  c.jobs = o.jobs;
  c.backend = o.backend;
  if (o.backend == "remote") c.backend_config = backend_config(o);
  Service service(c);
  const int port = service.start();
  out << "serving " << o.workspace << " on http://" << o.host << ":" << port << "\n" << std::flush;
  service.wait();
  return 0;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Rubric-based evaluation of retrieval and generation systems with LLM-graded test banks",
               "rubric"};
  app.require_subcommand(1);
  app.set_help_all_flag("--help-all", "Show help for every subcommand");
  Options o;

  auto* generate = app.add_subcommand("generate", "Generate a test bank of questions or nuggets per query");
  add_common(*generate, o);
  add_backend(*generate, o);
  generate->add_option("--queries", o.queries, "JSON dictionary query_id -> query text");
  generate->add_option("--target", o.target, "Kind of test bank entry")
      ->capture_default_str()
      ->check(CLI::IsMember({"question", "nugget"}));
  generate->add_option("--style", o.style, "Generation prompt family")
      ->capture_default_str()
      ->check(CLI::IsMember({"dl", "car"}));
  generate->add_option("--prompt-file", o.prompt_file,
                       "Generation template overriding the built-in one");
  generate->add_option("--output", o.output, "Test bank file (default <prefix>-<target>s.jsonl.gz)");
  generate->add_option("--withhold", o.withhold,
                       "Fraction of entries per query kept out of the shared file")
      ->capture_default_str()
      ->check(CLI::Range(0.0, 1.0));
  generate->add_option("--withhold-seed", o.withhold_seed, "Seed selecting the withheld entries")
      ->capture_default_str();

  auto* grade = app.add_subcommand("grade", "Grade every passage against every test bank entry");
  add_common(*grade, o);
  add_backend(*grade, o);
  add_filter(*grade, o);
  grade->add_option("--responses", o.responses, "Passages to grade (JSON-lines, optionally gzipped)");
  grade->add_option("--testbank", o.testbank, "Test bank file");
  grade->add_option("--queries", o.queries, "Queries file; needed for direct grading");
  grade->add_option("--prompt-file", o.prompt_file, "Template text for a custom or external prompt class");
  grade->add_option("--target", o.target, "Entry kind of a custom template")
      ->capture_default_str()
      ->check(CLI::IsMember({"question", "nugget"}));
  grade->add_option("--mode", o.mode, "Grading mode (default follows the prompt class)")
      ->check(CLI::IsMember({"self_rated", "extract_and_verify", "extract_informational", "direct"}));
  grade->add_flag("--check-answer-key", o.check_answer_key, "Verify extracted answers against gold answers");
  grade->add_flag("--check-unanswerable", o.check_unanswerable, "Mark unanswerable extractions wrong");
  grade->add_flag("--no-levenshtein", o.no_levenshtein, "Skip fuzzy answer-key matching");
  grade->add_flag("--no-llm-equivalence", o.no_llm_equivalence, "Skip LLM answer equivalence checks");
  grade->add_flag("--llm-first", o.llm_first, "Ask the LLM before fuzzy matching");
  grade->add_option("--prompt-budget", o.prompt_budget, "Prompt length cap in words")->capture_default_str();
  grade->add_option("--max-failure-fraction", o.max_failure_fraction,
                    "Abort once more than this fraction of pairs failed")
      ->capture_default_str()
      ->check(CLI::Range(0.0, 1.0));
  grade->add_option("--output", o.output, "Graded file (default <prompt-class>-<responses name>)");

  auto* analyze = app.add_subcommand("analyze", "Write the verification reports for manual review");
  add_common(*analyze, o);
  add_filter(*analyze, o);
  analyze->add_option("--responses", o.responses, "Graded responses");
  analyze->add_option("--testbank", o.testbank, "Test bank file");
  analyze->add_option("--answer-prompt-class", o.answer_prompt_class,
                      "Prompt class whose extracted answers are shown");
  analyze->add_option("--min-rating", o.min_rating, "Rating that counts as covered")->capture_default_str();
  analyze->add_option("--min-relevant-judgment", o.min_relevant_judgment,
                      "Judgment that counts as relevant for uncovered passages")
      ->capture_default_str();
  analyze->add_option("--spurious-max-judgment", o.spurious_max_judgment,
                      "Highest judgment of passages counted towards spurious entries")
      ->capture_default_str();

  auto* qrels = app.add_subcommand("export-qrels", "Export graded passages as a TREC qrels file");
  add_common(*qrels, o);
  add_filter(*qrels, o);
  qrels->add_option("--responses", o.responses, "Graded responses");
  qrels->add_option("--testbank", o.testbank, "Restrict ratings to the entries of this test bank");
  qrels->add_option("--min-rating", o.min_rating, "Lowest rating exported as relevant")->capture_default_str();
  qrels->add_option("--min-answers", o.min_answers, "Entries that must reach the label")
      ->capture_default_str()
      ->expected(1);
  qrels->add_option("--label-scheme", o.label_scheme, "Passage label derivation")
      ->capture_default_str()
      ->check(CLI::IsMember({"max_grade", "count_covered"}));
  qrels->add_option("--output", o.output, "Qrels file (default follows the naming convention)");

  auto* board = app.add_subcommand("leaderboard", "Score systems against qrels derived from the grades");
  add_common(*board, o);
  add_filter(*board, o);
  board->add_option("--responses", o.responses, "Graded responses with embedded rankings");
  board->add_option("--testbank", o.testbank, "Restrict ratings to the entries of this test bank");
  board->add_option("--qrels", o.qrels, "Use this qrels file instead of deriving one");
  board->add_option("--run", o.runs, "TREC run files replacing the embedded rankings");
  board->add_option("--reference", o.reference, "JSON dictionary method -> official rank");
  board->add_option("--min-rating", o.min_rating, "Lowest rating treated as relevant")->capture_default_str();
  board->add_option("--min-answers", o.min_answers, "Entries that must reach the label")
      ->capture_default_str()
      ->expected(1);
  board->add_option("--label-scheme", o.label_scheme, "Passage label derivation")
      ->capture_default_str()
      ->check(CLI::IsMember({"max_grade", "count_covered"}));
  board->add_option("--metric", o.metric, "Ranking metric")
      ->capture_default_str()
      ->check(CLI::IsMember({"mrr", "precision"}));
  board->add_option("--k", o.k, "Cutoff for precision")->capture_default_str()->check(CLI::PositiveNumber);

  auto* cover = app.add_subcommand("cover", "Rubric-Cover leaderboard: fraction of entries answered in the top k");
  add_common(*cover, o);
  add_filter(*cover, o);
  cover->add_option("--responses", o.responses, "Graded responses with embedded rankings");
  cover->add_option("--testbank", o.testbank, "Test bank file");
  cover->add_option("--reference", o.reference, "JSON dictionary method -> official rank");
  cover->add_option("--min-rating", o.min_rating, "Rating that counts as covered")->capture_default_str();
  cover->add_option("--k", o.k, "Rank cutoff")->capture_default_str()->check(CLI::PositiveNumber);
  cover->add_flag("--nexam", o.nexam, "Normalize by the answerable fraction of each query");

  auto* correlate = app.add_subcommand("correlate", "Rank correlation of a leaderboard with a reference");
  add_common(*correlate, o);
  correlate->add_option("--leaderboard", o.leaderboard, "Leaderboard TSV");
  correlate->add_option("--reference", o.reference, "JSON dictionary method -> official rank");
  correlate->add_option("--output", o.output, "Correlation TSV (default derived from the leaderboard name)");

  auto* kappa = app.add_subcommand("kappa", "Agreement tables between passage labels and judgments");
  add_common(*kappa, o);
  add_filter(*kappa, o);
  kappa->add_option("--responses", o.responses, "Graded responses with judgments");
  kappa->add_option("--testbank", o.testbank, "Restrict ratings to the entries of this test bank");
  kappa->add_option("--min-answers", o.min_answers, "One table set per value")->capture_default_str();
  kappa->add_option("--min-relevant-judgment", o.min_relevant_judgment,
                    "Judgment that counts as relevant (2 for TREC DL)")
      ->capture_default_str();
  kappa->add_option("--output", o.output, "LaTeX file (default follows the naming convention)");

  auto* serve = app.add_subcommand("serve", "Serve the verification API over a workspace directory");
  add_common(*serve, o);
  add_backend(*serve, o);
  add_filter(*serve, o);
  serve->add_option("--workspace", o.workspace, "Directory with queries, test bank and graded responses");
  serve->add_option("--queries", o.queries, "Queries file inside the workspace");
  serve->add_option("--responses", o.responses, "Graded responses inside the workspace");
  serve->add_option("--testbank", o.testbank, "Test bank inside the workspace");
  serve->add_option("--reference", o.reference, "Reference leaderboard inside the workspace");
  serve->add_option("--static-dir", o.static_dir, "Built UI bundle served under /");
  serve->add_option("--host", o.host, "Bind address")->capture_default_str();
  serve->add_option("--port", o.port, "Port; 0 picks a free one")->capture_default_str();
  serve->add_option("--min-rating", o.min_rating, "Rating that counts as covered")->capture_default_str();
  serve->add_option("--min-answers", o.min_answers, "Entries that must reach the label")
      ->capture_default_str()
      ->expected(1);
  serve->add_option("--min-relevant-judgment", o.min_relevant_judgment, "Judgment that counts as relevant")
      ->capture_default_str();
  serve->add_option("--spurious-max-judgment", o.spurious_max_judgment,
                    "Highest judgment of passages counted towards spurious entries")
      ->capture_default_str();
  serve->add_option("--k", o.k, "Rank cutoff")->capture_default_str();

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    const auto subs = app.get_subcommands();
    out << (subs.empty() ? app.help() : subs.front()->help());
    return 0;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return 0;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n";
    err << "run with --help for usage\n";
    return 1;
  }

  CLI::App* sub = app.get_subcommands().front();
  const std::string name = sub->get_name();
  try {
    apply_fallbacks(*sub, o.config);
    if (o.min_answers.empty()) throw UsageError("--min-answers needs a value");
    for (int m : o.min_answers) {
      if (m < 1) throw UsageError("--min-answers must be at least 1");
    }
    if (name == "generate") return cmd_generate(*sub, o, out);
    if (name == "grade") return cmd_grade(*sub, o, out, err);
    if (name == "analyze") return cmd_analyze(*sub, o, out);
    if (name == "export-qrels") return cmd_export_qrels(*sub, o, out, err);
    if (name == "leaderboard") return cmd_leaderboard(*sub, o, out);
    if (name == "cover") return cmd_cover(*sub, o, out);
    if (name == "correlate") return cmd_correlate(*sub, o, out);
    if (name == "kappa") return cmd_kappa(*sub, o, out);
    if (name == "serve") return cmd_serve(*sub, o, out);
    throw UsageError("unknown subcommand " + name);
  } catch (const UsageError& e) {
    err << name << ": " << e.what() << "\n";
    return 1;
  } catch (const ValidationError& e) {
    err << name << ": " << e.what() << "\n";
    return 1;
  } catch (const ParseError& e) {
    err << name << ": " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    err << name << ": " << e.what() << "\n";
    return 2;
  }
}

}  // namespace rubric::cli
