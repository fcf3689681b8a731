#include "rubric/leaderboard.hpp"

#include <algorithm>
#include <cstdio>

#include "rubric/correlation.hpp"
#include "rubric/error.hpp"
#include "rubric/gzip_io.hpp"

namespace rubric {

Leaderboard build_leaderboard(const std::map<std::string, MethodScore>& scores,
                              const std::string& metric_name,
                              const std::optional<std::map<std::string, int>>& reference_ranks) {
  if (scores.empty()) throw ValidationError("leaderboard needs at least one method");
  Leaderboard board;
  board.metric_name = metric_name;
  for (const auto& [method, s] : scores) board.rows.push_back({method, s.score, s.std_error});
  std::sort(board.rows.begin(), board.rows.end(), [](const auto& a, const auto& b) {
    if (a.score != b.score) return a.score > b.score;
    return a.method < b.method;
  });
  if (!reference_ranks) return board;

  std::vector<double> ours;
  std::vector<double> theirs;
  for (const auto& [method, s] : scores) {
    const auto it = reference_ranks->find(method);
    if (it == reference_ranks->end()) {
      board.uncorrelated_methods.push_back(method);
      continue;
    }
    ours.push_back(s.score);
    theirs.push_back(-static_cast<double>(it->second));
  }
  if (ours.size() >= 2) {
    try {
      board.spearman = spearman(ours, theirs);
      board.kendall = kendall_tau(ours, theirs);
    } catch (const UndefinedCorrelationError&) {
      // all scores tied: no correlation rows
    }
  }
  return board;
}

namespace {

std::string fixed4(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.4f", v);
  std::string s = buf;
  return s == "-0.0000" ? "0.0000" : s;
}

}  // namespace

std::string format_leaderboard_tsv(const Leaderboard& board) {
  std::string out = "method\t" + board.metric_name + "\tstd_error\n";
  for (const auto& r : board.rows) {
    out += r.method + "\t" + fixed4(r.score) + "\t" + fixed4(r.std_error) + "\n";
  }
  if (board.spearman) out += "spearman\t" + fixed4(*board.spearman) + "\t\n";
  if (board.kendall) out += "kendall\t" + fixed4(*board.kendall) + "\t\n";
  return out;
}

Json to_json(const Leaderboard& board) {
  Json rows = Json::array();
  for (const auto& r : board.rows) {
    rows.push_back({{"method", r.method}, {"score", r.score}, {"std_error", r.std_error}});
  }
  Json out = {{"metric", board.metric_name}, {"rows", std::move(rows)}};
  out["spearman"] = board.spearman ? Json(*board.spearman) : Json(nullptr);
  out["kendall"] = board.kendall ? Json(*board.kendall) : Json(nullptr);
  out["uncorrelated_methods"] = board.uncorrelated_methods;
  return out;
}

std::map<std::string, int> read_reference_ranks(const std::filesystem::path& path) {
  const Json j = Json::parse(io::read_text_file(path), nullptr, false);
  if (j.is_discarded() || !j.is_object()) {
    throw ValidationError("reference leaderboard must be a JSON dictionary: " + path.string());
  }
  std::map<std::string, int> out;
  for (const auto& [method, rank] : j.items()) {
    if (!rank.is_number_integer() || rank.get<int>() < 1) {
      throw ValidationError("reference rank for '" + method + "' must be an integer >= 1");
    }
    out[method] = rank.get<int>();
  }
  return out;
}

std::vector<RankingEntry> rankings_of(const std::vector<QueryResponseSet>& responses) {
  std::vector<RankingEntry> out;
  for (const auto& rec : responses) {
    for (const auto& p : rec.passages) {
      for (auto r : p.rankings) {
        if (r.query_id.empty()) r.query_id = rec.query_id;
        if (r.paragraph_id.empty()) r.paragraph_id = p.paragraph_id;
        out.push_back(std::move(r));
      }
    }
  }
  return out;
}

std::map<std::string, MethodScore> cover_scores(const std::vector<QueryResponseSet>& responses,
                                                const std::vector<QueryTestBank>& banks,
                                                const GradeFilter& filter, int k, int min_rating) {
  std::map<std::string, MethodScore> out;
  for (const auto& method : methods_in(responses)) {
    out[method] = rubric_cover(responses, banks, filter, method, k, min_rating);
  }
  return out;
}

std::map<std::string, MethodScore> qrels_scores(const std::vector<QueryResponseSet>& responses,
                                                const std::vector<QueryTestBank>* banks,
                                                const GradeFilter& filter, LabelScheme scheme,
                                                int min_rating, int min_answers, RankMetric metric,
                                                int k) {
  const auto qrels = derive_qrels(responses, filter, scheme, min_rating, min_answers, banks);
  std::vector<Judgment> judgments;
  for (const auto& l : qrels.lines) {
    Judgment j;
    j.query = l.query_id;
    j.paragraph_id = l.paragraph_id;
    j.relevance = l.label;
    judgments.push_back(std::move(j));
  }
  return evaluate_runs(rankings_of(responses), judgments, metric, k);
}

}  // namespace rubric
