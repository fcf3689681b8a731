#include "rubric/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "rubric/error.hpp"
#include "rubric/gzip_io.hpp"

namespace rubric {

std::string to_string(LabelScheme scheme) {
  return scheme == LabelScheme::max_grade ? "max_grade" : "count_covered";
}

LabelScheme label_scheme_from_string(const std::string& s) {
  if (s == "max_grade") return LabelScheme::max_grade;
  if (s == "count_covered") return LabelScheme::count_covered;
  throw ValidationError("unknown label scheme '" + s + "'");
}

int label_from_ratings(std::vector<int> ratings, LabelScheme scheme, int min_rating,
                       int min_answers) {
  if (min_answers < 1) throw ValidationError("min_answers must be at least 1");
  if (scheme == LabelScheme::count_covered) {
    return static_cast<int>(
        std::count_if(ratings.begin(), ratings.end(), [&](int r) { return r >= min_rating; }));
  }
  const auto m = static_cast<std::size_t>(min_answers);
  if (ratings.size() < m) return 0;
  std::nth_element(ratings.begin(), ratings.begin() + static_cast<std::ptrdiff_t>(m - 1),
                   ratings.end(), std::greater<>());
  return ratings[m - 1];
}

PassageLabel passage_label(const GradedPassage& passage, const GradeFilter& filter,
                           LabelScheme scheme, int min_rating, int min_answers,
                           const QueryTestBank* bank) {
  const bool graded = std::any_of(passage.exam_grades.begin(), passage.exam_grades.end(),
                                  [&](const ExamGrade& g) { return filter.matches(g); });
  std::vector<int> ratings;
  for (const auto& [id, r] : bank_ratings(passage, filter, bank)) ratings.push_back(r);
  PassageLabel out;
  out.label = label_from_ratings(std::move(ratings), scheme, min_rating, min_answers);
  out.hole = !graded;
  return out;
}

QrelsExport derive_qrels(const std::vector<QueryResponseSet>& responses, const GradeFilter& filter,
                         LabelScheme scheme, int min_rating, int min_answers,
                         const std::vector<QueryTestBank>* banks) {
  QrelsExport out;
  for (const auto& rec : responses) {
    const QueryTestBank* bank = banks ? find_bank(*banks, rec.query_id) : nullptr;
    for (const auto& p : rec.passages) {
      const auto l = passage_label(p, filter, scheme, min_rating, min_answers, bank);
      int label = l.label;
      if (scheme == LabelScheme::max_grade && label < min_rating) label = 0;
      if (scheme == LabelScheme::count_covered && label < min_answers) label = 0;
      if (l.hole) ++out.holes;
      out.lines.push_back({rec.query_id, p.paragraph_id, label});
    }
  }
  std::sort(out.lines.begin(), out.lines.end(), [](const QrelsLine& a, const QrelsLine& b) {
    return std::tie(a.query_id, a.paragraph_id) < std::tie(b.query_id, b.paragraph_id);
  });
  return out;
}

QrelsExport export_qrels(const std::vector<QueryResponseSet>& responses, const GradeFilter& filter,
                         LabelScheme scheme, int min_rating, int min_answers,
                         const std::filesystem::path& path,
                         const std::vector<QueryTestBank>* banks) {
  auto out = derive_qrels(responses, filter, scheme, min_rating, min_answers, banks);
  io::write_file_atomic(path, format_qrels(out.lines), io::wants_gzip(path));
  return out;
}

namespace {

void sort_by_rank(std::vector<RankingEntry>& ranking) {
  std::sort(ranking.begin(), ranking.end(), [](const RankingEntry& a, const RankingEntry& b) {
    return std::tie(a.rank, a.paragraph_id) < std::tie(b.rank, b.paragraph_id);
  });
}

}  // namespace

double reciprocal_rank(std::vector<RankingEntry> ranking, const std::set<std::string>& relevant) {
  sort_by_rank(ranking);
  for (const auto& e : ranking) {
    if (relevant.count(e.paragraph_id)) return 1.0 / e.rank;
  }
  return 0.0;
}

double precision_at_k(std::vector<RankingEntry> ranking, const std::set<std::string>& relevant,
                      int k) {
  if (k < 1) throw ValidationError("k must be at least 1");
  sort_by_rank(ranking);
  int hits = 0;
  for (const auto& e : ranking) {
    if (e.rank > k) break;
    hits += relevant.count(e.paragraph_id) ? 1 : 0;
  }
  return static_cast<double>(hits) / k;
}

double standard_error(const std::vector<double>& values) {
  const auto n = values.size();
  if (n < 2) return 0.0;
  const double mean = std::accumulate(values.begin(), values.end(), 0.0) / static_cast<double>(n);
  double ss = 0.0;
  for (double v : values) ss += (v - mean) * (v - mean);
  return std::sqrt(ss / static_cast<double>(n - 1)) / std::sqrt(static_cast<double>(n));
}

namespace {

MethodScore summarize(std::map<std::string, double> per_query) {
  MethodScore s;
  std::vector<double> values;
  for (const auto& [q, v] : per_query) values.push_back(v);
  if (!values.empty()) {
    s.score = std::accumulate(values.begin(), values.end(), 0.0) / static_cast<double>(values.size());
  }
  s.std_error = standard_error(values);
  s.per_query = std::move(per_query);
  return s;
}

}  // namespace

std::map<std::string, MethodScore> evaluate_runs(const std::vector<RankingEntry>& run,
                                                 const std::vector<Judgment>& qrels,
                                                 RankMetric metric, int k, int min_relevance) {
  std::map<std::string, std::set<std::string>> relevant;
  for (const auto& j : qrels) {
    auto& rel = relevant[j.query];
    if (j.relevance >= min_relevance) rel.insert(j.paragraph_id);
  }
  std::map<std::string, std::map<std::string, std::vector<RankingEntry>>> by_method;
  for (const auto& e : run) by_method[e.method][e.query_id].push_back(e);

  std::map<std::string, MethodScore> out;
  for (auto& [method, queries] : by_method) {
    std::map<std::string, double> per_query;
    for (const auto& [qid, rel] : relevant) {
      auto it = queries.find(qid);
      if (it == queries.end()) {
        per_query[qid] = 0.0;
        continue;
      }
      per_query[qid] = metric == RankMetric::mrr ? reciprocal_rank(it->second, rel)
                                                 : precision_at_k(it->second, rel, k);
    }
    out[method] = summarize(std::move(per_query));
  }
  return out;
}

std::vector<std::string> methods_in(const std::vector<QueryResponseSet>& responses) {
  std::set<std::string> methods;
  for (const auto& rec : responses) {
    for (const auto& p : rec.passages) {
      for (const auto& r : p.rankings) methods.insert(r.method);
    }
  }
  return {methods.begin(), methods.end()};
}

namespace {

std::map<std::string, std::vector<const QueryResponseSet*>> records_by_query(
    const std::vector<QueryResponseSet>& responses) {
  std::map<std::string, std::vector<const QueryResponseSet*>> out;
  for (const auto& r : responses) out[r.query_id].push_back(&r);
  return out;
}

}  // namespace

MethodScore rubric_cover(const std::vector<QueryResponseSet>& responses,
                         const std::vector<QueryTestBank>& banks, const GradeFilter& filter,
                         const std::string& method, int k, int min_rating) {
  const auto methods = methods_in(responses);
  if (!std::binary_search(methods.begin(), methods.end(), method)) {
    throw NotFoundError("method '" + method + "' ranks no passage");
  }
  std::map<std::string, double> per_query;
  for (const auto& [qid, records] : records_by_query(responses)) {
    const auto* bank = find_bank(banks, qid);
    if (!bank || bank->items.empty()) continue;
    std::set<std::string> covered;
    for (const auto* rec : records) {
      for (const auto& p : rec->passages) {
        const auto rank = p.rank_for(method);
        if (!rank || *rank > k) continue;
        for (const auto& [id, r] : bank_ratings(p, filter, bank)) {
          if (r >= min_rating) covered.insert(id);
        }
      }
    }
    per_query[qid] = static_cast<double>(covered.size()) / static_cast<double>(bank->items.size());
  }
  return summarize(std::move(per_query));
}

std::map<std::string, double> answerable_fraction(const std::vector<QueryResponseSet>& responses,
                                                  const std::vector<QueryTestBank>& banks,
                                                  const GradeFilter& filter, int min_rating) {
  std::map<std::string, double> out;
  for (const auto& [qid, records] : records_by_query(responses)) {
    const auto* bank = find_bank(banks, qid);
    if (!bank || bank->items.empty()) continue;
    std::set<std::string> answered;
    for (const auto* rec : records) {
      for (const auto& p : rec->passages) {
        for (const auto& [id, r] : bank_ratings(p, filter, bank)) {
          if (r >= min_rating) answered.insert(id);
        }
      }
    }
    out[qid] = static_cast<double>(answered.size()) / static_cast<double>(bank->items.size());
  }
  return out;
}

NexamResult nexam_normalize(const std::map<std::string, double>& cover_per_query,
                            const std::map<std::string, double>& answerable_per_query) {
  NexamResult out;
  std::vector<double> values;
  for (const auto& [qid, cover] : cover_per_query) {
    const auto it = answerable_per_query.find(qid);
    if (it == answerable_per_query.end() || it->second <= 0.0) {
      out.excluded.push_back(qid);
      continue;
    }
    const double v = std::min(1.0, cover / it->second);
    out.per_query[qid] = v;
    values.push_back(v);
  }
  if (!values.empty()) {
    out.mean = std::accumulate(values.begin(), values.end(), 0.0) / static_cast<double>(values.size());
  }
  out.std_error = standard_error(values);
  return out;
}

}  // namespace rubric
