#pragma once

// Phase 4: passage labels and qrels export, ranking metrics over TREC runs,
// Rubric-Cover and its nEXAM normalization.

#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "rubric/core_model.hpp"
#include "rubric/testbank.hpp"
#include "rubric/trec_formats.hpp"

namespace rubric {

enum class LabelScheme { max_grade, count_covered };

std::string to_string(LabelScheme scheme);
LabelScheme label_scheme_from_string(const std::string& s);

struct PassageLabel {
  int label = 0;
  bool hole = false;  // no grade matched the filter

  bool operator==(const PassageLabel&) const = default;
};

/// max_grade: the min_answers-th largest rating (0 with fewer ratings).
/// count_covered: number of entries rated >= min_rating.
/// Ratings are restricted to `bank` when given.
PassageLabel passage_label(const GradedPassage& passage, const GradeFilter& filter,
                           LabelScheme scheme, int min_rating, int min_answers = 1,
                           const QueryTestBank* bank = nullptr);

/// Same rule on bare ratings.
int label_from_ratings(std::vector<int> ratings, LabelScheme scheme, int min_rating,
                       int min_answers);

struct QrelsExport {
  std::vector<QrelsLine> lines;  // sorted by query id, then paragraph id
  std::size_t holes = 0;
};

/// One line per (query, passage). Under max_grade, labels below min_rating
/// become 0 so only passages with grades >= min_rating count as relevant.
QrelsExport derive_qrels(const std::vector<QueryResponseSet>& responses, const GradeFilter& filter,
                         LabelScheme scheme, int min_rating, int min_answers,
                         const std::vector<QueryTestBank>* banks = nullptr);

QrelsExport export_qrels(const std::vector<QueryResponseSet>& responses, const GradeFilter& filter,
                         LabelScheme scheme, int min_rating, int min_answers,
                         const std::filesystem::path& path,
                         const std::vector<QueryTestBank>* banks = nullptr);

/// Reciprocal rank of the first relevant entry in one query's ranking (0 if
/// none). Entries are ordered by rank first.
double reciprocal_rank(std::vector<RankingEntry> ranking, const std::set<std::string>& relevant);
/// Fraction of the top k ranks holding relevant entries; k in the denominator.
double precision_at_k(std::vector<RankingEntry> ranking, const std::set<std::string>& relevant,
                      int k);

enum class RankMetric { mrr, precision_at_k };

struct MethodScore {
  double score = 0.0;
  double std_error = 0.0;
  std::map<std::string, double> per_query;
};

/// Scores every run tag over all queries of `qrels`; relevant means
/// relevance >= min_relevance. A method without entries for a query scores 0
/// there.
std::map<std::string, MethodScore> evaluate_runs(const std::vector<RankingEntry>& run,
                                                 const std::vector<Judgment>& qrels,
                                                 RankMetric metric, int k = 20,
                                                 int min_relevance = 1);

/// Sample standard deviation / sqrt(n); 0 for n < 2.
double standard_error(const std::vector<double>& values);

/// Methods named in the passages' rankings, sorted.
std::vector<std::string> methods_in(const std::vector<QueryResponseSet>& responses);

/// Rubric-Cover over the queries with a non-empty bank present in responses:
/// per query, the fraction of bank entries rated >= min_rating on a passage
/// ranked <= k by `method`. Throws NotFoundError for an unknown method.
MethodScore rubric_cover(const std::vector<QueryResponseSet>& responses,
                         const std::vector<QueryTestBank>& banks, const GradeFilter& filter,
                         const std::string& method, int k, int min_rating);

/// Per query, fraction of bank entries rated >= min_rating by any passage.
std::map<std::string, double> answerable_fraction(const std::vector<QueryResponseSet>& responses,
                                                  const std::vector<QueryTestBank>& banks,
                                                  const GradeFilter& filter, int min_rating);

struct NexamResult {
  std::map<std::string, double> per_query;
  std::vector<std::string> excluded;  // answerable fraction was 0
  double mean = 0.0;
  double std_error = 0.0;
};

NexamResult nexam_normalize(const std::map<std::string, double>& cover_per_query,
                            const std::map<std::string, double>& answerable_per_query);

}  // namespace rubric
