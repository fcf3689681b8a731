#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "rubric/core_model.hpp"
#include "rubric/evaluation.hpp"

namespace rubric {

struct LeaderboardRow {
  std::string method;
  double score = 0.0;
  double std_error = 0.0;
};

struct Leaderboard {
  std::string metric_name;
  std::vector<LeaderboardRow> rows;  // score descending, then method
  std::optional<double> spearman;
  std::optional<double> kendall;
  std::vector<std::string> uncorrelated_methods;  // absent from the reference
};

/// Reference ranks: method -> official rank, top rank = 1. Correlations are
/// taken over methods present in both, between scores and negated ranks,
/// and are left unset when all those scores tie.
Leaderboard build_leaderboard(const std::map<std::string, MethodScore>& scores,
                              const std::string& metric_name,
                              const std::optional<std::map<std::string, int>>& reference_ranks = {});

/// "method\tscore\tstd_error" rows with 4 decimals; "spearman" and "kendall"
/// footer rows when correlations exist.
std::string format_leaderboard_tsv(const Leaderboard& board);
Json to_json(const Leaderboard& board);

std::map<std::string, int> read_reference_ranks(const std::filesystem::path& path);

/// Run entries carried in the passages' paragraph_data.rankings.
std::vector<RankingEntry> rankings_of(const std::vector<QueryResponseSet>& responses);

/// Rubric-Cover for every method ranking passages in `responses`.
std::map<std::string, MethodScore> cover_scores(const std::vector<QueryResponseSet>& responses,
                                                const std::vector<QueryTestBank>& banks,
                                                const GradeFilter& filter, int k, int min_rating);

/// Derives qrels from the grades, then scores the embedded rankings against them.
std::map<std::string, MethodScore> qrels_scores(const std::vector<QueryResponseSet>& responses,
                                                const std::vector<QueryTestBank>* banks,
                                                const GradeFilter& filter, LabelScheme scheme,
                                                int min_rating, int min_answers, RankMetric metric,
                                                int k);

}  // namespace rubric
