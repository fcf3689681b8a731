#pragma once

// Independent reference implementations, written for clarity rather than
// speed, and the fixture generators shared by unit tests and the acceptance
// binary.

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "rubric/core_model.hpp"
#include "rubric/testbank.hpp"
#include "support.hpp"

namespace testing_support {

/// Pearson correlation of average ranks; ranks by pairwise counting.
double spearman_oracle(const std::vector<double>& a, const std::vector<double>& b);
/// Tau-b from explicit pair enumeration.
double kendall_oracle(const std::vector<double>& a, const std::vector<double>& b);

/// Integer vector of length n over a small alphabet, so ties are frequent.
std::vector<double> tied_vector(Rng& rng, int n);

/// Two-entry-table row kappa from the textbook formula on marginals.
double kappa_oracle(double tp, double fp, double fn, double tn);

/// Levenshtein distance by full dynamic-programming table.
std::size_t levenshtein_oracle(const std::string& a, const std::string& b);

// Rubric-Cover on plain arrays.
struct CoverPassage {
  std::map<std::string, int> rank_by_method;
  std::vector<std::optional<int>> ratings;  // parallel to entries; nullopt = not graded
};
struct CoverQuery {
  int entries = 0;
  std::vector<CoverPassage> passages;
};
struct CoverTrial {
  std::vector<CoverQuery> queries;
  std::vector<std::string> methods;
  int k = 1;
  int min_rating = 4;
};

CoverTrial random_cover_trial(Rng& rng, int max_queries = 5, int max_entries = 10,
                              int max_passages = 30);
/// Per-method mean over queries of |covered| / |entries|, found by checking
/// every (entry, passage) combination.
std::map<std::string, double> cover_by_enumeration(const CoverTrial& trial);
/// The same trial as responses and banks.
std::pair<std::vector<rubric::QueryResponseSet>, std::vector<rubric::QueryTestBank>> to_rubric(
    const CoverTrial& trial);

// The eight unanswerable expressions plus two invalid-answer patterns, and
// answers that must not be flagged.
const std::vector<std::string>& unanswerable_fixtures();
const std::vector<std::string>& substantive_fixtures();

// TREC run fixtures that must be rejected, with the 1-based offending line.
struct MalformedRun {
  std::string name;
  std::string text;
  std::size_t line;
};
const std::vector<MalformedRun>& malformed_runs();

}  // namespace testing_support
