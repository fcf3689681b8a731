#pragma once

// Phase 3 oversight reports. Each is a pure function of its inputs and comes
// as plain text (for reviewers) and JSON (for the service).
//
// Ratings are read from exam grades matching the filter and restricted to the
// entries of the supplied test banks, so removed entries stop contributing.

#include <optional>
#include <string>
#include <vector>

#include "rubric/core_model.hpp"
#include "rubric/testbank.hpp"

namespace rubric {

struct VerifyRow {
  std::optional<int> rating;
  std::string answer;
  std::string paragraph_id;
};

struct VerifyGroup {
  std::string query_id;
  std::string entry_id;
  std::string entry_text;
  std::vector<VerifyRow> rows;  // rating descending (unrated last), then paragraph_id
};

struct VerifyGradingReport {
  std::vector<VerifyGroup> groups;  // by query_id, then entry_id
  bool no_matching_grades = false;
};

/// Answers come from grades matching `answer_filter` (default: `filter`), so
/// extraction-prompt answers can be shown next to self-ratings.
VerifyGradingReport report_verify_grading(const std::vector<QueryResponseSet>& responses,
                                          const std::vector<QueryTestBank>& banks,
                                          const GradeFilter& filter,
                                          const std::optional<GradeFilter>& answer_filter = {});

struct GridCell {
  std::optional<int> rating;  // absent differs from 0
  std::optional<std::string> answer;
};

struct GridRow {
  std::string paragraph_id;
  std::optional<int> best_rank;
  std::optional<int> max_judgment;
  std::vector<GridCell> cells;  // parallel to QueryGrid::entry_ids
};

struct QueryGrid {
  std::string query_id;
  std::vector<std::string> entry_ids;
  std::vector<std::string> entry_texts;
  std::vector<GridRow> rows;  // best rank ascending (unranked last), then paragraph_id
};

std::vector<QueryGrid> report_grid(const std::vector<QueryResponseSet>& responses,
                                   const std::vector<QueryTestBank>& banks,
                                   const GradeFilter& filter,
                                   const std::optional<GradeFilter>& answer_filter = {});

struct UncoveredPassage {
  std::string query_id;
  std::string paragraph_id;
  std::string text;
  int max_judgment = 0;
  std::optional<int> best_rating;
};

/// Judged passages with some judgment >= min_judgment whose best rating is
/// below min_rating. Unjudged passages never appear.
std::vector<UncoveredPassage> report_uncovered(const std::vector<QueryResponseSet>& responses,
                                               const std::vector<QueryTestBank>& banks,
                                               const GradeFilter& filter, int min_judgment,
                                               int min_rating = 4);

struct SpuriousEntry {
  std::string query_id;
  std::string entry_id;
  std::string entry_text;
  std::size_t frequency = 0;
  std::vector<std::string> paragraph_ids;  // supporting passages, sorted
};

/// Entries rated >= min_rating on judged passages whose judgments are all
/// <= max_judgment. Sorted by frequency descending, then query_id, entry_id;
/// entries with frequency 0 are omitted.
std::vector<SpuriousEntry> report_spurious(const std::vector<QueryResponseSet>& responses,
                                           const std::vector<QueryTestBank>& banks,
                                           const GradeFilter& filter, int max_judgment,
                                           int min_rating = 4);

std::string render_text(const VerifyGradingReport& report);
std::string render_text(const std::vector<QueryGrid>& grids);
std::string render_text(const std::vector<UncoveredPassage>& passages);
std::string render_text(const std::vector<SpuriousEntry>& entries);

Json to_json(const VerifyGradingReport& report);
Json to_json(const QueryGrid& grid);
Json to_json(const std::vector<QueryGrid>& grids);
Json to_json(const std::vector<UncoveredPassage>& passages);
Json to_json(const std::vector<SpuriousEntry>& entries);

}  // namespace rubric
