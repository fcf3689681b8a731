#pragma once

// TREC plain-text interchange: run files "qid Q0 docid rank score tag" and
// qrels "qid 0 docid relevance". Columns are whitespace separated.

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "rubric/core_model.hpp"

namespace rubric {

/// Blank lines are skipped. Column-count, rank and score violations raise
/// ParseError; a repeated rank within (tag, qid) raises DuplicateRankError.
std::vector<RankingEntry> parse_run(std::string_view text);
std::vector<RankingEntry> parse_run_file(const std::filesystem::path& path);

/// Judgment.query holds the query id. A repeated (qid, docid) pair is a
/// ParseError.
std::vector<Judgment> parse_qrels(std::string_view text);
std::vector<Judgment> parse_qrels_file(const std::filesystem::path& path);

struct QrelsLine {
  std::string query_id;
  std::string paragraph_id;
  int label = 0;

  bool operator==(const QrelsLine&) const = default;
};

/// "qid 0 docid label" lines sorted by query id, then paragraph id.
std::string format_qrels(std::vector<QrelsLine> lines);

std::string format_run(const std::vector<RankingEntry>& entries);

}  // namespace rubric
