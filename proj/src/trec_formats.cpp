#include "rubric/trec_formats.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <map>
#include <set>

#include "rubric/error.hpp"
#include "rubric/gzip_io.hpp"
#include "rubric/text.hpp"

namespace rubric {

namespace {

template <typename F>
void for_each_line(std::string_view text, F&& f) {
  std::size_t line_no = 0;
  std::size_t offset = 0;
  while (offset < text.size()) {
    ++line_no;
    auto end = text.find('\n', offset);
    if (end == std::string_view::npos) end = text.size();
    auto line = text.substr(offset, end - offset);
    const auto line_offset = offset;
    offset = end + 1;
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    const auto cols = text::split_words(line);
    if (cols.empty()) continue;
    f(cols, line_no, line_offset);
  }
}

int parse_int(std::string_view s, const char* what, std::size_t line, std::size_t offset) {
  int value = 0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), value);
  if (ec != std::errc() || ptr != s.data() + s.size()) {
    throw ParseError(std::string(what) + " '" + std::string(s) + "' is not an integer", line, offset);
  }
  return value;
}

double parse_score(std::string_view s, std::size_t line, std::size_t offset) {
  const std::string str(s);
  char* end = nullptr;
  const double value = std::strtod(str.c_str(), &end);
  if (str.empty() || end != str.c_str() + str.size() || !std::isfinite(value)) {
    throw ParseError("score '" + str + "' is not a finite number", line, offset);
  }
  return value;
}

}  // namespace

std::vector<RankingEntry> parse_run(std::string_view text) {
  std::vector<RankingEntry> out;
  std::set<std::tuple<std::string, std::string, int>> seen;
  for_each_line(text, [&](const std::vector<std::string_view>& cols, std::size_t line,
                          std::size_t offset) {
    if (cols.size() != 6) {
      throw ParseError("run line has " + std::to_string(cols.size()) + " columns, expected 6",
                       line, offset);
    }
    RankingEntry e;
    e.query_id = std::string(cols[0]);
    e.paragraph_id = std::string(cols[2]);
    e.rank = parse_int(cols[3], "rank", line, offset);
    if (e.rank < 1) throw ParseError("rank must be at least 1", line, offset);
    e.score = parse_score(cols[4], line, offset);
    e.method = std::string(cols[5]);
    if (!seen.emplace(e.method, e.query_id, e.rank).second) {
      throw DuplicateRankError("rank " + std::to_string(e.rank) + " repeated for run '" +
                                   e.method + "', query '" + e.query_id + "'",
                               line);
    }
    out.push_back(std::move(e));
  });
  return out;
}

std::vector<RankingEntry> parse_run_file(const std::filesystem::path& path) {
  return parse_run(io::read_text_file(path));
}

std::vector<Judgment> parse_qrels(std::string_view text) {
  std::vector<Judgment> out;
  std::set<std::pair<std::string, std::string>> seen;
  for_each_line(text, [&](const std::vector<std::string_view>& cols, std::size_t line,
                          std::size_t offset) {
    if (cols.size() != 4) {
      throw ParseError("qrels line has " + std::to_string(cols.size()) + " columns, expected 4",
                       line, offset);
    }
    Judgment j;
    j.query = std::string(cols[0]);
    j.paragraph_id = std::string(cols[2]);
    j.relevance = parse_int(cols[3], "relevance", line, offset);
    if (!seen.emplace(j.query, j.paragraph_id).second) {
      throw ParseError("duplicate judgment for '" + j.paragraph_id + "'", line, offset);
    }
    out.push_back(std::move(j));
  });
  return out;
}

std::vector<Judgment> parse_qrels_file(const std::filesystem::path& path) {
  return parse_qrels(io::read_text_file(path));
}

std::string format_qrels(std::vector<QrelsLine> lines) {
  std::sort(lines.begin(), lines.end(), [](const QrelsLine& a, const QrelsLine& b) {
    return std::tie(a.query_id, a.paragraph_id) < std::tie(b.query_id, b.paragraph_id);
  });
  std::string out;
  for (const auto& l : lines) {
    out += l.query_id + " 0 " + l.paragraph_id + " " + std::to_string(l.label) + "\n";
  }
  return out;
}

std::string format_run(const std::vector<RankingEntry>& entries) {
  std::string out;
  char score[64];
  for (const auto& e : entries) {
    std::snprintf(score, sizeof score, "%.17g", e.score);
    out += e.query_id + " Q0 " + e.paragraph_id + " " + std::to_string(e.rank) + " " + score +
           " " + e.method + "\n";
  }
  return out;
}

}  // namespace rubric
