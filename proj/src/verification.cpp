#include "rubric/verification.hpp"

#include <algorithm>
#include <cstdio>
#include <map>
#include <set>

namespace rubric {

namespace {

// Bank entries sorted by id, or the ids seen in grades when no bank exists.
std::vector<std::pair<std::string, std::string>> entries_for(
    const QueryResponseSet& rec, const QueryTestBank* bank, const GradeFilter& filter) {
  std::vector<std::pair<std::string, std::string>> out;
  if (bank) {
    for (const auto& e : bank->items) out.emplace_back(e.entry_id, e.text);
  } else {
    std::set<std::string> seen;
    for (const auto& p : rec.passages) {
      for (const auto& [id, rating] : collect_ratings(p, filter)) seen.insert(id);
    }
    for (const auto& id : seen) out.emplace_back(id, std::string());
  }
  std::sort(out.begin(), out.end());
  return out;
}

std::vector<const QueryResponseSet*> sorted_records(const std::vector<QueryResponseSet>& responses) {
  std::vector<const QueryResponseSet*> out;
  for (const auto& r : responses) out.push_back(&r);
  std::stable_sort(out.begin(), out.end(),
                   [](const auto* a, const auto* b) { return a->query_id < b->query_id; });
  return out;
}

std::string opt_int(const std::optional<int>& v) { return v ? std::to_string(*v) : "-"; }

Json opt_json(const std::optional<int>& v) { return v ? Json(*v) : Json(nullptr); }

}  // namespace

VerifyGradingReport report_verify_grading(const std::vector<QueryResponseSet>& responses,
                                          const std::vector<QueryTestBank>& banks,
                                          const GradeFilter& filter,
                                          const std::optional<GradeFilter>& answer_filter) {
  VerifyGradingReport report;
  const GradeFilter& afilter = answer_filter ? *answer_filter : filter;
  bool any_grade = false;
  for (const auto* rec : sorted_records(responses)) {
    const auto* bank = find_bank(banks, rec->query_id);
    std::map<std::string, VerifyGroup> groups;
    for (const auto& [id, text] : entries_for(*rec, bank, filter)) {
      groups[id] = VerifyGroup{rec->query_id, id, text, {}};
    }
    for (const auto& p : rec->passages) {
      const auto ratings = bank_ratings(p, filter, bank);
      const auto answers = collect_answers(p, afilter);
      if (!select_grades(p, filter).empty()) any_grade = true;
      for (auto& [id, group] : groups) {
        const auto r = ratings.find(id);
        const auto a = answers.find(id);
        if (r == ratings.end() && a == answers.end()) continue;
        VerifyRow row;
        if (r != ratings.end()) row.rating = r->second;
        if (a != answers.end()) row.answer = a->second;
        row.paragraph_id = p.paragraph_id;
        group.rows.push_back(std::move(row));
      }
    }
    for (auto& [id, group] : groups) {
      std::sort(group.rows.begin(), group.rows.end(), [](const VerifyRow& a, const VerifyRow& b) {
        const int ra = a.rating.value_or(-1);
        const int rb = b.rating.value_or(-1);
        if (ra != rb) return ra > rb;
        return a.paragraph_id < b.paragraph_id;
      });
      report.groups.push_back(std::move(group));
    }
  }
  report.no_matching_grades = !any_grade;
  if (!any_grade) report.groups.clear();
  return report;
}

std::vector<QueryGrid> report_grid(const std::vector<QueryResponseSet>& responses,
                                   const std::vector<QueryTestBank>& banks,
                                   const GradeFilter& filter,
                                   const std::optional<GradeFilter>& answer_filter) {
  const GradeFilter& afilter = answer_filter ? *answer_filter : filter;
  std::vector<QueryGrid> grids;
  for (const auto* rec : sorted_records(responses)) {
    const auto* bank = find_bank(banks, rec->query_id);
    QueryGrid grid;
    grid.query_id = rec->query_id;
    for (const auto& [id, text] : entries_for(*rec, bank, filter)) {
      grid.entry_ids.push_back(id);
      grid.entry_texts.push_back(text);
    }
    for (const auto& p : rec->passages) {
      GridRow row;
      row.paragraph_id = p.paragraph_id;
      row.best_rank = p.best_rank();
      row.max_judgment = p.max_judgment();
      const auto ratings = bank_ratings(p, filter, bank);
      const auto answers = collect_answers(p, afilter);
      for (const auto& id : grid.entry_ids) {
        GridCell cell;
        if (auto r = ratings.find(id); r != ratings.end()) cell.rating = r->second;
        if (auto a = answers.find(id); a != answers.end()) cell.answer = a->second;
        row.cells.push_back(std::move(cell));
      }
      grid.rows.push_back(std::move(row));
    }
    std::sort(grid.rows.begin(), grid.rows.end(), [](const GridRow& a, const GridRow& b) {
      if (a.best_rank.has_value() != b.best_rank.has_value()) return a.best_rank.has_value();
      if (a.best_rank && *a.best_rank != *b.best_rank) return *a.best_rank < *b.best_rank;
      return a.paragraph_id < b.paragraph_id;
    });
    grids.push_back(std::move(grid));
  }
  return grids;
}

std::vector<UncoveredPassage> report_uncovered(const std::vector<QueryResponseSet>& responses,
                                               const std::vector<QueryTestBank>& banks,
                                               const GradeFilter& filter, int min_judgment,
                                               int min_rating) {
  std::vector<UncoveredPassage> out;
  for (const auto* rec : sorted_records(responses)) {
    const auto* bank = find_bank(banks, rec->query_id);
    for (const auto& p : rec->passages) {
      const auto judged = p.max_judgment();
      if (!judged || *judged < min_judgment) continue;
      std::optional<int> best;
      for (const auto& [id, rating] : bank_ratings(p, filter, bank)) {
        if (!best || rating > *best) best = rating;
      }
      if (best && *best >= min_rating) continue;
      out.push_back({rec->query_id, p.paragraph_id, p.text, *judged, best});
    }
  }
  std::stable_sort(out.begin(), out.end(), [](const auto& a, const auto& b) {
    return std::tie(a.query_id, a.paragraph_id) < std::tie(b.query_id, b.paragraph_id);
  });
  return out;
}

std::vector<SpuriousEntry> report_spurious(const std::vector<QueryResponseSet>& responses,
                                           const std::vector<QueryTestBank>& banks,
                                           const GradeFilter& filter, int max_judgment,
                                           int min_rating) {
  std::map<std::pair<std::string, std::string>, SpuriousEntry> counts;
  for (const auto* rec : sorted_records(responses)) {
    const auto* bank = find_bank(banks, rec->query_id);
    for (const auto& p : rec->passages) {
      const auto judged = p.max_judgment();
      if (!judged || *judged > max_judgment) continue;
      for (const auto& [id, rating] : bank_ratings(p, filter, bank)) {
        if (rating < min_rating) continue;
        auto& e = counts[{rec->query_id, id}];
        e.query_id = rec->query_id;
        e.entry_id = id;
        if (bank) {
          if (const auto* entry = bank->find(id)) e.entry_text = entry->text;
        }
        ++e.frequency;
        e.paragraph_ids.push_back(p.paragraph_id);
      }
    }
  }
  std::vector<SpuriousEntry> out;
  for (auto& [key, e] : counts) {
    std::sort(e.paragraph_ids.begin(), e.paragraph_ids.end());
    out.push_back(std::move(e));
  }
  std::stable_sort(out.begin(), out.end(), [](const auto& a, const auto& b) {
    return a.frequency > b.frequency;
  });
  return out;
}

std::string render_text(const VerifyGradingReport& report) {
  if (report.no_matching_grades) return "# warning: no grades match the filter\n";
  std::string out;
  std::string query;
  for (const auto& g : report.groups) {
    if (g.query_id != query || out.empty()) {
      query = g.query_id;
      out += "# query " + query + "\n";
    }
    out += "## " + g.entry_id + "  " + g.entry_text + "\n";
    for (const auto& r : g.rows) {
      out += "(rating: " + opt_int(r.rating) + ") " + r.answer + "  [" + r.paragraph_id + "]\n";
    }
    out += "\n";
  }
  return out;
}

std::string render_text(const std::vector<QueryGrid>& grids) {
  std::string out;
  for (const auto& g : grids) {
    out += "# query " + g.query_id + "\n";
    for (std::size_t i = 0; i < g.entry_ids.size(); ++i) {
      out += "E" + std::to_string(i + 1) + " " + g.entry_ids[i] + "  " + g.entry_texts[i] + "\n";
    }
    out += "paragraph_id\trank\tjudgment";
    for (std::size_t i = 0; i < g.entry_ids.size(); ++i) out += "\tE" + std::to_string(i + 1);
    out += "\n";
    for (const auto& r : g.rows) {
      out += r.paragraph_id + "\t" + opt_int(r.best_rank) + "\t" + opt_int(r.max_judgment);
      for (const auto& c : r.cells) out += "\t" + opt_int(c.rating);
      out += "\n";
      for (std::size_t i = 0; i < r.cells.size(); ++i) {
        if (r.cells[i].answer) {
          out += "    E" + std::to_string(i + 1) + ": " + *r.cells[i].answer + "\n";
        }
      }
    }
    out += "\n";
  }
  return out;
}

std::string render_text(const std::vector<UncoveredPassage>& passages) {
  std::string out;
  for (const auto& p : passages) {
    out += "# query " + p.query_id + "  paragraph " + p.paragraph_id + "  judgment " +
           std::to_string(p.max_judgment) + "  best rating " + opt_int(p.best_rating) + "\n";
    out += p.text + "\n\n";
  }
  return out;
}

std::string render_text(const std::vector<SpuriousEntry>& entries) {
  std::map<std::string, std::string> by_query;
  for (const auto& e : entries) {
    char freq[32];
    std::snprintf(freq, sizeof freq, "%-9s", ("(" + std::to_string(e.frequency) + ")").c_str());
    by_query[e.query_id] += freq + (e.entry_text.empty() ? e.entry_id : e.entry_text) + "\n";
  }
  std::string out;
  for (const auto& [q, lines] : by_query) out += "# query " + q + "\n" + lines + "\n";
  return out;
}

Json to_json(const VerifyGradingReport& report) {
  Json groups = Json::array();
  for (const auto& g : report.groups) {
    Json rows = Json::array();
    for (const auto& r : g.rows) {
      rows.push_back({{"rating", opt_json(r.rating)},
                      {"answer", r.answer},
                      {"paragraph_id", r.paragraph_id}});
    }
    groups.push_back({{"query_id", g.query_id},
                      {"entry_id", g.entry_id},
                      {"entry_text", g.entry_text},
                      {"rows", std::move(rows)}});
  }
  return {{"groups", std::move(groups)}, {"no_matching_grades", report.no_matching_grades}};
}

Json to_json(const QueryGrid& g) {
  Json rows = Json::array();
  for (const auto& r : g.rows) {
    Json cells = Json::array();
    for (const auto& c : r.cells) {
      cells.push_back({{"rating", opt_json(c.rating)},
                       {"answer", c.answer ? Json(*c.answer) : Json(nullptr)}});
    }
    rows.push_back({{"paragraph_id", r.paragraph_id},
                    {"best_rank", opt_json(r.best_rank)},
                    {"max_judgment", opt_json(r.max_judgment)},
                    {"cells", std::move(cells)}});
  }
  return {{"query_id", g.query_id},
          {"entry_ids", g.entry_ids},
          {"entry_texts", g.entry_texts},
          {"rows", std::move(rows)}};
}

Json to_json(const std::vector<QueryGrid>& grids) {
  Json out = Json::array();
  for (const auto& g : grids) out.push_back(to_json(g));
  return out;
}

Json to_json(const std::vector<UncoveredPassage>& passages) {
  Json out = Json::array();
  for (const auto& p : passages) {
    out.push_back({{"query_id", p.query_id},
                   {"paragraph_id", p.paragraph_id},
                   {"text", p.text},
                   {"max_judgment", p.max_judgment},
                   {"best_rating", opt_json(p.best_rating)}});
  }
  return out;
}

Json to_json(const std::vector<SpuriousEntry>& entries) {
  Json out = Json::array();
  for (const auto& e : entries) {
    out.push_back({{"query_id", e.query_id},
                   {"entry_id", e.entry_id},
                   {"entry_text", e.entry_text},
                   {"frequency", e.frequency},
                   {"paragraph_ids", e.paragraph_ids}});
  }
  return out;
}

}  // namespace rubric
