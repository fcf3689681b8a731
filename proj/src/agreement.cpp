#include "rubric/agreement.hpp"

#include <algorithm>
#include <array>
#include <cstdio>

#include "rubric/error.hpp"
#include "rubric/evaluation.hpp"

namespace rubric {

double cohen_kappa(long long tp, long long fp, long long fn, long long tn) {
  if (tp < 0 || fp < 0 || fn < 0 || tn < 0) throw ValidationError("counts must not be negative");
  const double n = static_cast<double>(tp + fp + fn + tn);
  if (n == 0) throw ValidationError("kappa undefined for an empty table");
  const double po = static_cast<double>(tp + tn) / n;
  const double pe = (static_cast<double>(tp + fp) * static_cast<double>(tp + fn) +
                     static_cast<double>(fn + tn) * static_cast<double>(fp + tn)) /
                    (n * n);
  if (pe >= 1.0) return 0.0;
  return (po - pe) / (1.0 - pe);
}

std::string to_string(Binarization scheme) {
  switch (scheme) {
    case Binarization::graded: return "GRADED";
    case Binarization::merge: return "MERGE";
    case Binarization::lenient: return "LENIENT";
    case Binarization::strict: return "STRICT";
  }
  return "GRADED";
}

namespace {

struct RowSpec {
  std::string label;
  int lo;  // label range [lo, hi]
  int hi;
  std::size_t positive_column;
};

ContingencyTable make_table(Binarization scheme, int min_answers, std::vector<std::string> columns,
                            const std::vector<RowSpec>& specs,
                            const std::vector<LabelJudgment>& pairs, auto&& column_of) {
  ContingencyTable t;
  t.scheme = scheme;
  t.min_answers = min_answers;
  t.columns = std::move(columns);
  for (const auto& s : specs) {
    ContingencyRow row;
    row.label = s.label;
    row.counts.assign(t.columns.size(), 0);
    row.positive_column = s.positive_column;
    t.rows.push_back(std::move(row));
  }
  std::vector<long long> column_totals(t.columns.size(), 0);
  for (const auto& [raw_label, judgment] : pairs) {
    const int label = std::clamp(raw_label, 0, 5);
    const std::size_t col = column_of(judgment);
    for (std::size_t r = 0; r < specs.size(); ++r) {
      if (label >= specs[r].lo && label <= specs[r].hi) {
        ++t.rows[r].counts[col];
        ++t.rows[r].total;
        ++column_totals[col];
        ++t.total;
        break;
      }
    }
  }
  for (auto& row : t.rows) {
    if (t.total == 0) break;
    const long long tp = row.counts[row.positive_column];
    const long long fp = row.total - tp;
    const long long fn = column_totals[row.positive_column] - tp;
    const long long tn = t.total - tp - fp - fn;
    row.kappa = cohen_kappa(tp, fp, fn, tn);
  }
  return t;
}

}  // namespace

std::vector<ContingencyTable> build_agreement_tables(const std::vector<LabelJudgment>& pairs,
                                                     int min_answers, int min_relevant_judgment) {
  std::vector<ContingencyTable> out;
  out.push_back(make_table(
      Binarization::graded, min_answers, {"3", "2", "1", "0"},
      {{"5", 5, 5, 0}, {"4", 4, 4, 0}, {"3", 3, 3, 1}, {"2", 2, 2, 1}, {"1", 1, 1, 1}, {"0", 0, 0, 3}},
      pairs, [](int j) -> std::size_t { return j >= 3 ? 0 : j == 2 ? 1 : j == 1 ? 2 : 3; }));
  out.push_back(make_table(Binarization::merge, min_answers, {"3", "2", "<=1"},
                           {{"4+5", 4, 5, 0}, {"1+2+3", 1, 3, 1}, {"0", 0, 0, 2}}, pairs,
                           [](int j) -> std::size_t { return j >= 3 ? 0 : j == 2 ? 1 : 2; }));
  const std::string r = std::to_string(min_relevant_judgment);
  auto binary = [&](int j) -> std::size_t { return j >= min_relevant_judgment ? 0 : 1; };
  out.push_back(make_table(Binarization::lenient, min_answers, {">=" + r, "<" + r},
                           {{"1+2+3+4+5", 1, 5, 0}, {"0", 0, 0, 1}}, pairs, binary));
  out.push_back(make_table(Binarization::strict, min_answers, {">=" + r, "<" + r},
                           {{"4+5", 4, 5, 0}, {"0+1+2+3", 0, 3, 1}}, pairs, binary));
  return out;
}

std::vector<LabelJudgment> label_judgment_pairs(const std::vector<QueryResponseSet>& responses,
                                                const GradeFilter& filter, int min_answers,
                                                const std::vector<QueryTestBank>* banks) {
  std::vector<LabelJudgment> pairs;
  for (const auto& rec : responses) {
    const QueryTestBank* bank = banks ? find_bank(*banks, rec.query_id) : nullptr;
    for (const auto& p : rec.passages) {
      const auto judgment = p.max_judgment();
      if (!judgment) continue;
      const auto label = passage_label(p, filter, LabelScheme::max_grade, 0, min_answers, bank);
      if (label.hole) continue;
      pairs.emplace_back(label.label, *judgment);
    }
  }
  if (pairs.empty()) throw ValidationError("no passage carries both a judgment and a matching grade");
  return pairs;
}

std::vector<ContingencyTable> agreement_tables(const std::vector<QueryResponseSet>& responses,
                                               const GradeFilter& filter, int min_answers,
                                               int min_relevant_judgment,
                                               const std::vector<QueryTestBank>* banks) {
  return build_agreement_tables(label_judgment_pairs(responses, filter, min_answers, banks),
                                min_answers, min_relevant_judgment);
}

namespace {

std::string format_kappa(double k, const char* fmt) {
  char buf[32];
  std::snprintf(buf, sizeof buf, fmt, k);
  std::string s = buf;
  return s == "-0" || s == "-0.0000" ? s.substr(1) : s;
}

std::string latex_escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    if (c == '-') {
      out += "{-}";
    } else if (c == '<') {
      out += "$\\leq$";
    } else if (c == '>') {
      out += "$\\geq$";
    } else if (c == '=') {
      continue;
    } else {
      out.push_back(c);
    }
  }
  return out;
}

}  // namespace

std::string render_latex(const std::vector<ContingencyTable>& tables) {
  std::string out;
  int current_m = -1;
  for (const auto& t : tables) {
    if (t.min_answers != current_m) {
      current_m = t.min_answers;
      out += "\\section{Min Answers= " + std::to_string(current_m) + "}\n\n";
    }
    out += "\\begin{tabular}{@{}ll" + std::string(t.columns.size(), 'c') + "lr@{}}\n\\toprule\n";
    out += "\\multirow{" + std::to_string(t.rows.size() + 3) + "}{*}{\\begin{sideways}" +
           to_string(t.scheme) + "\\end{sideways}}&\\textbf{Label}&\\multicolumn{" +
           std::to_string(t.columns.size()) +
           "}{c}{\\textbf{Judgments}}&\\textbf{Total}&\\textbf{Cohen's }$\\boldsymbol{\\kappa}$\\\\\n";
    out += "&";
    for (const auto& c : t.columns) out += "&" + latex_escape(c);
    out += "&&\\\\\n\\midrule\n";
    for (const auto& row : t.rows) {
      out += "&" + row.label;
      for (std::size_t c = 0; c < row.counts.size(); ++c) {
        const std::string n = std::to_string(row.counts[c]);
        out += "&" + (c == row.positive_column ? "\\fbox{" + n + "}" : n);
      }
      out += "&" + std::to_string(row.total) + "&" + latex_escape(format_kappa(row.kappa, "%.2g")) +
             "\\\\\n";
    }
    out += "\\bottomrule\n\\end{tabular}\n\\par\n\n";
  }
  return out;
}

std::string render_text(const std::vector<ContingencyTable>& tables) {
  std::string out;
  for (const auto& t : tables) {
    out += to_string(t.scheme) + " min_answers=" + std::to_string(t.min_answers) + "\n";
    out += "label";
    for (const auto& c : t.columns) out += "\t" + c;
    out += "\ttotal\tkappa\n";
    for (const auto& row : t.rows) {
      out += row.label;
      for (auto n : row.counts) out += "\t" + std::to_string(n);
      out += "\t" + std::to_string(row.total) + "\t" + format_kappa(row.kappa, "%.4f") + "\n";
    }
    out += "\n";
  }
  return out;
}

Json to_json(const ContingencyTable& table) {
  Json rows = Json::array();
  for (const auto& r : table.rows) {
    rows.push_back({{"label", r.label},
                    {"counts", r.counts},
                    {"positive_column", r.positive_column},
                    {"total", r.total},
                    {"kappa", r.kappa}});
  }
  return {{"scheme", to_string(table.scheme)},
          {"min_answers", table.min_answers},
          {"columns", table.columns},
          {"total", table.total},
          {"rows", std::move(rows)}};
}

}  // namespace rubric
