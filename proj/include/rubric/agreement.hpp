#pragma once

// Inter-annotator agreement between grade-derived labels (0..5) and manual
// judgments, as the GRADED / MERGE / LENIENT / STRICT contingency tables.

#include <string>
#include <utility>
#include <vector>

#include "rubric/core_model.hpp"
#include "rubric/testbank.hpp"

namespace rubric {

/// (po - pe) / (1 - pe) over a 2x2 table; 0 when pe = 1. Throws
/// ValidationError when every count is zero.
double cohen_kappa(long long tp, long long fp, long long fn, long long tn);

enum class Binarization { graded, merge, lenient, strict };

std::string to_string(Binarization scheme);

struct ContingencyRow {
  std::string label;                // e.g. "5", "4+5", "0+1+2+3"
  std::vector<long long> counts;    // per judgment column
  std::size_t positive_column = 0;  // column counted as agreement
  long long total = 0;
  double kappa = 0.0;              // one-vs-rest
};

struct ContingencyTable {
  Binarization scheme = Binarization::graded;
  int min_answers = 1;
  std::vector<std::string> columns;
  std::vector<ContingencyRow> rows;
  long long total = 0;
};

/// One (label, judgment) observation per passage.
using LabelJudgment = std::pair<int, int>;

/// Builds the four tables from observations. Labels are clamped to 0..5.
/// GRADED: label rows 5..0 against judgment columns 3, 2, 1, <=0.
/// MERGE: rows 4+5, 1+2+3, 0 against columns 3, 2, <=1.
/// LENIENT / STRICT: label >= 1 / >= 4 against judgment >= min_relevant_judgment.
std::vector<ContingencyTable> build_agreement_tables(const std::vector<LabelJudgment>& pairs,
                                                     int min_answers, int min_relevant_judgment);

/// Passages carrying both a judgment (maximum taken) and a matching grade,
/// labeled by max_grade with `min_answers`. Throws ValidationError when no
/// passage qualifies.
std::vector<LabelJudgment> label_judgment_pairs(const std::vector<QueryResponseSet>& responses,
                                                const GradeFilter& filter, int min_answers,
                                                const std::vector<QueryTestBank>* banks = nullptr);

std::vector<ContingencyTable> agreement_tables(const std::vector<QueryResponseSet>& responses,
                                               const GradeFilter& filter, int min_answers,
                                               int min_relevant_judgment,
                                               const std::vector<QueryTestBank>* banks = nullptr);

std::string render_latex(const std::vector<ContingencyTable>& tables);
std::string render_text(const std::vector<ContingencyTable>& tables);
Json to_json(const ContingencyTable& table);

}  // namespace rubric
