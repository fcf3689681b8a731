#pragma once

// Agreement tables over the TREC DL 2020 judgments (11,386 passages), one set
// per min-answers setting, with their kappa values rounded to two places.

#include <array>
#include <vector>

#include "rubric/agreement.hpp"
#include "rubric/core_model.hpp"

namespace testing_support {

struct ReferenceRow {
  int label;
  std::array<long long, 4> counts;  // judgments 3, 2, 1, 0
  double expected_kappa;
};

struct ReferenceBinary {
  std::array<long long, 4> counts;  // tp, fp, fn, tn
  double expected_kappa;
};

struct ReferenceTables {
  int min_answers;
  std::vector<ReferenceRow> graded;                  // labels 5..0
  std::array<double, 3> merge_kappa;                // rows 4+5, 1+2+3, 0
  double lenient_kappa;
  double strict_kappa;
  ReferenceBinary lenient;
  ReferenceBinary strict;
};

inline constexpr long long kDl20Passages = 11386;
inline constexpr double kKappaTolerance = 0.005;

const std::vector<ReferenceTables>& dl20_question_tables();
/// The same layout for the nugget-based labels.
const std::vector<ReferenceTables>& dl20_nugget_tables();

/// One (label, judgment) pair per counted passage of the GRADED table.
std::vector<rubric::LabelJudgment> table_pairs(const ReferenceTables& t);

/// Responses whose passages reproduce the GRADED table under
/// passage_label(max_grade, min_answers): ratings are (m-1) fives, then the
/// label, then zeros, over m+1 entries.
std::vector<rubric::QueryResponseSet> table_responses(const ReferenceTables& t,
                                                         const std::string& prompt_class);

}  // namespace testing_support
