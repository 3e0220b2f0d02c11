#pragma once

#include "osd/divergence.hpp"
#include "osd/probs.hpp"

namespace osd {

// Decision for one batch. hypothesis is Reject exactly when
// second_min_score <= threshold or the two best scores tie; argmin is the
// best-scoring candidate either way.
struct Verdict {
  Hypothesis hypothesis = Hypothesis::reject();
  double min_score = 0.0;
  double second_min_score = 0.0;
  double threshold = 0.0;
  double margin = 0.0;  // second_min_score - threshold
  Hypothesis argmin = Hypothesis::reject();
};

Verdict detect(const SequenceBatch& batch, const ModelSpec& spec,
               double threshold);

// Same rule with candidate outlier sets of every size 1..t_max.
// spec supplies the nominal/anomalous pair; requires 2 * t_max < m.
Verdict detect_unknown_t(const SequenceBatch& batch, const ModelSpec& spec,
                         int t_max, double threshold);

enum class Outcome { Correct, Misclassification, FalseReject, FalseAlarm };

const char* outcome_name(Outcome outcome);

Outcome classify_outcome(const Verdict& verdict, const Hypothesis& truth);

}  // namespace osd
