#include "osd/detector.hpp"

#include <stdexcept>

namespace osd {
namespace {

Verdict decide(const ScoreVector& scores, double threshold) {
  if (!(threshold >= 0.0)) {
    throw std::invalid_argument("detection threshold must be >= 0");
  }
  Verdict v;
  v.threshold = threshold;
  v.min_score = scores.min_value();
  v.second_min_score = scores.second_min_value();
  v.margin = v.second_min_score - threshold;
  v.argmin = scores.hypotheses[scores.min_index];
  // An exact tie leaves two competitive hypotheses, so it rejects even when
  // the threshold sits below both scores.
  const bool tie = scores.second_min_value() == scores.min_value();
  v.hypothesis = (v.second_min_score <= threshold || tie)
                     ? Hypothesis::reject()
                     : v.argmin;
  return v;
}

}  // namespace

Verdict detect(const SequenceBatch& batch, const ModelSpec& spec,
               double threshold) {
  return decide(score_vector(batch, spec), threshold);
}

Verdict detect_unknown_t(const SequenceBatch& batch, const ModelSpec& spec,
                         int t_max, double threshold) {
  if (t_max < 1 || 2 * t_max >= spec.m()) {
    throw std::invalid_argument("t_max out of range");
  }
  return decide(score_vector(batch, spec, t_max), threshold);
}

const char* outcome_name(Outcome outcome) {
  switch (outcome) {
    case Outcome::Correct:
      return "Correct";
    case Outcome::Misclassification:
      return "Misclassification";
    case Outcome::FalseReject:
      return "FalseReject";
    case Outcome::FalseAlarm:
      return "FalseAlarm";
  }
  return "Unknown";
}

Outcome classify_outcome(const Verdict& verdict, const Hypothesis& truth) {
  const bool verdict_reject = verdict.hypothesis.kind() == HypKind::Reject;
  const bool truth_reject = truth.kind() == HypKind::Reject;
  if (truth_reject) {
    return verdict_reject ? Outcome::Correct : Outcome::FalseAlarm;
  }
  if (verdict_reject) return Outcome::FalseReject;
  return (verdict.hypothesis == truth) ? Outcome::Correct
                                       : Outcome::Misclassification;
}

}  // namespace osd
