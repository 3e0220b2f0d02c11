#pragma once

#include <optional>
#include <span>
#include <utility>
#include <vector>

#include "osd/probs.hpp"

namespace osd {

// Scores that would be +infinity are reported as this saturating value so
// min / second-min stay total-ordered.
inline constexpr double kSaturatedScore = 1e18;

// D(p || q) in nats, with 0 ln(0/q) = 0. Returns +infinity when p puts mass
// where q does not.
double kl(const Distribution& p, const Distribution& q);

// Pointwise convex combination. Weights must be >= 0 and sum to 1 (1e-12).
Distribution mixture(std::span<const Distribution> ds,
                     std::span<const double> weights);

// Generalized divergence score of a non-reject hypothesis: the sum of KL
// divergences of each non-candidate distribution to the average of the
// non-candidate group. Zero iff the group is identical.
double g_score(const Hypothesis& h, std::span<const Distribution> types);

// Scores of every candidate hypothesis on one batch, in canonical
// enumeration order, with the argmin and second-smallest value cached.
struct ScoreVector {
  std::vector<Hypothesis> hypotheses;
  std::vector<double> scores;
  int min_index = -1;         // argmin (first in enumeration order on ties)
  int second_min_index = -1;  // index of the second-smallest value

  double min_value() const { return scores[static_cast<size_t>(min_index)]; }
  double second_min_value() const {
    return scores[static_cast<size_t>(second_min_index)];
  }
};

// Computes empirical types once and scores all candidates: S_t for the
// spec's t, or every set of size 1..max_outliers for the unknown-count
// variant.
ScoreVector score_vector(const SequenceBatch& batch, const ModelSpec& spec,
                         std::optional<int> max_outliers = std::nullopt);

// Both sides of the score decomposition identity
//   sum_{j != i} D(Q_j || P)  =  (M-1) D(avg || P) + G_i(Q),
// used as a test oracle. i is 1-based.
std::pair<double, double> kl_sum_decomposition_check(
    int i, std::span<const Distribution> qs, const Distribution& p);

}  // namespace osd
