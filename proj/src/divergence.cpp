#include "osd/divergence.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace osd {

double kl(const Distribution& p, const Distribution& q) {
  if (p.alphabet_size() != q.alphabet_size()) {
    throw std::invalid_argument("kl: alphabet mismatch");
  }
  double sum = 0.0;
  for (int a = 0; a < p.alphabet_size(); ++a) {
    if (p[a] == 0.0) continue;
    if (q[a] == 0.0) return std::numeric_limits<double>::infinity();
    sum += p[a] * std::log(p[a] / q[a]);
  }
  return std::max(sum, 0.0);
}

Distribution mixture(std::span<const Distribution> ds,
                     std::span<const double> weights) {
  if (ds.empty() || ds.size() != weights.size()) {
    throw std::invalid_argument("mixture: need one weight per distribution");
  }
  double wsum = 0.0;
  for (double w : weights) {
    if (!(w >= 0.0)) throw std::invalid_argument("mixture: negative weight");
    wsum += w;
  }
  if (std::fabs(wsum - 1.0) > 1e-12) {
    throw std::invalid_argument("mixture: weights must sum to 1");
  }
  std::vector<double> p(static_cast<size_t>(ds[0].alphabet_size()), 0.0);
  for (size_t j = 0; j < ds.size(); ++j) {
    if (ds[j].alphabet_size() != ds[0].alphabet_size()) {
      throw std::invalid_argument("mixture: alphabet mismatch");
    }
    for (int a = 0; a < ds[0].alphabet_size(); ++a) {
      p[static_cast<size_t>(a)] += weights[j] * ds[j][a];
    }
  }
  // Weighted sums of unit-sum vectors can miss 1 by a few ulp; renormalize.
  double sum = 0.0;
  for (double v : p) sum += v;
  for (double& v : p) v /= sum;
  return Distribution(std::move(p));
}

double g_score(const Hypothesis& h, std::span<const Distribution> types) {
  if (h.is_reject()) {
    throw std::invalid_argument("g_score: reject hypothesis has no score");
  }
  const int m = static_cast<int>(types.size());
  const int t = h.size();
  if (2 * t >= m) throw std::invalid_argument("g_score: candidate set too large");
  const int group = m - t;
  const int k = types[0].alphabet_size();

  std::vector<double> avg(static_cast<size_t>(k), 0.0);
  for (int j = 1; j <= m; ++j) {
    if (h.contains(j)) continue;
    const Distribution& q = types[static_cast<size_t>(j - 1)];
    if (q.alphabet_size() != k) {
      throw std::invalid_argument("g_score: alphabet mismatch");
    }
    for (int a = 0; a < k; ++a) avg[static_cast<size_t>(a)] += q[a] / group;
  }

  double score = 0.0;
  for (int j = 1; j <= m; ++j) {
    if (h.contains(j)) continue;
    const Distribution& q = types[static_cast<size_t>(j - 1)];
    for (int a = 0; a < k; ++a) {
      if (q[a] == 0.0) continue;
      double denom = avg[static_cast<size_t>(a)];
      // The average contains q/group, so denom > 0 whenever q[a] > 0; the
      // saturation branch is defensive only.
      if (denom <= 0.0) return kSaturatedScore;
      score += q[a] * std::log(q[a] / denom);
    }
  }
  return std::min(std::max(score, 0.0), kSaturatedScore);
}

ScoreVector score_vector(const SequenceBatch& batch, const ModelSpec& spec,
                         std::optional<int> max_outliers) {
  if (batch.m() != spec.m()) {
    throw std::invalid_argument("score_vector: batch width != spec.m");
  }
  std::vector<Distribution> types;
  types.reserve(static_cast<size_t>(batch.m()));
  for (int r = 0; r < batch.m(); ++r) {
    types.push_back(
        empirical_type(batch.row(r), spec.alphabet_size()).to_distribution());
  }

  ScoreVector sv;
  sv.hypotheses = max_outliers ? hypothesis_space_union(spec.m(), *max_outliers)
                               : hypothesis_space(spec.m(), spec.t());
  sv.scores.reserve(sv.hypotheses.size());
  for (const Hypothesis& h : sv.hypotheses) {
    sv.scores.push_back(g_score(h, types));
  }

  sv.min_index = 0;
  for (size_t j = 1; j < sv.scores.size(); ++j) {
    if (sv.scores[j] < sv.scores[static_cast<size_t>(sv.min_index)]) {
      sv.min_index = static_cast<int>(j);
    }
  }
  sv.second_min_index = -1;
  for (size_t j = 0; j < sv.scores.size(); ++j) {
    if (static_cast<int>(j) == sv.min_index) continue;
    if (sv.second_min_index < 0 ||
        sv.scores[j] < sv.scores[static_cast<size_t>(sv.second_min_index)]) {
      sv.second_min_index = static_cast<int>(j);
    }
  }
  return sv;
}

std::pair<double, double> kl_sum_decomposition_check(
    int i, std::span<const Distribution> qs, const Distribution& p) {
  const int m = static_cast<int>(qs.size());
  if (i < 1 || i > m) throw std::invalid_argument("index outside [1, m]");

  double lhs = 0.0;
  std::vector<double> avg(static_cast<size_t>(p.alphabet_size()), 0.0);
  for (int j = 1; j <= m; ++j) {
    if (j == i) continue;
    lhs += kl(qs[static_cast<size_t>(j - 1)], p);
    for (int a = 0; a < p.alphabet_size(); ++a) {
      avg[static_cast<size_t>(a)] += qs[static_cast<size_t>(j - 1)][a] / (m - 1);
    }
  }
  double sum = 0.0;
  for (double v : avg) sum += v;
  for (double& v : avg) v /= sum;
  double rhs = (m - 1) * kl(Distribution(avg), p) +
               g_score(Hypothesis::single(i), qs);
  return {lhs, rhs};
}

}  // namespace osd
