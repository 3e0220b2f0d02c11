#pragma once

#include <optional>
#include <utility>
#include <vector>

#include "osd/exponents.hpp"
#include "osd/probs.hpp"

namespace osd {

double std_normal_cdf(double x);
double std_normal_ccdf(double x);
// Inverse standard normal CDF (Wichura's AS241), |error| < 1e-15.
double std_normal_quantile(double p);

// P(Z_1 > L, ..., Z_k > L) for a zero-mean equicorrelated Gaussian with
// common variance var and common covariance cov.
// Valid range: cov/var in (-1/(k-1), 1].
struct OrthantQuery {
  int k;
  double threshold;
  double var;
  double cov;
};

// Dispatches on the correlation sign: one-factor conditioning quadrature for
// cov >= 0 (Gauss-Hermite, adaptive refinement near rho = 1), randomized
// quasi-Monte Carlo otherwise. Absolute accuracy target 1e-5.
double orthant_prob(const OrthantQuery& q);

// The two computation paths, exposed for cross-validation.
double orthant_prob_quadrature(const OrthantQuery& q);  // requires cov >= 0
double orthant_prob_qmc(const OrthantQuery& q);

// Largest L with orthant probability >= 1 - eps for the given equicorrelated
// matrix; bisection to 1e-7 after geometric bracket expansion.
double l_star_matrix(double eps, const EquiMatrix& matrix);

// L* of a model: the matrix comes from cov_matrix(spec) for t = 1 or from
// the given (b, c) pair for t > 1 (side = #hypotheses - 1).
double l_star(double eps, const ModelSpec& spec,
              const std::optional<std::pair<std::vector<int>, std::vector<int>>>&
                  pair = std::nullopt);

// Score threshold calibrated to false-reject level eps at length n:
//   lambda_tilde = GD + L*/sqrt(n) + correction   (detector threshold)
//   lambda       = lambda_tilde - (|X| ln((M-T)n+1) + 2 ln #hyps)/n
// (the achievability-bound rate). For t > 1 the minimum over distinct
// ordered pairs is taken and the attaining pair reported.
struct ThresholdPair {
  double lambda_tilde;
  double lambda;
  std::vector<int> pair_b;  // empty for t = 1
  std::vector<int> pair_c;
};
ThresholdPair second_order_threshold(std::int64_t n, double eps,
                                     const ModelSpec& spec,
                                     double correction = 0.0);

}  // namespace osd
