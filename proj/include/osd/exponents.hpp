#pragma once

#include <optional>
#include <utility>
#include <vector>

#include "osd/probs.hpp"

namespace osd {

// Information densities of the single-outlier case at one symbol:
//   i1 = ln[(M-1) P_A(x) / ((M-2) P_N(x) + P_A(x))]
//   i2 = ln[(M-1) P_N(x) / ((M-2) P_N(x) + P_A(x))]
// Requires spec.t == 1 and a symbol inside at least one support.
struct InfoDensityPair {
  double i1;
  double i2;
};
InfoDensityPair info_densities_single(int x, const ModelSpec& spec);

// First-order exponent GD_M = E_{P_A}[i1] + (M-2) E_{P_N}[i2].
// Exact summation over the alphabet. Requires spec.t == 1.
double gd_single(const ModelSpec& spec);

// Second-order variance and covariance of the score statistics:
//   var = Var_{P_A}[i1] + (M-2) Var_{P_N}[i2]
//   cov = -GD^2 + E[i1^2] + 2(M-2) E[i1] E[i2]
//         + (M^2 - 5M + 7) E[i2]^2 + (M-3) E[i2^2]
// (equivalently Var_{P_A}[i1] + (M-3) Var_{P_N}[i2]).
struct VarCov {
  double var;
  double cov;
};
VarCov var_cov_single(const ModelSpec& spec);

// Mixture distribution of the multi-outlier pair (b, c):
// average of the sources of the rows outside c, with rows in b taking their
// ranked anomalous distribution. b != c, both size spec.t.
Distribution mix_multi(const std::vector<int>& b, const std::vector<int>& c,
                       const ModelSpec& spec);

// Log-likelihood densities against mix_multi(b, c): one i1 per anomalous
// rank plus the nominal i2.
struct MultiDensities {
  std::vector<double> i1;  // index r-1 holds rank r
  double i2;
};
MultiDensities info_densities_multi(int x, const std::vector<int>& b,
                                    const std::vector<int>& c,
                                    const ModelSpec& spec);

// GD_T(B,C): sum of KL divergences of the row sources outside c to the
// (b, c) mixture.
double gd_multi(const std::vector<int>& b, const std::vector<int>& c,
                const ModelSpec& spec);

// V_T(B,C): same sum with variances of the matching densities.
double var_multi(const std::vector<int>& b, const std::vector<int>& c,
                 const ModelSpec& spec);

// Cov_T(B,C,D): covariance of the summed log-likelihood statistics of the
// pairs (b, c) and (b, d) under truth b. Rows are independent, so this is
// the per-row sum of Cov[u_j(X_j), v_j(X_j)] with u_j / v_j the row's
// density term in each statistic and X_j the row's true source.
double cov_multi(const std::vector<int>& b, const std::vector<int>& c,
                 const std::vector<int>& d, const ModelSpec& spec);

// Two-argument covariance: cov_multi averaged over admissible third sets
// (the off-diagonal entry of the equicorrelated surrogate matrix).
double cov_multi_sym(const std::vector<int>& b, const std::vector<int>& c,
                     const ModelSpec& spec);

struct GdVarCov {
  double gd;
  double var;
  double cov;
};
GdVarCov gd_var_cov_multi(const std::vector<int>& b, const std::vector<int>& c,
                          const ModelSpec& spec);

// Minimum of gd_multi over ordered distinct pairs, with the lexicographically
// first attaining pair.
struct GdMin {
  double gd;
  std::vector<int> b;
  std::vector<int> c;
};
GdMin gd_multi_min(const ModelSpec& spec);

// Homogeneous-anomaly closed form
//   f(M, T, t) = t D(P_A || mix_t) + (M-T-t) D(P_N || mix_t),
//   mix_t = (t P_A + (M-T-t) P_N) / (M-T),
// where t = t_overlap counts the outlier rows outside the competing set.
double homogeneous_gd(int m, int t_outliers, int t_overlap,
                      const Distribution& p_n, const Distribution& p_a);

// Equicorrelated matrix in compressed form: var on the diagonal, cov off it.
// Eigenvalues are var + (side-1) cov (once) and var - cov (side-1 times).
struct EquiMatrix {
  int side;
  double var;
  double cov;

  std::vector<std::vector<double>> dense() const;
  double eigen_lo() const;
  double eigen_hi() const;
};

// Surrogate covariance matrix of the score statistics: side is the number of
// non-reject hypotheses minus 1. For t > 1 the (var, cov) pair comes from
// the gd_multi_min attaining pair.
EquiMatrix cov_matrix(const ModelSpec& spec);

// Bundle of the first- and second-order quantities for reporting.
struct ExponentReport {
  double gd;
  double var;
  double cov;
  EquiMatrix matrix;
  // Attaining pair for t > 1; empty for the single-outlier case.
  std::vector<int> pair_b;
  std::vector<int> pair_c;
};
ExponentReport exponent_report(const ModelSpec& spec);

}  // namespace osd
