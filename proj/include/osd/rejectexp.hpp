#pragma once

#include <cstdint>
#include <vector>

#include "osd/probs.hpp"

namespace osd {

// Multistart mirror-descent settings for the constrained LD minimizations.
// Restart seeds derive from seed, so results are pure functions of the input.
struct SolverSettings {
  int restarts = 16;
  int max_iters = 10000;
  double step = 0.5;
  std::uint64_t seed = 0xC0FFEE0D15EA5E5ULL;
};

struct LdResult {
  double value = 0.0;
  bool converged = true;
  double max_violation = 0.0;  // max over constraints of G - lambda, >= 0
  // The constraint pair attaining the outer minimum.
  std::vector<int> pair_j;
  std::vector<int> pair_k;
  std::vector<Distribution> minimizer;  // one per row, feasible
  bool near_boundary = false;  // some minimizer mass within 1e-6 of zero
};

// Smallest achievable false-reject rate objective at score threshold lambda:
// minimize D(Q_i||P_A) + sum_{l != i} D(Q_l||P_N) over joint types Q with
// G_j(Q) <= lambda and G_k(Q) <= lambda for the best pair j != k.
// Requires t = 1. Zero exactly when lambda >= GD.
LdResult ld_single(int i, double lambda, const ModelSpec& spec,
                   const SolverSettings& settings = {});

// The t >= 1 version: outer minimum over ordered distinct (B, C) in S_T^2,
// objective keyed to B (anomalous rows draw their ranked targets). For
// homogeneous models every B gives the same value by row exchangeability,
// so only the first B is solved.
LdResult ld_multi(double lambda, const ModelSpec& spec,
                  const SolverSettings& settings = {});

// Closed form for lambda = 0: both constraints force all averaged rows to a
// common distribution R, free rows sit at their targets, and the best R is
// the normalized geometric mean of one anomalous target and M - T nominals:
//   min over anomalous ranks a of min_R D(R||P_{A,a}) + (M-T) D(R||P_N).
double ld_zero_cap(const ModelSpec& spec);
Distribution ld_zero_minimizer(const ModelSpec& spec);

// f(E): the largest score threshold whose false-reject exponent still meets
// E; sup{lambda in [0, GD]: LD(lambda) >= E} by bisection. f(0) = GD and
// f(E) = 0 past the ld_zero_cap ceiling. Non-increasing in E. converged, if
// supplied, is ANDed with every inner solve's convergence flag.
double f_tradeoff(double e, const ModelSpec& spec,
                  const SolverSettings& settings = {},
                  bool* converged = nullptr);

// Brute-force verification oracle over the discretized binary simplex;
// independent of the mirror-descent path. hypothesis is the outlier row i.
struct LdProblem {
  ModelSpec spec;
  double lambda = 0.0;
  int hypothesis = 1;
  int resolution = 400;  // grid points per coordinate; band 1/resolution
                         // around the simplex boundary is excluded
};

// Exact minimum of the LD objective over the grid (same pair enumeration as
// ld_single); the scan is reorganized per constraint pair but returns the
// identical value to the naive resolution^M sweep. Requires a binary
// alphabet, t = 1, m <= 5, and a tractable resolution.
double grid_oracle_ld(const LdProblem& problem);

}  // namespace osd
