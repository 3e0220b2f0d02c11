#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "osd/detector.hpp"
#include "osd/probs.hpp"

namespace osd {

// Philox4x32-10 block cipher (Salmon et al., SC 2011). Pure function of
// (counter, key), so any worker can reproduce any cell of the sample stream.
std::array<std::uint32_t, 4> philox4x32(std::array<std::uint32_t, 4> counter,
                                        std::array<std::uint32_t, 2> key);

// Uniform in [0, 1) for one (seed, trial, row, time) cell.
double cell_uniform(std::uint64_t seed, std::int64_t trial, int row,
                    std::int64_t time);

// One i.i.d. batch under the given truth: anomalous rows draw from their
// assigned anomalous distribution, everything else from the nominal.
// trial extends the counter so harness trials never share cells.
SequenceBatch sample_batch(const Hypothesis& truth, const ModelSpec& spec,
                           std::int64_t n, std::uint64_t seed,
                           std::int64_t trial = 0);

constexpr int kBatchStrata = 100;

// Outcome tallies; per_stratum splits trials into kBatchStrata contiguous
// index ranges so a spread of batch means is available for error bars.
struct TrialCounts {
  std::int64_t trials = 0;
  std::array<std::int64_t, 4> outcome{};  // indexed by Outcome
  std::vector<std::array<std::int64_t, 4>> per_stratum;

  std::int64_t count(Outcome kind) const {
    return outcome[static_cast<int>(kind)];
  }
};

// Runs seeded detection trials. t_max = 0 decides with the spec's own t;
// t_max >= 1 uses the unknown-t candidate union. workers = 0 means all
// hardware threads; the result is identical for every worker count because
// cells are counter-addressed and merges are integer sums.
TrialCounts run_trials(const Hypothesis& truth, const ModelSpec& spec,
                       std::int64_t n, double threshold, std::int64_t trials,
                       std::uint64_t seed, int workers = 0, int t_max = 0);

struct TrialEstimate {
  double p_hat = 0.0;
  std::int64_t trials = 0;
  double wilson_lo = 0.0;
  double wilson_hi = 0.0;
  double sigma2_lo = 0.0;  // batch-means mean minus two standard errors
  double sigma2_hi = 0.0;
  Outcome outcome_kind = Outcome::Correct;
  Hypothesis truth = Hypothesis::reject();
  std::uint64_t seed = 0;
  std::int64_t n = 0;
  double threshold = 0.0;
  std::string spec_digest;
};

std::string spec_digest(const ModelSpec& spec);

TrialEstimate estimate_from_counts(const TrialCounts& counts, Outcome kind,
                                   const Hypothesis& truth,
                                   const ModelSpec& spec, std::int64_t n,
                                   double threshold, std::uint64_t seed);

TrialEstimate estimate_probability(const Hypothesis& truth, Outcome kind,
                                   const ModelSpec& spec, std::int64_t n,
                                   double threshold, std::int64_t trials,
                                   std::uint64_t seed, int workers = 0);

// rows[i] holds the estimates for axis[i]; estimates carry their own
// threshold/truth labels, so one axis point can bundle several series.
struct SweepResult {
  std::string axis_name;
  std::vector<double> axis;  // strictly increasing
  std::vector<std::vector<TrialEstimate>> rows;
};

// False-reject estimates for every non-reject truth at fixed thresholds,
// plus false-alarm estimates under the all-nominal world.
SweepResult sweep_phase_transition(const ModelSpec& spec,
                                   const std::vector<double>& threshold_grid,
                                   const std::vector<std::int64_t>& n_grid,
                                   std::int64_t trials, std::uint64_t seed,
                                   int workers = 0);

// Same sweep with thresholds calibrated per (eps, n): GD + L*(eps)/sqrt(n).
SweepResult sweep_false_reject(const ModelSpec& spec,
                               const std::vector<double>& eps_grid,
                               const std::vector<std::int64_t>& n_grid,
                               std::int64_t trials, std::uint64_t seed,
                               int workers = 0);

// Analytic threshold curves lambda_tilde(n; M) = GD_M + L*_M / sqrt(n);
// no sampling is involved, so this is a dedicated result type.
struct EffectOfMSweep {
  std::vector<std::int64_t> n;  // strictly increasing
  std::vector<int> m;
  std::vector<double> gd;                         // per m
  std::vector<double> l_star;                     // per m
  std::vector<std::vector<double>> lambda_tilde;  // [m index][n index]
};

EffectOfMSweep sweep_effect_of_m(const Distribution& p_n,
                                 const Distribution& p_a, double eps,
                                 const std::vector<std::int64_t>& n_grid,
                                 const std::vector<int>& m_list);

}  // namespace osd
