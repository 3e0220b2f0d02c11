#include "osd/montecarlo.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <stdexcept>
#include <thread>

#include "osd/exponents.hpp"
#include "osd/gaussian.hpp"

namespace osd {
namespace {

constexpr double kZ95 = 1.959963984540054;

void require(bool cond, const char* msg) {
  if (!cond) throw std::invalid_argument(msg);
}

void mulhilo(std::uint32_t a, std::uint32_t b, std::uint32_t& hi,
             std::uint32_t& lo) {
  const std::uint64_t p = static_cast<std::uint64_t>(a) * b;
  hi = static_cast<std::uint32_t>(p >> 32);
  lo = static_cast<std::uint32_t>(p);
}

std::string format_double(double v) {
  char buf[32];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

int draw_symbol(const Distribution& dist, double u) {
  double acc = 0.0;
  const int last = dist.alphabet_size() - 1;
  for (int x = 0; x < last; ++x) {
    acc += dist[x];
    if (u < acc) return x;
  }
  return last;
}

struct WorkerTally {
  std::array<std::int64_t, 4> outcome{};
  std::vector<std::array<std::int64_t, 4>> per_stratum;
};

}  // namespace

std::array<std::uint32_t, 4> philox4x32(std::array<std::uint32_t, 4> counter,
                                        std::array<std::uint32_t, 2> key) {
  for (int round = 0; round < 10; ++round) {
    if (round > 0) {
      key[0] += 0x9E3779B9u;
      key[1] += 0xBB67AE85u;
    }
    std::uint32_t hi0, lo0, hi1, lo1;
    mulhilo(0xD2511F53u, counter[0], hi0, lo0);
    mulhilo(0xCD9E8D57u, counter[2], hi1, lo1);
    counter = {hi1 ^ counter[1] ^ key[0], lo1, hi0 ^ counter[3] ^ key[1], lo0};
  }
  return counter;
}

double cell_uniform(std::uint64_t seed, std::int64_t trial, int row,
                    std::int64_t time) {
  const std::array<std::uint32_t, 4> counter = {
      static_cast<std::uint32_t>(time), static_cast<std::uint32_t>(row),
      static_cast<std::uint32_t>(trial),
      static_cast<std::uint32_t>(static_cast<std::uint64_t>(trial) >> 32)};
  const std::array<std::uint32_t, 2> key = {
      static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32)};
  const auto block = philox4x32(counter, key);
  const std::uint64_t x =
      (static_cast<std::uint64_t>(block[1]) << 32) | block[0];
  return static_cast<double>(x >> 11) * 0x1.0p-53;
}

SequenceBatch sample_batch(const Hypothesis& truth, const ModelSpec& spec,
                           std::int64_t n, std::uint64_t seed,
                           std::int64_t trial) {
  require(n >= 1, "batch length must be >= 1");
  require(trial >= 0, "trial index must be >= 0");
  std::vector<std::vector<int>> rows(spec.m());
  for (int r = 1; r <= spec.m(); ++r) {
    const Distribution& src = spec.row_source(truth, r);
    std::vector<int>& row = rows[r - 1];
    row.resize(n);
    for (std::int64_t time = 0; time < n; ++time) {
      row[time] = draw_symbol(src, cell_uniform(seed, trial, r, time));
    }
  }
  return SequenceBatch(std::move(rows), spec.alphabet_size());
}

TrialCounts run_trials(const Hypothesis& truth, const ModelSpec& spec,
                       std::int64_t n, double threshold, std::int64_t trials,
                       std::uint64_t seed, int workers, int t_max) {
  require(trials >= 1, "trials must be >= 1");
  require(t_max >= 0, "t_max must be >= 0");
  if (workers <= 0) {
    workers = static_cast<int>(std::thread::hardware_concurrency());
    if (workers <= 0) workers = 1;
  }
  workers = static_cast<int>(
      std::min<std::int64_t>(workers, std::max<std::int64_t>(trials, 1)));
  const int strata = static_cast<int>(std::min<std::int64_t>(
      kBatchStrata, trials));

  const auto stratum_of = [&](std::int64_t trial) {
    // Contiguous index ranges, independent of the worker partition.
    return static_cast<int>((trial * strata) / trials);
  };

  const auto run_range = [&](std::int64_t lo, std::int64_t hi,
                             WorkerTally& tally) {
    tally.per_stratum.assign(strata, {});
    for (std::int64_t trial = lo; trial < hi; ++trial) {
      const SequenceBatch batch = sample_batch(truth, spec, n, seed, trial);
      const Verdict verdict =
          (t_max > 0) ? detect_unknown_t(batch, spec, t_max, threshold)
                      : detect(batch, spec, threshold);
      const int kind = static_cast<int>(classify_outcome(verdict, truth));
      tally.outcome[kind] += 1;
      tally.per_stratum[stratum_of(trial)][kind] += 1;
    }
  };

  std::vector<WorkerTally> tallies(workers);
  if (workers == 1) {
    run_range(0, trials, tallies[0]);
  } else {
    std::vector<std::thread> threads;
    threads.reserve(workers);
    for (int w = 0; w < workers; ++w) {
      const std::int64_t lo = trials * w / workers;
      const std::int64_t hi = trials * (w + 1) / workers;
      threads.emplace_back(
          [&run_range, lo, hi, &tallies, w] { run_range(lo, hi, tallies[w]); });
    }
    for (auto& t : threads) t.join();
  }

  TrialCounts total;
  total.trials = trials;
  total.per_stratum.assign(strata, {});
  for (const WorkerTally& tally : tallies) {
    for (int kind = 0; kind < 4; ++kind) total.outcome[kind] += tally.outcome[kind];
    for (int s = 0; s < strata; ++s) {
      for (int kind = 0; kind < 4; ++kind) {
        total.per_stratum[s][kind] += tally.per_stratum[s][kind];
      }
    }
  }
  return total;
}

std::string spec_digest(const ModelSpec& spec) {
  std::string out = "m" + std::to_string(spec.m()) + "t" +
                    std::to_string(spec.t()) + "x" +
                    std::to_string(spec.alphabet_size()) + ";N:";
  const auto append_dist = [&out](const Distribution& d) {
    for (int x = 0; x < d.alphabet_size(); ++x) {
      if (x > 0) out += ",";
      out += format_double(d[x]);
    }
  };
  append_dist(spec.nominal());
  for (int rank = 1; rank <= spec.t(); ++rank) {
    out += ";A" + std::to_string(rank) + ":";
    append_dist(spec.anomalous(rank));
  }
  return out;
}

TrialEstimate estimate_from_counts(const TrialCounts& counts, Outcome kind,
                                   const Hypothesis& truth,
                                   const ModelSpec& spec, std::int64_t n,
                                   double threshold, std::uint64_t seed) {
  TrialEstimate est;
  est.trials = counts.trials;
  est.outcome_kind = kind;
  est.truth = truth;
  est.seed = seed;
  est.n = n;
  est.threshold = threshold;
  est.spec_digest = spec_digest(spec);

  const double t = static_cast<double>(counts.trials);
  const double hits = static_cast<double>(counts.count(kind));
  const double p = hits / t;
  est.p_hat = p;

  const double z2 = kZ95 * kZ95;
  const double denom = 1.0 + z2 / t;
  const double center = (p + z2 / (2.0 * t)) / denom;
  const double half =
      kZ95 * std::sqrt(p * (1.0 - p) / t + z2 / (4.0 * t * t)) / denom;
  est.wilson_lo = std::max(0.0, center - half);
  est.wilson_hi = std::min(1.0, center + half);

  const int strata = static_cast<int>(counts.per_stratum.size());
  if (strata >= 2) {
    const int k = static_cast<int>(kind);
    double mean = 0.0;
    std::vector<double> means(strata);
    for (int s = 0; s < strata; ++s) {
      std::int64_t size = 0;
      for (int o = 0; o < 4; ++o) size += counts.per_stratum[s][o];
      means[s] = (size > 0)
                     ? static_cast<double>(counts.per_stratum[s][k]) / size
                     : 0.0;
      mean += means[s];
    }
    mean /= strata;
    double var = 0.0;
    for (double m : means) var += (m - mean) * (m - mean);
    var /= (strata - 1);
    const double se = std::sqrt(var / strata);
    est.sigma2_lo = std::max(0.0, mean - 2.0 * se);
    est.sigma2_hi = std::min(1.0, mean + 2.0 * se);
  } else {
    est.sigma2_lo = p;
    est.sigma2_hi = p;
  }
  return est;
}

TrialEstimate estimate_probability(const Hypothesis& truth, Outcome kind,
                                   const ModelSpec& spec, std::int64_t n,
                                   double threshold, std::int64_t trials,
                                   std::uint64_t seed, int workers) {
  const TrialCounts counts =
      run_trials(truth, spec, n, threshold, trials, seed, workers);
  return estimate_from_counts(counts, kind, truth, spec, n, threshold, seed);
}

namespace {

void require_increasing(const std::vector<std::int64_t>& grid,
                        const char* what) {
  require(!grid.empty(), "empty sweep grid");
  for (std::size_t i = 1; i < grid.size(); ++i) {
    if (grid[i] <= grid[i - 1]) throw std::invalid_argument(what);
  }
}

SweepResult sweep_over_thresholds(
    const ModelSpec& spec,
    const std::vector<std::pair<double, double>>& labeled_thresholds,
    const std::vector<std::int64_t>& n_grid, std::int64_t trials,
    std::uint64_t seed, int workers, bool labels_are_eps) {
  // labeled_thresholds holds (label, fixed threshold) pairs; when labels are
  // eps values the threshold is recalibrated per n instead.
  SweepResult result;
  result.axis_name = "n";
  std::vector<Hypothesis> truths = hypothesis_space(spec.m(), spec.t());
  truths.push_back(Hypothesis::reject());
  for (std::int64_t n : n_grid) {
    result.axis.push_back(static_cast<double>(n));
    std::vector<TrialEstimate> row;
    for (const auto& [label, fixed] : labeled_thresholds) {
      double threshold = fixed;
      if (labels_are_eps) {
        threshold = second_order_threshold(n, label, spec).lambda_tilde;
      }
      for (const Hypothesis& truth : truths) {
        const TrialCounts counts =
            run_trials(truth, spec, n, threshold, trials, seed, workers);
        const Outcome kind = (truth.kind() == HypKind::Reject)
                                 ? Outcome::FalseAlarm
                                 : Outcome::FalseReject;
        row.push_back(estimate_from_counts(counts, kind, truth, spec, n,
                                           threshold, seed));
        if (truth.kind() != HypKind::Reject) {
          row.push_back(estimate_from_counts(counts, Outcome::Misclassification,
                                             truth, spec, n, threshold, seed));
        }
      }
    }
    result.rows.push_back(std::move(row));
  }
  return result;
}

}  // namespace

SweepResult sweep_phase_transition(const ModelSpec& spec,
                                   const std::vector<double>& threshold_grid,
                                   const std::vector<std::int64_t>& n_grid,
                                   std::int64_t trials, std::uint64_t seed,
                                   int workers) {
  require(!threshold_grid.empty(), "empty sweep grid");
  require_increasing(n_grid, "n grid must be strictly increasing");
  std::vector<std::pair<double, double>> labeled;
  for (double t : threshold_grid) labeled.emplace_back(t, t);
  return sweep_over_thresholds(spec, labeled, n_grid, trials, seed, workers,
                               false);
}

SweepResult sweep_false_reject(const ModelSpec& spec,
                               const std::vector<double>& eps_grid,
                               const std::vector<std::int64_t>& n_grid,
                               std::int64_t trials, std::uint64_t seed,
                               int workers) {
  require(!eps_grid.empty(), "empty sweep grid");
  require_increasing(n_grid, "n grid must be strictly increasing");
  std::vector<std::pair<double, double>> labeled;
  for (double eps : eps_grid) labeled.emplace_back(eps, 0.0);
  return sweep_over_thresholds(spec, labeled, n_grid, trials, seed, workers,
                               true);
}

EffectOfMSweep sweep_effect_of_m(const Distribution& p_n,
                                 const Distribution& p_a, double eps,
                                 const std::vector<std::int64_t>& n_grid,
                                 const std::vector<int>& m_list) {
  require_increasing(n_grid, "n grid must be strictly increasing");
  require(!m_list.empty(), "empty m list");
  for (int m : m_list) require(m >= 3, "m entries must be >= 3");
  EffectOfMSweep sweep;
  sweep.n = n_grid;
  sweep.m = m_list;
  for (int m : m_list) {
    const ModelSpec spec(m, 1, p_n, {p_a});
    const double gd = gd_single(spec);
    const double level = l_star(eps, spec);
    sweep.gd.push_back(gd);
    sweep.l_star.push_back(level);
    std::vector<double> curve;
    curve.reserve(n_grid.size());
    for (std::int64_t n : n_grid) {
      curve.push_back(gd + level / std::sqrt(static_cast<double>(n)));
    }
    sweep.lambda_tilde.push_back(std::move(curve));
  }
  return sweep;
}

}  // namespace osd
