#include "osd/rejectexp.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <stdexcept>

#include "osd/divergence.hpp"
#include "osd/exponents.hpp"

namespace osd {
namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

using Vec = std::vector<double>;
using Joint = std::vector<Vec>;

void require(bool cond, const char* msg) {
  if (!cond) throw std::invalid_argument(msg);
}

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

double unit_double(std::uint64_t x) {
  return static_cast<double>(splitmix64(x) >> 11) * 0x1.0p-53;
}

double kl_vec(const Vec& a, const Vec& b) {
  double acc = 0.0;
  for (std::size_t x = 0; x < a.size(); ++x) {
    if (a[x] == 0.0) continue;
    if (b[x] == 0.0) return kInf;
    acc += a[x] * std::log(a[x] / b[x]);
  }
  return std::max(acc, 0.0);
}

// Normalized geometric mean of the given rows' targets; the all-equal point
// minimizing the sum of divergences to them. Empty on disjoint supports.
Vec geometric_mean(const std::vector<const Vec*>& targets,
                   const std::vector<char>& use_row) {
  const std::size_t ax = targets[0]->size();
  int count = 0;
  Vec logsum(ax, 0.0);
  std::vector<char> alive(ax, 1);
  for (std::size_t l = 0; l < targets.size(); ++l) {
    if (!use_row[l]) continue;
    ++count;
    for (std::size_t x = 0; x < ax; ++x) {
      if ((*targets[l])[x] <= 0.0) {
        alive[x] = 0;
      } else {
        logsum[x] += std::log((*targets[l])[x]);
      }
    }
  }
  Vec geo(ax, 0.0);
  double total = 0.0;
  for (std::size_t x = 0; x < ax; ++x) {
    if (!alive[x]) continue;
    geo[x] = std::exp(logsum[x] / count);
    total += geo[x];
  }
  if (total <= 0.0) {
    throw std::domain_error("model distributions share no support");
  }
  for (double& g : geo) g /= total;
  return geo;
}

struct PairSolveResult {
  double value = kInf;
  double violation = 0.0;
  double theta = 0.0;
  Joint q;
};

// Minimize sum_l D(Q_l||target_l) subject to G <= lambda for the two score
// groups (excl marks rows left out of a group's average). Exponentiated
// gradient with a doubling quadratic penalty, then a convex pull toward an
// exactly feasible point, so the reported minimizer always satisfies the
// constraints and the value is a true upper bound.
PairSolveResult solve_pair(const std::vector<const Vec*>& targets,
                           const std::vector<char>& excl1,
                           const std::vector<char>& excl2, double lambda,
                           const SolverSettings& settings) {
  const int m = static_cast<int>(targets.size());
  const int ax = static_cast<int>(targets[0]->size());

  std::vector<char> in_block(m);  // rows averaged by at least one group
  for (int l = 0; l < m; ++l) in_block[l] = !excl1[l] || !excl2[l];
  const Vec block_geo = geometric_mean(targets, in_block);

  const auto group_score = [&](const Joint& q, const std::vector<char>& excl,
                               Vec& mean) {
    int count = 0;
    std::fill(mean.begin(), mean.end(), 0.0);
    for (int l = 0; l < m; ++l) {
      if (excl[l]) continue;
      ++count;
      for (int x = 0; x < ax; ++x) mean[x] += q[l][x];
    }
    for (int x = 0; x < ax; ++x) mean[x] /= count;
    double g = 0.0;
    for (int l = 0; l < m; ++l) {
      if (!excl[l]) g += kl_vec(q[l], mean);
    }
    return g;
  };
  const auto objective = [&](const Joint& q) {
    double f = 0.0;
    for (int l = 0; l < m; ++l) f += kl_vec(q[l], *targets[l]);
    return f;
  };

  const auto normalize = [&](Vec& row, const Vec& target) {
    double total = 0.0;
    for (int x = 0; x < ax; ++x) {
      if (target[x] <= 0.0) {
        row[x] = 0.0;
      } else {
        row[x] = std::max(row[x], 1e-30);
      }
      total += row[x];
    }
    for (int x = 0; x < ax; ++x) row[x] /= total;
  };

  const auto initial = [&](int restart) {
    Joint q(m, Vec(ax, 0.0));
    if (restart == 0) {
      for (int l = 0; l < m; ++l) q[l] = *targets[l];
    } else if (restart == 1) {
      // The lambda = 0 optimum: averaged rows equalized, free rows at their
      // targets. Feasible for every lambda.
      for (int l = 0; l < m; ++l) q[l] = in_block[l] ? block_geo : *targets[l];
    } else {
      for (int l = 0; l < m; ++l) {
        for (int x = 0; x < ax; ++x) {
          if ((*targets[l])[x] <= 0.0) continue;
          const std::uint64_t stream = settings.seed ^
                                       (0x9E3779B97F4A7C15ULL * restart) ^
                                       (0xC2B2AE3D27D4EB4FULL * (l + 1)) ^
                                       (0x165667B19E3779F9ULL * (x + 1));
          q[l][x] = -std::log(1.0 - unit_double(stream));
        }
        normalize(q[l], *targets[l]);
      }
    }
    return q;
  };

  PairSolveResult best;
  Vec mean1(ax), mean2(ax), next(ax);
  for (int restart = 0; restart < settings.restarts; ++restart) {
    Joint q = initial(restart);
    constexpr int kStages = 14;
    const int per_stage = std::max(50, settings.max_iters / kStages);
    double rho = 4.0;
    std::int64_t total_it = 0;
    bool settled = false;
    for (int stage = 0; stage < kStages && !settled; ++stage) {
      for (int it = 0; it < per_stage; ++it) {
        const double g1 = group_score(q, excl1, mean1);
        const double g2 = group_score(q, excl2, mean2);
        const double e1 = std::max(0.0, g1 - lambda);
        const double e2 = std::max(0.0, g2 - lambda);
        const double eta =
            settings.step / std::sqrt(1.0 + static_cast<double>(total_it));
        double move = 0.0;
        for (int l = 0; l < m; ++l) {
          const Vec& target = *targets[l];
          for (int x = 0; x < ax; ++x) {
            if (target[x] <= 0.0 || q[l][x] <= 0.0) {
              next[x] = 0.0;
              continue;
            }
            double grad = std::log(q[l][x] / target[x]) + 1.0;
            if (!excl1[l] && e1 > 0.0) {
              grad += 2.0 * rho * e1 * std::log(q[l][x] / mean1[x]);
            }
            if (!excl2[l] && e2 > 0.0) {
              grad += 2.0 * rho * e2 * std::log(q[l][x] / mean2[x]);
            }
            grad = std::clamp(grad, -60.0, 60.0);
            next[x] = q[l][x] * std::exp(-eta * grad);
          }
          normalize(next, target);
          for (int x = 0; x < ax; ++x) {
            move = std::max(move, std::abs(next[x] - q[l][x]));
          }
          std::swap(q[l], next);
        }
        ++total_it;
        if (move < 1e-12 && e1 <= 1e-10 && e2 <= 1e-10) {
          settled = true;
          break;
        }
        if (move < 1e-11) break;  // stuck against the penalty; raise it
      }
      rho *= 2.0;
    }

    // Convex repair: pulling every averaged row theta of the way to one
    // common point scales both scores by at most (1 - theta), so
    // theta = 1 - lambda/G lands exactly feasible (G is jointly convex and
    // zero at any all-equal point). The pull target is the geometric mean of
    // the current rows, which tracks the optimum as lambda shrinks.
    const auto repair = [&](Joint& point) {
      const double g1 = group_score(point, excl1, mean1);
      const double g2 = group_score(point, excl2, mean2);
      double theta = 0.0;
      for (double g : {g1, g2}) {
        if (g > lambda) {
          theta = std::max(theta, lambda <= 0.0 ? 1.0 : 1.0 - lambda / g);
        }
      }
      if (theta > 0.0) {
        std::vector<const Vec*> rows(point.size());
        for (std::size_t l = 0; l < point.size(); ++l) rows[l] = &point[l];
        const Vec pull = geometric_mean(rows, in_block);
        theta = std::min(1.0, theta + 1e-9);
        for (int l = 0; l < m; ++l) {
          if (!in_block[l]) continue;  // rows outside both averages are free
          for (int x = 0; x < ax; ++x) {
            point[l][x] = (1.0 - theta) * point[l][x] + theta * pull[x];
          }
        }
      }
      return theta;
    };

    double theta = repair(q);
    double value = objective(q);

    // Feasible polish: objective-only mirror steps with immediate repair.
    // Every accepted iterate is exactly feasible, so the value only drops;
    // this recovers the slack the penalty endgame leaves at small lambda.
    double eta = 0.5;
    Joint probe = q;
    for (int round = 0; round < 400 && eta > 1e-5; ++round) {
      probe = q;
      for (int l = 0; l < m; ++l) {
        const Vec& target = *targets[l];
        for (int x = 0; x < ax; ++x) {
          if (target[x] <= 0.0 || probe[l][x] <= 0.0) {
            next[x] = 0.0;
            continue;
          }
          const double grad =
              std::clamp(std::log(probe[l][x] / target[x]) + 1.0, -60.0, 60.0);
          next[x] = probe[l][x] * std::exp(-eta * grad);
        }
        normalize(next, target);
        std::swap(probe[l], next);
      }
      const double probe_theta = repair(probe);
      const double probe_value = objective(probe);
      if (probe_value + 1e-14 < value) {
        q = probe;
        value = probe_value;
        theta = probe_theta;
      } else {
        eta *= 0.5;
      }
    }

    const double v1 = std::max(0.0, group_score(q, excl1, mean1) - lambda);
    const double v2 = std::max(0.0, group_score(q, excl2, mean2) - lambda);
    if (value < best.value) {
      best.value = value;
      best.violation = std::max(v1, v2);
      best.theta = theta;
      best.q = std::move(q);
    }
  }
  return best;
}

bool touches_boundary(const Joint& q) {
  for (const Vec& row : q) {
    for (double v : row) {
      if (v > 0.0 && v < 1e-6) return true;
    }
  }
  return false;
}

LdResult finish(const PairSolveResult& best, double lambda,
                const std::vector<int>& pair_j, const std::vector<int>& pair_k,
                const ModelSpec& spec) {
  LdResult out;
  out.value = best.value;
  out.max_violation = best.violation;
  out.pair_j = pair_j;
  out.pair_k = pair_k;
  out.converged =
      best.violation <= 1e-9 && (best.theta <= 0.05 || lambda == 0.0);
  out.near_boundary = touches_boundary(best.q);
  out.minimizer.reserve(best.q.size());
  for (const Vec& row : best.q) out.minimizer.emplace_back(row);
  (void)spec;
  return out;
}

}  // namespace

LdResult ld_single(int i, double lambda, const ModelSpec& spec,
                   const SolverSettings& settings) {
  require(spec.t() == 1, "ld_single requires t = 1");
  require(i >= 1 && i <= spec.m(), "hypothesis index out of range");
  require(lambda >= 0.0, "lambda must be >= 0");
  const int m = spec.m();
  std::vector<const Vec*> targets(m);
  for (int l = 1; l <= m; ++l) {
    targets[l - 1] =
        (l == i) ? &spec.anomalous(1).probs() : &spec.nominal().probs();
  }

  std::map<std::pair<int, int>, PairSolveResult> cache;
  PairSolveResult best;
  std::pair<int, int> best_pair{0, 0};
  for (int j = 1; j <= m; ++j) {
    for (int k = 1; k <= m; ++k) {
      if (j == k) continue;
      const std::pair<int, int> key{std::min(j, k), std::max(j, k)};
      auto it = cache.find(key);
      if (it == cache.end()) {
        std::vector<char> excl1(m, 0), excl2(m, 0);
        excl1[j - 1] = 1;
        excl2[k - 1] = 1;
        it = cache.emplace(key, solve_pair(targets, excl1, excl2, lambda,
                                           settings))
                 .first;
      }
      if (it->second.value < best.value) {
        best = it->second;
        best_pair = {j, k};
      }
    }
  }
  return finish(best, lambda, {best_pair.first}, {best_pair.second}, spec);
}

LdResult ld_multi(double lambda, const ModelSpec& spec,
                  const SolverSettings& settings) {
  require(lambda >= 0.0, "lambda must be >= 0");
  const int m = spec.m();
  const auto sets = enumerate_outlier_sets(m, spec.t());
  // Homogeneous models are exchangeable across rows, so every outer B
  // attains the same minimum; one representative suffices.
  const std::size_t outer = spec.homogeneous() ? 1 : sets.size();

  PairSolveResult best;
  std::vector<int> best_b, best_c;
  for (std::size_t bi = 0; bi < outer; ++bi) {
    const std::vector<int>& b = sets[bi];
    std::vector<const Vec*> targets(m);
    std::vector<char> excl_b(m, 0);
    for (int row : b) excl_b[row - 1] = 1;
    for (int l = 1; l <= m; ++l) {
      targets[l - 1] = excl_b[l - 1]
                           ? &spec.anomalous(set_rank(l, b)).probs()
                           : &spec.nominal().probs();
    }
    for (const std::vector<int>& c : sets) {
      if (c == b) continue;
      std::vector<char> excl_c(m, 0);
      for (int row : c) excl_c[row - 1] = 1;
      const PairSolveResult res =
          solve_pair(targets, excl_b, excl_c, lambda, settings);
      if (res.value < best.value) {
        best = res;
        best_b = b;
        best_c = c;
      }
    }
  }
  return finish(best, lambda, best_b, best_c, spec);
}

double ld_zero_cap(const ModelSpec& spec) {
  const int free_rows = spec.m() - spec.t();
  double best = kInf;
  for (int rank = 1; rank <= spec.t(); ++rank) {
    const Vec& pa = spec.anomalous(rank).probs();
    const Vec& pn = spec.nominal().probs();
    std::vector<const Vec*> targets{&pa};
    std::vector<char> use{1};
    for (int l = 0; l < free_rows; ++l) {
      targets.push_back(&pn);
      use.push_back(1);
    }
    const Vec geo = geometric_mean(targets, use);
    const double value = kl_vec(geo, pa) + free_rows * kl_vec(geo, pn);
    best = std::min(best, value);
  }
  return best;
}

Distribution ld_zero_minimizer(const ModelSpec& spec) {
  const int free_rows = spec.m() - spec.t();
  double best = kInf;
  Vec best_geo;
  for (int rank = 1; rank <= spec.t(); ++rank) {
    const Vec& pa = spec.anomalous(rank).probs();
    const Vec& pn = spec.nominal().probs();
    std::vector<const Vec*> targets{&pa};
    std::vector<char> use{1};
    for (int l = 0; l < free_rows; ++l) {
      targets.push_back(&pn);
      use.push_back(1);
    }
    const Vec geo = geometric_mean(targets, use);
    const double value = kl_vec(geo, pa) + free_rows * kl_vec(geo, pn);
    if (value < best) {
      best = value;
      best_geo = geo;
    }
  }
  return Distribution(best_geo);
}

double f_tradeoff(double e, const ModelSpec& spec,
                  const SolverSettings& settings, bool* converged) {
  require(e >= 0.0, "exponent must be >= 0");
  const double gd =
      (spec.t() == 1) ? gd_single(spec) : gd_multi_min(spec).gd;
  if (e == 0.0) return gd;
  const double cap = ld_zero_cap(spec);
  if (e >= cap) return 0.0;
  const auto ld_value = [&](double lambda) {
    // t = 1 models are exchangeable across rows: LD_i is the same for all i.
    const LdResult res = (spec.t() == 1)
                             ? ld_single(1, lambda, spec, settings)
                             : ld_multi(lambda, spec, settings);
    if (converged && !res.converged) *converged = false;
    return res.value;
  };
  double lo = 0.0;
  double hi = gd;
  // The width sequence is independent of the predicate, so two runs at
  // different e query nested brackets; that makes f exactly non-increasing.
  while (hi - lo > 1e-6) {
    const double mid = 0.5 * (lo + hi);
    if (ld_value(mid) >= e) {
      lo = mid;
    } else {
      hi = mid;
    }
  }
  return lo;
}

namespace {

double binary_kl(double q, double p1, double p0) {
  double acc = 0.0;
  if (q > 0.0) acc += (p1 <= 0.0) ? kInf : q * std::log(q / p1);
  if (q < 1.0) acc += (p0 <= 0.0) ? kInf : (1.0 - q) * std::log((1.0 - q) / p0);
  return acc;
}

}  // namespace

double grid_oracle_ld(const LdProblem& problem) {
  const ModelSpec& spec = problem.spec;
  require(spec.alphabet_size() == 2, "grid oracle requires a binary alphabet");
  require(spec.t() == 1, "grid oracle requires t = 1");
  const int m = spec.m();
  require(m >= 3 && m <= 5, "grid oracle requires 3 <= m <= 5");
  const int r = problem.resolution;
  require(r >= 4, "grid resolution too small");
  require(m <= 4 ? r <= 1024 : r <= 128, "grid too large");
  const int i = problem.hypothesis;
  require(i >= 1 && i <= m, "hypothesis index out of range");
  const double lambda = problem.lambda;
  require(lambda >= 0.0, "lambda must be >= 0");

  const double pn1 = spec.nominal()[1], pn0 = spec.nominal()[0];
  const double pa1 = spec.anomalous(1)[1], pa0 = spec.anomalous(1)[0];

  // Per grid point a: q = a / r, interior only (the boundary band).
  std::vector<double> ent(r, 0.0), f_n(r, 0.0), f_a(r, 0.0);
  for (int a = 1; a < r; ++a) {
    const double q = static_cast<double>(a) / r;
    ent[a] = -q * std::log(q) - (1.0 - q) * std::log(1.0 - q);
    f_n[a] = binary_kl(q, pn1, pn0);
    f_a[a] = binary_kl(q, pa1, pa0);
  }

  // ell[s] completes the group score: for a group of m-1 rows with lattice
  // sum s, G = -sum of entropies + ell[s].
  const int group = m - 1;
  std::vector<double> ell(static_cast<std::size_t>(group) * (r - 1) + 1, 0.0);
  for (int s = group; s <= group * (r - 1); ++s) {
    const double total = static_cast<double>(s) / r;
    const double mean = total / group;
    ell[s] = -total * std::log(mean) -
             (group - total) * std::log(1.0 - mean);
  }

  // Buckets are keyed by the lattice sum of the m-2 rows outside the
  // constraint pair. The per-bucket tables answer: given slack
  // lambda + (entropy of those rows), the cheapest admissible partner
  // coordinate under either cost table.
  const int rest = m - 2;
  const int bucket_lo = rest, bucket_hi = rest * (r - 1);
  struct BucketTable {
    std::vector<double> c_sorted;
    std::vector<double> prefix_n;
    std::vector<double> prefix_a;
  };
  std::vector<BucketTable> tables(bucket_hi + 1);
  {
    std::vector<int> order(r - 1);
    for (int s = bucket_lo; s <= bucket_hi; ++s) {
      BucketTable& table = tables[s];
      for (int a = 1; a < r; ++a) order[a - 1] = a;
      std::vector<double> cval(r, 0.0);
      for (int a = 1; a < r; ++a) cval[a] = ell[a + s] - ent[a];
      std::sort(order.begin(), order.end(),
                [&](int lhs, int rhs) { return cval[lhs] < cval[rhs]; });
      table.c_sorted.resize(r - 1);
      table.prefix_n.resize(r - 1);
      table.prefix_a.resize(r - 1);
      double run_n = kInf, run_a = kInf;
      for (int p = 0; p < r - 1; ++p) {
        const int a = order[p];
        table.c_sorted[p] = cval[a];
        run_n = std::min(run_n, f_n[a]);
        run_a = std::min(run_a, f_a[a]);
        table.prefix_n[p] = run_n;
        table.prefix_a[p] = run_a;
      }
    }
  }

  double best = kInf;
  std::vector<int> rest_rows;
  std::vector<int> idx(rest);
  for (int j = 1; j <= m; ++j) {
    for (int k = j + 1; k <= m; ++k) {
      rest_rows.clear();
      for (int row = 1; row <= m; ++row) {
        if (row != j && row != k) rest_rows.push_back(row);
      }
      const std::vector<double>& cost_j = (j == i) ? f_a : f_n;
      const std::vector<double>& cost_k = (k == i) ? f_a : f_n;

      // Stream every tuple of rest-row coordinates.
      std::fill(idx.begin(), idx.end(), 1);
      while (true) {
        int sum = 0;
        double h_rest = 0.0, f_rest = 0.0;
        for (int p = 0; p < rest; ++p) {
          const int a = idx[p];
          sum += a;
          h_rest += ent[a];
          f_rest += (rest_rows[p] == i) ? f_a[a] : f_n[a];
        }
        const BucketTable& table = tables[sum];
        const double slack = lambda + h_rest + 1e-12;
        const auto end = std::upper_bound(table.c_sorted.begin(),
                                          table.c_sorted.end(), slack);
        if (end != table.c_sorted.begin()) {
          const std::size_t p = static_cast<std::size_t>(
              end - table.c_sorted.begin() - 1);
          const double best_j =
              (&cost_j == &f_a) ? table.prefix_a[p] : table.prefix_n[p];
          const double best_k =
              (&cost_k == &f_a) ? table.prefix_a[p] : table.prefix_n[p];
          best = std::min(best, f_rest + best_j + best_k);
        }
        int pos = rest - 1;
        while (pos >= 0 && idx[pos] == r - 1) {
          idx[pos] = 1;
          --pos;
        }
        if (pos < 0) break;
        ++idx[pos];
      }
    }
  }
  return best;
}

}  // namespace osd
