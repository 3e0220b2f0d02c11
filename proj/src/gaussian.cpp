#include "osd/gaussian.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

namespace osd {
namespace {

constexpr double kSqrt2 = 1.4142135623730951;
constexpr double kInvSqrtPi = 0.5641895835477563;

void require(bool cond, const std::string& msg) {
  if (!cond) throw std::invalid_argument(msg);
}

// Gauss-Hermite rule for integral e^{-x^2} f(x) dx; nodes by Newton iteration
// on the recurrence for orthonormal Hermite polynomials.
struct HermiteRule {
  std::vector<double> node;
  std::vector<double> weight;
};

// Evaluates the orthonormal Hermite recurrence at z; returns H~_n(z) and the
// derivative sqrt(2n) H~_{n-1}(z) through pp.
double hermite_value(int n, double z, double& pp) {
  constexpr double kPiQuarterInv = 0.7511255444649425;  // pi^{-1/4}
  double p1 = kPiQuarterInv;
  double p2 = 0.0;
  for (int j = 1; j <= n; ++j) {
    const double p3 = p2;
    p2 = p1;
    p1 = z * std::sqrt(2.0 / j) * p2 -
         std::sqrt(static_cast<double>(j - 1) / j) * p3;
  }
  pp = std::sqrt(2.0 * n) * p2;
  return p1;
}

// Golub-Welsch nodes: eigenvalues of the Jacobi matrix (zero diagonal,
// off-diagonal sqrt(j/2)) by implicit-shift QL. Newton from asymptotic
// guesses loses the root ordering at this order, so eigenvalues it is;
// weights then come from the recurrence at each node.
HermiteRule build_hermite(int n) {
  std::vector<double> d(n, 0.0);
  std::vector<double> e(n, 0.0);
  for (int j = 1; j < n; ++j) e[j - 1] = std::sqrt(j / 2.0);
  for (int l = 0; l < n; ++l) {
    for (int iter = 0; iter < 64; ++iter) {
      int m = l;
      for (; m < n - 1; ++m) {
        const double dd = std::abs(d[m]) + std::abs(d[m + 1]);
        if (std::abs(e[m]) <= std::numeric_limits<double>::epsilon() * dd) {
          break;
        }
      }
      if (m == l) break;
      require(iter + 1 < 64, "hermite eigenvalue iteration stalled");
      double g = (d[l + 1] - d[l]) / (2.0 * e[l]);
      double r = std::hypot(g, 1.0);
      g = d[m] - d[l] + e[l] / (g + std::copysign(r, g));
      double s = 1.0;
      double c = 1.0;
      double p = 0.0;
      int i = m - 1;
      for (; i >= l; --i) {
        double f = s * e[i];
        const double b = c * e[i];
        r = std::hypot(f, g);
        e[i + 1] = r;
        if (r == 0.0) {
          d[i + 1] -= p;
          e[m] = 0.0;
          break;
        }
        s = f / r;
        c = g / r;
        g = d[i + 1] - p;
        r = (d[i] - g) * s + 2.0 * c * b;
        p = s * r;
        d[i + 1] = g + p;
        g = c * r - b;
      }
      if (i >= l) continue;  // hit an exact zero rotation; restart this row
      d[l] -= p;
      e[l] = g;
      e[m] = 0.0;
    }
  }
  std::sort(d.begin(), d.end());
  HermiteRule rule;
  rule.node.resize(n);
  rule.weight.resize(n);
  for (int i = 0; i < n; ++i) {
    double z = d[i];
    double pp = 0.0;
    // One Newton polish; the eigenvalue is already within ~1e-12.
    const double value = hermite_value(n, z, pp);
    z -= value / pp;
    hermite_value(n, z, pp);
    rule.node[i] = z;
    rule.weight[i] = 2.0 / (pp * pp);
  }
  return rule;
}

const HermiteRule& hermite200() {
  static const HermiteRule rule = build_hermite(200);
  return rule;
}

void validate_query(const OrthantQuery& q) {
  require(q.k >= 1, "orthant query needs k >= 1");
  require(std::isfinite(q.threshold), "orthant threshold must be finite");
  require(q.var > 0.0, "orthant variance must be positive");
  const double rho = q.cov / q.var;
  require(rho <= 1.0 + 1e-12, "orthant correlation above 1");
  if (q.k >= 2) {
    require(rho > -1.0 / (q.k - 1) - 1e-12,
            "orthant correlation below the equicorrelated floor");
  }
}

// Conditional tail probability given the shared factor value: with
// Z_j = sqrt(cov) W + sqrt(var - cov) X_j, all k coordinates exceed L iff
// each independent X_j exceeds (L - sqrt(cov) w) / sqrt(var - cov).
double conditional_power(double w, const OrthantQuery& q) {
  const double a = std::sqrt(q.cov);
  const double b = std::sqrt(q.var - q.cov);
  const double tail = std_normal_ccdf((q.threshold - a * w) / b);
  if (tail <= 0.0) return 0.0;
  if (q.k == 1) return tail;
  return std::exp(static_cast<double>(q.k) * std::log(tail));
}

double simpson_segment(double (*f)(double, const OrthantQuery&),
                       const OrthantQuery& q, double a, double b, double fa,
                       double fm, double fb, double whole, double tol,
                       int depth) {
  const double m = 0.5 * (a + b);
  const double lm = 0.5 * (a + m);
  const double rm = 0.5 * (m + b);
  const double flm = f(lm, q);
  const double frm = f(rm, q);
  const double left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
  const double right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
  const double delta = left + right - whole;
  if (depth <= 0 || std::abs(delta) <= 15.0 * tol) {
    return left + right + delta / 15.0;
  }
  return simpson_segment(f, q, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1) +
         simpson_segment(f, q, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1);
}

double gauss_density_times_power(double w, const OrthantQuery& q) {
  return std::exp(-0.5 * w * w) * 0.3989422804014327 * conditional_power(w, q);
}

double positive_rho_adaptive(const OrthantQuery& q) {
  const double a = -9.0;
  const double b = 9.0;
  const double fa = gauss_density_times_power(a, q);
  const double fb = gauss_density_times_power(b, q);
  const double mid = 0.5 * (a + b);
  const double fm = gauss_density_times_power(mid, q);
  const double whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
  return simpson_segment(gauss_density_times_power, q, a, b, fa, fm, fb, whole,
                         1e-11, 60);
}

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

double radical_inverse(std::uint64_t i, int base) {
  double inv = 1.0 / base;
  double f = inv;
  double r = 0.0;
  while (i != 0) {
    r += f * static_cast<double>(i % base);
    i /= base;
    f *= inv;
  }
  return r;
}

std::vector<int> first_primes(int count) {
  std::vector<int> primes;
  for (int v = 2; static_cast<int>(primes.size()) < count; ++v) {
    bool ok = true;
    for (int p : primes) {
      if (p * p > v) break;
      if (v % p == 0) {
        ok = false;
        break;
      }
    }
    if (ok) primes.push_back(v);
  }
  return primes;
}

}  // namespace

double std_normal_cdf(double x) { return 0.5 * std::erfc(-x / kSqrt2); }

double std_normal_ccdf(double x) { return 0.5 * std::erfc(x / kSqrt2); }

double std_normal_quantile(double p) {
  require(p > 0.0 && p < 1.0, "quantile argument outside (0, 1)");
  const double q = p - 0.5;
  if (std::abs(q) <= 0.425) {
    const double r = 0.180625 - q * q;
    const double num =
        (((((((2.5090809287301226727e3 * r + 3.3430575583588128105e4) * r +
              6.7265770927008700853e4) *
                 r +
             4.5921953931549871457e4) *
                r +
            1.3731693765509461125e4) *
               r +
           1.9715909503065514427e3) *
              r +
          1.3314166789178437745e2) *
             r +
         3.3871328727963666080e0);
    const double den =
        (((((((5.2264952788528545610e3 * r + 2.8729085735721942674e4) * r +
              3.9307895800092710610e4) *
                 r +
             2.1213794301586595867e4) *
                r +
            5.3941960214247511077e3) *
               r +
           6.8718700749205790830e2) *
              r +
          4.2313330701600911252e1) *
             r +
         1.0);
    return q * num / den;
  }
  double r = (q < 0.0) ? p : 1.0 - p;
  r = std::sqrt(-std::log(r));
  double z;
  if (r <= 5.0) {
    r -= 1.6;
    const double num =
        (((((((7.74545014278341407640e-4 * r + 2.27238449892691845833e-2) * r +
              2.41780725177450611770e-1) *
                 r +
             1.27045825245236838258e0) *
                r +
            3.64784832476320460504e0) *
               r +
           5.76949722146069140550e0) *
              r +
          4.63033784615654529590e0) *
             r +
         1.42343711074968357734e0);
    const double den =
        (((((((1.05075007164441684324e-9 * r + 5.47593808499534494600e-4) * r +
              1.51986665636164571966e-2) *
                 r +
             1.48103976427480074590e-1) *
                r +
            6.89767334985100004550e-1) *
               r +
           1.67638483018380384940e0) *
              r +
          2.05319162663775882187e0) *
             r +
         1.0);
    z = num / den;
  } else {
    r -= 5.0;
    const double num =
        (((((((2.01033439929228813265e-7 * r + 2.71155556874348757815e-5) * r +
              1.24266094738807843860e-3) *
                 r +
             2.65321895265761230930e-2) *
                r +
            2.96560571828504891230e-1) *
               r +
           1.78482653991729133580e0) *
              r +
          5.46378491116411436990e0) *
             r +
         6.65790464350110377720e0);
    const double den =
        (((((((2.04426310338993978564e-15 * r + 1.42151175831644588870e-7) *
                  r +
              1.84631831751005468180e-5) *
                 r +
             7.86869131145613259100e-4) *
                r +
            1.48753612908506148525e-2) *
               r +
           1.36929880922735805310e-1) *
              r +
          5.99832206555887937690e-1) *
             r +
         1.0);
    z = num / den;
  }
  return (q < 0.0) ? -z : z;
}

double orthant_prob_quadrature(const OrthantQuery& q) {
  validate_query(q);
  require(q.cov >= 0.0, "quadrature path needs nonnegative covariance");
  const double sigma = std::sqrt(q.var);
  if (q.k == 1) return std_normal_ccdf(q.threshold / sigma);
  const double rho = std::min(q.cov / q.var, 1.0);
  if (rho >= 1.0 - 1e-12) return std_normal_ccdf(q.threshold / sigma);
  if (rho == 0.0) {
    return std::pow(std_normal_ccdf(q.threshold / sigma),
                    static_cast<double>(q.k));
  }
  OrthantQuery clamped = q;
  clamped.cov = rho * q.var;
  if (rho > 0.95) return positive_rho_adaptive(clamped);
  const HermiteRule& rule = hermite200();
  double acc = 0.0;
  for (int i = 0; i < static_cast<int>(rule.node.size()); ++i) {
    acc += rule.weight[i] * conditional_power(kSqrt2 * rule.node[i], clamped);
  }
  return std::clamp(acc * kInvSqrtPi, 0.0, 1.0);
}

double orthant_prob_qmc(const OrthantQuery& q) {
  validate_query(q);
  const int k = q.k;
  const double sigma = std::sqrt(q.var);
  if (k == 1) return std_normal_ccdf(q.threshold / sigma);
  // Factor the equicorrelated matrix as (alpha I + beta 11^T)^2.
  const double lo_eig = q.var - q.cov;
  const double hi_eig = q.var + (k - 1) * q.cov;
  require(lo_eig >= 0.0 && hi_eig >= 0.0, "orthant matrix not PSD");
  const double alpha = std::sqrt(lo_eig);
  const double beta = (std::sqrt(hi_eig) - alpha) / k;
  const std::vector<int> primes = first_primes(k);
  constexpr int kReplicates = 8;
  constexpr std::uint64_t kPoints = 1 << 16;
  std::vector<double> shift(k);
  std::vector<double> z(k);
  double total = 0.0;
  for (int rep = 0; rep < kReplicates; ++rep) {
    for (int d = 0; d < k; ++d) {
      const std::uint64_t raw = splitmix64(
          splitmix64(0xD1B54A32D192ED03ULL * (rep + 1)) + 0x9E3779B9ULL * d);
      shift[d] = static_cast<double>(raw >> 11) * 0x1p-53;
    }
    std::int64_t hits = 0;
    for (std::uint64_t i = 1; i <= kPoints; ++i) {
      double sum = 0.0;
      for (int d = 0; d < k; ++d) {
        double u = radical_inverse(i, primes[d]) + shift[d];
        if (u >= 1.0) u -= 1.0;
        u = std::clamp(u, 1e-12, 1.0 - 1e-12);
        z[d] = std_normal_quantile(u);
        sum += z[d];
      }
      bool all_above = true;
      for (int d = 0; d < k; ++d) {
        if (alpha * z[d] + beta * sum <= q.threshold) {
          all_above = false;
          break;
        }
      }
      hits += all_above ? 1 : 0;
    }
    total += static_cast<double>(hits) / static_cast<double>(kPoints);
  }
  return total / kReplicates;
}

double orthant_prob(const OrthantQuery& q) {
  validate_query(q);
  if (q.k == 1 || q.cov >= 0.0) return orthant_prob_quadrature(q);
  return orthant_prob_qmc(q);
}

double l_star_matrix(double eps, const EquiMatrix& matrix) {
  require(eps > 0.0 && eps < 1.0, "eps outside (0, 1)");
  require(matrix.side >= 1, "matrix side must be positive");
  require(matrix.var >= 1e-12, "indistinguishable pair");
  double cov = matrix.cov;
  // Tolerate float-level PSD violations; anything larger is a caller bug.
  require(matrix.side < 2 || cov >= -matrix.var / (matrix.side - 1) - 1e-9,
          "covariance matrix not PSD");
  require(cov <= matrix.var + 1e-9, "covariance exceeds variance");
  cov = std::min(cov, matrix.var);
  if (matrix.side >= 2) cov = std::max(cov, -matrix.var / (matrix.side - 1));
  const auto prob = [&](double level) {
    return orthant_prob({matrix.side, level, matrix.var, cov});
  };
  const double target = 1.0 - eps;
  const double sigma = std::sqrt(matrix.var);
  double lo = -8.0 * sigma - 1.0;
  double hi = 8.0 * sigma + 1.0;
  for (int it = 0; it < 60 && prob(lo) < target; ++it) lo = 2.0 * lo - 1.0;
  require(prob(lo) >= target, "orthant bracket expansion failed low");
  for (int it = 0; it < 60 && prob(hi) >= target; ++it) hi = 2.0 * hi + 1.0;
  require(prob(hi) < target, "orthant bracket expansion failed high");
  while (hi - lo > 1e-7) {
    const double mid = 0.5 * (lo + hi);
    if (prob(mid) >= target) {
      lo = mid;
    } else {
      hi = mid;
    }
  }
  return lo;
}

double l_star(double eps, const ModelSpec& spec,
              const std::optional<std::pair<std::vector<int>, std::vector<int>>>&
                  pair) {
  if (!pair.has_value()) {
    return l_star_matrix(eps, cov_matrix(spec));
  }
  const GdVarCov stats = gd_var_cov_multi(pair->first, pair->second, spec);
  const int side =
      static_cast<int>(hypothesis_space(spec.m(), spec.t()).size()) - 1;
  return l_star_matrix(eps, EquiMatrix{side, stats.var, stats.cov});
}

ThresholdPair second_order_threshold(std::int64_t n, double eps,
                                     const ModelSpec& spec,
                                     double correction) {
  require(n >= 1, "sequence length must be positive");
  require(eps > 0.0 && eps < 1.0, "eps outside (0, 1)");
  const double sqrt_n = std::sqrt(static_cast<double>(n));
  const double alphabet = static_cast<double>(spec.alphabet_size());
  ThresholdPair out;
  if (spec.t() == 1) {
    const double gd = gd_single(spec);
    const double level = l_star_matrix(eps, cov_matrix(spec));
    out.lambda_tilde = gd + level / sqrt_n + correction;
    const double slack =
        (alphabet * std::log((spec.m() - 1) * static_cast<double>(n) + 1.0) +
         2.0 * std::log(static_cast<double>(spec.m()))) /
        static_cast<double>(n);
    out.lambda = out.lambda_tilde - slack;
    return out;
  }
  const auto sets = enumerate_outlier_sets(spec.m(), spec.t());
  const int side = static_cast<int>(sets.size()) - 1;
  double best = std::numeric_limits<double>::infinity();
  // Same tie band as gd_multi_min: exchangeable pairs differ only by
  // rounding noise, and the first pair in enumeration order is reported.
  constexpr double kTie = 1e-12;
  for (const auto& b : sets) {
    for (const auto& c : sets) {
      if (b == c) continue;
      const GdVarCov stats = gd_var_cov_multi(b, c, spec);
      const double level =
          l_star_matrix(eps, EquiMatrix{side, stats.var, stats.cov});
      const double candidate = stats.gd + level / sqrt_n;
      if (candidate < best - kTie) {
        best = candidate;
        out.pair_b = b;
        out.pair_c = c;
      }
    }
  }
  out.lambda_tilde = best + correction;
  const double slack =
      (alphabet *
           std::log((spec.m() - spec.t()) * static_cast<double>(n) + 1.0) +
       2.0 * std::log(static_cast<double>(sets.size()))) /
      static_cast<double>(n);
  out.lambda = out.lambda_tilde - slack;
  return out;
}

}  // namespace osd
