#include "osd/exponents.hpp"

#include <cmath>
#include <stdexcept>

#include "osd/divergence.hpp"

namespace osd {

namespace {

void require(bool ok, const std::string& msg) {
  if (!ok) throw std::invalid_argument(msg);
}

void require_single(const ModelSpec& spec) {
  require(spec.t() == 1, "single-outlier exponent needs t == 1");
  require(spec.m() >= 3, "single-outlier exponent needs m >= 3");
}

// Mean and variance of a density function given as per-symbol values,
// under weights w. Symbols with w = 0 are skipped (0 ln 0 convention).
struct Moments {
  double mean = 0.0;
  double mean_sq = 0.0;
  double var() const { return mean_sq - mean * mean; }
};

Moments moments(const std::vector<double>& values, const Distribution& w) {
  Moments mo;
  for (int a = 0; a < w.alphabet_size(); ++a) {
    if (w[a] == 0.0) continue;
    mo.mean += w[a] * values[static_cast<size_t>(a)];
    mo.mean_sq += w[a] * values[static_cast<size_t>(a)] *
                  values[static_cast<size_t>(a)];
  }
  return mo;
}

std::vector<double> density_table_single(const ModelSpec& spec, bool first) {
  std::vector<double> v(static_cast<size_t>(spec.alphabet_size()));
  for (int a = 0; a < spec.alphabet_size(); ++a) {
    double pn = spec.nominal()[a];
    double pa = spec.anomalous(1)[a];
    if (pn == 0.0 && pa == 0.0) {
      v[static_cast<size_t>(a)] = 0.0;  // excluded symbol; never weighted
      continue;
    }
    double denom = (spec.m() - 2) * pn + pa;
    double num = (spec.m() - 1) * (first ? pa : pn);
    v[static_cast<size_t>(a)] = std::log(num / denom);
  }
  return v;
}

void validate_pair(const std::vector<int>& b, const std::vector<int>& c,
                   const ModelSpec& spec) {
  require(static_cast<int>(b.size()) == spec.t() &&
              static_cast<int>(c.size()) == spec.t(),
          "outlier sets must have size t");
  require(b != c, "pair sets must differ");
  for (int i : b) require(i >= 1 && i <= spec.m(), "index outside [1, m]");
  for (int i : c) require(i >= 1 && i <= spec.m(), "index outside [1, m]");
}

bool in_set(int i, const std::vector<int>& s) {
  for (int v : s) {
    if (v == i) return true;
  }
  return false;
}

// Per-row density term of the (b, c) statistic: log(source_row / mix_bc)
// for rows outside c, absent (empty) for rows in c.
std::vector<double> row_density(int row, const std::vector<int>& b,
                                const std::vector<int>& c,
                                const Distribution& mix,
                                const ModelSpec& spec) {
  std::vector<double> v;
  if (in_set(row, c)) return v;
  const Distribution& num =
      in_set(row, b) ? spec.anomalous(set_rank(row, b)) : spec.nominal();
  v.resize(static_cast<size_t>(spec.alphabet_size()), 0.0);
  for (int a = 0; a < spec.alphabet_size(); ++a) {
    if (num[a] == 0.0 && mix[a] == 0.0) continue;
    v[static_cast<size_t>(a)] = std::log(num[a] / mix[a]);
  }
  return v;
}

}  // namespace

InfoDensityPair info_densities_single(int x, const ModelSpec& spec) {
  require_single(spec);
  require(x >= 0 && x < spec.alphabet_size(), "symbol outside alphabet");
  double pn = spec.nominal()[x];
  double pa = spec.anomalous(1)[x];
  if (pn == 0.0 && pa == 0.0) {
    throw std::domain_error("symbol outside both supports");
  }
  double denom = (spec.m() - 2) * pn + pa;
  return {std::log((spec.m() - 1) * pa / denom),
          std::log((spec.m() - 1) * pn / denom)};
}

double gd_single(const ModelSpec& spec) {
  require_single(spec);
  Moments m1 = moments(density_table_single(spec, true), spec.anomalous(1));
  Moments m2 = moments(density_table_single(spec, false), spec.nominal());
  return m1.mean + (spec.m() - 2) * m2.mean;
}

VarCov var_cov_single(const ModelSpec& spec) {
  require_single(spec);
  const double m = spec.m();
  Moments m1 = moments(density_table_single(spec, true), spec.anomalous(1));
  Moments m2 = moments(density_table_single(spec, false), spec.nominal());
  double gd = m1.mean + (m - 2) * m2.mean;
  double var = m1.var() + (m - 2) * m2.var();
  double cov = -gd * gd + m1.mean_sq + 2 * (m - 2) * m1.mean * m2.mean +
               (m * m - 5 * m + 7) * m2.mean * m2.mean + (m - 3) * m2.mean_sq;
  return {var, cov};
}

Distribution mix_multi(const std::vector<int>& b, const std::vector<int>& c,
                       const ModelSpec& spec) {
  validate_pair(b, c, spec);
  std::vector<double> p(static_cast<size_t>(spec.alphabet_size()), 0.0);
  const double group = spec.m() - spec.t();
  for (int row = 1; row <= spec.m(); ++row) {
    if (in_set(row, c)) continue;
    const Distribution& src =
        in_set(row, b) ? spec.anomalous(set_rank(row, b)) : spec.nominal();
    for (int a = 0; a < spec.alphabet_size(); ++a) {
      p[static_cast<size_t>(a)] += src[a] / group;
    }
  }
  double sum = 0.0;
  for (double v : p) sum += v;
  for (double& v : p) v /= sum;
  return Distribution(std::move(p));
}

MultiDensities info_densities_multi(int x, const std::vector<int>& b,
                                    const std::vector<int>& c,
                                    const ModelSpec& spec) {
  validate_pair(b, c, spec);
  require(x >= 0 && x < spec.alphabet_size(), "symbol outside alphabet");
  Distribution mix = mix_multi(b, c, spec);
  // Symbols outside both the numerator and the mixture support use the
  // 0 ln 0 convention; a one-sided zero is a legitimate +-infinity.
  auto density = [&](double num) {
    if (num == 0.0 && mix[x] == 0.0) return 0.0;
    return std::log(num / mix[x]);
  };
  MultiDensities d;
  d.i1.resize(static_cast<size_t>(spec.t()));
  for (int r = 1; r <= spec.t(); ++r) {
    d.i1[static_cast<size_t>(r - 1)] = density(spec.anomalous(r)[x]);
  }
  d.i2 = density(spec.nominal()[x]);
  return d;
}

double gd_multi(const std::vector<int>& b, const std::vector<int>& c,
                const ModelSpec& spec) {
  validate_pair(b, c, spec);
  Distribution mix = mix_multi(b, c, spec);
  double gd = 0.0;
  for (int row = 1; row <= spec.m(); ++row) {
    if (in_set(row, c)) continue;
    const Distribution& src =
        in_set(row, b) ? spec.anomalous(set_rank(row, b)) : spec.nominal();
    gd += kl(src, mix);
  }
  return gd;
}

double var_multi(const std::vector<int>& b, const std::vector<int>& c,
                 const ModelSpec& spec) {
  validate_pair(b, c, spec);
  Distribution mix = mix_multi(b, c, spec);
  double var = 0.0;
  for (int row = 1; row <= spec.m(); ++row) {
    std::vector<double> u = row_density(row, b, c, mix, spec);
    if (u.empty()) continue;
    const Distribution& src =
        in_set(row, b) ? spec.anomalous(set_rank(row, b)) : spec.nominal();
    var += moments(u, src).var();
  }
  return var;
}

double cov_multi(const std::vector<int>& b, const std::vector<int>& c,
                 const std::vector<int>& d, const ModelSpec& spec) {
  validate_pair(b, c, spec);
  validate_pair(b, d, spec);
  require(c != d, "third set must differ from the second");
  Distribution mix_c = mix_multi(b, c, spec);
  Distribution mix_d = mix_multi(b, d, spec);
  double cov = 0.0;
  for (int row = 1; row <= spec.m(); ++row) {
    std::vector<double> u = row_density(row, b, c, mix_c, spec);
    std::vector<double> v = row_density(row, b, d, mix_d, spec);
    if (u.empty() || v.empty()) continue;
    const Distribution& src =
        in_set(row, b) ? spec.anomalous(set_rank(row, b)) : spec.nominal();
    double euv = 0.0;
    for (int a = 0; a < spec.alphabet_size(); ++a) {
      if (src[a] == 0.0) continue;
      euv += src[a] * u[static_cast<size_t>(a)] * v[static_cast<size_t>(a)];
    }
    cov += euv - moments(u, src).mean * moments(v, src).mean;
  }
  return cov;
}

double cov_multi_sym(const std::vector<int>& b, const std::vector<int>& c,
                     const ModelSpec& spec) {
  validate_pair(b, c, spec);
  double sum = 0.0;
  int count = 0;
  for (const auto& d : enumerate_outlier_sets(spec.m(), spec.t())) {
    if (d == b || d == c) continue;
    sum += cov_multi(b, c, d, spec);
    ++count;
  }
  require(count > 0, "no admissible third set");
  return sum / count;
}

GdVarCov gd_var_cov_multi(const std::vector<int>& b, const std::vector<int>& c,
                          const ModelSpec& spec) {
  return {gd_multi(b, c, spec), var_multi(b, c, spec),
          cov_multi_sym(b, c, spec)};
}

GdMin gd_multi_min(const ModelSpec& spec) {
  auto sets = enumerate_outlier_sets(spec.m(), spec.t());
  GdMin best;
  best.gd = 0.0;
  bool have = false;
  // Exchangeable pairs agree only up to summation order, so ties need a band
  // wider than the accumulated rounding noise to keep the first pair.
  constexpr double kTie = 1e-12;
  for (const auto& b : sets) {
    for (const auto& c : sets) {
      if (b == c) continue;
      double gd = gd_multi(b, c, spec);
      if (!have || gd < best.gd - kTie) {
        best = {gd, b, c};
        have = true;
      }
    }
  }
  return best;
}

double homogeneous_gd(int m, int t_outliers, int t_overlap,
                      const Distribution& p_n, const Distribution& p_a) {
  require(t_overlap >= 1 && t_overlap <= t_outliers,
          "overlap parameter outside [1, t]");
  require(2 * t_outliers < m, "ill-posed: outlier count must satisfy t < m/2");
  const double group = m - t_outliers;
  const double t = t_overlap;
  std::vector<double> p(static_cast<size_t>(p_n.alphabet_size()));
  for (int a = 0; a < p_n.alphabet_size(); ++a) {
    p[static_cast<size_t>(a)] = (t * p_a[a] + (group - t) * p_n[a]) / group;
  }
  Distribution mix(std::move(p));
  return t * kl(p_a, mix) + (group - t) * kl(p_n, mix);
}

std::vector<std::vector<double>> EquiMatrix::dense() const {
  std::vector<std::vector<double>> mat(
      static_cast<size_t>(side),
      std::vector<double>(static_cast<size_t>(side), cov));
  for (int j = 0; j < side; ++j) {
    mat[static_cast<size_t>(j)][static_cast<size_t>(j)] = var;
  }
  return mat;
}

double EquiMatrix::eigen_lo() const {
  if (side == 1) return var;
  return std::min(var - cov, var + (side - 1) * cov);
}

double EquiMatrix::eigen_hi() const {
  if (side == 1) return var;
  return std::max(var - cov, var + (side - 1) * cov);
}

EquiMatrix cov_matrix(const ModelSpec& spec) {
  if (spec.t() == 1) {
    VarCov vc = var_cov_single(spec);
    return {spec.m() - 1, vc.var, vc.cov};
  }
  GdMin gm = gd_multi_min(spec);
  GdVarCov gvc = gd_var_cov_multi(gm.b, gm.c, spec);
  int side =
      static_cast<int>(enumerate_outlier_sets(spec.m(), spec.t()).size()) - 1;
  return {side, gvc.var, gvc.cov};
}

ExponentReport exponent_report(const ModelSpec& spec) {
  ExponentReport rep;
  rep.matrix = cov_matrix(spec);
  rep.var = rep.matrix.var;
  rep.cov = rep.matrix.cov;
  if (spec.t() == 1) {
    rep.gd = gd_single(spec);
  } else {
    GdMin gm = gd_multi_min(spec);
    rep.gd = gm.gd;
    rep.pair_b = gm.b;
    rep.pair_c = gm.c;
  }
  return rep;
}

}  // namespace osd
