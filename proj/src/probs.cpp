#include "osd/probs.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace osd {

namespace {

void require(bool ok, const std::string& msg) {
  if (!ok) throw std::invalid_argument(msg);
}

}  // namespace

Distribution::Distribution(std::vector<double> probs) : probs_(std::move(probs)) {
  require(probs_.size() >= 2, "distribution needs an alphabet of size >= 2");
  double sum = 0.0;
  for (double p : probs_) {
    require(std::isfinite(p) && p >= 0.0, "distribution entries must be >= 0");
    sum += p;
  }
  require(std::fabs(sum - 1.0) <= 1e-12, "distribution entries must sum to 1");
}

Distribution Distribution::bernoulli(double p) {
  require(p >= 0.0 && p <= 1.0, "bernoulli parameter outside [0,1]");
  return Distribution({1.0 - p, p});
}

Distribution Distribution::uniform(int alphabet_size) {
  require(alphabet_size >= 2, "uniform alphabet must be >= 2");
  return Distribution(std::vector<double>(
      static_cast<size_t>(alphabet_size), 1.0 / alphabet_size));
}

bool Distribution::near_equal(const Distribution& other, double tol) const {
  if (other.alphabet_size() != alphabet_size()) return false;
  for (size_t a = 0; a < probs_.size(); ++a) {
    if (std::fabs(probs_[a] - other.probs_[a]) > tol) return false;
  }
  return true;
}

Distribution EmpiricalType::to_distribution() const {
  std::vector<double> p(counts.size());
  for (size_t a = 0; a < counts.size(); ++a) {
    p[a] = static_cast<double>(counts[a]) / static_cast<double>(n);
  }
  // k/n entries sum to within one ulp-per-symbol of 1; renormalization would
  // break the exact-rational contract, so fix the tiny float residue instead.
  double sum = 0.0;
  for (double v : p) sum += v;
  double residue = 1.0 - sum;
  if (residue != 0.0) {
    size_t amax = 0;
    for (size_t a = 1; a < p.size(); ++a) {
      if (p[a] > p[amax]) amax = a;
    }
    p[amax] += residue;
  }
  return Distribution(std::move(p));
}

EmpiricalType empirical_type(std::span<const int> x, int alphabet_size) {
  require(!x.empty(), "empirical type of an empty sequence");
  require(alphabet_size >= 2, "alphabet must be >= 2");
  EmpiricalType t;
  t.counts.assign(static_cast<size_t>(alphabet_size), 0);
  t.n = static_cast<std::int64_t>(x.size());
  for (int a : x) {
    require(a >= 0 && a < alphabet_size, "symbol outside alphabet");
    ++t.counts[static_cast<size_t>(a)];
  }
  return t;
}

SequenceBatch::SequenceBatch(std::vector<std::vector<int>> rows,
                             int alphabet_size)
    : rows_(std::move(rows)), alphabet_size_(alphabet_size) {
  require(!rows_.empty(), "batch needs at least one sequence");
  require(alphabet_size_ >= 2, "alphabet must be >= 2");
  n_ = static_cast<std::int64_t>(rows_[0].size());
  require(n_ >= 1, "sequences must be non-empty");
  for (const auto& row : rows_) {
    require(static_cast<std::int64_t>(row.size()) == n_,
            "all sequences must have equal length");
    for (int a : row) {
      require(a >= 0 && a < alphabet_size_, "symbol outside alphabet");
    }
  }
}

Hypothesis Hypothesis::single(int i) {
  require(i >= 1, "hypothesis index must be >= 1");
  return Hypothesis(HypKind::Single, {i});
}

Hypothesis Hypothesis::multi(std::vector<int> b) {
  require(!b.empty(), "outlier set must be non-empty");
  for (size_t j = 0; j < b.size(); ++j) {
    require(b[j] >= 1, "hypothesis index must be >= 1");
    require(j == 0 || b[j - 1] < b[j],
            "outlier set must be strictly increasing");
  }
  if (b.size() == 1) return single(b[0]);
  return Hypothesis(HypKind::Multi, std::move(b));
}

Hypothesis Hypothesis::reject() { return Hypothesis(HypKind::Reject, {}); }

bool Hypothesis::contains(int i) const {
  return std::binary_search(indices_.begin(), indices_.end(), i);
}

std::string Hypothesis::label() const {
  if (kind_ == HypKind::Reject) return "Hr";
  if (kind_ == HypKind::Single) return "H" + std::to_string(indices_[0]);
  std::string s = "H{";
  for (size_t j = 0; j < indices_.size(); ++j) {
    if (j) s += ',';
    s += std::to_string(indices_[j]);
  }
  s += '}';
  return s;
}

bool operator<(const Hypothesis& a, const Hypothesis& b) {
  if (a.is_reject() != b.is_reject()) return b.is_reject();
  if (a.indices_.size() != b.indices_.size()) {
    return a.indices_.size() < b.indices_.size();
  }
  return a.indices_ < b.indices_;
}

std::vector<std::vector<int>> enumerate_outlier_sets(int m, int t) {
  require(t >= 1, "need at least one outlier");
  require(2 * t < m, "ill-posed: outlier count must satisfy t < m/2");
  std::vector<std::vector<int>> sets;
  std::vector<int> cur(static_cast<size_t>(t));
  for (int j = 0; j < t; ++j) cur[static_cast<size_t>(j)] = j + 1;
  while (true) {
    sets.push_back(cur);
    int j = t - 1;
    while (j >= 0 && cur[static_cast<size_t>(j)] == m - (t - 1 - j)) --j;
    if (j < 0) break;
    ++cur[static_cast<size_t>(j)];
    for (int l = j + 1; l < t; ++l) {
      cur[static_cast<size_t>(l)] = cur[static_cast<size_t>(l - 1)] + 1;
    }
  }
  return sets;
}

int set_rank(int i, const std::vector<int>& b) {
  auto it = std::lower_bound(b.begin(), b.end(), i);
  require(it != b.end() && *it == i, "index not in set");
  return static_cast<int>(it - b.begin()) + 1;
}

std::vector<Hypothesis> hypothesis_space(int m, int t) {
  std::vector<Hypothesis> hyps;
  for (auto& b : enumerate_outlier_sets(m, t)) {
    hyps.push_back(Hypothesis::multi(std::move(b)));
  }
  return hyps;
}

std::vector<Hypothesis> hypothesis_space_union(int m, int t_max) {
  std::vector<Hypothesis> hyps;
  for (int t = 1; t <= t_max; ++t) {
    auto level = hypothesis_space(m, t);
    hyps.insert(hyps.end(), level.begin(), level.end());
  }
  return hyps;
}

ModelSpec::ModelSpec(int m, int t, Distribution nominal,
                     std::vector<Distribution> anomalous)
    : m_(m), t_(t), nominal_(std::move(nominal)) {
  require(t_ >= 1, "need at least one outlier");
  require(2 * t_ < m_, "ill-posed: outlier count must satisfy t < m/2");
  require(!anomalous.empty(), "need an anomalous distribution");
  require(anomalous.size() == 1 || anomalous.size() == static_cast<size_t>(t_),
          "anomalous list must have 1 or t entries");
  for (const auto& pa : anomalous) {
    require(pa.alphabet_size() == nominal_.alphabet_size(),
            "all distributions must share one alphabet");
    require(!pa.near_equal(nominal_),
            "indistinguishable pair: anomalous equals nominal");
  }
  anomalous_.reserve(static_cast<size_t>(t_));
  for (int k = 0; k < t_; ++k) {
    anomalous_.push_back(anomalous[anomalous.size() == 1
                                       ? 0
                                       : static_cast<size_t>(k)]);
  }
  homogeneous_ = true;
  for (int k = 1; k < t_; ++k) {
    if (!anomalous_[static_cast<size_t>(k)].near_equal(anomalous_[0])) {
      homogeneous_ = false;
    }
  }
}

const Distribution& ModelSpec::anomalous(int rank) const {
  if (rank < 1 || rank > t_) {
    throw std::invalid_argument("anomalous rank outside [1, t]");
  }
  return anomalous_[static_cast<size_t>(rank - 1)];
}

const Distribution& ModelSpec::row_source(const Hypothesis& truth,
                                          int row) const {
  if (row < 1 || row > m_) throw std::invalid_argument("row outside [1, m]");
  if (truth.is_reject() || !truth.contains(row)) return nominal_;
  return anomalous(set_rank(row, truth.indices()));
}

}  // namespace osd
