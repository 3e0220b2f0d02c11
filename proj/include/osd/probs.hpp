#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace osd {

// Finite-alphabet probability distribution.
// Invariants: every entry >= 0, entries sum to 1 within 1e-12, alphabet >= 2.
class Distribution {
 public:
  explicit Distribution(std::vector<double> probs);

  // Bern(p): P(0) = 1-p, P(1) = p.
  static Distribution bernoulli(double p);
  static Distribution uniform(int alphabet_size);

  int alphabet_size() const { return static_cast<int>(probs_.size()); }
  double operator[](int a) const { return probs_[static_cast<size_t>(a)]; }
  const std::vector<double>& probs() const { return probs_; }

  // L-infinity equality within tol (the project-wide distribution equality).
  bool near_equal(const Distribution& other, double tol = 1e-12) const;

 private:
  std::vector<double> probs_;
};

// Empirical distribution of a sequence: exact counts over the alphabet.
// Entries are k/n; counts sum to n exactly.
struct EmpiricalType {
  std::vector<std::int64_t> counts;
  std::int64_t n = 0;

  int alphabet_size() const { return static_cast<int>(counts.size()); }
  double operator[](int a) const {
    return static_cast<double>(counts[static_cast<size_t>(a)]) /
           static_cast<double>(n);
  }
  Distribution to_distribution() const;
};

EmpiricalType empirical_type(std::span<const int> x, int alphabet_size);

// M sequences of equal length n over a common alphabet.
class SequenceBatch {
 public:
  SequenceBatch(std::vector<std::vector<int>> rows, int alphabet_size);

  int m() const { return static_cast<int>(rows_.size()); }
  std::int64_t n() const { return n_; }
  int alphabet_size() const { return alphabet_size_; }
  // r is 0-based; hypothesis indices are 1-based (see Hypothesis).
  std::span<const int> row(int r) const { return rows_[static_cast<size_t>(r)]; }

 private:
  std::vector<std::vector<int>> rows_;
  std::int64_t n_ = 0;
  int alphabet_size_ = 0;
};

enum class HypKind { Single, Multi, Reject };

// Candidate or reject hypothesis. Indices are 1-based sequence positions,
// stored strictly increasing. A one-element set is always kind Single.
class Hypothesis {
 public:
  static Hypothesis single(int i);
  static Hypothesis multi(std::vector<int> b);
  static Hypothesis reject();

  HypKind kind() const { return kind_; }
  bool is_reject() const { return kind_ == HypKind::Reject; }
  const std::vector<int>& indices() const { return indices_; }
  int size() const { return static_cast<int>(indices_.size()); }
  bool contains(int i) const;

  // "H2", "H{1,3}", "Hr".
  std::string label() const;

  friend bool operator==(const Hypothesis& a, const Hypothesis& b) {
    return a.kind_ == b.kind_ && a.indices_ == b.indices_;
  }
  // Canonical enumeration order: by set size, then lexicographic; Reject last.
  friend bool operator<(const Hypothesis& a, const Hypothesis& b);

 private:
  Hypothesis(HypKind kind, std::vector<int> indices)
      : kind_(kind), indices_(std::move(indices)) {}
  HypKind kind_;
  std::vector<int> indices_;
};

// All size-t subsets of [1..m], lexicographic, each ascending.
// Requires 1 <= t < m/2; larger t makes the detection problem ill-posed.
std::vector<std::vector<int>> enumerate_outlier_sets(int m, int t);

// 1-based rank of i within the sorted set b (smallest element has rank 1).
int set_rank(int i, const std::vector<int>& b);

// Non-reject candidate hypotheses in canonical order: S_t for a fixed t,
// or the union over sizes 1..t_max.
std::vector<Hypothesis> hypothesis_space(int m, int t);
std::vector<Hypothesis> hypothesis_space_union(int m, int t_max);

// Problem instance: m sequences, t outliers, nominal and anomalous sources.
// The anomalous list may be given with one entry (shared by all outlier
// ranks) or t entries; it is stored expanded to t entries.
class ModelSpec {
 public:
  ModelSpec(int m, int t, Distribution nominal,
            std::vector<Distribution> anomalous);

  int m() const { return m_; }
  int t() const { return t_; }
  int alphabet_size() const { return nominal_.alphabet_size(); }
  const Distribution& nominal() const { return nominal_; }
  // rank is the 1-based outlier rank (set_rank of the row within its set).
  const Distribution& anomalous(int rank) const;
  bool homogeneous() const { return homogeneous_; }

  // Source distribution of a 1-based row under the given truth.
  const Distribution& row_source(const Hypothesis& truth, int row) const;

 private:
  int m_;
  int t_;
  Distribution nominal_;
  std::vector<Distribution> anomalous_;
  bool homogeneous_;
};

}  // namespace osd
