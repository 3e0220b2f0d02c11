#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "osd/probs.hpp"

namespace osd {

// Flat key/value run configuration. Model keys are required; experiment keys
// are optional and command-dependent. Calibration-dependent commands demand
// exactly one of {eps, exponent, threshold}.
struct RunConfig {
  int m = 0;
  int t = 1;
  int alphabet = 0;
  std::vector<double> nominal;
  std::vector<std::vector<double>> anomalous;  // one entry or t entries

  std::optional<std::int64_t> n;
  std::optional<double> eps;
  std::optional<double> exponent;
  std::optional<double> threshold;
  std::optional<std::int64_t> trials;
  std::optional<std::uint64_t> seed;
  std::optional<int> workers;
  std::optional<int> t_max;
  std::optional<double> correction;
  std::optional<std::string> truth;
  std::optional<std::string> out;

  ModelSpec to_model_spec() const;

  friend bool operator==(const RunConfig&, const RunConfig&) = default;
};

// Accepted lines: blank, full-line # comments, and "key = value". Arrays are
// whitespace-separated; anomalous distributions use keys anomalous.1 ...
// Unknown or duplicate keys are errors (reported with their line number).
RunConfig parse_config_text(const std::string& text);
RunConfig load_config(const std::string& path);

// Canonical form; parse(serialize(parse(x))) == parse(x).
std::string serialize_config(const RunConfig& config);

// Shortest round-trip decimal form, '.' decimal point on every platform.
std::string format_double(double v);

// "H2" / "2" -> Single(2); "H{1,3}" / "1,3" -> Multi; "Hr" / "reject" -> Reject.
Hypothesis parse_hypothesis(const std::string& text, int m);

// Data file: one whitespace-separated row of symbol indices per line.
// Malformed content is reported as "row R, column C: ...".
SequenceBatch load_batch(const std::string& path, int expected_m,
                         int alphabet_size);
void save_batch(const SequenceBatch& batch, const std::string& path);

}  // namespace osd
