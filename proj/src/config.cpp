#include "osd/config.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <set>
#include <sstream>
#include <stdexcept>

namespace osd {
namespace {

std::string trim(const std::string& s) {
  const auto begin = s.find_first_not_of(" \t\r");
  if (begin == std::string::npos) return "";
  const auto end = s.find_last_not_of(" \t\r");
  return s.substr(begin, end - begin + 1);
}

std::vector<std::string> split_ws(const std::string& s) {
  std::vector<std::string> out;
  std::istringstream stream(s);
  std::string token;
  while (stream >> token) out.push_back(token);
  return out;
}

[[noreturn]] void fail_line(int line, const std::string& what) {
  throw std::invalid_argument("line " + std::to_string(line) + ": " + what);
}

double parse_double(const std::string& token, int line) {
  double v = 0.0;
  const auto res = std::from_chars(token.data(), token.data() + token.size(), v);
  if (res.ec != std::errc() || res.ptr != token.data() + token.size()) {
    fail_line(line, "not a number: '" + token + "'");
  }
  return v;
}

template <typename Int>
Int parse_int(const std::string& token, int line) {
  Int v = 0;
  const char* first = token.data();
  const char* last = token.data() + token.size();
  int base = 10;
  if (token.size() > 2 && token[0] == '0' && (token[1] == 'x' || token[1] == 'X')) {
    first += 2;
    base = 16;
  }
  const auto res = std::from_chars(first, last, v, base);
  if (res.ec != std::errc() || res.ptr != last) {
    fail_line(line, "not an integer: '" + token + "'");
  }
  return v;
}

std::vector<double> parse_array(const std::string& value, int line) {
  std::vector<double> out;
  for (const std::string& token : split_ws(value)) {
    out.push_back(parse_double(token, line));
  }
  if (out.empty()) fail_line(line, "empty array value");
  return out;
}

}  // namespace

std::string format_double(double v) {
  char buf[40];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

ModelSpec RunConfig::to_model_spec() const {
  if (m <= 0) throw std::invalid_argument("missing model key 'm'");
  if (alphabet < 2) throw std::invalid_argument("missing model key 'alphabet'");
  if (nominal.empty()) throw std::invalid_argument("missing model key 'nominal'");
  if (anomalous.empty()) {
    throw std::invalid_argument("missing model key 'anomalous.1'");
  }
  if (static_cast<int>(nominal.size()) != alphabet) {
    throw std::invalid_argument("nominal length does not match alphabet");
  }
  for (const auto& a : anomalous) {
    if (static_cast<int>(a.size()) != alphabet) {
      throw std::invalid_argument("anomalous length does not match alphabet");
    }
  }
  std::vector<Distribution> anomalous_dists;
  anomalous_dists.reserve(anomalous.size());
  for (const auto& a : anomalous) anomalous_dists.emplace_back(a);
  return ModelSpec(m, t, Distribution(nominal), std::move(anomalous_dists));
}

RunConfig parse_config_text(const std::string& text) {
  RunConfig config;
  std::set<std::string> seen;
  std::istringstream stream(text);
  std::string raw;
  int line = 0;
  int max_anomalous_rank = 0;
  std::vector<std::pair<int, std::vector<double>>> anomalous_entries;
  while (std::getline(stream, raw)) {
    ++line;
    const std::string s = trim(raw);
    if (s.empty() || s[0] == '#') continue;
    const auto eq = s.find('=');
    if (eq == std::string::npos) fail_line(line, "expected 'key = value'");
    const std::string key = trim(s.substr(0, eq));
    const std::string value = trim(s.substr(eq + 1));
    if (key.empty()) fail_line(line, "empty key");
    if (value.empty()) fail_line(line, "empty value for key '" + key + "'");
    if (!seen.insert(key).second) fail_line(line, "duplicate key '" + key + "'");

    if (key == "m") {
      config.m = parse_int<int>(value, line);
    } else if (key == "t") {
      config.t = parse_int<int>(value, line);
    } else if (key == "alphabet") {
      config.alphabet = parse_int<int>(value, line);
    } else if (key == "nominal") {
      config.nominal = parse_array(value, line);
    } else if (key.rfind("anomalous.", 0) == 0) {
      const int rank = parse_int<int>(key.substr(10), line);
      if (rank < 1) fail_line(line, "anomalous rank must be >= 1");
      anomalous_entries.emplace_back(rank, parse_array(value, line));
      max_anomalous_rank = std::max(max_anomalous_rank, rank);
    } else if (key == "n") {
      config.n = parse_int<std::int64_t>(value, line);
    } else if (key == "eps") {
      config.eps = parse_double(value, line);
    } else if (key == "exponent") {
      config.exponent = parse_double(value, line);
    } else if (key == "threshold") {
      config.threshold = parse_double(value, line);
    } else if (key == "trials") {
      config.trials = parse_int<std::int64_t>(value, line);
    } else if (key == "seed") {
      config.seed = parse_int<std::uint64_t>(value, line);
    } else if (key == "workers") {
      config.workers = parse_int<int>(value, line);
    } else if (key == "t_max") {
      config.t_max = parse_int<int>(value, line);
    } else if (key == "correction") {
      config.correction = parse_double(value, line);
    } else if (key == "truth") {
      config.truth = value;
    } else if (key == "out") {
      config.out = value;
    } else {
      fail_line(line, "unknown key '" + key + "'");
    }
  }
  if (!anomalous_entries.empty()) {
    config.anomalous.assign(max_anomalous_rank, {});
    for (auto& [rank, probs] : anomalous_entries) {
      if (!config.anomalous[rank - 1].empty()) {
        throw std::invalid_argument("duplicate anomalous rank " +
                                    std::to_string(rank));
      }
      config.anomalous[rank - 1] = std::move(probs);
    }
    for (int rank = 1; rank <= max_anomalous_rank; ++rank) {
      if (config.anomalous[rank - 1].empty()) {
        throw std::invalid_argument("missing anomalous rank " +
                                    std::to_string(rank));
      }
    }
  }
  return config;
}

RunConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open config file: " + path);
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return parse_config_text(buffer.str());
}

std::string serialize_config(const RunConfig& config) {
  std::ostringstream out;
  const auto emit_array = [&out](const std::string& key,
                                 const std::vector<double>& values) {
    out << key << " =";
    for (double v : values) out << " " << format_double(v);
    out << "\n";
  };
  out << "m = " << config.m << "\n";
  out << "t = " << config.t << "\n";
  out << "alphabet = " << config.alphabet << "\n";
  if (!config.nominal.empty()) emit_array("nominal", config.nominal);
  for (std::size_t i = 0; i < config.anomalous.size(); ++i) {
    emit_array("anomalous." + std::to_string(i + 1), config.anomalous[i]);
  }
  if (config.n) out << "n = " << *config.n << "\n";
  if (config.eps) out << "eps = " << format_double(*config.eps) << "\n";
  if (config.exponent) {
    out << "exponent = " << format_double(*config.exponent) << "\n";
  }
  if (config.threshold) {
    out << "threshold = " << format_double(*config.threshold) << "\n";
  }
  if (config.trials) out << "trials = " << *config.trials << "\n";
  if (config.seed) out << "seed = " << *config.seed << "\n";
  if (config.workers) out << "workers = " << *config.workers << "\n";
  if (config.t_max) out << "t_max = " << *config.t_max << "\n";
  if (config.correction) {
    out << "correction = " << format_double(*config.correction) << "\n";
  }
  if (config.truth) out << "truth = " << *config.truth << "\n";
  if (config.out) out << "out = " << *config.out << "\n";
  return out.str();
}

Hypothesis parse_hypothesis(const std::string& text, int m) {
  std::string s = trim(text);
  if (s.empty()) throw std::invalid_argument("empty hypothesis");
  if (s[0] == 'H' || s[0] == 'h') s = s.substr(1);
  if (s == "r" || s == "R" || s == "reject" || s == "Reject") {
    return Hypothesis::reject();
  }
  if (s.empty()) throw std::invalid_argument("empty hypothesis");
  const bool braced = s.front() == '{';
  if (braced != (s.back() == '}')) {
    throw std::invalid_argument("unbalanced braces in hypothesis: " + text);
  }
  if (braced) s = s.substr(1, s.size() - 2);
  if (s.find('{') != std::string::npos || s.find('}') != std::string::npos) {
    throw std::invalid_argument("unbalanced braces in hypothesis: " + text);
  }
  std::vector<int> indices;
  std::size_t start = 0;
  while (start <= s.size()) {
    const std::size_t comma = std::min(s.find(',', start), s.size());
    const std::string token = trim(s.substr(start, comma - start));
    if (token.empty()) {
      throw std::invalid_argument("empty index in hypothesis: " + text);
    }
    indices.push_back(parse_int<int>(token, 0));
    start = comma + 1;
  }
  for (int i : indices) {
    if (i < 1 || i > m) {
      throw std::invalid_argument("hypothesis index out of range: " +
                                  std::to_string(i));
    }
  }
  if (indices.size() == 1) return Hypothesis::single(indices[0]);
  return Hypothesis::multi(indices);
}

SequenceBatch load_batch(const std::string& path, int expected_m,
                         int alphabet_size) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open data file: " + path);
  std::vector<std::vector<int>> rows;
  std::string raw;
  int line = 0;
  while (std::getline(in, raw)) {
    ++line;
    const std::string s = trim(raw);
    if (s.empty() || s[0] == '#') continue;
    std::vector<int> row;
    int column = 0;
    for (const std::string& token : split_ws(s)) {
      ++column;
      int symbol = 0;
      const auto res =
          std::from_chars(token.data(), token.data() + token.size(), symbol);
      if (res.ec != std::errc() || res.ptr != token.data() + token.size()) {
        throw std::invalid_argument(
            "row " + std::to_string(rows.size() + 1) + ", column " +
            std::to_string(column) + ": not a symbol index: '" + token + "'");
      }
      if (symbol < 0 || symbol >= alphabet_size) {
        throw std::invalid_argument(
            "row " + std::to_string(rows.size() + 1) + ", column " +
            std::to_string(column) + ": symbol " + std::to_string(symbol) +
            " outside alphabet of size " + std::to_string(alphabet_size));
      }
      row.push_back(symbol);
    }
    rows.push_back(std::move(row));
  }
  if (static_cast<int>(rows.size()) != expected_m) {
    throw std::invalid_argument(
        "data file has " + std::to_string(rows.size()) + " rows, expected " +
        std::to_string(expected_m));
  }
  for (std::size_t r = 1; r < rows.size(); ++r) {
    if (rows[r].size() != rows[0].size()) {
      throw std::invalid_argument(
          "row " + std::to_string(r + 1) + ": length " +
          std::to_string(rows[r].size()) + " differs from row 1 length " +
          std::to_string(rows[0].size()));
    }
  }
  return SequenceBatch(std::move(rows), alphabet_size);
}

void save_batch(const SequenceBatch& batch, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write data file: " + path);
  for (int r = 0; r < batch.m(); ++r) {
    const auto row = batch.row(r);
    for (std::int64_t i = 0; i < static_cast<std::int64_t>(row.size()); ++i) {
      if (i > 0) out << ' ';
      out << row[static_cast<std::size_t>(i)];
    }
    out << '\n';
  }
  if (!out) throw std::runtime_error("failed writing data file: " + path);
}

}  // namespace osd
