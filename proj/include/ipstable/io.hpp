#pragma once

// Plain-text formats shared by the CLI and the generators.
//
//   points CSV   one row per point, numeric columns, optional header row
//   matrix CSV   n rows of n comma-separated distances
//   tree file    one edge per line: "u v weight", node ids 0..n-1
//   assignment   one cluster index per line (-1 marks an excluded point)

#include <charconv>
#include <cmath>
#include <cstddef>
#include <fstream>
#include <iomanip>
#include <limits>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "ipstable/core.hpp"
#include "ipstable/tree.hpp"

namespace ipstable::io {

class ParseError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline std::string_view trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r\n");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r\n");
  return s.substr(first, last - first + 1);
}

inline std::vector<std::string> split(std::string_view line, char sep = ',') {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (true) {
    const auto pos = line.find(sep, start);
    out.emplace_back(trim(line.substr(start, pos == std::string_view::npos ? std::string_view::npos : pos - start)));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return out;
}

inline std::optional<double> parse_double(std::string_view s) {
  s = trim(s);
  if (s.empty()) return std::nullopt;
  double v = 0.0;
  const auto* end = s.data() + s.size();
  const auto [ptr, ec] = std::from_chars(s.data(), end, v);
  if (ec != std::errc() || ptr != end) return std::nullopt;
  return v;
}

inline std::ifstream open_in(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open '" + path + "'");
  return in;
}

struct Table {
  std::vector<std::string> header;  ///< empty when the file has none
  FeatureMatrix values;

  /// Index of a column given by name or by 0-based position.
  std::size_t column_index(const std::string& key) const {
    for (std::size_t c = 0; c < header.size(); ++c)
      if (header[c] == key) return c;
    const auto idx = parse_double(key);
    if (idx && *idx >= 0 && std::floor(*idx) == *idx && static_cast<std::size_t>(*idx) < values.dim)
      return static_cast<std::size_t>(*idx);
    throw ParseError("no column '" + key + "'");
  }

  FeatureMatrix select(const std::vector<std::size_t>& cols) const {
    FeatureMatrix m(values.n, cols.size());
    for (std::size_t i = 0; i < values.n; ++i)
      for (std::size_t c = 0; c < cols.size(); ++c) m.at(i, c) = values.at(i, cols[c]);
    return m;
  }
};

/// Numeric CSV; the first row is a header when any of its fields is not a number.
inline Table parse_csv(std::istream& in, const std::string& where = "input") {
  Table t;
  std::vector<std::vector<double>> rows;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (trim(line).empty()) continue;
    const auto fields = split(line);
    std::vector<double> row;
    row.reserve(fields.size());
    bool numeric = true;
    for (const auto& f : fields) {
      const auto v = parse_double(f);
      if (!v) {
        numeric = false;
        break;
      }
      row.push_back(*v);
    }
    if (!numeric) {
      if (rows.empty() && t.header.empty()) {
        t.header = fields;
        continue;
      }
      throw ParseError(where + ":" + std::to_string(lineno) + ": non-numeric field");
    }
    const std::size_t width = t.header.empty() ? (rows.empty() ? row.size() : rows.front().size()) : t.header.size();
    if (row.size() != width) throw ParseError(where + ":" + std::to_string(lineno) + ": wrong number of columns");
    rows.push_back(std::move(row));
  }
  t.values = FeatureMatrix::from_rows(rows);
  if (t.values.dim == 0 && !t.header.empty()) t.values.dim = t.header.size();
  return t;
}

inline Table read_csv(const std::string& path) {
  auto in = open_in(path);
  return parse_csv(in, path);
}

/// Square distance matrix CSV.
inline DistanceOracle read_matrix(const std::string& path) {
  const Table t = read_csv(path);
  if (t.values.n != t.values.dim) throw ParseError(path + ": distance matrix must be square");
  return DistanceOracle::from_matrix(t.values.data, t.values.n);
}

inline WeightedTree parse_tree(std::istream& in, const std::string& where = "input") {
  std::vector<TreeEdge> edges;
  std::size_t max_node = 0;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto body = trim(line);
    if (body.empty() || body.front() == '#') continue;
    std::istringstream ss{std::string(body)};
    long long u = -1, v = -1;
    double w = 0.0;
    if (!(ss >> u >> v >> w) || u < 0 || v < 0)
      throw ParseError(where + ":" + std::to_string(lineno) + ": expected 'u v weight'");
    edges.push_back({static_cast<std::size_t>(u), static_cast<std::size_t>(v), w});
    max_node = std::max({max_node, static_cast<std::size_t>(u), static_cast<std::size_t>(v)});
  }
  const std::size_t n = edges.empty() ? 1 : max_node + 1;
  return WeightedTree(n, std::move(edges));
}

inline WeightedTree read_tree(const std::string& path) {
  auto in = open_in(path);
  return parse_tree(in, path);
}

/// Labels, one per line; negative entries come back as kExcluded.
inline constexpr std::size_t kExcluded = std::numeric_limits<std::size_t>::max();

inline std::vector<std::size_t> parse_assignment(std::istream& in, const std::string& where = "input") {
  std::vector<std::size_t> labels;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto body = trim(line);
    if (body.empty()) continue;
    long long v = 0;
    const auto* end = body.data() + body.size();
    const auto [ptr, ec] = std::from_chars(body.data(), end, v);
    if (ec != std::errc() || ptr != end)
      throw ParseError(where + ":" + std::to_string(lineno) + ": expected an integer label");
    labels.push_back(v < 0 ? kExcluded : static_cast<std::size_t>(v));
  }
  return labels;
}

inline std::vector<std::size_t> read_assignment(const std::string& path) {
  auto in = open_in(path);
  return parse_assignment(in, path);
}

inline void write_assignment(std::ostream& out, const std::vector<std::size_t>& labels) {
  for (std::size_t v : labels) {
    if (v == kExcluded)
      out << -1 << '\n';
    else
      out << v << '\n';
  }
}

/// Shortest decimal text that reads back to the same double.
inline std::string format_double(double v) {
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[64];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, ptr);
}

inline void write_points(std::ostream& out, const FeatureMatrix& m, const std::vector<std::string>& header = {}) {
  if (!header.empty()) {
    for (std::size_t c = 0; c < header.size(); ++c) out << (c ? "," : "") << header[c];
    out << '\n';
  }
  for (std::size_t i = 0; i < m.n; ++i) {
    for (std::size_t c = 0; c < m.dim; ++c) out << (c ? "," : "") << format_double(m.at(i, c));
    out << '\n';
  }
}

inline void write_matrix(std::ostream& out, const std::vector<double>& flat, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) out << (j ? "," : "") << format_double(flat[i * n + j]);
    out << '\n';
  }
}

/// Zero mean and unit variance per column (population variance); constant
/// columns become all zero.
inline FeatureMatrix standardize(FeatureMatrix m) {
  for (std::size_t c = 0; c < m.dim; ++c) {
    double mean = 0.0;
    for (std::size_t i = 0; i < m.n; ++i) mean += m.at(i, c);
    mean /= static_cast<double>(m.n);
    double var = 0.0;
    for (std::size_t i = 0; i < m.n; ++i) var += (m.at(i, c) - mean) * (m.at(i, c) - mean);
    var /= static_cast<double>(m.n);
    const double sd = std::sqrt(var);
    for (std::size_t i = 0; i < m.n; ++i) m.at(i, c) = sd > 0.0 ? (m.at(i, c) - mean) / sd : 0.0;
  }
  return m;
}

/// Affine map of each column onto [0, 1]; constant columns become all zero.
inline FeatureMatrix min_max_normalize(FeatureMatrix m) {
  for (std::size_t c = 0; c < m.dim; ++c) {
    double lo = kInfNorm, hi = -kInfNorm;
    for (std::size_t i = 0; i < m.n; ++i) {
      lo = std::min(lo, m.at(i, c));
      hi = std::max(hi, m.at(i, c));
    }
    for (std::size_t i = 0; i < m.n; ++i) m.at(i, c) = hi > lo ? (m.at(i, c) - lo) / (hi - lo) : 0.0;
  }
  return m;
}

}  // namespace ipstable::io
