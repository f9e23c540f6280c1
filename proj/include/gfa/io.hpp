#pragma once

// Plain-text dataset formats: edge lists, node label CSV, feature CSV, and
// key=value config files. Parse failures carry the 1-based line number.

#include <charconv>
#include <fstream>
#include <iomanip>
#include <map>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "gfa/errors.hpp"
#include "gfa/graph.hpp"

namespace gfa::io {

namespace detail {

inline std::ifstream open_in(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InvalidInput("cannot open '" + path + "'");
  return in;
}

inline std::ofstream open_out(const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw InvalidInput("cannot write '" + path + "'");
  out << std::setprecision(17);
  return out;
}

inline std::string_view trim(std::string_view s) {
  const char* ws = " \t\r\n";
  auto b = s.find_first_not_of(ws);
  if (b == std::string_view::npos) return {};
  return s.substr(b, s.find_last_not_of(ws) - b + 1);
}

template <class T>
T parse_number(std::string_view tok, const std::string& file, std::size_t line, const char* what) {
  T v{};
  auto [p, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), v);
  if (ec != std::errc() || p != tok.data() + tok.size())
    throw ParseError(file, line, std::string("bad ") + what + " '" + std::string(tok) + "'");
  return v;
}

inline std::vector<std::string_view> split(std::string_view s, char sep) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  for (;;) {
    auto pos = s.find(sep, start);
    out.push_back(trim(s.substr(start, pos - start)));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return out;
}

}  // namespace detail

inline std::string read_bytes(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InvalidInput("cannot open '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

/// One "u v" pair per line; '#' lines and blank lines are skipped.
inline std::vector<Edge> read_edge_list(const std::string& path) {
  auto in = detail::open_in(path);
  std::vector<Edge> edges;
  std::string line;
  for (std::size_t no = 1; std::getline(in, line); ++no) {
    auto s = detail::trim(line);
    if (s.empty() || s.front() == '#') continue;
    std::istringstream ls{std::string(s)};
    std::string a, b, extra;
    if (!(ls >> a >> b) || (ls >> extra)) throw ParseError(path, no, "expected exactly two node ids");
    auto u = detail::parse_number<std::int64_t>(a, path, no, "node id");
    auto v = detail::parse_number<std::int64_t>(b, path, no, "node id");
    if (u < 0 || v < 0) throw ParseError(path, no, "negative node id");
    edges.emplace_back(u, v);
  }
  return edges;
}

/// CSV with header "node,label"; every node 0..n-1 must appear exactly once.
inline std::vector<int> read_labels(const std::string& path) {
  auto in = detail::open_in(path);
  std::string line;
  std::size_t no = 1;
  if (!std::getline(in, line)) throw ParseError(path, 1, "empty file, expected header node,label");
  auto head = detail::split(detail::trim(line), ',');
  if (head.size() != 2 || head[0] != "node" || head[1] != "label")
    throw ParseError(path, 1, "expected header node,label");
  std::map<std::int64_t, std::pair<int, std::size_t>> seen;
  while (std::getline(in, line)) {
    ++no;
    auto s = detail::trim(line);
    if (s.empty()) continue;
    auto f = detail::split(s, ',');
    if (f.size() != 2) throw ParseError(path, no, "expected two fields");
    auto node = detail::parse_number<std::int64_t>(f[0], path, no, "node id");
    auto label = detail::parse_number<int>(f[1], path, no, "label");
    if (node < 0) throw ParseError(path, no, "negative node id");
    if (label < 0) throw ParseError(path, no, "negative label");
    if (!seen.emplace(node, std::make_pair(label, no)).second) throw ParseError(path, no, "duplicate node id");
  }
  std::vector<int> labels;
  labels.reserve(seen.size());
  std::int64_t expect = 0;
  for (const auto& [node, rec] : seen) {
    if (node != expect) throw ParseError(path, rec.second, "node ids must cover 0..n-1; missing " + std::to_string(expect));
    labels.push_back(rec.first);
    ++expect;
  }
  if (labels.empty()) throw ParseError(path, no, "no labels");
  return labels;
}

/// One row of floats per node, comma-separated, no header.
inline Matrix read_features(const std::string& path, std::size_t n) {
  auto in = detail::open_in(path);
  std::vector<std::vector<double>> rows;
  std::string line;
  for (std::size_t no = 1; std::getline(in, line); ++no) {
    auto s = detail::trim(line);
    if (s.empty()) continue;
    std::vector<double> row;
    for (auto tok : detail::split(s, ',')) row.push_back(detail::parse_number<double>(tok, path, no, "float"));
    if (!rows.empty() && row.size() != rows.front().size())
      throw ParseError(path, no, "row has " + std::to_string(row.size()) + " columns, expected " +
                                     std::to_string(rows.front().size()));
    rows.push_back(std::move(row));
  }
  if (rows.size() != n)
    throw ParseError(path, rows.size(), "expected " + std::to_string(n) + " rows, found " + std::to_string(rows.size()));
  Matrix x(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(rows.front().size()));
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < rows[i].size(); ++j) x(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = rows[i][j];
  return x;
}

inline LabeledGraph read_graph(const std::string& edges_path, const std::string& labels_path) {
  return build_graph(read_edge_list(edges_path), read_labels(labels_path));
}

inline void write_edge_list(const std::string& path, const LabeledGraph& g) {
  auto out = detail::open_out(path);
  out << "# n=" << g.n() << "\n";
  for (const auto& [u, v] : g.edges()) out << u << ' ' << v << '\n';
}

inline void write_labels(const std::string& path, const std::vector<int>& labels) {
  auto out = detail::open_out(path);
  out << "node,label\n";
  for (std::size_t i = 0; i < labels.size(); ++i) out << i << ',' << labels[i] << '\n';
}

inline void write_matrix_csv(std::ostream& out, const Matrix& x) {
  out << std::setprecision(17);
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    for (Eigen::Index j = 0; j < x.cols(); ++j) out << (j ? "," : "") << x(i, j);
    out << '\n';
  }
}

inline void write_features(const std::string& path, const Matrix& x) {
  auto out = detail::open_out(path);
  write_matrix_csv(out, x);
}

/// CSV with a header row.
inline void write_csv(std::ostream& out, const std::vector<std::string>& header,
                      const std::vector<std::vector<double>>& rows) {
  out << std::setprecision(17);
  for (std::size_t j = 0; j < header.size(); ++j) out << (j ? "," : "") << header[j];
  out << '\n';
  for (const auto& r : rows) {
    for (std::size_t j = 0; j < r.size(); ++j) out << (j ? "," : "") << r[j];
    out << '\n';
  }
}

inline void write_csv(const std::string& path, const std::vector<std::string>& header,
                      const std::vector<std::vector<double>>& rows) {
  auto out = detail::open_out(path);
  write_csv(out, header, rows);
}

/// key = value lines; '#' starts a comment, [section] headers are ignored,
/// surrounding quotes on values are dropped.
inline std::map<std::string, std::string> read_config(const std::string& path) {
  auto in = detail::open_in(path);
  std::map<std::string, std::string> kv;
  std::string line;
  for (std::size_t no = 1; std::getline(in, line); ++no) {
    auto hash = line.find('#');
    auto s = detail::trim(std::string_view(line).substr(0, hash));
    if (s.empty() || s.front() == '[') continue;
    auto eq = s.find('=');
    if (eq == std::string_view::npos) throw ParseError(path, no, "expected key = value");
    auto key = detail::trim(s.substr(0, eq));
    auto val = detail::trim(s.substr(eq + 1));
    if (key.empty()) throw ParseError(path, no, "empty key");
    if (val.size() >= 2 && (val.front() == '"' || val.front() == '\'') && val.back() == val.front())
      val = val.substr(1, val.size() - 2);
    kv[std::string(key)] = std::string(val);
  }
  return kv;
}

}  // namespace gfa::io
