#ifndef DLGEN_IO_HPP
#define DLGEN_IO_HPP

#include "dlgen/core.hpp"

#include <charconv>
#include <cstdio>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

namespace dlgen::io {

// Matrices are stored as headerless CSV, one matrix row per line.

inline std::vector<double> parse_csv_line(std::string_view line, const std::string& where) {
  std::vector<double> out;
  std::size_t pos = 0;
  while (pos <= line.size()) {
    std::size_t end = line.find(',', pos);
    if (end == std::string_view::npos) end = line.size();
    std::string cell(line.substr(pos, end - pos));
    const auto first = cell.find_first_not_of(" \t\r");
    const auto last = cell.find_last_not_of(" \t\r");
    if (first == std::string::npos) throw InvalidInput(where + ": empty CSV cell");
    cell = cell.substr(first, last - first + 1);
    try {
      std::size_t used = 0;
      double v = std::stod(cell, &used);
      if (used != cell.size()) throw std::invalid_argument(cell);
      out.push_back(v);
    } catch (const std::exception&) {
      throw InvalidInput(where + ": not a number: '" + cell + "'");
    }
    pos = end + 1;
  }
  return out;
}

inline Matrix parse_csv_matrix(std::istream& in, const std::string& where) {
  std::vector<std::vector<double>> rows;
  std::string line;
  while (std::getline(in, line)) {
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    rows.push_back(parse_csv_line(line, where));
    if (rows.back().size() != rows.front().size())
      throw InvalidInput(where + ": ragged CSV rows");
  }
  if (rows.empty()) throw InvalidInput(where + ": no data");
  Matrix m(static_cast<Index>(rows.size()), static_cast<Index>(rows.front().size()));
  for (Index i = 0; i < m.rows(); ++i)
    for (Index j = 0; j < m.cols(); ++j) m(i, j) = rows[i][j];
  if (!m.allFinite()) throw InvalidInput(where + ": non-finite value");
  return m;
}

inline Matrix read_csv_matrix(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InvalidInput("cannot open " + path);
  return parse_csv_matrix(in, path);
}

/// Shortest representation that round-trips exactly.
inline std::string format_double(double v) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, ptr);
}

inline void write_csv_matrix(std::ostream& out, const Matrix& m) {
  for (Index i = 0; i < m.rows(); ++i) {
    for (Index j = 0; j < m.cols(); ++j) {
      if (j) out << ',';
      out << format_double(m(i, j));
    }
    out << '\n';
  }
}

inline void write_csv_matrix(const std::string& path, const Matrix& m) {
  std::ofstream out(path);
  if (!out) throw InvalidInput("cannot write " + path);
  write_csv_matrix(out, m);
}

/// Dictionary file: n lines of p values. A sidecar `<path>.json` may carry
/// {"n", "p", "gamma", "normalized"}; when present its shape must agree.
inline Dictionary read_dictionary(const std::string& path) {
  Matrix m = read_csv_matrix(path);
  double gamma = 1.0;
  std::ifstream side(path + ".json");
  if (side) {
    nlohmann::json meta;
    try {
      side >> meta;
    } catch (const nlohmann::json::exception& e) {
      throw InvalidInput(path + ".json: " + e.what());
    }
    if (meta.contains("n") && meta["n"].get<Index>() != m.rows())
      throw InvalidInput(path + ".json: n does not match the CSV");
    if (meta.contains("p") && meta["p"].get<Index>() != m.cols())
      throw InvalidInput(path + ".json: p does not match the CSV");
    if (meta.contains("gamma")) gamma = meta["gamma"].get<double>();
  }
  return Dictionary(std::move(m), gamma);
}

inline void write_dictionary(const std::string& path, const Dictionary& d, bool normalized) {
  write_csv_matrix(path, d.atoms());
  std::ofstream side(path + ".json");
  nlohmann::json meta = {{"n", d.dim()}, {"p", d.size()}, {"gamma", d.gamma()}, {"normalized", normalized}};
  side << meta.dump(2) << '\n';
}

/// Single signal: one CSV line of n values.
inline Signal read_signal(const std::string& path) {
  Matrix m = read_csv_matrix(path);
  if (m.rows() != 1) throw InvalidInput(path + ": a signal file holds exactly one line");
  return m.row(0).transpose();
}

/// Signal set: one signal per line; returned as columns of an n x m matrix.
inline Matrix read_signals(const std::string& path) { return read_csv_matrix(path).transpose(); }

}  // namespace dlgen::io

#endif  // DLGEN_IO_HPP
