// Copyright 2026 dasp authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#pragma once

#include <fstream>
#include <iomanip>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "dasp/tensor.hpp"

namespace dasp::csv {

struct Table {
  std::vector<std::string> header;  // empty when the file had no header row
  std::vector<std::vector<double>> rows;

  Tensor to_tensor() const {
    if (rows.empty()) throw std::runtime_error("csv: empty table");
    const std::size_t c = rows[0].size();
    Tensor t({rows.size(), c});
    for (std::size_t i = 0; i < rows.size(); ++i) {
      if (rows[i].size() != c)
        throw std::runtime_error("csv: ragged row " + std::to_string(i));
      for (std::size_t j = 0; j < c; ++j) t.at(i, j) = rows[i][j];
    }
    return t;
  }
};

inline bool looks_numeric(const std::string& cell) {
  if (cell.empty()) return false;
  char* end = nullptr;
  std::strtod(cell.c_str(), &end);
  return end == cell.c_str() + cell.size();
}

/// Reads a comma-separated table. A first row with any non-numeric cell is
/// treated as the header. Throws with 1-based line/column location on
/// malformed input.
inline Table read(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw std::runtime_error("cannot open for read: " + path);
  Table table;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::vector<std::string> cells;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) cells.push_back(cell);
    if (!line.empty() && line.back() == ',') cells.push_back("");
    if (lineno == 1) {
      bool all_numeric = true;
      for (const auto& c : cells) all_numeric = all_numeric && looks_numeric(c);
      if (!all_numeric) {
        table.header = cells;
        continue;
      }
    }
    std::vector<double> row;
    row.reserve(cells.size());
    for (std::size_t j = 0; j < cells.size(); ++j) {
      if (!looks_numeric(cells[j]))
        throw std::runtime_error(path + ": malformed number at line " +
                                 std::to_string(lineno) + ", column " +
                                 std::to_string(j + 1));
      row.push_back(std::stod(cells[j]));
    }
    table.rows.push_back(std::move(row));
  }
  return table;
}

inline Tensor read_matrix(const std::string& path) {
  return read(path).to_tensor();
}

inline void write(const std::string& path,
                  const std::vector<std::string>& header,
                  const std::vector<std::vector<double>>& rows,
                  int precision = 12) {
  std::ofstream os(path);
  if (!os) throw std::runtime_error("cannot open for write: " + path);
  os << std::setprecision(precision);
  if (!header.empty()) {
    for (std::size_t j = 0; j < header.size(); ++j)
      os << header[j] << (j + 1 < header.size() ? "," : "");
    os << '\n';
  }
  for (const auto& row : rows) {
    for (std::size_t j = 0; j < row.size(); ++j)
      os << row[j] << (j + 1 < row.size() ? "," : "");
    os << '\n';
  }
}

inline void write_matrix(const std::string& path, const Tensor& m,
                         const std::vector<std::string>& header = {}) {
  if (m.ndim() != 2)
    throw std::invalid_argument("csv: write_matrix needs 2-D tensor");
  std::vector<std::vector<double>> rows(m.rows());
  for (std::size_t i = 0; i < m.rows(); ++i) {
    rows[i].resize(m.cols());
    for (std::size_t j = 0; j < m.cols(); ++j) rows[i][j] = m.at(i, j);
  }
  write(path, header, rows);
}

}  // namespace dasp::csv
