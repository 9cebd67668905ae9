#pragma once

// Matrix file I/O: header-free CSV (one sample per column, decimal or
// scientific notation) and a compact binary format:
//   magic "ALPH" | u32 rows | u32 cols | rows*cols little-endian f64, row-major

#include <charconv>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "alpha/matrix.hpp"

namespace alpha {

enum class MatrixFormat { csv, binary };

namespace detail {

inline double parse_cell(const std::string& cell, Index row, Index col) {
  const char* begin = cell.data();
  const char* end = begin + cell.size();
  while (begin < end && (*begin == ' ' || *begin == '\t')) ++begin;
  while (end > begin && (end[-1] == ' ' || end[-1] == '\t' || end[-1] == '\r')) --end;
  double value = 0.0;
  auto [ptr, ec] = std::from_chars(begin, end, value);
  if (ec != std::errc{} || ptr != end)
    throw IoError("non-numeric cell at row " + std::to_string(row + 1) +
                  ", col " + std::to_string(col + 1) + ": '" + cell + "'");
  if (!std::isfinite(value))
    throw IoError("non-finite value at row " + std::to_string(row + 1) +
                  ", col " + std::to_string(col + 1));
  return value;
}

}  // namespace detail

inline Matrix load_matrix_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path);
  std::vector<std::vector<double>> rows;
  std::string line;
  Index ncols = -1;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::vector<double> row;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ','))
      row.push_back(detail::parse_cell(cell, static_cast<Index>(rows.size()),
                                       static_cast<Index>(row.size())));
    if (ncols < 0) ncols = static_cast<Index>(row.size());
    if (static_cast<Index>(row.size()) != ncols)
      throw IoError(path + ": ragged row " + std::to_string(rows.size() + 1) +
                    " (expected " + std::to_string(ncols) + " columns, got " +
                    std::to_string(row.size()) + ")");
    rows.push_back(std::move(row));
  }
  if (rows.empty()) throw IoError(path + ": empty matrix file");
  Matrix m(static_cast<Index>(rows.size()), ncols);
  for (Index i = 0; i < m.rows(); ++i)
    for (Index j = 0; j < m.cols(); ++j) m(i, j) = rows[i][j];
  return m;
}

inline void save_matrix_csv(const Matrix& m, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path);
  char buf[64];
  for (Index i = 0; i < m.rows(); ++i) {
    for (Index j = 0; j < m.cols(); ++j) {
      int len = std::snprintf(buf, sizeof(buf), "%.17g", m(i, j));
      if (j) out << ',';
      out.write(buf, len);
    }
    out << '\n';
  }
  if (!out) throw IoError("write failure on " + path);
}

inline Matrix load_matrix_binary(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path);
  char magic[4];
  in.read(magic, 4);
  if (!in || std::memcmp(magic, "ALPH", 4) != 0)
    throw IoError(path + ": bad magic, not an ALPH matrix file");
  std::uint32_t rows = 0, cols = 0;
  in.read(reinterpret_cast<char*>(&rows), 4);
  in.read(reinterpret_cast<char*>(&cols), 4);
  if (!in || rows == 0 || cols == 0)
    throw IoError(path + ": bad header dimensions");
  Matrix m(rows, cols);
  std::vector<double> payload(static_cast<std::size_t>(rows) * cols);
  in.read(reinterpret_cast<char*>(payload.data()),
          static_cast<std::streamsize>(payload.size() * sizeof(double)));
  if (!in) throw IoError(path + ": truncated payload");
  for (Index i = 0; i < m.rows(); ++i)
    for (Index j = 0; j < m.cols(); ++j)
      m(i, j) = payload[static_cast<std::size_t>(i) * cols + j];
  require_finite(m, path);
  return m;
}

inline void save_matrix_binary(const Matrix& m, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path);
  out.write("ALPH", 4);
  const std::uint32_t rows = static_cast<std::uint32_t>(m.rows());
  const std::uint32_t cols = static_cast<std::uint32_t>(m.cols());
  out.write(reinterpret_cast<const char*>(&rows), 4);
  out.write(reinterpret_cast<const char*>(&cols), 4);
  std::vector<double> payload(static_cast<std::size_t>(rows) * cols);
  for (Index i = 0; i < m.rows(); ++i)
    for (Index j = 0; j < m.cols(); ++j)
      payload[static_cast<std::size_t>(i) * cols + j] = m(i, j);
  out.write(reinterpret_cast<const char*>(payload.data()),
            static_cast<std::streamsize>(payload.size() * sizeof(double)));
  if (!out) throw IoError("write failure on " + path);
}

inline Matrix load_matrix(const std::string& path, MatrixFormat fmt) {
  Matrix m = fmt == MatrixFormat::csv ? load_matrix_csv(path) : load_matrix_binary(path);
  require_finite(m, path);
  return m;
}

inline void save_matrix(const Matrix& m, const std::string& path, MatrixFormat fmt) {
  if (fmt == MatrixFormat::csv)
    save_matrix_csv(m, path);
  else
    save_matrix_binary(m, path);
}

/// Guess format from extension: ".bin" is binary, anything else CSV.
inline MatrixFormat format_for(const std::string& path) {
  return std::filesystem::path(path).extension() == ".bin" ? MatrixFormat::binary
                                                           : MatrixFormat::csv;
}

}  // namespace alpha
