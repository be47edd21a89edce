#pragma once

#include <Eigen/Dense>

#include <cctype>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "recert/core_types.hpp"

namespace recert {

struct IoError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Decimal with 12 significant digits; scientific notation for
// |x| < 1e-4 or |x| >= 1e8.
inline std::string format_number(double x) {
  if (std::isnan(x)) return "nan";
  if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
  if (x == 0.0) return "0";
  const double ax = std::abs(x);
  char buf[64];
  if (ax < 1e-4 || ax >= 1e8) {
    std::snprintf(buf, sizeof buf, "%.11e", x);
  } else {
    const int magnitude = static_cast<int>(std::floor(std::log10(ax)));
    std::snprintf(buf, sizeof buf, "%.*f", 11 - magnitude, x);
  }
  return buf;
}

inline double parse_number(const std::string& text) {
  try {
    std::size_t pos = 0;
    const double value = std::stod(text, &pos);
    while (pos < text.size() && std::isspace(static_cast<unsigned char>(text[pos])))
      ++pos;
    if (pos != text.size()) throw IoError("trailing characters");
    return value;
  } catch (const std::exception&) {
    throw IoError("cannot parse number: '" + text + "'");
  }
}

inline std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> fields;
  std::string field;
  std::stringstream stream(line);
  while (std::getline(stream, field, ',')) fields.push_back(field);
  if (!line.empty() && line.back() == ',') fields.emplace_back();
  return fields;
}

inline std::string trim(const std::string& s) {
  std::size_t first = 0;
  std::size_t last = s.size();
  while (first < last && std::isspace(static_cast<unsigned char>(s[first])))
    ++first;
  while (last > first && std::isspace(static_cast<unsigned char>(s[last - 1])))
    --last;
  return s.substr(first, last - first);
}

// Matrix files: first line is the header "rows,cols", second line the two
// sizes, then one comma-separated line per matrix row (row-major).
inline void write_matrix_file(const std::string& path,
                              const Eigen::Ref<const Matrix>& m) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot open for writing: " + path);
  out << "rows,cols\n" << m.rows() << "," << m.cols() << "\n";
  for (Index i = 0; i < m.rows(); ++i) {
    for (Index j = 0; j < m.cols(); ++j) {
      if (j > 0) out << ",";
      out << format_number(m(i, j));
    }
    out << "\n";
  }
  if (!out) throw IoError("write failed: " + path);
}

inline Matrix read_matrix_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open for reading: " + path);
  std::string line;
  if (!std::getline(in, line) || trim(line) != "rows,cols")
    throw IoError(path + ": expected header 'rows,cols'");
  if (!std::getline(in, line)) throw IoError(path + ": missing size line");
  const auto sizes = split_csv_line(trim(line));
  if (sizes.size() != 2) throw IoError(path + ": size line must be 'R,C'");
  const Index rows = static_cast<Index>(parse_number(sizes[0]));
  const Index cols = static_cast<Index>(parse_number(sizes[1]));
  if (rows < 1 || cols < 1) throw IoError(path + ": sizes must be positive");
  Matrix m(rows, cols);
  for (Index i = 0; i < rows; ++i) {
    if (!std::getline(in, line))
      throw IoError(path + ": unexpected end of file at row " +
                    std::to_string(i + 1));
    const auto fields = split_csv_line(trim(line));
    if (static_cast<Index>(fields.size()) != cols)
      throw IoError(path + ": row " + std::to_string(i + 1) + " has " +
                    std::to_string(fields.size()) + " fields, expected " +
                    std::to_string(cols));
    for (Index j = 0; j < cols; ++j) m(i, j) = parse_number(fields[j]);
  }
  return m;
}

inline void write_vector_file(const std::string& path,
                              const Eigen::Ref<const Vector>& v) {
  write_matrix_file(path, v);
}

// Accepts an R x 1 or 1 x C matrix file as a vector.
inline Vector read_vector_file(const std::string& path) {
  const Matrix m = read_matrix_file(path);
  if (m.cols() == 1) return m.col(0);
  if (m.rows() == 1) return m.row(0).transpose();
  throw IoError(path + ": expected a vector (one row or one column)");
}

}  // namespace recert
