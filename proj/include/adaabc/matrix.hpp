#pragma once

#include <cmath>
#include <cstddef>
#include <initializer_list>
#include <vector>

#include "adaabc/common.hpp"

namespace adaabc {

// Dense row-major matrix of doubles. Rows index samples throughout the
// library; columns index features or units.
struct Matrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> data;  // rows * cols, row-major

  Matrix() = default;
  Matrix(std::size_t r, std::size_t c, double fill = 0.0)
      : rows(r), cols(c), data(r * c, fill) {}

  static Matrix from_rows(std::initializer_list<std::initializer_list<double>> r) {
    Matrix m(r.size(), r.size() ? r.begin()->size() : 0);
    std::size_t i = 0;
    for (const auto& row : r) {
      std::size_t j = 0;
      for (double v : row) m(i, j++) = v;
      ++i;
    }
    return m;
  }

  double& operator()(std::size_t r, std::size_t c) { return data[r * cols + c]; }
  double operator()(std::size_t r, std::size_t c) const { return data[r * cols + c]; }

  double* row(std::size_t r) { return data.data() + r * cols; }
  const double* row(std::size_t r) const { return data.data() + r * cols; }

  bool same_shape(const Matrix& o) const { return rows == o.rows && cols == o.cols; }

  bool all_finite() const {
    for (double v : data) {
      if (!std::isfinite(v)) return false;
    }
    return true;
  }

  void fill(double v) { std::fill(data.begin(), data.end(), v); }
};

inline bool operator==(const Matrix& a, const Matrix& b) {
  return a.rows == b.rows && a.cols == b.cols && a.data == b.data;
}

}  // namespace adaabc
