#pragma once

#include <cstddef>

#include "tost/alloc_stats.hpp"

namespace tost {

// Dense row-major matrix of doubles. Storage is tracked by alloc_stats so
// benchmarks can report bytes requested. Rows are contiguous; row(i) gives a
// pointer to the i-th row.
class Matrix {
 public:
  Matrix() = default;
  Matrix(std::size_t rows, std::size_t cols)
      : rows_(rows), cols_(cols), data_(rows * cols, 0.0) {}

  static Matrix identity(std::size_t n) {
    Matrix m(n, n);
    for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
    return m;
  }

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  std::size_t size() const { return data_.size(); }
  bool empty() const { return data_.empty(); }

  double& operator()(std::size_t i, std::size_t j) { return data_[i * cols_ + j]; }
  double operator()(std::size_t i, std::size_t j) const { return data_[i * cols_ + j]; }

  double* data() { return data_.data(); }
  const double* data() const { return data_.data(); }
  double* row(std::size_t i) { return data_.data() + i * cols_; }
  const double* row(std::size_t i) const { return data_.data() + i * cols_; }

  void fill(double v) {
    for (auto& x : data_) x = v;
  }

  Matrix& operator+=(const Matrix& rhs);
  Matrix& operator-=(const Matrix& rhs);
  Matrix& operator*=(double s);

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  alloc_stats::tracked_vector<double> data_;
};

Matrix operator+(const Matrix& a, const Matrix& b);
Matrix operator-(const Matrix& a, const Matrix& b);
Matrix operator*(double s, const Matrix& a);

// C = A B
Matrix multiply(const Matrix& a, const Matrix& b);
// C = A^T B
Matrix multiply_at_b(const Matrix& a, const Matrix& b);
// C = A B^T
Matrix multiply_a_bt(const Matrix& a, const Matrix& b);
Matrix transpose(const Matrix& a);

double max_abs(const Matrix& a);
double max_abs_diff(const Matrix& a, const Matrix& b);
double frobenius(const Matrix& a);
bool all_finite(const Matrix& a);

}  // namespace tost
