#pragma once

// Dense N-way arrays and the small set of linear-algebra kernels the rest of
// the library is written against.
//
// Linearization is first-mode-fastest: entry (i_0, ..., i_{N-1}) lives at
// offset sum_n i_n * prod_{m<n} I_m.  A Matrix is the two-mode case of the
// same rule (column-major), so a Matrix can be handed to Eigen::Map directly.

#include <cstddef>
#include <initializer_list>
#include <span>
#include <stdexcept>
#include <vector>

namespace cherrynet {

using Shape = std::vector<std::size_t>;

/// Product of all dimensions; 1 for an empty shape.
std::size_t num_elements(const Shape& shape);

class ShapeError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

class Matrix {
 public:
  Matrix() = default;
  Matrix(std::size_t rows, std::size_t cols, double fill = 0.0);
  Matrix(std::size_t rows, std::size_t cols, std::vector<double> values);

  /// Row-major nested initializer, for tests and hand-written examples.
  static Matrix from_rows(std::initializer_list<std::initializer_list<double>> rows);
  static Matrix identity(std::size_t n);

  std::size_t rows() const noexcept { return rows_; }
  std::size_t cols() const noexcept { return cols_; }
  std::size_t size() const noexcept { return values_.size(); }

  double& operator()(std::size_t r, std::size_t c) noexcept { return values_[r + rows_ * c]; }
  double operator()(std::size_t r, std::size_t c) const noexcept { return values_[r + rows_ * c]; }

  double* data() noexcept { return values_.data(); }
  const double* data() const noexcept { return values_.data(); }
  std::span<double> values() noexcept { return values_; }
  std::span<const double> values() const noexcept { return values_; }

  std::span<double> column(std::size_t c) noexcept { return {values_.data() + rows_ * c, rows_}; }
  std::span<const double> column(std::size_t c) const noexcept {
    return {values_.data() + rows_ * c, rows_};
  }

  Matrix transpose() const;

  friend bool operator==(const Matrix&, const Matrix&) = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> values_;
};

class DenseTensor {
 public:
  DenseTensor() = default;
  explicit DenseTensor(Shape shape, double fill = 0.0);
  DenseTensor(Shape shape, std::vector<double> values);

  const Shape& shape() const noexcept { return shape_; }
  std::size_t order() const noexcept { return shape_.size(); }
  std::size_t dim(std::size_t mode) const { return shape_.at(mode); }
  std::size_t size() const noexcept { return values_.size(); }

  double* data() noexcept { return values_.data(); }
  const double* data() const noexcept { return values_.data(); }
  std::span<double> values() noexcept { return values_; }
  std::span<const double> values() const noexcept { return values_; }

  double& operator[](std::size_t offset) noexcept { return values_[offset]; }
  double operator[](std::size_t offset) const noexcept { return values_[offset]; }

  /// Linear offset of a multi-index; throws on rank or bound violations.
  std::size_t offset(std::span<const std::size_t> index) const;
  double& at(std::span<const std::size_t> index) { return values_[offset(index)]; }
  double at(std::span<const std::size_t> index) const { return values_[offset(index)]; }
  double& at(std::initializer_list<std::size_t> index) { return at(std::span(index.begin(), index.size())); }
  double at(std::initializer_list<std::size_t> index) const {
    return at(std::span(index.begin(), index.size()));
  }

  /// Distance between consecutive entries along `mode`.
  std::size_t stride(std::size_t mode) const;

  bool all_finite() const noexcept;

  friend bool operator==(const DenseTensor&, const DenseTensor&) = default;

 private:
  Shape shape_;
  std::vector<double> values_;
};

/// Advance a first-index-fastest odometer; returns false after the last index.
bool next_index(std::span<std::size_t> index, std::span<const std::size_t> dims) noexcept;

/// Mode-k matricization: rows follow mode k, columns enumerate the remaining
/// modes in ascending order with the smallest one varying fastest.
Matrix unfold(const DenseTensor& t, std::size_t mode);

/// Inverse of unfold for the given target shape.
DenseTensor fold(const Matrix& m, std::size_t mode, const Shape& shape);

Matrix kronecker(const Matrix& a, const Matrix& b);

/// Column-wise Kronecker product: c((i * b.rows) + j, l) = a(i, l) * b(j, l).
Matrix khatri_rao(const Matrix& a, const Matrix& b);

/// Elementwise product where size-1 dimensions broadcast against the other operand.
DenseTensor broadcast_hadamard(const DenseTensor& a, const DenseTensor& b);

Matrix matmul(const Matrix& a, const Matrix& b);
/// a^T * b without forming the transpose.
Matrix transpose_matmul(const Matrix& a, const Matrix& b);

double frobenius_norm(std::span<const double> values);
double max_abs_diff(std::span<const double> a, std::span<const double> b);

}  // namespace cherrynet
