#include "cherrynet/tensor.hpp"

#include <Eigen/Core>

#include <algorithm>
#include <cmath>
#include <functional>
#include <numeric>
#include <string>

namespace cherrynet {

namespace {

using ConstMap = Eigen::Map<const Eigen::MatrixXd>;

std::string shape_string(const Shape& s) {
  std::string out = "(";
  for (std::size_t n = 0; n < s.size(); ++n) {
    if (n) out += ",";
    out += std::to_string(s[n]);
  }
  return out + ")";
}

ConstMap as_eigen(const Matrix& m) {
  return ConstMap(m.data(), static_cast<Eigen::Index>(m.rows()), static_cast<Eigen::Index>(m.cols()));
}

}  // namespace

std::size_t num_elements(const Shape& shape) {
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>());
}

// ---- Matrix ---------------------------------------------------------------

Matrix::Matrix(std::size_t rows, std::size_t cols, double fill)
    : rows_(rows), cols_(cols), values_(rows * cols, fill) {}

Matrix::Matrix(std::size_t rows, std::size_t cols, std::vector<double> values)
    : rows_(rows), cols_(cols), values_(std::move(values)) {
  if (values_.size() != rows_ * cols_)
    throw ShapeError("matrix " + std::to_string(rows_) + "x" + std::to_string(cols_) + " given " +
                     std::to_string(values_.size()) + " values");
}

Matrix Matrix::from_rows(std::initializer_list<std::initializer_list<double>> rows) {
  const std::size_t r = rows.size();
  const std::size_t c = r ? rows.begin()->size() : 0;
  Matrix m(r, c);
  std::size_t i = 0;
  for (const auto& row : rows) {
    if (row.size() != c) throw ShapeError("ragged matrix literal");
    std::size_t j = 0;
    for (double v : row) m(i, j++) = v;
    ++i;
  }
  return m;
}

Matrix Matrix::identity(std::size_t n) {
  Matrix m(n, n);
  for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
  return m;
}

Matrix Matrix::transpose() const {
  Matrix t(cols_, rows_);
  for (std::size_t c = 0; c < cols_; ++c)
    for (std::size_t r = 0; r < rows_; ++r) t(c, r) = (*this)(r, c);
  return t;
}

// ---- DenseTensor ----------------------------------------------------------

DenseTensor::DenseTensor(Shape shape, double fill)
    : shape_(std::move(shape)), values_(num_elements(shape_), fill) {}

DenseTensor::DenseTensor(Shape shape, std::vector<double> values)
    : shape_(std::move(shape)), values_(std::move(values)) {
  if (values_.size() != num_elements(shape_))
    throw ShapeError("tensor of shape " + shape_string(shape_) + " needs " +
                     std::to_string(num_elements(shape_)) + " values, got " +
                     std::to_string(values_.size()));
}

std::size_t DenseTensor::offset(std::span<const std::size_t> index) const {
  if (index.size() != shape_.size())
    throw ShapeError("index has " + std::to_string(index.size()) + " entries for an order-" +
                     std::to_string(shape_.size()) + " tensor");
  std::size_t off = 0;
  std::size_t stride = 1;
  for (std::size_t n = 0; n < shape_.size(); ++n) {
    if (index[n] >= shape_[n])
      throw std::out_of_range("index " + std::to_string(index[n]) + " out of range for mode " +
                              std::to_string(n) + " of size " + std::to_string(shape_[n]));
    off += index[n] * stride;
    stride *= shape_[n];
  }
  return off;
}

std::size_t DenseTensor::stride(std::size_t mode) const {
  if (mode >= shape_.size()) throw std::out_of_range("mode out of range");
  std::size_t s = 1;
  for (std::size_t m = 0; m < mode; ++m) s *= shape_[m];
  return s;
}

bool DenseTensor::all_finite() const noexcept {
  return std::all_of(values_.begin(), values_.end(), [](double v) { return std::isfinite(v); });
}

bool next_index(std::span<std::size_t> index, std::span<const std::size_t> dims) noexcept {
  for (std::size_t n = 0; n < index.size(); ++n) {
    if (++index[n] < dims[n]) return true;
    index[n] = 0;
  }
  return false;
}

// ---- unfold / fold --------------------------------------------------------
//
// Viewing the tensor as (left, I_k, right) with left = prod_{m<k} I_m, the
// entry at (l, i_k, r) sits at l + left * (i_k + I_k * r) and maps to column
// l + left * r of the unfolding.

Matrix unfold(const DenseTensor& t, std::size_t mode) {
  if (mode >= t.order())
    throw std::out_of_range("unfold: mode " + std::to_string(mode) + " for an order-" +
                            std::to_string(t.order()) + " tensor");
  const auto& s = t.shape();
  const std::size_t left = num_elements(Shape(s.begin(), s.begin() + mode));
  const std::size_t mid = s[mode];
  const std::size_t right = num_elements(Shape(s.begin() + mode + 1, s.end()));
  Matrix m(mid, left * right);
  for (std::size_t r = 0; r < right; ++r)
    for (std::size_t i = 0; i < mid; ++i)
      for (std::size_t l = 0; l < left; ++l) m(i, l + left * r) = t[l + left * (i + mid * r)];
  return m;
}

DenseTensor fold(const Matrix& m, std::size_t mode, const Shape& shape) {
  if (mode >= shape.size()) throw std::out_of_range("fold: mode out of range");
  const std::size_t left = num_elements(Shape(shape.begin(), shape.begin() + mode));
  const std::size_t mid = shape[mode];
  const std::size_t right = num_elements(Shape(shape.begin() + mode + 1, shape.end()));
  if (m.rows() != mid || m.cols() != left * right)
    throw ShapeError("fold: matrix " + std::to_string(m.rows()) + "x" + std::to_string(m.cols()) +
                     " does not unfold shape " + shape_string(shape) + " along mode " +
                     std::to_string(mode));
  DenseTensor t(shape);
  for (std::size_t r = 0; r < right; ++r)
    for (std::size_t i = 0; i < mid; ++i)
      for (std::size_t l = 0; l < left; ++l) t[l + left * (i + mid * r)] = m(i, l + left * r);
  return t;
}

// ---- products -------------------------------------------------------------

Matrix kronecker(const Matrix& a, const Matrix& b) {
  Matrix c(a.rows() * b.rows(), a.cols() * b.cols());
  for (std::size_t ac = 0; ac < a.cols(); ++ac)
    for (std::size_t bc = 0; bc < b.cols(); ++bc)
      for (std::size_t ar = 0; ar < a.rows(); ++ar) {
        const double s = a(ar, ac);
        for (std::size_t br = 0; br < b.rows(); ++br)
          c(ar * b.rows() + br, ac * b.cols() + bc) = s * b(br, bc);
      }
  return c;
}

Matrix khatri_rao(const Matrix& a, const Matrix& b) {
  if (a.cols() != b.cols())
    throw ShapeError("khatri_rao: column counts differ (" + std::to_string(a.cols()) + " vs " +
                     std::to_string(b.cols()) + ")");
  Matrix c(a.rows() * b.rows(), a.cols());
  for (std::size_t l = 0; l < a.cols(); ++l)
    for (std::size_t i = 0; i < a.rows(); ++i)
      for (std::size_t j = 0; j < b.rows(); ++j) c(i * b.rows() + j, l) = a(i, l) * b(j, l);
  return c;
}

DenseTensor broadcast_hadamard(const DenseTensor& a, const DenseTensor& b) {
  if (a.order() != b.order())
    throw ShapeError("broadcast_hadamard: orders differ (" + std::to_string(a.order()) + " vs " +
                     std::to_string(b.order()) + ")");
  const std::size_t n = a.order();
  Shape out(n);
  std::vector<std::size_t> sa(n), sb(n);
  std::size_t stride_a = 1, stride_b = 1;
  for (std::size_t m = 0; m < n; ++m) {
    const std::size_t da = a.dim(m), db = b.dim(m);
    if (da != db && da != 1 && db != 1)
      throw ShapeError("broadcast_hadamard: incompatible shapes " + shape_string(a.shape()) + " and " +
                       shape_string(b.shape()));
    out[m] = std::max(da, db);
    sa[m] = da == 1 ? 0 : stride_a;
    sb[m] = db == 1 ? 0 : stride_b;
    stride_a *= da;
    stride_b *= db;
  }
  DenseTensor c(out);
  if (c.size() == 0) return c;
  std::vector<std::size_t> idx(n, 0);
  std::size_t off = 0;
  do {
    std::size_t oa = 0, ob = 0;
    for (std::size_t m = 0; m < n; ++m) {
      oa += idx[m] * sa[m];
      ob += idx[m] * sb[m];
    }
    c[off++] = a[oa] * b[ob];
  } while (next_index(idx, out));
  return c;
}

Matrix matmul(const Matrix& a, const Matrix& b) {
  if (a.cols() != b.rows()) throw ShapeError("matmul: inner dimensions differ");
  Matrix c(a.rows(), b.cols());
  Eigen::Map<Eigen::MatrixXd>(c.data(), static_cast<Eigen::Index>(c.rows()),
                              static_cast<Eigen::Index>(c.cols())).noalias() = as_eigen(a) * as_eigen(b);
  return c;
}

Matrix transpose_matmul(const Matrix& a, const Matrix& b) {
  if (a.rows() != b.rows()) throw ShapeError("transpose_matmul: row counts differ");
  Matrix c(a.cols(), b.cols());
  Eigen::Map<Eigen::MatrixXd>(c.data(), static_cast<Eigen::Index>(c.rows()),
                              static_cast<Eigen::Index>(c.cols())).noalias() =
      as_eigen(a).transpose() * as_eigen(b);
  return c;
}

double frobenius_norm(std::span<const double> values) {
  double s = 0.0;
  for (double v : values) s += v * v;
  return std::sqrt(s);
}

double max_abs_diff(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw ShapeError("max_abs_diff: sizes differ");
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
  return m;
}

}  // namespace cherrynet
