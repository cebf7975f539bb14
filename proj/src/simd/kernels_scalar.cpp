#include "cherrynet/simd/kernels.hpp"

namespace cherrynet::simd {

namespace {

void mul(double* dst, const double* src, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) dst[i] *= src[i];
}

void scale(double* dst, double s, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) dst[i] *= s;
}

void scaled_copy(double* dst, const double* src, double s, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) dst[i] = s * src[i];
}

double dot(const double* a, const double* b, std::size_t n) {
  double s = 0.0;
  for (std::size_t i = 0; i < n; ++i) s += a[i] * b[i];
  return s;
}

double sum_sq(const double* a, std::size_t n) {
  double s = 0.0;
  for (std::size_t i = 0; i < n; ++i) s += a[i] * a[i];
  return s;
}

double sq_dist(const double* a, const double* b, std::size_t n) {
  double s = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double d = a[i] - b[i];
    s += d * d;
  }
  return s;
}

void mul_acc(double* acc, const double* a, const double* b, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) acc[i] += a[i] * b[i];
}

void sq_acc(double* acc, const double* a, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) acc[i] += a[i] * a[i];
}

void prox_blend(double* out, const double* prev, const double* target, const double* observed,
                const double* mask, double rho, std::size_t n) {
  const double denom = 1.0 + rho;
  for (std::size_t i = 0; i < n; ++i)
    out[i] = mask[i] != 0.0 ? observed[i] : (target[i] + rho * prev[i]) / denom;
}

}  // namespace

const KernelTable& scalar_kernels() noexcept {
  static const KernelTable table{Isa::scalar, "scalar", mul,     scale,  scaled_copy, dot,
                                 sum_sq,      sq_dist,  mul_acc, sq_acc, prox_blend};
  return table;
}

}  // namespace cherrynet::simd
