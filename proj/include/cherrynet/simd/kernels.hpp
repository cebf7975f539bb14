#pragma once

// Contiguous double-precision loops used on mode-1 fibers.
//
// Each instruction set provides one KernelTable.  The scalar table is the
// reference; vector tables must reproduce it exactly for elementwise
// kernels built from a single rounding (mul, scale, scaled_copy,
// prox_blend) and to reduction-order rounding for the rest.

#include <cstddef>
#include <string_view>

namespace cherrynet::simd {

enum class Isa { scalar, avx2 };

struct KernelTable {
  Isa isa;
  const char* name;

  /// dst[i] *= src[i]
  void (*mul)(double* dst, const double* src, std::size_t n);
  /// dst[i] *= s
  void (*scale)(double* dst, double s, std::size_t n);
  /// dst[i] = s * src[i]
  void (*scaled_copy)(double* dst, const double* src, double s, std::size_t n);
  double (*dot)(const double* a, const double* b, std::size_t n);
  double (*sum_sq)(const double* a, std::size_t n);
  /// sum (a[i] - b[i])^2
  double (*sq_dist)(const double* a, const double* b, std::size_t n);
  /// acc[i] += a[i] * b[i]
  void (*mul_acc)(double* acc, const double* a, const double* b, std::size_t n);
  /// acc[i] += a[i]^2
  void (*sq_acc)(double* acc, const double* a, std::size_t n);
  /// out[i] = mask[i] != 0 ? observed[i] : (target[i] + rho * prev[i]) / (1 + rho)
  void (*prox_blend)(double* out, const double* prev, const double* target, const double* observed,
                     const double* mask, double rho, std::size_t n);
};

const KernelTable& scalar_kernels() noexcept;

/// Null when the build has no AVX2 variant or the running CPU lacks AVX2/FMA.
const KernelTable* avx2_kernels() noexcept;

/// Best table for this machine, chosen once.  CHERRYNET_SIMD=scalar forces
/// the reference path.
const KernelTable& active() noexcept;

/// Overrides the process-wide choice; returns false if `isa` is unavailable.
bool select(Isa isa) noexcept;

std::string_view to_string(Isa isa) noexcept;

}  // namespace cherrynet::simd
