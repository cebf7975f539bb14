#pragma once

// Missing-pattern generators and recovery metrics.

#include "cherrynet/tensor.hpp"

#include <cstddef>
#include <cstdint>
#include <limits>

namespace cherrynet {

enum class MaskKind { random, fiber };

struct MaskSpec {
  MaskKind kind = MaskKind::random;
  /// Fraction of entries (random) or fibers (fiber) removed, in [0, 1).
  double rate = 0.0;
  /// Mode along which whole fibers are removed (fiber kind only, 0-based).
  std::size_t fiber_mode = 0;
  std::uint64_t seed = 0;
};

/// floor(rate * count + 0.5)
std::size_t missing_count(double rate, std::size_t count);

/// 1.0 marks an observed entry, 0.0 a missing one.  Exactly
/// missing_count(rate, total) entries (or fibers) are removed, chosen
/// uniformly without replacement.
DenseTensor gen_mask(const Shape& shape, const MaskSpec& spec);

/// ||truth - recovered||_F / ||truth||_F.
double rse(const DenseTensor& truth, const DenseTensor& recovered);

/// Root mean square error over the missing entries (mask == 0).
double rmse(const DenseTensor& truth, const DenseTensor& recovered, const DenseTensor& mask);

/// Peak-1 PSNR in dB.  Third-order tensors average per-band values over
/// mode-3 slices; other orders use the global MSE.  A zero MSE yields +inf.
double psnr(const DenseTensor& truth, const DenseTensor& recovered);

/// Mean single-scale SSIM over mode-3 bands (a matrix is one band) with an
/// 11x11 Gaussian window (sigma 1.5), K1 = 0.01, K2 = 0.03, L = 1, averaged
/// over fully contained windows.  Bands smaller than the window use one
/// uniform window covering the whole band.
double ssim(const DenseTensor& truth, const DenseTensor& recovered);

struct MetricsReport {
  double psnr = std::numeric_limits<double>::quiet_NaN();
  double ssim = std::numeric_limits<double>::quiet_NaN();
  double rse = std::numeric_limits<double>::quiet_NaN();
  double rmse = std::numeric_limits<double>::quiet_NaN();
};

}  // namespace cherrynet
