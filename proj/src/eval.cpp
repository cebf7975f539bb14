#include "cherrynet/eval.hpp"

#include <array>
#include <cmath>
#include <numeric>
#include <random>
#include <stdexcept>
#include <string>

namespace cherrynet {

namespace {

void require_same_shape(const DenseTensor& a, const DenseTensor& b, const char* what) {
  if (a.shape() != b.shape()) throw ShapeError(std::string(what) + ": shape mismatch");
}

// Uniform integer in [0, n) by rejection, so the stream is identical on every
// standard library.
std::uint64_t bounded(std::mt19937_64& rng, std::uint64_t n) {
  const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() - std::numeric_limits<std::uint64_t>::max() % n;
  std::uint64_t v;
  do v = rng();
  while (v >= limit);
  return v % n;
}

// First `m` entries of a seeded partial Fisher-Yates shuffle of [0, n).
std::vector<std::size_t> sample_without_replacement(std::size_t n, std::size_t m, std::uint64_t seed) {
  std::vector<std::size_t> pool(n);
  std::iota(pool.begin(), pool.end(), std::size_t{0});
  std::mt19937_64 rng(seed);
  for (std::size_t s = 0; s < m; ++s) {
    const std::size_t pick = s + static_cast<std::size_t>(bounded(rng, n - s));
    std::swap(pool[s], pool[pick]);
  }
  pool.resize(m);
  return pool;
}

constexpr int kWindow = 11;
constexpr double kSigma = 1.5;
constexpr double kC1 = (0.01 * 1.0) * (0.01 * 1.0);
constexpr double kC2 = (0.03 * 1.0) * (0.03 * 1.0);

std::array<double, kWindow> gaussian_taps() {
  std::array<double, kWindow> w{};
  double sum = 0.0;
  for (int t = 0; t < kWindow; ++t) {
    const double d = t - kWindow / 2;
    w[t] = std::exp(-(d * d) / (2.0 * kSigma * kSigma));
    sum += w[t];
  }
  for (double& v : w) v /= sum;
  return w;
}

double ssim_formula(double mx, double my, double vx, double vy, double cxy) {
  return ((2.0 * mx * my + kC1) * (2.0 * cxy + kC2)) / ((mx * mx + my * my + kC1) * (vx + vy + kC2));
}

// Band is h x w, first index fastest.
double ssim_band(const double* x, const double* y, std::size_t h, std::size_t w) {
  if (h < kWindow || w < kWindow) {
    const double n = static_cast<double>(h * w);
    double mx = 0, my = 0;
    for (std::size_t e = 0; e < h * w; ++e) {
      mx += x[e];
      my += y[e];
    }
    mx /= n;
    my /= n;
    double vx = 0, vy = 0, cxy = 0;
    for (std::size_t e = 0; e < h * w; ++e) {
      vx += (x[e] - mx) * (x[e] - mx);
      vy += (y[e] - my) * (y[e] - my);
      cxy += (x[e] - mx) * (y[e] - my);
    }
    return ssim_formula(mx, my, vx / n, vy / n, cxy / n);
  }

  static const auto taps = gaussian_taps();
  const std::size_t oh = h - kWindow + 1, ow = w - kWindow + 1;
  // Five moment images: x, y, x^2, y^2, xy.  Filter along the first index,
  // then along the second, keeping only fully contained windows.
  std::array<std::vector<double>, 5> rows;
  for (auto& r : rows) r.assign(oh * w, 0.0);
  for (std::size_t c = 0; c < w; ++c)
    for (std::size_t r = 0; r < oh; ++r) {
      double s[5] = {0, 0, 0, 0, 0};
      for (int t = 0; t < kWindow; ++t) {
        const double a = x[(r + t) + h * c], b = y[(r + t) + h * c], wt = taps[t];
        s[0] += wt * a;
        s[1] += wt * b;
        s[2] += wt * a * a;
        s[3] += wt * b * b;
        s[4] += wt * a * b;
      }
      for (int m = 0; m < 5; ++m) rows[m][r + oh * c] = s[m];
    }
  double total = 0.0;
  for (std::size_t c = 0; c < ow; ++c)
    for (std::size_t r = 0; r < oh; ++r) {
      double s[5] = {0, 0, 0, 0, 0};
      for (int t = 0; t < kWindow; ++t)
        for (int m = 0; m < 5; ++m) s[m] += taps[t] * rows[m][r + oh * (c + t)];
      const double mx = s[0], my = s[1];
      total += ssim_formula(mx, my, s[2] - mx * mx, s[3] - my * my, s[4] - mx * my);
    }
  return total / static_cast<double>(oh * ow);
}

}  // namespace

std::size_t missing_count(double rate, std::size_t count) {
  return static_cast<std::size_t>(std::floor(rate * static_cast<double>(count) + 0.5));
}

DenseTensor gen_mask(const Shape& shape, const MaskSpec& spec) {
  if (!(spec.rate >= 0.0 && spec.rate < 1.0))
    throw std::invalid_argument("mask rate must lie in [0, 1), got " + std::to_string(spec.rate));
  DenseTensor mask(shape, 1.0);
  const std::size_t total = mask.size();
  if (total == 0) throw std::invalid_argument("mask shape has no entries");

  if (spec.kind == MaskKind::random) {
    const std::size_t m = missing_count(spec.rate, total);
    if (m >= total) throw std::invalid_argument("mask rate leaves no observed entries");
    for (std::size_t e : sample_without_replacement(total, m, spec.seed)) mask[e] = 0.0;
    return mask;
  }

  if (spec.fiber_mode >= shape.size())
    throw std::invalid_argument("fiber mode " + std::to_string(spec.fiber_mode + 1) + " out of range for an order-" +
                                std::to_string(shape.size()) + " tensor");
  const std::size_t len = shape[spec.fiber_mode];
  const std::size_t fibers = total / len;
  const std::size_t m = missing_count(spec.rate, fibers);
  if (m >= fibers) throw std::invalid_argument("mask rate leaves no observed fibers");
  // Fiber f enumerates the remaining modes with the usual first-fastest rule;
  // split it into the parts before and after the fiber mode.
  const std::size_t left = mask.stride(spec.fiber_mode);
  for (std::size_t f : sample_without_replacement(fibers, m, spec.seed)) {
    const std::size_t l = f % left, r = f / left;
    for (std::size_t t = 0; t < len; ++t) mask[l + left * (t + len * r)] = 0.0;
  }
  return mask;
}

double rse(const DenseTensor& truth, const DenseTensor& recovered) {
  require_same_shape(truth, recovered, "rse");
  double num = 0.0, den = 0.0;
  for (std::size_t e = 0; e < truth.size(); ++e) {
    const double d = truth[e] - recovered[e];
    num += d * d;
    den += truth[e] * truth[e];
  }
  if (den == 0.0) throw std::invalid_argument("rse: ground truth has zero norm");
  return std::sqrt(num) / std::sqrt(den);
}

double rmse(const DenseTensor& truth, const DenseTensor& recovered, const DenseTensor& mask) {
  require_same_shape(truth, recovered, "rmse");
  require_same_shape(truth, mask, "rmse");
  double sum = 0.0;
  std::size_t missing = 0;
  for (std::size_t e = 0; e < truth.size(); ++e)
    if (mask[e] == 0.0) {
      const double d = truth[e] - recovered[e];
      sum += d * d;
      ++missing;
    }
  if (missing == 0) throw std::invalid_argument("rmse: mask has no missing entries");
  return std::sqrt(sum / static_cast<double>(missing));
}

double psnr(const DenseTensor& truth, const DenseTensor& recovered) {
  require_same_shape(truth, recovered, "psnr");
  if (truth.size() == 0) throw std::invalid_argument("psnr: empty tensor");
  auto band_psnr = [&](std::size_t begin, std::size_t end) {
    double sum = 0.0;
    for (std::size_t e = begin; e < end; ++e) {
      const double d = truth[e] - recovered[e];
      sum += d * d;
    }
    const double mse = sum / static_cast<double>(end - begin);
    return mse == 0.0 ? std::numeric_limits<double>::infinity() : 10.0 * std::log10(1.0 / mse);
  };
  if (truth.order() != 3) return band_psnr(0, truth.size());
  const std::size_t band = truth.dim(0) * truth.dim(1);
  double acc = 0.0;
  for (std::size_t b = 0; b < truth.dim(2); ++b) acc += band_psnr(b * band, (b + 1) * band);
  return acc / static_cast<double>(truth.dim(2));
}

double ssim(const DenseTensor& truth, const DenseTensor& recovered) {
  require_same_shape(truth, recovered, "ssim");
  if (truth.order() != 2 && truth.order() != 3)
    throw std::invalid_argument("ssim: needs a matrix or a third-order tensor");
  const std::size_t h = truth.dim(0), w = truth.dim(1);
  const std::size_t bands = truth.order() == 3 ? truth.dim(2) : 1;
  if (h * w * bands == 0) throw std::invalid_argument("ssim: empty tensor");
  double acc = 0.0;
  for (std::size_t b = 0; b < bands; ++b) acc += ssim_band(truth.data() + b * h * w, recovered.data() + b * h * w, h, w);
  return acc / static_cast<double>(bands);
}

}  // namespace cherrynet
