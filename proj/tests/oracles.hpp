#pragma once

// Slow, independent reference computations shared by the unit tests and the
// acceptance runner.

#include "cherrynet/cherry.hpp"
#include "cherrynet/tensor.hpp"

#include <Eigen/Dense>

#include <cmath>
#include <vector>

namespace cherrynet::oracle {

/// Column j of G(k,i) from the fully materialized ridge problem
///   min_c 1/2 ||x_(k)(j,:)^T - Z_k K c||^2 + rho/2 ||c - c_old||^2,
/// where K places c inside the Kronecker product of the other mode-k
/// cherry columns.
inline std::vector<double> dense_column_update(const CherryFactors& g, std::size_t k, std::size_t i,
                                               std::size_t j, const DenseTensor& x, double rho) {
  const std::size_t n = g.order();
  Matrix kr(1, 1, 1.0);
  for (std::size_t m = n; m-- > 0;) {
    if (m == k) continue;
    const Matrix& f = g.factor(k, m);
    if (m == i) {
      kr = kronecker(kr, Matrix::identity(f.rows()));
    } else {
      const auto col = f.column(j);
      kr = kronecker(kr, Matrix(f.rows(), 1, std::vector<double>(col.begin(), col.end())));
    }
  }
  const Matrix a = matmul(build_Z(g, k), kr);
  const Matrix xk = unfold(x, k);

  const Eigen::Map<const Eigen::MatrixXd> A(a.data(), a.rows(), a.cols());
  Eigen::VectorXd b(xk.cols());
  for (std::size_t c = 0; c < xk.cols(); ++c) b(c) = xk(j, c);
  const auto old = g.factor(k, i).column(j);
  const Eigen::Map<const Eigen::VectorXd> c_old(old.data(), old.size());

  const Eigen::MatrixXd lhs = A.transpose() * A + rho * Eigen::MatrixXd::Identity(A.cols(), A.cols());
  const Eigen::VectorXd rhs = A.transpose() * b + rho * c_old;
  const Eigen::VectorXd c = lhs.colPivHouseholderQr().solve(rhs);
  return {c.data(), c.data() + c.size()};
}

/// Mean SSIM of one h x w band (first index fastest) computed window by
/// window with the 2-D Gaussian weights and centered second moments.
inline double direct_ssim_band(const double* x, const double* y, std::size_t h, std::size_t w) {
  constexpr int win = 11;
  constexpr double sigma = 1.5, c1 = 1e-4, c2 = 9e-4;
  double wt[win][win];
  double total = 0.0;
  for (int u = 0; u < win; ++u)
    for (int v = 0; v < win; ++v) {
      const double du = u - 5, dv = v - 5;
      wt[u][v] = std::exp(-(du * du + dv * dv) / (2 * sigma * sigma));
      total += wt[u][v];
    }
  for (auto& row : wt)
    for (double& v : row) v /= total;

  double acc = 0.0;
  std::size_t windows = 0;
  for (std::size_t r0 = 0; r0 + win <= h; ++r0)
    for (std::size_t c0 = 0; c0 + win <= w; ++c0) {
      double mx = 0, my = 0;
      for (int u = 0; u < win; ++u)
        for (int v = 0; v < win; ++v) {
          const std::size_t e = (r0 + u) + h * (c0 + v);
          mx += wt[u][v] * x[e];
          my += wt[u][v] * y[e];
        }
      double vx = 0, vy = 0, cxy = 0;
      for (int u = 0; u < win; ++u)
        for (int v = 0; v < win; ++v) {
          const std::size_t e = (r0 + u) + h * (c0 + v);
          vx += wt[u][v] * (x[e] - mx) * (x[e] - mx);
          vy += wt[u][v] * (y[e] - my) * (y[e] - my);
          cxy += wt[u][v] * (x[e] - mx) * (y[e] - my);
        }
      acc += ((2 * mx * my + c1) * (2 * cxy + c2)) / ((mx * mx + my * my + c1) * (vx + vy + c2));
      ++windows;
    }
  return acc / static_cast<double>(windows);
}

}  // namespace cherrynet::oracle
