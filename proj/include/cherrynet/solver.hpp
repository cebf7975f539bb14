#pragma once

// Proximal alternating minimization for iFCTN tensor completion.
//
//   min_{G, X}  1/2 ||X - iFCTN(G)||_F^2   subject to  X = O on the observed set.
//
// Each outer iteration updates every factor G(k,i) (k ascending, then i
// ascending) with a proximal anchor rho/2 ||G(k,i) - G(k,i)_prev||^2, solving
// one R x R system per column, then replaces X by its proximal minimizer.

#include "cherrynet/cherry.hpp"
#include "cherrynet/simd/kernels.hpp"
#include "cherrynet/tensor.hpp"

#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <stdexcept>
#include <vector>

namespace cherrynet {

struct CompletionProblem {
  DenseTensor observed;
  /// Same shape as `observed`; nonzero marks an observed entry.
  DenseTensor mask;
  RankMatrix ranks;

  /// Throws ShapeError / std::invalid_argument on inconsistent inputs.
  void validate() const;
  std::size_t observed_count() const noexcept;
};

struct SolverConfig {
  double rho = 0.1;
  std::size_t max_iter = 1000;
  double eps = 1e-5;
  std::uint64_t seed = 0;
  /// Upper bound of the uniform factor initialization.  Unset means
  /// default_init_scale(problem).
  std::optional<double> init_scale;
  /// Verify the sufficient-decrease inequality every iteration.
  bool assert_decrease = false;
  /// Threads for reconstruction and per-column solves; 1 is the determinism reference.
  std::size_t threads = 1;

  void validate() const;
};

/// Absolute slack allowed in the sufficient-decrease check.
inline constexpr double kDecreaseSlack = 1e-9;

struct IterationRecord {
  std::size_t iter;     // 1-based
  double objective;     // F after the iteration
  double step_norm;     // ||M_new - M_old||_F over all factors and X
  double rel_change;    // ||X_new - X_old||_F / ||X_old||_F
  double seconds;       // wall time of this iteration
};

struct SolveReport {
  DenseTensor x;
  CherryFactors factors;
  double initial_objective = 0.0;
  double init_scale = 0.0;
  std::vector<double> objective_trace;
  std::vector<double> step_trace;
  std::vector<double> rel_change_trace;
  std::vector<double> seconds_trace;
  bool converged = false;
  std::size_t iterations = 0;
  double seconds = 0.0;

  IterationRecord record(std::size_t s) const;
};

/// Raised when a run breaks the decrease inequality or produces non-finite values.
class InvariantViolation : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// i.i.d. uniform [0, init_scale) entries from a seeded mt19937_64 stream,
/// filled factor by factor (k ascending, then i ascending) in storage order.
CherryFactors init_factors(const Shape& shape, const RankMatrix& ranks, std::uint64_t seed, double init_scale);

/// (mean |O| over observed entries)^(1/N), clamped to [0.1, 1].
double default_init_scale(const CompletionProblem& problem);

/// 1/2 ||X - iFCTN(G)||_F^2.
double objective(const CherryFactors& g, const DenseTensor& x);

/// Proximal minimizer for column j of G(k,i) with every other factor fixed:
/// (A^T A + rho I) c = A^T b + rho c_old.
std::vector<double> update_factor_column(const CherryFactors& g, std::size_t k, std::size_t i, std::size_t j,
                                         const DenseTensor& x, double rho);

/// One Gauss-Seidel pass over every factor.  When `moved_sq` is given it
/// receives sum ||G_new(k,i) - G_old(k,i)||_F^2.
CherryFactors sweep_factors(const CherryFactors& g, const DenseTensor& x, double rho, std::size_t threads = 1,
                            double* moved_sq = nullptr);

/// Observed entries copied from the problem; the rest set to
/// (iFCTN(G) + rho * x_old) / (1 + rho).
DenseTensor update_x(const CherryFactors& g, const DenseTensor& x_old, const CompletionProblem& problem, double rho);

/// Algorithm driver.  Stops once ||X_new - X_old|| / ||X_old|| < eps; when
/// every entry is observed X is fixed, so the reconstruction's relative
/// change is used instead.  `on_iteration` runs after each completed iteration.
SolveReport pam_solve(const CompletionProblem& problem, const SolverConfig& config,
                      const std::function<void(const IterationRecord&)>& on_iteration = {});

}  // namespace cherrynet
