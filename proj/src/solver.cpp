#include "cherrynet/solver.hpp"

#include "cherrynet/parallel.hpp"

#include <Eigen/Cholesky>
#include <Eigen/Core>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <random>
#include <sstream>
#include <string>

namespace cherrynet {

namespace {

using Clock = std::chrono::steady_clock;

void check_same_shape(const DenseTensor& a, const DenseTensor& b, const char* what) {
  if (a.shape() != b.shape()) throw ShapeError(std::string(what) + ": shape mismatch");
}

// Per-pair Gram cache plus the block-level normal-equation moments.
class FactorSweep {
 public:
  FactorSweep(const CherryFactors& g, const simd::KernelTable& kernels) : n_(g.order()), kernels_(kernels) {
    grams_.resize(n_ * n_);
    for (std::size_t p = 0; p < n_; ++p)
      for (std::size_t q = p + 1; q < n_; ++q) grams_[p * n_ + q] = pair_gram(g, p, q);
  }

  void refresh(const CherryFactors& g, std::size_t k, std::size_t i) {
    const std::size_t p = std::min(k, i), q = std::max(k, i);
    grams_[p * n_ + q] = pair_gram(g, p, q);
  }

  // With P the product of every pair term except (k,i), accumulates
  //   first(i_a, i_b)  = sum P * X,   second(i_a, i_b) = sum P^2
  // over all entries, a = min(k,i), b = max(k,i).  The fitted tensor is
  // P * H(a,b)(i_a, i_b), so these are the only data the column systems need.
  void block_moments(const CherryFactors& g, std::size_t k, std::size_t i, const DenseTensor& x) {
    const std::size_t a = std::min(k, i), b = std::max(k, i);
    const Shape& shape = g.shape();
    terms_.clear();
    for (std::size_t p = 0; p < n_; ++p)
      for (std::size_t q = p + 1; q < n_; ++q)
        if (!(p == a && q == b)) terms_.push_back({p, q, &grams_[p * n_ + q]});

    first_ = Matrix(shape[a], shape[b]);
    second_ = Matrix(shape[a], shape[b]);
    const std::size_t len = shape[0];
    const double* xd = x.data();
    for_each_pairwise_fiber(shape, terms_, kernels_,
                            [&](std::size_t f, std::span<const std::size_t> outer, std::span<const double> fiber) {
                              const double* xf = xd + f * len;
                              const std::size_t ib = outer[b - 1];
                              if (a == 0) {
                                kernels_.mul_acc(first_.column(ib).data(), fiber.data(), xf, len);
                                kernels_.sq_acc(second_.column(ib).data(), fiber.data(), len);
                              } else {
                                const std::size_t ia = outer[a - 1];
                                first_(ia, ib) += kernels_.dot(fiber.data(), xf, len);
                                second_(ia, ib) += kernels_.sum_sq(fiber.data(), len);
                              }
                            });
  }

  // Column j of G(k,i) from the current moments.
  void solve_column(const CherryFactors& g, std::size_t k, std::size_t i, std::size_t j, double rho,
                    std::span<double> out) const {
    const Matrix& partner = g.factor(i, k);  // R x I_i
    const Matrix& current = g.factor(k, i);  // R x I_k
    const std::size_t rank = partner.rows();
    const std::size_t len = partner.cols();
    Eigen::VectorXd w2(static_cast<Eigen::Index>(len)), w1(static_cast<Eigen::Index>(len));
    for (std::size_t l = 0; l < len; ++l) {
      const bool k_first = k < i;
      w1[static_cast<Eigen::Index>(l)] = k_first ? first_(j, l) : first_(l, j);
      w2[static_cast<Eigen::Index>(l)] = k_first ? second_(j, l) : second_(l, j);
    }
    const auto r = static_cast<Eigen::Index>(rank);
    Eigen::Map<const Eigen::MatrixXd> gp(partner.data(), r, static_cast<Eigen::Index>(len));
    Eigen::Map<const Eigen::VectorXd> c_old(current.column(j).data(), r);
    Eigen::MatrixXd lhs = gp * w2.asDiagonal() * gp.transpose();
    lhs.diagonal().array() += rho;
    const Eigen::VectorXd rhs = gp * w1 + rho * c_old;
    Eigen::Map<Eigen::VectorXd>(out.data(), r) = lhs.llt().solve(rhs);
  }

 private:
  std::size_t n_;
  const simd::KernelTable& kernels_;
  std::vector<Matrix> grams_;
  std::vector<PairTerm> terms_;
  Matrix first_, second_;
};

}  // namespace

void CompletionProblem::validate() const {
  if (observed.order() < 2) throw ShapeError("completion needs a tensor of order >= 2");
  check_same_shape(observed, mask, "completion problem");
  if (ranks.order() != observed.order())
    throw ShapeError("rank matrix of order " + std::to_string(ranks.order()) + " for an order-" +
                     std::to_string(observed.order()) + " tensor");
  if (observed_count() == 0) throw std::invalid_argument("completion problem has no observed entries");
  for (std::size_t e = 0; e < observed.size(); ++e)
    if (mask[e] != 0.0 && !std::isfinite(observed[e]))
      throw std::invalid_argument("observed tensor has a non-finite entry at offset " + std::to_string(e));
}

std::size_t CompletionProblem::observed_count() const noexcept {
  std::size_t n = 0;
  for (double m : mask.values()) n += m != 0.0;
  return n;
}

void SolverConfig::validate() const {
  if (!(rho > 0.0) || !std::isfinite(rho)) throw std::invalid_argument("rho must be a positive finite number");
  if (!(eps > 0.0)) throw std::invalid_argument("eps must be positive");
  if (max_iter < 1) throw std::invalid_argument("max_iter must be at least 1");
  if (init_scale && !(*init_scale >= 0.0 && std::isfinite(*init_scale)))
    throw std::invalid_argument("init_scale must be a non-negative finite number");
  if (threads < 1) throw std::invalid_argument("threads must be at least 1");
}

IterationRecord SolveReport::record(std::size_t s) const {
  return {s + 1, objective_trace.at(s), step_trace.at(s), rel_change_trace.at(s), seconds_trace.at(s)};
}

CherryFactors init_factors(const Shape& shape, const RankMatrix& ranks, std::uint64_t seed, double init_scale) {
  CherryFactors g(shape, ranks);
  std::mt19937_64 rng(seed);
  for (std::size_t k = 0; k < g.order(); ++k)
    for (std::size_t i = 0; i < g.order(); ++i) {
      if (i == k) continue;
      for (double& v : g.factor(k, i).values()) {
        const double u = static_cast<double>(rng() >> 11) * 0x1.0p-53;  // [0, 1)
        v = init_scale * u;
      }
    }
  return g;
}

double default_init_scale(const CompletionProblem& problem) {
  double sum = 0.0;
  std::size_t count = 0;
  for (std::size_t e = 0; e < problem.observed.size(); ++e)
    if (problem.mask[e] != 0.0) {
      sum += std::abs(problem.observed[e]);
      ++count;
    }
  const double mean = count ? sum / static_cast<double>(count) : 0.0;
  const double s = std::pow(mean, 1.0 / static_cast<double>(problem.observed.order()));
  return std::clamp(s, 0.1, 1.0);
}

double objective(const CherryFactors& g, const DenseTensor& x) {
  if (x.shape() != g.shape()) throw ShapeError("objective: shape mismatch");
  const DenseTensor fit = ifctn_reconstruct(g);
  return 0.5 * simd::active().sq_dist(x.data(), fit.data(), x.size());
}

std::vector<double> update_factor_column(const CherryFactors& g, std::size_t k, std::size_t i, std::size_t j,
                                         const DenseTensor& x, double rho) {
  if (x.shape() != g.shape()) throw ShapeError("update_factor_column: shape mismatch");
  if (k >= g.order() || i >= g.order() || k == i) throw std::out_of_range("update_factor_column: bad factor index");
  if (j >= g.shape()[k]) throw std::out_of_range("update_factor_column: column out of range");
  if (!(rho > 0.0)) throw std::invalid_argument("update_factor_column: rho must be positive");
  FactorSweep sweep(g, simd::active());
  sweep.block_moments(g, k, i, x);
  std::vector<double> c(g.ranks()(k, i));
  sweep.solve_column(g, k, i, j, rho, c);
  return c;
}

CherryFactors sweep_factors(const CherryFactors& g, const DenseTensor& x, double rho, std::size_t threads,
                            double* moved_sq) {
  if (x.shape() != g.shape()) throw ShapeError("sweep_factors: shape mismatch");
  if (!(rho > 0.0)) throw std::invalid_argument("sweep_factors: rho must be positive");
  CherryFactors next = g;
  FactorSweep sweep(next, simd::active());
  double moved = 0.0;
  for (std::size_t k = 0; k < next.order(); ++k)
    for (std::size_t i = 0; i < next.order(); ++i) {
      if (i == k) continue;
      sweep.block_moments(next, k, i, x);
      Matrix updated(next.factor(k, i).rows(), next.factor(k, i).cols());
      parallel_for(updated.cols(), threads, [&](std::size_t b, std::size_t e) {
        for (std::size_t j = b; j < e; ++j) sweep.solve_column(next, k, i, j, rho, updated.column(j));
      });
      moved += simd::active().sq_dist(updated.data(), next.factor(k, i).data(), updated.size());
      next.factor(k, i) = std::move(updated);
      sweep.refresh(next, k, i);
    }
  if (moved_sq) *moved_sq = moved;
  return next;
}

DenseTensor update_x(const CherryFactors& g, const DenseTensor& x_old, const CompletionProblem& problem, double rho) {
  check_same_shape(x_old, problem.observed, "update_x");
  check_same_shape(x_old, problem.mask, "update_x");
  if (x_old.shape() != g.shape()) throw ShapeError("update_x: shape mismatch");
  if (!(rho >= 0.0)) throw std::invalid_argument("update_x: rho must be non-negative");
  const DenseTensor fit = ifctn_reconstruct(g);
  DenseTensor out(x_old.shape());
  simd::active().prox_blend(out.data(), x_old.data(), fit.data(), problem.observed.data(), problem.mask.data(), rho,
                            out.size());
  return out;
}

SolveReport pam_solve(const CompletionProblem& problem, const SolverConfig& config,
                      const std::function<void(const IterationRecord&)>& on_iteration) {
  problem.validate();
  config.validate();
  const simd::KernelTable& kern = simd::active();
  const auto start = Clock::now();

  SolveReport report;
  report.init_scale = config.init_scale.value_or(default_init_scale(problem));

  const std::size_t total = problem.observed.size();
  DenseTensor x(problem.observed.shape());
  for (std::size_t e = 0; e < total; ++e)
    if (problem.mask[e] != 0.0) x[e] = problem.observed[e];
  CherryFactors g = init_factors(problem.observed.shape(), problem.ranks, config.seed, report.init_scale);

  DenseTensor fit = ifctn_reconstruct(g, kern, config.threads);
  double f_prev = 0.5 * kern.sq_dist(x.data(), fit.data(), total);
  report.initial_objective = f_prev;
  DenseTensor x_next(x.shape());
  // With nothing missing X never moves, so progress is measured on the fit.
  const bool fully_observed = problem.observed_count() == total;
  DenseTensor fit_prev;

  for (std::size_t s = 0; s < config.max_iter; ++s) {
    const auto t0 = Clock::now();
    double moved = 0.0;
    g = sweep_factors(g, x, config.rho, config.threads, &moved);
    if (fully_observed) std::swap(fit, fit_prev);
    fit = ifctn_reconstruct(g, kern, config.threads);
    parallel_for(total, config.threads, [&](std::size_t b, std::size_t e) {
      kern.prox_blend(x_next.data() + b, x.data() + b, fit.data() + b, problem.observed.data() + b,
                      problem.mask.data() + b, config.rho, e - b);
    });
    const double dx2 = kern.sq_dist(x_next.data(), x.data(), total);
    const double f_next = 0.5 * kern.sq_dist(x_next.data(), fit.data(), total);
    const double x_norm = std::sqrt(kern.sum_sq(x.data(), total));
    const double step_sq = dx2 + moved;
    const double rel = std::sqrt(dx2) / (x_norm == 0.0 ? 1.0 : x_norm);

    if (!std::isfinite(f_next) || !std::isfinite(step_sq)) {
      std::ostringstream msg;
      msg << "non-finite state at iteration " << s + 1 << " (objective " << f_next << ")";
      throw InvariantViolation(msg.str());
    }
    if (config.assert_decrease) {
      const double decrease = f_prev - f_next;
      const double required = 0.5 * config.rho * step_sq;
      if (decrease < required - kDecreaseSlack) {
        std::ostringstream msg;
        msg.precision(17);
        msg << "sufficient decrease violated at iteration " << s + 1 << ": F_prev - F_next = " << decrease
            << " < rho/2 * ||dM||^2 = " << required << " (slack " << kDecreaseSlack << ")";
        throw InvariantViolation(msg.str());
      }
    }

    std::swap(x, x_next);
    f_prev = f_next;
    const double secs = std::chrono::duration<double>(Clock::now() - t0).count();
    report.objective_trace.push_back(f_next);
    report.step_trace.push_back(std::sqrt(step_sq));
    report.rel_change_trace.push_back(rel);
    report.seconds_trace.push_back(secs);
    report.iterations = s + 1;
    if (on_iteration) on_iteration(report.record(s));
    double stop_ratio = rel;
    if (fully_observed) {
      const double fit_norm = std::sqrt(kern.sum_sq(fit_prev.data(), total));
      stop_ratio = std::sqrt(kern.sq_dist(fit.data(), fit_prev.data(), total)) / (fit_norm == 0.0 ? 1.0 : fit_norm);
    }
    if (stop_ratio < config.eps) {
      report.converged = true;
      break;
    }
  }

  report.x = std::move(x);
  report.factors = std::move(g);
  report.seconds = std::chrono::duration<double>(Clock::now() - start).count();
  return report;
}

}  // namespace cherrynet
