#pragma once

// Cherry tensors and the intra-block fully-connected tensor network (iFCTN).
//
// An order-N iFCTN is parameterized by N(N-1) small matrices G(k,i), k != i,
// each R(k,i) x I_k.  Every rank index r(p,q) couples exactly G(p,q) and
// G(q,p), so the network evaluates entrywise as
//
//   X(i_0, ..., i_{N-1}) = prod_{p<q} H(p,q)(i_p, i_q),   H(p,q) = G(p,q)^T G(q,p).
//
// Modes are 0-based throughout the API.

#include "cherrynet/simd/kernels.hpp"
#include "cherrynet/tensor.hpp"

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <span>
#include <string_view>
#include <vector>

namespace cherrynet {

class RankMatrix {
 public:
  RankMatrix() = default;
  /// All off-diagonal ranks set to `rank` (>= 1).
  RankMatrix(std::size_t order, std::size_t rank);

  /// Full N x N form; must be symmetric with zero diagonal and positive off-diagonal.
  static RankMatrix from_full(const std::vector<std::vector<long long>>& rows);
  /// Strict upper triangle in row-major order: R(0,1), R(0,2), ..., R(N-2,N-1).
  static RankMatrix from_upper(std::size_t order, std::span<const long long> upper);

  std::size_t order() const noexcept { return order_; }
  std::size_t operator()(std::size_t i, std::size_t j) const { return r_.at(i * order_ + j); }
  void set(std::size_t i, std::size_t j, std::size_t rank);

  std::vector<std::size_t> upper() const;

  friend bool operator==(const RankMatrix&, const RankMatrix&) = default;

 private:
  std::size_t order_ = 0;
  std::vector<std::size_t> r_;
};

/// The factor set {G(k,i)}; G(k,i) is ranks(k,i) x shape[k].
class CherryFactors {
 public:
  CherryFactors() = default;
  /// Zero-filled factors.
  CherryFactors(Shape shape, RankMatrix ranks);

  const Shape& shape() const noexcept { return shape_; }
  const RankMatrix& ranks() const noexcept { return ranks_; }
  std::size_t order() const noexcept { return shape_.size(); }

  const Matrix& factor(std::size_t k, std::size_t i) const { return g_[slot(k, i)]; }
  Matrix& factor(std::size_t k, std::size_t i) { return g_[slot(k, i)]; }
  /// Replaces G(k,i), checking its dimensions.
  void set_factor(std::size_t k, std::size_t i, Matrix m);

  std::size_t parameter_count() const noexcept;

  friend bool operator==(const CherryFactors&, const CherryFactors&) = default;

 private:
  std::size_t slot(std::size_t k, std::size_t i) const;

  Shape shape_;
  RankMatrix ranks_;
  std::vector<Matrix> g_;  // k * N + i, diagonal slots left empty
};

/// A mode-k cherry tensor: factors[p] is R_p x outer_dim for each position p != mode,
/// listed in ascending position order.
struct CherryTensor {
  std::size_t mode = 0;
  std::size_t outer_dim = 0;
  std::vector<Matrix> factors;

  std::size_t order() const noexcept { return factors.size() + 1; }
  /// Dimension at a position of the materialized tensor.
  std::size_t dim(std::size_t position) const;
  /// Factor attached to a position other than `mode`.
  const Matrix& factor_at(std::size_t position) const;
  Shape shape() const;
};

/// Dense tensor whose mode-k unfolding transpose is M_{N-1} (.) ... (.) M_0 (skipping k).
DenseTensor materialize_cherry(const CherryTensor& ct);

/// Contracts position `alpha` of `a` with position `beta` of `b` (both rank
/// positions).  Result indices: a's remaining positions ascending, then b's.
DenseTensor cherry_product(const CherryTensor& a, const CherryTensor& b, std::size_t alpha,
                           std::size_t beta);

/// Mode-k cherry tensor built from the factors G(k,i), i != k.
CherryTensor cherry_of(const CherryFactors& g, std::size_t k);

/// Direct nested sum over every rank index; exponential cost, oracle use only.
double ifctn_eval_naive(const CherryFactors& g, std::span<const std::size_t> index);

/// H(p,q) = G(p,q)^T G(q,p), an I_p x I_q matrix.
Matrix pair_gram(const CherryFactors& g, std::size_t p, std::size_t q);

/// One multiplicative term of a pairwise-product tensor: mat is I_p x I_q with p < q.
struct PairTerm {
  std::size_t p;
  std::size_t q;
  const Matrix* mat;
};

/// T(i) = prod over terms of mat(i_p, i_q); all-ones when `terms` is empty.
DenseTensor pairwise_product(const Shape& shape, std::span<const PairTerm> terms,
                             const simd::KernelTable& kernels = simd::active(), std::size_t threads = 1);

/// Calls visit(fiber_index, outer_index, fiber) for each mode-0 fiber of the
/// pairwise product with fiber_index in [first, last), in storage order.
/// `fiber` is only valid during the call.
template <class Visit>
void for_each_pairwise_fiber(const Shape& shape, std::span<const PairTerm> terms,
                             const simd::KernelTable& kernels, Visit&& visit, std::size_t first = 0,
                             std::size_t last = static_cast<std::size_t>(-1));

/// Full reconstruction through the pairwise Gram matrices.
DenseTensor ifctn_reconstruct(const CherryFactors& g, const simd::KernelTable& kernels = simd::active(),
                              std::size_t threads = 1);

/// Product of H(p,q) over pairs avoiding mode k; an order-(N-1) tensor over the other modes.
DenseTensor build_S(const CherryFactors& g, std::size_t k);

/// diag(vec(S_k)) * kron_{i = N-1..0, i != k} G(i,k)^T.
Matrix build_Z(const CherryFactors& g, std::size_t k);

/// G(k,N-1) (.) ... (.) G(k,0) skipping k: the transposed mode-k unfolding of cherry_of(g, k).
Matrix cherry_khatri_rao(const CherryFactors& g, std::size_t k);

/// Materializes each mode-k cherry as a full FCTN core tensor of shape
/// (R(0,k), ..., I_k, ..., R(k,N-1)).
std::vector<DenseTensor> fctn_cores_from_cherries(const CherryFactors& g);

/// Nested-sum evaluation of a fully-connected tensor network with dense cores.
double fctn_eval_naive(std::span<const DenseTensor> cores, const RankMatrix& ranks,
                       std::span<const std::size_t> index);

// ---- storage accounting ---------------------------------------------------

enum class Model { ifctn, fctn, tucker, tt };

std::string_view to_string(Model m) noexcept;

std::uint64_t param_count_ifctn(const Shape& shape, const RankMatrix& ranks);
std::uint64_t param_count_fctn(const Shape& shape, const RankMatrix& ranks);
/// core prod r_n plus sum I_n r_n; ranks has one entry per mode.
std::uint64_t param_count_tucker(const Shape& shape, std::span<const std::size_t> ranks);
/// sum r_{n-1} I_n r_n with boundary ranks 1; ranks holds the N-1 interior ranks.
std::uint64_t param_count_tt(const Shape& shape, std::span<const std::size_t> ranks);

/// Uniform entry point.  For iFCTN/FCTN `ranks` is the strict upper triangle
/// (N(N-1)/2 values); for Tucker N values; for TT N-1 values.
std::uint64_t param_count(const Shape& shape, Model model, std::span<const std::size_t> ranks);

// ---- template implementation ----------------------------------------------

template <class Visit>
void for_each_pairwise_fiber(const Shape& shape, std::span<const PairTerm> terms,
                             const simd::KernelTable& kernels, Visit&& visit, std::size_t first,
                             std::size_t last) {
  if (shape.empty()) return;
  const std::size_t len = shape[0];
  const Shape outer_dims(shape.begin() + 1, shape.end());
  last = std::min(last, num_elements(outer_dims));
  if (len == 0 || first >= last) return;

  std::vector<const PairTerm*> along, across;
  for (const auto& t : terms) (t.p == 0 ? along : across).push_back(&t);

  std::vector<double> fiber(len);
  std::vector<std::size_t> outer(outer_dims.size(), 0);
  for (std::size_t m = 0, rest = first; m < outer_dims.size(); ++m) {
    outer[m] = rest % outer_dims[m];
    rest /= outer_dims[m];
  }
  for (std::size_t f = first; f < last; ++f) {
    // outer[m-1] holds i_m for m >= 1
    double s = 1.0;
    for (const PairTerm* t : across) s *= (*t->mat)(outer[t->p - 1], outer[t->q - 1]);
    if (along.empty()) {
      std::fill(fiber.begin(), fiber.end(), s);
    } else {
      kernels.scaled_copy(fiber.data(), along[0]->mat->column(outer[along[0]->q - 1]).data(), s, len);
      for (std::size_t a = 1; a < along.size(); ++a)
        kernels.mul(fiber.data(), along[a]->mat->column(outer[along[a]->q - 1]).data(), len);
    }
    visit(f, std::span<const std::size_t>(outer), std::span<const double>(fiber));
    next_index(outer, outer_dims);
  }
}

}  // namespace cherrynet
