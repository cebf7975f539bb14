#include "cherrynet/cherry.hpp"

#include "cherrynet/parallel.hpp"

#include <numeric>
#include <stdexcept>
#include <string>

namespace cherrynet {

namespace {

std::string pos(std::size_t i, std::size_t j) {
  return "(" + std::to_string(i + 1) + "," + std::to_string(j + 1) + ")";
}

struct PairIndex {
  std::size_t p, q, rank;
};

std::vector<PairIndex> upper_pairs(const RankMatrix& r) {
  std::vector<PairIndex> pairs;
  for (std::size_t p = 0; p < r.order(); ++p)
    for (std::size_t q = p + 1; q < r.order(); ++q) pairs.push_back({p, q, r(p, q)});
  return pairs;
}

// Slot of pair (min, max) inside upper_pairs ordering.
std::size_t pair_slot(std::size_t n, std::size_t a, std::size_t b) {
  const std::size_t p = std::min(a, b), q = std::max(a, b);
  return p * n - p * (p + 1) / 2 + (q - p - 1);
}

}  // namespace

// ---- RankMatrix -----------------------------------------------------------

RankMatrix::RankMatrix(std::size_t order, std::size_t rank) : order_(order), r_(order * order, rank) {
  if (rank == 0) throw std::invalid_argument("rank matrix: off-diagonal ranks must be >= 1");
  for (std::size_t i = 0; i < order; ++i) r_[i * order + i] = 0;
}

RankMatrix RankMatrix::from_full(const std::vector<std::vector<long long>>& rows) {
  const std::size_t n = rows.size();
  for (std::size_t i = 0; i < n; ++i)
    if (rows[i].size() != n)
      throw std::invalid_argument("rank matrix: wrong count in row " + std::to_string(i + 1) + ": expected " +
                                  std::to_string(n) + " entries, got " + std::to_string(rows[i].size()));
  RankMatrix m;
  m.order_ = n;
  m.r_.assign(n * n, 0);
  for (std::size_t i = 0; i < n; ++i) {
    if (rows[i][i] != 0)
      throw std::invalid_argument("rank matrix: nonzero diagonal at " + pos(i, i) + " = " +
                                  std::to_string(rows[i][i]));
    for (std::size_t j = 0; j < n; ++j) {
      if (i == j) continue;
      if (rows[i][j] != rows[j][i])
        throw std::invalid_argument("rank matrix: asymmetric, R" + pos(i, j) + " = " + std::to_string(rows[i][j]) +
                                    " but R" + pos(j, i) + " = " + std::to_string(rows[j][i]));
      if (rows[i][j] < 1)
        throw std::invalid_argument("rank matrix: off-diagonal R" + pos(i, j) + " must be >= 1");
      m.r_[i * n + j] = static_cast<std::size_t>(rows[i][j]);
    }
  }
  return m;
}

RankMatrix RankMatrix::from_upper(std::size_t order, std::span<const long long> upper) {
  const std::size_t expected = order * (order - 1) / 2;
  if (order < 2 || upper.size() != expected)
    throw std::invalid_argument("rank matrix: wrong count for order " + std::to_string(order) + ": expected " +
                                std::to_string(expected) + " upper-triangle entries, got " +
                                std::to_string(upper.size()));
  std::vector<std::vector<long long>> rows(order, std::vector<long long>(order, 0));
  std::size_t s = 0;
  for (std::size_t i = 0; i < order; ++i)
    for (std::size_t j = i + 1; j < order; ++j) rows[i][j] = rows[j][i] = upper[s++];
  return from_full(rows);
}

void RankMatrix::set(std::size_t i, std::size_t j, std::size_t rank) {
  if (i >= order_ || j >= order_ || i == j || rank == 0)
    throw std::invalid_argument("rank matrix: invalid assignment at " + pos(i, j));
  r_[i * order_ + j] = r_[j * order_ + i] = rank;
}

std::vector<std::size_t> RankMatrix::upper() const {
  std::vector<std::size_t> u;
  for (std::size_t i = 0; i < order_; ++i)
    for (std::size_t j = i + 1; j < order_; ++j) u.push_back((*this)(i, j));
  return u;
}

// ---- CherryFactors --------------------------------------------------------

CherryFactors::CherryFactors(Shape shape, RankMatrix ranks) : shape_(std::move(shape)), ranks_(std::move(ranks)) {
  const std::size_t n = shape_.size();
  if (n < 2) throw ShapeError("iFCTN needs a tensor of order >= 2");
  if (ranks_.order() != n)
    throw ShapeError("rank matrix of order " + std::to_string(ranks_.order()) + " for an order-" +
                     std::to_string(n) + " tensor");
  g_.resize(n * n);
  for (std::size_t k = 0; k < n; ++k)
    for (std::size_t i = 0; i < n; ++i)
      if (i != k) g_[k * n + i] = Matrix(ranks_(k, i), shape_[k]);
}

std::size_t CherryFactors::slot(std::size_t k, std::size_t i) const {
  if (k >= order() || i >= order() || k == i) throw std::out_of_range("no cherry factor at " + pos(k, i));
  return k * order() + i;
}

void CherryFactors::set_factor(std::size_t k, std::size_t i, Matrix m) {
  auto& dst = g_[slot(k, i)];
  if (m.rows() != dst.rows() || m.cols() != dst.cols())
    throw ShapeError("factor " + pos(k, i) + " must be " + std::to_string(dst.rows()) + "x" +
                     std::to_string(dst.cols()));
  dst = std::move(m);
}

std::size_t CherryFactors::parameter_count() const noexcept {
  std::size_t n = 0;
  for (const auto& m : g_) n += m.size();
  return n;
}

// ---- cherry tensors -------------------------------------------------------

std::size_t CherryTensor::dim(std::size_t position) const {
  return position == mode ? outer_dim : factor_at(position).rows();
}

const Matrix& CherryTensor::factor_at(std::size_t position) const {
  if (position == mode || position >= order())
    throw std::out_of_range("cherry tensor has no factor at position " + std::to_string(position));
  return factors[position < mode ? position : position - 1];
}

Shape CherryTensor::shape() const {
  Shape s(order());
  for (std::size_t p = 0; p < s.size(); ++p) s[p] = dim(p);
  return s;
}

namespace {

void check_cherry(const CherryTensor& ct) {
  if (ct.mode >= ct.order()) throw std::out_of_range("cherry tensor mode out of range");
  for (const auto& f : ct.factors)
    if (f.cols() != ct.outer_dim)
      throw ShapeError("cherry factor has " + std::to_string(f.cols()) + " columns, expected " +
                       std::to_string(ct.outer_dim));
}

}  // namespace

DenseTensor materialize_cherry(const CherryTensor& ct) {
  check_cherry(ct);
  Matrix kr(1, ct.outer_dim, 1.0);
  for (std::size_t p = ct.order(); p-- > 0;)
    if (p != ct.mode) kr = khatri_rao(kr, ct.factor_at(p));
  return fold(kr.transpose(), ct.mode, ct.shape());
}

DenseTensor cherry_product(const CherryTensor& a, const CherryTensor& b, std::size_t alpha, std::size_t beta) {
  check_cherry(a);
  check_cherry(b);
  if (alpha >= a.order() || beta >= b.order()) throw std::out_of_range("cherry_product: position out of range");
  if (alpha == a.mode || beta == b.mode)
    throw std::invalid_argument("cherry_product: contracted positions must be rank positions");
  const Matrix& a_alpha = a.factor_at(alpha);
  const Matrix& b_beta = b.factor_at(beta);
  if (a_alpha.rows() != b_beta.rows())
    throw ShapeError("cherry_product: contracted dimensions differ (" + std::to_string(a_alpha.rows()) +
                     " vs " + std::to_string(b_beta.rows()) + ")");
  const Matrix link = transpose_matmul(a_alpha, b_beta);  // I_a x J_b

  std::vector<std::size_t> a_pos, b_pos;
  for (std::size_t p = 0; p < a.order(); ++p)
    if (p != alpha) a_pos.push_back(p);
  for (std::size_t p = 0; p < b.order(); ++p)
    if (p != beta) b_pos.push_back(p);

  Shape shape;
  std::size_t a_outer_slot = 0, b_outer_slot = 0;
  for (std::size_t s = 0; s < a_pos.size(); ++s) {
    if (a_pos[s] == a.mode) a_outer_slot = s;
    shape.push_back(a.dim(a_pos[s]));
  }
  for (std::size_t s = 0; s < b_pos.size(); ++s) {
    if (b_pos[s] == b.mode) b_outer_slot = a_pos.size() + s;
    shape.push_back(b.dim(b_pos[s]));
  }

  DenseTensor c(shape);
  if (c.size() == 0) return c;
  std::vector<std::size_t> idx(shape.size(), 0);
  std::size_t off = 0;
  do {
    const std::size_t i = idx[a_outer_slot], j = idx[b_outer_slot];
    double v = link(i, j);
    for (std::size_t s = 0; s < a_pos.size(); ++s)
      if (a_pos[s] != a.mode) v *= a.factor_at(a_pos[s])(idx[s], i);
    for (std::size_t s = 0; s < b_pos.size(); ++s)
      if (b_pos[s] != b.mode) v *= b.factor_at(b_pos[s])(idx[a_pos.size() + s], j);
    c[off++] = v;
  } while (next_index(idx, shape));
  return c;
}

CherryTensor cherry_of(const CherryFactors& g, std::size_t k) {
  if (k >= g.order()) throw std::out_of_range("cherry_of: mode out of range");
  CherryTensor ct{k, g.shape()[k], {}};
  for (std::size_t i = 0; i < g.order(); ++i)
    if (i != k) ct.factors.push_back(g.factor(k, i));
  return ct;
}

// ---- iFCTN evaluation -----------------------------------------------------

double ifctn_eval_naive(const CherryFactors& g, std::span<const std::size_t> index) {
  const std::size_t n = g.order();
  if (index.size() != n) throw ShapeError("ifctn_eval_naive: index order mismatch");
  for (std::size_t k = 0; k < n; ++k)
    if (index[k] >= g.shape()[k]) throw std::out_of_range("ifctn_eval_naive: index out of range");

  const auto pairs = upper_pairs(g.ranks());
  std::vector<std::size_t> dims(pairs.size());
  for (std::size_t s = 0; s < pairs.size(); ++s) dims[s] = pairs[s].rank;
  std::vector<std::size_t> r(pairs.size(), 0);
  double sum = 0.0;
  do {
    double term = 1.0;
    for (std::size_t k = 0; k < n; ++k)
      for (std::size_t i = 0; i < n; ++i)
        if (i != k) term *= g.factor(k, i)(r[pair_slot(n, k, i)], index[k]);
    sum += term;
  } while (next_index(r, dims));
  return sum;
}

Matrix pair_gram(const CherryFactors& g, std::size_t p, std::size_t q) {
  return transpose_matmul(g.factor(p, q), g.factor(q, p));
}

DenseTensor pairwise_product(const Shape& shape, std::span<const PairTerm> terms, const simd::KernelTable& kernels,
                             std::size_t threads) {
  for (const auto& t : terms)
    if (t.p >= t.q || t.q >= shape.size() || t.mat->rows() != shape[t.p] || t.mat->cols() != shape[t.q])
      throw ShapeError("pairwise_product: term " + pos(t.p, t.q) + " does not match the shape");
  DenseTensor out(shape);
  if (out.size() == 0 || shape.empty()) return out;
  const std::size_t len = shape[0];
  const std::size_t n_fibers = out.size() / len;
  double* dst = out.data();
  parallel_for(n_fibers, threads, [&](std::size_t b, std::size_t e) {
    for_each_pairwise_fiber(
        shape, terms, kernels,
        [&](std::size_t f, std::span<const std::size_t>, std::span<const double> fiber) {
          std::copy(fiber.begin(), fiber.end(), dst + f * len);
        },
        b, e);
  });
  return out;
}

DenseTensor ifctn_reconstruct(const CherryFactors& g, const simd::KernelTable& kernels, std::size_t threads) {
  const std::size_t n = g.order();
  std::vector<Matrix> grams;
  grams.reserve(n * (n - 1) / 2);
  for (std::size_t p = 0; p < n; ++p)
    for (std::size_t q = p + 1; q < n; ++q) grams.push_back(pair_gram(g, p, q));
  std::vector<PairTerm> terms;
  std::size_t s = 0;
  for (std::size_t p = 0; p < n; ++p)
    for (std::size_t q = p + 1; q < n; ++q) terms.push_back({p, q, &grams[s++]});
  return pairwise_product(g.shape(), terms, kernels, threads);
}

DenseTensor build_S(const CherryFactors& g, std::size_t k) {
  const std::size_t n = g.order();
  if (k >= n) throw std::out_of_range("build_S: mode out of range");
  Shape reduced;
  for (std::size_t m = 0; m < n; ++m)
    if (m != k) reduced.push_back(g.shape()[m]);
  auto squeeze = [k](std::size_t m) { return m < k ? m : m - 1; };
  std::vector<Matrix> grams;
  std::vector<std::pair<std::size_t, std::size_t>> where;
  for (std::size_t p = 0; p < n; ++p)
    for (std::size_t q = p + 1; q < n; ++q)
      if (p != k && q != k) {
        grams.push_back(pair_gram(g, p, q));
        where.emplace_back(squeeze(p), squeeze(q));
      }
  std::vector<PairTerm> terms;
  for (std::size_t s = 0; s < grams.size(); ++s) terms.push_back({where[s].first, where[s].second, &grams[s]});
  return pairwise_product(reduced, terms);
}

Matrix build_Z(const CherryFactors& g, std::size_t k) {
  const std::size_t n = g.order();
  if (k >= n) throw std::out_of_range("build_Z: mode out of range");
  const DenseTensor s = build_S(g, k);
  Matrix kron(1, 1, 1.0);
  for (std::size_t i = n; i-- > 0;)
    if (i != k) kron = kronecker(kron, g.factor(i, k).transpose());
  for (std::size_t c = 0; c < kron.cols(); ++c)
    for (std::size_t r = 0; r < kron.rows(); ++r) kron(r, c) *= s[r];
  return kron;
}

Matrix cherry_khatri_rao(const CherryFactors& g, std::size_t k) {
  if (k >= g.order()) throw std::out_of_range("cherry_khatri_rao: mode out of range");
  Matrix kr(1, g.shape()[k], 1.0);
  for (std::size_t i = g.order(); i-- > 0;)
    if (i != k) kr = khatri_rao(kr, g.factor(k, i));
  return kr;
}

std::vector<DenseTensor> fctn_cores_from_cherries(const CherryFactors& g) {
  std::vector<DenseTensor> cores;
  for (std::size_t k = 0; k < g.order(); ++k) cores.push_back(materialize_cherry(cherry_of(g, k)));
  return cores;
}

double fctn_eval_naive(std::span<const DenseTensor> cores, const RankMatrix& ranks,
                       std::span<const std::size_t> index) {
  const std::size_t n = ranks.order();
  if (cores.size() != n || index.size() != n) throw ShapeError("fctn_eval_naive: order mismatch");
  const auto pairs = upper_pairs(ranks);
  std::vector<std::size_t> dims(pairs.size());
  for (std::size_t s = 0; s < pairs.size(); ++s) dims[s] = pairs[s].rank;
  std::vector<std::size_t> r(pairs.size(), 0), core_idx(n);
  double sum = 0.0;
  do {
    double term = 1.0;
    for (std::size_t k = 0; k < n; ++k) {
      for (std::size_t p = 0; p < n; ++p) core_idx[p] = p == k ? index[k] : r[pair_slot(n, k, p)];
      term *= cores[k].at(core_idx);
    }
    sum += term;
  } while (next_index(r, dims));
  return sum;
}

// ---- parameter counts -----------------------------------------------------

std::string_view to_string(Model m) noexcept {
  switch (m) {
    case Model::ifctn: return "iFCTN";
    case Model::fctn: return "FCTN";
    case Model::tucker: return "Tucker";
    case Model::tt: return "TT";
  }
  return "unknown";
}

std::uint64_t param_count_ifctn(const Shape& shape, const RankMatrix& ranks) {
  if (ranks.order() != shape.size()) throw std::invalid_argument("param_count: rank matrix order mismatch");
  std::uint64_t total = 0;
  for (std::size_t k = 0; k < shape.size(); ++k)
    for (std::size_t i = 0; i < shape.size(); ++i)
      if (i != k) total += static_cast<std::uint64_t>(ranks(k, i)) * shape[k];
  return total;
}

std::uint64_t param_count_fctn(const Shape& shape, const RankMatrix& ranks) {
  if (ranks.order() != shape.size()) throw std::invalid_argument("param_count: rank matrix order mismatch");
  std::uint64_t total = 0;
  for (std::size_t k = 0; k < shape.size(); ++k) {
    std::uint64_t core = shape[k];
    for (std::size_t i = 0; i < shape.size(); ++i)
      if (i != k) core *= ranks(k, i);
    total += core;
  }
  return total;
}

std::uint64_t param_count_tucker(const Shape& shape, std::span<const std::size_t> ranks) {
  if (ranks.size() != shape.size())
    throw std::invalid_argument("param_count: Tucker needs " + std::to_string(shape.size()) + " ranks, got " +
                                std::to_string(ranks.size()));
  std::uint64_t core = 1, factors = 0;
  for (std::size_t n = 0; n < shape.size(); ++n) {
    core *= ranks[n];
    factors += static_cast<std::uint64_t>(shape[n]) * ranks[n];
  }
  return core + factors;
}

std::uint64_t param_count_tt(const Shape& shape, std::span<const std::size_t> ranks) {
  if (shape.empty() || ranks.size() + 1 != shape.size())
    throw std::invalid_argument("param_count: TT needs " + std::to_string(shape.size() ? shape.size() - 1 : 0) +
                                " ranks, got " + std::to_string(ranks.size()));
  std::uint64_t total = 0;
  for (std::size_t n = 0; n < shape.size(); ++n) {
    const std::uint64_t left = n == 0 ? 1 : ranks[n - 1];
    const std::uint64_t right = n + 1 == shape.size() ? 1 : ranks[n];
    total += left * shape[n] * right;
  }
  return total;
}

std::uint64_t param_count(const Shape& shape, Model model, std::span<const std::size_t> ranks) {
  switch (model) {
    case Model::ifctn:
    case Model::fctn: {
      std::vector<long long> upper(ranks.begin(), ranks.end());
      const RankMatrix r = RankMatrix::from_upper(shape.size(), upper);
      return model == Model::ifctn ? param_count_ifctn(shape, r) : param_count_fctn(shape, r);
    }
    case Model::tucker: return param_count_tucker(shape, ranks);
    case Model::tt: return param_count_tt(shape, ranks);
  }
  throw std::invalid_argument("param_count: unknown model");
}

}  // namespace cherrynet
