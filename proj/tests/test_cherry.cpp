#include "cherrynet/cherry.hpp"

#include "test_util.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <numeric>
#include <random>

using namespace cherrynet;
using cherrynet::testing::random_factors;
using cherrynet::testing::random_matrix;
using cherrynet::testing::random_shape;

namespace {

double max_naive_gap(const CherryFactors& g) {
  const DenseTensor x = ifctn_reconstruct(g);
  std::vector<std::size_t> idx(g.order(), 0);
  double gap = 0.0;
  do {
    gap = std::max(gap, std::abs(x.at(idx) - ifctn_eval_naive(g, idx)));
  } while (next_index(idx, g.shape()));
  return gap;
}

// Plain loop contraction of two dense tensors over one index each.
DenseTensor contract(const DenseTensor& a, const DenseTensor& b, std::size_t alpha, std::size_t beta) {
  Shape out;
  for (std::size_t p = 0; p < a.order(); ++p)
    if (p != alpha) out.push_back(a.dim(p));
  for (std::size_t p = 0; p < b.order(); ++p)
    if (p != beta) out.push_back(b.dim(p));
  DenseTensor c(out);
  std::vector<std::size_t> idx(out.size(), 0), ia(a.order()), ib(b.order());
  do {
    std::size_t m = 0;
    for (std::size_t p = 0; p < a.order(); ++p)
      if (p != alpha) ia[p] = idx[m++];
    for (std::size_t p = 0; p < b.order(); ++p)
      if (p != beta) ib[p] = idx[m++];
    double s = 0.0;
    for (std::size_t r = 0; r < a.dim(alpha); ++r) {
      ia[alpha] = r;
      ib[beta] = r;
      s += a.at(ia) * b.at(ib);
    }
    c.at(idx) = s;
  } while (next_index(idx, out));
  return c;
}

CherryTensor random_cherry(std::mt19937_64& rng, std::size_t mode, std::size_t outer, const Shape& ranks) {
  CherryTensor ct{mode, outer, {}};
  for (std::size_t r : ranks) ct.factors.push_back(random_matrix(rng, r, outer));
  return ct;
}

}  // namespace

TEST(RankMatrix, UpperTriangleFillsBothSides) {
  const std::vector<long long> up{2, 3, 4};
  const RankMatrix r = RankMatrix::from_upper(3, up);
  EXPECT_EQ(r(0, 1), 2u);
  EXPECT_EQ(r(1, 0), 2u);
  EXPECT_EQ(r(0, 2), 3u);
  EXPECT_EQ(r(2, 1), 4u);
  EXPECT_EQ(r(1, 1), 0u);
}

TEST(RankMatrix, InvalidFullFormsRejected) {
  EXPECT_THROW(RankMatrix::from_full({{0, 2}, {3, 0}}), std::invalid_argument);
  EXPECT_THROW(RankMatrix::from_full({{1, 2}, {2, 0}}), std::invalid_argument);
  EXPECT_THROW(RankMatrix::from_full({{0, 0}, {0, 0}}), std::invalid_argument);
  EXPECT_THROW(RankMatrix::from_full({{0, 2, 2}, {2, 0}}), std::invalid_argument);
  const std::vector<long long> two{1, 1};
  EXPECT_THROW(RankMatrix::from_upper(3, two), std::invalid_argument);
}

TEST(CherryFactors, ShapesFollowRanks) {
  const CherryFactors g({3, 4, 5}, RankMatrix::from_full({{0, 2, 3}, {2, 0, 4}, {3, 4, 0}}));
  EXPECT_EQ(g.factor(0, 2).rows(), 3u);
  EXPECT_EQ(g.factor(0, 2).cols(), 3u);
  EXPECT_EQ(g.factor(2, 1).rows(), 4u);
  EXPECT_EQ(g.factor(2, 1).cols(), 5u);
  EXPECT_EQ(g.parameter_count(), 3u * (2 + 3) + 4u * (2 + 4) + 5u * (3 + 4));
  CherryFactors h = g;
  EXPECT_THROW(h.set_factor(0, 1, Matrix(3, 3)), ShapeError);
  EXPECT_THROW(g.factor(1, 1), std::out_of_range);
}

TEST(MaterializeCherry, SingleFactorIsTranspose) {
  std::mt19937_64 rng(1);
  const Matrix m = random_matrix(rng, 3, 4);
  const DenseTensor t = materialize_cherry(CherryTensor{0, 4, {m}});
  ASSERT_EQ(t.shape(), (Shape{4, 3}));
  for (std::size_t i = 0; i < 4; ++i)
    for (std::size_t r = 0; r < 3; ++r) EXPECT_EQ(t.at({i, r}), m(r, i));
}

TEST(MaterializeCherry, OnesGiveOnes) {
  const DenseTensor t = materialize_cherry(CherryTensor{1, 3, {Matrix(2, 3, 1.0), Matrix(4, 3, 1.0)}});
  EXPECT_EQ(t, DenseTensor({2, 3, 4}, 1.0));
}

TEST(MaterializeCherry, ModeSlicesAreRankOne) {
  std::mt19937_64 rng(4);
  for (std::size_t mode = 0; mode < 3; ++mode) {
    const CherryTensor ct = random_cherry(rng, mode, 4, {3, 5});
    const DenseTensor t = materialize_cherry(ct);
    const Matrix u = unfold(t, mode);
    for (std::size_t j = 0; j < 4; ++j) {
      // Slice at index j of the cherry mode: entries (a, b) over the two rank positions.
      const std::size_t ra = 3, rb = 5;
      auto s = [&](std::size_t a, std::size_t b) { return u(j, a + ra * b); };
      for (std::size_t a = 0; a < ra; ++a)
        for (std::size_t c = 0; c < ra; ++c)
          for (std::size_t b = 0; b < rb; ++b)
            for (std::size_t d = 0; d < rb; ++d) EXPECT_NEAR(s(a, b) * s(c, d) - s(a, d) * s(c, b), 0.0, 1e-14);
    }
  }
}

TEST(MaterializeCherry, EntriesAreProductsOfFactorColumns) {
  std::mt19937_64 rng(8);
  const CherryTensor ct = random_cherry(rng, 1, 3, {2, 4, 2});
  const DenseTensor t = materialize_cherry(ct);
  ASSERT_EQ(t.shape(), (Shape{2, 3, 4, 2}));
  std::vector<std::size_t> idx(4, 0);
  do {
    const double expect = ct.factors[0](idx[0], idx[1]) * ct.factors[1](idx[2], idx[1]) * ct.factors[2](idx[3], idx[1]);
    EXPECT_NEAR(t.at(idx), expect, 1e-15);
  } while (next_index(idx, t.shape()));
}

TEST(CherryProduct, ThirdOrderPairMatchesElementwiseForm) {
  std::mt19937_64 rng(12);
  // A is P x I x R with mode at position 1, B is Q x R x J with mode at position 2.
  const std::size_t P = 2, I = 2, R = 2, Q = 2, J = 2;
  const Matrix a1 = random_matrix(rng, P, I), a3 = random_matrix(rng, R, I);
  const Matrix b1 = random_matrix(rng, Q, J), b2 = random_matrix(rng, R, J);
  const CherryTensor a{1, I, {a1, a3}};
  const CherryTensor b{2, J, {b1, b2}};
  const DenseTensor c = cherry_product(a, b, 2, 1);
  ASSERT_EQ(c.shape(), (Shape{P, I, Q, J}));
  const Matrix link = transpose_matmul(a3, b2);
  for (std::size_t i = 0; i < P; ++i)
    for (std::size_t j = 0; j < I; ++j)
      for (std::size_t k = 0; k < Q; ++k)
        for (std::size_t l = 0; l < J; ++l)
          EXPECT_NEAR(c.at({i, j, k, l}), a1(i, j) * b1(k, l) * link(j, l), 1e-15);
}

TEST(CherryProduct, MatchesDenseContraction) {
  std::mt19937_64 rng(21);
  for (int rep = 0; rep < 12; ++rep) {
    const CherryTensor a = random_cherry(rng, rep % 3, 3, {2, 3});
    const CherryTensor b = random_cherry(rng, (rep + 1) % 3, 2, {3, 2});
    // Positions holding the rank-3 dimension.
    auto pos_of = [](const CherryTensor& ct, std::size_t want) {
      for (std::size_t p = 0; p < ct.order(); ++p)
        if (p != ct.mode && ct.dim(p) == want) return p;
      return std::size_t{99};
    };
    const std::size_t alpha = pos_of(a, 3), beta = pos_of(b, 3);
    const DenseTensor fast = cherry_product(a, b, alpha, beta);
    const DenseTensor slow = contract(materialize_cherry(a), materialize_cherry(b), alpha, beta);
    ASSERT_EQ(fast.shape(), slow.shape());
    EXPECT_LE(max_abs_diff(fast.values(), slow.values()), 1e-14);
  }
}

TEST(CherryProduct, OnesContractToRank) {
  const std::size_t r = 5;
  const CherryTensor a{0, 2, {Matrix(r, 2, 1.0)}};
  const CherryTensor b{1, 3, {Matrix(r, 3, 1.0), Matrix(2, 3, 1.0)}};
  EXPECT_EQ(cherry_product(a, b, 1, 0), DenseTensor({2, 3, 2}, static_cast<double>(r)));
}

TEST(CherryProduct, RejectsBadPositions) {
  const CherryTensor a{0, 2, {Matrix(3, 2, 1.0)}};
  const CherryTensor b{0, 2, {Matrix(4, 2, 1.0)}};
  EXPECT_THROW(cherry_product(a, b, 1, 1), ShapeError);
  EXPECT_THROW(cherry_product(a, a, 0, 1), std::invalid_argument);
}

TEST(Reconstruct, AllOnesRankOneIsOnes) {
  CherryFactors g({2, 3, 2}, RankMatrix(3, 1));
  for (std::size_t k = 0; k < 3; ++k)
    for (std::size_t i = 0; i < 3; ++i)
      if (i != k) std::fill(g.factor(k, i).values().begin(), g.factor(k, i).values().end(), 1.0);
  EXPECT_EQ(ifctn_reconstruct(g), DenseTensor({2, 3, 2}, 1.0));
}

TEST(Reconstruct, MatchesNestedSumThirdOrder) {
  std::mt19937_64 rng(31);
  CherryFactors g({3, 3, 3}, RankMatrix(3, 2));
  for (std::size_t k = 0; k < 3; ++k)
    for (std::size_t i = 0; i < 3; ++i)
      if (i != k) g.set_factor(k, i, random_matrix(rng, 2, 3));
  EXPECT_LE(max_naive_gap(g), 1e-12);
}

TEST(Reconstruct, MatchesNestedSumFourthOrder) {
  std::mt19937_64 rng(32);
  CherryFactors g({2, 2, 2, 2}, RankMatrix(4, 2));
  for (std::size_t k = 0; k < 4; ++k)
    for (std::size_t i = 0; i < 4; ++i)
      if (i != k) g.set_factor(k, i, random_matrix(rng, 2, 2));
  EXPECT_LE(max_naive_gap(g), 1e-12);
}

TEST(Reconstruct, MatchesNestedSumWithMixedRanksAndOrderFive) {
  std::mt19937_64 rng(33);
  for (int rep = 0; rep < 5; ++rep) EXPECT_LE(max_naive_gap(random_factors(rng, random_shape(rng, 5, 1, 3), 2)), 1e-12);
}

TEST(Reconstruct, MatchesFullyConnectedNetworkOfCherryCores) {
  std::mt19937_64 rng(34);
  for (std::size_t order : {3u, 4u}) {
    const CherryFactors g = random_factors(rng, random_shape(rng, order, 2, 3), 2);
    const auto cores = fctn_cores_from_cherries(g);
    const DenseTensor x = ifctn_reconstruct(g);
    std::vector<std::size_t> idx(order, 0);
    do {
      EXPECT_NEAR(x.at(idx), fctn_eval_naive(cores, g.ranks(), idx), 1e-12);
    } while (next_index(idx, g.shape()));
  }
}

TEST(Reconstruct, ThreadCountDoesNotChangeBits) {
  std::mt19937_64 rng(35);
  const CherryFactors g = random_factors(rng, {7, 5, 6, 3}, 3);
  const DenseTensor serial = ifctn_reconstruct(g, simd::active(), 1);
  for (std::size_t t : {2u, 3u, 8u}) EXPECT_EQ(ifctn_reconstruct(g, simd::active(), t), serial);
}

TEST(Reconstruct, ModePermutationCommutes) {
  std::mt19937_64 rng(36);
  const CherryFactors g = random_factors(rng, {2, 3, 4, 2}, 3);
  const std::vector<std::size_t> perm{2, 0, 3, 1};  // mode m of Y is mode perm[m] of X
  Shape ps(4);
  RankMatrix pr(4, 1);
  for (std::size_t m = 0; m < 4; ++m) {
    ps[m] = g.shape()[perm[m]];
    for (std::size_t n = m + 1; n < 4; ++n) pr.set(m, n, g.ranks()(perm[m], perm[n]));
  }
  CherryFactors h(ps, pr);
  for (std::size_t m = 0; m < 4; ++m)
    for (std::size_t n = 0; n < 4; ++n)
      if (m != n) h.set_factor(m, n, g.factor(perm[m], perm[n]));
  const DenseTensor x = ifctn_reconstruct(g), y = ifctn_reconstruct(h);
  std::vector<std::size_t> j(4, 0), i(4);
  do {
    for (std::size_t m = 0; m < 4; ++m) i[perm[m]] = j[m];
    EXPECT_NEAR(y.at(j), x.at(i), 1e-14);
  } while (next_index(j, ps));
}

TEST(PairGram, IsFactorTransposeProduct) {
  std::mt19937_64 rng(37);
  const CherryFactors g = random_factors(rng, {2, 3, 4}, 3);
  const Matrix h = pair_gram(g, 0, 2);
  ASSERT_EQ(h.rows(), 2u);
  ASSERT_EQ(h.cols(), 4u);
  const Matrix expect = matmul(g.factor(0, 2).transpose(), g.factor(2, 0));
  EXPECT_LE(max_abs_diff(h.values(), expect.values()), 1e-15);
}

TEST(BuildS, ThirdOrderLastModeIsSinglePair) {
  std::mt19937_64 rng(38);
  const CherryFactors g = random_factors(rng, {3, 2, 4}, 2);
  const DenseTensor s = build_S(g, 2);
  const Matrix h = pair_gram(g, 0, 1);
  ASSERT_EQ(s.shape(), (Shape{3, 2}));
  EXPECT_EQ(std::vector<double>(s.values().begin(), s.values().end()),
            std::vector<double>(h.values().begin(), h.values().end()));
}

TEST(BuildS, OnesGiveRankPower) {
  const std::size_t r = 3;
  CherryFactors g({2, 2, 3, 2}, RankMatrix(4, r));
  for (std::size_t k = 0; k < 4; ++k)
    for (std::size_t i = 0; i < 4; ++i)
      if (i != k) std::fill(g.factor(k, i).values().begin(), g.factor(k, i).values().end(), 1.0);
  // Three modes remain, so three pairs.
  for (std::size_t k = 0; k < 4; ++k) {
    const DenseTensor s = build_S(g, k);
    for (double v : s.values()) EXPECT_EQ(v, 27.0);
  }
}

TEST(BuildZ, IdentityFactorsLeaveDiagonal) {
  std::mt19937_64 rng(39);
  // R(1,0) = I_1 and R(2,0) = I_2 with identity G(1,0), G(2,0).
  const Shape shape{3, 2, 3};
  CherryFactors g(shape, RankMatrix::from_full({{0, 2, 3}, {2, 0, 2}, {3, 2, 0}}));
  for (std::size_t k = 0; k < 3; ++k)
    for (std::size_t i = 0; i < 3; ++i)
      if (i != k) g.set_factor(k, i, random_matrix(rng, g.ranks()(k, i), shape[k]));
  g.set_factor(1, 0, Matrix::identity(2));
  g.set_factor(2, 0, Matrix::identity(3));
  const Matrix z = build_Z(g, 0);
  const DenseTensor s = build_S(g, 0);
  ASSERT_EQ(z.rows(), s.size());
  ASSERT_EQ(z.cols(), s.size());
  for (std::size_t r = 0; r < z.rows(); ++r)
    for (std::size_t c = 0; c < z.cols(); ++c) EXPECT_EQ(z(r, c), r == c ? s[r] : 0.0);
}

TEST(SubNetworkIdentity, UnfoldingFactorsThroughZ) {
  std::mt19937_64 rng(40);
  for (int rep = 0; rep < 10; ++rep) {
    const CherryFactors g = random_factors(rng, random_shape(rng, 3 + rep % 2, 2, 4), 3);
    const DenseTensor x = ifctn_reconstruct(g);
    for (std::size_t k = 0; k < g.order(); ++k) {
      const Matrix lhs = unfold(x, k).transpose();
      const Matrix rhs = matmul(build_Z(g, k), cherry_khatri_rao(g, k));
      ASSERT_EQ(lhs.rows(), rhs.rows());
      ASSERT_EQ(lhs.cols(), rhs.cols());
      EXPECT_LE(max_abs_diff(lhs.values(), rhs.values()), 1e-12);
    }
  }
}

TEST(CherryOf, MaterializedUnfoldingIsKhatriRao) {
  std::mt19937_64 rng(41);
  const CherryFactors g = random_factors(rng, {3, 2, 4}, 3);
  for (std::size_t k = 0; k < 3; ++k) {
    const Matrix u = unfold(materialize_cherry(cherry_of(g, k)), k);
    EXPECT_LE(max_abs_diff(u.transpose().values(), cherry_khatri_rao(g, k).values()), 1e-15);
  }
}

TEST(ParamCount, StorageExperimentCounts) {
  const Shape shape{256, 256, 31};
  EXPECT_EQ(param_count_ifctn(shape, RankMatrix(3, 4)), 4344u);
  EXPECT_EQ(param_count_fctn(shape, RankMatrix(3, 4)), 8688u);
  const std::vector<std::size_t> tucker{8, 8, 8}, tt{9, 9}, up{4, 4, 4};
  EXPECT_EQ(param_count_tucker(shape, tucker), 4856u);
  EXPECT_EQ(param_count_tt(shape, tt), 23319u);
  EXPECT_EQ(param_count(shape, Model::ifctn, up), 4344u);
  EXPECT_EQ(param_count(shape, Model::fctn, up), 8688u);
  EXPECT_EQ(param_count(shape, Model::tucker, tucker), 4856u);
  EXPECT_EQ(param_count(shape, Model::tt, tt), 23319u);
  EXPECT_THROW(param_count(shape, Model::tt, tucker), std::invalid_argument);
}

TEST(ParamCount, IfctnNeverExceedsFctnForEqualRanks) {
  std::mt19937_64 rng(43);
  for (std::size_t order = 3; order <= 6; ++order)
    for (std::size_t r = 2; r <= 6; ++r) {
      const Shape shape = random_shape(rng, order, 1, 40);
      EXPECT_LE(param_count_ifctn(shape, RankMatrix(order, r)), param_count_fctn(shape, RankMatrix(order, r)));
    }
}

TEST(ParamCount, MatchesFactorStorage) {
  std::mt19937_64 rng(44);
  for (int rep = 0; rep < 50; ++rep) {
    const Shape shape = random_shape(rng, 2 + rep % 4, 1, 9);
    const CherryFactors g = random_factors(rng, shape, 5);
    EXPECT_EQ(param_count_ifctn(shape, g.ranks()), g.parameter_count());
  }
}

TEST(ParamCount, RankOneCanFavourFctn) {
  // Sum of N-1 unit ranks exceeds their product.
  EXPECT_GT(param_count_ifctn({5, 5, 5}, RankMatrix(3, 1)), param_count_fctn({5, 5, 5}, RankMatrix(3, 1)));
}
