#include "cherrynet/cherry.hpp"
#include "cherrynet/simd/kernels.hpp"

#include "test_util.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <random>
#include <vector>

using namespace cherrynet;

namespace {

std::vector<double> randoms(std::mt19937_64& rng, std::size_t n) {
  std::vector<double> v(n);
  for (double& x : v) x = cherrynet::testing::uniform(rng);
  return v;
}

class KernelEquivalence : public ::testing::Test {
 protected:
  void SetUp() override {
    vec_ = simd::avx2_kernels();
    if (!vec_) GTEST_SKIP() << "no AVX2 kernels on this machine";
  }
  const simd::KernelTable& ref_ = simd::scalar_kernels();
  const simd::KernelTable* vec_ = nullptr;
};

}  // namespace

// Lengths 0..67 cover empty input, pure tails and several full vector blocks.
TEST_F(KernelEquivalence, ElementwiseKernelsAreBitExact) {
  std::mt19937_64 rng(42);
  for (std::size_t n = 0; n <= 67; ++n) {
    const auto a = randoms(rng, n), b = randoms(rng, n);
    const double s = cherrynet::testing::uniform(rng);

    auto r1 = a, v1 = a;
    ref_.mul(r1.data(), b.data(), n);
    vec_->mul(v1.data(), b.data(), n);
    EXPECT_EQ(r1, v1) << "mul n=" << n;

    r1 = a, v1 = a;
    ref_.scale(r1.data(), s, n);
    vec_->scale(v1.data(), s, n);
    EXPECT_EQ(r1, v1) << "scale n=" << n;

    std::vector<double> r2(n), v2(n);
    ref_.scaled_copy(r2.data(), a.data(), s, n);
    vec_->scaled_copy(v2.data(), a.data(), s, n);
    EXPECT_EQ(r2, v2) << "scaled_copy n=" << n;

    std::vector<double> mask(n);
    for (std::size_t e = 0; e < n; ++e) mask[e] = (rng() & 1) ? 1.0 : 0.0;
    const auto prev = randoms(rng, n), obs = randoms(rng, n);
    ref_.prox_blend(r2.data(), prev.data(), a.data(), obs.data(), mask.data(), 0.1, n);
    vec_->prox_blend(v2.data(), prev.data(), a.data(), obs.data(), mask.data(), 0.1, n);
    EXPECT_EQ(r2, v2) << "prox_blend n=" << n;
  }
}

TEST_F(KernelEquivalence, ReductionsAgreeToRounding) {
  std::mt19937_64 rng(7);
  for (std::size_t n = 0; n <= 67; ++n) {
    const auto a = randoms(rng, n), b = randoms(rng, n);
    const double tol = 1e-14 * static_cast<double>(n + 1);
    EXPECT_NEAR(ref_.dot(a.data(), b.data(), n), vec_->dot(a.data(), b.data(), n), tol);
    EXPECT_NEAR(ref_.sum_sq(a.data(), n), vec_->sum_sq(a.data(), n), tol);
    EXPECT_NEAR(ref_.sq_dist(a.data(), b.data(), n), vec_->sq_dist(a.data(), b.data(), n), tol);

    auto r = randoms(rng, n);
    auto v = r;
    ref_.mul_acc(r.data(), a.data(), b.data(), n);
    vec_->mul_acc(v.data(), a.data(), b.data(), n);
    for (std::size_t e = 0; e < n; ++e) EXPECT_NEAR(r[e], v[e], 1e-15);
    ref_.sq_acc(r.data(), a.data(), n);
    vec_->sq_acc(v.data(), a.data(), n);
    for (std::size_t e = 0; e < n; ++e) EXPECT_NEAR(r[e], v[e], 1e-15);
  }
}

TEST_F(KernelEquivalence, ReconstructionMatchesScalarPath) {
  std::mt19937_64 rng(19);
  for (int rep = 0; rep < 10; ++rep) {
    const Shape shape = cherrynet::testing::random_shape(rng, 3 + rep % 2, 2, 9);
    const CherryFactors g = cherrynet::testing::random_factors(rng, shape, 3);
    EXPECT_EQ(ifctn_reconstruct(g, ref_), ifctn_reconstruct(g, *vec_));
  }
}

TEST(KernelScalar, HandValues) {
  const auto& k = simd::scalar_kernels();
  std::vector<double> a{1, 2, 3}, b{4, 5, 6};
  EXPECT_EQ(k.dot(a.data(), b.data(), 3), 32.0);
  EXPECT_EQ(k.sum_sq(a.data(), 3), 14.0);
  EXPECT_EQ(k.sq_dist(a.data(), b.data(), 3), 27.0);
  const std::vector<double> prev{0.9, 0.9}, target{0.3, 0.3}, obs{5, 5}, mask{0, 1};
  std::vector<double> out(2);
  k.prox_blend(out.data(), prev.data(), target.data(), obs.data(), mask.data(), 0.1, 2);
  EXPECT_NEAR(out[0], 0.39 / 1.1, 1e-15);
  EXPECT_EQ(out[1], 5.0);
}

TEST(KernelDispatch, SelectScalarAlwaysWorks) {
  const auto before = simd::active().isa;
  EXPECT_TRUE(simd::select(simd::Isa::scalar));
  EXPECT_EQ(simd::active().isa, simd::Isa::scalar);
  simd::select(before);
  EXPECT_EQ(simd::to_string(simd::Isa::avx2), "avx2");
}
