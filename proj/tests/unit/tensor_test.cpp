#include <gtest/gtest.h>

#include <atomic>
#include <cmath>
#include <numeric>

#include "mgpa/error.hpp"
#include "mgpa/parallel.hpp"
#include "mgpa/tensor.hpp"
#include "test_util.hpp"

namespace mgpa {
namespace {

TEST(Tensor, ShapeMatchesStorage) {
  Tensor t({2, 3, 4}, 1.5);
  EXPECT_EQ(t.size(), 24u);
  EXPECT_EQ(t.ndim(), 3u);
  EXPECT_THROW(Tensor({2, 2}, std::vector<double>{1.0, 2.0, 3.0}), ContractViolation);
}

TEST(Tensor, ElementwiseOps) {
  Tensor a = Tensor::from_rows({{1, 2}, {3, 4}});
  Tensor b = Tensor::from_rows({{0.5, 0.5}, {1, 1}});
  EXPECT_EQ(a + b, Tensor::from_rows({{1.5, 2.5}, {4, 5}}));
  EXPECT_EQ(a - b, Tensor::from_rows({{0.5, 1.5}, {2, 3}}));
  EXPECT_EQ(2.0 * a, Tensor::from_rows({{2, 4}, {6, 8}}));
  EXPECT_THROW(a += Tensor::matrix(3, 2), ContractViolation);
}

TEST(Matmul, IdentityLeavesMatrixUnchanged) {
  SeededRng rng(1);
  const Tensor m = testing::random_tensor({3, 4}, rng);
  Tensor eye = Tensor::matrix(3, 3);
  for (std::size_t i = 0; i < 3; ++i) eye(i, i) = 1.0;
  EXPECT_EQ(matmul(eye, m), m);
}

TEST(Matmul, HandExample) {
  const Tensor a = Tensor::from_rows({{1, 2}, {3, 4}});
  const Tensor b = Tensor::from_rows({{0}, {1}});
  EXPECT_EQ(matmul(a, b), Tensor::from_rows({{2}, {4}}));
}

TEST(Matmul, ZeroAnnihilates) {
  SeededRng rng(2);
  const Tensor a = testing::random_tensor({4, 5}, rng);
  EXPECT_EQ(matmul(a, Tensor::matrix(5, 3)), Tensor::matrix(4, 3));
}

TEST(Matmul, DimensionMismatchIsContractViolation) {
  EXPECT_THROW(matmul(Tensor::matrix(2, 3), Tensor::matrix(2, 3)), ContractViolation);
}

TEST(Matmul, TransposedVariantsAgreeWithNaiveProduct) {
  SeededRng rng(3);
  const Tensor a = testing::random_tensor({6, 4}, rng);
  const Tensor b = testing::random_tensor({6, 5}, rng);
  const Tensor c = testing::random_tensor({7, 4}, rng);
  const Tensor tn = matmul_tn(a, b);
  const Tensor nt = matmul_nt(a, c);
  for (std::size_t i = 0; i < 4; ++i) {
    for (std::size_t j = 0; j < 5; ++j) {
      double s = 0.0;
      for (std::size_t k = 0; k < 6; ++k) s += a(k, i) * b(k, j);
      EXPECT_NEAR(tn(i, j), s, 1e-12);
    }
  }
  for (std::size_t i = 0; i < 6; ++i) {
    for (std::size_t j = 0; j < 7; ++j) {
      double s = 0.0;
      for (std::size_t k = 0; k < 4; ++k) s += a(i, k) * c(j, k);
      EXPECT_NEAR(nt(i, j), s, 1e-12);
    }
  }
}

TEST(SeededRng, SameSeedSameSequence) {
  SeededRng a(42);
  SeededRng b(42);
  for (int i = 0; i < 1000; ++i) ASSERT_EQ(a.normal(), b.normal());
  SeededRng c(43);
  EXPECT_NE(SeededRng(42).normal(), c.normal());
}

TEST(SeededRng, SubstreamsDependOnlyOnSeedAndId) {
  SeededRng root(7);
  root.normal();  // consuming the parent must not affect substreams
  SeededRng s1 = root.substream(3);
  SeededRng s2 = SeededRng(7).substream(3);
  for (int i = 0; i < 100; ++i) ASSERT_EQ(s1.next_u64(), s2.next_u64());
  EXPECT_NE(SeededRng(7).substream(3).next_u64(), SeededRng(7).substream(4).next_u64());
}

TEST(SeededRng, UniformIntCoversClosedRange) {
  SeededRng rng(5);
  std::vector<int> hits(4, 0);
  for (int i = 0; i < 4000; ++i) {
    const auto v = rng.uniform_int(2, 5);
    ASSERT_GE(v, 2);
    ASSERT_LE(v, 5);
    ++hits[static_cast<std::size_t>(v - 2)];
  }
  for (int h : hits) EXPECT_GT(h, 800);
}

TEST(GaussianReparam, ZeroStdReturnsMean) {
  SeededRng rng(9);
  const Tensor mean = testing::random_tensor({3, 4}, rng);
  EXPECT_EQ(gaussian_reparam_sample(mean, Tensor({3, 4}, 0.0), rng), mean);
}

TEST(GaussianReparam, TwoMomentCheckAtOneMillionDraws) {
  constexpr std::size_t n = 1'000'000;
  SeededRng rng(11);
  const Tensor out = gaussian_reparam_sample(Tensor({n}, 0.0), Tensor({n}, 1.0), rng);
  double sum = 0.0;
  for (double v : out.values()) sum += v;
  const double mean = sum / n;
  double sq = 0.0;
  for (double v : out.values()) sq += (v - mean) * (v - mean);
  EXPECT_LT(std::abs(mean), 4e-3);
  EXPECT_LT(std::abs(sq / n - 1.0), 1e-2);
}

TEST(GaussianReparam, FreshGeneratorsWithSameSeedAgree) {
  const Tensor mean({10}, 1.0);
  const Tensor sd({10}, 2.0);
  SeededRng a(21);
  SeededRng b(21);
  EXPECT_EQ(gaussian_reparam_sample(mean, sd, a), gaussian_reparam_sample(mean, sd, b));
}

TEST(GaussianReparam, RejectsBadArguments) {
  SeededRng rng(1);
  EXPECT_THROW(gaussian_reparam_sample(Tensor({3}), Tensor({4}), rng), ContractViolation);
  EXPECT_THROW(gaussian_reparam_sample(Tensor({2}), Tensor({2}, -1.0), rng), ContractViolation);
}

TEST(ParallelFor, EveryIndexRunsOnceForAnyWorkerCount) {
  for (int workers : {1, 2, 5}) {
    set_thread_count(workers);
    std::vector<std::atomic<int>> hits(97);
    parallel_for(hits.size(), [&](std::size_t i) { hits[i].fetch_add(1); });
    for (const auto& h : hits) ASSERT_EQ(h.load(), 1);
  }
  set_thread_count(1);
}

TEST(ParallelFor, PropagatesExceptions) {
  set_thread_count(3);
  EXPECT_THROW(parallel_for(10,
                            [](std::size_t i) {
                              if (i == 7) throw std::runtime_error("boom");
                            }),
               std::runtime_error);
  set_thread_count(1);
}

}  // namespace
}  // namespace mgpa
