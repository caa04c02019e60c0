#include <gtest/gtest.h>

#include <cmath>

#include "mgpa/error.hpp"
#include "mgpa/kron_conv.hpp"
#include "test_util.hpp"

namespace mgpa {
namespace {

double dot(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

TEST(BuildKernel, TinyLambdaGivesIdentityFactors) {
  const auto k = SeparableKernel::build({3, 4, 5}, 1e-6);
  for (Axis a : {Axis::kZ, Axis::kY, Axis::kX}) {
    const Tensor& f = k.factor(a);
    for (std::size_t i = 0; i < f.rows(); ++i)
      for (std::size_t j = 0; j < f.cols(); ++j) EXPECT_DOUBLE_EQ(f(i, j), i == j ? 1.0 : 0.0);
  }
}

TEST(BuildKernel, NeighbourRatioIsGaussian) {
  const auto k = SeparableKernel::build({4, 4, 4}, 1.0, 1.0);
  for (Axis a : {Axis::kZ, Axis::kY, Axis::kX}) {
    const Tensor& f = k.factor(a);
    EXPECT_NEAR(f(0, 1) / f(0, 0), std::exp(-0.5), 1e-15);
  }
}

TEST(BuildKernel, SpacingScalesDistance) {
  const auto k = SeparableKernel::build({1, 1, 6}, 2.0, 0.5);
  const Tensor& f = k.factor(Axis::kX);
  EXPECT_NEAR(f(2, 4) / f(2, 2), std::exp(-1.0 / 8.0), 1e-15);
}

TEST(BuildKernel, FactorsSymmetricAndNonnegative) {
  const auto k = SeparableKernel::build({5, 7, 6}, 1.7);
  SeededRng rng(3);
  for (Axis a : {Axis::kZ, Axis::kY, Axis::kX}) {
    const Tensor& f = k.factor(a);
    for (int r = 0; r < 20; ++r) {
      const auto i = static_cast<std::size_t>(rng.uniform_int(0, static_cast<std::int64_t>(f.rows() - 1)));
      const auto j = static_cast<std::size_t>(rng.uniform_int(0, static_cast<std::int64_t>(f.rows() - 1)));
      EXPECT_EQ(f(i, j), f(j, i));
      EXPECT_GE(f(i, j), 0.0);
    }
  }
}

TEST(BuildKernel, NormalizedLargestRowSumIsOne) {
  const Tensor f = gaussian_factor(9, 2.0, 1.0, KernelScale::kNormalized);
  double best = 0.0;
  for (std::size_t i = 0; i < f.rows(); ++i) {
    double s = 0.0;
    for (double v : f.row(i)) s += v;
    best = std::max(best, s);
  }
  EXPECT_NEAR(best, 1.0, 1e-14);
}

TEST(BuildKernel, UnitPeakHasUnitDiagonal) {
  const Tensor f = gaussian_factor(7, 2.0, 1.0, KernelScale::kUnitPeak);
  for (std::size_t i = 0; i < f.rows(); ++i) EXPECT_EQ(f(i, i), 1.0);
  EXPECT_NEAR(f(0, 2), std::exp(-0.5), 1e-15);
}

TEST(BuildKernel, RejectsBadArguments) {
  EXPECT_THROW(SeparableKernel::build({3, 3, 3}, 0.0), ContractViolation);
  EXPECT_THROW(SeparableKernel::build({3, 3, 3}, -1.0), ContractViolation);
  EXPECT_THROW(SeparableKernel::build({0, 3, 3}, 1.0), ContractViolation);
  EXPECT_THROW(SeparableKernel::build({3, 3, 3}, 1.0, 0.0), ContractViolation);
}

TEST(Apply, IdentityKernelReturnsInput) {
  SeededRng rng(1);
  const Tensor b = testing::random_tensor({60}, rng);
  EXPECT_EQ(apply(SeparableKernel::identity({3, 4, 5}), b), b);
  EXPECT_EQ(apply_adjoint(SeparableKernel::identity({3, 4, 5}), b), b);
}

TEST(Apply, ZeroCodeGivesZeroMap) {
  const auto k = SeparableKernel::build({3, 3, 3}, 1.0);
  EXPECT_EQ(apply(k, Tensor({27})), Tensor({27}));
}

TEST(Apply, MatchesDenseKroneckerOn3Cubed) {
  const auto k = SeparableKernel::build({3, 3, 3}, 1.0);
  const Tensor dense = testing::dense_kronecker(k);
  SeededRng rng(8);
  const Tensor b = testing::random_tensor({27}, rng);
  const Tensor out = apply(k, b);
  const auto ref = testing::dense_matvec(dense, b.values());
  for (std::size_t i = 0; i < 27; ++i) EXPECT_NEAR(out[i], ref[i], 1e-10);
}

TEST(Apply, MatchesDenseKroneckerOnGridsUpTo5) {
  SeededRng rng(9);
  for (std::size_t dz = 1; dz <= 5; dz += 2) {
    for (std::size_t dy : {2u, 5u}) {
      for (std::size_t dx : {1u, 4u, 5u}) {
        const Grid3 g{dz, dy, dx};
        const auto k = SeparableKernel::build(g, 0.5 + rng.uniform() * 2.0, 0.7 + rng.uniform());
        const Tensor dense = testing::dense_kronecker(k);
        for (int r = 0; r < 5; ++r) {
          const Tensor b = testing::random_tensor({g.size()}, rng);
          const Tensor out = apply(k, b);
          const auto ref = testing::dense_matvec(dense, b.values());
          for (std::size_t i = 0; i < g.size(); ++i) ASSERT_NEAR(out[i], ref[i], 1e-10);
        }
      }
    }
  }
}

TEST(Apply, LengthMismatchIsContractViolation) {
  const auto k = SeparableKernel::build({3, 3, 3}, 1.0);
  EXPECT_THROW(apply(k, Tensor({26})), ContractViolation);
  EXPECT_THROW(apply_adjoint(k, Tensor({28})), ContractViolation);
}

TEST(Apply, AxisOrderDoesNotMatter) {
  const auto k = SeparableKernel::build({4, 5, 6}, 1.3);
  SeededRng rng(12);
  const Tensor b = testing::random_tensor({120}, rng);
  const Tensor ref = apply(k, b);
  const std::array<std::array<Axis, 3>, 3> orders = {{{Axis::kX, Axis::kY, Axis::kZ},
                                                      {Axis::kY, Axis::kZ, Axis::kX},
                                                      {Axis::kZ, Axis::kX, Axis::kY}}};
  for (const auto& o : orders) EXPECT_LT(max_abs_diff(apply_in_order(k, b, o), ref), 1e-12);
}

TEST(ApplyAdjoint, EqualsApplyForSymmetricFactors) {
  const auto k = SeparableKernel::build({4, 3, 5}, 1.1);
  SeededRng rng(13);
  const Tensor v = testing::random_tensor({60}, rng);
  EXPECT_LT(max_abs_diff(apply_adjoint(k, v), apply(k, v)), 1e-13);
}

TEST(ApplyAdjoint, InnerProductIdentity) {
  const auto k = SeparableKernel::build({5, 4, 3}, 0.9, 1.3, KernelScale::kUnitPeak);
  SeededRng rng(14);
  for (int r = 0; r < 10; ++r) {
    const Tensor b = testing::random_tensor({60}, rng);
    const Tensor v = testing::random_tensor({60}, rng);
    const double lhs = dot(apply(k, b).values(), v.values());
    const double rhs = dot(b.values(), apply_adjoint(k, v).values());
    EXPECT_LT(std::abs(lhs - rhs) / std::max(std::abs(lhs), 1e-300), 1e-10);
  }
}

TEST(Apply, LinearInCode) {
  const auto k = SeparableKernel::build({3, 4, 4}, 1.4);
  SeededRng rng(15);
  const Tensor b1 = testing::random_tensor({48}, rng);
  const Tensor b2 = testing::random_tensor({48}, rng);
  const Tensor lhs = apply(k, 2.5 * b1 + b2);
  const Tensor rhs = 2.5 * apply(k, b1) + apply(k, b2);
  EXPECT_LT(max_abs_diff(lhs, rhs), 1e-12);
}

}  // namespace
}  // namespace mgpa
