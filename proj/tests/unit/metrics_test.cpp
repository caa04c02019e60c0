#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

#include "mgpa/alignment.hpp"
#include "mgpa/error.hpp"
#include "mgpa/metrics.hpp"
#include "mgpa/tensor.hpp"

namespace mgpa {
namespace {

// Fixed-sequence noise so the reference values can be reproduced outside
// this code base (a 64-bit LCG with Box-Muller pairs).
class Lcg {
 public:
  explicit Lcg(std::uint64_t seed) : x_(seed) {}
  double uniform() {
    x_ = 6364136223846793005ULL * x_ + 1442695040888963407ULL;
    return (static_cast<double>(x_ >> 11) + 0.5) / 9007199254740992.0;
  }

 private:
  std::uint64_t x_;
};

struct Volumes {
  Grid3 grid{12, 10, 9};
  std::vector<double> truth;
  std::vector<double> est;
};

Volumes reference_volumes() {
  Volumes v;
  Lcg lcg(12345);
  const std::size_t n = v.grid.size();
  std::vector<double> noise(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double u1 = lcg.uniform();
    const double u2 = lcg.uniform();
    noise[i] = std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
  }
  for (std::size_t z = 0; z < v.grid.dz; ++z) {
    for (std::size_t y = 0; y < v.grid.dy; ++y) {
      for (std::size_t x = 0; x < v.grid.dx; ++x) {
        const double dz = static_cast<double>(z) - 5.5;
        const double dy = static_cast<double>(y) - 4.0;
        const double dx = static_cast<double>(x) - 4.5;
        v.truth.push_back(std::exp(-(dz * dz + dy * dy + dx * dx) / 8.0));
      }
    }
  }
  for (std::size_t i = 0; i < n; ++i) v.est.push_back(v.truth[i] + 0.1 * noise[i]);
  return v;
}

TEST(Lcg, MatchesReferenceStream) {
  Lcg lcg(12345);
  EXPECT_DOUBLE_EQ(lcg.uniform(), 0.10957860598549468);
  const Volumes v = reference_volumes();
  EXPECT_NEAR((v.est[0] - v.truth[0]) / 0.1, -0.20296894248883945, 1e-12);
}

TEST(Ssim, IdenticalVolumesScoreOne) {
  const Volumes v = reference_volumes();
  EXPECT_NEAR(spatial_ssim(v.truth, v.truth, v.grid), 1.0, 1e-12);
  EXPECT_NEAR(spatial_ssim(v.est, v.est, v.grid), 1.0, 1e-12);
}

// Reference from an independent Gaussian-filter implementation (σ 1.5,
// radius 3, valid region only, same constants).
TEST(Ssim, MatchesReferenceImplementation) {
  const Volumes v = reference_volumes();
  EXPECT_NEAR(spatial_ssim(v.est, v.truth, v.grid), 0.8465971809128793, 1e-3);
}

TEST(Ssim, NegatedVolumeScoresNegative) {
  const Volumes v = reference_volumes();
  std::vector<double> neg(v.truth.size());
  for (std::size_t i = 0; i < neg.size(); ++i) neg[i] = -v.truth[i];
  EXPECT_NEAR(spatial_ssim(neg, v.truth, v.grid), -0.834316064000646, 1e-3);
}

TEST(Ssim, InvariantToAffineRescalingOfEstimate) {
  const Volumes v = reference_volumes();
  std::vector<double> scaled(v.est.size());
  for (std::size_t i = 0; i < scaled.size(); ++i) scaled[i] = 3.0 * v.est[i] - 7.0;
  EXPECT_NEAR(spatial_ssim(scaled, v.truth, v.grid), spatial_ssim(v.est, v.truth, v.grid), 1e-12);
}

TEST(Ssim, Symmetric) {
  const Volumes v = reference_volumes();
  EXPECT_NEAR(spatial_ssim(v.est, v.truth, v.grid), spatial_ssim(v.truth, v.est, v.grid), 1e-12);
}

TEST(Ssim, BoundedOnRandomVolumes) {
  SeededRng rng(9);
  const Grid3 g{8, 8, 8};
  for (int trial = 0; trial < 20; ++trial) {
    std::vector<double> a(g.size());
    std::vector<double> b(g.size());
    for (double& x : a) x = rng.normal();
    for (double& x : b) x = rng.normal();
    const double s = spatial_ssim(a, b, g);
    EXPECT_GE(s, -1.0);
    EXPECT_LE(s, 1.0);
  }
}

TEST(Ssim, ConstantTruth) {
  const Grid3 g{7, 7, 7};
  std::vector<double> zero(g.size(), 0.0);
  EXPECT_EQ(spatial_ssim(zero, zero, g), 1.0);
  std::vector<double> bump = zero;
  bump[g.index(3, 3, 3)] = 1.0;
  const double s = spatial_ssim(bump, zero, g);
  EXPECT_LT(s, 1.0);
  EXPECT_TRUE(std::isfinite(s));
}

TEST(Ssim, SmallGridsShrinkTheWindow) {
  const Grid3 g{2, 3, 9};
  SeededRng rng(4);
  std::vector<double> a(g.size());
  for (double& x : a) x = rng.normal();
  EXPECT_NEAR(spatial_ssim(a, a, g), 1.0, 1e-12);
}

TEST(Ssim, RejectsSizeMismatch) {
  std::vector<double> a(8, 0.0);
  std::vector<double> b(7, 0.0);
  EXPECT_THROW(spatial_ssim(a, b, Grid3{2, 2, 2}), ContractViolation);
}

TEST(TimeshiftR2, PerfectAffineRelationGivesOne) {
  std::vector<double> t = {0.0, 0.1, 0.3, 0.7};
  std::vector<double> d;
  for (double v : t) d.push_back(-2.0 * v + 5.0);
  EXPECT_NEAR(timeshift_r2(d, t), 1.0, 1e-12);
}

TEST(TimeshiftR2, ConstantShiftGivesZero) {
  std::vector<double> t = {0.0, 0.1, 0.3, 0.7};
  std::vector<double> d(4, 0.25);
  EXPECT_EQ(timeshift_r2(d, t), 0.0);
}

TEST(TimeshiftR2, IndependentNoiseIsNearZero) {
  SeededRng rng(17);
  std::vector<double> t(1000);
  std::vector<double> d(1000);
  for (std::size_t i = 0; i < t.size(); ++i) {
    t[i] = 0.7 * static_cast<double>(i % 50) / 49.0;
    d[i] = rng.normal();
  }
  EXPECT_LT(timeshift_r2(d, t), 0.02);
}

TEST(TemporalMse, ExamplesUnderSignScaleAlignment) {
  // A constant 0.1 shift cannot be removed by a pure scale: a·x vs x + 0.1.
  Tensor truth = Tensor::matrix(4, 1);
  Tensor est = Tensor::matrix(4, 1);
  for (std::size_t p = 0; p < 4; ++p) {
    truth(p, 0) = 1.0;
    est(p, 0) = 1.1;
  }
  const double mse = temporal_mse(est, truth, AlignMode::kNone);
  EXPECT_NEAR(mse, 0.01, 1e-12);
  for (std::size_t p = 0; p < 4; ++p) est(p, 0) = -truth(p, 0) * (1.0 + static_cast<double>(p));
  for (std::size_t p = 0; p < 4; ++p) truth(p, 0) = 1.0 + static_cast<double>(p);
  EXPECT_NEAR(temporal_mse(est, truth, AlignMode::kSignScale), 0.0, 1e-20);
}

TEST(TemporalMse, AffineAlignmentRemovesOffset) {
  Tensor truth = Tensor::matrix(5, 2);
  Tensor est = Tensor::matrix(5, 2);
  for (std::size_t p = 0; p < 5; ++p) {
    const double t = static_cast<double>(p);
    truth(p, 0) = t * t;
    truth(p, 1) = std::sin(t);
    est(p, 0) = 3.0 * std::sin(t) + 2.0;  // matches truth column 1
    est(p, 1) = -0.5 * t * t + 1.0;       // matches truth column 0
  }
  const auto m = match_sources(est, truth, AlignMode::kAffine);
  ASSERT_EQ(m.size(), 2u);
  for (const SourceMatch& s : m) EXPECT_EQ(s.est, 1 - s.truth);
  EXPECT_NEAR(temporal_mse(est, truth, m), 0.0, 1e-20);
}

}  // namespace
}  // namespace mgpa
