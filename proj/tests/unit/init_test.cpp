#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>

#include "mgpa/init.hpp"
#include "mgpa/optimizer.hpp"
#include "mgpa/synth_bench.hpp"
#include "small_bench.hpp"
#include "test_util.hpp"

namespace mgpa {
namespace {

TEST(KernelMass, UnitPeakOnSingleVoxelIsOne) {
  const auto k = SeparableKernel::build({1, 1, 1}, 2.0, 1.0, KernelScale::kUnitPeak);
  EXPECT_DOUBLE_EQ(kernel_mass(k), 1.0);
  EXPECT_DOUBLE_EQ(kernel_atom_norm(k), 1.0);
}

TEST(KernelMass, BoundsTheOperatorNorm) {
  const auto k = SeparableKernel::build({5, 4, 6}, 1.3, 1.0, KernelScale::kUnitPeak);
  const Tensor dense = testing::dense_kronecker(k);
  SeededRng rng(3);
  // Power iteration on the symmetric operator.
  std::vector<double> v(dense.rows());
  for (double& x : v) x = rng.normal();
  double lambda = 0.0;
  for (int it = 0; it < 200; ++it) {
    std::vector<double> w = testing::dense_matvec(dense, v);
    double nrm = 0.0;
    for (double x : w) nrm += x * x;
    lambda = std::sqrt(nrm);
    for (std::size_t i = 0; i < v.size(); ++i) v[i] = w[i] / lambda;
  }
  EXPECT_LE(lambda, kernel_mass(k) * (1.0 + 1e-12));
  EXPECT_GT(lambda, 0.5 * kernel_mass(k));
}

TEST(KernelAtomNorm, MatchesDenseColumn) {
  const Grid3 g{5, 5, 5};
  const auto k = SeparableKernel::build(g, 1.0, 1.0, KernelScale::kUnitPeak);
  const Tensor dense = testing::dense_kronecker(k);
  const std::size_t c = g.index(2, 2, 2);
  double sq = 0.0;
  for (std::size_t i = 0; i < dense.rows(); ++i) sq += dense(i, c) * dense(i, c);
  EXPECT_NEAR(kernel_atom_norm(k), std::sqrt(sq), 1e-12);
}

// KKT conditions of ½‖t − Σ K_k b_k‖² + Σ κ_k‖b_k‖₁ with g_k = K_kᵀ r,
// r = t − Σ K_k b_k: g = κ sign(b) where b ≠ 0 and |g| ≤ κ where b = 0.
TEST(MultiscaleLasso, SatisfiesOptimalityConditions) {
  const Grid3 g{6, 5, 4};
  std::vector<SeparableKernel> ks = {SeparableKernel::build(g, 1.5, 1.0, KernelScale::kUnitPeak),
                                     SeparableKernel::build(g, 0.5, 1.0, KernelScale::kUnitPeak)};
  SeededRng rng(7);
  std::vector<double> target(g.size());
  for (double& v : target) v = rng.normal();
  const std::vector<double> kappa = {0.8, 0.3};
  const auto b = multiscale_lasso(target, ks, kappa, 20000);
  ASSERT_EQ(b.size(), 2u);

  std::vector<double> r = target;
  std::vector<double> tmp(g.size());
  for (std::size_t k = 0; k < 2; ++k) {
    apply(ks[k], b[k], tmp);
    for (std::size_t f = 0; f < r.size(); ++f) r[f] -= tmp[f];
  }
  std::size_t nonzero = 0;
  for (std::size_t k = 0; k < 2; ++k) {
    apply_adjoint(ks[k], r, tmp);
    for (std::size_t f = 0; f < r.size(); ++f) {
      if (b[k][f] != 0.0) {
        ++nonzero;
        EXPECT_NEAR(tmp[f], std::copysign(kappa[k], b[k][f]), 1e-4 * kappa[k]) << k << " " << f;
      } else {
        EXPECT_LE(std::abs(tmp[f]), kappa[k] * (1.0 + 1e-4)) << k << " " << f;
      }
    }
  }
  EXPECT_GT(nonzero, 0u);
}

TEST(MultiscaleLasso, LargeThresholdGivesZero) {
  const Grid3 g{4, 4, 4};
  std::vector<SeparableKernel> ks = {SeparableKernel::build(g, 1.0, 1.0, KernelScale::kUnitPeak)};
  std::vector<double> target(g.size(), 0.1);
  const std::vector<double> kappa = {1e6};
  const auto b = multiscale_lasso(target, ks, kappa, 50);
  for (double v : b[0]) EXPECT_EQ(v, 0.0);
}

TEST(MultiscaleLasso, RecoversIsolatedAtom) {
  const Grid3 g{7, 7, 7};
  std::vector<SeparableKernel> ks = {SeparableKernel::build(g, 1.0, 1.0, KernelScale::kUnitPeak)};
  std::vector<double> code(g.size(), 0.0);
  code[g.index(3, 3, 3)] = 2.0;
  std::vector<double> target(g.size());
  apply(ks[0], code, target);
  const std::vector<double> kappa = {1e-4};
  const auto b = multiscale_lasso(target, ks, kappa, 5000);
  const auto peak = std::max_element(b[0].begin(), b[0].end(),
                                     [](double a, double c) { return std::abs(a) < std::abs(c); });
  EXPECT_EQ(static_cast<std::size_t>(peak - b[0].begin()), g.index(3, 3, 3));
  std::vector<double> recon(g.size());
  apply(ks[0], b[0], recon);
  double err = 0.0;
  double nrm = 0.0;
  for (std::size_t f = 0; f < g.size(); ++f) {
    err += (recon[f] - target[f]) * (recon[f] - target[f]);
    nrm += target[f] * target[f];
  }
  EXPECT_LT(std::sqrt(err / nrm), 1e-2);
}

TEST(MultiscaleLasso, RejectsBadArguments) {
  const Grid3 g{2, 2, 2};
  std::vector<SeparableKernel> ks = {SeparableKernel::build(g, 1.0)};
  std::vector<double> target(g.size(), 0.0);
  EXPECT_THROW(multiscale_lasso(target, ks, std::vector<double>{}, 1), ContractViolation);
  EXPECT_THROW(multiscale_lasso(target, ks, std::vector<double>{-1.0}, 1), ContractViolation);
  std::vector<double> short_target(3, 0.0);
  EXPECT_THROW(multiscale_lasso(short_target, ks, std::vector<double>{1.0}, 1), ContractViolation);
}

TEST(SpectralInit, LeadSourcesGetCodesAndDecreasingProfiles) {
  const SynthData d = generate(testing::small_spec(21));
  FitConfig c = testing::small_fit_config(22);
  const FitState st = initialize_fit(d.data, c);
  EXPECT_TRUE(st.model.codes.mean.all_finite());
  EXPECT_TRUE(std::isfinite(st.model.log_sigma));
  // Sources 0 and 2 lead their scales; duplicates start fully pruned.
  const auto kept = [&](std::size_t n) {
    std::size_t k = 0;
    for (std::size_t f = 0; f < st.model.codes.n_features(); ++f) {
      const double m = st.model.codes.mean(n, f);
      if (st.model.codes.log_var(n, f) - std::log(m * m) <= st.prune_threshold) ++k;
    }
    return k;
  };
  EXPECT_GT(kept(0) + kept(2), 0u);
  EXPECT_EQ(kept(1), 0u);
  EXPECT_EQ(kept(3), 0u);
  const Tensor s = mean_sources(st, st.model.warp.tau);
  for (std::size_t n : {std::size_t{0}, std::size_t{2}}) {
    if (kept(n) == 0) continue;
    EXPECT_LT(s(s.rows() - 1, n), s(0, n));
  }
}

TEST(SpectralInit, ConstantDataStartsFullyPruned) {
  DataMatrix d;
  d.grid = {2, 2, 2};
  d.y = Tensor::matrix(4, 8, 1.0);
  d.times = {0.0, 0.1, 0.2, 0.3};
  FitConfig c = testing::small_fit_config(23);
  c.lambdas = {1.0, 0.5};
  const FitState st = initialize_fit(d, c);
  EXPECT_TRUE(active_sources(st).empty());
  const Tensor maps = mean_maps(st);
  for (double v : maps.values()) EXPECT_EQ(v, 0.0);
}

}  // namespace
}  // namespace mgpa
