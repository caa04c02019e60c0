#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "mgpa/kron_conv.hpp"

namespace mgpa {

struct DataMatrix;
struct FitConfig;
struct FitState;

// Largest row sum of Σ (an upper bound on its spectral norm).
double kernel_mass(const SeparableKernel& kernel);
// ‖Σ e_c‖ for the central voxel c.
double kernel_atom_norm(const SeparableKernel& kernel);

// Sparse decomposition of one map over several smoothing operators:
//   minimize ½‖target − Σ_k K_k b_k‖² + Σ_k κ_k ‖b_k‖₁
// by accelerated proximal gradient. Each block is rescaled by its kernel
// mass internally so that coarse and fine scales converge at the same rate.
std::vector<std::vector<double>> multiscale_lasso(std::span<const double> target,
                                                  std::span<const SeparableKernel> kernels,
                                                  std::span<const double> kappa,
                                                  std::size_t iterations);

// Data-driven starting point, applied on top of the random initialization:
//  - the leading principal component of the standardized data gives a shared
//    temporal profile s (oriented decreasing when times are known) and a map
//    T = Ycᵀ s / P;
//  - T is decomposed over the distinct length-scales with multiscale_lasso
//    (threshold τ·σ̂/√P·‖atom‖, σ̂ the rank-1 residual RMS); the first source
//    of each scale takes that scale's codes;
//  - those sources' weights are fitted to s by ridge regression at the current
//    frequency means (to the unit-slope line −t when all times are equal, so
//    the time-shifts can spread the samples);
//  - σ starts at σ̂, zero code entries start pruned.
// For data without variation every code starts pruned and nothing else
// changes.
void spectral_initialize(FitState& state, const DataMatrix& data, const FitConfig& cfg);

}  // namespace mgpa
