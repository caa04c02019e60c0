#pragma once

#include <span>

#include "mgpa/kron_conv.hpp"
#include "mgpa/tensor.hpp"

namespace mgpa {

inline constexpr int kSsimRadius = 3;  // 7³ window
inline constexpr double kSsimSigma = 1.5;

// Mean local SSIM of two volumes on the given grid. Both volumes are min-max
// normalized to [0, 1] first; local statistics use a Gaussian-weighted 7³
// window (σ = 1.5) evaluated where the window fits inside the volume, with
// C₁ = (0.01 L)², C₂ = (0.03 L)² and L = 1 (the normalized range).
// Along axes shorter than 7 voxels the window shrinks to the largest odd
// length that fits.
//
// A constant truth volume has no dynamic range: the score is 1 when est is
// identical to it, otherwise both volumes are shifted to a zero minimum
// (without rescaling) and scored with L = 1.
double spatial_ssim(std::span<const double> est, std::span<const double> truth, Grid3 grid);

// R² of the ordinary least-squares fit t_true ≈ a·δ + b. Zero when δ is
// constant.
double timeshift_r2(std::span<const double> delta, std::span<const double> t_true);

}  // namespace mgpa
