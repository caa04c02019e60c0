#pragma once

#include <array>
#include <cstddef>
#include <span>
#include <vector>

#include "mgpa/tensor.hpp"

namespace mgpa {

// Voxel grid of a 3D volume flattened in (z, y, x) row-major order.
struct Grid3 {
  std::size_t dz = 1;
  std::size_t dy = 1;
  std::size_t dx = 1;

  std::size_t size() const noexcept { return dz * dy * dx; }
  std::size_t index(std::size_t z, std::size_t y, std::size_t x) const noexcept {
    return (z * dy + y) * dx + x;
  }
  friend bool operator==(const Grid3&, const Grid3&) = default;
};

enum class Axis { kZ = 0, kY = 1, kX = 2 };

// kNormalized divides each 1D factor by its largest row sum (smoothing that
// preserves constants). kUnitPeak keeps the raw Gaussian kernel matrix with a
// unit diagonal, so one code entry of value b produces a bump of height b.
enum class KernelScale { kNormalized, kUnitPeak };

// Gaussian smoothing operator Σ = Σᶻ ⊗ Σʸ ⊗ Σˣ stored as its three 1D factors.
//
// factor(i, j) = exp(-(i - j)² · spacing² / (2 λ²)) / c, where c is the largest
// row sum of the truncated Gaussian (the central row). Dividing every entry by
// the same constant keeps each factor symmetric, so the operator is
// self-adjoint; constant maps are preserved away from the volume boundary and
// the λ → ∞ limit tends to plain averaging. With KernelScale::kUnitPeak c = 1.
class SeparableKernel {
 public:
  static SeparableKernel build(Grid3 grid, double lambda, double spacing = 1.0,
                               KernelScale scale = KernelScale::kNormalized);
  static SeparableKernel identity(Grid3 grid);

  const Grid3& grid() const noexcept { return grid_; }
  double lambda() const noexcept { return lambda_; }
  double spacing() const noexcept { return spacing_; }
  const Tensor& factor(Axis axis) const noexcept { return factors_[static_cast<int>(axis)]; }

 private:
  SeparableKernel(Grid3 grid, double lambda, double spacing, std::array<Tensor, 3> factors)
      : grid_(grid), lambda_(lambda), spacing_(spacing), factors_(std::move(factors)) {}

  Grid3 grid_;
  double lambda_ = 0.0;
  double spacing_ = 1.0;
  std::array<Tensor, 3> factors_;
};

// One 1D Gaussian factor of size n × n.
Tensor gaussian_factor(std::size_t n, double lambda, double spacing,
                       KernelScale scale = KernelScale::kNormalized);

// Σ·b via three sequential mode products, O(F·(Dz+Dy+Dx)) multiply-adds.
void apply(const SeparableKernel& kernel, std::span<const double> code, std::span<double> out);
Tensor apply(const SeparableKernel& kernel, const Tensor& code);

// Same operator with the mode products performed in the given axis order.
Tensor apply_in_order(const SeparableKernel& kernel, const Tensor& code,
                      std::array<Axis, 3> order);

// Σᵀ·v.
void apply_adjoint(const SeparableKernel& kernel, std::span<const double> vec,
                   std::span<double> out);
Tensor apply_adjoint(const SeparableKernel& kernel, const Tensor& vec);

}  // namespace mgpa
