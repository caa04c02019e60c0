#include "mgpa/kron_conv.hpp"

#include <Eigen/Core>

#include <algorithm>
#include <cmath>
#include <string>

namespace mgpa {

namespace {

std::size_t axis_length(const Grid3& g, Axis a) {
  switch (a) {
    case Axis::kZ: return g.dz;
    case Axis::kY: return g.dy;
    case Axis::kX: return g.dx;
  }
  return 0;
}

using RowMajor = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using ConstMap = Eigen::Map<const RowMajor>;
using MutMap = Eigen::Map<RowMajor>;

// out[o, i, k] = Σ_j M(i, j) in[o, j, k] for the reshaping (outer, n, inner)
// of the volume around `axis`. With transpose, M(j, i) is used instead.
void mode_product(const Grid3& g, Axis axis, const Tensor& m, bool transpose,
                  std::span<const double> in, std::span<double> out) {
  const auto n = static_cast<Eigen::Index>(axis_length(g, axis));
  Eigen::Index outer = 1;
  Eigen::Index inner = 1;
  switch (axis) {
    case Axis::kZ: inner = static_cast<Eigen::Index>(g.dy * g.dx); break;
    case Axis::kY:
      outer = static_cast<Eigen::Index>(g.dz);
      inner = static_cast<Eigen::Index>(g.dx);
      break;
    case Axis::kX: outer = static_cast<Eigen::Index>(g.dz * g.dy); break;
  }
  const ConstMap w(m.values().data(), n, n);
  if (inner == 1) {
    // Rows of the (outer × n) view are fibres along the axis: out = in · Mᵀ.
    const ConstMap src(in.data(), outer, n);
    MutMap dst(out.data(), outer, n);
    if (transpose) {
      dst.noalias() = src * w;
    } else {
      dst.noalias() = src * w.transpose();
    }
    return;
  }
  for (Eigen::Index o = 0; o < outer; ++o) {
    const ConstMap src(in.data() + o * n * inner, n, inner);
    MutMap dst(out.data() + o * n * inner, n, inner);
    if (transpose) {
      dst.noalias() = w.transpose() * src;
    } else {
      dst.noalias() = w * src;
    }
  }
}

void apply_sequence(const SeparableKernel& kernel, std::span<const double> in,
                    std::span<double> out, std::array<Axis, 3> order, bool transpose) {
  const Grid3& g = kernel.grid();
  require(in.size() == g.size(), "kron_conv::apply: input length does not match grid");
  require(out.size() == g.size(), "kron_conv::apply: output length does not match grid");
  std::vector<double> a(g.size());
  std::vector<double> b(g.size());
  mode_product(g, order[0], kernel.factor(order[0]), transpose, in, a);
  mode_product(g, order[1], kernel.factor(order[1]), transpose, a, b);
  mode_product(g, order[2], kernel.factor(order[2]), transpose, b, out);
}

constexpr std::array<Axis, 3> kDefaultOrder = {Axis::kX, Axis::kY, Axis::kZ};

}  // namespace

Tensor gaussian_factor(std::size_t n, double lambda, double spacing, KernelScale kscale) {
  require(n >= 1, "gaussian_factor: dimension must be >= 1");
  require(lambda > 0.0 && std::isfinite(lambda), "gaussian_factor: lambda must be > 0");
  require(spacing > 0.0 && std::isfinite(spacing), "gaussian_factor: spacing must be > 0");
  Tensor f = Tensor::matrix(n, n);
  const double scale = spacing * spacing / (2.0 * lambda * lambda);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      const double d = static_cast<double>(i) - static_cast<double>(j);
      f(i, j) = std::exp(-d * d * scale);
    }
  }
  if (kscale == KernelScale::kUnitPeak) return f;
  double max_row = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    double s = 0.0;
    for (double v : f.row(i)) s += v;
    max_row = std::max(max_row, s);
  }
  f *= 1.0 / max_row;
  return f;
}

SeparableKernel SeparableKernel::build(Grid3 grid, double lambda, double spacing,
                                       KernelScale scale) {
  require(grid.dz >= 1 && grid.dy >= 1 && grid.dx >= 1,
          "SeparableKernel::build: grid dimensions must be >= 1");
  require(lambda > 0.0, "SeparableKernel::build: lambda must be > 0");
  require(spacing > 0.0, "SeparableKernel::build: spacing must be > 0");
  return SeparableKernel(grid, lambda, spacing,
                         {gaussian_factor(grid.dz, lambda, spacing, scale),
                          gaussian_factor(grid.dy, lambda, spacing, scale),
                          gaussian_factor(grid.dx, lambda, spacing, scale)});
}

SeparableKernel SeparableKernel::identity(Grid3 grid) {
  require(grid.dz >= 1 && grid.dy >= 1 && grid.dx >= 1,
          "SeparableKernel::identity: grid dimensions must be >= 1");
  auto eye = [](std::size_t n) {
    Tensor t = Tensor::matrix(n, n);
    for (std::size_t i = 0; i < n; ++i) t(i, i) = 1.0;
    return t;
  };
  return SeparableKernel(grid, 0.0, 1.0, {eye(grid.dz), eye(grid.dy), eye(grid.dx)});
}

void apply(const SeparableKernel& kernel, std::span<const double> code, std::span<double> out) {
  apply_sequence(kernel, code, out, kDefaultOrder, false);
}

Tensor apply(const SeparableKernel& kernel, const Tensor& code) {
  require(code.size() == kernel.grid().size(),
          "kron_conv::apply: code length " + std::to_string(code.size()) +
              " does not match grid size " + std::to_string(kernel.grid().size()));
  Tensor out(code.shape());
  apply(kernel, code.values(), out.values());
  return out;
}

Tensor apply_in_order(const SeparableKernel& kernel, const Tensor& code,
                      std::array<Axis, 3> order) {
  require(code.size() == kernel.grid().size(), "kron_conv::apply_in_order: length mismatch");
  Tensor out(code.shape());
  apply_sequence(kernel, code.values(), out.values(), order, false);
  return out;
}

void apply_adjoint(const SeparableKernel& kernel, std::span<const double> vec,
                   std::span<double> out) {
  apply_sequence(kernel, vec, out, {Axis::kZ, Axis::kY, Axis::kX}, true);
}

Tensor apply_adjoint(const SeparableKernel& kernel, const Tensor& vec) {
  require(vec.size() == kernel.grid().size(),
          "kron_conv::apply_adjoint: vector length does not match grid size");
  Tensor out(vec.shape());
  apply_adjoint(kernel, vec.values(), out.values());
  return out;
}

}  // namespace mgpa
