#include "mgpa/metrics.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <vector>

namespace mgpa {

namespace {

struct Range {
  double lo;
  double hi;
};

Range range_of(std::span<const double> v) {
  const auto [lo, hi] = std::minmax_element(v.begin(), v.end());
  return {*lo, *hi};
}

std::vector<double> normalized(std::span<const double> v, Range r, bool rescale) {
  std::vector<double> out(v.begin(), v.end());
  const double width = r.hi - r.lo;
  for (double& x : out) x = rescale && width > 0.0 ? (x - r.lo) / width : x - r.lo;
  return out;
}

std::vector<double> window_weights(int radius) {
  std::vector<double> w(static_cast<std::size_t>(2 * radius + 1));
  for (int i = -radius; i <= radius; ++i) {
    w[static_cast<std::size_t>(i + radius)] = std::exp(-0.5 * i * i / (kSsimSigma * kSsimSigma));
  }
  return w;
}

// Valid-mode 1D filter along one axis of a (n0, n1, n2) volume.
std::vector<double> filter_axis(const std::vector<double>& in, std::array<std::size_t, 3> dims,
                                int axis, const std::vector<double>& w) {
  const std::size_t len = w.size();
  std::array<std::size_t, 3> od = dims;
  od[static_cast<std::size_t>(axis)] = dims[static_cast<std::size_t>(axis)] - len + 1;
  std::vector<double> out(od[0] * od[1] * od[2], 0.0);
  const std::size_t stride = axis == 0 ? dims[1] * dims[2] : (axis == 1 ? dims[2] : 1);
  for (std::size_t a = 0; a < od[0]; ++a) {
    for (std::size_t b = 0; b < od[1]; ++b) {
      for (std::size_t c = 0; c < od[2]; ++c) {
        const std::size_t base = (a * dims[1] + b) * dims[2] + c;
        double acc = 0.0;
        for (std::size_t k = 0; k < len; ++k) acc += w[k] * in[base + k * stride];
        out[(a * od[1] + b) * od[2] + c] = acc;
      }
    }
  }
  return out;
}

std::vector<double> local_mean(const std::vector<double>& v, Grid3 grid,
                               const std::array<std::vector<double>, 3>& w) {
  std::array<std::size_t, 3> dims = {grid.dz, grid.dy, grid.dx};
  std::vector<double> cur = v;
  for (int axis = 0; axis < 3; ++axis) {
    cur = filter_axis(cur, dims, axis, w[static_cast<std::size_t>(axis)]);
    dims[static_cast<std::size_t>(axis)] -= w[static_cast<std::size_t>(axis)].size() - 1;
  }
  return cur;
}

}  // namespace

double spatial_ssim(std::span<const double> est, std::span<const double> truth, Grid3 grid) {
  require(est.size() == truth.size(), "spatial_ssim: shape mismatch");
  require(est.size() == grid.size() && !est.empty(), "spatial_ssim: volume does not match grid");

  const Range rt = range_of(truth);
  bool rescale = true;
  if (rt.hi == rt.lo) {
    if (std::equal(est.begin(), est.end(), truth.begin())) return 1.0;
    rescale = false;
  }
  const std::vector<double> x = normalized(est, range_of(est), rescale);
  const std::vector<double> y = normalized(truth, rt, rescale);

  std::array<std::vector<double>, 3> w;
  const std::array<std::size_t, 3> dims = {grid.dz, grid.dy, grid.dx};
  for (std::size_t a = 0; a < 3; ++a) {
    const int radius = std::min<int>(kSsimRadius, static_cast<int>((dims[a] - 1) / 2));
    w[a] = window_weights(radius);
  }
  double total_w = 1.0;
  for (auto& wa : w) {
    double s = 0.0;
    for (double v : wa) s += v;
    total_w *= s;
  }
  const double inv_w = 1.0 / total_w;

  std::vector<double> xx(x.size()), yy(x.size()), xy(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    xx[i] = x[i] * x[i];
    yy[i] = y[i] * y[i];
    xy[i] = x[i] * y[i];
  }
  const auto mx = local_mean(x, grid, w);
  const auto my = local_mean(y, grid, w);
  const auto mxx = local_mean(xx, grid, w);
  const auto myy = local_mean(yy, grid, w);
  const auto mxy = local_mean(xy, grid, w);

  constexpr double kC1 = 0.01 * 0.01;
  constexpr double kC2 = 0.03 * 0.03;
  double sum = 0.0;
  for (std::size_t i = 0; i < mx.size(); ++i) {
    const double ux = mx[i] * inv_w;
    const double uy = my[i] * inv_w;
    const double vx = mxx[i] * inv_w - ux * ux;
    const double vy = myy[i] * inv_w - uy * uy;
    const double cxy = mxy[i] * inv_w - ux * uy;
    sum += (2.0 * ux * uy + kC1) * (2.0 * cxy + kC2) /
           ((ux * ux + uy * uy + kC1) * (vx + vy + kC2));
  }
  // Rounding can push the mean a hair past the mathematical bounds.
  return std::clamp(sum / static_cast<double>(mx.size()), -1.0, 1.0);
}

double timeshift_r2(std::span<const double> delta, std::span<const double> t_true) {
  require(delta.size() == t_true.size(), "timeshift_r2: length mismatch");
  require(delta.size() >= 3, "timeshift_r2: need at least three samples");
  const double n = static_cast<double>(delta.size());
  double md = 0.0, mt = 0.0;
  for (std::size_t i = 0; i < delta.size(); ++i) {
    md += delta[i];
    mt += t_true[i];
  }
  md /= n;
  mt /= n;
  double sdd = 0.0, stt = 0.0, sdt = 0.0;
  for (std::size_t i = 0; i < delta.size(); ++i) {
    sdd += (delta[i] - md) * (delta[i] - md);
    stt += (t_true[i] - mt) * (t_true[i] - mt);
    sdt += (delta[i] - md) * (t_true[i] - mt);
  }
  if (sdd <= 0.0 || stt <= 0.0) return 0.0;
  return std::min(1.0, sdt * sdt / (sdd * stt));
}

}  // namespace mgpa
