#include "mgpa/init.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>

#include "mgpa/optimizer.hpp"
#include "mgpa/pca.hpp"

namespace mgpa {

namespace {

constexpr std::array<Axis, 3> kAxes = {Axis::kZ, Axis::kY, Axis::kX};

double soft_threshold(double v, double t) {
  if (v > t) return v - t;
  if (v < -t) return v + t;
  return 0.0;
}

// Ridge fit of the weights of source n (frequencies held at their means) so
// that S_n(t) ≈ target at the given times.
void fit_weights(TemporalSourceSet& ts, std::size_t n, std::span<const double> times,
                 std::span<const double> target, double ridge) {
  const std::size_t nrf = ts.n_rf;
  Eigen::MatrixXd phi(static_cast<Eigen::Index>(times.size()), static_cast<Eigen::Index>(2 * nrf));
  Eigen::VectorXd y(static_cast<Eigen::Index>(times.size()));
  for (std::size_t p = 0; p < times.size(); ++p) {
    const auto row = static_cast<Eigen::Index>(p);
    for (std::size_t j = 0; j < nrf; ++j) {
      const double a = ts.freq_mean(n, j) * times[p];
      phi(row, static_cast<Eigen::Index>(j)) = std::cos(a);
      phi(row, static_cast<Eigen::Index>(nrf + j)) = std::sin(a);
    }
    y(row) = target[p];
  }
  Eigen::MatrixXd gram = phi.transpose() * phi;
  gram.diagonal().array() += ridge;
  const Eigen::VectorXd w = gram.ldlt().solve(phi.transpose() * y);
  for (std::size_t j = 0; j < 2 * nrf; ++j) ts.weight_mean(n, j) = w(static_cast<Eigen::Index>(j));
}

}  // namespace

double kernel_mass(const SeparableKernel& kernel) {
  double mass = 1.0;
  for (Axis a : kAxes) {
    const Tensor& f = kernel.factor(a);
    double best = 0.0;
    for (std::size_t i = 0; i < f.rows(); ++i) {
      double s = 0.0;
      for (double v : f.row(i)) s += v;
      best = std::max(best, s);
    }
    mass *= best;
  }
  return mass;
}

double kernel_atom_norm(const SeparableKernel& kernel) {
  double sq = 1.0;
  for (Axis a : kAxes) {
    const Tensor& f = kernel.factor(a);
    const std::size_t c = f.rows() / 2;
    double s = 0.0;
    for (double v : f.row(c)) s += v * v;
    sq *= s;
  }
  return std::sqrt(sq);
}

std::vector<std::vector<double>> multiscale_lasso(std::span<const double> target,
                                                  std::span<const SeparableKernel> kernels,
                                                  std::span<const double> kappa,
                                                  std::size_t iterations) {
  const std::size_t nk = kernels.size();
  const std::size_t nf = target.size();
  require(nk >= 1, "multiscale_lasso: at least one kernel is required");
  require(kappa.size() == nk, "multiscale_lasso: one threshold per kernel is required");
  for (const SeparableKernel& k : kernels) {
    require(k.grid().size() == nf, "multiscale_lasso: kernel grid does not match the target");
  }
  for (double v : kappa) require(v >= 0.0, "multiscale_lasso: thresholds must be >= 0");

  // Work in c_k = mass_k · b_k so every block operator K_k / mass_k has norm
  // at most 1; the stacked operator then has Lipschitz constant nk.
  std::vector<double> mass(nk);
  for (std::size_t k = 0; k < nk; ++k) mass[k] = kernel_mass(kernels[k]);
  const double step = 1.0 / static_cast<double>(nk);

  std::vector<std::vector<double>> c(nk, std::vector<double>(nf, 0.0));
  std::vector<std::vector<double>> z = c;
  std::vector<std::vector<double>> prev = c;
  std::vector<double> resid(nf);
  std::vector<double> tmp(nf);
  double t = 1.0;
  for (std::size_t it = 0; it < iterations; ++it) {
    for (std::size_t f = 0; f < nf; ++f) resid[f] = -target[f];
    for (std::size_t k = 0; k < nk; ++k) {
      apply(kernels[k], z[k], tmp);
      const double inv = 1.0 / mass[k];
      for (std::size_t f = 0; f < nf; ++f) resid[f] += inv * tmp[f];
    }
    prev.swap(c);
    for (std::size_t k = 0; k < nk; ++k) {
      apply_adjoint(kernels[k], resid, tmp);
      const double inv = 1.0 / mass[k];
      const double thr = step * kappa[k] * inv;
      for (std::size_t f = 0; f < nf; ++f) {
        c[k][f] = soft_threshold(z[k][f] - step * inv * tmp[f], thr);
      }
    }
    const double t_next = 0.5 * (1.0 + std::sqrt(1.0 + 4.0 * t * t));
    const double momentum = (t - 1.0) / t_next;
    for (std::size_t k = 0; k < nk; ++k) {
      for (std::size_t f = 0; f < nf; ++f) z[k][f] = c[k][f] + momentum * (c[k][f] - prev[k][f]);
    }
    t = t_next;
  }
  for (std::size_t k = 0; k < nk; ++k) {
    for (double& v : c[k]) v /= mass[k];
  }
  return c;
}

void spectral_initialize(FitState& st, const DataMatrix& data, const FitConfig& cfg) {
  const std::size_t np = data.n_samples();
  const std::size_t nf = data.n_features();
  if (np < 2) return;
  Tensor y = data.y;
  y *= 1.0 / st.data_scale;
  const PcaResult pc = pca_baseline(y, 1);
  std::vector<double> s(np);
  double sq = 0.0;
  for (std::size_t p = 0; p < np; ++p) {
    s[p] = pc.scores(p, 0);
    sq += s[p] * s[p];
  }
  const double sd = std::sqrt(sq / static_cast<double>(np));
  if (!(sd > 0.0)) {
    // Nothing varies, so nothing needs a map: start every code pruned, with
    // a spread well below the initial noise floor so sampled maps do not
    // jitter the offset.
    SpatialCodeSet& cs = st.model.codes;
    constexpr double rho = 1e-4;
    for (std::size_t i = 0; i < cs.mean.size(); ++i) {
      cs.mean[i] = std::copysign(1e-3 * rho, cs.mean[i]);
      cs.log_var[i] = 2.0 * std::log(rho);
    }
    return;
  }

  const bool timed = !data.times.empty() && std::any_of(data.times.begin(), data.times.end(),
                                                        [&](double v) { return v != data.times[0]; });
  double orient = 1.0;
  if (timed) {
    double ct = 0.0;
    for (std::size_t p = 0; p < np; ++p) ct += s[p] * data.times[p];
    if (ct > 0.0) orient = -1.0;
  }
  for (double& v : s) v *= orient / sd;

  std::vector<double> map(nf, 0.0);
  for (std::size_t p = 0; p < np; ++p) {
    for (std::size_t f = 0; f < nf; ++f) map[f] += (y(p, f) - pc.mean[f]) * s[p];
  }
  for (double& v : map) v /= static_cast<double>(np);
  double rss = 0.0;
  for (std::size_t p = 0; p < np; ++p) {
    for (std::size_t f = 0; f < nf; ++f) {
      const double r = y(p, f) - pc.mean[f] - s[p] * map[f];
      rss += r * r;
    }
  }
  const double sigma_hat = std::max(std::sqrt(rss / static_cast<double>(np * nf)), 1e-3);

  const std::vector<SeparableKernel> all = st.kernels();
  std::vector<std::size_t> lead;
  std::vector<double> seen;
  for (std::size_t n = 0; n < all.size(); ++n) {
    if (std::find(seen.begin(), seen.end(), st.lambdas[n]) != seen.end()) continue;
    seen.push_back(st.lambdas[n]);
    lead.push_back(n);
  }
  std::vector<SeparableKernel> kernels;
  std::vector<double> kappa;
  const double tau = cfg.init_threshold > 0.0
                         ? cfg.init_threshold
                         : std::sqrt(2.0 * std::log(static_cast<double>(nf * lead.size())));
  for (std::size_t n : lead) {
    kernels.push_back(all[n]);
    kappa.push_back(tau * sigma_hat / std::sqrt(static_cast<double>(np)) *
                    kernel_atom_norm(all[n]));
  }
  const auto codes = multiscale_lasso(map, kernels, kappa, cfg.init_lasso_iterations);

  std::vector<double> active;
  for (const auto& b : codes) {
    for (double v : b) {
      if (v != 0.0) active.push_back(std::abs(v));
    }
  }
  if (active.empty()) return;
  const auto mid = active.begin() + static_cast<std::ptrdiff_t>(active.size() / 2);
  std::nth_element(active.begin(), mid, active.end());
  const double rho0 = cfg.init_inactive_scale * *mid;

  SpatialCodeSet& cs = st.model.codes;
  for (std::size_t n = 0; n < cs.n_sources(); ++n) {
    for (std::size_t f = 0; f < nf; ++f) {
      cs.mean(n, f) = std::copysign(1e-3 * rho0, cs.mean(n, f));
      cs.log_var(n, f) = 2.0 * std::log(rho0);
    }
  }
  for (std::size_t k = 0; k < lead.size(); ++k) {
    for (std::size_t f = 0; f < nf; ++f) {
      const double v = codes[k][f];
      if (v == 0.0) continue;
      cs.mean(lead[k], f) = v;
      cs.log_var(lead[k], f) = std::log(cfg.init_active_alpha * v * v);
    }
  }

  TemporalSourceSet& ts = st.model.temporal;
  std::vector<double> times;
  std::vector<double> target;
  if (timed) {
    times = st.model.warp.tau;
    target = s;
  } else {
    // Unit-slope decreasing line; the time-shifts then move each sample to
    // roughly minus its standardized score.
    constexpr std::size_t kLinePoints = 64;
    for (std::size_t i = 0; i < kLinePoints; ++i) {
      const double t = -2.0 + 4.0 * static_cast<double>(i) / static_cast<double>(kLinePoints - 1);
      times.push_back(t);
      target.push_back(-t);
    }
  }
  constexpr double kRidge = 1e-2;
  const double log_var = std::log(cfg.init_temporal_var);
  for (std::size_t n : lead) {
    fit_weights(ts, n, times, target, kRidge);
    for (std::size_t j = 0; j < ts.n_rf; ++j) ts.freq_log_var(n, j) = log_var;
    for (std::size_t j = 0; j < 2 * ts.n_rf; ++j) ts.weight_log_var(n, j) = log_var;
  }
  st.model.log_sigma = std::log(sigma_hat);
}

}  // namespace mgpa
