#include "mgpa/temporal_gp.hpp"

#include <algorithm>
#include <cmath>

namespace mgpa {

namespace {

void require_draw_shapes(const TemporalDraw& d) {
  require(d.omega.ndim() == 2 && d.weights.ndim() == 2, "TemporalDraw: expected 2D tensors");
  require(d.weights.rows() == d.omega.rows() && d.weights.cols() == 2 * d.omega.cols(),
          "TemporalDraw: weights must be n_sources × 2·n_rf");
}

Tensor exp_half(const Tensor& log_var) {
  Tensor out(log_var.shape());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = std::exp(0.5 * log_var[i]);
  return out;
}

}  // namespace

TemporalSourceSet TemporalSourceSet::zeros(std::size_t n_sources, std::size_t n_rf) {
  TemporalSourceSet ts;
  ts.n_sources = n_sources;
  ts.n_rf = n_rf;
  ts.freq_mean = Tensor::matrix(n_sources, n_rf);
  ts.freq_log_var = Tensor::matrix(n_sources, n_rf);
  ts.weight_mean = Tensor::matrix(n_sources, 2 * n_rf);
  ts.weight_log_var = Tensor::matrix(n_sources, 2 * n_rf);
  ts.log_lengthscale = Tensor({n_sources});
  return ts;
}

TemporalSourceSet TemporalSourceSet::initialize(std::size_t n_sources, std::size_t n_rf,
                                                SeededRng& rng, const Init& init) {
  require(n_sources >= 1 && n_rf >= 1, "TemporalSourceSet: need at least one source and feature");
  require(init.lengthscale > 0 && init.freq_var > 0 && init.weight_var > 0 &&
              init.weight_mean_var >= 0,
          "TemporalSourceSet::initialize: variances must be positive");
  TemporalSourceSet ts = zeros(n_sources, n_rf);
  const double freq_sd = std::sqrt(init.lengthscale);
  for (double& v : ts.freq_mean.values()) v = freq_sd * rng.normal();
  ts.freq_log_var.fill(std::log(init.freq_var));
  const double w_sd = std::sqrt(init.weight_mean_var);
  for (double& v : ts.weight_mean.values()) v = w_sd * rng.normal();
  ts.weight_log_var.fill(std::log(init.weight_var));
  ts.log_lengthscale.fill(std::log(init.lengthscale));
  return ts;
}

void TemporalSourceSet::validate() const {
  require(freq_mean.shape() == std::vector<std::size_t>{n_sources, n_rf} &&
              freq_log_var.shape() == freq_mean.shape(),
          "TemporalSourceSet: frequency parameters must be n_sources × n_rf");
  require(weight_mean.shape() == std::vector<std::size_t>{n_sources, 2 * n_rf} &&
              weight_log_var.shape() == weight_mean.shape(),
          "TemporalSourceSet: weight parameters must be n_sources × 2·n_rf");
  require(log_lengthscale.size() == n_sources, "TemporalSourceSet: one length-scale per source");
  // Variances are exp(log-variance); they are strictly positive iff finite.
  require(freq_mean.all_finite() && freq_log_var.all_finite() && weight_mean.all_finite() &&
              weight_log_var.all_finite() && log_lengthscale.all_finite(),
          "TemporalSourceSet: non-finite parameter");
}

std::vector<double> TimeWarp::warped_times() const {
  require(delta.size() == tau.size(), "TimeWarp: delta and tau lengths differ");
  std::vector<double> t(delta.size());
  for (std::size_t i = 0; i < t.size(); ++i) t[i] = tau[i] + delta[i];
  return t;
}

TemporalDraw temporal_draw_from_noise(const TemporalSourceSet& ts, const Tensor& eps_omega,
                                      const Tensor& eps_weights) {
  require(eps_omega.shape() == ts.freq_mean.shape(), "temporal draw: ε_Ω shape mismatch");
  require(eps_weights.shape() == ts.weight_mean.shape(), "temporal draw: ε_W shape mismatch");
  TemporalDraw d{ts.freq_mean, ts.weight_mean};
  for (std::size_t i = 0; i < d.omega.size(); ++i) {
    d.omega[i] += std::exp(0.5 * ts.freq_log_var[i]) * eps_omega[i];
  }
  for (std::size_t i = 0; i < d.weights.size(); ++i) {
    d.weights[i] += std::exp(0.5 * ts.weight_log_var[i]) * eps_weights[i];
  }
  return d;
}

TemporalDraw sample_temporal_draw(const TemporalSourceSet& ts, SeededRng& rng) {
  ts.validate();
  TemporalDraw d;
  d.omega = gaussian_reparam_sample(ts.freq_mean, exp_half(ts.freq_log_var), rng);
  d.weights = gaussian_reparam_sample(ts.weight_mean, exp_half(ts.weight_log_var), rng);
  return d;
}

TemporalDraw posterior_mean_draw(const TemporalSourceSet& ts) {
  return TemporalDraw{ts.freq_mean, ts.weight_mean};
}

Tensor source_values(const TemporalDraw& draw, std::span<const double> times) {
  require_draw_shapes(draw);
  const std::size_t ns = draw.omega.rows();
  const std::size_t nrf = draw.omega.cols();
  Tensor s = Tensor::matrix(times.size(), ns);
  for (std::size_t p = 0; p < times.size(); ++p) {
    for (std::size_t n = 0; n < ns; ++n) {
      double acc = 0.0;
      for (std::size_t j = 0; j < nrf; ++j) {
        const double a = draw.omega(n, j) * times[p];
        acc += draw.weights(n, j) * std::cos(a) + draw.weights(n, nrf + j) * std::sin(a);
      }
      s(p, n) = acc;
    }
  }
  return s;
}

Tensor source_derivatives(const TemporalDraw& draw, std::span<const double> times) {
  require_draw_shapes(draw);
  const std::size_t ns = draw.omega.rows();
  const std::size_t nrf = draw.omega.cols();
  Tensor d = Tensor::matrix(times.size(), ns);
  for (std::size_t p = 0; p < times.size(); ++p) {
    for (std::size_t n = 0; n < ns; ++n) {
      double acc = 0.0;
      for (std::size_t j = 0; j < nrf; ++j) {
        const double w = draw.omega(n, j);
        const double a = w * times[p];
        acc += w * (-draw.weights(n, j) * std::sin(a) + draw.weights(n, nrf + j) * std::cos(a));
      }
      d(p, n) = acc;
    }
  }
  return d;
}

Tensor source_second_derivatives(const TemporalDraw& draw, std::span<const double> times) {
  require_draw_shapes(draw);
  const std::size_t ns = draw.omega.rows();
  const std::size_t nrf = draw.omega.cols();
  Tensor d = Tensor::matrix(times.size(), ns);
  for (std::size_t p = 0; p < times.size(); ++p) {
    for (std::size_t n = 0; n < ns; ++n) {
      double acc = 0.0;
      for (std::size_t j = 0; j < nrf; ++j) {
        const double w = draw.omega(n, j);
        const double a = w * times[p];
        acc -= w * w * (draw.weights(n, j) * std::cos(a) + draw.weights(n, nrf + j) * std::sin(a));
      }
      d(p, n) = acc;
    }
  }
  return d;
}

Tensor sample_sources(const TemporalSourceSet& ts, const TimeWarp& warp, SeededRng& rng) {
  const TemporalDraw draw = sample_temporal_draw(ts, rng);
  const auto t = warp.warped_times();
  return source_values(draw, t);
}

Tensor sample_source_derivatives(const TemporalDraw& draw, const TimeWarp& warp) {
  const auto t = warp.warped_times();
  return source_derivatives(draw, t);
}

double log_sigmoid(double x) {
  return x < 0.0 ? x - std::log1p(std::exp(x)) : -std::log1p(std::exp(-x));
}

double sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

double constraint_log_likelihood(const Tensor& derivs, double gamma) {
  require(gamma > 0.0, "constraint_log_likelihood: gamma must be > 0");
  double total = 0.0;
  for (double d : derivs.values()) total += log_sigmoid(-gamma * d);
  return total;
}

std::vector<double> constraint_times(std::span<const double> warped, std::size_t n_grid) {
  std::vector<double> out(warped.begin(), warped.end());
  if (warped.empty() || n_grid == 0) return out;
  const auto [lo, hi] = std::minmax_element(warped.begin(), warped.end());
  const double a = *lo;
  const double b = *hi;
  out.reserve(warped.size() + n_grid);
  for (std::size_t k = 0; k < n_grid; ++k) {
    const double u = n_grid == 1 ? 0.0 : static_cast<double>(k) / static_cast<double>(n_grid - 1);
    out.push_back(a + (b - a) * u);
  }
  return out;
}

}  // namespace mgpa
