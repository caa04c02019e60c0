#include "mgpa/elbo.hpp"

#include <Eigen/Core>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <string>

#include "mgpa/parallel.hpp"

namespace mgpa {

void DataMatrix::validate() const {
  require(y.ndim() == 2, "DataMatrix: y must be P × F");
  require(y.cols() == grid.size(), "DataMatrix: F does not match the voxel grid");
  require(times.empty() || times.size() == y.rows(), "DataMatrix: one time per sample");
  require(y.all_finite(), "DataMatrix: non-finite observation");
}

ModelState zeros_like(const ModelState& s) {
  ModelState g;
  g.temporal = TemporalSourceSet::zeros(s.temporal.n_sources, s.temporal.n_rf);
  g.codes = SpatialCodeSet::zeros(s.codes.n_sources(), s.codes.n_features());
  g.warp.delta.assign(s.warp.delta.size(), 0.0);
  g.warp.tau.assign(s.warp.tau.size(), 0.0);
  g.offset.z.assign(s.offset.z.size(), 0.0);
  g.log_sigma = 0.0;
  return g;
}

std::string_view block_name(ParamBlock b) {
  switch (b) {
    case ParamBlock::kFreqMean: return "freq_mean";
    case ParamBlock::kFreqLogVar: return "freq_log_var";
    case ParamBlock::kWeightMean: return "weight_mean";
    case ParamBlock::kWeightLogVar: return "weight_log_var";
    case ParamBlock::kLogLengthscale: return "log_lengthscale";
    case ParamBlock::kCodeMean: return "code_mean";
    case ParamBlock::kCodeLogVar: return "code_log_var";
    case ParamBlock::kOffset: return "offset";
    case ParamBlock::kLogSigma: return "log_sigma";
    case ParamBlock::kTimeShift: return "time_shift";
  }
  return "unknown";
}

std::span<double> block_values(ModelState& s, ParamBlock b) {
  switch (b) {
    case ParamBlock::kFreqMean: return s.temporal.freq_mean.values();
    case ParamBlock::kFreqLogVar: return s.temporal.freq_log_var.values();
    case ParamBlock::kWeightMean: return s.temporal.weight_mean.values();
    case ParamBlock::kWeightLogVar: return s.temporal.weight_log_var.values();
    case ParamBlock::kLogLengthscale: return s.temporal.log_lengthscale.values();
    case ParamBlock::kCodeMean: return s.codes.mean.values();
    case ParamBlock::kCodeLogVar: return s.codes.log_var.values();
    case ParamBlock::kOffset: return s.offset.z;
    case ParamBlock::kLogSigma: return std::span<double>(&s.log_sigma, 1);
    case ParamBlock::kTimeShift: return s.warp.delta;
  }
  return {};
}

std::span<const double> block_values(const ModelState& s, ParamBlock b) {
  return block_values(const_cast<ModelState&>(s), b);
}

void validate_model(const ModelState& s, const ModelSpec& spec, const Tensor& y) {
  s.temporal.validate();
  s.codes.validate();
  const std::size_t ns = s.temporal.n_sources;
  require(s.codes.n_sources() == ns, "model: temporal and spatial source counts differ");
  require(spec.kernels.size() == ns, "model: one kernel per source required");
  require(y.ndim() == 2, "model: data must be P × F");
  require(y.rows() == s.warp.delta.size() && s.warp.tau.size() == s.warp.delta.size(),
          "model: time warp length does not match the number of samples");
  require(y.cols() == s.codes.n_features() && s.offset.z.size() == y.cols(),
          "model: feature count mismatch between data, codes and offset");
  for (const auto& k : spec.kernels) {
    require(k.grid().size() == y.cols(), "model: kernel grid does not match F");
  }
  require(spec.gamma > 0.0, "model: gamma must be > 0");
  require(spec.data_scale > 0.0, "model: data_scale must be > 0");
  require(std::isfinite(s.log_sigma), "model: non-finite log sigma");
}

NoiseDraw draw_noise(const ModelState& s, SeededRng& rng) {
  NoiseDraw d;
  d.eps_omega = standard_normal(s.temporal.freq_mean.shape(), rng);
  d.eps_weights = standard_normal(s.temporal.weight_mean.shape(), rng);
  d.eps_codes = standard_normal(s.codes.mean.shape(), rng);
  return d;
}

Tensor codes_from_noise(const SpatialCodeSet& sc, const Tensor& eps_codes) {
  require(eps_codes.shape() == sc.mean.shape(), "codes_from_noise: ε_B shape mismatch");
  Tensor b = sc.mean;
  for (std::size_t i = 0; i < b.size(); ++i) b[i] += std::exp(0.5 * sc.log_var[i]) * eps_codes[i];
  return b;
}

double data_log_likelihood(const Tensor& y, const Tensor& s, const Tensor& a,
                           std::span<const double> z, double sigma) {
  require(sigma > 0.0, "data_log_likelihood: sigma must be > 0");
  require(y.ndim() == 2 && s.ndim() == 2 && a.ndim() == 2,
          "data_log_likelihood: expected 2D tensors");
  require(s.rows() == y.rows() && s.cols() == a.rows() && a.cols() == y.cols() &&
              z.size() == y.cols(),
          "data_log_likelihood: inconsistent shapes");
  const Tensor sa = matmul(s, a);
  double sq = 0.0;
  for (std::size_t p = 0; p < y.rows(); ++p) {
    for (std::size_t f = 0; f < y.cols(); ++f) {
      const double r = y(p, f) - sa(p, f) - z[f];
      sq += r * r;
    }
  }
  const double pf = static_cast<double>(y.rows() * y.cols());
  return -0.5 * pf * std::log(2.0 * std::numbers::pi * sigma * sigma) - sq / (2.0 * sigma * sigma);
}

double kl_codes_entry(double log_alpha) {
  if (log_alpha == std::numeric_limits<double>::infinity()) return 0.0;
  // log(1 + α⁻¹) = softplus(−log α).
  const double softplus_neg = -log_sigmoid(log_alpha);
  return -(kKlK1 * sigmoid(kKlK2 + kKlK3 * log_alpha) - 0.5 * softplus_neg - kKlK1);
}


double kl_omega(const TemporalSourceSet& ts, OmegaKlForm form) {
  ts.validate();
  double total = 0.0;
  for (std::size_t n = 0; n < ts.n_sources; ++n) {
    const double log_l = ts.log_lengthscale[n];
    const double l = std::exp(log_l);
    for (std::size_t j = 0; j < ts.n_rf; ++j) {
      const double p2 = std::exp(ts.freq_log_var(n, j));
      const double r = ts.freq_mean(n, j);
      if (form == OmegaKlForm::kPrinted) {
        total += p2 * l + r * r * l - 1.0 - (ts.freq_log_var(n, j) + log_l);
      } else {
        total += p2 / l + r * r / l - 1.0 - (ts.freq_log_var(n, j) - log_l);
      }
    }
  }
  return 0.5 * total;
}

double kl_w(const TemporalSourceSet& ts) {
  ts.validate();
  double total = 0.0;
  for (std::size_t i = 0; i < ts.weight_mean.size(); ++i) {
    const double m = ts.weight_mean[i];
    total += std::exp(ts.weight_log_var[i]) + m * m - 1.0 - ts.weight_log_var[i];
  }
  return 0.5 * total;
}

namespace {

struct StochasticTerms {
  double data = 0.0;
  double constraint = 0.0;
};

// Data and constraint terms for one noise draw; adds weight · ∇ into grad.
StochasticTerms stochastic_terms(const ModelState& s, const ModelSpec& spec, const Tensor& y,
                                 const NoiseDraw& noise, double weight, ModelState* grad) {
  const std::size_t ns = s.temporal.n_sources;
  const std::size_t nrf = s.temporal.n_rf;
  const std::size_t np = y.rows();
  const std::size_t nf = y.cols();
  const double sigma = std::exp(s.log_sigma);
  const double inv_var = 1.0 / (sigma * sigma);

  const TemporalDraw draw = temporal_draw_from_noise(s.temporal, noise.eps_omega, noise.eps_weights);
  const Tensor codes = codes_from_noise(s.codes, noise.eps_codes);
  const Tensor maps = assemble_maps(codes, spec.kernels);

  const std::vector<double> t = s.warp.warped_times();
  const std::vector<double> ct = constraint_times(t, spec.n_grid);
  const Tensor src = source_values(draw, t);
  const Tensor deriv = source_derivatives(draw, ct);

  // Residual R = Y − S A − 1 zᵀ, overwritten by G = R / σ² once the squared
  // norm is known.
  Tensor resid = matmul(src, maps);
  double sq = 0.0;
  for (std::size_t p = 0; p < np; ++p) {
    const double* yr = y.row(p).data();
    double* rr = resid.row(p).data();
    const double* z = s.offset.z.data();
    double acc = 0.0;
    for (std::size_t f = 0; f < nf; ++f) {
      const double r = yr[f] - rr[f] - z[f];
      rr[f] = r;
      acc += r * r;
    }
    sq += acc;
  }
  const double pf = static_cast<double>(np * nf);
  StochasticTerms out;
  out.data = spec.data_scale *
             (-0.5 * pf * std::log(2.0 * std::numbers::pi) - pf * s.log_sigma - 0.5 * sq * inv_var);
  out.constraint = constraint_log_likelihood(deriv, spec.gamma);
  if (grad == nullptr) return out;

  grad->log_sigma += weight * spec.data_scale * (-pf + sq * inv_var);
  resid *= inv_var * spec.data_scale;
  const Tensor& g_fit = resid;
  for (std::size_t p = 0; p < np; ++p) {
    const double* gr = g_fit.row(p).data();
    double* gz = grad->offset.z.data();
    for (std::size_t f = 0; f < nf; ++f) gz[f] += weight * gr[f];
  }

  // Spatial chain: ∂/∂A = Sᵀ G, ∂/∂B_n = Σ_nᵀ ∂/∂A_n.
  const Tensor g_maps = matmul_tn(src, g_fit);
  Tensor g_codes(codes.shape());
  parallel_for(ns, [&](std::size_t n) {
    apply_adjoint(spec.kernels[n], g_maps.row(n), g_codes.row(n));
  });
  for (std::size_t i = 0; i < g_codes.size(); ++i) {
    const double gb = weight * g_codes[i];
    grad->codes.mean[i] += gb;
    grad->codes.log_var[i] += gb * noise.eps_codes[i] * 0.5 * std::exp(0.5 * s.codes.log_var[i]);
  }

  // Temporal chain.
  const Tensor g_src = matmul_nt(g_fit, maps);
  Tensor g_deriv(deriv.shape());
  for (std::size_t i = 0; i < deriv.size(); ++i) {
    g_deriv[i] = -spec.gamma * sigmoid(spec.gamma * deriv[i]);
  }

  Tensor g_omega = Tensor::matrix(ns, nrf);
  Tensor g_weights = Tensor::matrix(ns, 2 * nrf);
  std::vector<double> g_t(np, 0.0);
  std::vector<double> g_ct(ct.size(), 0.0);
  for (std::size_t n = 0; n < ns; ++n) {
    for (std::size_t j = 0; j < nrf; ++j) {
      const double om = draw.omega(n, j);
      const double wc = draw.weights(n, j);
      const double ws = draw.weights(n, nrf + j);
      double gw_c = 0.0;
      double gw_s = 0.0;
      double g_om = 0.0;
      for (std::size_t p = 0; p < np; ++p) {
        const double gs = g_src(p, n);
        const double a = om * t[p];
        const double c = std::cos(a);
        const double sn = std::sin(a);
        const double u = -sn * wc + c * ws;
        gw_c += gs * c;
        gw_s += gs * sn;
        g_om += gs * t[p] * u;
        g_t[p] += gs * om * u;
      }
      for (std::size_t k = 0; k < ct.size(); ++k) {
        const double gd = g_deriv(k, n);
        const double a = om * ct[k];
        const double c = std::cos(a);
        const double sn = std::sin(a);
        const double u = -sn * wc + c * ws;
        const double v = -c * wc - sn * ws;
        gw_c -= gd * om * sn;
        gw_s += gd * om * c;
        g_om += gd * (u + om * ct[k] * v);
        g_ct[k] += gd * om * om * v;
      }
      g_omega(n, j) = g_om;
      g_weights(n, j) = gw_c;
      g_weights(n, nrf + j) = gw_s;
    }
  }

  // Constraint points: the first np are the observation times themselves, the
  // rest are the uniform grid a + (b − a) u_k spanning [min t, max t].
  for (std::size_t p = 0; p < np; ++p) g_t[p] += g_ct[p];
  if (np > 0 && ct.size() > np) {
    const std::size_t lo = static_cast<std::size_t>(std::min_element(t.begin(), t.end()) - t.begin());
    const std::size_t hi = static_cast<std::size_t>(std::max_element(t.begin(), t.end()) - t.begin());
    const std::size_t n_grid = ct.size() - np;
    for (std::size_t k = 0; k < n_grid; ++k) {
      const double u = n_grid == 1 ? 0.0 : static_cast<double>(k) / static_cast<double>(n_grid - 1);
      g_t[lo] += g_ct[np + k] * (1.0 - u);
      g_t[hi] += g_ct[np + k] * u;
    }
  }
  for (std::size_t p = 0; p < np; ++p) grad->warp.delta[p] += weight * g_t[p];

  for (std::size_t i = 0; i < g_omega.size(); ++i) {
    const double g = weight * g_omega[i];
    grad->temporal.freq_mean[i] += g;
    grad->temporal.freq_log_var[i] +=
        g * noise.eps_omega[i] * 0.5 * std::exp(0.5 * s.temporal.freq_log_var[i]);
  }
  for (std::size_t i = 0; i < g_weights.size(); ++i) {
    const double g = weight * g_weights[i];
    grad->temporal.weight_mean[i] += g;
    grad->temporal.weight_log_var[i] +=
        g * noise.eps_weights[i] * 0.5 * std::exp(0.5 * s.temporal.weight_log_var[i]);
  }
  return out;
}

// KL_codes and, when grad is non-null, its gradient subtracted from grad in
// the same pass. Entries with μ = 0 have α = ∞ and contribute nothing.
double kl_codes_pass(const SpatialCodeSet& sc, SpatialCodeSet* grad) {
  using Array = Eigen::ArrayXd;
  const auto n = static_cast<Eigen::Index>(sc.mean.size());
  const Eigen::Map<const Array> mu(sc.mean.values().data(), n);
  const Eigen::Map<const Array> log_var(sc.log_var.values().data(), n);
  const auto nonzero = (mu != 0.0);
  const Array log_alpha = nonzero.select(log_var - 2.0 * mu.abs().log(), 0.0);
  // σ(−log α) and log(1 + α⁻¹) = softplus(−log α) from one exponential.
  const Array e = (-log_alpha.abs()).exp();
  const Array sig_neg = (log_alpha >= 0.0).select(e / (1.0 + e), 1.0 / (1.0 + e));
  const Array softplus_neg = (-log_alpha).max(0.0) + e.log1p();
  const Array sx = 1.0 / (1.0 + (-(kKlK2 + kKlK3 * log_alpha)).exp());
  const Array kl = nonzero.select(-(kKlK1 * sx - 0.5 * softplus_neg - kKlK1), 0.0);
  if (grad != nullptr) {
    // d KL / d log α = −[k1 k3 σ(x) σ(−x) + ½ σ(−log α)], d log α / d μ = −2 / μ.
    const Array dkl = nonzero.select(-(kKlK1 * kKlK3 * sx * (1.0 - sx) + 0.5 * sig_neg), 0.0);
    Eigen::Map<Array> g_mean(grad->mean.values().data(), n);
    Eigen::Map<Array> g_log_var(grad->log_var.values().data(), n);
    g_log_var -= dkl;
    g_mean -= nonzero.select(dkl * (-2.0 / mu), 0.0);
  }
  return kl.sum();
}

// Subtracts ∇(KL_Ω + KL_W) from grad.
void kl_temporal_gradients(const ModelState& s, OmegaKlForm form, ModelState& grad) {
  const TemporalSourceSet& ts = s.temporal;
  for (std::size_t n = 0; n < ts.n_sources; ++n) {
    const double l = std::exp(ts.log_lengthscale[n]);
    double g_log_l = 0.0;
    for (std::size_t j = 0; j < ts.n_rf; ++j) {
      const double p2 = std::exp(ts.freq_log_var(n, j));
      const double r = ts.freq_mean(n, j);
      if (form == OmegaKlForm::kPrinted) {
        grad.temporal.freq_mean(n, j) -= r * l;
        grad.temporal.freq_log_var(n, j) -= 0.5 * (p2 * l - 1.0);
        g_log_l += 0.5 * ((p2 + r * r) * l - 1.0);
      } else {
        grad.temporal.freq_mean(n, j) -= r / l;
        grad.temporal.freq_log_var(n, j) -= 0.5 * (p2 / l - 1.0);
        g_log_l += 0.5 * (1.0 - (p2 + r * r) / l);
      }
    }
    grad.temporal.log_lengthscale[n] -= g_log_l;
  }

  for (std::size_t i = 0; i < ts.weight_mean.size(); ++i) {
    grad.temporal.weight_mean[i] -= ts.weight_mean[i];
    grad.temporal.weight_log_var[i] -= 0.5 * (std::exp(ts.weight_log_var[i]) - 1.0);
  }
}

}  // namespace

double kl_codes(const SpatialCodeSet& sc) {
  sc.validate();
  return kl_codes_pass(sc, nullptr);
}

ElboBreakdown elbo_at(const ModelState& s, const ModelSpec& spec, const Tensor& y,
                      std::span<const NoiseDraw> draws, ModelState* grad) {
  validate_model(s, spec, y);
  require(!draws.empty(), "elbo_at: at least one noise draw is required");
  const double weight = 1.0 / static_cast<double>(draws.size());
  double data = 0.0;
  double constraint = 0.0;
  for (const NoiseDraw& d : draws) {
    const StochasticTerms st = stochastic_terms(s, spec, y, d, weight, grad);
    data += weight * st.data;
    constraint += weight * st.constraint;
  }
  if (grad != nullptr) kl_temporal_gradients(s, spec.omega_kl, *grad);
  const double klc = kl_codes_pass(s.codes, grad != nullptr ? &grad->codes : nullptr);
  return ElboBreakdown::from_terms(data, constraint, klc,
                                   kl_omega(s.temporal, spec.omega_kl), kl_w(s.temporal));
}

ElboBreakdown elbo_estimate(const ModelState& s, const ModelSpec& spec, const DataMatrix& data,
                            SeededRng& rng, int n_mc) {
  require(n_mc >= 1, "elbo_estimate: n_mc must be >= 1");
  validate_model(s, spec, data.y);
  const double weight = 1.0 / static_cast<double>(n_mc);
  double data_term = 0.0;
  double constraint = 0.0;
  for (int i = 0; i < n_mc; ++i) {
    const NoiseDraw d = draw_noise(s, rng);
    const StochasticTerms st = stochastic_terms(s, spec, data.y, d, weight, nullptr);
    data_term += weight * st.data;
    constraint += weight * st.constraint;
  }
  return ElboBreakdown::from_terms(data_term, constraint, kl_codes(s.codes),
                                   kl_omega(s.temporal, spec.omega_kl), kl_w(s.temporal));
}

}  // namespace mgpa
