#include "mgpa/optimizer.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <string>

#include "mgpa/init.hpp"

namespace mgpa {

namespace {

constexpr std::uint64_t kInitStream = std::numeric_limits<std::uint64_t>::max();
constexpr std::uint64_t kBatchSalt = 0x5bd1e9955bd1e995ULL;

std::size_t block_index(ParamBlock b) { return static_cast<std::size_t>(b); }

bool all_finite(std::span<const double> v) {
  return std::all_of(v.begin(), v.end(), [](double x) { return std::isfinite(x); });
}

void check_terms(const ElboBreakdown& e, std::uint64_t step) {
  const std::pair<const char*, double> terms[] = {
      {"data", e.data_term},   {"constraint", e.constraint_term}, {"kl_codes", e.kl_codes},
      {"kl_omega", e.kl_omega}, {"kl_w", e.kl_w},
  };
  for (const auto& [name, value] : terms) {
    if (!std::isfinite(value)) {
      throw NumericalError("non-finite ELBO term '" + std::string(name) + "' at step " +
                           std::to_string(step));
    }
  }
}

void check_gradient(const ModelState& grad, std::uint64_t step) {
  for (ParamBlock b : kAllParamBlocks) {
    if (!all_finite(block_values(grad, b))) {
      throw NumericalError("non-finite gradient in parameter block '" +
                           std::string(block_name(b)) + "' at step " + std::to_string(step));
    }
  }
}

std::vector<std::size_t> batch_indices(const FitConfig& cfg, std::size_t n_samples,
                                       std::size_t step) {
  const std::size_t per_epoch = cfg.steps_per_epoch(n_samples);
  const std::size_t epoch = step / per_epoch;
  const std::size_t slot = step % per_epoch;
  std::vector<std::size_t> perm(n_samples);
  std::iota(perm.begin(), perm.end(), std::size_t{0});
  SeededRng rng = SeededRng(cfg.seed ^ kBatchSalt).substream(epoch);
  for (std::size_t i = n_samples; i > 1; --i) {
    const auto j = static_cast<std::size_t>(rng.uniform_int(0, static_cast<std::int64_t>(i - 1)));
    std::swap(perm[i - 1], perm[j]);
  }
  const std::size_t lo = slot * cfg.batch_size;
  const std::size_t hi = std::min(n_samples, lo + cfg.batch_size);
  std::vector<std::size_t> out(perm.begin() + static_cast<std::ptrdiff_t>(lo),
                               perm.begin() + static_cast<std::ptrdiff_t>(hi));
  std::sort(out.begin(), out.end());
  return out;
}

// ELBO and gradient on the mini-batch rows; δ gradients are scattered back to
// the full sample index.
ElboBreakdown batch_gradient(const ModelState& model, const ModelSpec& spec, const Tensor& y,
                             std::span<const std::size_t> rows, std::span<const NoiseDraw> draws,
                             ModelState& grad) {
  const std::size_t nf = y.cols();
  Tensor yb = Tensor::matrix(rows.size(), nf);
  ModelState sub = model;
  sub.warp.delta.resize(rows.size());
  sub.warp.tau.resize(rows.size());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    std::copy_n(y.row(rows[i]).begin(), nf, yb.row(i).begin());
    sub.warp.delta[i] = model.warp.delta[rows[i]];
    sub.warp.tau[i] = model.warp.tau[rows[i]];
  }
  ModelSpec bspec = spec;
  bspec.data_scale = spec.data_scale * static_cast<double>(y.rows()) /
                     static_cast<double>(rows.size());
  ModelState g = zeros_like(sub);
  const ElboBreakdown e = elbo_at(sub, bspec, yb, draws, &g);
  std::vector<double> full_delta(model.warp.delta.size(), 0.0);
  for (std::size_t i = 0; i < rows.size(); ++i) full_delta[rows[i]] = g.warp.delta[i];
  g.warp.delta = std::move(full_delta);
  g.warp.tau.assign(model.warp.tau.size(), 0.0);
  grad = std::move(g);
  return e;
}

}  // namespace

void FitConfig::validate() const {
  require(!lambdas.empty(), "FitConfig: at least one source length-scale is required");
  for (double l : lambdas) require(l > 0.0 && std::isfinite(l), "FitConfig: λ must be > 0");
  require(spacing > 0.0, "FitConfig: spacing must be > 0");
  require(n_rf >= 1, "FitConfig: n_rf must be >= 1");
  require(n_epochs >= 1, "FitConfig: n_epochs must be >= 1");
  require(block_len >= 1, "FitConfig: block_len must be >= 1");
  require(lr_model > 0.0 && lr_timeshift > 0.0, "FitConfig: learning rates must be > 0");
  require(lr_final_ratio > 0.0 && lr_final_ratio <= 1.0, "FitConfig: lr_final_ratio must lie in (0, 1]");
  require(gamma > 0.0, "FitConfig: gamma must be > 0");
  require(n_mc >= 1, "FitConfig: n_mc must be >= 1");
  require(std::isfinite(prune_threshold), "FitConfig: prune_threshold must be finite");
  require(n_grid != 1, "FitConfig: n_grid must be 0 or >= 2");
  require(code_mean_var > 0.0 && alpha_init > 0.0,
          "FitConfig: code_mean_var and alpha_init must be > 0");
  require(adam_beta1 >= 0.0 && adam_beta1 < 1.0 && adam_beta2 >= 0.0 && adam_beta2 < 1.0,
          "FitConfig: Adam betas must lie in [0, 1)");
  require(adam_eps > 0.0, "FitConfig: adam_eps must be > 0");
  require(init_lasso_iterations >= 1, "FitConfig: init_lasso_iterations must be >= 1");
  require(init_threshold >= 0.0, "FitConfig: init_threshold must be >= 0");
  require(init_inactive_scale > 0.0 && init_active_alpha > 0.0 && init_temporal_var > 0.0,
          "FitConfig: init scales must be > 0");
}

std::size_t FitConfig::steps_per_epoch(std::size_t n_samples) const {
  if (batch_size == 0 || batch_size >= n_samples) return 1;
  return (n_samples + batch_size - 1) / batch_size;
}

std::size_t FitConfig::total_steps(std::size_t n_samples) const {
  return n_epochs * steps_per_epoch(n_samples);
}

std::string_view block_kind_name(BlockKind k) {
  return k == BlockKind::kModel ? "model" : "timeshift";
}

BlockKind block_of_step(const FitConfig& cfg, std::size_t step) {
  if (!cfg.optimize_timeshift) return BlockKind::kModel;
  return (step / cfg.block_len) % 2 == 0 ? BlockKind::kModel : BlockKind::kTimeShift;
}

bool updates_block(BlockKind kind, ParamBlock block) {
  if (block == ParamBlock::kLogSigma) return true;
  return (kind == BlockKind::kTimeShift) == (block == ParamBlock::kTimeShift);
}

std::vector<SeparableKernel> FitState::kernels() const {
  std::vector<SeparableKernel> out;
  out.reserve(lambdas.size());
  for (double l : lambdas) out.push_back(SeparableKernel::build(grid, l, spacing, KernelScale::kUnitPeak));
  return out;
}

ModelSpec FitState::spec(std::size_t n_grid) const {
  ModelSpec s;
  s.kernels = kernels();
  s.gamma = gamma;
  s.omega_kl = omega_kl;
  s.n_grid = n_grid;
  return s;
}

FitState initialize_fit(const DataMatrix& data, const FitConfig& cfg) {
  data.validate();
  cfg.validate();
  const std::size_t np = data.n_samples();
  const std::size_t nf = data.n_features();
  require(np >= 1, "initialize_fit: no samples");
  const std::size_t ns = cfg.lambdas.size();

  SeededRng rng = SeededRng(cfg.seed).substream(kInitStream);
  FitState st;
  st.model.temporal = TemporalSourceSet::initialize(ns, cfg.n_rf, rng, cfg.temporal_init);
  st.model.codes = SpatialCodeSet::initialize(ns, nf, rng, cfg.code_mean_var, cfg.alpha_init);
  if (!data.times.empty()) {
    const auto [lo, hi] = std::minmax_element(data.times.begin(), data.times.end());
    if (*hi > *lo) {
      st.time_origin = *lo;
      st.time_scale = *hi - *lo;
    }
  }
  st.model.warp = TimeWarp::at_reference(
      data.times.empty() ? std::vector<double>(np, 0.0) : model_times(st, data.times));

  std::vector<double> mean(nf, 0.0);
  for (std::size_t p = 0; p < np; ++p) {
    for (std::size_t f = 0; f < nf; ++f) mean[f] += data.y(p, f);
  }
  for (double& z : mean) z /= static_cast<double>(np);
  double sq = 0.0;
  double sq_y = 0.0;
  for (std::size_t p = 0; p < np; ++p) {
    for (std::size_t f = 0; f < nf; ++f) {
      const double r = data.y(p, f) - mean[f];
      sq += r * r;
      sq_y += data.y(p, f) * data.y(p, f);
    }
  }
  const double count = static_cast<double>(np * nf);
  const double rms_centered = std::sqrt(sq / count);
  const double rms = std::sqrt(sq_y / count);
  st.data_scale = rms_centered > 0.0 ? rms_centered : (rms > 0.0 ? rms : 1.0);
  st.model.offset.z = mean;
  for (double& z : st.model.offset.z) z /= st.data_scale;
  st.model.log_sigma = std::log(rms_centered > 0.0 ? 1.0 : 1e-3);

  st.adam_m = zeros_like(st.model);
  st.adam_v = zeros_like(st.model);
  st.lambdas = cfg.lambdas;
  st.spacing = cfg.spacing;
  st.grid = data.grid;
  st.gamma = cfg.gamma;
  st.prune_threshold = cfg.prune_threshold;
  st.omega_kl = cfg.omega_kl;
  if (cfg.init == InitMode::kSpectral) spectral_initialize(st, data, cfg);
  return st;
}

void run_steps(FitState& state, const DataMatrix& data, const FitConfig& cfg,
               std::size_t until_step, std::vector<TraceRow>* trace) {
  cfg.validate();
  require(state.lambdas == cfg.lambdas && state.grid == data.grid,
          "run_steps: state was initialized for a different model");
  const std::size_t np = data.n_samples();
  require(state.data_scale > 0.0, "run_steps: data_scale must be > 0");
  const ModelSpec spec = state.spec(cfg.n_grid);
  const bool mini_batch = cfg.steps_per_epoch(np) > 1;
  const std::size_t total = cfg.total_steps(np);
  ModelState& model = state.model;
  Tensor y = data.y;
  y *= 1.0 / state.data_scale;
  // log-density of Y = c·Ỹ picks up −P·F·log c.
  const double log_jacobian =
      -static_cast<double>(np * data.n_features()) * std::log(state.data_scale);
  const std::size_t nf = data.n_features();

  for (; state.step < until_step; ++state.step) {
    const std::uint64_t k = state.step;
    const BlockKind kind = block_of_step(cfg, k);
    SeededRng rng = SeededRng(cfg.seed).substream(k);
    std::vector<NoiseDraw> draws;
    draws.reserve(static_cast<std::size_t>(cfg.n_mc));
    for (int i = 0; i < cfg.n_mc; ++i) draws.push_back(draw_noise(model, rng));

    ModelState grad;
    ElboBreakdown e;
    if (mini_batch) {
      const auto rows = batch_indices(cfg, np, k);
      e = batch_gradient(model, spec, y, rows, draws, grad);
    } else {
      grad = zeros_like(model);
      e = elbo_at(model, spec, y, draws, &grad);
    }
    e = ElboBreakdown::from_terms(e.data_term + log_jacobian, e.constraint_term, e.kl_codes,
                                  e.kl_omega, e.kl_w);
    check_terms(e, k);
    check_gradient(grad, k);

    const double progress =
        total <= 1 ? 0.0 : static_cast<double>(k) / static_cast<double>(total - 1);
    const double decay = std::pow(cfg.lr_final_ratio, std::min(progress, 1.0));
    const double lr = decay * (kind == BlockKind::kModel ? cfg.lr_model : cfg.lr_timeshift);
    for (ParamBlock b : kAllParamBlocks) {
      if (!updates_block(kind, b)) continue;
      const double t = static_cast<double>(++state.adam_steps[block_index(b)]);
      const double c1 = 1.0 - std::pow(cfg.adam_beta1, t);
      const double c2 = 1.0 - std::pow(cfg.adam_beta2, t);
      std::span<double> theta = block_values(model, b);
      std::span<const double> g = block_values(std::as_const(grad), b);
      std::span<double> m = block_values(state.adam_m, b);
      std::span<double> v = block_values(state.adam_v, b);
      const bool shared = b == ParamBlock::kCodeMean && cfg.shared_code_moments;
      if (shared) {
        for (std::size_t n = 0; n * nf < theta.size(); ++n) {
          double sq = 0.0;
          for (std::size_t i = n * nf; i < (n + 1) * nf; ++i) sq += g[i] * g[i];
          const double vn = cfg.adam_beta2 * v[n * nf] +
                            (1.0 - cfg.adam_beta2) * sq / static_cast<double>(nf);
          std::fill(v.begin() + static_cast<std::ptrdiff_t>(n * nf),
                    v.begin() + static_cast<std::ptrdiff_t>((n + 1) * nf), vn);
        }
      }
      for (std::size_t i = 0; i < theta.size(); ++i) {
        m[i] = cfg.adam_beta1 * m[i] + (1.0 - cfg.adam_beta1) * g[i];
        if (!shared) v[i] = cfg.adam_beta2 * v[i] + (1.0 - cfg.adam_beta2) * g[i] * g[i];
        theta[i] += lr * (m[i] / c1) / (std::sqrt(v[i] / c2) + cfg.adam_eps);
      }
      if (!all_finite(theta)) {
        throw NumericalError("non-finite value in parameter block '" + std::string(block_name(b)) +
                             "' after step " + std::to_string(k));
      }
    }
    if (trace != nullptr) trace->push_back({k, kind, e});
  }
}

FitResult fit(const DataMatrix& data, const FitConfig& cfg) {
  FitResult r;
  r.state = initialize_fit(data, cfg);
  const std::size_t total = cfg.total_steps(data.n_samples());
  r.trace.reserve(total);
  run_steps(r.state, data, cfg, total, &r.trace);
  return r;
}

std::vector<double> model_times(const FitState& state, std::span<const double> times) {
  std::vector<double> out(times.size());
  for (std::size_t i = 0; i < times.size(); ++i) {
    out[i] = (times[i] - state.time_origin) / state.time_scale;
  }
  return out;
}

Tensor mean_sources(const FitState& state, std::span<const double> times) {
  return source_values(posterior_mean_draw(state.model.temporal), times);
}

Tensor mean_maps(const FitState& state) {
  const PruneMask mask = prune_mask(state.model.codes, state.prune_threshold);
  const auto kernels = state.kernels();
  Tensor maps = assemble_maps(pruned_means(state.model.codes, mask), kernels);
  maps *= state.data_scale;
  return maps;
}

Tensor predict(const FitState& state, std::span<const double> times) {
  Tensor out = matmul(mean_sources(state, times), mean_maps(state));
  for (std::size_t i = 0; i < out.rows(); ++i) {
    auto row = out.row(i);
    for (std::size_t f = 0; f < row.size(); ++f) {
      row[f] += state.data_scale * state.model.offset.z[f];
    }
  }
  return out;
}

std::vector<double> source_energy(const FitState& state) {
  const std::vector<double> t = state.model.warp.warped_times();
  const Tensor s = mean_sources(state, t);
  const Tensor a = mean_maps(state);
  const std::size_t ns = a.rows();
  std::vector<double> energy(ns, 0.0);
  for (std::size_t n = 0; n < ns; ++n) {
    double mean = 0.0;
    for (std::size_t p = 0; p < s.rows(); ++p) mean += s(p, n);
    mean /= static_cast<double>(std::max<std::size_t>(s.rows(), 1));
    double ss = 0.0;
    for (std::size_t p = 0; p < s.rows(); ++p) ss += (s(p, n) - mean) * (s(p, n) - mean);
    double aa = 0.0;
    for (double v : a.row(n)) aa += v * v;
    energy[n] = std::sqrt(ss * aa);
  }
  return energy;
}

std::vector<std::size_t> active_sources(const FitState& state, double rel_threshold) {
  const std::vector<double> energy = source_energy(state);
  const double top = energy.empty() ? 0.0 : *std::max_element(energy.begin(), energy.end());
  std::vector<std::size_t> out;
  if (top <= 0.0) return out;
  const double cells = static_cast<double>(state.model.warp.tau.size() * state.grid.size());
  const double floor = kActiveFloor * state.data_scale * std::sqrt(cells);
  for (std::size_t n = 0; n < energy.size(); ++n) {
    if (energy[n] >= rel_threshold * top && energy[n] >= floor) out.push_back(n);
  }
  return out;
}

std::vector<double> evaluation_grid(const FitState& state, std::size_t n) {
  require(n >= 2, "evaluation_grid: need at least two points");
  const std::vector<double> t = state.model.warp.warped_times();
  require(!t.empty(), "evaluation_grid: state has no samples");
  const auto [lo, hi] = std::minmax_element(t.begin(), t.end());
  std::vector<double> g(n);
  for (std::size_t i = 0; i < n; ++i) {
    g[i] = *lo + (*hi - *lo) * static_cast<double>(i) / static_cast<double>(n - 1);
  }
  return g;
}

MonotonicityReport check_monotonicity(const FitState& state,
                                      std::span<const std::size_t> sources, std::size_t n_grid,
                                      double tolerance) {
  const std::vector<double> grid = evaluation_grid(state, n_grid);
  const TemporalDraw draw = posterior_mean_draw(state.model.temporal);
  const Tensor s = source_values(draw, grid);
  const Tensor ds = source_derivatives(draw, grid);
  MonotonicityReport rep;
  for (std::size_t n : sources) {
    require(n < s.cols(), "check_monotonicity: source index out of range");
    double max_abs = 0.0;
    double max_slope = -std::numeric_limits<double>::infinity();
    for (std::size_t k = 0; k < grid.size(); ++k) {
      max_abs = std::max(max_abs, std::abs(s(k, n)));
      max_slope = std::max(max_slope, ds(k, n));
    }
    const double rel = max_abs > 0.0 ? max_slope / max_abs : (max_slope > 0.0 ? max_slope : 0.0);
    rep.checked.push_back(n);
    rep.max_rel_slope.push_back(rel);
    if (max_slope > tolerance * max_abs) rep.violations.push_back(n);
  }
  return rep;
}

MonotonicityReport check_monotonicity(const FitState& state) {
  const auto active = active_sources(state);
  return check_monotonicity(state, active);
}

GammaSelection select_gamma(const DataMatrix& data, const FitConfig& tmpl,
                            std::span<const double> gamma_grid, std::size_t pilot_epochs) {
  require(!gamma_grid.empty(), "select_gamma: empty γ grid");
  for (std::size_t i = 0; i < gamma_grid.size(); ++i) {
    require(gamma_grid[i] > 0.0, "select_gamma: γ values must be > 0");
    require(i == 0 || gamma_grid[i] > gamma_grid[i - 1], "select_gamma: γ grid must increase");
  }
  require(pilot_epochs >= 1, "select_gamma: pilot_epochs must be >= 1");
  GammaSelection sel;
  bool found = false;
  for (double g : gamma_grid) {
    FitConfig cfg = tmpl;
    cfg.gamma = g;
    cfg.n_epochs = pilot_epochs;
    FitState st = initialize_fit(data, cfg);
    run_steps(st, data, cfg, cfg.total_steps(data.n_samples()));
    const MonotonicityReport rep = check_monotonicity(st);
    GammaTrial trial{g, rep.violations.size(), 0.0};
    for (double r : rep.max_rel_slope) trial.worst_rel_slope = std::max(trial.worst_rel_slope, r);
    sel.trials.push_back(trial);
    if (!found && rep.ok()) {
      sel.gamma = g;
      found = true;
    }
  }
  if (!found) {
    sel.gamma = gamma_grid.back();
    sel.warning = true;
  }
  return sel;
}

}  // namespace mgpa
