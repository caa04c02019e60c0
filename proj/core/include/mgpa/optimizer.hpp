#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "mgpa/elbo.hpp"

namespace mgpa {

enum class InitMode { kRandom, kSpectral };

struct FitConfig {
  std::vector<double> lambdas = {2.0, 2.0, 1.0, 1.0, 0.5, 0.5};
  double spacing = 1.0;
  std::size_t n_rf = 50;
  std::size_t n_epochs = 1500;
  // Samples per step; 0 means full batch.
  std::size_t batch_size = 0;
  std::size_t block_len = 100;
  double lr_model = 1e-3;
  double lr_timeshift = 1e-2;
  // Step sizes decay exponentially to lr · lr_final_ratio at the last step.
  double lr_final_ratio = 0.1;
  double gamma = 100.0;
  int n_mc = 1;
  std::uint64_t seed = 0;
  double prune_threshold = 3.0;
  bool optimize_timeshift = false;
  OmegaKlForm omega_kl = OmegaKlForm::kTextbook;
  std::size_t n_grid = kConstraintGridPoints;

  TemporalSourceSet::Init temporal_init;
  double code_mean_var = 1e-2;
  double alpha_init = 19.0;

  // kSpectral refines the random draw with spectral_initialize (init.hpp).
  InitMode init = InitMode::kSpectral;
  std::size_t init_lasso_iterations = 1000;
  // Threshold multiplier τ; 0 selects √(2 log(F·K)) for K distinct scales.
  double init_threshold = 0.0;
  // Zero code entries start at ρ = init_inactive_scale × median |μ| of the
  // nonzero ones; nonzero entries at α = init_active_alpha.
  double init_inactive_scale = 0.03;
  double init_active_alpha = 1e-2;
  // Variance of q(Ω) and q(W) for the spectrally initialized sources.
  double init_temporal_var = 1e-6;

  // Code blocks share one second-moment estimate per source (the mean of g²
  // over the source's entries) instead of one per entry. Entries then move in
  // proportion to their gradient within a source, so entries that only see
  // noise stay near zero.
  bool shared_code_moments = true;

  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_eps = 1e-8;

  void validate() const;
  std::size_t steps_per_epoch(std::size_t n_samples) const;
  std::size_t total_steps(std::size_t n_samples) const;
};

enum class BlockKind { kModel, kTimeShift };
std::string_view block_kind_name(BlockKind k);

// Which alternation block a step belongs to. Without time-shift optimization
// every step is a model step; otherwise blocks of block_len steps alternate,
// starting with a model block.
BlockKind block_of_step(const FitConfig& cfg, std::size_t step);

// Parameters updated during each kind of block. Model blocks update every
// spatio-temporal parameter, the offset and σ; time-shift blocks update δ
// and σ.
bool updates_block(BlockKind kind, ParamBlock block);

struct FitState {
  ModelState model;
  // First and second moment estimates of the adaptive step-size rule, with
  // the same layout as the parameters.
  ModelState adam_m;
  ModelState adam_v;
  std::array<std::uint64_t, kAllParamBlocks.size()> adam_steps{};
  std::uint64_t step = 0;
  // The model is fitted to Y / data_scale (the RMS of Y about its per-feature
  // mean), so parameters, Z and σ are in those units. predict() and
  // mean_maps() convert back, and the data term in traces is reported for
  // the original Y.
  double data_scale = 1.0;
  // Known sample times are mapped to model time (t − time_origin) / time_scale,
  // which spans [0, 1] over the training data. The identity when times are
  // unknown or all equal. τ, δ and every time argument below are model times.
  double time_origin = 0.0;
  double time_scale = 1.0;

  // Echo of the configuration that shapes the model.
  std::vector<double> lambdas;
  double spacing = 1.0;
  Grid3 grid;
  double gamma = 1.0;
  double prune_threshold = 3.0;
  OmegaKlForm omega_kl = OmegaKlForm::kTextbook;

  std::vector<SeparableKernel> kernels() const;
  ModelSpec spec(std::size_t n_grid = kConstraintGridPoints) const;
};

struct TraceRow {
  std::uint64_t step = 0;
  BlockKind block = BlockKind::kModel;
  ElboBreakdown elbo;
};

struct FitResult {
  FitState state;
  std::vector<TraceRow> trace;
};

// Parameter initialization: random temporal features and codes, δ = 0, Z the
// per-feature mean of Y and σ the residual standard deviation (1 in
// standardized units, or 10⁻³ for data without variation).
FitState initialize_fit(const DataMatrix& data, const FitConfig& cfg);

// Advances state until state.step == until_step. Step k draws its noise (and
// mini-batch) from SeededRng(cfg.seed).substream(k) only, so splitting a run
// into several calls, with or without a checkpoint in between, yields the
// same result as one call. Throws NumericalError naming the term or block
// when a non-finite value appears.
void run_steps(FitState& state, const DataMatrix& data, const FitConfig& cfg,
               std::size_t until_step, std::vector<TraceRow>* trace = nullptr);

FitResult fit(const DataMatrix& data, const FitConfig& cfg);

// Maps times in data units to model time.
std::vector<double> model_times(const FitState& state, std::span<const double> times);

// Posterior-mean temporal sources (P × N_s) at the given times.
Tensor mean_sources(const FitState& state, std::span<const double> times);
// Posterior-mean maps with pruned code entries set to zero (N_s × F), in data
// units.
Tensor mean_maps(const FitState& state);

// S(t)·A + Z at posterior means with pruned codes. Returns len × F.
Tensor predict(const FitState& state, std::span<const double> times);

// Variation explained by source n over the training times: the Frobenius norm
// of (S_n − mean S_n) A_nᵀ with pruned posterior-mean maps.
std::vector<double> source_energy(const FitState& state);
// Sources whose energy is at least rel_threshold times the largest one and
// whose RMS contribution per data entry is at least kActiveFloor ×
// data_scale.
inline constexpr double kActiveFloor = 1e-3;
std::vector<std::size_t> active_sources(const FitState& state, double rel_threshold = 0.05);

inline constexpr std::size_t kMonotonicityGridPoints = 200;
inline constexpr double kMonotonicityTolerance = 1e-3;

// max_t S'_n(t) / max_t |S_n(t)| on a dense grid over the warped training
// range, for every source.
struct MonotonicityReport {
  std::vector<double> max_rel_slope;
  std::vector<std::size_t> checked;
  std::vector<std::size_t> violations;
  bool ok() const { return violations.empty(); }
};
MonotonicityReport check_monotonicity(const FitState& state,
                                      std::span<const std::size_t> sources,
                                      std::size_t n_grid = kMonotonicityGridPoints,
                                      double tolerance = kMonotonicityTolerance);
// Checks the active sources.
MonotonicityReport check_monotonicity(const FitState& state);

// Evenly spaced grid over [min, max] of the warped training times.
std::vector<double> evaluation_grid(const FitState& state, std::size_t n);

struct GammaTrial {
  double gamma = 0.0;
  std::size_t violations = 0;
  double worst_rel_slope = 0.0;
};

struct GammaSelection {
  double gamma = 0.0;
  bool warning = false;
  std::vector<GammaTrial> trials;
};

// Pilot fits of pilot_epochs epochs for each γ in the increasing grid; returns
// the smallest γ whose active sources pass check_monotonicity, or the largest
// γ with warning set when none does.
GammaSelection select_gamma(const DataMatrix& data, const FitConfig& tmpl,
                            std::span<const double> gamma_grid, std::size_t pilot_epochs);

}  // namespace mgpa
