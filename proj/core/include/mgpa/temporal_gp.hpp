#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "mgpa/tensor.hpp"

namespace mgpa {

// Variational parameters of N_s monotonic temporal sources, each a random
// feature expansion S_n(t) = φ(Ω_n t) W_n with φ(·) = (cos(·), sin(·)).
//
// Weight layout per source: columns [0, n_rf) multiply cos(Ω t), columns
// [n_rf, 2 n_rf) multiply sin(Ω t). Variances are stored as logs.
struct TemporalSourceSet {
  std::size_t n_sources = 0;
  std::size_t n_rf = 0;
  Tensor freq_mean;        // r,      n_sources × n_rf
  Tensor freq_log_var;     // log p², n_sources × n_rf
  Tensor weight_mean;      // m,      n_sources × 2 n_rf
  Tensor weight_log_var;   // log s², n_sources × 2 n_rf
  Tensor log_lengthscale;  // log l,  n_sources

  static TemporalSourceSet zeros(std::size_t n_sources, std::size_t n_rf);

  struct Init {
    double lengthscale = 1.0;
    double freq_var = 1e-2;
    double weight_mean_var = 1e-2;
    double weight_var = 1e-2;
  };
  // Frequencies start at a draw from the prior N(0, l); weight means at
  // N(0, weight_mean_var).
  static TemporalSourceSet initialize(std::size_t n_sources, std::size_t n_rf, SeededRng& rng,
                                      const Init& init);
  static TemporalSourceSet initialize(std::size_t n_sources, std::size_t n_rf, SeededRng& rng) {
    return initialize(n_sources, n_rf, rng, Init{});
  }

  void validate() const;
};

// Per-sample linear time warp t_i = τ_i + δ_i.
struct TimeWarp {
  std::vector<double> delta;
  std::vector<double> tau;

  static TimeWarp at_reference(std::vector<double> tau) {
    TimeWarp w;
    w.delta.assign(tau.size(), 0.0);
    w.tau = std::move(tau);
    return w;
  }
  std::vector<double> warped_times() const;
};

// One joint draw of spectral frequencies and weights for every source.
struct TemporalDraw {
  Tensor omega;    // n_sources × n_rf
  Tensor weights;  // n_sources × 2 n_rf
};

TemporalDraw sample_temporal_draw(const TemporalSourceSet& ts, SeededRng& rng);
// Ω = r + p ⊙ ε_Ω, W = m + s ⊙ ε_W.
TemporalDraw temporal_draw_from_noise(const TemporalSourceSet& ts, const Tensor& eps_omega,
                                      const Tensor& eps_weights);
TemporalDraw posterior_mean_draw(const TemporalSourceSet& ts);

// S[p, n] = Σ_j W_nj cos(Ω_nj t_p) + W_n,J+j sin(Ω_nj t_p).
Tensor source_values(const TemporalDraw& draw, std::span<const double> times);
// S'[p, n] = Σ_j Ω_nj (−W_nj sin(Ω_nj t_p) + W_n,J+j cos(Ω_nj t_p)).
Tensor source_derivatives(const TemporalDraw& draw, std::span<const double> times);
// S''[p, n] = −Σ_j Ω_nj² (W_nj cos(Ω_nj t_p) + W_n,J+j sin(Ω_nj t_p)).
Tensor source_second_derivatives(const TemporalDraw& draw, std::span<const double> times);

// Draws (Ω, W) from the variational posterior and evaluates S at the warped
// times. Returns P × N_s.
Tensor sample_sources(const TemporalSourceSet& ts, const TimeWarp& warp, SeededRng& rng);
Tensor sample_source_derivatives(const TemporalDraw& draw, const TimeWarp& warp);

// Σ over entries of log σ(−γ S'): the soft constraint favouring
// non-increasing sources.
double constraint_log_likelihood(const Tensor& derivs, double gamma);

// Points at which the monotonicity constraint is evaluated: the warped
// observation times followed by n_grid uniformly spaced points spanning
// [min t, max t].
std::vector<double> constraint_times(std::span<const double> warped, std::size_t n_grid);

inline constexpr std::size_t kConstraintGridPoints = 64;

double log_sigmoid(double x);
double sigmoid(double x);

}  // namespace mgpa
