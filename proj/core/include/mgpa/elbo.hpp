#pragma once

#include <array>
#include <cstddef>
#include <span>
#include <string_view>
#include <vector>

#include "mgpa/kron_conv.hpp"
#include "mgpa/spatial_codes.hpp"
#include "mgpa/temporal_gp.hpp"
#include "mgpa/tensor.hpp"

namespace mgpa {

// P × F observations with optional nominal per-sample times (empty when the
// time of each sample is unknown).
struct DataMatrix {
  Tensor y;
  std::vector<double> times;
  Grid3 grid;

  std::size_t n_samples() const { return y.rows(); }
  std::size_t n_features() const { return y.cols(); }
  void validate() const;
};

// Every learned quantity of the model. Also used, with identical shapes, to
// hold gradients.
struct ModelState {
  TemporalSourceSet temporal;
  SpatialCodeSet codes;
  TimeWarp warp;
  StaticOffset offset;
  double log_sigma = 0.0;

  std::size_t n_sources() const { return temporal.n_sources; }
  std::size_t n_samples() const { return warp.delta.size(); }
  std::size_t n_features() const { return offset.z.size(); }
};

ModelState zeros_like(const ModelState& s);

enum class ParamBlock {
  kFreqMean,
  kFreqLogVar,
  kWeightMean,
  kWeightLogVar,
  kLogLengthscale,
  kCodeMean,
  kCodeLogVar,
  kOffset,
  kLogSigma,
  kTimeShift,
};

inline constexpr std::array<ParamBlock, 10> kAllParamBlocks = {
    ParamBlock::kFreqMean,   ParamBlock::kFreqLogVar, ParamBlock::kWeightMean,
    ParamBlock::kWeightLogVar, ParamBlock::kLogLengthscale, ParamBlock::kCodeMean,
    ParamBlock::kCodeLogVar, ParamBlock::kOffset,     ParamBlock::kLogSigma,
    ParamBlock::kTimeShift,
};

std::string_view block_name(ParamBlock b);
std::span<double> block_values(ModelState& s, ParamBlock b);
std::span<const double> block_values(const ModelState& s, ParamBlock b);

// The KL between q(Ω_n) and the prior N(0, l_n I). kPrinted multiplies the
// variational moments by l_n (as if the prior variance were 1/l_n);
// kTextbook divides them by l_n.
enum class OmegaKlForm { kTextbook, kPrinted };

struct ModelSpec {
  std::vector<SeparableKernel> kernels;
  double gamma = 1.0;
  OmegaKlForm omega_kl = OmegaKlForm::kTextbook;
  std::size_t n_grid = kConstraintGridPoints;
  // Multiplies the data term; P / batch size when y holds a mini-batch.
  double data_scale = 1.0;
};

struct ElboBreakdown {
  double data_term = 0.0;
  double constraint_term = 0.0;
  double kl_codes = 0.0;
  double kl_omega = 0.0;
  double kl_w = 0.0;
  double total = 0.0;

  static ElboBreakdown from_terms(double data, double constraint, double klc, double klo,
                                  double klw) {
    return {data, constraint, klc, klo, klw, data + constraint - klc - klo - klw};
  }
};

// Standard-normal noise for one joint draw of (Ω, W, B).
struct NoiseDraw {
  Tensor eps_omega;
  Tensor eps_weights;
  Tensor eps_codes;
};

NoiseDraw draw_noise(const ModelState& s, SeededRng& rng);
// Joint draw of B = μ + ρ ⊙ ε_B.
Tensor codes_from_noise(const SpatialCodeSet& sc, const Tensor& eps_codes);

// Σ_p [ −(F/2) log(2πσ²) − ‖Y_p − S_p A − Z‖² / (2σ²) ].
double data_log_likelihood(const Tensor& y, const Tensor& s, const Tensor& a,
                           std::span<const double> z, double sigma);

// Constants of the sigmoid approximation to −KL(q ‖ log-uniform prior).
inline constexpr double kKlK1 = 0.63576;
inline constexpr double kKlK2 = 1.87320;
inline constexpr double kKlK3 = 1.48695;

// Per-entry KL approximation as a function of log α:
// −[k1 σ(k2 + k3 log α) − ½ log(1 + α⁻¹) − k1].
double kl_codes_entry(double log_alpha);
double kl_codes(const SpatialCodeSet& sc);
double kl_omega(const TemporalSourceSet& ts, OmegaKlForm form);
double kl_w(const TemporalSourceSet& ts);

// ELBO for fixed noise draws (data and constraint terms averaged over the
// draws; KL terms are closed form). When grad is non-null it receives the
// exact gradient of the returned total with respect to every parameter block.
ElboBreakdown elbo_at(const ModelState& s, const ModelSpec& spec, const Tensor& y,
                      std::span<const NoiseDraw> draws, ModelState* grad = nullptr);

// n_mc-sample Monte Carlo estimate with fresh draws from rng.
ElboBreakdown elbo_estimate(const ModelState& s, const ModelSpec& spec, const DataMatrix& data,
                            SeededRng& rng, int n_mc);

// Validates that parameter shapes agree with each other, the data and the spec.
void validate_model(const ModelState& s, const ModelSpec& spec, const Tensor& y);

}  // namespace mgpa
