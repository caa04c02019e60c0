#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "mgpa/kron_conv.hpp"
#include "mgpa/tensor.hpp"

namespace mgpa {

// Variational-dropout posterior over the sparse codes B: independent
// N(μ_nf, ρ²_nf) per entry, optimized in (μ, log ρ²). The dropout coefficient
// is α = ρ² / μ², with dropout probability p = α / (1 + α).
struct SpatialCodeSet {
  Tensor mean;     // μ,      n_sources × F
  Tensor log_var;  // log ρ², n_sources × F

  std::size_t n_sources() const { return mean.rows(); }
  std::size_t n_features() const { return mean.cols(); }

  static SpatialCodeSet zeros(std::size_t n_sources, std::size_t n_features);
  // μ ~ N(0, mean_var) i.i.d., ρ² = α_init · μ².
  static SpatialCodeSet initialize(std::size_t n_sources, std::size_t n_features, SeededRng& rng,
                                   double mean_var = 1e-2, double alpha_init = 19.0);

  // log α = log ρ² − 2 log|μ|; +∞ where μ == 0.
  double log_alpha(std::size_t n, std::size_t f) const;
  Tensor log_alpha() const;

  void validate() const;
};

struct StaticOffset {
  std::vector<double> z;
};

inline double alpha_from_dropout(double p) { return p / (1.0 - p); }

// One draw B ~ q(B). Returns n_sources × F.
Tensor sample_codes(const SpatialCodeSet& sc, SeededRng& rng);

// Kept-entry mask: true where log α ≤ threshold. Entries strictly above the
// threshold are pruned (treated as exactly zero when reporting).
class PruneMask {
 public:
  PruneMask(std::size_t rows, std::size_t cols) : rows_(rows), cols_(cols), kept_(rows * cols) {}

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  bool kept(std::size_t n, std::size_t f) const { return kept_[n * cols_ + f] != 0; }
  void set(std::size_t n, std::size_t f, bool keep) { kept_[n * cols_ + f] = keep ? 1 : 0; }
  std::size_t kept_count(std::size_t n) const;
  double pruned_fraction(std::size_t n) const;

 private:
  std::size_t rows_;
  std::size_t cols_;
  std::vector<std::uint8_t> kept_;
};

PruneMask prune_mask(const SpatialCodeSet& sc, double log_alpha_threshold);

// Posterior-mean codes with pruned entries set to zero.
Tensor pruned_means(const SpatialCodeSet& sc, const PruneMask& mask);

// Row n of the result is Σ_n · codes[n].
Tensor assemble_maps(const Tensor& codes, std::span<const SeparableKernel> kernels);

}  // namespace mgpa
