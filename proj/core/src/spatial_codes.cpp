#include "mgpa/spatial_codes.hpp"

#include <cmath>
#include <limits>
#include <string>

#include "mgpa/parallel.hpp"

namespace mgpa {

SpatialCodeSet SpatialCodeSet::zeros(std::size_t n_sources, std::size_t n_features) {
  return SpatialCodeSet{Tensor::matrix(n_sources, n_features),
                        Tensor::matrix(n_sources, n_features)};
}

SpatialCodeSet SpatialCodeSet::initialize(std::size_t n_sources, std::size_t n_features,
                                          SeededRng& rng, double mean_var, double alpha_init) {
  require(mean_var > 0.0, "SpatialCodeSet::initialize: mean_var must be > 0");
  require(alpha_init > 0.0, "SpatialCodeSet::initialize: alpha_init must be > 0");
  SpatialCodeSet sc = zeros(n_sources, n_features);
  const double sd = std::sqrt(mean_var);
  const double log_alpha = std::log(alpha_init);
  for (std::size_t i = 0; i < sc.mean.size(); ++i) {
    double mu = sd * rng.normal();
    while (mu == 0.0) mu = sd * rng.normal();
    sc.mean[i] = mu;
    sc.log_var[i] = log_alpha + 2.0 * std::log(std::abs(mu));
  }
  return sc;
}

double SpatialCodeSet::log_alpha(std::size_t n, std::size_t f) const {
  const double mu = mean(n, f);
  if (mu == 0.0) return std::numeric_limits<double>::infinity();
  return log_var(n, f) - 2.0 * std::log(std::abs(mu));
}

Tensor SpatialCodeSet::log_alpha() const {
  Tensor out(mean.shape());
  for (std::size_t n = 0; n < n_sources(); ++n) {
    for (std::size_t f = 0; f < n_features(); ++f) out(n, f) = log_alpha(n, f);
  }
  return out;
}

void SpatialCodeSet::validate() const {
  require(mean.ndim() == 2 && mean.shape() == log_var.shape(),
          "SpatialCodeSet: mean and log-variance must share an n_sources × F shape");
  require(mean.all_finite() && log_var.all_finite(), "SpatialCodeSet: non-finite parameter");
}

Tensor sample_codes(const SpatialCodeSet& sc, SeededRng& rng) {
  sc.validate();
  Tensor sd(sc.log_var.shape());
  for (std::size_t i = 0; i < sd.size(); ++i) sd[i] = std::exp(0.5 * sc.log_var[i]);
  return gaussian_reparam_sample(sc.mean, sd, rng);
}

std::size_t PruneMask::kept_count(std::size_t n) const {
  std::size_t c = 0;
  for (std::size_t f = 0; f < cols_; ++f) c += kept_[n * cols_ + f];
  return c;
}

double PruneMask::pruned_fraction(std::size_t n) const {
  if (cols_ == 0) return 0.0;
  return 1.0 - static_cast<double>(kept_count(n)) / static_cast<double>(cols_);
}

PruneMask prune_mask(const SpatialCodeSet& sc, double log_alpha_threshold) {
  PruneMask mask(sc.n_sources(), sc.n_features());
  for (std::size_t n = 0; n < sc.n_sources(); ++n) {
    for (std::size_t f = 0; f < sc.n_features(); ++f) {
      mask.set(n, f, sc.log_alpha(n, f) <= log_alpha_threshold);
    }
  }
  return mask;
}

Tensor pruned_means(const SpatialCodeSet& sc, const PruneMask& mask) {
  require(mask.rows() == sc.n_sources() && mask.cols() == sc.n_features(),
          "pruned_means: mask shape mismatch");
  Tensor out = sc.mean;
  for (std::size_t n = 0; n < mask.rows(); ++n) {
    for (std::size_t f = 0; f < mask.cols(); ++f) {
      if (!mask.kept(n, f)) out(n, f) = 0.0;
    }
  }
  return out;
}

Tensor assemble_maps(const Tensor& codes, std::span<const SeparableKernel> kernels) {
  require(codes.ndim() == 2, "assemble_maps: codes must be n_sources × F");
  require(codes.rows() == kernels.size(),
          "assemble_maps: " + std::to_string(kernels.size()) + " kernels for " +
              std::to_string(codes.rows()) + " sources");
  Tensor maps(codes.shape());
  for (const auto& k : kernels) {
    require(k.grid().size() == codes.cols(), "assemble_maps: kernel grid does not match F");
  }
  parallel_for(codes.rows(), [&](std::size_t n) {
    apply(kernels[n], codes.row(n), maps.row(n));
  });
  return maps;
}

}  // namespace mgpa
