#pragma once

#include <cstddef>
#include <vector>

#include "mgpa/tensor.hpp"

namespace mgpa {

struct PcaResult {
  Tensor scores;      // P × k, U·diag(s)
  Tensor components;  // k × F, rows of Vᵀ
  std::vector<double> singular_values;
  std::vector<double> mean;  // per-feature mean removed before the SVD
};

// Top-k singular triplets of Y with its mean row removed. Each component is
// sign-normalized so that its largest-magnitude entry is positive.
PcaResult pca_baseline(const Tensor& y, std::size_t k);

}  // namespace mgpa
