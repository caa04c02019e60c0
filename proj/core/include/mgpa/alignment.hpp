#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "mgpa/tensor.hpp"

namespace mgpa {

// How a fitted source is mapped onto its ground-truth counterpart before
// errors are measured. S·A + Z is unchanged by S_n → a S_n + b together with
// A_n → A_n / a and Z → Z − (b / a) A_n, so sign, scale and offset are not
// identifiable from the data.
enum class AlignMode {
  kNone,       // permutation matching only
  kSignScale,  // truth ≈ a · est
  kAffine,     // truth ≈ a · est + b
};

struct SourceMatch {
  std::size_t est = 0;
  std::size_t truth = 0;
  double correlation = 0.0;
  double scale = 1.0;
  double offset = 0.0;
};

double pearson_correlation(std::span<const double> a, std::span<const double> b);

// Greedy assignment of truth columns to estimated columns by decreasing
// |Pearson correlation|, followed by a least-squares fit of the alignment.
// est and truth are P × N matrices (one source per column). When candidates
// is non-empty only those estimated columns are eligible.
std::vector<SourceMatch> match_sources(const Tensor& est, const Tensor& truth, AlignMode mode,
                                       std::span<const std::size_t> candidates = {});

// Mean over matched pairs and samples of (a · est + b − truth)².
double temporal_mse(const Tensor& est, const Tensor& truth, std::span<const SourceMatch> matches);
double temporal_mse(const Tensor& est, const Tensor& truth, AlignMode mode);

Tensor column(const Tensor& m, std::size_t j);

}  // namespace mgpa
