#include "mgpa/alignment.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace mgpa {

Tensor column(const Tensor& m, std::size_t j) {
  require(m.ndim() == 2 && j < m.cols(), "column: index out of range");
  Tensor out({m.rows()});
  for (std::size_t i = 0; i < m.rows(); ++i) out[i] = m(i, j);
  return out;
}

double pearson_correlation(std::span<const double> a, std::span<const double> b) {
  require(a.size() == b.size(), "pearson_correlation: length mismatch");
  const double n = static_cast<double>(a.size());
  if (a.empty()) return 0.0;
  const double ma = std::accumulate(a.begin(), a.end(), 0.0) / n;
  const double mb = std::accumulate(b.begin(), b.end(), 0.0) / n;
  double sab = 0.0, saa = 0.0, sbb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    sab += (a[i] - ma) * (b[i] - mb);
    saa += (a[i] - ma) * (a[i] - ma);
    sbb += (b[i] - mb) * (b[i] - mb);
  }
  if (saa <= 0.0 || sbb <= 0.0) return 0.0;
  return sab / std::sqrt(saa * sbb);
}

namespace {

void fit_alignment(std::span<const double> est, std::span<const double> truth, AlignMode mode,
                   SourceMatch& m) {
  const double n = static_cast<double>(est.size());
  switch (mode) {
    case AlignMode::kNone:
      m.scale = 1.0;
      m.offset = 0.0;
      return;
    case AlignMode::kSignScale: {
      double num = 0.0, den = 0.0;
      for (std::size_t i = 0; i < est.size(); ++i) {
        num += est[i] * truth[i];
        den += est[i] * est[i];
      }
      m.scale = den > 0.0 ? num / den : 0.0;
      m.offset = 0.0;
      return;
    }
    case AlignMode::kAffine: {
      const double me = std::accumulate(est.begin(), est.end(), 0.0) / n;
      const double mt = std::accumulate(truth.begin(), truth.end(), 0.0) / n;
      double num = 0.0, den = 0.0;
      for (std::size_t i = 0; i < est.size(); ++i) {
        num += (est[i] - me) * (truth[i] - mt);
        den += (est[i] - me) * (est[i] - me);
      }
      m.scale = den > 0.0 ? num / den : 0.0;
      m.offset = mt - m.scale * me;
      return;
    }
  }
}

}  // namespace

std::vector<SourceMatch> match_sources(const Tensor& est, const Tensor& truth, AlignMode mode,
                                       std::span<const std::size_t> candidates) {
  require(est.ndim() == 2 && truth.ndim() == 2, "match_sources: expected P × N matrices");
  require(est.rows() == truth.rows(), "match_sources: sample counts differ");
  std::vector<std::size_t> cand(candidates.begin(), candidates.end());
  if (cand.empty()) {
    cand.resize(est.cols());
    std::iota(cand.begin(), cand.end(), std::size_t{0});
  }
  for (std::size_t c : cand) require(c < est.cols(), "match_sources: candidate out of range");

  std::vector<Tensor> est_cols(est.cols());
  for (std::size_t c : cand) est_cols[c] = column(est, c);
  std::vector<Tensor> truth_cols;
  for (std::size_t t = 0; t < truth.cols(); ++t) truth_cols.push_back(column(truth, t));

  struct Pair {
    double abs_corr;
    double corr;
    std::size_t est;
    std::size_t truth;
  };
  std::vector<Pair> pairs;
  for (std::size_t c : cand) {
    for (std::size_t t = 0; t < truth.cols(); ++t) {
      const double r = pearson_correlation(est_cols[c].values(), truth_cols[t].values());
      pairs.push_back({std::abs(r), r, c, t});
    }
  }
  std::stable_sort(pairs.begin(), pairs.end(),
                   [](const Pair& a, const Pair& b) { return a.abs_corr > b.abs_corr; });

  std::vector<bool> est_used(est.cols(), false);
  std::vector<bool> truth_used(truth.cols(), false);
  std::vector<SourceMatch> out;
  for (const Pair& p : pairs) {
    if (est_used[p.est] || truth_used[p.truth]) continue;
    est_used[p.est] = true;
    truth_used[p.truth] = true;
    SourceMatch m;
    m.est = p.est;
    m.truth = p.truth;
    m.correlation = p.corr;
    fit_alignment(est_cols[p.est].values(), truth_cols[p.truth].values(), mode, m);
    out.push_back(m);
  }
  std::sort(out.begin(), out.end(),
            [](const SourceMatch& a, const SourceMatch& b) { return a.truth < b.truth; });
  return out;
}

double temporal_mse(const Tensor& est, const Tensor& truth, std::span<const SourceMatch> matches) {
  require(est.rows() == truth.rows(), "temporal_mse: sample counts differ");
  require(!matches.empty(), "temporal_mse: no matched sources");
  double total = 0.0;
  for (const SourceMatch& m : matches) {
    for (std::size_t p = 0; p < est.rows(); ++p) {
      const double d = m.scale * est(p, m.est) + m.offset - truth(p, m.truth);
      total += d * d;
    }
  }
  return total / static_cast<double>(matches.size() * est.rows());
}

double temporal_mse(const Tensor& est, const Tensor& truth, AlignMode mode) {
  const auto matches = match_sources(est, truth, mode);
  require(matches.size() == truth.cols(), "temporal_mse: fewer estimated than true sources");
  return temporal_mse(est, truth, matches);
}

}  // namespace mgpa
