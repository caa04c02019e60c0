#pragma once

// Reference computations written independently of the library code they
// check: closed-form KLs against quadrature or Monte Carlo, and a
// brute-force estimate of the log-evidence the ELBO bounds.

#include <algorithm>
#include <cmath>
#include <numbers>
#include <vector>

#include "mgpa/elbo.hpp"
#include "test_util.hpp"

namespace mgpa::testing {

// KL(N(m, v) ‖ N(0, prior_var)) by composite Simpson quadrature of q log(q/p)
// over m ± 14 sd.
inline double gaussian_kl_quadrature(double m, double v, double prior_var) {
  const double sd = std::sqrt(v);
  const double lo = m - 14.0 * sd;
  const double hi = m + 14.0 * sd;
  constexpr int n = 20000;
  const double h = (hi - lo) / n;
  auto integrand = [&](double x) {
    const double lq = -0.5 * std::log(2.0 * std::numbers::pi * v) - (x - m) * (x - m) / (2.0 * v);
    const double lp = -0.5 * std::log(2.0 * std::numbers::pi * prior_var) - x * x / (2.0 * prior_var);
    return std::exp(lq) * (lq - lp);
  };
  double s = integrand(lo) + integrand(hi);
  for (int i = 1; i < n; ++i) s += integrand(lo + i * h) * (i % 2 == 1 ? 4.0 : 2.0);
  return s * h / 3.0;
}

// Additive constant of the log-uniform prior log p(b) = −log|b| + c that
// makes KL(q ‖ p) vanish as α → ∞, the convention of the closed-form
// approximation: c = −½ log(2πe) − (γ + log 2) / 2.
inline double log_uniform_constant() {
  return -0.5 * std::log(2.0 * std::numbers::pi * std::numbers::e) -
         0.5 * (std::numbers::egamma + std::numbers::ln2);
}

// Monte Carlo estimate of KL(N(1, α) ‖ log-uniform), which depends on α
// only: KL = −½ log α + E log|1 + √α z| + (γ + log 2) / 2.
struct McEstimate {
  double mean = 0.0;
  double se = 0.0;
};

inline McEstimate kl_log_uniform_mc(double alpha, std::size_t n, SeededRng& rng) {
  const double ra = std::sqrt(alpha);
  double s = 0.0;
  double sq = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double v = std::log(std::abs(1.0 + ra * rng.normal()));
    s += v;
    sq += v * v;
  }
  const double mean = s / static_cast<double>(n);
  const double var = sq / static_cast<double>(n) - mean * mean;
  const double c = 0.5 * (std::numbers::egamma + std::numbers::ln2);
  return {-0.5 * std::log(alpha) + mean + c, std::sqrt(var / static_cast<double>(n))};
}

// log p(Y, C, θ) − log q(θ) for one draw θ = (Ω, W, B) from q, evaluated
// with dense matrices and direct formulas.
class JointDensity {
 public:
  JointDensity(const ModelState& s, const ModelSpec& spec, const Tensor& y) : s_(s), spec_(spec), y_(y) {
    for (const SeparableKernel& k : spec.kernels) dense_.push_back(dense_kronecker(k));
    t_ = s.warp.warped_times();
    ct_ = t_;
    const double a = *std::min_element(t_.begin(), t_.end());
    const double b = *std::max_element(t_.begin(), t_.end());
    for (std::size_t k = 0; k < spec.n_grid; ++k) {
      const double u = spec.n_grid == 1 ? 0.0 : static_cast<double>(k) / static_cast<double>(spec.n_grid - 1);
      ct_.push_back(a + (b - a) * u);
    }
  }

  double log_weight(SeededRng& rng) const {
    const std::size_t ns = s_.temporal.n_sources;
    const std::size_t nrf = s_.temporal.n_rf;
    const std::size_t np = y_.rows();
    const std::size_t nf = y_.cols();
    double log_q = 0.0;
    double log_prior = 0.0;
    auto draw = [&](double mean, double log_var) {
      const double e = rng.normal();
      log_q += -0.5 * std::log(2.0 * std::numbers::pi) - 0.5 * log_var - 0.5 * e * e;
      return mean + std::exp(0.5 * log_var) * e;
    };
    auto log_normal = [](double x, double var) {
      return -0.5 * std::log(2.0 * std::numbers::pi * var) - x * x / (2.0 * var);
    };

    std::vector<double> omega(ns * nrf);
    std::vector<double> w(ns * 2 * nrf);
    for (std::size_t n = 0; n < ns; ++n) {
      const double l = std::exp(s_.temporal.log_lengthscale[n]);
      const double prior_var = spec_.omega_kl == OmegaKlForm::kPrinted ? 1.0 / l : l;
      for (std::size_t j = 0; j < nrf; ++j) {
        omega[n * nrf + j] = draw(s_.temporal.freq_mean(n, j), s_.temporal.freq_log_var(n, j));
        log_prior += log_normal(omega[n * nrf + j], prior_var);
      }
      for (std::size_t j = 0; j < 2 * nrf; ++j) {
        w[n * 2 * nrf + j] = draw(s_.temporal.weight_mean(n, j), s_.temporal.weight_log_var(n, j));
        log_prior += log_normal(w[n * 2 * nrf + j], 1.0);
      }
    }
    std::vector<double> b(ns * nf);
    for (std::size_t i = 0; i < b.size(); ++i) {
      b[i] = draw(s_.codes.mean[i], s_.codes.log_var[i]);
      log_prior += -std::log(std::abs(b[i])) + log_uniform_constant();
    }

    std::vector<double> maps(ns * nf, 0.0);
    for (std::size_t n = 0; n < ns; ++n)
      for (std::size_t f = 0; f < nf; ++f)
        for (std::size_t g = 0; g < nf; ++g) maps[n * nf + f] += dense_[n](f, g) * b[n * nf + g];

    const double sigma2 = std::exp(2.0 * s_.log_sigma);
    double log_lik = 0.0;
    for (std::size_t p = 0; p < np; ++p) {
      std::vector<double> src(ns, 0.0);
      for (std::size_t n = 0; n < ns; ++n)
        for (std::size_t j = 0; j < nrf; ++j) {
          const double a = omega[n * nrf + j] * t_[p];
          src[n] += w[n * 2 * nrf + j] * std::cos(a) + w[n * 2 * nrf + nrf + j] * std::sin(a);
        }
      for (std::size_t f = 0; f < nf; ++f) {
        double pred = s_.offset.z[f];
        for (std::size_t n = 0; n < ns; ++n) pred += src[n] * maps[n * nf + f];
        const double r = y_(p, f) - pred;
        log_lik += -0.5 * std::log(2.0 * std::numbers::pi * sigma2) - r * r / (2.0 * sigma2);
      }
    }
    for (double t : ct_) {
      for (std::size_t n = 0; n < ns; ++n) {
        double d = 0.0;
        for (std::size_t j = 0; j < nrf; ++j) {
          const double om = omega[n * nrf + j];
          d += om * (-w[n * 2 * nrf + j] * std::sin(om * t) + w[n * 2 * nrf + nrf + j] * std::cos(om * t));
        }
        const double x = -spec_.gamma * d;  // log σ(x)
        log_lik += x < 0.0 ? x - std::log1p(std::exp(x)) : -std::log1p(std::exp(-x));
      }
    }
    return log_lik + log_prior - log_q;
  }

 private:
  const ModelState& s_;
  const ModelSpec& spec_;
  const Tensor& y_;
  std::vector<Tensor> dense_;
  std::vector<double> t_;
  std::vector<double> ct_;
};

// Importance-sampled log p(Y, C) with q as the proposal: log of the mean of
// n weights, with a delta-method standard error.
inline McEstimate log_evidence_oracle(const ModelState& s, const ModelSpec& spec, const Tensor& y,
                                      std::size_t n, SeededRng& rng) {
  const JointDensity jd(s, spec, y);
  std::vector<double> lw(n);
  for (double& v : lw) v = jd.log_weight(rng);
  const double mx = *std::max_element(lw.begin(), lw.end());
  double s1 = 0.0;
  double s2 = 0.0;
  for (double v : lw) {
    const double e = std::exp(v - mx);
    s1 += e;
    s2 += e * e;
  }
  const double nn = static_cast<double>(n);
  const double mean = s1 / nn;
  const double var = s2 / nn - mean * mean;
  return {mx + std::log(mean), std::sqrt(std::max(var, 0.0) / nn) / mean};
}

}  // namespace mgpa::testing
