#pragma once

#include <cmath>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "halfvae/distributions.hpp"
#include "halfvae/errors.hpp"
#include "halfvae/matrix.hpp"
#include "halfvae/rng.hpp"

namespace halfvae {

struct KlEstimate {
  double value = 0.0;
  std::size_t sample_count = 0;
  double standard_error = 0.0;  // 0 for closed-form values
};

// KL(N(mean, variance) || N(0, 1)).
inline double kl_gauss_std_normal(double mean, double variance) {
  require_positive_variance(variance, "kl_gauss_std_normal");
  return 0.5 * (mean * mean + variance - 1.0 - std::log(variance));
}

namespace detail {

// KL(N(m1, v1) || N(m2, v2)); reference value for single-component priors.
inline double kl_gauss_gauss(double m1, double v1, double m2, double v2) {
  require_positive_variance(v1, "kl_gauss_gauss");
  require_positive_variance(v2, "kl_gauss_gauss");
  const double d = m1 - m2;
  return 0.5 * (std::log(v2 / v1) + (v1 + d * d) / v2 - 1.0);
}

}  // namespace detail

// Gradient of the frozen-noise KL estimate. `d_sigma` is with respect to the
// posterior standard deviation; prior partials are w.r.t. the raw parameters.
struct KlGrad {
  double d_mean = 0.0;
  double d_sigma = 0.0;
  std::vector<double> d_raw_weights;
  std::vector<double> d_raw_means;
  std::vector<double> d_raw_log_scales;
};

// Reparameterized estimate of KL(N(mean, sigma^2) || prior) over the given
// standard-normal draws: mean_s [ln q(z_s) - ln p(z_s)], z_s = mean + sigma*eps_s.
// With ln q written in terms of eps the estimator is a smooth deterministic
// function of (mean, sigma, prior) once the noise is fixed.
inline double kl_gauss_gmm_frozen(double mean, double sigma, GmmEvaluator& prior,
                                  std::span<const double> noise, KlGrad* grad = nullptr,
                                  double* sum_sq = nullptr) {
  if (noise.empty()) throw DomainError("kl_gauss_gmm_mc: samples must be >= 1");
  if (!(sigma > 0.0)) throw DomainError("kl_gauss_gmm_mc: posterior spread must be positive");
  const std::size_t k = prior.components();
  const double inv_s = 1.0 / static_cast<double>(noise.size());
  const double log_sigma = std::log(sigma);
  if (grad) {
    grad->d_mean = 0.0;
    grad->d_sigma = 0.0;
    grad->d_raw_weights.assign(k, 0.0);
    grad->d_raw_means.assign(k, 0.0);
    grad->d_raw_log_scales.assign(k, 0.0);
  }
  double total = 0.0;
  double total_sq = 0.0;
  for (double eps : noise) {
    const double z = mean + sigma * eps;
    const double log_q = -0.5 * kLogTwoPi - log_sigma - 0.5 * eps * eps;
    double log_p;
    if (grad) {
      double dz = 0.0;
      log_p = prior.logpdf_accumulate(z, -inv_s, dz, grad->d_raw_weights.data(),
                                      grad->d_raw_means.data(), grad->d_raw_log_scales.data());
      grad->d_mean += dz;
      grad->d_sigma += dz * eps - inv_s / sigma;
    } else {
      log_p = prior.logpdf(z);
    }
    const double term = log_q - log_p;
    total += term;
    total_sq += term * term;
  }
  if (sum_sq) *sum_sq = total_sq;
  return total * inv_s;
}

inline KlEstimate kl_gauss_gmm_mc(const DiagGaussian1D& posterior, const GmmPrior& prior,
                                  std::size_t samples, Rng& noise_source) {
  if (samples == 0) throw DomainError("kl_gauss_gmm_mc: samples must be >= 1");
  require_positive_variance(posterior.variance, "kl_gauss_gmm_mc");
  std::vector<double> noise(samples);
  for (auto& e : noise) e = noise_source.normal();
  GmmEvaluator eval(prior);
  double sum_sq = 0.0;
  const double value =
      kl_gauss_gmm_frozen(posterior.mean, std::sqrt(posterior.variance), eval, noise, nullptr, &sum_sq);
  KlEstimate est{value, samples, 0.0};
  if (samples > 1) {
    const double n = static_cast<double>(samples);
    const double var = std::max(0.0, (sum_sq - n * value * value) / (n - 1.0));
    est.standard_error = std::sqrt(var / n);
  }
  return est;
}

// 0.5 * sum (X - X_hat)^2: Gaussian negative log-likelihood with unit variance,
// additive constants dropped.
inline double reconstruction_nll(const Matrix& x, const Matrix& x_hat) {
  require_same_shape(x, x_hat, "reconstruction_nll");
  double acc = 0.0;
  auto a = x.flat();
  auto b = x_hat.flat();
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = a[i] - b[i];
    acc += d * d;
  }
  return 0.5 * acc;
}

// d reconstruction_nll / d X_hat = X_hat - X.
inline Matrix reconstruction_nll_grad(const Matrix& x, const Matrix& x_hat) {
  require_same_shape(x, x_hat, "reconstruction_nll_grad");
  Matrix g = x_hat;
  auto gx = g.flat();
  auto a = x.flat();
  for (std::size_t i = 0; i < gx.size(); ++i) gx[i] -= a[i];
  return g;
}

}  // namespace halfvae
