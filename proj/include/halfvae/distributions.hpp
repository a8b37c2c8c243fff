#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <numbers>
#include <span>
#include <string>
#include <vector>

#include "halfvae/errors.hpp"

namespace halfvae {

inline constexpr double kLogTwoPi = 1.8378770664093454835606594728112;  // ln(2*pi)

// Lower bound added to every softplus-parameterized standard deviation.
inline constexpr double kSpreadFloor = 1e-6;

struct DiagGaussian1D {
  double mean = 0.0;
  double variance = 1.0;
};

inline void require_positive_variance(double variance, const char* where) {
  if (!(variance > 0.0) || !std::isfinite(variance)) {
    throw DomainError(std::string(where) + ": variance must be positive and finite, got " +
                      std::to_string(variance));
  }
}

inline double gaussian_logpdf(double x, double mean, double variance) {
  require_positive_variance(variance, "gaussian_logpdf");
  const double d = x - mean;
  return -0.5 * (kLogTwoPi + std::log(variance) + d * d / variance);
}

inline double reparam_sample(double mean, double variance, double noise) {
  require_positive_variance(variance, "reparam_sample");
  return mean + std::sqrt(variance) * noise;
}

// Numerically stable ln(1 + e^x) and its derivative.
inline double softplus(double x) { return x > 0.0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x)); }
inline double sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}
// Inverse of softplus for y > 0.
inline double softplus_inverse(double y) { return y > 30.0 ? y : std::log(std::expm1(y)); }

// sigma = softplus(rho) + floor; the transform used for every posterior spread.
inline double spread_from_raw(double rho) { return softplus(rho) + kSpreadFloor; }
inline double raw_from_spread(double sigma) { return softplus_inverse(sigma - kSpreadFloor); }

// One-dimensional Gaussian mixture with unconstrained raw parameters:
// weights = softmax(raw_weights), variances = exp(2 * raw_log_scales).
struct GmmPrior {
  std::vector<double> raw_weights;
  std::vector<double> raw_means;
  std::vector<double> raw_log_scales;

  std::size_t components() const { return raw_weights.size(); }

  void validate() const {
    if (raw_weights.empty()) throw DomainError("GmmPrior: K must be >= 1");
    if (raw_means.size() != raw_weights.size() || raw_log_scales.size() != raw_weights.size()) {
      throw ShapeError("GmmPrior: raw parameter vectors differ in length");
    }
  }

  static GmmPrior standard_normal() { return GmmPrior{{0.0}, {0.0}, {0.0}}; }

  friend bool operator==(const GmmPrior&, const GmmPrior&) = default;
};

struct GmmConstrained {
  std::vector<double> weights;
  std::vector<double> means;
  std::vector<double> variances;
};

inline GmmConstrained gmm_constrain(const GmmPrior& prior) {
  prior.validate();
  const std::size_t k = prior.components();
  GmmConstrained out{std::vector<double>(k), prior.raw_means, std::vector<double>(k)};
  const double mx = *std::max_element(prior.raw_weights.begin(), prior.raw_weights.end());
  double total = 0.0;
  for (std::size_t j = 0; j < k; ++j) {
    out.weights[j] = std::exp(prior.raw_weights[j] - mx);
    total += out.weights[j];
  }
  for (std::size_t j = 0; j < k; ++j) {
    out.weights[j] /= total;
    out.variances[j] = std::exp(2.0 * prior.raw_log_scales[j]);
  }
  return out;
}

// Gradient of gmm_logpdf w.r.t. x and each raw parameter group.
struct GmmLogpdfGrad {
  double dx = 0.0;
  std::vector<double> d_raw_weights;
  std::vector<double> d_raw_means;
  std::vector<double> d_raw_log_scales;
};

namespace detail {

// Per-component log joint ln w_j + ln N(x | m_j, v_j) with the softmax folded in.
struct GmmTerms {
  std::vector<double> log_joint;
  double logsumexp = 0.0;
};

inline GmmTerms gmm_terms(double x, const GmmPrior& prior) {
  const std::size_t k = prior.components();
  double wmax = prior.raw_weights[0];
  for (double w : prior.raw_weights) wmax = std::max(wmax, w);
  double wsum = 0.0;
  for (double w : prior.raw_weights) wsum += std::exp(w - wmax);
  const double log_norm = wmax + std::log(wsum);

  GmmTerms t;
  t.log_joint.resize(k);
  double best = -std::numeric_limits<double>::infinity();
  for (std::size_t j = 0; j < k; ++j) {
    const double s = prior.raw_log_scales[j];
    const double z = (x - prior.raw_means[j]) * std::exp(-s);
    t.log_joint[j] = prior.raw_weights[j] - log_norm - 0.5 * kLogTwoPi - s - 0.5 * z * z;
    best = std::max(best, t.log_joint[j]);
  }
  double acc = 0.0;
  for (double v : t.log_joint) acc += std::exp(v - best);
  t.logsumexp = best + std::log(acc);
  return t;
}

}  // namespace detail

// ln sum_k w_k N(x | m_k, v_k) via log-sum-exp.
inline double gmm_logpdf(double x, const GmmPrior& prior) {
  prior.validate();
  return detail::gmm_terms(x, prior).logsumexp;
}

// Allocation-free evaluator for repeated density and gradient calls against
// one prior. Gradients are accumulated (scaled by `upstream`) into the caller's
// buffers, which lets loss code sum over many samples cheaply.
class GmmEvaluator {
 public:
  explicit GmmEvaluator(const GmmPrior& prior) : prior_(prior) {
    prior.validate();
    const std::size_t k = prior.components();
    log_w_.resize(k);
    w_.resize(k);
    inv_var_.resize(k);
    log_joint_.resize(k);
    double wmax = prior.raw_weights[0];
    for (double w : prior.raw_weights) wmax = std::max(wmax, w);
    double wsum = 0.0;
    for (double w : prior.raw_weights) wsum += std::exp(w - wmax);
    const double log_norm = wmax + std::log(wsum);
    for (std::size_t j = 0; j < k; ++j) {
      log_w_[j] = prior.raw_weights[j] - log_norm;
      w_[j] = std::exp(log_w_[j]);
      inv_var_[j] = std::exp(-2.0 * prior.raw_log_scales[j]);
      // component constant: ln w_j - ln(2 pi)/2 - s_j
      log_w_[j] -= 0.5 * kLogTwoPi + prior.raw_log_scales[j];
    }
  }

  std::size_t components() const { return w_.size(); }

  double logpdf(double x) {
    double best = -std::numeric_limits<double>::infinity();
    for (std::size_t j = 0; j < w_.size(); ++j) {
      const double d = x - prior_.raw_means[j];
      log_joint_[j] = log_w_[j] - 0.5 * d * d * inv_var_[j];
      best = std::max(best, log_joint_[j]);
    }
    double acc = 0.0;
    for (double v : log_joint_) acc += std::exp(v - best);
    return best + std::log(acc);
  }

  // Responsibilities r_j drive every partial:
  //   d/dx       = -sum_j r_j (x - m_j) / v_j
  //   d/dm_j     =  r_j (x - m_j) / v_j
  //   d/ds_j     =  r_j ((x - m_j)^2 / v_j - 1)
  //   d/dlogit_j =  r_j - w_j
  // Returns ln p(x); writes upstream * d/dx to dx and adds upstream * d/dtheta
  // to the three raw-parameter buffers (each of length K).
  double logpdf_accumulate(double x, double upstream, double& dx, double* d_weights,
                           double* d_means, double* d_log_scales) {
    const double value = logpdf(x);
    dx = 0.0;
    for (std::size_t j = 0; j < w_.size(); ++j) {
      const double r = std::exp(log_joint_[j] - value);
      const double d = x - prior_.raw_means[j];
      const double scaled = r * d * inv_var_[j];
      dx -= scaled;
      d_means[j] += upstream * scaled;
      d_log_scales[j] += upstream * r * (d * d * inv_var_[j] - 1.0);
      d_weights[j] += upstream * (r - w_[j]);
    }
    dx *= upstream;
    return value;
  }

 private:
  const GmmPrior& prior_;
  std::vector<double> log_w_;
  std::vector<double> w_;
  std::vector<double> inv_var_;
  std::vector<double> log_joint_;
};

inline double gmm_logpdf_grad(double x, const GmmPrior& prior, GmmLogpdfGrad& grad) {
  GmmEvaluator eval(prior);
  const std::size_t k = prior.components();
  grad.d_raw_weights.assign(k, 0.0);
  grad.d_raw_means.assign(k, 0.0);
  grad.d_raw_log_scales.assign(k, 0.0);
  return eval.logpdf_accumulate(x, 1.0, grad.dx, grad.d_raw_weights.data(),
                                grad.d_raw_means.data(), grad.d_raw_log_scales.data());
}

}  // namespace halfvae
