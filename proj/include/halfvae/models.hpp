#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "halfvae/distributions.hpp"
#include "halfvae/divergence.hpp"
#include "halfvae/errors.hpp"
#include "halfvae/matrix.hpp"
#include "halfvae/mlp.hpp"
#include "halfvae/rng.hpp"

namespace halfvae {

// Two-sided 95% standard-normal quantile.
inline constexpr double kZ95 = 1.959964;

// Trainable posterior of the encoder-free model: per-entry means and one
// unconstrained spread per component (sigma_i = softplus(rho_i) + 1e-6).
struct LatentBank {
  Matrix z_mu;                // [N x L]
  std::vector<double> z_rho;  // [N]

  std::size_t components() const { return z_mu.rows(); }
  std::size_t length() const { return z_mu.cols(); }
  double sigma(std::size_t i) const { return spread_from_raw(z_rho[i]); }

  friend bool operator==(const LatentBank&, const LatentBank&) = default;
};

enum class PriorKind { gmm, standard_normal };

struct HalfVaeModel {
  LatentBank bank;
  MlpParams decoder;            // theta: R^N -> R^M, applied per column
  std::vector<GmmPrior> priors; // Psi_i, one per latent component
  double lambda = 1.0;

  std::size_t n() const { return bank.components(); }
  std::size_t m() const { return decoder.out_dim(); }
  std::size_t l() const { return bank.length(); }

  void validate() const {
    decoder.validate();
    if (bank.z_rho.size() != n()) throw ShapeError("HalfVaeModel: z_rho length != N");
    if (decoder.in_dim() != n()) throw ShapeError("HalfVaeModel: decoder input dim != N");
    if (priors.size() != n()) throw ShapeError("HalfVaeModel: need one prior per component");
    for (const auto& p : priors) p.validate();
    if (!(lambda >= 0.0)) throw DomainError("HalfVaeModel: lambda must be >= 0");
  }

  friend bool operator==(const HalfVaeModel&, const HalfVaeModel&) = default;
};

// Amortized model: the encoder maps each observation column (M) to 2N values,
// posterior means followed by raw spreads.
struct VaeModel {
  MlpParams encoder;
  MlpParams decoder;
  PriorKind prior_kind = PriorKind::gmm;
  std::vector<GmmPrior> priors;  // empty for the standard-normal variant
  double lambda = 1.0;

  std::size_t n() const { return decoder.in_dim(); }
  std::size_t m() const { return decoder.out_dim(); }

  void validate() const {
    encoder.validate();
    decoder.validate();
    if (encoder.out_dim() != 2 * n()) throw ShapeError("VaeModel: encoder output dim != 2N");
    if (encoder.in_dim() != m()) throw ShapeError("VaeModel: encoder input dim != M");
    if (prior_kind == PriorKind::gmm) {
      if (priors.size() != n()) throw ShapeError("VaeModel: need one prior per component");
      for (const auto& p : priors) p.validate();
    } else if (!priors.empty()) {
      throw ShapeError("VaeModel: standard-normal variant carries no trainable prior");
    }
    if (!(lambda >= 0.0)) throw DomainError("VaeModel: lambda must be >= 0");
  }

  friend bool operator==(const VaeModel&, const VaeModel&) = default;
};

struct PosteriorSummary {
  Matrix means;
  Matrix lower95;
  Matrix upper95;
};

struct LossResult {
  double loss = 0.0;
  double reconstruction = 0.0;
  double kl = 0.0;                        // unweighted sum over components
  std::vector<double> kl_per_component;   // [N]
  std::vector<double> grad;               // flat, same layout as flatten()
};

// ---------------------------------------------------------------------------
// Parameter flattening. Layouts:
//   HalfVae: z_mu (row-major), z_rho, decoder, priors (logits, means, log-scales per component)
//   Vae:     encoder, decoder, priors

namespace detail {

inline void flatten_priors(const std::vector<GmmPrior>& priors, std::vector<double>& out) {
  for (const auto& p : priors) {
    out.insert(out.end(), p.raw_weights.begin(), p.raw_weights.end());
    out.insert(out.end(), p.raw_means.begin(), p.raw_means.end());
    out.insert(out.end(), p.raw_log_scales.begin(), p.raw_log_scales.end());
  }
}

inline std::size_t assign_priors(std::vector<GmmPrior>& priors, std::span<const double> src) {
  std::size_t pos = 0;
  for (auto& p : priors) {
    for (auto* group : {&p.raw_weights, &p.raw_means, &p.raw_log_scales})
      for (auto& v : *group) v = src[pos++];
  }
  return pos;
}

inline std::size_t prior_parameter_count(const std::vector<GmmPrior>& priors) {
  std::size_t n = 0;
  for (const auto& p : priors) n += 3 * p.components();
  return n;
}

inline std::vector<GmmPrior> default_priors(std::size_t n, std::size_t k) {
  std::vector<GmmPrior> priors(n);
  for (auto& p : priors) {
    p.raw_weights.assign(k, 0.0);
    p.raw_log_scales.assign(k, std::log(0.5));
    p.raw_means.resize(k);
    for (std::size_t j = 0; j < k; ++j) {
      p.raw_means[j] = k == 1 ? 0.0 : -1.0 + 2.0 * static_cast<double>(j) / static_cast<double>(k - 1);
    }
  }
  return priors;
}

inline std::vector<std::size_t> topology(std::size_t in, std::span<const std::size_t> hidden,
                                         std::size_t out) {
  std::vector<std::size_t> dims{in};
  dims.insert(dims.end(), hidden.begin(), hidden.end());
  dims.push_back(out);
  return dims;
}

}  // namespace detail

inline std::size_t parameter_count(const HalfVaeModel& m) {
  return m.bank.z_mu.size() + m.bank.z_rho.size() + m.decoder.parameter_count() +
         detail::prior_parameter_count(m.priors);
}

inline std::size_t parameter_count(const VaeModel& m) {
  return m.encoder.parameter_count() + m.decoder.parameter_count() +
         detail::prior_parameter_count(m.priors);
}

inline std::vector<double> flatten(const HalfVaeModel& m) {
  std::vector<double> out;
  out.reserve(parameter_count(m));
  out.insert(out.end(), m.bank.z_mu.values().begin(), m.bank.z_mu.values().end());
  out.insert(out.end(), m.bank.z_rho.begin(), m.bank.z_rho.end());
  m.decoder.flatten_into(out);
  detail::flatten_priors(m.priors, out);
  return out;
}

inline std::vector<double> flatten(const VaeModel& m) {
  std::vector<double> out;
  out.reserve(parameter_count(m));
  m.encoder.flatten_into(out);
  m.decoder.flatten_into(out);
  detail::flatten_priors(m.priors, out);
  return out;
}

inline void assign(HalfVaeModel& m, std::span<const double> src) {
  if (src.size() != parameter_count(m)) throw ShapeError("assign: flat vector length mismatch");
  std::size_t pos = 0;
  for (auto& v : m.bank.z_mu.flat()) v = src[pos++];
  for (auto& v : m.bank.z_rho) v = src[pos++];
  pos += m.decoder.assign_from(src.subspan(pos));
  detail::assign_priors(m.priors, src.subspan(pos));
}

inline void assign(VaeModel& m, std::span<const double> src) {
  if (src.size() != parameter_count(m)) throw ShapeError("assign: flat vector length mismatch");
  std::size_t pos = m.encoder.assign_from(src);
  pos += m.decoder.assign_from(src.subspan(pos));
  detail::assign_priors(m.priors, src.subspan(pos));
}

// ---------------------------------------------------------------------------
// Initialization

struct ArchitectureOptions {
  std::vector<std::size_t> hidden{32, 32};
  Activation activation = Activation::tanh;
  double lambda = 1.0;
};

inline void require_determined(std::size_t n, std::size_t m) {
  if (m < n) {
    throw UnderdeterminedError("underdetermined configuration: m=" + std::to_string(m) +
                               " observed channels < n=" + std::to_string(n) +
                               " sources is not supported");
  }
}

// Random streams: 1 decoder, 2 latent means, 3 encoder.
inline HalfVaeModel init_half_vae(std::size_t n, std::size_t m, std::size_t l, std::size_t k,
                                  std::uint64_t seed, const ArchitectureOptions& arch = {}) {
  if (n == 0 || l == 0 || k == 0) throw ConfigError("init_half_vae: n, l and k must be >= 1");
  require_determined(n, m);
  HalfVaeModel model;
  Rng dec_rng(seed, 1);
  Rng bank_rng(seed, 2);
  const auto dims = detail::topology(n, arch.hidden, m);
  model.decoder = make_mlp(dims, arch.activation, dec_rng);
  model.bank.z_mu = Matrix(n, l);
  for (auto& v : model.bank.z_mu.flat()) v = 0.1 * bank_rng.normal();
  model.bank.z_rho.assign(n, raw_from_spread(0.1));
  model.priors = detail::default_priors(n, k);
  model.lambda = arch.lambda;
  return model;
}

inline VaeModel init_vae(std::size_t n, std::size_t m, std::size_t k, std::uint64_t seed,
                         PriorKind prior, const ArchitectureOptions& arch = {}) {
  if (n == 0 || k == 0) throw ConfigError("init_vae: n and k must be >= 1");
  require_determined(n, m);
  VaeModel model;
  Rng dec_rng(seed, 1);
  Rng enc_rng(seed, 3);
  model.decoder = make_mlp(detail::topology(n, arch.hidden, m), arch.activation, dec_rng);
  model.encoder = make_mlp(detail::topology(m, arch.hidden, 2 * n), arch.activation, enc_rng);
  model.prior_kind = prior;
  if (prior == PriorKind::gmm) model.priors = detail::default_priors(n, k);
  model.lambda = arch.lambda;
  return model;
}

// ---------------------------------------------------------------------------
// Losses

// Standard-normal draws for `samples` reparameterized passes over an N x L
// latent, laid out [i][l][s] so each latent entry's draws are contiguous.
inline std::vector<double> draw_noise(std::size_t samples, std::size_t n, std::size_t l, Rng& rng) {
  std::vector<double> noise(samples * n * l);
  for (auto& e : noise) e = rng.normal();
  return noise;
}

namespace detail {

inline void check_finite_term(double v, const char* term) {
  if (!std::isfinite(v)) throw NumericError(std::string("non-finite ") + term + " term in loss");
}

inline std::size_t samples_from_noise(std::size_t noise_len, std::size_t n, std::size_t l) {
  if (n * l == 0 || noise_len % (n * l) != 0 || noise_len == 0) {
    throw ShapeError("loss: noise length " + std::to_string(noise_len) +
                     " is not a positive multiple of N*L = " + std::to_string(n * l));
  }
  return noise_len / (n * l);
}

// Shared decoder pass. `mu` and `sigma` are [N x L]; builds Z [N x S*L] with
// column s*L + l holding sample s of column l, decodes, and returns the
// reconstruction term. When grads are requested, fills d_mu/d_sigma (same shape
// as mu/sigma) with the reconstruction gradient and decoder grads.
struct DecodeResult {
  double reconstruction = 0.0;
  Matrix d_mu;
  Matrix d_sigma;
  MlpParams decoder_grads;
};

inline DecodeResult decode_and_reconstruct(const MlpParams& decoder, const Matrix& x,
                                           const Matrix& mu, const Matrix& sigma,
                                           std::span<const double> noise, std::size_t samples,
                                           bool want_grad) {
  const std::size_t n = mu.rows(), l = mu.cols();
  Matrix z(n, samples * l);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t c = 0; c < l; ++c) {
      const double* eps = noise.data() + (i * l + c) * samples;
      for (std::size_t s = 0; s < samples; ++s) z(i, s * l + c) = mu(i, c) + sigma(i, c) * eps[s];
    }
  }
  auto fwd = mlp_forward(decoder, z);
  const double inv_s = 1.0 / static_cast<double>(samples);
  DecodeResult out;
  Matrix upstream(fwd.output.rows(), fwd.output.cols());
  double rec = 0.0;
  for (std::size_t r = 0; r < x.rows(); ++r) {
    auto xr = x.row(r);
    auto yr = fwd.output.row(r);
    auto gr = upstream.row(r);
    for (std::size_t s = 0; s < samples; ++s) {
      for (std::size_t c = 0; c < l; ++c) {
        const double d = yr[s * l + c] - xr[c];
        rec += d * d;
        gr[s * l + c] = d * inv_s;
      }
    }
  }
  out.reconstruction = 0.5 * rec * inv_s;
  if (!want_grad) return out;

  auto bwd = mlp_backward(decoder, fwd.cache, upstream);
  out.decoder_grads = std::move(bwd.param_grads);
  out.d_mu = Matrix(n, l);
  out.d_sigma = Matrix(n, l);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t c = 0; c < l; ++c) {
      const double* eps = noise.data() + (i * l + c) * samples;
      double gm = 0.0, gs = 0.0;
      for (std::size_t s = 0; s < samples; ++s) {
        const double g = bwd.input_grads(i, s * l + c);
        gm += g;
        gs += g * eps[s];
      }
      out.d_mu(i, c) = gm;
      out.d_sigma(i, c) = gs;
    }
  }
  return out;
}

// Monte-Carlo KL of every entry of row i against prior i, summed per row.
// Adds weight * gradient into d_mu, d_sigma and the flat prior gradient block.
inline void gmm_kl_rows(const Matrix& mu, const Matrix& sigma, const std::vector<GmmPrior>& priors,
                        std::span<const double> noise, std::size_t samples, double weight,
                        bool want_grad, std::vector<double>& per_component, Matrix* d_mu,
                        Matrix* d_sigma, double* d_priors) {
  const std::size_t n = mu.rows(), l = mu.cols();
  per_component.assign(n, 0.0);
  KlGrad g;
  std::size_t prior_offset = 0;
  for (std::size_t i = 0; i < n; ++i) {
    GmmEvaluator eval(priors[i]);
    const std::size_t k = priors[i].components();
    double row_total = 0.0;
    for (std::size_t c = 0; c < l; ++c) {
      auto eps = noise.subspan((i * l + c) * samples, samples);
      row_total += kl_gauss_gmm_frozen(mu(i, c), sigma(i, c), eval, eps, want_grad ? &g : nullptr);
      if (want_grad) {
        (*d_mu)(i, c) += weight * g.d_mean;
        (*d_sigma)(i, c) += weight * g.d_sigma;
        double* dp = d_priors + prior_offset;
        for (std::size_t j = 0; j < k; ++j) {
          dp[j] += weight * g.d_raw_weights[j];
          dp[k + j] += weight * g.d_raw_means[j];
          dp[2 * k + j] += weight * g.d_raw_log_scales[j];
        }
      }
    }
    per_component[i] = row_total;
    prior_offset += 3 * k;
  }
}

}  // namespace detail

// Negative ELBO of the encoder-free model with frozen noise:
//   (1/S) sum_s 0.5 ||X - dec(Z_s)||^2 + lambda * sum_i KL_i,
// KL_i the Monte-Carlo KL of row i of the latent bank against prior i, using
// the same draws Z_s as the reconstruction term. `kl_weight` overrides lambda.
inline LossResult half_vae_loss(const HalfVaeModel& model, const Matrix& x,
                                std::span<const double> noise, bool want_grad = true,
                                std::optional<double> kl_weight = std::nullopt) {
  model.validate();
  const std::size_t n = model.n(), l = model.l();
  if (x.rows() != model.m() || x.cols() != l) {
    throw ShapeError("half_vae_loss: X is " + x.shape_str() + ", model expects " +
                     std::to_string(model.m()) + "x" + std::to_string(l));
  }
  const std::size_t samples = detail::samples_from_noise(noise.size(), n, l);
  const double weight = kl_weight.value_or(model.lambda);

  Matrix sigma(n, l);
  for (std::size_t i = 0; i < n; ++i) {
    const double s = model.bank.sigma(i);
    for (auto& v : sigma.row(i)) v = s;
  }
  auto dec = detail::decode_and_reconstruct(model.decoder, x, model.bank.z_mu, sigma, noise,
                                            samples, want_grad);
  LossResult res;
  res.reconstruction = dec.reconstruction;
  std::vector<double> d_priors(detail::prior_parameter_count(model.priors), 0.0);
  detail::gmm_kl_rows(model.bank.z_mu, sigma, model.priors, noise, samples, weight, want_grad,
                      res.kl_per_component, want_grad ? &dec.d_mu : nullptr,
                      want_grad ? &dec.d_sigma : nullptr, d_priors.data());
  for (double v : res.kl_per_component) res.kl += v;
  detail::check_finite_term(res.reconstruction, "reconstruction");
  detail::check_finite_term(res.kl, "KL");
  res.loss = res.reconstruction + weight * res.kl;
  if (!want_grad) return res;

  res.grad.reserve(parameter_count(model));
  res.grad.insert(res.grad.end(), dec.d_mu.values().begin(), dec.d_mu.values().end());
  for (std::size_t i = 0; i < n; ++i) {
    double ds = 0.0;
    for (double v : dec.d_sigma.row(i)) ds += v;
    res.grad.push_back(ds * sigmoid(model.bank.z_rho[i]));
  }
  dec.decoder_grads.flatten_into(res.grad);
  res.grad.insert(res.grad.end(), d_priors.begin(), d_priors.end());
  return res;
}

inline LossResult half_vae_loss(const HalfVaeModel& model, const Matrix& x, std::size_t samples,
                                Rng& rng, bool want_grad = true) {
  const auto noise = draw_noise(samples, model.n(), model.l(), rng);
  return half_vae_loss(model, x, noise, want_grad);
}

struct EncoderPosterior {
  Matrix mean;   // [N x L]
  Matrix sigma;  // [N x L]
  Matrix raw;    // [N x L] pre-softplus spreads
  MlpForward forward;
};

inline EncoderPosterior encode(const VaeModel& model, const Matrix& x) {
  EncoderPosterior post;
  post.forward = mlp_forward(model.encoder, x);
  const std::size_t n = model.n(), l = x.cols();
  post.mean = Matrix(n, l);
  post.sigma = Matrix(n, l);
  post.raw = Matrix(n, l);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t c = 0; c < l; ++c) {
      post.mean(i, c) = post.forward.output(i, c);
      post.raw(i, c) = post.forward.output(n + i, c);
      post.sigma(i, c) = spread_from_raw(post.raw(i, c));
    }
  }
  return post;
}

// Negative ELBO of the amortized model. GMM variant: Monte-Carlo KL per entry
// with the shared draws; standard-normal variant: closed-form KL.
inline LossResult vae_loss(const VaeModel& model, const Matrix& x, std::span<const double> noise,
                           bool want_grad = true, std::optional<double> kl_weight = std::nullopt) {
  model.validate();
  if (x.rows() != model.m()) {
    throw ShapeError("vae_loss: X has " + std::to_string(x.rows()) + " rows, model expects " +
                     std::to_string(model.m()));
  }
  const std::size_t n = model.n(), l = x.cols();
  const std::size_t samples = detail::samples_from_noise(noise.size(), n, l);
  const double weight = kl_weight.value_or(model.lambda);

  auto post = encode(model, x);
  auto dec = detail::decode_and_reconstruct(model.decoder, x, post.mean, post.sigma, noise,
                                            samples, want_grad);
  LossResult res;
  res.reconstruction = dec.reconstruction;
  std::vector<double> d_priors(detail::prior_parameter_count(model.priors), 0.0);
  if (model.prior_kind == PriorKind::gmm) {
    detail::gmm_kl_rows(post.mean, post.sigma, model.priors, noise, samples, weight, want_grad,
                        res.kl_per_component, want_grad ? &dec.d_mu : nullptr,
                        want_grad ? &dec.d_sigma : nullptr, d_priors.data());
  } else {
    res.kl_per_component.assign(n, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t c = 0; c < l; ++c) {
        const double mu = post.mean(i, c), s = post.sigma(i, c);
        res.kl_per_component[i] += kl_gauss_std_normal(mu, s * s);
        if (want_grad) {
          dec.d_mu(i, c) += weight * mu;
          dec.d_sigma(i, c) += weight * (s - 1.0 / s);
        }
      }
    }
  }
  for (double v : res.kl_per_component) res.kl += v;
  detail::check_finite_term(res.reconstruction, "reconstruction");
  detail::check_finite_term(res.kl, "KL");
  res.loss = res.reconstruction + weight * res.kl;
  if (!want_grad) return res;

  Matrix d_out(2 * n, l);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t c = 0; c < l; ++c) {
      d_out(i, c) = dec.d_mu(i, c);
      d_out(n + i, c) = dec.d_sigma(i, c) * sigmoid(post.raw(i, c));
    }
  }
  auto enc_bwd = mlp_backward(model.encoder, post.forward.cache, d_out);
  res.grad.reserve(parameter_count(model));
  enc_bwd.param_grads.flatten_into(res.grad);
  dec.decoder_grads.flatten_into(res.grad);
  res.grad.insert(res.grad.end(), d_priors.begin(), d_priors.end());
  return res;
}

inline LossResult vae_loss(const VaeModel& model, const Matrix& x, std::size_t samples, Rng& rng,
                           bool want_grad = true) {
  const auto noise = draw_noise(samples, model.n(), x.cols(), rng);
  return vae_loss(model, x, noise, want_grad);
}

// ---------------------------------------------------------------------------

inline PosteriorSummary posterior_summary(const LatentBank& bank) {
  PosteriorSummary s{bank.z_mu, bank.z_mu, bank.z_mu};
  for (std::size_t i = 0; i < bank.components(); ++i) {
    const double half = kZ95 * bank.sigma(i);
    for (std::size_t c = 0; c < bank.length(); ++c) {
      s.lower95(i, c) -= half;
      s.upper95(i, c) += half;
    }
  }
  return s;
}

// Per-column bands from the encoder's posterior.
inline PosteriorSummary posterior_summary(const VaeModel& model, const Matrix& x) {
  auto post = encode(model, x);
  PosteriorSummary s{post.mean, post.mean, post.mean};
  for (std::size_t i = 0; i < post.mean.rows(); ++i) {
    for (std::size_t c = 0; c < post.mean.cols(); ++c) {
      const double half = kZ95 * post.sigma(i, c);
      s.lower95(i, c) -= half;
      s.upper95(i, c) += half;
    }
  }
  return s;
}

}  // namespace halfvae
