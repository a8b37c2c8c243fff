#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <type_traits>
#include <vector>

#include "halfvae/adam.hpp"
#include "halfvae/errors.hpp"
#include "halfvae/matrix.hpp"
#include "halfvae/models.hpp"
#include "halfvae/rng.hpp"

namespace halfvae {

struct TrainOptions {
  std::size_t epochs = 3000;
  double learning_rate = 1e-2;
  std::size_t train_samples = 8;
  std::size_t eval_samples = 1024;
  // KL weight ramps linearly from 0 to lambda over this fraction of epochs.
  double warmup_fraction = 0.1;
  std::uint64_t seed = 0;
  std::size_t snapshot_every = 0;  // 0 disables snapshots
};

struct EpochRecord {
  double loss = 0.0;
  double reconstruction = 0.0;
  double kl = 0.0;
};

struct TrainResult {
  std::vector<EpochRecord> curve;
  EpochRecord final_eval;  // full-lambda loss at eval_samples draws
  std::size_t steps = 0;
};

template <class Model>
using SnapshotFn = std::function<void(std::size_t epoch, const Model&)>;

template <class Model>
LossResult model_loss(const Model& model, const Matrix& x, std::span<const double> noise,
                      bool want_grad, std::optional<double> kl_weight = std::nullopt) {
  if constexpr (std::is_same_v<Model, HalfVaeModel>) {
    return half_vae_loss(model, x, noise, want_grad, kl_weight);
  } else {
    return vae_loss(model, x, noise, want_grad, kl_weight);
  }
}

inline double kl_weight_at(std::size_t epoch, double lambda, const TrainOptions& opt) {
  const double ramp = std::ceil(opt.warmup_fraction * static_cast<double>(opt.epochs));
  if (ramp <= 0.0) return lambda;
  return lambda * std::min(1.0, static_cast<double>(epoch) / ramp);
}

// Loss at the model's own lambda averaged over `samples` draws, evaluated in
// chunks so memory stays bounded for large sample counts.
template <class Model>
EpochRecord estimate_loss(const Model& model, const Matrix& x, std::size_t samples, Rng& rng,
                          std::size_t chunk = 32) {
  EpochRecord acc;
  std::size_t done = 0;
  while (done < samples) {
    const std::size_t s = std::min(chunk, samples - done);
    const auto noise = draw_noise(s, model.n(), x.cols(), rng);
    const auto r = model_loss(model, x, noise, false);
    const double w = static_cast<double>(s) / static_cast<double>(samples);
    acc.loss += w * r.loss;
    acc.reconstruction += w * r.reconstruction;
    acc.kl += w * r.kl;
    done += s;
  }
  return acc;
}

// Full-batch training with one Adam optimizer over every parameter group.
// Noise for step e is drawn from stream (seed, 7); evaluation draws from (seed, 8).
template <class Model>
TrainResult train(Model& model, const Matrix& x, const TrainOptions& opt,
                  const SnapshotFn<Model>& on_snapshot = {}) {
  if (opt.epochs == 0) throw ConfigError("train: epochs must be >= 1");
  if (opt.train_samples == 0) throw ConfigError("train: train_samples must be >= 1");
  model.validate();
  const std::size_t n = model.n(), l = x.cols();
  Rng noise_rng(opt.seed, 7);
  std::vector<double> params = flatten(model);
  AdamState adam(params.size(), AdamHyper{opt.learning_rate});
  TrainResult result;
  result.curve.reserve(opt.epochs);

  for (std::size_t epoch = 0; epoch < opt.epochs; ++epoch) {
    const double weight = kl_weight_at(epoch, model.lambda, opt);
    const auto noise = draw_noise(opt.train_samples, n, l, noise_rng);
    LossResult loss;
    try {
      loss = model_loss(model, x, noise, true, weight);
      adam_step(adam, params, loss.grad);
    } catch (const NumericError& e) {
      throw NumericError("epoch " + std::to_string(epoch) + ": " + e.what());
    }
    assign(model, params);
    result.curve.push_back({loss.loss, loss.reconstruction, loss.kl});
    ++result.steps;
    if (on_snapshot && opt.snapshot_every > 0 && (epoch + 1) % opt.snapshot_every == 0) {
      on_snapshot(epoch + 1, model);
    }
  }

  Rng eval_rng(opt.seed, 8);
  result.final_eval = estimate_loss(model, x, std::max<std::size_t>(1, opt.eval_samples), eval_rng);
  return result;
}

}  // namespace halfvae
