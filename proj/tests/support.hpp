#pragma once

#include <cstdint>
#include <functional>
#include <vector>

#include "halfvae/grad_check.hpp"
#include "halfvae/matrix.hpp"
#include "halfvae/models.hpp"
#include "halfvae/rng.hpp"

namespace testing_support {

using namespace halfvae;

inline Matrix random_matrix(std::size_t r, std::size_t c, Rng& rng, double sd = 1.0) {
  Matrix m(r, c);
  for (auto& v : m.flat()) v = sd * rng.normal();
  return m;
}

inline GmmPrior random_prior(std::size_t k, Rng& rng) {
  GmmPrior p;
  for (std::size_t j = 0; j < k; ++j) {
    p.raw_weights.push_back(rng.normal());
    p.raw_means.push_back(rng.uniform(-2.0, 2.0));
    p.raw_log_scales.push_back(rng.uniform(-0.7, 0.5));
  }
  return p;
}

// Randomizes every prior so gradient checks do not sit on the symmetric init.
template <class Model>
void perturb_priors(Model& m, Rng& rng) {
  for (auto& p : m.priors) p = random_prior(p.components(), rng);
}

// Frozen-noise loss of `model` as a function of its flat parameter vector.
template <class Model>
GradFunction loss_function(const Model& model, const Matrix& x, std::vector<double> noise) {
  return [model = Model(model), x, noise = std::move(noise)](std::span<const double> p, std::span<double> g) mutable {
    assign(model, p);
    LossResult r;
    if constexpr (std::is_same_v<Model, HalfVaeModel>) {
      r = half_vae_loss(model, x, noise, true);
    } else {
      r = vae_loss(model, x, noise, true);
    }
    std::copy(r.grad.begin(), r.grad.end(), g.begin());
    return r.loss;
  };
}

// Restricts a full-vector gradient function to coordinates [begin, end).
inline GradFunction restrict(GradFunction f, std::vector<double> base, std::size_t begin, std::size_t end) {
  return [f = std::move(f), base = std::move(base), begin, end](std::span<const double> p,
                                                                std::span<double> g) mutable {
    std::copy(p.begin(), p.end(), base.begin() + static_cast<std::ptrdiff_t>(begin));
    std::vector<double> full(base.size());
    const double v = f(base, full);
    std::copy(full.begin() + static_cast<std::ptrdiff_t>(begin), full.begin() + static_cast<std::ptrdiff_t>(end), g.begin());
    return v;
  };
}

}  // namespace testing_support
