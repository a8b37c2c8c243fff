#pragma once

#include <cmath>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "halfvae/errors.hpp"

namespace halfvae {

struct AdamHyper {
  double learning_rate = 1e-2;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

struct AdamState {
  std::vector<double> first_moment;
  std::vector<double> second_moment;
  std::size_t timestep = 0;
  AdamHyper hyper;

  AdamState() = default;
  explicit AdamState(std::size_t n, AdamHyper h = {})
      : first_moment(n, 0.0), second_moment(n, 0.0), hyper(h) {}
};

// One bias-corrected Adam step applied in place.
inline void adam_step(AdamState& state, std::span<double> params, std::span<const double> grads) {
  const std::size_t n = state.first_moment.size();
  if (params.size() != n || grads.size() != n || state.second_moment.size() != n) {
    throw ShapeError("adam_step: params " + std::to_string(params.size()) + ", grads " +
                     std::to_string(grads.size()) + ", state " + std::to_string(n));
  }
  for (std::size_t i = 0; i < n; ++i) {
    if (!std::isfinite(grads[i])) {
      throw NumericError("adam_step: non-finite gradient at index " + std::to_string(i));
    }
  }
  const auto& h = state.hyper;
  state.timestep += 1;
  const double t = static_cast<double>(state.timestep);
  const double c1 = 1.0 - std::pow(h.beta1, t);
  const double c2 = 1.0 - std::pow(h.beta2, t);
  for (std::size_t i = 0; i < n; ++i) {
    double& m = state.first_moment[i];
    double& v = state.second_moment[i];
    m = h.beta1 * m + (1.0 - h.beta1) * grads[i];
    v = h.beta2 * v + (1.0 - h.beta2) * grads[i] * grads[i];
    params[i] -= h.learning_rate * (m / c1) / (std::sqrt(v / c2) + h.epsilon);
  }
}

}  // namespace halfvae
