#pragma once

#include <cmath>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "halfvae/errors.hpp"
#include "halfvae/matrix.hpp"
#include "halfvae/rng.hpp"

namespace halfvae {

enum class Activation { tanh, relu, identity };

inline std::string to_string(Activation a) {
  switch (a) {
    case Activation::tanh: return "tanh";
    case Activation::relu: return "relu";
    case Activation::identity: return "identity";
  }
  return "identity";
}

inline Activation activation_from_string(const std::string& s) {
  if (s == "tanh") return Activation::tanh;
  if (s == "relu") return Activation::relu;
  if (s == "identity") return Activation::identity;
  throw ConfigError("unknown activation '" + s + "'");
}

struct DenseLayer {
  Matrix weight;             // [out x in]
  std::vector<double> bias;  // [out]

  std::size_t in_dim() const { return weight.cols(); }
  std::size_t out_dim() const { return weight.rows(); }

  friend bool operator==(const DenseLayer&, const DenseLayer&) = default;
};

// Fully connected network applied column-wise. Hidden layers use
// `hidden_activation`, the last layer `output_activation` (identity in models).
struct MlpParams {
  std::vector<DenseLayer> layers;
  Activation hidden_activation = Activation::tanh;
  Activation output_activation = Activation::identity;

  std::size_t in_dim() const { return layers.empty() ? 0 : layers.front().in_dim(); }
  std::size_t out_dim() const { return layers.empty() ? 0 : layers.back().out_dim(); }

  std::size_t parameter_count() const {
    std::size_t n = 0;
    for (const auto& l : layers) n += l.weight.size() + l.bias.size();
    return n;
  }

  void validate() const {
    if (layers.empty()) throw ShapeError("MlpParams: no layers");
    for (std::size_t i = 0; i < layers.size(); ++i) {
      const auto& l = layers[i];
      if (l.weight.empty() || l.bias.size() != l.out_dim()) {
        throw ShapeError("MlpParams: layer " + std::to_string(i) + " weight/bias mismatch");
      }
      if (i + 1 < layers.size() && l.out_dim() != layers[i + 1].in_dim()) {
        throw ShapeError("MlpParams: layer " + std::to_string(i) + " output " +
                         std::to_string(l.out_dim()) + " does not chain into input " +
                         std::to_string(layers[i + 1].in_dim()));
      }
    }
  }

  // Same topology, all parameters zero. Used as the gradient container.
  MlpParams zeros_like() const {
    MlpParams out;
    out.hidden_activation = hidden_activation;
    out.output_activation = output_activation;
    for (const auto& l : layers) {
      out.layers.push_back({Matrix(l.weight.rows(), l.weight.cols()),
                            std::vector<double>(l.bias.size(), 0.0)});
    }
    return out;
  }

  // Appends weights (row-major) then bias, layer by layer.
  void flatten_into(std::vector<double>& out) const {
    for (const auto& l : layers) {
      out.insert(out.end(), l.weight.values().begin(), l.weight.values().end());
      out.insert(out.end(), l.bias.begin(), l.bias.end());
    }
  }

  // Inverse of flatten_into; returns the number of values consumed.
  std::size_t assign_from(std::span<const double> src) {
    if (src.size() < parameter_count()) throw ShapeError("MlpParams::assign_from: too few values");
    std::size_t pos = 0;
    for (auto& l : layers) {
      for (auto& w : l.weight.flat()) w = src[pos++];
      for (auto& b : l.bias) b = src[pos++];
    }
    return pos;
  }

  friend bool operator==(const MlpParams&, const MlpParams&) = default;
};

// dims = {in, hidden..., out}; Xavier-uniform weights, zero biases.
inline MlpParams make_mlp(std::span<const std::size_t> dims, Activation hidden, Rng& rng) {
  if (dims.size() < 2) throw ShapeError("make_mlp: need at least input and output dims");
  MlpParams p;
  p.hidden_activation = hidden;
  for (std::size_t i = 0; i + 1 < dims.size(); ++i) {
    const std::size_t in = dims[i], out = dims[i + 1];
    if (in == 0 || out == 0) throw ShapeError("make_mlp: zero-width layer");
    const double limit = std::sqrt(6.0 / static_cast<double>(in + out));
    DenseLayer layer{Matrix(out, in), std::vector<double>(out, 0.0)};
    for (auto& w : layer.weight.flat()) w = rng.uniform(-limit, limit);
    p.layers.push_back(std::move(layer));
  }
  return p;
}

inline MlpParams make_mlp(std::initializer_list<std::size_t> dims, Activation hidden, Rng& rng) {
  std::vector<std::size_t> v(dims);
  return make_mlp(std::span<const std::size_t>(v), hidden, rng);
}

struct MlpCache {
  std::vector<Matrix> inputs;  // input to layer i (post-activation of i-1)
  std::vector<Matrix> pre;     // pre-activation of layer i
  std::vector<Matrix> post;    // output of layer i
};

struct MlpForward {
  Matrix output;  // [out_dim x batch]
  MlpCache cache;
};

struct MlpBackward {
  MlpParams param_grads;
  Matrix input_grads;  // [in_dim x batch]
};

namespace detail {

// tanh from one vectorized exp: sign(x) (1 - e) / (1 + e) with e = exp(-2|x|).
// std::tanh is scalar and dominated the forward pass; absolute error here stays
// at a few ulp of 1.
inline void tanh_inplace(std::span<double> v) {
  Eigen::Map<Eigen::ArrayXd> a(v.data(), static_cast<Eigen::Index>(v.size()));
  const Eigen::ArrayXd e = (-2.0 * a.abs()).exp();
  a = a.sign() * (1.0 - e) / (1.0 + e);
}

inline void apply_activation(Activation a, const Matrix& pre, Matrix& post) {
  post = pre;
  switch (a) {
    case Activation::tanh:
      tanh_inplace(post.flat());
      break;
    case Activation::relu:
      for (auto& v : post.flat()) v = v > 0.0 ? v : 0.0;
      break;
    case Activation::identity:
      break;
  }
}

// grad <- grad * act'(pre), using post where cheaper.
inline void activation_backward(Activation a, const Matrix& pre, const Matrix& post, Matrix& grad) {
  auto g = grad.flat();
  switch (a) {
    case Activation::tanh: {
      auto y = post.flat();
      for (std::size_t i = 0; i < g.size(); ++i) g[i] *= 1.0 - y[i] * y[i];
      break;
    }
    case Activation::relu: {
      auto x = pre.flat();
      for (std::size_t i = 0; i < g.size(); ++i) g[i] = x[i] > 0.0 ? g[i] : 0.0;
      break;
    }
    case Activation::identity:
      break;
  }
}

}  // namespace detail

inline MlpForward mlp_forward(const MlpParams& params, const Matrix& input) {
  params.validate();
  if (input.rows() != params.in_dim()) {
    throw ShapeError("mlp_forward: input has " + std::to_string(input.rows()) +
                     " rows, network expects " + std::to_string(params.in_dim()));
  }
  MlpForward fwd;
  const std::size_t n = params.layers.size();
  fwd.cache.inputs.reserve(n);
  fwd.cache.pre.reserve(n);
  fwd.cache.post.reserve(n);
  Matrix current = input;
  for (std::size_t i = 0; i < n; ++i) {
    const auto& layer = params.layers[i];
    Matrix pre = matmul(layer.weight, current);
    for (std::size_t r = 0; r < pre.rows(); ++r) {
      const double b = layer.bias[r];
      for (auto& v : pre.row(r)) v += b;
    }
    const Activation act = (i + 1 == n) ? params.output_activation : params.hidden_activation;
    Matrix post;
    detail::apply_activation(act, pre, post);
    fwd.cache.inputs.push_back(std::move(current));
    fwd.cache.pre.push_back(std::move(pre));
    current = post;
    fwd.cache.post.push_back(std::move(post));
  }
  fwd.output = std::move(current);
  return fwd;
}

inline MlpBackward mlp_backward(const MlpParams& params, const MlpCache& cache,
                                const Matrix& upstream_grad) {
  const std::size_t n = params.layers.size();
  if (cache.pre.size() != n || cache.inputs.size() != n || cache.post.size() != n) {
    throw ShapeError("mlp_backward: cache does not match network depth");
  }
  if (upstream_grad.rows() != params.out_dim() ||
      upstream_grad.cols() != cache.post.back().cols()) {
    throw ShapeError("mlp_backward: upstream grad " + upstream_grad.shape_str() +
                     " does not match output " + cache.post.back().shape_str());
  }
  MlpBackward out{params.zeros_like(), {}};
  Matrix grad = upstream_grad;
  for (std::size_t idx = n; idx-- > 0;) {
    const auto& layer = params.layers[idx];
    const Activation act = (idx + 1 == n) ? params.output_activation : params.hidden_activation;
    detail::activation_backward(act, cache.pre[idx], cache.post[idx], grad);
    auto& g = out.param_grads.layers[idx];
    g.weight = matmul_nt(grad, cache.inputs[idx]);
    for (std::size_t r = 0; r < grad.rows(); ++r) {
      double s = 0.0;
      for (double v : grad.row(r)) s += v;
      g.bias[r] = s;
    }
    grad = matmul_tn(layer.weight, grad);
  }
  out.input_grads = std::move(grad);
  return out;
}

}  // namespace halfvae
