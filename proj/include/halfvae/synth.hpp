#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <numbers>
#include <string>
#include <vector>

#include "halfvae/errors.hpp"
#include "halfvae/matrix.hpp"
#include "halfvae/mlp.hpp"
#include "halfvae/rng.hpp"

namespace halfvae {

enum class SourceKind { laplace, uniform, bimodal_gmm, sine_plus_noise };

inline std::string to_string(SourceKind k) {
  switch (k) {
    case SourceKind::laplace: return "laplace";
    case SourceKind::uniform: return "uniform";
    case SourceKind::bimodal_gmm: return "bimodal_gmm";
    case SourceKind::sine_plus_noise: return "sine_plus_noise";
  }
  return "laplace";
}

inline SourceKind source_kind_from_string(const std::string& s) {
  if (s == "laplace") return SourceKind::laplace;
  if (s == "uniform") return SourceKind::uniform;
  if (s == "bimodal_gmm") return SourceKind::bimodal_gmm;
  if (s == "sine_plus_noise") return SourceKind::sine_plus_noise;
  throw ConfigError("unknown source kind '" + s + "'");
}

// Parameters by kind:
//   laplace          {location, scale}
//   uniform          {low, high}
//   bimodal_gmm      {offset, scale}  -> equal-weight mixture of N(+-offset, scale^2)
//   sine_plus_noise  {amplitude, cycles_per_sample, noise_scale}
struct SourceSpec {
  SourceKind kind = SourceKind::laplace;
  std::vector<double> params{0.0, 1.0};
  std::size_t length = 0;

  void validate() const {
    if (length == 0) throw ConfigError("source spec: length must be >= 1");
    if (params.size() != expected_params(kind)) {
      throw ConfigError("source spec '" + to_string(kind) + "': expected " +
                        std::to_string(expected_params(kind)) + " params, got " +
                        std::to_string(params.size()));
    }
    for (double p : params) {
      if (!std::isfinite(p)) throw ConfigError("source spec: non-finite parameter");
    }
    switch (kind) {
      case SourceKind::laplace:
        if (!(params[1] > 0.0)) throw ConfigError("laplace source: scale must be > 0");
        break;
      case SourceKind::uniform:
        if (!(params[1] > params[0])) throw ConfigError("uniform source: high must exceed low");
        break;
      case SourceKind::bimodal_gmm:
        if (!(params[1] > 0.0)) throw ConfigError("bimodal_gmm source: scale must be > 0");
        break;
      case SourceKind::sine_plus_noise:
        if (!(params[2] >= 0.0)) throw ConfigError("sine_plus_noise source: noise scale must be >= 0");
        break;
    }
  }

  static std::size_t expected_params(SourceKind k) { return k == SourceKind::sine_plus_noise ? 3 : 2; }
};

// Laplace(0, 1), uniform(-sqrt 3, sqrt 3), equal mixture of N(+-1.5, 0.4^2).
inline std::vector<SourceSpec> default_source_specs(std::size_t length) {
  const double r3 = std::sqrt(3.0);
  return {
      {SourceKind::laplace, {0.0, 1.0}, length},
      {SourceKind::uniform, {-r3, r3}, length},
      {SourceKind::bimodal_gmm, {1.5, 0.4}, length},
  };
}

inline double draw_source(const SourceSpec& spec, std::size_t t, Rng& rng) {
  const auto& p = spec.params;
  switch (spec.kind) {
    case SourceKind::laplace: {
      const double u = rng.uniform() - 0.5;
      const double mag = -std::log1p(-2.0 * std::abs(u));
      return p[0] + p[1] * (u < 0.0 ? -mag : mag);
    }
    case SourceKind::uniform:
      return rng.uniform(p[0], p[1]);
    case SourceKind::bimodal_gmm: {
      const double centre = rng.uniform() < 0.5 ? -p[0] : p[0];
      return centre + p[1] * rng.normal();
    }
    case SourceKind::sine_plus_noise:
      return p[0] * std::sin(2.0 * std::numbers::pi * p[1] * static_cast<double>(t)) +
             p[2] * rng.normal();
  }
  return 0.0;
}

// Row i comes from its own stream (seed, 100 + i).
inline Matrix generate_sources(const std::vector<SourceSpec>& specs, std::uint64_t seed) {
  if (specs.empty()) throw ConfigError("generate_sources: need at least one source spec");
  const std::size_t length = specs.front().length;
  for (const auto& s : specs) {
    s.validate();
    if (s.length != length) throw ConfigError("generate_sources: source specs differ in length");
  }
  Matrix z(specs.size(), length);
  for (std::size_t i = 0; i < specs.size(); ++i) {
    Rng rng(seed, 100 + i);
    for (std::size_t t = 0; t < length; ++t) z(i, t) = draw_source(specs[i], t, rng);
  }
  return z;
}

enum class MixingKind { linear, mlp_nonlinear };

inline std::string to_string(MixingKind k) {
  return k == MixingKind::linear ? "linear" : "mlp_nonlinear";
}

inline MixingKind mixing_kind_from_string(const std::string& s) {
  if (s == "linear") return MixingKind::linear;
  if (s == "mlp_nonlinear") return MixingKind::mlp_nonlinear;
  throw ConfigError("unknown mixing kind '" + s + "'");
}

struct MixingMap {
  MixingKind kind = MixingKind::linear;
  Matrix matrix;    // [M x N], linear kind
  MlpParams mlp;    // N -> M, nonlinear kind
  std::uint64_t seed = 0;

  std::size_t m() const { return kind == MixingKind::linear ? matrix.rows() : mlp.out_dim(); }
  std::size_t n() const { return kind == MixingKind::linear ? matrix.cols() : mlp.in_dim(); }
};

inline constexpr double kMaxMixingCondition = 100.0;

// Ratio of extreme singular values; infinity when rank-deficient.
inline double condition_number(const Matrix& a) {
  Eigen::MatrixXd e(a.rows(), a.cols());
  for (std::size_t r = 0; r < a.rows(); ++r)
    for (std::size_t c = 0; c < a.cols(); ++c) e(r, c) = a(r, c);
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(e);
  const auto& sv = svd.singularValues();
  const double smin = sv(sv.size() - 1);
  if (smin <= 0.0) return std::numeric_limits<double>::infinity();
  return sv(0) / smin;
}

inline MixingMap make_mixing(std::size_t m, std::size_t n, MixingKind kind, std::uint64_t seed) {
  if (n == 0) throw ConfigError("make_mixing: n must be >= 1");
  if (m < n) {
    throw UnderdeterminedError("make_mixing: m=" + std::to_string(m) + " < n=" + std::to_string(n) +
                               " (underdetermined mixing is not supported)");
  }
  MixingMap map;
  map.kind = kind;
  map.seed = seed;
  Rng rng(seed, 200);
  if (kind == MixingKind::linear) {
    for (int attempt = 0; attempt < 100000; ++attempt) {
      Matrix a(m, n);
      for (auto& v : a.flat()) v = rng.uniform(-1.0, 1.0);
      if (condition_number(a) <= kMaxMixingCondition) {
        map.matrix = std::move(a);
        return map;
      }
    }
    throw NumericError("make_mixing: no well-conditioned matrix found");
  }
  // Experimental: invertibility is not guaranteed.
  map.mlp = make_mlp({n, 16, m}, Activation::tanh, rng);
  return map;
}

inline Matrix mix(const MixingMap& map, const Matrix& z) {
  if (z.rows() != map.n()) {
    throw ShapeError("mix: sources have " + std::to_string(z.rows()) + " rows, map expects " +
                     std::to_string(map.n()));
  }
  if (map.kind == MixingKind::linear) return matmul(map.matrix, z);
  return mlp_forward(map.mlp, z).output;
}

}  // namespace halfvae
