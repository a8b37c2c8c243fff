#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "halfvae/errors.hpp"
#include "halfvae/io.hpp"
#include "halfvae/mlp.hpp"
#include "halfvae/models.hpp"
#include "halfvae/synth.hpp"
#include "halfvae/train.hpp"

namespace halfvae {

enum class ModelKind { half_vae, vae_gmm, vanilla_vae };

inline std::string to_string(ModelKind k) {
  switch (k) {
    case ModelKind::half_vae: return "half_vae";
    case ModelKind::vae_gmm: return "vae_gmm";
    case ModelKind::vanilla_vae: return "vanilla_vae";
  }
  return "half_vae";
}

inline ModelKind model_kind_from_string(const std::string& s) {
  if (s == "half_vae") return ModelKind::half_vae;
  if (s == "vae_gmm") return ModelKind::vae_gmm;
  if (s == "vanilla_vae") return ModelKind::vanilla_vae;
  throw ConfigError("config field 'model': unknown model '" + s +
                    "' (expected half_vae, vae_gmm or vanilla_vae)");
}

inline constexpr double kDefaultLambda = 0.3;

struct ExperimentConfig {
  std::size_t n = 3;
  std::size_t m = 3;
  std::size_t l = 500;
  std::size_t k = 3;
  ModelKind model = ModelKind::half_vae;
  double lambda = kDefaultLambda;
  std::size_t epochs = 3000;
  double learning_rate = 1e-2;
  std::size_t train_samples = 8;
  std::size_t eval_samples = 1024;
  std::optional<std::uint64_t> seed;
  std::vector<SourceSpec> sources;  // empty: defaults cycled to length n
  MixingKind mixing_kind = MixingKind::linear;
  double warmup_fraction = 0.1;
  bool whiten = true;
  std::vector<std::size_t> hidden{32, 32};
  Activation activation = Activation::tanh;

  std::uint64_t require_seed() const {
    if (!seed) throw ConfigError("config field 'seed': required (set it in the config or pass --seed)");
    return *seed;
  }

  // Source specs with length l; defaults (laplace, uniform, bimodal) cycle when
  // none are configured.
  std::vector<SourceSpec> source_specs() const {
    std::vector<SourceSpec> specs = sources;
    if (specs.empty()) {
      const auto defaults = default_source_specs(l);
      for (std::size_t i = 0; i < n; ++i) specs.push_back(defaults[i % defaults.size()]);
    }
    for (auto& s : specs) s.length = l;
    return specs;
  }

  ArchitectureOptions architecture() const { return {hidden, activation, lambda}; }

  TrainOptions train_options() const {
    TrainOptions o;
    o.epochs = epochs;
    o.learning_rate = learning_rate;
    o.train_samples = train_samples;
    o.eval_samples = eval_samples;
    o.warmup_fraction = warmup_fraction;
    o.seed = require_seed();
    return o;
  }

  void validate() const {
    auto positive = [](std::size_t v, const char* field) {
      if (v == 0) throw ConfigError(std::string("config field '") + field + "': must be >= 1");
    };
    positive(n, "n");
    positive(m, "m");
    positive(l, "l");
    positive(k, "k");
    positive(epochs, "epochs");
    positive(train_samples, "train_samples");
    positive(eval_samples, "eval_samples");
    if (m < n) {
      throw UnderdeterminedError("config field 'm': m=" + std::to_string(m) + " < n=" +
                                 std::to_string(n) + " is underdetermined and not supported");
    }
    if (!(lambda >= 0.0) || !std::isfinite(lambda)) {
      throw ConfigError("config field 'lambda': must be a finite value >= 0");
    }
    if (!(learning_rate > 0.0) || !std::isfinite(learning_rate)) {
      throw ConfigError("config field 'learning_rate': must be > 0");
    }
    if (!(warmup_fraction >= 0.0 && warmup_fraction <= 1.0)) {
      throw ConfigError("config field 'warmup_fraction': must lie in [0, 1]");
    }
    if (!sources.empty() && sources.size() != n) {
      throw ConfigError("config field 'sources': " + std::to_string(sources.size()) +
                        " specs given for n=" + std::to_string(n));
    }
    for (const auto& s : source_specs()) {
      try {
        s.validate();
      } catch (const ConfigError& e) {
        throw ConfigError(std::string("config field 'sources': ") + e.what());
      }
    }
    for (std::size_t h : hidden) positive(h, "hidden");
  }
};

inline json to_json(const ExperimentConfig& c) {
  json sources = json::array();
  for (const auto& s : c.sources) sources.push_back({{"kind", to_string(s.kind)}, {"params", s.params}});
  json j{{"n", c.n},
         {"m", c.m},
         {"l", c.l},
         {"k", c.k},
         {"model", to_string(c.model)},
         {"lambda", c.lambda},
         {"epochs", c.epochs},
         {"learning_rate", c.learning_rate},
         {"train_samples", c.train_samples},
         {"eval_samples", c.eval_samples},
         {"mixing_kind", to_string(c.mixing_kind)},
         {"warmup_fraction", c.warmup_fraction},
         {"whiten", c.whiten},
         {"hidden", c.hidden},
         {"activation", to_string(c.activation)},
         {"sources", sources}};
  j["seed"] = c.seed ? json(*c.seed) : json(nullptr);
  return j;
}

namespace detail {

template <class T>
T config_field(const json& j, const char* field, T fallback) {
  if (!j.contains(field) || j.at(field).is_null()) return fallback;
  try {
    return j.at(field).get<T>();
  } catch (const json::exception&) {
    throw ConfigError(std::string("config field '") + field + "': wrong type");
  }
}

inline std::size_t config_count(const json& j, const char* field, std::size_t fallback) {
  if (!j.contains(field) || j.at(field).is_null()) return fallback;
  const auto& v = j.at(field);
  if (!v.is_number_integer() || v.get<long long>() < 0) {
    throw ConfigError(std::string("config field '") + field + "': must be a non-negative integer");
  }
  return v.get<std::size_t>();
}

}  // namespace detail

inline ExperimentConfig config_from_json(const json& j) {
  if (!j.is_object()) throw ConfigError("config: top level must be a JSON object");
  static const std::vector<std::string> known{
      "n", "m", "l", "k", "model", "lambda", "epochs", "learning_rate", "train_samples",
      "eval_samples", "seed", "sources", "mixing_kind", "warmup_fraction", "whiten", "hidden",
      "activation"};
  for (const auto& [key, _] : j.items()) {
    if (std::find(known.begin(), known.end(), key) == known.end()) {
      throw ConfigError("config field '" + key + "': unknown field");
    }
  }
  ExperimentConfig c;
  c.n = detail::config_count(j, "n", c.n);
  c.m = detail::config_count(j, "m", c.m);
  c.l = detail::config_count(j, "l", c.l);
  c.k = detail::config_count(j, "k", c.k);
  c.model = model_kind_from_string(detail::config_field<std::string>(j, "model", to_string(c.model)));
  c.lambda = detail::config_field<double>(j, "lambda", c.lambda);
  c.epochs = detail::config_count(j, "epochs", c.epochs);
  c.learning_rate = detail::config_field<double>(j, "learning_rate", c.learning_rate);
  c.train_samples = detail::config_count(j, "train_samples", c.train_samples);
  c.eval_samples = detail::config_count(j, "eval_samples", c.eval_samples);
  if (j.contains("seed") && !j.at("seed").is_null()) {
    if (!j.at("seed").is_number_unsigned()) {
      throw ConfigError("config field 'seed': must be a non-negative integer");
    }
    c.seed = j.at("seed").get<std::uint64_t>();
  }
  try {
    c.mixing_kind = mixing_kind_from_string(
        detail::config_field<std::string>(j, "mixing_kind", to_string(c.mixing_kind)));
    c.activation = activation_from_string(
        detail::config_field<std::string>(j, "activation", to_string(c.activation)));
  } catch (const ConfigError& e) {
    throw ConfigError(std::string("config field 'mixing_kind'/'activation': ") + e.what());
  }
  c.warmup_fraction = detail::config_field<double>(j, "warmup_fraction", c.warmup_fraction);
  c.whiten = detail::config_field<bool>(j, "whiten", c.whiten);
  c.hidden = detail::config_field<std::vector<std::size_t>>(j, "hidden", c.hidden);
  if (j.contains("sources") && !j.at("sources").is_null()) {
    for (const auto& s : j.at("sources")) {
      try {
        SourceSpec spec;
        spec.kind = source_kind_from_string(s.at("kind").get<std::string>());
        spec.params = s.at("params").get<std::vector<double>>();
        spec.length = c.l;
        c.sources.push_back(spec);
      } catch (const json::exception& e) {
        throw ConfigError(std::string("config field 'sources': ") + e.what());
      } catch (const ConfigError& e) {
        throw ConfigError(std::string("config field 'sources': ") + e.what());
      }
    }
  }
  c.validate();
  return c;
}

inline ExperimentConfig load_config(const fs::path& path) {
  json j;
  try {
    j = json::parse(read_text(path));
  } catch (const json::exception& e) {
    throw ConfigError(path.string() + ": invalid JSON: " + e.what());
  }
  return config_from_json(j);
}

inline std::string config_hash(const ExperimentConfig& c) { return fnv1a_hex(to_json(c).dump()); }

}  // namespace halfvae
