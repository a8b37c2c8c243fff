#pragma once

#include <charconv>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <system_error>
#include <vector>

#include <json.hpp>

#include "halfvae/distributions.hpp"
#include "halfvae/errors.hpp"
#include "halfvae/matrix.hpp"
#include "halfvae/mlp.hpp"
#include "halfvae/models.hpp"
#include "halfvae/synth.hpp"
#include "halfvae/whitening.hpp"

namespace halfvae {

using json = nlohmann::json;
namespace fs = std::filesystem;

// Shortest representation that parses back to the same double.
inline std::string format_double(double v) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  if (ec != std::errc()) throw IoError("format_double: conversion failed");
  return std::string(buf, ptr);
}

inline double parse_double(std::string_view s, const std::string& context) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  double v = 0.0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size()) {
    throw IoError(context + ": cannot parse number '" + std::string(s) + "'");
  }
  return v;
}

inline std::string read_text(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline void write_text(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) {
    std::error_code ec;
    fs::create_directories(path.parent_path(), ec);
    if (ec) throw IoError("cannot create directory " + path.parent_path().string() + ": " + ec.message());
  }
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());
  out << text;
  if (!out) throw IoError("write failed for " + path.string());
}

// ---------------------------------------------------------------------------
// Signal CSV: one column per matrix row, one line per sample, header
// "<prefix>1,<prefix>2,...".

inline std::string signal_csv(const Matrix& m, const std::string& prefix) {
  std::string out;
  for (std::size_t r = 0; r < m.rows(); ++r) {
    if (r) out += ',';
    out += prefix + std::to_string(r + 1);
  }
  out += '\n';
  for (std::size_t c = 0; c < m.cols(); ++c) {
    for (std::size_t r = 0; r < m.rows(); ++r) {
      if (r) out += ',';
      out += format_double(m(r, c));
    }
    out += '\n';
  }
  return out;
}

inline void write_signal_csv(const fs::path& path, const Matrix& m, const std::string& prefix) {
  write_text(path, signal_csv(m, prefix));
}

inline std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> cells;
  std::string cell;
  std::istringstream ls(line);
  while (std::getline(ls, cell, ',')) cells.push_back(cell);
  if (!line.empty() && line.back() == ',') cells.emplace_back();
  return cells;
}

struct Table {
  std::vector<std::string> header;
  std::vector<std::vector<double>> columns;
};

inline Table read_csv_table(const fs::path& path) {
  std::istringstream in(read_text(path));
  std::string line;
  Table t;
  if (!std::getline(in, line)) throw IoError(path.string() + ": empty file");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  t.header = split_csv_line(line);
  t.columns.resize(t.header.size());
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    auto cells = split_csv_line(line);
    if (cells.size() != t.header.size()) {
      throw IoError(path.string() + ":" + std::to_string(lineno) + ": expected " +
                    std::to_string(t.header.size()) + " fields, got " + std::to_string(cells.size()));
    }
    for (std::size_t i = 0; i < cells.size(); ++i) {
      t.columns[i].push_back(parse_double(cells[i], path.string() + ":" + std::to_string(lineno)));
    }
  }
  return t;
}

// Reads a signal CSV back into [columns x lines].
inline Matrix read_signal_csv(const fs::path& path) {
  const auto t = read_csv_table(path);
  if (t.columns.empty() || t.columns.front().empty()) throw IoError(path.string() + ": no data");
  Matrix m(t.columns.size(), t.columns.front().size());
  for (std::size_t r = 0; r < m.rows(); ++r)
    std::copy(t.columns[r].begin(), t.columns[r].end(), m.row(r).begin());
  return m;
}

// ---------------------------------------------------------------------------
// JSON conversions

inline json to_json(const Matrix& m) {
  return json{{"rows", m.rows()}, {"cols", m.cols()}, {"data", m.values()}};
}

inline Matrix matrix_from_json(const json& j) {
  try {
    return Matrix(j.at("rows").get<std::size_t>(), j.at("cols").get<std::size_t>(),
                  j.at("data").get<std::vector<double>>());
  } catch (const json::exception& e) {
    throw IoError(std::string("matrix record: ") + e.what());
  } catch (const ShapeError& e) {
    throw IoError(std::string("matrix record: ") + e.what());
  }
}

inline json to_json(const MlpParams& p) {
  json layers = json::array();
  for (const auto& l : p.layers) layers.push_back({{"weight", to_json(l.weight)}, {"bias", l.bias}});
  return json{{"hidden_activation", to_string(p.hidden_activation)},
              {"output_activation", to_string(p.output_activation)},
              {"layers", layers}};
}

inline MlpParams mlp_from_json(const json& j) {
  try {
    MlpParams p;
    p.hidden_activation = activation_from_string(j.at("hidden_activation").get<std::string>());
    p.output_activation = activation_from_string(j.value("output_activation", std::string("identity")));
    for (const auto& l : j.at("layers")) {
      p.layers.push_back({matrix_from_json(l.at("weight")), l.at("bias").get<std::vector<double>>()});
    }
    p.validate();
    return p;
  } catch (const json::exception& e) {
    throw IoError(std::string("mlp record: ") + e.what());
  }
}

inline json to_json(const GmmPrior& p) {
  return json{{"raw_weights", p.raw_weights},
              {"raw_means", p.raw_means},
              {"raw_log_scales", p.raw_log_scales}};
}

inline GmmPrior gmm_from_json(const json& j) {
  try {
    GmmPrior p{j.at("raw_weights").get<std::vector<double>>(), j.at("raw_means").get<std::vector<double>>(),
               j.at("raw_log_scales").get<std::vector<double>>()};
    p.validate();
    return p;
  } catch (const json::exception& e) {
    throw IoError(std::string("prior record: ") + e.what());
  }
}

inline json priors_to_json(const std::vector<GmmPrior>& priors) {
  json arr = json::array();
  for (const auto& p : priors) arr.push_back(to_json(p));
  return arr;
}

inline std::vector<GmmPrior> priors_from_json(const json& j) {
  std::vector<GmmPrior> out;
  for (const auto& p : j) out.push_back(gmm_from_json(p));
  return out;
}

inline json to_json(const Whitening& w) {
  return json{{"mean", w.mean}, {"transform", to_json(w.transform)}};
}

inline Whitening whitening_from_json(const json& j) {
  try {
    return Whitening{j.at("mean").get<std::vector<double>>(), matrix_from_json(j.at("transform"))};
  } catch (const json::exception& e) {
    throw IoError(std::string("whitening record: ") + e.what());
  }
}

inline json to_json(const MixingMap& map) {
  json j{{"kind", to_string(map.kind)}, {"seed", map.seed}, {"m", map.m()}, {"n", map.n()}};
  if (map.kind == MixingKind::linear) {
    j["matrix"] = to_json(map.matrix);
  } else {
    j["mlp"] = to_json(map.mlp);
    j["experimental"] = true;
  }
  return j;
}

inline MixingMap mixing_from_json(const json& j) {
  try {
    MixingMap map;
    map.kind = mixing_kind_from_string(j.at("kind").get<std::string>());
    map.seed = j.at("seed").get<std::uint64_t>();
    if (map.kind == MixingKind::linear) {
      map.matrix = matrix_from_json(j.at("matrix"));
    } else {
      map.mlp = mlp_from_json(j.at("mlp"));
    }
    return map;
  } catch (const json::exception& e) {
    throw IoError(std::string("mixing record: ") + e.what());
  }
}

inline json to_json(const HalfVaeModel& m) {
  return json{{"bank", {{"z_mu", to_json(m.bank.z_mu)}, {"z_rho", m.bank.z_rho}}},
              {"decoder", to_json(m.decoder)},
              {"priors", priors_to_json(m.priors)},
              {"lambda", m.lambda}};
}

inline HalfVaeModel half_vae_from_json(const json& j) {
  try {
    HalfVaeModel m;
    m.bank.z_mu = matrix_from_json(j.at("bank").at("z_mu"));
    m.bank.z_rho = j.at("bank").at("z_rho").get<std::vector<double>>();
    m.decoder = mlp_from_json(j.at("decoder"));
    m.priors = priors_from_json(j.at("priors"));
    m.lambda = j.at("lambda").get<double>();
    m.validate();
    return m;
  } catch (const json::exception& e) {
    throw IoError(std::string("half_vae record: ") + e.what());
  } catch (const ShapeError& e) {
    throw IoError(std::string("half_vae record: ") + e.what());
  }
}

inline json to_json(const VaeModel& m) {
  return json{{"encoder", to_json(m.encoder)},
              {"decoder", to_json(m.decoder)},
              {"prior", m.prior_kind == PriorKind::gmm ? "gmm" : "standard_normal"},
              {"priors", priors_to_json(m.priors)},
              {"lambda", m.lambda}};
}

inline VaeModel vae_from_json(const json& j) {
  try {
    VaeModel m;
    m.encoder = mlp_from_json(j.at("encoder"));
    m.decoder = mlp_from_json(j.at("decoder"));
    const auto prior = j.at("prior").get<std::string>();
    if (prior != "gmm" && prior != "standard_normal") throw IoError("vae record: unknown prior " + prior);
    m.prior_kind = prior == "gmm" ? PriorKind::gmm : PriorKind::standard_normal;
    m.priors = priors_from_json(j.at("priors"));
    m.lambda = j.at("lambda").get<double>();
    m.validate();
    return m;
  } catch (const json::exception& e) {
    throw IoError(std::string("vae record: ") + e.what());
  } catch (const ShapeError& e) {
    throw IoError(std::string("vae record: ") + e.what());
  }
}

inline std::string dump_json(const json& j) { return j.dump(2) + "\n"; }

inline json read_json(const fs::path& path) {
  const auto text = read_text(path);
  try {
    return json::parse(text);
  } catch (const json::exception& e) {
    throw IoError(path.string() + ": " + e.what());
  }
}

// FNV-1a 64-bit, hex encoded.
inline std::string fnv1a_hex(const std::string& text) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : text) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

}  // namespace halfvae
