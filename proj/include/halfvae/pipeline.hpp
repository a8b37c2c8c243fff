#pragma once

#include <algorithm>
#include <chrono>
#include <cstddef>
#include <cstdint>
#include <future>
#include <map>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "halfvae/config.hpp"
#include "halfvae/errors.hpp"
#include "halfvae/eval.hpp"
#include "halfvae/io.hpp"
#include "halfvae/models.hpp"
#include "halfvae/synth.hpp"
#include "halfvae/train.hpp"
#include "halfvae/whitening.hpp"

namespace halfvae {

inline constexpr const char* kSourcesFile = "sources.csv";
inline constexpr const char* kObservationsFile = "observations.csv";
inline constexpr const char* kMixingFile = "mixing.json";
inline constexpr const char* kCheckpointFile = "checkpoint.json";
inline constexpr const char* kReportFile = "report.json";
inline constexpr const char* kMetricsFile = "metrics.json";

inline std::string snapshot_name(std::size_t epoch) { return "zmu_epoch_" + std::to_string(epoch) + ".csv"; }

// Throws IoError naming the command that writes `file` when it is absent.
inline fs::path require_file(const fs::path& dir, const std::string& file, const std::string& producer) {
  const fs::path p = dir / file;
  if (!fs::is_regular_file(p)) {
    throw IoError(p.string() + " not found (produced by `halfvae " + producer + "`)");
  }
  return p;
}

// ---------------------------------------------------------------------------
// generate

struct Dataset {
  Matrix sources;       // [N x L]
  Matrix observations;  // [M x L]
  MixingMap mixing;
};

inline Dataset make_dataset(const ExperimentConfig& c) {
  c.validate();
  const std::uint64_t seed = c.require_seed();
  Dataset d;
  d.sources = generate_sources(c.source_specs(), seed);
  d.mixing = make_mixing(c.m, c.n, c.mixing_kind, seed);
  d.observations = mix(d.mixing, d.sources);
  return d;
}

inline void cmd_generate(const ExperimentConfig& c, const fs::path& out) {
  const auto d = make_dataset(c);
  write_signal_csv(out / kSourcesFile, d.sources, "component_");
  write_signal_csv(out / kObservationsFile, d.observations, "channel_");
  write_text(out / kMixingFile, dump_json(to_json(d.mixing)));
}

// ---------------------------------------------------------------------------
// checkpoints

using AnyModel = std::variant<HalfVaeModel, VaeModel>;

struct Checkpoint {
  ExperimentConfig config;
  Whitening whitening;
  AnyModel model;
};

inline AnyModel init_model(const ExperimentConfig& c) {
  const std::uint64_t seed = c.require_seed();
  switch (c.model) {
    case ModelKind::half_vae: return init_half_vae(c.n, c.m, c.l, c.k, seed, c.architecture());
    case ModelKind::vae_gmm: return init_vae(c.n, c.m, c.k, seed, PriorKind::gmm, c.architecture());
    case ModelKind::vanilla_vae:
      return init_vae(c.n, c.m, c.k, seed, PriorKind::standard_normal, c.architecture());
  }
  throw ConfigError("config field 'model': unsupported");
}

inline json to_json(const Checkpoint& ck) {
  json j{{"format", "halfvae-checkpoint"},
         {"version", 1},
         {"model", to_string(ck.config.model)},
         {"seed", ck.config.require_seed()},
         {"config_hash", config_hash(ck.config)},
         {"config", to_json(ck.config)},
         {"whitening", to_json(ck.whitening)}};
  j["params"] = std::visit([](const auto& m) { return to_json(m); }, ck.model);
  return j;
}

inline Checkpoint checkpoint_from_json(const json& j) {
  try {
    if (j.value("format", "") != "halfvae-checkpoint") throw IoError("checkpoint: unrecognised format");
    Checkpoint ck;
    ck.config = config_from_json(j.at("config"));
    ck.whitening = whitening_from_json(j.at("whitening"));
    if (ck.config.model == ModelKind::half_vae) {
      ck.model = half_vae_from_json(j.at("params"));
    } else {
      ck.model = vae_from_json(j.at("params"));
    }
    return ck;
  } catch (const json::exception& e) {
    throw IoError(std::string("checkpoint: ") + e.what());
  }
}

inline Checkpoint load_checkpoint(const fs::path& run_dir) {
  return checkpoint_from_json(read_json(require_file(run_dir, kCheckpointFile, "train")));
}

// Observations in the space the model was trained on.
inline Matrix load_observations(const ExperimentConfig& c, const fs::path& data) {
  const Matrix x = read_signal_csv(require_file(data, kObservationsFile, "generate"));
  if (x.rows() != c.m || x.cols() != c.l) {
    throw ConfigError("config fields 'm'/'l': config expects " + std::to_string(c.m) + "x" +
                      std::to_string(c.l) + " observations but " + kObservationsFile + " is " +
                      x.shape_str());
  }
  return x;
}

inline PosteriorSummary summarize(const Checkpoint& ck, const Matrix& x_model) {
  if (const auto* h = std::get_if<HalfVaeModel>(&ck.model)) return posterior_summary(h->bank);
  return posterior_summary(std::get<VaeModel>(ck.model), x_model);
}

// ---------------------------------------------------------------------------
// evaluate

// Metrics document for one trained run. Everything is a pure function of the
// checkpoint and data, so repeated runs serialize identically.
inline json metrics_document(const Checkpoint& ck, const PosteriorSummary& post, const Matrix& truth) {
  if (truth.rows() != post.means.rows() || truth.cols() != post.means.cols()) {
    throw ConfigError("config field 'n': truth is " + truth.shape_str() + " but posterior means are " +
                      post.means.shape_str());
  }
  const auto table = score_models({{to_string(ck.config.model), post.means}}, truth);
  const auto& score = table.models.front();
  const auto& a = score.alignment;
  const std::size_t n = truth.rows(), l = truth.cols();

  // Bands pass through the same z-score and sign as the means, then get
  // reordered into truth order.
  Matrix mean(n, l), lower(n, l), upper(n, l);
  for (std::size_t i = 0; i < n; ++i) {
    const auto row = post.means.row(i);
    double mu = 0.0;
    for (double v : row) mu += v;
    mu /= static_cast<double>(l);
    double var = 0.0;
    for (double v : row) var += (v - mu) * (v - mu);
    const double sd = std::sqrt(var / static_cast<double>(l));
    const std::size_t t = a.permutation[i];
    const double s = a.signs[i];
    for (std::size_t c = 0; c < l; ++c) {
      const double lo = s * (post.lower95(i, c) - mu) / sd;
      const double hi = s * (post.upper95(i, c) - mu) / sd;
      mean(t, c) = s * (post.means(i, c) - mu) / sd;
      lower(t, c) = std::min(lo, hi);
      upper(t, c) = std::max(lo, hi);
    }
  }

  std::vector<int> signs(a.signs.begin(), a.signs.end());
  return json{{"model", to_string(ck.config.model)},
              {"seed", ck.config.require_seed()},
              {"config_hash", config_hash(ck.config)},
              {"components", n},
              {"per_component_rmse", score.per_truth_component_rmse},
              {"mean_rmse", a.mean_rmse},
              {"permutation", a.permutation},
              {"signs", signs},
              {"truth_zscored", to_json(zscore_rows(truth))},
              {"ci_band", {{"level", 0.95}, {"mean", to_json(mean)}, {"lower", to_json(lower)}, {"upper", to_json(upper)}}}};
}

inline json evaluate_run(const fs::path& data, const fs::path& run_dir) {
  const auto ck = load_checkpoint(run_dir);
  const Matrix x = load_observations(ck.config, data);
  const Matrix truth = read_signal_csv(require_file(data, kSourcesFile, "generate"));
  return metrics_document(ck, summarize(ck, ck.whitening.apply(x)), truth);
}

inline json cmd_evaluate(const fs::path& data, const fs::path& run_dir) {
  auto metrics = evaluate_run(data, run_dir);
  write_text(run_dir / kMetricsFile, dump_json(metrics));
  return metrics;
}

// ---------------------------------------------------------------------------
// train

struct TrainArgs {
  std::size_t snapshot_every = 0;
};

inline json cmd_train(const ExperimentConfig& c, const fs::path& data, const fs::path& out,
                      const TrainArgs& args = {}) {
  c.validate();
  const auto started = std::chrono::steady_clock::now();
  const Matrix x = load_observations(c, data);
  Checkpoint ck{c, c.whiten ? fit_whitening(x, c.n) : Whitening::identity(c.m), init_model(c)};
  const Matrix xw = ck.whitening.apply(x);

  TrainOptions opt = c.train_options();
  opt.snapshot_every = args.snapshot_every;
  std::vector<std::size_t> snapshots;
  TrainResult result = std::visit(
      [&](auto& model) {
        using Model = std::decay_t<decltype(model)>;
        SnapshotFn<Model> snap = [&](std::size_t epoch, const Model& m) {
          Matrix means;
          if constexpr (std::is_same_v<Model, HalfVaeModel>) {
            means = m.bank.z_mu;
          } else {
            means = encode(m, xw).mean;
          }
          write_signal_csv(out / snapshot_name(epoch), means, "component_");
          snapshots.push_back(epoch);
        };
        return train(model, xw, opt, snap);
      },
      ck.model);

  write_text(out / kCheckpointFile, dump_json(to_json(ck)));

  json curve{{"loss", json::array()}, {"reconstruction", json::array()}, {"kl", json::array()}};
  for (const auto& r : result.curve) {
    curve["loss"].push_back(r.loss);
    curve["reconstruction"].push_back(r.reconstruction);
    curve["kl"].push_back(r.kl);
  }
  json report{{"model", to_string(c.model)},
              {"seed", c.require_seed()},
              {"config_hash", config_hash(c)},
              {"epochs", c.epochs},
              {"steps", result.steps},
              {"loss_curve", curve},
              {"final_eval",
               {{"loss", result.final_eval.loss},
                {"reconstruction", result.final_eval.reconstruction},
                {"kl", result.final_eval.kl},
                {"samples", c.eval_samples}}},
              {"snapshots", snapshots}};
  if (fs::is_regular_file(data / kSourcesFile)) {
    const Matrix truth = read_signal_csv(data / kSourcesFile);
    report["metrics"] = metrics_document(ck, summarize(ck, xw), truth);
    report["metrics"].erase("truth_zscored");
    report["metrics"].erase("ci_band");
  }
  report["wall_clock_seconds"] =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
  write_text(out / kReportFile, dump_json(report));
  return report;
}

// ---------------------------------------------------------------------------
// multi-seed runs

struct SeedStats {
  double min = 0.0, mean = 0.0, max = 0.0;
};

inline SeedStats seed_stats(const std::vector<double>& v) {
  if (v.empty()) return {};
  SeedStats s{v.front(), 0.0, v.front()};
  for (double x : v) {
    s.min = std::min(s.min, x);
    s.max = std::max(s.max, x);
    s.mean += x;
  }
  s.mean /= static_cast<double>(v.size());
  return s;
}

inline json to_json(const SeedStats& s) { return json{{"min", s.min}, {"mean", s.mean}, {"max", s.max}}; }

inline fs::path seed_dir(const fs::path& out, std::uint64_t seed) { return out / ("seed_" + std::to_string(seed)); }

// Per-seed metrics aggregated into min/mean/max RMSE.
inline json aggregate_metrics(const std::vector<std::uint64_t>& seeds, const std::vector<json>& metrics) {
  json runs = json::array();
  std::vector<double> means;
  std::vector<std::vector<double>> per_component;
  for (std::size_t s = 0; s < seeds.size(); ++s) {
    const auto& m = metrics[s];
    runs.push_back({{"seed", seeds[s]}, {"mean_rmse", m.at("mean_rmse")}, {"per_component_rmse", m.at("per_component_rmse")}});
    means.push_back(m.at("mean_rmse").get<double>());
    const auto pc = m.at("per_component_rmse").get<std::vector<double>>();
    per_component.resize(pc.size());
    for (std::size_t i = 0; i < pc.size(); ++i) per_component[i].push_back(pc[i]);
  }
  json comps = json::array();
  for (const auto& v : per_component) comps.push_back(to_json(seed_stats(v)));
  return json{{"model", metrics.empty() ? json(nullptr) : metrics.front().at("model")},
              {"runs", runs},
              {"mean_rmse", to_json(seed_stats(means))},
              {"per_component_rmse", comps}};
}

// Independent seeded jobs run concurrently; results are collected in seed order
// so the summary does not depend on scheduling. Without a shared data
// directory each seed generates its own dataset under <out>/seed_<s>/data.
inline json run_seeds(const ExperimentConfig& base, const std::vector<std::uint64_t>& seeds,
                      const std::optional<fs::path>& data, const fs::path& out, bool train_first,
                      const TrainArgs& args = {}) {
  if (seeds.empty()) throw ConfigError("--seeds: empty list");
  std::vector<std::future<json>> jobs;
  for (std::uint64_t seed : seeds) {
    jobs.push_back(std::async(std::launch::async, [=] {
      ExperimentConfig c = base;
      c.seed = seed;
      const fs::path run = seed_dir(out, seed);
      const fs::path d = data ? *data : run / "data";
      if (train_first) {
        if (!data) cmd_generate(c, d);
        cmd_train(c, d, run, args);
      }
      return cmd_evaluate(d, run);
    }));
  }
  std::vector<json> metrics;
  for (auto& j : jobs) metrics.push_back(j.get());
  auto summary = aggregate_metrics(seeds, metrics);
  write_text(out / "seeds_summary.json", dump_json(summary));
  return summary;
}

// ---------------------------------------------------------------------------
// report: Table-1 style aggregation over every metrics.json below the roots.

inline const std::vector<std::string>& model_order() {
  static const std::vector<std::string> order{"half_vae", "vae_gmm", "vanilla_vae"};
  return order;
}

inline std::string model_label(const std::string& m) {
  if (m == "half_vae") return "Half-VAE(GMM)";
  if (m == "vae_gmm") return "VAE(GMM)";
  if (m == "vanilla_vae") return "Vanilla VAE";
  return m;
}

inline std::vector<fs::path> find_metrics(const std::vector<fs::path>& roots) {
  std::vector<fs::path> found;
  for (const auto& root : roots) {
    if (!fs::is_directory(root)) throw IoError(root.string() + ": not a directory");
    for (const auto& e : fs::recursive_directory_iterator(root)) {
      if (e.is_regular_file() && e.path().filename() == kMetricsFile) found.push_back(e.path());
    }
  }
  std::sort(found.begin(), found.end());
  return found;
}

struct Table1 {
  std::size_t components = 0;
  std::vector<std::string> models;              // in display order
  std::map<std::string, std::size_t> runs;      // model -> run count
  std::map<std::string, std::vector<SeedStats>> rows;  // model -> N component rows + mean row
};

inline Table1 build_table1(const std::vector<json>& metrics) {
  std::map<std::string, std::vector<std::vector<double>>> cells;
  Table1 t;
  for (const auto& m : metrics) {
    const auto model = m.at("model").get<std::string>();
    const auto pc = m.at("per_component_rmse").get<std::vector<double>>();
    if (t.components == 0) t.components = pc.size();
    if (pc.size() != t.components) throw ConfigError("report: runs disagree on component count");
    auto& c = cells[model];
    c.resize(t.components + 1);
    for (std::size_t i = 0; i < pc.size(); ++i) c[i].push_back(pc[i]);
    c[t.components].push_back(m.at("mean_rmse").get<double>());
    ++t.runs[model];
  }
  for (const auto& m : model_order())
    if (cells.count(m)) t.models.push_back(m);
  for (const auto& [m, _] : cells)
    if (std::find(t.models.begin(), t.models.end(), m) == t.models.end()) t.models.push_back(m);
  for (const auto& [m, c] : cells) {
    for (const auto& v : c) t.rows[m].push_back(seed_stats(v));
  }
  return t;
}

inline std::string table1_csv(const Table1& t) {
  std::string out = "row";
  for (const auto& m : t.models) out += "," + m + "_mean," + m + "_min," + m + "_max";
  out += '\n';
  for (std::size_t r = 0; r <= t.components; ++r) {
    out += r < t.components ? "component_" + std::to_string(r + 1) : std::string("mean");
    for (const auto& m : t.models) {
      const auto& s = t.rows.at(m)[r];
      out += "," + format_double(s.mean) + "," + format_double(s.min) + "," + format_double(s.max);
    }
    out += '\n';
  }
  return out;
}

inline std::string table1_markdown(const Table1& t) {
  auto fixed = [](double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.4f", v);
    return std::string(buf);
  };
  std::string out = "| RMSE |";
  for (const auto& m : t.models) out += " " + model_label(m) + " (n=" + std::to_string(t.runs.at(m)) + ") |";
  out += "\n|---|";
  for (std::size_t i = 0; i < t.models.size(); ++i) out += "---|";
  out += '\n';
  for (std::size_t r = 0; r <= t.components; ++r) {
    out += r < t.components ? "| Component " + std::to_string(r + 1) + " |" : std::string("| Mean |");
    for (const auto& m : t.models) {
      const auto& s = t.rows.at(m)[r];
      out += " " + fixed(s.mean) + " [" + fixed(s.min) + ", " + fixed(s.max) + "] |";
    }
    out += '\n';
  }
  out += "\nCells: mean over runs [min, max].\n";
  return out;
}

inline Table1 cmd_report(const std::vector<fs::path>& roots, const fs::path& out) {
  const auto files = find_metrics(roots);
  if (files.empty()) {
    throw IoError("no metrics.json found under the given directories (produced by `halfvae evaluate`)");
  }
  std::vector<json> metrics;
  for (const auto& f : files) metrics.push_back(read_json(f));
  auto t = build_table1(metrics);
  write_text(out / "table1.csv", table1_csv(t));
  write_text(out / "table1.md", table1_markdown(t));
  return t;
}

}  // namespace halfvae
