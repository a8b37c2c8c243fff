#include <CLI11.hpp>

#include <cstdint>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "halfvae/config.hpp"
#include "halfvae/errors.hpp"
#include "halfvae/heap.hpp"
#include "halfvae/pipeline.hpp"
#include "halfvae/plot.hpp"

namespace {

constexpr int kExitConfig = 2;
constexpr int kExitNumeric = 3;
constexpr int kExitIo = 4;

struct Options {
  std::string config;
  std::vector<std::string> data;
  std::string out;
  std::optional<std::uint64_t> seed;
  std::vector<std::uint64_t> seeds;
  std::size_t snapshot_every = 0;
};

halfvae::ExperimentConfig load(const Options& o) {
  if (o.config.empty()) throw halfvae::ConfigError("--config is required for this command");
  auto c = halfvae::load_config(o.config);
  if (o.seed) c.seed = *o.seed;
  return c;
}

std::string one_data(const Options& o) {
  if (o.data.size() != 1) throw halfvae::ConfigError("--data: exactly one directory expected");
  return o.data.front();
}

void print_summary(const halfvae::json& s) {
  const auto& m = s.at("mean_rmse");
  std::cout << s.at("model").get<std::string>() << " mean RMSE over " << s.at("runs").size()
            << " seeds: min " << m.at("min") << " mean " << m.at("mean") << " max " << m.at("max") << "\n";
}

int run(CLI::App& app, const std::string& cmd, const Options& o) {
  using namespace halfvae;
  const fs::path out = o.out.empty() ? fs::path(".") : fs::path(o.out);
  if (cmd == "generate") {
    cmd_generate(load(o), out);
  } else if (cmd == "train") {
    const auto c = load(o);
    const TrainArgs args{o.snapshot_every};
    if (!o.seeds.empty()) {
      std::optional<fs::path> data;
      if (!o.data.empty()) data = one_data(o);
      print_summary(run_seeds(c, o.seeds, data, out, true, args));
    } else {
      const auto report = cmd_train(c, one_data(o), out, args);
      std::cout << "final loss " << report.at("final_eval").at("loss") << "\n";
      if (report.contains("metrics")) std::cout << "mean RMSE " << report["metrics"].at("mean_rmse") << "\n";
    }
  } else if (cmd == "evaluate") {
    if (!o.seeds.empty()) {
      std::optional<fs::path> data;
      if (!o.data.empty()) data = one_data(o);
      // Config is only needed to satisfy the shared runner; each seed's
      // checkpoint carries its own.
      ExperimentConfig c;
      print_summary(run_seeds(c, o.seeds, data, out, false));
    } else {
      const auto m = cmd_evaluate(one_data(o), out);
      std::cout << "mean RMSE " << m.at("mean_rmse") << "\n";
    }
  } else if (cmd == "report") {
    std::vector<fs::path> roots(o.data.begin(), o.data.end());
    if (roots.empty()) throw ConfigError("--data: at least one run directory is required");
    std::cout << table1_markdown(cmd_report(roots, out));
  } else if (cmd == "plot") {
    std::vector<fs::path> dirs(o.data.begin(), o.data.end());
    for (const auto& stem : cmd_plot(dirs, out)) std::cout << stem << "\n";
  } else {
    std::cerr << app.help();
    return kExitConfig;
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  halfvae::keep_large_buffers_on_heap();
  CLI::App app{"Half-VAE blind source separation toolkit"};
  app.require_subcommand(1);
  Options o;
  std::string cmd;
  const std::vector<std::pair<std::string, std::string>> commands{
      {"generate", "synthesize sources, observations and the mixing record"},
      {"train", "train the configured model on a dataset"},
      {"evaluate", "align posterior means with the true sources and write metrics.json"},
      {"report", "aggregate metrics.json files into table1.csv/table1.md"},
      {"plot", "write per-figure CSV and SVG files"}};
  for (const auto& [name, help] : commands) {
    auto* sub = app.add_subcommand(name, help);
    sub->add_option("--config", o.config, "experiment config (JSON)");
    sub->add_option("--data", o.data, "data or run directory (repeatable for report/plot)");
    sub->add_option("--out", o.out, "output directory");
    sub->add_option("--seed", o.seed, "seed overriding the config");
    sub->add_option("--seeds", o.seeds, "comma-separated seeds run concurrently")->delimiter(',');
    sub->add_option("--snapshot-every", o.snapshot_every, "write zmu_epoch_<e>.csv every e epochs");
    sub->callback([&cmd, name = name] { cmd = name; });
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitConfig;
  }

  try {
    return run(app, cmd, o);
  } catch (const halfvae::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const halfvae::ShapeError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const halfvae::NumericError& e) {
    std::cerr << "numeric error: " << e.what() << "\n";
    return kExitNumeric;
  } catch (const halfvae::DomainError& e) {
    std::cerr << "numeric error: " << e.what() << "\n";
    return kExitNumeric;
  } catch (const halfvae::IoError& e) {
    std::cerr << "io error: " << e.what() << "\n";
    return kExitIo;
  } catch (const std::filesystem::filesystem_error& e) {
    std::cerr << "io error: " << e.what() << "\n";
    return kExitIo;
  }
}
