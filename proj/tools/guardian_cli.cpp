#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "guardian/harness.hpp"

namespace fs = std::filesystem;
using namespace guardian;

namespace {

struct CommonFlags {
  std::string config;
  std::string out = "out";
  std::map<std::string, std::string> overrides;
  std::vector<std::string> settings;  // --set key=value
};

void add_common(CLI::App* cmd, CommonFlags& f) {
  cmd->add_option("--config", f.config, "Flat key = value config file")->check(CLI::ExistingFile);
  cmd->add_option("--out", f.out, "Output directory")->capture_default_str();
  auto bind = [&](const std::string& flag, const std::string& key, const std::string& help) {
    cmd->add_option_function<std::string>(flag, [&f, key](const std::string& v) { f.overrides[key] = v; }, help);
  };
  bind("--seed", "seed", "Master seed");
  bind("--agents", "n_agents", "Number of agents");
  bind("--rounds", "max_rounds", "Maximum debate rounds");
  bind("--topology", "topology", "Fraction of peers each agent reads: 0.25, 0.5, 0.75 or 1.0");
  bind("--attack", "attack", "none, hallucination, agent or comm");
  bind("--variant", "variant", "temporal or static");
  bind("--trials", "trials", "Independent passes over the corpus");
  bind("--tasks", "tasks", "Synthetic corpus size");
  bind("--corpus", "corpus", "Task corpus (TSV)");
  cmd->add_option("--set", f.settings, "Any config field as key=value (repeatable)");
}

harness::ExperimentConfig resolve(const CommonFlags& f) {
  harness::ExperimentConfig cfg;
  if (!f.config.empty()) cfg = harness::load_config(f.config, cfg);
  harness::apply_environment(cfg);
  for (const auto& kv : f.settings) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos) throw harness::ConfigError("--set expects key=value, got '" + kv + "'");
    harness::apply_setting(cfg, kv.substr(0, eq), kv.substr(eq + 1));
  }
  for (const auto& [k, v] : f.overrides) harness::apply_setting(cfg, k, v);
  cfg.validate();
  return cfg;
}

void print_metrics(const harness::ExperimentConfig& cfg, const harness::MetricsReport& m) {
  std::cout << harness::metrics_csv(harness::config_hash(cfg), cfg.trials, m);
}

int run(const CommonFlags& f, bool defend) {
  auto cfg = resolve(f);
  cfg.defend = defend;
  const auto result = harness::run_experiment(cfg);
  harness::write_artifacts(f.out, cfg, result);
  print_metrics(cfg, result.metrics);
  std::cerr << "wrote " << (fs::path(f.out) / "episodes.json").string() << " and "
            << (fs::path(f.out) / "metrics.csv").string() << "\n";
  return 0;
}

int train(const CommonFlags& f) {
  auto cfg = resolve(f);
  cfg.defend = true;
  cfg.attack = sim::AttackKind::none;
  cfg.trials = 1;
  const auto result = harness::run_experiment(cfg);
  fs::create_directories(f.out);
  const auto path = fs::path(f.out) / "detector.ckpt";
  detector::save_checkpoint(path.string(), result.detectors.front());
  std::cerr << "trained on " << result.logs.size() << " clean episodes, wrote " << path.string() << "\n";
  return 0;
}

std::string default_logs(const CommonFlags& f, const std::string& logs) {
  return logs.empty() ? (fs::path(f.out) / "episodes.json").string() : logs;
}

int metrics(const CommonFlags& f, const std::string& logs_path) {
  const auto cfg = resolve(f);
  const auto logs = harness::read_episodes(default_logs(f, logs_path));
  if (logs.empty()) throw std::runtime_error("no episodes in " + default_logs(f, logs_path));
  harness::DecayOptions decay = cfg.decay;
  decay.horizon = cfg.max_rounds;
  const auto m = harness::compute_metrics(logs, decay, cfg.pooling);
  fs::create_directories(f.out);
  std::ofstream(fs::path(f.out) / "metrics.csv") << harness::metrics_csv(harness::config_hash(cfg), cfg.trials, m);
  print_metrics(cfg, m);
  return 0;
}

int export_graphs(const CommonFlags& f, const std::string& logs_path, const std::string& format, int episode) {
  const auto cfg = resolve(f);
  const auto logs = harness::read_episodes(default_logs(f, logs_path));
  embedding::EmbeddingConfig ec;
  ec.dim = cfg.pipeline.detector.k;
  const embedding::HashingEmbedder embedder(ec);
  const auto dir = fs::path(f.out) / "graphs";
  fs::create_directories(dir);
  std::size_t written = 0;
  for (std::size_t i = 0; i < logs.size(); ++i) {
    if (episode >= 0 && static_cast<std::size_t>(episode) != i) continue;
    const auto g = harness::graph_from_log(logs[i], embedder);
    const auto scores = harness::scores_from_log(logs[i]);
    const auto& corrupted = logs[i].ground_truth.corrupted_edges;
    char stem[32];
    std::snprintf(stem, sizeof stem, "episode_%04zu", i);
    if (format == "json" || format == "both") {
      std::ofstream(dir / (std::string(stem) + ".json")) << harness::graph_to_json(g, scores, corrupted).dump(2) << "\n";
    }
    if (format == "dot" || format == "both") {
      std::ofstream(dir / (std::string(stem) + ".dot")) << harness::graph_to_dot(g, scores, corrupted);
    }
    ++written;
  }
  if (episode >= 0 && written == 0) throw std::runtime_error("episode index out of range");
  std::cerr << "exported " << written << " graph(s) to " << dir.string() << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Temporal graph anomaly detection for multi-agent debates"};
  app.require_subcommand(1);

  CommonFlags sim_flags, def_flags, train_flags, met_flags, exp_flags;
  auto* simulate = app.add_subcommand("simulate", "Run episodes without a defense");
  add_common(simulate, sim_flags);
  auto* defend = app.add_subcommand("defend", "Run episodes with the detect-and-prune pipeline");
  add_common(defend, def_flags);
  auto* trainc = app.add_subcommand("train", "Pre-fit the detector on a clean stream and save a checkpoint");
  add_common(trainc, train_flags);

  std::string met_logs;
  auto* metricsc = app.add_subcommand("metrics", "Recompute metrics from an episodes file");
  add_common(metricsc, met_flags);
  metricsc->add_option("--logs", met_logs, "Episodes file (default OUT/episodes.json)");

  std::string exp_logs, format = "both";
  int episode = -1;
  auto* exportc = app.add_subcommand("export", "Write per-episode temporal graphs as JSON and DOT");
  add_common(exportc, exp_flags);
  exportc->add_option("--logs", exp_logs, "Episodes file (default OUT/episodes.json)");
  exportc->add_option("--format", format, "json, dot or both")
      ->check(CLI::IsMember({"json", "dot", "both"}))
      ->capture_default_str();
  exportc->add_option("--episode", episode, "Only this episode index");

  CLI11_PARSE(app, argc, argv);
  try {
    if (simulate->parsed()) return run(sim_flags, false);
    if (defend->parsed()) return run(def_flags, true);
    if (trainc->parsed()) return train(train_flags);
    if (metricsc->parsed()) return metrics(met_flags, met_logs);
    if (exportc->parsed()) return export_graphs(exp_flags, exp_logs, format, episode);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
