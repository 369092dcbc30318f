#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "guardian/pipeline.hpp"
#include "guardian/simulator.hpp"

namespace guardian::harness {

using graph::AgentId;
using sim::EpisodeLog;
using sim::Task;

// ---- metrics ---------------------------------------------------------------

enum class DecayKind { exponential, linear };
enum class Pooling { pooled, per_episode };

struct DecayOptions {
  DecayKind kind = DecayKind::exponential;
  double lambda = 0.5;  // exponential base
  int horizon = 3;      // T for linear decay

  /// Weight of a removal made at round t (t >= 1).
  double weight(int t) const;
};

struct MetricsReport {
  std::size_t episodes = 0;
  double accuracy = 0.0;
  std::optional<double> detection_rate;  // empty without ground truth
  std::optional<double> fdr;
  double api_calls_mean = 0.0;
  double runtime_seconds = 0.0;
  std::size_t removals = 0;
  std::size_t true_positives = 0;
  std::size_t false_positives = 0;
};

MetricsReport compute_metrics(std::span<const EpisodeLog> logs, const DecayOptions& decay,
                              Pooling pooling = Pooling::pooled);

// ---- configuration -------------------------------------------------------

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct ExperimentConfig {
  std::size_t n_agents = 4;
  int max_rounds = 3;
  int min_rounds = 0;  // 0: 3 for communication attacks, else 1
  double topology = 1.0;
  sim::AttackKind attack = sim::AttackKind::agent_targeted;
  double persuasion = 3.0;
  double p_correct = 1.0;
  double p_follow = 1.0;
  std::string role_prompt = "debater";

  bool defend = true;
  pipeline::PipelineConfig pipeline = default_pipeline();
  std::string checkpoint;  // optional detector to start from

  std::string corpus;  // TSV path; empty generates a synthetic corpus
  std::size_t tasks = 100;
  std::size_t choices = 4;
  std::size_t trials = 1;
  std::uint64_t seed = 0;

  DecayOptions decay;
  Pooling pooling = Pooling::pooled;
  bool record_runtime = false;

  std::string remote_agent_url;
  std::string remote_agent_token;
  std::string embedder_url;
  double remote_timeout_seconds = 30.0;

  static pipeline::PipelineConfig default_pipeline();
  int effective_min_rounds() const;
  void validate() const;
};

/// Sets one field from its textual form. Throws ConfigError on unknown keys or bad values.
void apply_setting(ExperimentConfig& cfg, const std::string& key, const std::string& value);

/// Flat `key = value` lines; `#` starts a comment.
ExperimentConfig load_config(const std::filesystem::path& path, ExperimentConfig base = {});

/// Every setting in canonical textual form, keyed by field name.
std::map<std::string, std::string> to_settings(const ExperimentConfig& cfg);

/// Reads GUARDIAN_REMOTE_AGENT_URL, GUARDIAN_REMOTE_AGENT_TOKEN, GUARDIAN_EMBEDDER_URL.
void apply_environment(ExperimentConfig& cfg);

/// 16 hex digits of FNV-1a over the canonical settings, endpoints and token excluded.
std::string config_hash(const ExperimentConfig& cfg);

std::string to_string(sim::AttackKind kind);
sim::AttackKind parse_attack(const std::string& text);

// ---- corpus --------------------------------------------------------------

std::vector<Task> synthetic_corpus(std::size_t count, std::size_t choices, std::uint64_t seed);

/// One task per line: id <TAB> question <TAB> answers separated by | <TAB> correct index.
std::vector<Task> load_corpus(const std::filesystem::path& path);
void save_corpus(const std::filesystem::path& path, std::span<const Task> tasks);

// ---- serialization -------------------------------------------------------

nlohmann::json episode_to_json(const EpisodeLog& log);
EpisodeLog episode_from_json(const nlohmann::json& j);

/// Structural check of one episode record; returns the problems found.
std::vector<std::string> validate_episode_json(const nlohmann::json& j);

/// Episodes are stored as a JSON array.
void write_episodes(const std::filesystem::path& path, std::span<const EpisodeLog> logs);
std::vector<EpisodeLog> read_episodes(const std::filesystem::path& path);

inline constexpr const char* kMetricsHeader =
    "config_hash,trials,accuracy,detection_rate,fdr,api_calls_mean,runtime_seconds";

std::string metrics_csv(const std::string& config_hash, std::size_t trials, const MetricsReport& m);

// ---- graph export --------------------------------------------------------

using ScoreMap = std::map<std::pair<int, AgentId>, double>;

/// Rebuilds the temporal graph an episode produced, removals included.
graph::TemporalGraph graph_from_log(const EpisodeLog& log, const embedding::Embedder& embedder);
ScoreMap scores_from_log(const EpisodeLog& log);

nlohmann::json graph_to_json(const graph::TemporalGraph& g, const ScoreMap& scores,
                             std::span<const graph::LayeredEdge> corrupted = {});
std::string graph_to_dot(const graph::TemporalGraph& g, const ScoreMap& scores,
                         std::span<const graph::LayeredEdge> corrupted = {});

std::vector<std::string> validate_graph_json(const nlohmann::json& j);

// ---- experiment ----------------------------------------------------------

struct ExperimentResult {
  MetricsReport metrics;
  std::vector<EpisodeLog> logs;  // trial-major, corpus order within a trial
  std::vector<detector::GuardianDetector> detectors;  // final detector per defended trial
};

ExperimentResult run_experiment(const ExperimentConfig& cfg);

/// episodes.json and metrics.csv under `dir`.
void write_artifacts(const std::filesystem::path& dir, const ExperimentConfig& cfg,
                     const ExperimentResult& result);

}  // namespace guardian::harness
