#pragma once

#include <functional>
#include <memory>
#include <optional>
#include <stdexcept>
#include <vector>

#include "guardian/anomaly.hpp"
#include "guardian/detector.hpp"
#include "guardian/embedder.hpp"
#include "guardian/graph.hpp"

namespace guardian::pipeline {

using anomaly::AnomalyScore;
using anomaly::DetectionPolicy;
using detector::DetectorConfig;
using detector::GuardianDetector;
using detector::LossBreakdown;
using graph::AgentId;

struct PipelineConfig {
  DetectorConfig detector;
  DetectionPolicy policy;
  // Keep detector parameters across episodes of a stream. When false every
  // episode starts from the initial parameters.
  bool carry_parameters = true;
};

struct Decision {
  int round = 0;
  std::optional<AgentId> removed;
  std::vector<AnomalyScore> scores;
  std::vector<LossBreakdown> trace;
  std::size_t batch_rounds = 0;
};

/// Raised when a round arrives with no active agents left.
class EpisodeExhausted : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Incremental detect-and-prune loop: one instance per experiment stream.
class Pipeline {
 public:
  Pipeline(PipelineConfig cfg, std::shared_ptr<const embedding::Embedder> embedder);
  Pipeline(PipelineConfig cfg, std::shared_ptr<const embedding::Embedder> embedder,
           GuardianDetector detector);

  /// Starts a fresh temporal graph; parameters are kept unless carry_parameters is off.
  void begin_episode();

  /// Snapshot, merge history, fine-tune, score, select, prune.
  Decision ingest_round(const std::vector<graph::Response>& responses,
                        const graph::TopologyOracle& topology, bool consensus_reached);

  const graph::TemporalGraph& graph() const { return graph_; }
  int round() const { return graph_.latest_round(); }
  const anomaly::RemovalLog& removal_log() const { return removal_log_; }
  const std::vector<Decision>& episode_decisions() const { return episode_decisions_; }
  const PipelineConfig& config() const { return cfg_; }
  GuardianDetector& detector() { return detector_; }
  const GuardianDetector& detector() const { return detector_; }
  /// Rounds ingested over the whole stream.
  std::size_t ingest_count() const { return ingests_; }

 private:
  PipelineConfig cfg_;
  std::shared_ptr<const embedding::Embedder> embedder_;
  GuardianDetector detector_;
  numerics::ParamStore initial_params_;
  graph::TemporalGraph graph_;
  anomaly::RemovalLog removal_log_;
  std::vector<Decision> episode_decisions_;
  std::size_t ingests_ = 0;
};

struct StreamResult {
  std::vector<std::vector<Decision>> decisions;  // per task, in stream order
};

/// Runs `task_count` episodes through one pipeline. `run_episode` drives a
/// single episode (typically the simulator) and calls ingest_round per round.
StreamResult run_stream(Pipeline& pipeline, std::size_t task_count,
                        const std::function<void(std::size_t task, Pipeline&)>& run_episode);

}  // namespace guardian::pipeline
