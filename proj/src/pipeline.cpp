#include "guardian/pipeline.hpp"

#include <algorithm>
#include <set>

namespace guardian::pipeline {

Pipeline::Pipeline(PipelineConfig cfg, std::shared_ptr<const embedding::Embedder> embedder)
    : Pipeline(cfg, embedder, GuardianDetector(cfg.detector)) {}

Pipeline::Pipeline(PipelineConfig cfg, std::shared_ptr<const embedding::Embedder> embedder,
                   GuardianDetector detector)
    : cfg_(std::move(cfg)),
      embedder_(std::move(embedder)),
      detector_(std::move(detector)),
      initial_params_(detector_.params()) {
  if (!embedder_) throw std::invalid_argument("Pipeline: embedder required");
  if (embedder_->dim() != detector_.config().k) {
    throw std::invalid_argument("Pipeline: embedder dimension " + std::to_string(embedder_->dim()) +
                                " differs from detector k=" + std::to_string(detector_.config().k));
  }
  cfg_.detector = detector_.config();
  cfg_.policy.validate();
}

void Pipeline::begin_episode() {
  graph_ = graph::TemporalGraph{};
  removal_log_.clear();
  episode_decisions_.clear();
  if (!cfg_.carry_parameters) detector_.params() = initial_params_;
}

Decision Pipeline::ingest_round(const std::vector<graph::Response>& responses,
                                const graph::TopologyOracle& topology, bool consensus_reached) {
  if (responses.empty()) throw EpisodeExhausted("Pipeline: no active agents remain");
  const int round = graph_.latest_round() + 1;
  if (round > 1) {
    std::set<AgentId> expected;
    for (AgentId a : graph_.active_agents()) expected.insert(a);
    std::set<AgentId> given;
    for (const auto& r : responses) given.insert(r.agent);
    if (given != expected) {
      throw std::invalid_argument("Pipeline::ingest_round: responses must cover exactly the active agents");
    }
  }

  graph_.append(graph::build_snapshot(round, responses, topology, *embedder_));
  const auto batch = graph::merge_history(graph_, round, detector_.config().effective_window());

  Decision decision;
  decision.round = round;
  decision.batch_rounds = batch.snapshots.size();
  const std::size_t epochs =
      ingests_ == 0 ? detector_.config().epochs_initial : detector_.config().epochs_incremental;
  Rng rng = make_rng(detector_.config().seed, {0x7a11, ingests_});
  decision.trace = detector_.fit(batch, epochs, rng);
  ++ingests_;

  const auto recon = detector_.reconstruct(batch);
  decision.scores = anomaly::score_nodes(recon, detector_.config().alpha, round);
  decision.removed = anomaly::select_anomalies(decision.scores, cfg_.policy, consensus_reached);
  anomaly::prune(graph_, decision.removed, round, decision.scores, removal_log_);
  episode_decisions_.push_back(decision);
  return decision;
}

StreamResult run_stream(Pipeline& pipeline, std::size_t task_count,
                        const std::function<void(std::size_t task, Pipeline&)>& run_episode) {
  if (task_count == 0) throw std::invalid_argument("run_stream: no tasks");
  StreamResult result;
  for (std::size_t i = 0; i < task_count; ++i) {
    pipeline.begin_episode();
    run_episode(i, pipeline);
    result.decisions.push_back(pipeline.episode_decisions());
  }
  return result;
}

}  // namespace guardian::pipeline
