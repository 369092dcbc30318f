#pragma once

#include <optional>
#include <vector>

#include "guardian/detector.hpp"
#include "guardian/graph.hpp"

namespace guardian::anomaly {

using graph::AgentId;

struct AnomalyScore {
  AgentId agent;
  int round = 0;
  double value = 0.0;
};

enum class PolicyMode { top1_on_no_consensus, top1_always, threshold };

struct DetectionPolicy {
  PolicyMode mode = PolicyMode::top1_on_no_consensus;
  double tau = 0.0;
  static constexpr std::size_t max_removals_per_round = 1;
  void validate() const;
};

/// s_i = alpha * |R_X[i]| + (1 - alpha) * |R_E[i]|
std::vector<AnomalyScore> score_nodes(const detector::Reconstruction& recon, double alpha, int round);

/// At most one agent; ties go to the lowest id.
std::optional<AgentId> select_anomalies(const std::vector<AnomalyScore>& scores,
                                        const DetectionPolicy& policy, bool consensus_reached);

struct RemovalEntry {
  AgentId agent;
  int round = 0;
  double score = 0.0;
};

using RemovalLog = std::vector<RemovalEntry>;

/// Removes the selected agent from every round after `round` and logs it.
void prune(graph::TemporalGraph& g, std::optional<AgentId> selected, int round,
           const std::vector<AnomalyScore>& scores, RemovalLog& log);

}  // namespace guardian::anomaly
