#include "guardian/anomaly.hpp"

#include <algorithm>
#include <stdexcept>

namespace guardian::anomaly {

void DetectionPolicy::validate() const {
  if (mode == PolicyMode::threshold && !(tau >= 0.0)) {
    throw std::invalid_argument("DetectionPolicy: threshold mode needs tau >= 0");
  }
}

std::vector<AnomalyScore> score_nodes(const detector::Reconstruction& recon, double alpha, int round) {
  const std::size_t n = recon.agents.size();
  if (recon.r_x.rows() != n || recon.r_e.rows() != n) {
    throw std::invalid_argument("score_nodes: residual rows do not match agents");
  }
  std::vector<AnomalyScore> out;
  out.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double value = alpha * numerics::row_norm(recon.r_x, i) +
                         (1.0 - alpha) * numerics::row_norm(recon.r_e, i);
    out.push_back({recon.agents[i], round, value});
  }
  return out;
}

std::optional<AgentId> select_anomalies(const std::vector<AnomalyScore>& scores,
                                        const DetectionPolicy& policy, bool consensus_reached) {
  if (scores.empty()) throw std::invalid_argument("select_anomalies: no scores");
  policy.validate();
  if (policy.mode == PolicyMode::top1_on_no_consensus && consensus_reached) return std::nullopt;

  const AnomalyScore* best = nullptr;
  for (const auto& s : scores) {
    if (policy.mode == PolicyMode::threshold && !(s.value > policy.tau)) continue;
    if (!best || s.value > best->value || (s.value == best->value && s.agent < best->agent)) {
      best = &s;
    }
  }
  if (!best) return std::nullopt;
  return best->agent;
}

void prune(graph::TemporalGraph& g, std::optional<AgentId> selected, int round,
           const std::vector<AnomalyScore>& scores, RemovalLog& log) {
  if (!selected) return;
  auto it = std::find_if(scores.begin(), scores.end(),
                         [&](const AnomalyScore& s) { return s.agent == *selected; });
  if (g.remove_node(*selected, round)) {
    log.push_back({*selected, round, it == scores.end() ? 0.0 : it->value});
  }
}

}  // namespace guardian::anomaly
