#pragma once

#include <cstdint>
#include <span>
#include <utility>
#include <vector>

#include "guardian/graph.hpp"

namespace guardian::graph {

using DirectedEdge = std::pair<AgentId, AgentId>;

/// Per-round communication pattern over the active agents.
///
/// Each agent reads exactly ceil(fraction * (n - 1)) peers and is read by as
/// many: agents are placed on a seeded random ring and each one feeds the
/// next m positions. fraction = 1 yields the complete digraph.
class SparseTopology {
 public:
  explicit SparseTopology(double fraction = 1.0, std::uint64_t seed = 0);

  double fraction() const { return fraction_; }
  static std::size_t peers_per_agent(double fraction, std::size_t n);

  /// Edges (from, to) delivered at `round`; empty for round 1.
  std::vector<DirectedEdge> realize(int round, std::span<const AgentId> active) const;

 private:
  double fraction_;
  std::uint64_t seed_;
};

TopologyOracle oracle_from_edges(int round, std::vector<DirectedEdge> edges);

}  // namespace guardian::graph
