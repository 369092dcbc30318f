#include "guardian/topology.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "guardian/rng.hpp"

namespace guardian::graph {

SparseTopology::SparseTopology(double fraction, std::uint64_t seed)
    : fraction_(fraction), seed_(seed) {
  if (!(fraction > 0.0 && fraction <= 1.0)) {
    throw std::invalid_argument("SparseTopology: fraction must be in (0, 1]");
  }
}

std::size_t SparseTopology::peers_per_agent(double fraction, std::size_t n) {
  if (n < 2) return 0;
  const double raw = fraction * static_cast<double>(n - 1);
  const auto m = static_cast<std::size_t>(std::ceil(raw - 1e-9));
  return std::clamp<std::size_t>(m, 1, n - 1);
}

std::vector<DirectedEdge> SparseTopology::realize(int round, std::span<const AgentId> active) const {
  std::vector<DirectedEdge> edges;
  const std::size_t n = active.size();
  if (round <= 1 || n < 2) return edges;
  const std::size_t m = peers_per_agent(fraction_, n);

  std::vector<AgentId> ring(active.begin(), active.end());
  std::sort(ring.begin(), ring.end());
  if (m < n - 1) {
    Rng rng = make_rng(seed_, {static_cast<std::uint64_t>(round), n});
    std::shuffle(ring.begin(), ring.end(), rng);
  }
  for (std::size_t p = 0; p < n; ++p)
    for (std::size_t s = 1; s <= m; ++s) edges.emplace_back(ring[p], ring[(p + s) % n]);
  std::sort(edges.begin(), edges.end());
  return edges;
}

TopologyOracle oracle_from_edges(int round, std::vector<DirectedEdge> edges) {
  std::sort(edges.begin(), edges.end());
  return [round, edges = std::move(edges)](int r, AgentId from, AgentId to) {
    return r == round && std::binary_search(edges.begin(), edges.end(), DirectedEdge{from, to});
  };
}

}  // namespace guardian::graph
