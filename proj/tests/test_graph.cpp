#include <gtest/gtest.h>

#include <algorithm>
#include <set>

#include "guardian/graph.hpp"
#include "guardian/topology.hpp"
#include "support/fixtures.hpp"

using namespace guardian;
using namespace guardian::graph;
using guardian::numerics::Tensor2D;

namespace {

std::vector<AgentId> ids(std::size_t n) {
  std::vector<AgentId> out;
  for (std::size_t i = 0; i < n; ++i) out.push_back(AgentId{static_cast<std::uint32_t>(i)});
  return out;
}

std::vector<Response> responses(std::size_t n, const std::string& prefix = "text") {
  std::vector<Response> out;
  for (AgentId a : ids(n)) out.push_back({a, prefix + " " + std::to_string(a.value)});
  return out;
}

TopologyOracle full() {
  return [](int, AgentId from, AgentId to) { return from != to; };
}

TemporalGraph two_round_graph(std::size_t n) {
  const auto emb = fixtures::hashing();
  TemporalGraph g;
  g.append(build_snapshot(1, responses(n), full(), *emb));
  g.append(build_snapshot(2, responses(n), full(), *emb));
  return g;
}

}  // namespace

TEST(BuildSnapshot, SingleAgentHasNoEdges) {
  const auto emb = fixtures::hashing();
  const auto s = build_snapshot(1, responses(1), full(), *emb);
  EXPECT_EQ(s.features.rows(), 1u);
  EXPECT_EQ(s.features.cols(), 64u);
  EXPECT_EQ(s.adjacency.size(), 1u);
  EXPECT_FALSE(s.adjacency(0, 0));
}

TEST(BuildSnapshot, FullTopologyIsAllTrueOffDiagonal) {
  const auto emb = fixtures::hashing();
  const auto s = build_snapshot(2, responses(4), full(), *emb);
  for (std::size_t i = 0; i < 4; ++i)
    for (std::size_t j = 0; j < 4; ++j) EXPECT_EQ(s.adjacency(i, j), i != j);
}

TEST(BuildSnapshot, RoundOneHasNoEdges) {
  const auto emb = fixtures::hashing();
  const auto s = build_snapshot(1, responses(4), full(), *emb);
  EXPECT_EQ(s.adjacency.edge_count(), 0u);
}

TEST(BuildSnapshot, HalfSparsityGivesTwoPeersEach) {
  const auto emb = fixtures::hashing();
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const SparseTopology topo(0.5, seed);
    const auto agents = ids(4);
    const auto s = build_snapshot(2, responses(4), oracle_from_edges(2, topo.realize(2, agents)), *emb);
    for (std::size_t i = 0; i < 4; ++i) {
      EXPECT_EQ(s.adjacency.out_degree(i), 2u);
      EXPECT_EQ(s.adjacency.in_degree(i), 2u);
      EXPECT_FALSE(s.adjacency(i, i));
    }
  }
}

TEST(BuildSnapshot, RejectsDuplicateAgents) {
  const auto emb = fixtures::hashing();
  std::vector<Response> r = {{AgentId{0}, "a"}, {AgentId{0}, "b"}};
  EXPECT_THROW(build_snapshot(1, r, full(), *emb), std::invalid_argument);
}

TEST(BuildSnapshot, RejectsEmptyResponses) {
  const auto emb = fixtures::hashing();
  EXPECT_THROW(build_snapshot(1, {}, full(), *emb), std::invalid_argument);
}

TEST(NormalizedAdjacency, SingleNodeIsOne) {
  const auto emb = fixtures::hashing();
  const auto a = normalized_adjacency(build_snapshot(1, responses(1), full(), *emb));
  EXPECT_EQ(a, Tensor2D::from_rows({{1.0}}));
}

TEST(NormalizedAdjacency, TwoNodesOneEdge) {
  Snapshot s;
  s.round = 2;
  s.agents = ids(2);
  s.adjacency = Adjacency(2);
  s.adjacency.set(0, 1);
  const auto a = normalized_adjacency(s);
  for (double v : a.values()) EXPECT_NEAR(v, 0.5, 1e-15);
}

TEST(NormalizedAdjacency, IsolatedNodesGiveIdentity) {
  Snapshot s;
  s.agents = ids(5);
  s.adjacency = Adjacency(5);
  EXPECT_EQ(normalized_adjacency(s), Tensor2D::identity(5));
}

TEST(NormalizedAdjacency, SymmetricAndBounded) {
  const auto emb = fixtures::hashing();
  for (double f : {0.25, 0.5, 0.75, 1.0}) {
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
      const SparseTopology topo(f, seed);
      const auto s = build_snapshot(2, responses(6), oracle_from_edges(2, topo.realize(2, ids(6))), *emb);
      const auto a = normalized_adjacency(s);
      for (std::size_t i = 0; i < 6; ++i)
        for (std::size_t j = 0; j < 6; ++j) {
          EXPECT_DOUBLE_EQ(a(i, j), a(j, i));
          EXPECT_GE(a(i, j), 0.0);
          EXPECT_LE(a(i, j), 1.0);
        }
    }
  }
}

TEST(TemporalGraph, RemoveAfterRoundOneLeavesSixEdges) {
  const auto emb = fixtures::hashing();
  TemporalGraph g;
  g.append(build_snapshot(1, responses(4), full(), *emb));
  ASSERT_TRUE(g.remove_node(AgentId{1}, 1));
  std::vector<Response> r2;
  for (AgentId a : g.active_agents()) r2.push_back({a, "x"});
  g.append(build_snapshot(2, r2, full(), *emb));
  EXPECT_EQ(g.at_round(2).agents.size(), 3u);
  const auto edges = g.layered_edges();
  EXPECT_EQ(edges.size(), 6u);
  for (const auto& e : edges) {
    EXPECT_EQ(e.to_round, e.from_round + 1);
    EXPECT_NE(e.from, AgentId{1});
    EXPECT_NE(e.to, AgentId{1});
  }
  // history preserved
  EXPECT_TRUE(g.at_round(1).index_of(AgentId{1}).has_value());
}

TEST(TemporalGraph, RemovingSoleAgentEmptiesFutureRounds) {
  const auto emb = fixtures::hashing();
  TemporalGraph g;
  g.append(build_snapshot(1, responses(1), full(), *emb));
  g.remove_node(AgentId{0}, 1);
  EXPECT_TRUE(g.active_agents().empty());
}

TEST(TemporalGraph, SecondRemovalIsLoggedNoop) {
  auto g = two_round_graph(3);
  EXPECT_TRUE(g.remove_node(AgentId{2}, 2));
  EXPECT_FALSE(g.remove_node(AgentId{2}, 2));
  ASSERT_EQ(g.removal_log().size(), 2u);
  EXPECT_FALSE(g.removal_log()[0].noop);
  EXPECT_TRUE(g.removal_log()[1].noop);
  EXPECT_EQ(g.active_agents().size(), 2u);
}

TEST(TemporalGraph, ActiveSetIsMonotone) {
  auto g = two_round_graph(5);
  std::size_t prev = g.active_agents().size();
  for (std::uint32_t a : {3u, 1u, 3u, 0u, 1u}) {
    g.remove_node(AgentId{a}, 2);
    const std::size_t now = g.active_agents().size();
    EXPECT_LE(now, prev);
    prev = now;
  }
  EXPECT_EQ(prev, 2u);
}

TEST(TemporalGraph, RejectsRemovedAgentReappearing) {
  const auto emb = fixtures::hashing();
  TemporalGraph g;
  g.append(build_snapshot(1, responses(3), full(), *emb));
  g.remove_node(AgentId{0}, 1);
  EXPECT_THROW(g.append(build_snapshot(2, responses(3), full(), *emb)), std::invalid_argument);
}

TEST(TemporalGraph, RejectsNonIncreasingRounds) {
  const auto emb = fixtures::hashing();
  TemporalGraph g;
  const TopologyOracle none = [](int, AgentId, AgentId) { return false; };
  g.append(build_snapshot(2, responses(2), none, *emb));
  EXPECT_THROW(g.append(build_snapshot(2, responses(2), none, *emb)), std::invalid_argument);
}

TEST(MergeHistory, NoRemovalsIsVerbatim) {
  const auto g = two_round_graph(3);
  const auto m = merge_history(g, 2);
  ASSERT_EQ(m.snapshots.size(), 2u);
  EXPECT_EQ(m.snapshots[1].agents, g.at_round(2).agents);
  EXPECT_EQ(m.snapshots[1].features, g.at_round(2).features);
  for (const auto& [a, mask] : m.presence) EXPECT_EQ(mask, (PresenceMask{true, true}));
}

TEST(MergeHistory, RemovedAgentMaskedAfterRemoval) {
  const auto emb = fixtures::hashing();
  TemporalGraph g;
  g.append(build_snapshot(1, responses(3), full(), *emb));
  g.remove_node(AgentId{1}, 1);
  std::vector<Response> r2 = {{AgentId{0}, "a"}, {AgentId{2}, "b"}};
  g.append(build_snapshot(2, r2, full(), *emb));
  const auto m = merge_history(g, 2);
  EXPECT_FALSE(m.snapshots[1].index_of(AgentId{1}).has_value());
  EXPECT_EQ(m.presence.at(AgentId{1}), (PresenceMask{true, false}));
}

TEST(MergeHistory, UptoOneIsSingleton) {
  const auto g = two_round_graph(3);
  EXPECT_EQ(merge_history(g, 1).snapshots.size(), 1u);
}

TEST(MergeHistory, WindowKeepsLastRounds) {
  const auto g = two_round_graph(3);
  const auto m = merge_history(g, 2, 1);
  ASSERT_EQ(m.snapshots.size(), 1u);
  EXPECT_EQ(m.snapshots[0].round, 2);
}

TEST(MergeHistory, RecomputationIsIdentical) {
  const auto g = two_round_graph(4);
  const auto a = merge_history(g, 2);
  const auto b = merge_history(g, 2);
  ASSERT_EQ(a.snapshots.size(), b.snapshots.size());
  for (std::size_t i = 0; i < a.snapshots.size(); ++i) {
    EXPECT_EQ(a.snapshots[i].features, b.snapshots[i].features);
    EXPECT_EQ(a.snapshots[i].adjacency, b.snapshots[i].adjacency);
  }
  EXPECT_EQ(a.presence, b.presence);
}

TEST(Topology, DegreesMatchFraction) {
  for (std::size_t n : {2u, 4u, 5u, 8u}) {
    for (double f : {0.25, 0.5, 0.75, 1.0}) {
      const SparseTopology topo(f, 9);
      const auto edges = topo.realize(3, ids(n));
      const std::size_t m = SparseTopology::peers_per_agent(f, n);
      EXPECT_EQ(edges.size(), n * m);
      std::map<AgentId, std::size_t> in;
      for (const auto& [from, to] : edges) {
        EXPECT_NE(from, to);
        ++in[to];
      }
      for (AgentId a : ids(n)) EXPECT_EQ(in[a], m) << "n=" << n << " f=" << f;
    }
  }
  EXPECT_EQ(SparseTopology::peers_per_agent(0.25, 4), 1u);
  EXPECT_EQ(SparseTopology::peers_per_agent(0.5, 4), 2u);
  EXPECT_EQ(SparseTopology::peers_per_agent(0.75, 4), 3u);
}

TEST(Topology, RoundOneIsEmptyAndSeedsAreStable) {
  const SparseTopology topo(0.25, 4);
  EXPECT_TRUE(topo.realize(1, ids(4)).empty());
  EXPECT_EQ(topo.realize(2, ids(6)), topo.realize(2, ids(6)));
  EXPECT_THROW(SparseTopology(0.0, 1), std::invalid_argument);
}
