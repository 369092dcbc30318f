#pragma once

#include <memory>
#include <random>
#include <string>
#include <vector>

#include "guardian/detector.hpp"
#include "guardian/embedder.hpp"
#include "guardian/rng.hpp"
#include "guardian/graph.hpp"
#include "guardian/simulator.hpp"
#include "guardian/topology.hpp"

namespace guardian::fixtures {

inline std::shared_ptr<const embedding::Embedder> hashing(std::size_t dim = 64) {
  embedding::EmbeddingConfig cfg;
  cfg.dim = dim;
  return std::make_shared<embedding::HashingEmbedder>(cfg);
}

/// Temporal graph from per-round texts (agent i speaks texts[t][i]) over a fixed topology.
inline graph::TemporalGraph graph_from_texts(const std::vector<std::vector<std::string>>& texts,
                                             const embedding::Embedder& embedder,
                                             double fraction = 1.0, std::uint64_t seed = 0) {
  graph::TemporalGraph g;
  const graph::SparseTopology topo(fraction, seed);
  for (std::size_t t = 0; t < texts.size(); ++t) {
    const int round = static_cast<int>(t) + 1;
    std::vector<graph::AgentId> active;
    std::vector<graph::Response> responses;
    for (std::size_t i = 0; i < texts[t].size(); ++i) {
      const graph::AgentId a{static_cast<std::uint32_t>(i)};
      active.push_back(a);
      responses.push_back({a, texts[t][i]});
    }
    g.append(graph::build_snapshot(round, responses, graph::oracle_from_edges(round, topo.realize(round, active)),
                                   embedder));
  }
  return g;
}

/// Four honest agents with distinct roles agreeing on one answer for three rounds.
inline std::vector<std::vector<std::string>> clean_texts() {
  const std::vector<std::string> roles = {"analyst", "critic", "solver", "checker"};
  std::vector<std::vector<std::string>> out;
  for (int t = 1; t <= 3; ++t) {
    std::vector<std::string> round;
    for (const auto& r : roles) round.push_back(sim::render_response("42", r, t));
    out.push_back(round);
  }
  return out;
}

inline sim::Task arithmetic_task(const std::string& id = "t0") {
  return sim::Task{id, "What is 5 plus 3?", {"8", "7", "9", "10"}, 0};
}

struct RandomCase {
  detector::DetectorConfig cfg;
  graph::MergedHistory batch;
};

/// Small random detector problem: up to 5 agents, 3 rounds, d <= 8, sometimes a removal.
inline RandomCase random_case(std::uint64_t seed) {
  Rng rng = make_rng(seed, {0xca5e});
  std::uniform_int_distribution<int> agents(2, 5), rounds(1, 3), dsel(0, 2), coin(0, 1);
  static const std::vector<std::string> words = {"answer", "is", "eight", "seven", "nine", "because",
                                                 "sum", "carry", "check", "agree", "wrong", "debate"};
  std::uniform_int_distribution<std::size_t> word(0, words.size() - 1), len(2, 6);
  RandomCase rc;
  rc.cfg.k = 16;
  rc.cfg.d = std::vector<std::size_t>{2, 4, 8}[dsel(rng)];
  rc.cfg.heads = (rc.cfg.d >= 4 && coin(rng)) ? 2 : 1;
  rc.cfg.seed = seed;
  rc.cfg.alpha = std::uniform_real_distribution<double>(0.1, 0.9)(rng);
  rc.cfg.lambda = std::uniform_real_distribution<double>(0.0, 0.5)(rng);

  const int n = agents(rng);
  const int t_max = rounds(rng);
  const auto emb = hashing(rc.cfg.k);
  const std::vector<double> fractions = {0.25, 0.5, 0.75, 1.0};
  const graph::SparseTopology topo(fractions[std::uniform_int_distribution<std::size_t>(0, 3)(rng)], seed);
  graph::TemporalGraph g;
  for (int t = 1; t <= t_max; ++t) {
    std::vector<graph::AgentId> active = t == 1 ? std::vector<graph::AgentId>{} : g.active_agents();
    if (t == 1)
      for (int i = 0; i < n; ++i) active.push_back(graph::AgentId{static_cast<std::uint32_t>(i)});
    std::vector<graph::Response> responses;
    for (auto a : active) {
      std::string text;
      for (std::size_t w = len(rng); w > 0; --w) text += words[word(rng)] + " ";
      responses.push_back({a, text});
    }
    g.append(graph::build_snapshot(t, responses, graph::oracle_from_edges(t, topo.realize(t, active)), *emb));
    if (t < t_max && active.size() > 2 && coin(rng)) g.remove_node(active[1], t);
  }
  rc.batch = graph::merge_history(g, t_max);
  return rc;
}

}  // namespace guardian::fixtures
