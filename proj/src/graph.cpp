#include "guardian/graph.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <stdexcept>

namespace guardian::graph {

std::size_t Adjacency::edge_count() const {
  return static_cast<std::size_t>(std::count(bits_.begin(), bits_.end(), std::uint8_t{1}));
}

std::size_t Adjacency::out_degree(std::size_t i) const {
  std::size_t d = 0;
  for (std::size_t j = 0; j < n_; ++j) d += (*this)(i, j) ? 1 : 0;
  return d;
}

std::size_t Adjacency::in_degree(std::size_t j) const {
  std::size_t d = 0;
  for (std::size_t i = 0; i < n_; ++i) d += (*this)(i, j) ? 1 : 0;
  return d;
}

std::optional<std::size_t> Snapshot::index_of(AgentId a) const {
  auto it = std::find(agents.begin(), agents.end(), a);
  if (it == agents.end()) return std::nullopt;
  return static_cast<std::size_t>(it - agents.begin());
}

Snapshot Snapshot::without(AgentId a) const {
  const auto drop = index_of(a);
  if (!drop) return *this;
  Snapshot out;
  out.round = round;
  std::vector<std::size_t> keep;
  for (std::size_t i = 0; i < agents.size(); ++i) {
    if (i != *drop) keep.push_back(i);
  }
  out.features = Tensor2D(keep.size(), features.cols());
  out.adjacency = Adjacency(keep.size());
  for (std::size_t r = 0; r < keep.size(); ++r) {
    out.agents.push_back(agents[keep[r]]);
    if (keep[r] < response_texts.size()) out.response_texts.push_back(response_texts[keep[r]]);
    for (std::size_t c = 0; c < features.cols(); ++c) out.features(r, c) = features(keep[r], c);
    for (std::size_t c = 0; c < keep.size(); ++c) out.adjacency.set(r, c, adjacency(keep[r], keep[c]));
  }
  return out;
}

Snapshot build_snapshot(int round, const std::vector<Response>& responses,
                        const TopologyOracle& topology, const embedding::Embedder& embedder) {
  if (round < 1) throw std::invalid_argument("build_snapshot: rounds start at 1");
  if (responses.empty()) throw std::invalid_argument("build_snapshot: no responses");
  std::set<AgentId> seen;
  for (const auto& r : responses) {
    if (!seen.insert(r.agent).second) {
      throw std::invalid_argument("build_snapshot: duplicate agent " + std::to_string(r.agent.value));
    }
  }

  const std::size_t n = responses.size();
  const std::size_t k = embedder.dim();
  Snapshot s;
  s.round = round;
  s.features = Tensor2D(n, k);
  s.adjacency = Adjacency(n);
  for (std::size_t i = 0; i < n; ++i) {
    s.agents.push_back(responses[i].agent);
    s.response_texts.push_back(responses[i].text);
    const auto vec = embedder.embed(responses[i].text);
    if (vec.size() != k) throw std::invalid_argument("build_snapshot: embedder dimension mismatch");
    std::copy(vec.begin(), vec.end(), s.features.row(i).begin());
  }
  // No previous round exists for round 1, so it has no communication edges.
  if (round > 1 && topology) {
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < n; ++j)
        if (i != j && topology(round, s.agents[i], s.agents[j])) s.adjacency.set(i, j);
  }
  return s;
}

Tensor2D self_looped_adjacency(const Snapshot& s) {
  const std::size_t n = s.agents.size();
  Tensor2D a(n, n);
  for (std::size_t i = 0; i < n; ++i) {
    a(i, i) = 1.0;
    for (std::size_t j = 0; j < n; ++j)
      if (s.adjacency(i, j) || s.adjacency(j, i)) a(i, j) = 1.0;
  }
  return a;
}

Tensor2D normalized_adjacency(const Snapshot& s) {
  Tensor2D a = self_looped_adjacency(s);
  const std::size_t n = a.rows();
  std::vector<double> inv_sqrt_deg(n);
  for (std::size_t i = 0; i < n; ++i) {
    double deg = 0.0;
    for (std::size_t j = 0; j < n; ++j) deg += a(i, j);
    inv_sqrt_deg[i] = 1.0 / std::sqrt(deg);
  }
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) a(i, j) *= inv_sqrt_deg[i] * inv_sqrt_deg[j];
  return a;
}

void TemporalGraph::append(Snapshot s) {
  if (!snapshots_.empty() && s.round <= snapshots_.back().round) {
    throw std::invalid_argument("TemporalGraph::append: round " + std::to_string(s.round) +
                                " does not follow " + std::to_string(snapshots_.back().round));
  }
  const std::size_t n = s.agents.size();
  if (s.features.rows() != n || s.adjacency.size() != n) {
    throw std::invalid_argument("TemporalGraph::append: snapshot dimensions disagree");
  }
  for (std::size_t i = 0; i < n; ++i) {
    if (s.adjacency(i, i)) throw std::invalid_argument("TemporalGraph::append: self edge");
    if (is_removed(s.agents[i], s.round)) {
      throw std::invalid_argument("TemporalGraph::append: agent " +
                                  std::to_string(s.agents[i].value) + " was removed");
    }
  }
  const Snapshot* prev = snapshots_.empty() ? nullptr : &snapshots_.back();
  for (std::size_t i = 0; i < n; ++i) {
    if (s.adjacency.out_degree(i) == 0) continue;
    if (!prev || prev->round != s.round - 1 || !prev->index_of(s.agents[i])) {
      throw std::invalid_argument("TemporalGraph::append: edge source " +
                                  std::to_string(s.agents[i].value) +
                                  " was not active in the previous round");
    }
  }
  snapshots_.push_back(std::move(s));
}

const Snapshot& TemporalGraph::at_round(int round) const {
  for (const auto& s : snapshots_)
    if (s.round == round) return s;
  throw std::out_of_range("TemporalGraph: no snapshot for round " + std::to_string(round));
}

bool TemporalGraph::remove_node(AgentId a, int from_round) {
  if (removed_.contains(a)) {
    removal_log_.push_back({a, from_round, true});
    return false;
  }
  const Snapshot& at = at_round(from_round);
  if (!at.index_of(a)) {
    throw std::invalid_argument("TemporalGraph::remove_node: agent " + std::to_string(a.value) +
                                " not active at round " + std::to_string(from_round));
  }
  removed_.emplace(a, from_round + 1);
  removal_log_.push_back({a, from_round, false});
  for (auto& s : snapshots_) {
    if (s.round > from_round) s = s.without(a);
  }
  return true;
}

std::optional<int> TemporalGraph::removed_since(AgentId a) const {
  auto it = removed_.find(a);
  if (it == removed_.end()) return std::nullopt;
  return it->second;
}

bool TemporalGraph::is_removed(AgentId a, int round) const {
  auto since = removed_since(a);
  return since && *since <= round;
}

std::vector<AgentId> TemporalGraph::active_agents() const {
  std::vector<AgentId> out;
  if (snapshots_.empty()) return out;
  for (AgentId a : snapshots_.back().agents)
    if (!removed_.contains(a)) out.push_back(a);
  return out;
}

std::vector<LayeredEdge> TemporalGraph::layered_edges() const {
  std::vector<LayeredEdge> out;
  for (const auto& s : snapshots_) {
    const std::size_t n = s.agents.size();
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < n; ++j)
        if (s.adjacency(i, j)) out.push_back({s.round - 1, s.agents[i], s.round, s.agents[j]});
  }
  return out;
}

MergedHistory merge_history(const TemporalGraph& g, int upto, std::size_t window) {
  if (upto > g.latest_round()) {
    throw std::invalid_argument("merge_history: round " + std::to_string(upto) +
                                " beyond latest " + std::to_string(g.latest_round()));
  }
  MergedHistory out;
  for (const auto& s : g.snapshots()) {
    if (s.round > upto) break;
    Snapshot filtered = s;
    for (AgentId a : s.agents)
      if (g.is_removed(a, s.round)) filtered = filtered.without(a);
    out.snapshots.push_back(std::move(filtered));
  }
  return tail(out, window);
}

MergedHistory tail(const MergedHistory& batch, std::size_t window) {
  MergedHistory out;
  const std::size_t skip =
      window > 0 && batch.snapshots.size() > window ? batch.snapshots.size() - window : 0;
  out.snapshots.assign(batch.snapshots.begin() + static_cast<std::ptrdiff_t>(skip),
                       batch.snapshots.end());
  const std::size_t t_count = out.snapshots.size();
  for (std::size_t t = 0; t < t_count; ++t) {
    for (AgentId a : out.snapshots[t].agents) {
      auto& mask = out.presence[a];
      mask.resize(t_count, false);
      mask[t] = true;
    }
  }
  return out;
}

}  // namespace guardian::graph
