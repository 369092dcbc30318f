#pragma once

#include <compare>
#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "guardian/embedder.hpp"
#include "guardian/tensor.hpp"

namespace guardian::graph {

using numerics::Tensor2D;

struct AgentId {
  std::uint32_t value = 0;
  friend auto operator<=>(AgentId, AgentId) = default;
};

/// Square boolean matrix; entry (i, j) means row agent i feeds column agent j.
class Adjacency {
 public:
  Adjacency() = default;
  explicit Adjacency(std::size_t n) : n_(n), bits_(n * n, 0) {}

  std::size_t size() const { return n_; }
  bool operator()(std::size_t i, std::size_t j) const { return bits_[i * n_ + j] != 0; }
  void set(std::size_t i, std::size_t j, bool v = true) { bits_[i * n_ + j] = v ? 1 : 0; }
  std::size_t edge_count() const;
  std::size_t out_degree(std::size_t i) const;
  std::size_t in_degree(std::size_t j) const;

  friend bool operator==(const Adjacency&, const Adjacency&) = default;

 private:
  std::size_t n_ = 0;
  std::vector<std::uint8_t> bits_;
};

/// One round of the collaboration: G_t = (V_t, E_t, X_t).
struct Snapshot {
  int round = 0;
  std::vector<AgentId> agents;
  Tensor2D features;
  Adjacency adjacency;
  std::vector<std::string> response_texts;

  std::optional<std::size_t> index_of(AgentId a) const;
  /// Copy with one agent and its incident edges dropped.
  Snapshot without(AgentId a) const;
};

/// Communication record (v_{t-1,from}, v_{t,to}).
struct LayeredEdge {
  int from_round = 0;
  AgentId from;
  int to_round = 0;
  AgentId to;
  friend auto operator<=>(const LayeredEdge&, const LayeredEdge&) = default;
};

struct Response {
  AgentId agent;
  std::string text;
};

/// Does `from`'s previous-round output feed `to` at `round`?
using TopologyOracle = std::function<bool(int round, AgentId from, AgentId to)>;

Snapshot build_snapshot(int round, const std::vector<Response>& responses,
                        const TopologyOracle& topology, const embedding::Embedder& embedder);

/// D^{-1/2} (sym(A) + I) D^{-1/2}.
Tensor2D normalized_adjacency(const Snapshot& s);
/// sym(A) + I as 0/1 values; the structure-decoder target.
Tensor2D self_looped_adjacency(const Snapshot& s);

struct RemovalRecord {
  AgentId agent;
  int from_round = 0;
  bool noop = false;
};

/// Presence of one agent across rounds 1..T of a merged batch.
using PresenceMask = std::vector<bool>;

struct MergedHistory {
  std::vector<Snapshot> snapshots;
  std::map<AgentId, PresenceMask> presence;
};

class TemporalGraph {
 public:
  /// Appends round t. Rounds must increase; removed agents may not reappear;
  /// every edge source must have been active in the previous round.
  void append(Snapshot s);

  const std::vector<Snapshot>& snapshots() const { return snapshots_; }
  bool empty() const { return snapshots_.empty(); }
  int latest_round() const { return snapshots_.empty() ? 0 : snapshots_.back().round; }
  const Snapshot& at_round(int round) const;

  /// Agent is excluded from every round after from_round. Returns false (and
  /// logs a no-op) if it was already removed.
  bool remove_node(AgentId a, int from_round);

  /// First round the agent is absent due to removal.
  std::optional<int> removed_since(AgentId a) const;
  bool is_removed(AgentId a, int round) const;
  /// Agents of the latest snapshot minus removals.
  std::vector<AgentId> active_agents() const;

  std::vector<LayeredEdge> layered_edges() const;
  const std::vector<RemovalRecord>& removal_log() const { return removal_log_; }

 private:
  std::vector<Snapshot> snapshots_;
  std::map<AgentId, int> removed_;
  std::vector<RemovalRecord> removal_log_;
};

/// Snapshots 1..upto with removed agents filtered, plus per-agent presence.
/// window > 0 keeps only the last `window` rounds.
MergedHistory merge_history(const TemporalGraph& g, int upto, std::size_t window = 0);

/// The last `window` snapshots of a merged batch (all of them when window is 0).
MergedHistory tail(const MergedHistory& batch, std::size_t window);

}  // namespace guardian::graph

template <>
struct std::hash<guardian::graph::AgentId> {
  std::size_t operator()(guardian::graph::AgentId a) const noexcept { return a.value; }
};
