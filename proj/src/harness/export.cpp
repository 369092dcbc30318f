#include <cstdio>
#include <set>
#include <sstream>

#include "guardian/harness.hpp"

namespace guardian::harness {

using nlohmann::json;

graph::TemporalGraph graph_from_log(const EpisodeLog& log, const embedding::Embedder& embedder) {
  graph::TemporalGraph g;
  for (const auto& r : log.rounds) {
    std::vector<graph::Response> responses;
    for (std::size_t i = 0; i < r.agents.size(); ++i) responses.push_back({r.agents[i], r.responses.at(i)});
    g.append(graph::build_snapshot(r.t, responses, graph::oracle_from_edges(r.t, r.edges), embedder));
    if (r.removed) g.remove_node(*r.removed, r.t);
  }
  return g;
}

ScoreMap scores_from_log(const EpisodeLog& log) {
  ScoreMap out;
  for (const auto& r : log.rounds) {
    if (!r.scores) continue;
    for (std::size_t i = 0; i < r.agents.size() && i < r.scores->size(); ++i) {
      out[{r.t, r.agents[i]}] = (*r.scores)[i];
    }
  }
  return out;
}

namespace {

std::string node_id(int round, AgentId a) {
  return "r" + std::to_string(round) + "_a" + std::to_string(a.value);
}

struct ExportEdge {
  graph::LayeredEdge edge;
  bool self = false;
  bool corrupted = false;
};

std::vector<ExportEdge> export_edges(const graph::TemporalGraph& g,
                                     std::span<const graph::LayeredEdge> corrupted) {
  const std::set<graph::LayeredEdge> bad(corrupted.begin(), corrupted.end());
  std::vector<ExportEdge> out;
  for (const auto& e : g.layered_edges()) out.push_back({e, false, bad.contains(e)});
  const auto& snaps = g.snapshots();
  for (std::size_t i = 0; i + 1 < snaps.size(); ++i) {
    for (AgentId a : snaps[i + 1].agents) {
      if (snaps[i].index_of(a)) {
        out.push_back({graph::LayeredEdge{snaps[i].round, a, snaps[i + 1].round, a}, true, false});
      }
    }
  }
  return out;
}

bool removed_at(const graph::TemporalGraph& g, int round, AgentId a) {
  for (const auto& rec : g.removal_log())
    if (!rec.noop && rec.agent == a && rec.from_round == round) return true;
  return false;
}

}  // namespace

json graph_to_json(const graph::TemporalGraph& g, const ScoreMap& scores,
                   std::span<const graph::LayeredEdge> corrupted) {
  json rounds = json::array();
  json nodes = json::array();
  for (const auto& s : g.snapshots()) {
    rounds.push_back(s.round);
    for (AgentId a : s.agents) {
      const auto it = scores.find({s.round, a});
      nodes.push_back({{"id", node_id(s.round, a)},
                       {"round", s.round},
                       {"agent", a.value},
                       {"score", it == scores.end() ? json(nullptr) : json(it->second)},
                       {"removed", removed_at(g, s.round, a)}});
    }
  }
  json edges = json::array();
  for (const auto& e : export_edges(g, corrupted)) {
    edges.push_back({{"source", node_id(e.edge.from_round, e.edge.from)},
                     {"target", node_id(e.edge.to_round, e.edge.to)},
                     {"kind", e.self ? "self" : "communication"},
                     {"corrupted", e.corrupted}});
  }
  return {{"rounds", rounds}, {"nodes", nodes}, {"edges", edges}};
}

std::string graph_to_dot(const graph::TemporalGraph& g, const ScoreMap& scores,
                         std::span<const graph::LayeredEdge> corrupted) {
  std::ostringstream out;
  out << "digraph temporal_graph {\n  rankdir=LR;\n  node [shape=circle];\n";
  for (const auto& s : g.snapshots()) {
    out << "  subgraph cluster_round_" << s.round << " {\n    label=\"round " << s.round << "\";\n";
    for (AgentId a : s.agents) {
      std::string label = "agent " + std::to_string(a.value);
      if (const auto it = scores.find({s.round, a}); it != scores.end()) {
        char buf[32];
        std::snprintf(buf, sizeof buf, "\\n%.3f", it->second);
        label += buf;
      }
      out << "    \"" << node_id(s.round, a) << "\" [label=\"" << label << "\"";
      if (removed_at(g, s.round, a)) out << ", style=filled, fillcolor=\"#f4a6a6\", xlabel=\"removed\"";
      out << "];\n";
    }
    out << "  }\n";
  }
  for (const auto& e : export_edges(g, corrupted)) {
    out << "  \"" << node_id(e.edge.from_round, e.edge.from) << "\" -> \""
        << node_id(e.edge.to_round, e.edge.to) << "\"";
    if (e.self) out << " [style=dashed, color=gray]";
    else if (e.corrupted) out << " [color=red, label=\"corrupted\"]";
    out << ";\n";
  }
  out << "}\n";
  return out.str();
}

std::vector<std::string> validate_graph_json(const json& j) {
  std::vector<std::string> errors;
  if (!j.is_object()) return {"graph: not an object"};
  for (const auto& [k, v] : j.items())
    if (k != "rounds" && k != "nodes" && k != "edges") errors.push_back("graph: unexpected key '" + k + "'");
  for (const char* key : {"rounds", "nodes", "edges"})
    if (!j.contains(key) || !j[key].is_array()) errors.push_back(std::string("graph: '") + key + "' must be an array");
  if (!errors.empty()) return errors;

  for (const auto& r : j["rounds"])
    if (!r.is_number_integer()) errors.push_back("graph: rounds must be integers");
  std::set<std::string> ids;
  for (const auto& n : j["nodes"]) {
    if (!n.is_object() || n.size() != 5 || !n.contains("id") || !n["id"].is_string() ||
        !n.contains("round") || !n["round"].is_number_integer() || !n.contains("agent") ||
        !n["agent"].is_number_unsigned() || !n.contains("score") ||
        !(n["score"].is_null() || n["score"].is_number()) || !n.contains("removed") ||
        !n["removed"].is_boolean()) {
      errors.push_back("graph: malformed node " + n.dump());
      continue;
    }
    if (!ids.insert(n["id"].get<std::string>()).second) errors.push_back("graph: duplicate node id");
  }
  for (const auto& e : j["edges"]) {
    if (!e.is_object() || e.size() != 4 || !e.contains("source") || !e["source"].is_string() ||
        !e.contains("target") || !e["target"].is_string() || !e.contains("kind") ||
        !(e["kind"] == "communication" || e["kind"] == "self") || !e.contains("corrupted") ||
        !e["corrupted"].is_boolean()) {
      errors.push_back("graph: malformed edge " + e.dump());
      continue;
    }
    if (!ids.contains(e["source"].get<std::string>()) || !ids.contains(e["target"].get<std::string>())) {
      errors.push_back("graph: edge references an unknown node");
    }
  }
  return errors;
}

}  // namespace guardian::harness
