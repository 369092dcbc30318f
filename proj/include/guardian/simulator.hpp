#pragma once

#include <chrono>
#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "guardian/graph.hpp"
#include "guardian/topology.hpp"

namespace guardian::pipeline {
class Pipeline;
}

namespace guardian::sim {

using graph::AgentId;
using graph::DirectedEdge;
using graph::LayeredEdge;

struct Task {
  std::string id;
  std::string question;
  std::vector<std::string> answer_space;
  std::size_t correct = 0;

  const std::string& correct_answer() const { return answer_space.at(correct); }
  void validate() const;
};

enum class AgentKind { scripted, remote };

struct AgentSpec {
  AgentId id;
  AgentKind kind = AgentKind::scripted;
  double p_correct = 1.0;  // round-1 correctness
  double p_follow = 1.0;   // chance of adopting the received majority
  std::string role_prompt = "debater";
};

/// Builds n scripted agents sharing one role prompt.
std::vector<AgentSpec> uniform_agents(std::size_t n, double p_correct, double p_follow,
                                      AgentKind kind = AgentKind::scripted);

enum class AttackKind { none, hallucination, agent_targeted, comm_targeted };

struct AttackPlan {
  AttackKind kind = AttackKind::none;
  std::vector<AgentId> target_agents;
  int target_round = 1;
  std::uint64_t seed = 0;
  // Vote weight of a message carrying an anomalous answer. Values above the
  // number of honest peers let a single adversary sway an agent.
  double persuasion = 1.0;

  /// One seeded target among `agents`. Agent attacks fire in round 1, the
  /// communication attack on the target's round-2 in-edges.
  static AttackPlan make(AttackKind kind, std::span<const AgentSpec> agents, std::uint64_t seed,
                         double persuasion = 1.0);
  void validate() const;
};

struct RoundLabels {
  int round = 0;
  std::vector<AgentId> agents;
  std::vector<bool> h;
  std::vector<bool> err;
};

struct GroundTruth {
  bool available = true;
  std::vector<RoundLabels> rounds;
  std::vector<LayeredEdge> corrupted_edges;

  /// h or err for an agent at a round; false when unknown.
  bool anomalous(int round, AgentId agent) const;
  std::size_t count_h(int round) const;
  std::size_t count_err(int round) const;
};

/// What travels along a communication edge.
struct Message {
  AgentId from;
  std::string answer;
  std::string text;
  bool h = false;
  bool err = false;
  bool corrupted = false;
};

struct AgentState {
  std::string answer;
  bool h = false;
  bool err = false;
  bool origin = false;                // injection point; never recovers
  std::set<AgentId> anomalous_sources;  // senders whose anomalous answer was adopted
  std::optional<std::string> forced;  // answer imposed by an attack this round
};

struct AgentOutput {
  AgentId agent;
  std::string answer;
  std::string text;
  bool h = false;
  bool err = false;
};

using Inbox = std::map<AgentId, std::vector<Message>>;

struct EpisodeState {
  int round = 0;
  std::map<AgentId, AgentState> agents;
  std::set<AgentId> pruned;
  std::map<AgentId, AgentOutput> last_outputs;
};

class EpisodeAborted : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct RemoteAgentOptions {
  std::string url;
  std::string token;
  std::chrono::milliseconds timeout = std::chrono::seconds(30);
};

/// POST {"agent_id","round","prompt","question","context"} -> {"response"}.
std::string call_remote_agent(const RemoteAgentOptions& opts, AgentId agent, int round,
                              const std::string& prompt, const std::string& question,
                              const std::vector<std::string>& context);

/// "Answer: X. ..." -> X; otherwise the trimmed text.
std::string parse_answer(const std::string& response);

std::string render_response(const std::string& answer, const std::string& role_prompt, int round);

/// The fixed wrong answer used by every attack on this task.
std::string adversarial_answer(const Task& task, std::uint64_t seed);

/// Messages each active agent receives at `round` from its in-neighbours' previous outputs.
Inbox deliver(const EpisodeState& state, std::span<const DirectedEdge> edges);

/// Imposes the plan on this round: forced answers for targeted agents and
/// substituted messages on corrupted edges. Corrupted edges are appended to `truth`.
void apply_attack(const AttackPlan& plan, const Task& task, EpisodeState& state, Inbox& inbox,
                  int round, GroundTruth& truth);

/// Every active agent answers once. Randomness is drawn per (seed, round, agent).
std::vector<AgentOutput> step_round(const Task& task, std::span<const AgentSpec> specs,
                                    EpisodeState& state, const Inbox& inbox, int round,
                                    const AttackPlan& plan, std::uint64_t seed,
                                    const RemoteAgentOptions* remote = nullptr);

std::optional<std::string> check_consensus(std::span<const AgentOutput> outputs);

struct RoundRecord {
  int t = 0;
  std::vector<AgentId> agents;
  std::vector<std::string> responses;
  std::vector<std::string> answers;
  std::vector<DirectedEdge> edges;
  std::optional<AgentId> removed;
  std::optional<std::vector<double>> scores;
};

struct EpisodeLog {
  Task task;
  std::vector<RoundRecord> rounds;
  GroundTruth ground_truth;
  std::size_t api_calls = 0;
  std::string final_answer;
};

inline constexpr const char* kNoConsensus = "no-consensus";

struct EpisodeOptions {
  int max_rounds = 3;
  // Consensus ends the debate only from this round on.
  int min_rounds = 1;
  std::uint64_t seed = 0;
  const RemoteAgentOptions* remote = nullptr;
};

EpisodeLog run_episode(const Task& task, std::span<const AgentSpec> specs,
                       const graph::SparseTopology& topology, const AttackPlan& plan,
                       pipeline::Pipeline* defense, const EpisodeOptions& opts);

}  // namespace guardian::sim
