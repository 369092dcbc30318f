#include "guardian/simulator.hpp"

#include <algorithm>
#include <cctype>
#include <random>

#include "guardian/pipeline.hpp"
#include "guardian/rng.hpp"
#include "internal/http.hpp"

namespace guardian::sim {

void Task::validate() const {
  if (answer_space.size() < 2) throw std::invalid_argument("Task " + id + ": need >= 2 answers");
  if (correct >= answer_space.size()) throw std::invalid_argument("Task " + id + ": correct index out of range");
  std::set<std::string> distinct(answer_space.begin(), answer_space.end());
  if (distinct.size() != answer_space.size()) {
    throw std::invalid_argument("Task " + id + ": duplicate answers");
  }
}

std::vector<AgentSpec> uniform_agents(std::size_t n, double p_correct, double p_follow, AgentKind kind) {
  std::vector<AgentSpec> out;
  for (std::size_t i = 0; i < n; ++i) {
    AgentSpec s;
    s.id = AgentId{static_cast<std::uint32_t>(i)};
    s.kind = kind;
    s.p_correct = p_correct;
    s.p_follow = p_follow;
    out.push_back(s);
  }
  return out;
}

AttackPlan AttackPlan::make(AttackKind kind, std::span<const AgentSpec> agents, std::uint64_t seed,
                            double persuasion) {
  AttackPlan plan;
  plan.kind = kind;
  plan.seed = seed;
  plan.persuasion = persuasion;
  if (kind == AttackKind::none || agents.empty()) return plan;
  Rng rng = make_rng(seed, {0xa77ac4});
  std::uniform_int_distribution<std::size_t> pick(0, agents.size() - 1);
  plan.target_agents = {agents[pick(rng)].id};
  plan.target_round = kind == AttackKind::comm_targeted ? 2 : 1;
  return plan;
}

void AttackPlan::validate() const {
  if (persuasion < 0.0) throw std::invalid_argument("AttackPlan: persuasion must be >= 0");
  switch (kind) {
    case AttackKind::none:
      return;
    case AttackKind::hallucination:
    case AttackKind::agent_targeted:
      if (target_agents.size() != 1 || target_round != 1) {
        throw std::invalid_argument("AttackPlan: agent attacks target exactly one agent in round 1");
      }
      return;
    case AttackKind::comm_targeted:
      if (target_agents.size() != 1 || target_round != 2) {
        throw std::invalid_argument("AttackPlan: communication attack targets one agent's round-2 in-edges");
      }
      return;
  }
}

bool GroundTruth::anomalous(int round, AgentId agent) const {
  for (const auto& r : rounds) {
    if (r.round != round) continue;
    for (std::size_t i = 0; i < r.agents.size(); ++i)
      if (r.agents[i] == agent) return r.h[i] || r.err[i];
  }
  return false;
}

std::size_t GroundTruth::count_h(int round) const {
  for (const auto& r : rounds)
    if (r.round == round) return static_cast<std::size_t>(std::count(r.h.begin(), r.h.end(), true));
  return 0;
}

std::size_t GroundTruth::count_err(int round) const {
  for (const auto& r : rounds)
    if (r.round == round) return static_cast<std::size_t>(std::count(r.err.begin(), r.err.end(), true));
  return 0;
}

std::string call_remote_agent(const RemoteAgentOptions& opts, AgentId agent, int round,
                              const std::string& prompt, const std::string& question,
                              const std::vector<std::string>& context) {
  nlohmann::json body = {{"agent_id", agent.value},
                         {"round", round},
                         {"prompt", prompt},
                         {"question", question},
                         {"context", context}};
  std::map<std::string, std::string> headers;
  if (!opts.token.empty()) headers["Authorization"] = "Bearer " + opts.token;
  nlohmann::json reply;
  try {
    reply = internal::post_json(opts.url, body, opts.timeout, headers);
  } catch (const internal::HttpError& e) {
    throw EpisodeAborted("remote agent " + std::to_string(agent.value) + " round " +
                         std::to_string(round) + ": " + e.what());
  }
  if (!reply.is_object() || !reply.contains("response") || !reply["response"].is_string()) {
    throw EpisodeAborted("remote agent " + std::to_string(agent.value) +
                         ": reply lacks a \"response\" string");
  }
  return reply["response"].get<std::string>();
}

std::string parse_answer(const std::string& response) {
  static const std::string key = "Answer:";
  auto trim = [](std::string s) {
    auto not_space = [](unsigned char c) { return !std::isspace(c); };
    s.erase(s.begin(), std::find_if(s.begin(), s.end(), not_space));
    s.erase(std::find_if(s.rbegin(), s.rend(), not_space).base(), s.end());
    return s;
  };
  const auto pos = response.find(key);
  if (pos == std::string::npos) return trim(response);
  const auto start = pos + key.size();
  const auto stop = response.find(". ", start);
  std::string answer = response.substr(start, stop == std::string::npos ? std::string::npos : stop - start);
  answer = trim(answer);
  if (!answer.empty() && answer.back() == '.') answer.pop_back();
  return answer;
}

std::string render_response(const std::string& answer, const std::string& role_prompt, int round) {
  return "Answer: " + answer + ". Reasoning: " + role_prompt + " " + std::to_string(round);
}

std::string adversarial_answer(const Task& task, std::uint64_t seed) {
  std::vector<std::size_t> wrong;
  for (std::size_t i = 0; i < task.answer_space.size(); ++i)
    if (i != task.correct) wrong.push_back(i);
  std::uint64_t task_hash = 0;
  for (unsigned char c : task.id) task_hash = splitmix64(task_hash ^ c);
  Rng rng = make_rng(seed, {0xadd, task_hash});
  std::uniform_int_distribution<std::size_t> pick(0, wrong.size() - 1);
  return task.answer_space[wrong[pick(rng)]];
}

Inbox deliver(const EpisodeState& state, std::span<const DirectedEdge> edges) {
  Inbox inbox;
  for (const auto& [from, to] : edges) {
    if (state.pruned.contains(from) || state.pruned.contains(to)) continue;
    auto it = state.last_outputs.find(from);
    if (it == state.last_outputs.end()) continue;
    const AgentOutput& out = it->second;
    inbox[to].push_back(Message{from, out.answer, out.text, out.h, out.err, false});
  }
  return inbox;
}

void apply_attack(const AttackPlan& plan, const Task& task, EpisodeState& state, Inbox& inbox,
                  int round, GroundTruth& truth) {
  for (auto& [id, st] : state.agents) st.forced.reset();
  if (plan.kind == AttackKind::none) return;
  plan.validate();
  const AgentId target = plan.target_agents.front();
  const bool active = state.agents.contains(target) && !state.pruned.contains(target);
  const std::string adv = adversarial_answer(task, plan.seed);

  switch (plan.kind) {
    case AttackKind::hallucination:
      if (round != plan.target_round) return;
      if (!active) throw std::invalid_argument("apply_attack: target agent is not active");
      state.agents[target].forced = adv;
      state.agents[target].h = true;
      state.agents[target].origin = true;
      return;
    case AttackKind::agent_targeted:
      if (round < plan.target_round) return;
      if (!active) {
        if (round == plan.target_round) throw std::invalid_argument("apply_attack: target agent is not active");
        return;
      }
      state.agents[target].forced = adv;
      state.agents[target].err = true;
      state.agents[target].origin = true;
      return;
    case AttackKind::comm_targeted: {
      if (round != plan.target_round) return;
      if (!active) throw std::invalid_argument("apply_attack: target agent is not active");
      auto it = inbox.find(target);
      if (it == inbox.end()) return;
      for (Message& m : it->second) {
        m = Message{m.from, adv, render_response(adv, "relayed", round - 1), false, true, true};
        truth.corrupted_edges.push_back({round - 1, m.from, round, target});
      }
      return;
    }
    case AttackKind::none:
      return;
  }
}

namespace {

struct Adoption {
  std::string answer;
  bool h = false;
  bool err = false;
  std::set<AgentId> sources;
};

// Weighted plurality of received answers; nullopt on ties or no messages.
std::optional<Adoption> majority(const std::vector<Message>& msgs, double persuasion) {
  std::map<std::string, double> tally;
  for (const auto& m : msgs) tally[m.answer] += (m.h || m.err) ? persuasion : 1.0;
  if (tally.empty()) return std::nullopt;
  double best = -1.0;
  int count = 0;
  std::string winner;
  for (const auto& [answer, w] : tally) {
    if (w > best) {
      best = w;
      winner = answer;
      count = 1;
    } else if (w == best) {
      ++count;
    }
  }
  if (count != 1) return std::nullopt;
  Adoption a;
  a.answer = winner;
  for (const auto& m : msgs) {
    if (m.answer != winner) continue;
    a.h = a.h || m.h;
    a.err = a.err || m.err;
    if (m.h || m.err) a.sources.insert(m.from);
  }
  return a;
}

std::string random_wrong(const Task& task, Rng& rng) {
  std::uniform_int_distribution<std::size_t> pick(0, task.answer_space.size() - 2);
  std::size_t idx = pick(rng);
  if (idx >= task.correct) ++idx;
  return task.answer_space[idx];
}

}  // namespace

std::vector<AgentOutput> step_round(const Task& task, std::span<const AgentSpec> specs,
                                    EpisodeState& state, const Inbox& inbox, int round,
                                    const AttackPlan& plan, std::uint64_t seed,
                                    const RemoteAgentOptions* remote) {
  if (round < 1) throw std::invalid_argument("step_round: rounds start at 1");
  static const std::vector<Message> kNoMessages;
  std::vector<AgentOutput> outputs;
  for (const AgentSpec& spec : specs) {
    if (state.pruned.contains(spec.id)) continue;
    AgentState& st = state.agents[spec.id];
    Rng rng = make_rng(seed, {static_cast<std::uint64_t>(round), spec.id.value, 0x57e9});
    auto inbox_it = inbox.find(spec.id);
    const std::vector<Message>& msgs = inbox_it == inbox.end() ? kNoMessages : inbox_it->second;
    std::string text;

    auto ask_remote = [&]() {
      if (!remote) throw EpisodeAborted("remote agent configured without an endpoint");
      std::vector<std::string> context;
      for (const auto& m : msgs) context.push_back(m.text);
      text = call_remote_agent(*remote, spec.id, round, spec.role_prompt, task.question, context);
      return parse_answer(text);
    };

    if (st.forced) {
      st.answer = *st.forced;
    } else if (round == 1 || st.answer.empty()) {
      if (spec.kind == AgentKind::remote) {
        st.answer = ask_remote();
      } else {
        std::bernoulli_distribution correct(spec.p_correct);
        st.answer = correct(rng) ? task.correct_answer() : random_wrong(task, rng);
      }
    } else {
      const bool holding = st.h || st.err;
      const bool sources_gone =
          !st.anomalous_sources.empty() &&
          std::all_of(st.anomalous_sources.begin(), st.anomalous_sources.end(),
                      [&](AgentId a) { return state.pruned.contains(a); });
      // Anomalous answers are absorbing until every anomalous source is pruned.
      // Remote agents answer for themselves every round.
      if (spec.kind == AgentKind::remote || !holding || (!st.origin && sources_gone)) {
        std::optional<Adoption> adopted;
        if (spec.kind == AgentKind::remote) {
          const std::string answer = ask_remote();
          if (answer != st.answer) {
            Adoption a;
            a.answer = answer;
            for (const auto& m : msgs) {
              if (m.answer != answer) continue;
              a.h = a.h || m.h;
              a.err = a.err || m.err;
              if (m.h || m.err) a.sources.insert(m.from);
            }
            adopted = a;
          }
        } else {
          std::bernoulli_distribution follow(spec.p_follow);
          if (follow(rng)) adopted = majority(msgs, plan.persuasion);
        }
        if (adopted && adopted->answer != st.answer) {
          st.answer = adopted->answer;
          st.h = adopted->h;
          st.err = adopted->err;
          st.anomalous_sources = adopted->sources;
        }
      }
    }
    if (text.empty()) text = render_response(st.answer, spec.role_prompt, round);
    outputs.push_back(AgentOutput{spec.id, st.answer, std::move(text), st.h, st.err});
  }
  return outputs;
}

std::optional<std::string> check_consensus(std::span<const AgentOutput> outputs) {
  if (outputs.empty()) throw std::invalid_argument("check_consensus: no responses");
  const std::string& first = outputs.front().answer;
  for (const auto& o : outputs)
    if (o.answer != first) return std::nullopt;
  return first;
}

namespace {

std::string majority_vote(std::span<const AgentOutput> outputs, const std::set<AgentId>& pruned) {
  std::map<std::string, std::size_t> votes;
  for (const auto& o : outputs)
    if (!pruned.contains(o.agent)) ++votes[o.answer];
  std::size_t best = 0;
  std::size_t count = 0;
  std::string winner = kNoConsensus;
  for (const auto& [answer, v] : votes) {
    if (v > best) {
      best = v;
      winner = answer;
      count = 1;
    } else if (v == best) {
      ++count;
    }
  }
  return count == 1 ? winner : std::string(kNoConsensus);
}

}  // namespace

EpisodeLog run_episode(const Task& task, std::span<const AgentSpec> specs,
                       const graph::SparseTopology& topology, const AttackPlan& plan,
                       pipeline::Pipeline* defense, const EpisodeOptions& opts) {
  if (opts.max_rounds < 1) throw std::invalid_argument("run_episode: max_rounds must be >= 1");
  task.validate();
  plan.validate();
  std::set<AgentId> ids;
  for (const auto& s : specs) {
    if (!ids.insert(s.id).second) throw std::invalid_argument("run_episode: duplicate agent id");
    if (s.p_correct < 0 || s.p_correct > 1 || s.p_follow < 0 || s.p_follow > 1) {
      throw std::invalid_argument("run_episode: probabilities must be in [0,1]");
    }
  }

  EpisodeLog log;
  log.task = task;
  log.ground_truth.available =
      std::none_of(specs.begin(), specs.end(), [](const AgentSpec& s) { return s.kind == AgentKind::remote; });

  EpisodeState state;
  for (const auto& s : specs) state.agents[s.id] = AgentState{};
  std::vector<AgentOutput> last;
  const int min_rounds = std::min(opts.min_rounds, opts.max_rounds);

  for (int t = 1; t <= opts.max_rounds; ++t) {
    std::vector<AgentId> active;
    for (const auto& s : specs)
      if (!state.pruned.contains(s.id)) active.push_back(s.id);
    if (active.empty()) break;

    state.round = t;
    const auto edges = topology.realize(t, active);
    Inbox inbox = deliver(state, edges);
    apply_attack(plan, task, state, inbox, t, log.ground_truth);
    last = step_round(task, specs, state, inbox, t, plan, opts.seed, opts.remote);
    log.api_calls += last.size();

    RoundRecord rec;
    rec.t = t;
    rec.edges = edges;
    RoundLabels labels;
    labels.round = t;
    std::vector<graph::Response> responses;
    for (const auto& o : last) {
      rec.agents.push_back(o.agent);
      rec.responses.push_back(o.text);
      rec.answers.push_back(o.answer);
      labels.agents.push_back(o.agent);
      labels.h.push_back(log.ground_truth.available && o.h);
      labels.err.push_back(log.ground_truth.available && o.err);
      responses.push_back({o.agent, o.text});
    }
    log.ground_truth.rounds.push_back(std::move(labels));

    const auto consensus = check_consensus(last);
    if (defense) {
      const auto decision =
          defense->ingest_round(responses, graph::oracle_from_edges(t, edges), consensus.has_value());
      rec.removed = decision.removed;
      std::vector<double> scores;
      for (const auto& s : decision.scores) scores.push_back(s.value);
      rec.scores = std::move(scores);
      if (decision.removed) state.pruned.insert(*decision.removed);
    }
    log.rounds.push_back(std::move(rec));
    state.last_outputs.clear();
    for (const auto& o : last) state.last_outputs[o.agent] = o;

    if (consensus && t >= min_rounds) {
      log.final_answer = *consensus;
      return log;
    }
  }
  log.final_answer = last.empty() ? std::string(kNoConsensus) : majority_vote(last, state.pruned);
  return log;
}

}  // namespace guardian::sim
