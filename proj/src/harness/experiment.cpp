#include <chrono>
#include <fstream>
#include <future>

#include "guardian/harness.hpp"
#include "guardian/rng.hpp"

namespace guardian::harness {

namespace {

std::uint64_t text_key(const std::string& s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

struct TrialOutput {
  std::vector<EpisodeLog> logs;
  std::optional<detector::GuardianDetector> detector;
};

TrialOutput run_trial(const ExperimentConfig& cfg, std::size_t trial, const std::vector<Task>& tasks,
                      const std::vector<sim::AgentSpec>& specs,
                      const std::shared_ptr<const embedding::Embedder>& embedder,
                      const sim::RemoteAgentOptions* remote) {
  std::optional<pipeline::Pipeline> defense;
  if (cfg.defend) {
    auto pc = cfg.pipeline;
    if (cfg.checkpoint.empty()) {
      pc.detector.seed = derive_seed(cfg.seed, {trial, 0xde7});
      defense.emplace(pc, embedder);
    } else {
      defense.emplace(pc, embedder, detector::load_checkpoint(cfg.checkpoint));
    }
  }

  TrialOutput out;
  for (const Task& task : tasks) {
    const std::uint64_t episode_seed = derive_seed(cfg.seed, {trial, text_key(task.id)});
    const graph::SparseTopology topology(cfg.topology, derive_seed(episode_seed, {0x70}));
    const auto plan = sim::AttackPlan::make(cfg.attack, specs, derive_seed(episode_seed, {0xa7}), cfg.persuasion);
    sim::EpisodeOptions opts;
    opts.max_rounds = cfg.max_rounds;
    opts.min_rounds = cfg.effective_min_rounds();
    opts.seed = episode_seed;
    opts.remote = remote;
    if (defense) defense->begin_episode();
    out.logs.push_back(sim::run_episode(task, specs, topology, plan, defense ? &*defense : nullptr, opts));
  }
  if (defense) out.detector = defense->detector();
  return out;
}

}  // namespace

ExperimentResult run_experiment(const ExperimentConfig& cfg) {
  cfg.validate();
  const auto start = std::chrono::steady_clock::now();

  const auto tasks = cfg.corpus.empty() ? synthetic_corpus(cfg.tasks, cfg.choices, derive_seed(cfg.seed, {0xc0}))
                                        : load_corpus(cfg.corpus);
  const auto timeout = std::chrono::milliseconds(static_cast<long long>(cfg.remote_timeout_seconds * 1000));
  std::shared_ptr<const embedding::Embedder> embedder;
  if (cfg.embedder_url.empty()) {
    embedding::EmbeddingConfig ec;
    ec.dim = cfg.pipeline.detector.k;
    embedder = std::make_shared<embedding::HashingEmbedder>(ec);
  } else {
    embedder = std::make_shared<embedding::RemoteEmbedder>(cfg.embedder_url, cfg.pipeline.detector.k, timeout);
  }

  std::optional<sim::RemoteAgentOptions> remote;
  auto kind = sim::AgentKind::scripted;
  if (!cfg.remote_agent_url.empty()) {
    remote = sim::RemoteAgentOptions{cfg.remote_agent_url, cfg.remote_agent_token, timeout};
    kind = sim::AgentKind::remote;
  }
  auto specs = sim::uniform_agents(cfg.n_agents, cfg.p_correct, cfg.p_follow, kind);
  for (auto& s : specs) s.role_prompt = cfg.role_prompt;

  std::vector<std::future<TrialOutput>> futures;
  for (std::size_t trial = 0; trial < cfg.trials; ++trial) {
    futures.push_back(std::async(std::launch::async, run_trial, std::cref(cfg), trial, std::cref(tasks),
                                 std::cref(specs), std::cref(embedder), remote ? &*remote : nullptr));
  }
  ExperimentResult result;
  for (auto& f : futures) {
    auto out = f.get();
    for (auto& log : out.logs) result.logs.push_back(std::move(log));
    if (out.detector) result.detectors.push_back(std::move(*out.detector));
  }

  DecayOptions decay = cfg.decay;
  decay.horizon = cfg.max_rounds;
  result.metrics = compute_metrics(result.logs, decay, cfg.pooling);
  if (cfg.record_runtime) {
    result.metrics.runtime_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  }
  return result;
}

void write_artifacts(const std::filesystem::path& dir, const ExperimentConfig& cfg,
                     const ExperimentResult& result) {
  std::filesystem::create_directories(dir);
  write_episodes(dir / "episodes.json", result.logs);
  std::ofstream csv(dir / "metrics.csv");
  if (!csv) throw std::runtime_error((dir / "metrics.csv").string() + ": cannot write metrics");
  csv << metrics_csv(config_hash(cfg), cfg.trials, result.metrics);
}

}  // namespace guardian::harness
