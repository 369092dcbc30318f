// Acceptance checks: one PASS/FAIL line per criterion, exit status 1 if any fail.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iterator>
#include <random>
#include <string>
#include <vector>

#include "guardian/grad_check.hpp"
#include "guardian/harness.hpp"
#include "support/dot_check.hpp"
#include "support/fixtures.hpp"

using namespace guardian;
using numerics::Tensor2D;

namespace {

struct Outcome {
  bool ok = false;
  std::string detail;
};

struct Criterion {
  int id;
  const char* name;
  double limit_seconds;
  std::function<Outcome()> run;
};

char buf[512];

template <typename... Args>
std::string format(const char* fmt, Args... args) {
  std::snprintf(buf, sizeof buf, fmt, args...);
  return buf;
}

Outcome gradient_fidelity() {
  numerics::GradCheckOptions opts;
  opts.eps = 1e-4;
  double worst = 0.0;
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const auto rc = fixtures::random_case(seed);
    detector::GuardianDetector det(rc.cfg);
    for (int term = 0; term < 4; ++term) {
      auto loss = [&](numerics::Tape& tape, numerics::ParamStore&) {
        Rng frozen = make_rng(seed, {0xf00d});
        const auto fp = det.forward(tape, rc.batch, &frozen);
        switch (term) {
          case 0: return fp.l_total;
          case 1: return fp.l_att;
          case 2: return fp.l_stru;
          default: return fp.kl;
        }
      };
      worst = std::max(worst, numerics::grad_check(loss, det.params(), opts).max_relative_error);
    }
  }
  return {worst < 1e-4, format("max relative error %.3g over 10 configs x 4 terms", worst)};
}

Outcome loss_identities() {
  Rng rng = make_rng(2, {});
  std::uniform_real_distribution<double> u(0, 5), unit(0, 1), wide(-4, 4);
  double rec_err = 0, total_err = 0, gamma_err = 0, min_kl = 0;
  for (int i = 0; i < 1000; ++i) {
    const double alpha = unit(rng), lambda = unit(rng), beta = u(rng);
    const double gamma = detector::gib_gamma(lambda, beta);
    gamma_err = std::max(gamma_err, std::abs(gamma - lambda / (1 + lambda * beta)));
    Tensor2D mu(3, 4), lv(3, 4);
    for (double& v : mu.values()) v = wide(rng);
    for (double& v : lv.values()) v = wide(rng);
    const double kl = detector::kl_term(mu, lv);
    min_kl = std::min(min_kl, kl);
    const auto b = detector::LossBreakdown::compose(u(rng), u(rng), kl, alpha, gamma);
    rec_err = std::max(rec_err, std::abs(b.l_rec - (alpha * b.l_att + (1 - alpha) * b.l_stru)));
    total_err = std::max(total_err, std::abs(b.l_total - (b.l_rec + gamma * b.kl)));
  }
  const bool ok = rec_err <= 1e-12 && total_err <= 1e-12 && gamma_err <= 1e-15 && min_kl >= 0;
  return {ok, format("rec %.2g, total %.2g, gamma %.2g, min kl %.3g", rec_err, total_err, gamma_err, min_kl)};
}

Outcome analytic_fixtures() {
  graph::Snapshot s;
  s.round = 2;
  s.agents = {graph::AgentId{0}, graph::AgentId{1}};
  s.adjacency = graph::Adjacency(2);
  s.adjacency.set(0, 1);
  const auto a = graph::normalized_adjacency(s);
  double adj_err = 0;
  for (double v : a.values()) adj_err = std::max(adj_err, std::abs(v - 0.5));

  detector::Reconstruction r;
  r.x_hat = Tensor2D(2, 2);
  r.edge_probs = Tensor2D(2, 2, 0.5);
  const auto b = detector::compute_losses(Tensor2D(2, 2), Tensor2D::identity(2), r, 0.0, detector::DetectorConfig{});
  const double stru_err = std::abs(b.l_stru - std::log(2.0));
  const double kl = detector::kl_term(Tensor2D(3, 4), Tensor2D(3, 4));
  return {adj_err <= 1e-15 && stru_err <= 1e-9 && kl == 0.0,
          format("adjacency err %.2g, |l_stru - ln 2| %.2g, kl %g", adj_err, stru_err, kl)};
}

Outcome training_convergence() {
  const auto emb = fixtures::hashing();
  const auto batch = graph::merge_history(fixtures::graph_from_texts(fixtures::clean_texts(), *emb), 3);
  int good = 0;
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    detector::DetectorConfig cfg;
    cfg.seed = seed;
    detector::GuardianDetector det(cfg);
    const double initial = det.evaluate(batch).l_total;
    Rng rng = make_rng(seed, {0x7a11});
    det.fit(batch, 50, rng);
    good += det.evaluate(batch).l_total < 0.5 * initial;
  }
  return {good >= 95, format("%d/100 seeds below half the initial loss", good)};
}

harness::ExperimentConfig benchmark(sim::AttackKind kind) {
  harness::ExperimentConfig cfg;
  cfg.attack = kind;
  cfg.tasks = 100;
  cfg.n_agents = 4;
  cfg.topology = 1.0;
  cfg.seed = 0;
  return cfg;
}

Outcome detection_benchmark() {
  bool ok = true;
  std::string detail;
  for (auto kind : {sim::AttackKind::agent_targeted, sim::AttackKind::hallucination}) {
    const auto m = harness::run_experiment(benchmark(kind)).metrics;
    const double rate = m.detection_rate.value_or(0.0), fdr = m.fdr.value_or(1.0);
    ok = ok && rate >= 0.8 && fdr <= 0.2;
    detail += format("%s: detection %.3f fdr %.3f (%zu removals); ", harness::to_string(kind).c_str(), rate, fdr,
                     m.removals);
  }
  return {ok, detail.substr(0, detail.size() - 2)};
}

Outcome propagation_invariants() {
  const double fractions[] = {0.25, 0.5, 0.75, 1.0};
  const sim::AttackKind kinds[] = {sim::AttackKind::none, sim::AttackKind::hallucination,
                                   sim::AttackKind::agent_targeted, sim::AttackKind::comm_targeted};
  const auto tasks = harness::synthetic_corpus(50, 4, 6);
  int violations = 0;
  for (std::uint64_t seed = 0; seed < 1000; ++seed) {
    Rng rng = make_rng(seed, {0x9e0});
    const std::size_t n = 2 + rng() % 6;
    const auto specs = sim::uniform_agents(n, 0.25 * (1 + rng() % 4), 0.25 * (rng() % 5));
    const auto plan = sim::AttackPlan::make(kinds[seed % 4], specs, seed, 1.0 + static_cast<double>(rng() % 4));
    sim::EpisodeOptions opts;
    opts.max_rounds = 2 + static_cast<int>(rng() % 4);
    opts.min_rounds = opts.max_rounds;
    opts.seed = seed;
    const auto log = sim::run_episode(tasks[seed % tasks.size()], specs,
                                      graph::SparseTopology(fractions[rng() % 4], seed), plan, nullptr, opts);
    for (int t = 2; t <= static_cast<int>(log.rounds.size()); ++t) {
      violations += log.ground_truth.count_err(t) < log.ground_truth.count_err(t - 1);
      violations += log.ground_truth.count_h(t) < log.ground_truth.count_h(t - 1);
    }
  }
  return {violations == 0, format("%d violations over 1000 episodes", violations)};
}

Outcome cost_reduction() {
  int worse = 0;
  double defended_total = 0, open_total = 0;
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    auto cfg = benchmark(sim::AttackKind::agent_targeted);
    cfg.tasks = 10;
    cfg.seed = seed;
    const double defended = harness::run_experiment(cfg).metrics.api_calls_mean;
    cfg.defend = false;
    const double open = harness::run_experiment(cfg).metrics.api_calls_mean;
    worse += defended > open;
    defended_total += defended;
    open_total += open;
  }
  return {worse == 0, format("%d/50 seeds where defense cost more; mean calls %.2f vs %.2f", worse,
                             defended_total / 50, open_total / 50)};
}

std::vector<pipeline::Decision> stream_decisions(std::uint64_t seed, bool static_variant) {
  auto pc = harness::ExperimentConfig::default_pipeline();
  pc.detector.seed = seed;
  if (static_variant) pc.detector.variant = detector::Variant::static_graph;
  else pc.detector.history_window = 1;
  pipeline::Pipeline pipe(pc, fixtures::hashing());
  const auto specs = sim::uniform_agents(4, 1.0, 1.0);
  const auto tasks = harness::synthetic_corpus(4, 4, seed);
  std::vector<pipeline::Decision> out;
  for (std::size_t i = 0; i < tasks.size(); ++i) {
    pipe.begin_episode();
    sim::EpisodeOptions opts;
    opts.min_rounds = 3;
    opts.seed = derive_seed(seed, {i});
    const auto kind = i % 2 ? sim::AttackKind::comm_targeted : sim::AttackKind::agent_targeted;
    sim::run_episode(tasks[i], specs, graph::SparseTopology(0.75, seed), sim::AttackPlan::make(kind, specs, seed, 3.0),
                     &pipe, opts);
    out.insert(out.end(), pipe.episode_decisions().begin(), pipe.episode_decisions().end());
  }
  return out;
}

Outcome variant_contract() {
  int mismatched = 0;
  std::size_t decisions = 0;
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const auto s = stream_decisions(seed, true);
    const auto t = stream_decisions(seed, false);
    bool same = s.size() == t.size();
    for (std::size_t i = 0; same && i < s.size(); ++i) {
      same = s[i].round == t[i].round && s[i].removed == t[i].removed && s[i].batch_rounds == 1 &&
             t[i].batch_rounds == 1 && s[i].scores.size() == t[i].scores.size() &&
             s[i].trace.size() == t[i].trace.size();
      for (std::size_t k = 0; same && k < s[i].scores.size(); ++k)
        same = s[i].scores[k].agent == t[i].scores[k].agent && s[i].scores[k].value == t[i].scores[k].value;
      for (std::size_t k = 0; same && k < s[i].trace.size(); ++k) same = s[i].trace[k].l_total == t[i].trace[k].l_total;
    }
    mismatched += !same;
    decisions += s.size();
  }
  return {mismatched == 0, format("%d/20 seeds differ; %zu decisions compared", mismatched, decisions)};
}

Outcome determinism_and_formats() {
  namespace fs = std::filesystem;
  auto cfg = benchmark(sim::AttackKind::comm_targeted);
  cfg.tasks = 8;
  cfg.trials = 2;
  cfg.topology = 0.5;
  cfg.seed = 17;
  const fs::path root = fs::temp_directory_path() / "guardian_acceptance";
  fs::remove_all(root);
  auto read = [](const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    return std::string(std::istreambuf_iterator<char>(in), {});
  };
  const auto first = harness::run_experiment(cfg);
  harness::write_artifacts(root / "a", cfg, first);
  harness::write_artifacts(root / "b", cfg, harness::run_experiment(cfg));
  const bool identical = read(root / "a" / "episodes.json") == read(root / "b" / "episodes.json") &&
                         read(root / "a" / "metrics.csv") == read(root / "b" / "metrics.csv");

  std::size_t bad_json = 0, bad_dot = 0;
  const auto emb = fixtures::hashing();
  for (const auto& log : harness::read_episodes(root / "a" / "episodes.json")) {
    bad_json += !harness::validate_episode_json(harness::episode_to_json(log)).empty();
    const auto g = harness::graph_from_log(log, *emb);
    const auto scores = harness::scores_from_log(log);
    bad_json += !harness::validate_graph_json(harness::graph_to_json(g, scores, log.ground_truth.corrupted_edges)).empty();
    bad_dot += fixtures::DotChecker(harness::graph_to_dot(g, scores, log.ground_truth.corrupted_edges)).check().has_value();
  }
  fs::remove_all(root);
  return {identical && bad_json == 0 && bad_dot == 0,
          format("byte-identical %s; %zu invalid JSON, %zu unparsable DOT over %zu episodes", identical ? "yes" : "no",
                 bad_json, bad_dot, first.logs.size())};
}

}  // namespace

int main() {
  const std::vector<Criterion> criteria = {
      {1, "gradient fidelity", 30, gradient_fidelity},
      {2, "loss identities", 5, loss_identities},
      {3, "analytic fixtures", 1, analytic_fixtures},
      {4, "training convergence", 120, training_convergence},
      {5, "detection benchmark", 600, detection_benchmark},
      {6, "propagation invariants", 60, propagation_invariants},
      {7, "cost reduction", 300, cost_reduction},
      {8, "variant contract", 120, variant_contract},
      {9, "determinism and formats", 60, determinism_and_formats},
  };
  int failures = 0;
  for (const auto& c : criteria) {
    const auto start = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = c.run();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    const bool pass = o.ok && secs < c.limit_seconds;
    failures += !pass;
    std::printf("%s %d %s: %s [%.2fs, limit %.0fs]\n", pass ? "PASS" : "FAIL", c.id, c.name, o.detail.c_str(), secs,
                c.limit_seconds);
    std::fflush(stdout);
  }
  return failures == 0 ? 0 : 1;
}
