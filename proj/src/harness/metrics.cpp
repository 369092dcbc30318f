#include <algorithm>
#include <cmath>
#include <numeric>

#include "guardian/harness.hpp"

namespace guardian::harness {

double DecayOptions::weight(int t) const {
  if (t < 1) throw std::invalid_argument("DecayOptions::weight: rounds start at 1");
  if (kind == DecayKind::exponential) return std::pow(lambda, t - 1);
  if (horizon < 1) throw std::invalid_argument("DecayOptions::weight: horizon must be >= 1");
  return std::max(0.0, static_cast<double>(horizon - t + 1) / horizon);
}

namespace {

// Sorted before summing so the result does not depend on episode order.
double stable_sum(std::vector<double> values) {
  std::sort(values.begin(), values.end());
  return std::accumulate(values.begin(), values.end(), 0.0);
}

}  // namespace

MetricsReport compute_metrics(std::span<const EpisodeLog> logs, const DecayOptions& decay,
                              Pooling pooling) {
  if (logs.empty()) throw std::invalid_argument("compute_metrics: no episodes");
  MetricsReport m;
  m.episodes = logs.size();
  std::size_t correct = 0;
  std::size_t calls = 0;
  bool labelled = true;
  std::vector<double> weights, weighted_hits, episode_rates;

  for (const auto& log : logs) {
    if (log.final_answer == log.task.correct_answer()) ++correct;
    calls += log.api_calls;
    if (!log.ground_truth.available) labelled = false;
    double ew = 0.0, eh = 0.0;
    for (const auto& r : log.rounds) {
      if (!r.removed) continue;
      ++m.removals;
      const bool hit = log.ground_truth.anomalous(r.t, *r.removed);
      hit ? ++m.true_positives : ++m.false_positives;
      const double w = decay.weight(r.t);
      weights.push_back(w);
      weighted_hits.push_back(hit ? w : 0.0);
      ew += w;
      eh += hit ? w : 0.0;
    }
    if (ew > 0.0) episode_rates.push_back(eh / ew);
  }

  const double n = static_cast<double>(logs.size());
  m.accuracy = static_cast<double>(correct) / n;
  m.api_calls_mean = static_cast<double>(calls) / n;
  if (!labelled) return m;

  m.fdr = m.removals == 0 ? 0.0 : static_cast<double>(m.false_positives) / static_cast<double>(m.removals);
  if (pooling == Pooling::pooled) {
    const double total = stable_sum(weights);
    m.detection_rate = total > 0.0 ? stable_sum(weighted_hits) / total : 1.0;
  } else {
    m.detection_rate = episode_rates.empty()
                           ? 1.0
                           : stable_sum(episode_rates) / static_cast<double>(episode_rates.size());
  }
  return m;
}

}  // namespace guardian::harness
