#include "guardian/grad_check.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

namespace guardian::numerics {

namespace {

double evaluate(const LossBuilder& loss_fn, ParamStore& store) {
  Tape tape;
  const double v = loss_fn(tape, store).scalar();
  if (!std::isfinite(v)) throw std::domain_error("grad_check: non-finite loss");
  return v;
}

}  // namespace

GradCheckResult grad_check(const LossBuilder& loss_fn, ParamStore& store,
                           const GradCheckOptions& opts) {
  if (!(opts.eps > 0.0)) throw std::invalid_argument("grad_check: eps must be positive");

  store.zero_grad();
  {
    Tape tape;
    Var loss = loss_fn(tape, store);
    if (!std::isfinite(loss.scalar())) throw std::domain_error("grad_check: non-finite loss");
    tape.backward(loss);
  }

  GradCheckResult result;
  std::mt19937_64 rng(opts.seed);
  for (auto& entry : store.entries()) {
    std::vector<std::size_t> coords(entry.value.size());
    std::iota(coords.begin(), coords.end(), 0);
    if (coords.size() > opts.coords_per_entry) {
      std::shuffle(coords.begin(), coords.end(), rng);
      coords.resize(opts.coords_per_entry);
    }
    for (std::size_t idx : coords) {
      double& slot = entry.value.values()[idx];
      const double saved = slot;
      slot = saved + opts.eps;
      const double up = evaluate(loss_fn, store);
      slot = saved - opts.eps;
      const double down = evaluate(loss_fn, store);
      slot = saved;

      const double numeric = (up - down) / (2.0 * opts.eps);
      const double analytic = entry.grad.values()[idx];
      const double denom = std::max({opts.floor, std::abs(analytic), std::abs(numeric)});
      const double rel = std::abs(analytic - numeric) / denom;
      ++result.coordinates_checked;
      if (rel > result.max_relative_error) {
        result.max_relative_error = rel;
        result.worst_entry = entry.name;
        result.worst_index = idx;
        result.worst_analytic = analytic;
        result.worst_numeric = numeric;
      }
    }
  }
  return result;
}

}  // namespace guardian::numerics
