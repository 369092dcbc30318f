#pragma once

#include <cstdint>
#include <functional>
#include <string>

#include "guardian/autograd.hpp"

namespace guardian::numerics {

/// Builds a scalar loss on the given tape from the store's current values.
/// Must be deterministic: any sampling has to be frozen by the caller.
using LossBuilder = std::function<Var(Tape&, ParamStore&)>;

struct GradCheckOptions {
  double eps = 1e-4;
  // Coordinates sampled per entry; entries smaller than this are checked fully.
  std::size_t coords_per_entry = 16;
  std::uint64_t seed = 7;
  // Denominator floor of the relative error, so exact zeros compare cleanly.
  double floor = 1e-6;
};

struct GradCheckResult {
  double max_relative_error = 0.0;
  std::string worst_entry;
  std::size_t worst_index = 0;
  double worst_analytic = 0.0;
  double worst_numeric = 0.0;
  std::size_t coordinates_checked = 0;
};

/// Compares tape gradients with central finite differences on a random subset
/// of coordinates. Values in the store are restored on return.
GradCheckResult grad_check(const LossBuilder& loss_fn, ParamStore& store,
                           const GradCheckOptions& opts = {});

}  // namespace guardian::numerics
