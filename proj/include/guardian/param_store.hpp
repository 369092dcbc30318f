#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "guardian/tensor.hpp"

namespace guardian::numerics {

struct ParamEntry {
  std::string name;
  Tensor2D value;
  Tensor2D grad;
  Tensor2D first_moment;
  Tensor2D second_moment;
  std::uint64_t step = 0;
};

/// Named trainable parameters in insertion order.
class ParamStore {
 public:
  ParamEntry& add(std::string name, Tensor2D init);

  bool contains(std::string_view name) const;
  ParamEntry& at(std::string_view name);
  const ParamEntry& at(std::string_view name) const;

  std::vector<ParamEntry>& entries() { return entries_; }
  const std::vector<ParamEntry>& entries() const { return entries_; }

  void zero_grad();
  std::size_t parameter_count() const;

 private:
  std::vector<ParamEntry> entries_;
  std::map<std::string, std::size_t, std::less<>> index_;
};

struct AdamOptions {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

/// One bias-corrected Adam update of every entry. Gradients are left as-is.
void adam_step(ParamStore& store, const AdamOptions& opts = {});

}  // namespace guardian::numerics
