#include "guardian/param_store.hpp"

#include <cmath>

namespace guardian::numerics {

ParamEntry& ParamStore::add(std::string name, Tensor2D init) {
  if (index_.contains(name)) throw std::invalid_argument("ParamStore: duplicate entry " + name);
  ParamEntry entry;
  entry.name = name;
  entry.grad = Tensor2D(init.rows(), init.cols());
  entry.first_moment = Tensor2D(init.rows(), init.cols());
  entry.second_moment = Tensor2D(init.rows(), init.cols());
  entry.value = std::move(init);
  index_.emplace(std::move(name), entries_.size());
  entries_.push_back(std::move(entry));
  return entries_.back();
}

bool ParamStore::contains(std::string_view name) const { return index_.find(name) != index_.end(); }

ParamEntry& ParamStore::at(std::string_view name) {
  auto it = index_.find(name);
  if (it == index_.end()) throw std::out_of_range("ParamStore: no entry " + std::string(name));
  return entries_[it->second];
}

const ParamEntry& ParamStore::at(std::string_view name) const {
  auto it = index_.find(name);
  if (it == index_.end()) throw std::out_of_range("ParamStore: no entry " + std::string(name));
  return entries_[it->second];
}

void ParamStore::zero_grad() {
  for (auto& e : entries_) e.grad.fill(0.0);
}

std::size_t ParamStore::parameter_count() const {
  std::size_t n = 0;
  for (const auto& e : entries_) n += e.value.size();
  return n;
}

void adam_step(ParamStore& store, const AdamOptions& opts) {
  for (auto& e : store.entries()) {
    ++e.step;
    const double t = static_cast<double>(e.step);
    const double c1 = 1.0 - std::pow(opts.beta1, t);
    const double c2 = 1.0 - std::pow(opts.beta2, t);
    auto value = e.value.values();
    auto grad = e.grad.values();
    auto m = e.first_moment.values();
    auto v = e.second_moment.values();
    for (std::size_t i = 0; i < value.size(); ++i) {
      m[i] = opts.beta1 * m[i] + (1.0 - opts.beta1) * grad[i];
      v[i] = opts.beta2 * v[i] + (1.0 - opts.beta2) * grad[i] * grad[i];
      const double m_hat = m[i] / c1;
      const double v_hat = v[i] / c2;
      value[i] -= opts.lr * m_hat / (std::sqrt(v_hat) + opts.eps);
    }
  }
}

}  // namespace guardian::numerics
