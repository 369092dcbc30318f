#include "guardian/autograd.hpp"

#include <algorithm>
#include <cmath>

namespace guardian::numerics {

const Tensor2D& Var::value() const { return tape_->node(id_).value; }
const Tensor2D& Var::grad() const { return tape_->node(id_).grad; }

double Var::scalar() const {
  const auto& v = value();
  if (v.rows() != 1 || v.cols() != 1) throw ShapeError("Var::scalar on " + v.shape_string());
  return v(0, 0);
}

Var Tape::constant(Tensor2D value) {
  nodes_.push_back(Node{std::move(value), {}, false, {}});
  return Var(this, nodes_.size() - 1);
}

Var Tape::parameter(ParamStore& store, std::string_view name) {
  auto key = std::make_pair(&store, std::string(name));
  if (auto it = binding_index_.find(key); it != binding_index_.end()) return Var(this, it->second);
  nodes_.push_back(Node{store.at(name).value, {}, true, {}});
  const std::size_t id = nodes_.size() - 1;
  bindings_.push_back(Binding{&store, std::string(name), id});
  binding_index_.emplace(std::move(key), id);
  return Var(this, id);
}

Var Tape::record(Tensor2D value, std::initializer_list<Var> inputs,
                 std::function<void(Tape&)> backward) {
  return record(std::move(value), std::span<const Var>(inputs.begin(), inputs.size()),
                std::move(backward));
}

Var Tape::record(Tensor2D value, std::span<const Var> inputs, std::function<void(Tape&)> backward) {
  bool needs_grad = false;
  for (const Var& in : inputs) {
    if (in.tape() != this) throw std::invalid_argument("Tape: input recorded on another tape");
    needs_grad = needs_grad || nodes_[in.id()].requires_grad;
  }
  if (!value.all_finite()) throw std::domain_error("Tape: op produced a non-finite value");
  nodes_.push_back(Node{std::move(value), {}, needs_grad, needs_grad ? std::move(backward) : nullptr});
  return Var(this, nodes_.size() - 1);
}

Tensor2D* Tape::grad_sink(Var v) {
  Node& n = nodes_[v.id()];
  if (!n.requires_grad) return nullptr;
  if (n.grad.empty() && !n.value.empty()) n.grad = Tensor2D(n.value.rows(), n.value.cols());
  return &n.grad;
}

void Tape::backward(Var loss) {
  if (loss.tape() != this) throw std::invalid_argument("Tape::backward: foreign variable");
  Node& root = nodes_[loss.id()];
  if (root.value.rows() != 1 || root.value.cols() != 1) {
    throw ShapeError("Tape::backward: loss must be 1x1, got " + root.value.shape_string());
  }
  if (!root.requires_grad) return;
  root.grad = Tensor2D(1, 1, 1.0);
  for (std::size_t i = loss.id() + 1; i-- > 0;) {
    Node& n = nodes_[i];
    if (n.backward && !n.grad.empty()) n.backward(*this);
  }
  for (const auto& b : bindings_) {
    const Node& n = nodes_[b.node];
    if (n.grad.empty()) continue;
    auto& entry = b.store->at(b.name);
    auto dst = entry.grad.values();
    auto src = n.grad.values();
    for (std::size_t k = 0; k < dst.size(); ++k) dst[k] += src[k];
  }
}

namespace {

void accumulate(Tensor2D* sink, const Tensor2D& g) {
  if (!sink) return;
  auto dst = sink->values();
  auto src = g.values();
  for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += src[i];
}

Tape& tape_of(Var a) {
  if (!a.valid()) throw std::invalid_argument("autograd op on an empty Var");
  return *a.tape();
}

}  // namespace

Var matmul(Var a, Var b) {
  Tape& t = tape_of(a);
  const std::size_t out = t.next_id();
  return t.record(numerics::matmul(a.value(), b.value()), {a, b}, [a, b, out](Tape& tp) {
    const Tensor2D& g = tp.node(out).grad;
    if (auto* ga = tp.grad_sink(a)) accumulate(ga, numerics::matmul(g, numerics::transpose(b.value())));
    if (auto* gb = tp.grad_sink(b)) accumulate(gb, numerics::matmul(numerics::transpose(a.value()), g));
  });
}

Var transpose(Var a) {
  Tape& t = tape_of(a);
  const std::size_t out = t.next_id();
  return t.record(numerics::transpose(a.value()), {a}, [a, out](Tape& tp) {
    accumulate(tp.grad_sink(a), numerics::transpose(tp.node(out).grad));
  });
}

Var add(Var a, Var b) {
  Tape& t = tape_of(a);
  const std::size_t out = t.next_id();
  return t.record(numerics::add(a.value(), b.value()), {a, b}, [a, b, out](Tape& tp) {
    const Tensor2D& g = tp.node(out).grad;
    accumulate(tp.grad_sink(a), g);
    accumulate(tp.grad_sink(b), g);
  });
}

Var sub(Var a, Var b) {
  Tape& t = tape_of(a);
  const std::size_t out = t.next_id();
  return t.record(numerics::sub(a.value(), b.value()), {a, b}, [a, b, out](Tape& tp) {
    const Tensor2D& g = tp.node(out).grad;
    accumulate(tp.grad_sink(a), g);
    accumulate(tp.grad_sink(b), numerics::scale(g, -1.0));
  });
}

Var mul(Var a, Var b) {
  Tape& t = tape_of(a);
  require_same_shape(a.value(), b.value(), "mul");
  Tensor2D v = a.value();
  for (std::size_t i = 0; i < v.size(); ++i) v.values()[i] *= b.value().values()[i];
  const std::size_t out = t.next_id();
  return t.record(std::move(v), {a, b}, [a, b, out](Tape& tp) {
    const Tensor2D& g = tp.node(out).grad;
    if (auto* ga = tp.grad_sink(a)) {
      for (std::size_t i = 0; i < g.size(); ++i) ga->values()[i] += g.values()[i] * b.value().values()[i];
    }
    if (auto* gb = tp.grad_sink(b)) {
      for (std::size_t i = 0; i < g.size(); ++i) gb->values()[i] += g.values()[i] * a.value().values()[i];
    }
  });
}

Var scale(Var a, double s) {
  Tape& t = tape_of(a);
  const std::size_t out = t.next_id();
  return t.record(numerics::scale(a.value(), s), {a}, [a, s, out](Tape& tp) {
    accumulate(tp.grad_sink(a), numerics::scale(tp.node(out).grad, s));
  });
}

Var add_scalar(Var a, double s) {
  Tape& t = tape_of(a);
  Tensor2D v = a.value();
  for (double& x : v.values()) x += s;
  const std::size_t out = t.next_id();
  return t.record(std::move(v), {a}, [a, out](Tape& tp) {
    accumulate(tp.grad_sink(a), tp.node(out).grad);
  });
}

Var add_row(Var a, Var row) {
  Tape& t = tape_of(a);
  if (row.rows() != 1 || row.cols() != a.cols()) {
    throw ShapeError("add_row: " + a.value().shape_string() + " + " + row.value().shape_string());
  }
  Tensor2D v = a.value();
  for (std::size_t r = 0; r < v.rows(); ++r)
    for (std::size_t c = 0; c < v.cols(); ++c) v(r, c) += row.value()(0, c);
  const std::size_t out = t.next_id();
  return t.record(std::move(v), {a, row}, [a, row, out](Tape& tp) {
    const Tensor2D& g = tp.node(out).grad;
    accumulate(tp.grad_sink(a), g);
    if (auto* gr = tp.grad_sink(row)) {
      for (std::size_t r = 0; r < g.rows(); ++r)
        for (std::size_t c = 0; c < g.cols(); ++c) (*gr)(0, c) += g(r, c);
    }
  });
}

Var relu(Var a) {
  Tape& t = tape_of(a);
  const std::size_t out = t.next_id();
  return t.record(activation(Activation::relu, a.value()), {a}, [a, out](Tape& tp) {
    if (auto* ga = tp.grad_sink(a)) {
      const Tensor2D& g = tp.node(out).grad;
      for (std::size_t i = 0; i < g.size(); ++i) {
        if (a.value().values()[i] > 0.0) ga->values()[i] += g.values()[i];
      }
    }
  });
}

Var sigmoid(Var a) {
  Tape& t = tape_of(a);
  const std::size_t out = t.next_id();
  return t.record(activation(Activation::sigmoid, a.value()), {a}, [a, out](Tape& tp) {
    if (auto* ga = tp.grad_sink(a)) {
      const Tensor2D& g = tp.node(out).grad;
      const Tensor2D& y = tp.node(out).value;
      for (std::size_t i = 0; i < g.size(); ++i) {
        const double x = a.value().values()[i];
        if (x < -kSigmoidClamp || x > kSigmoidClamp) continue;
        const double s = y.values()[i];
        ga->values()[i] += g.values()[i] * s * (1.0 - s);
      }
    }
  });
}

Var exp(Var a) {
  Tape& t = tape_of(a);
  Tensor2D v = a.value();
  for (double& x : v.values()) x = std::exp(x);
  const std::size_t out = t.next_id();
  return t.record(std::move(v), {a}, [a, out](Tape& tp) {
    if (auto* ga = tp.grad_sink(a)) {
      const Tensor2D& g = tp.node(out).grad;
      const Tensor2D& y = tp.node(out).value;
      for (std::size_t i = 0; i < g.size(); ++i) ga->values()[i] += g.values()[i] * y.values()[i];
    }
  });
}

Var square(Var a) {
  Tape& t = tape_of(a);
  Tensor2D v = a.value();
  for (double& x : v.values()) x *= x;
  const std::size_t out = t.next_id();
  return t.record(std::move(v), {a}, [a, out](Tape& tp) {
    if (auto* ga = tp.grad_sink(a)) {
      const Tensor2D& g = tp.node(out).grad;
      for (std::size_t i = 0; i < g.size(); ++i) {
        ga->values()[i] += 2.0 * a.value().values()[i] * g.values()[i];
      }
    }
  });
}

Var clamp(Var a, double lo, double hi) {
  Tape& t = tape_of(a);
  Tensor2D v = a.value();
  for (double& x : v.values()) x = std::clamp(x, lo, hi);
  const std::size_t out = t.next_id();
  return t.record(std::move(v), {a}, [a, lo, hi, out](Tape& tp) {
    if (auto* ga = tp.grad_sink(a)) {
      const Tensor2D& g = tp.node(out).grad;
      for (std::size_t i = 0; i < g.size(); ++i) {
        const double x = a.value().values()[i];
        if (x >= lo && x <= hi) ga->values()[i] += g.values()[i];
      }
    }
  });
}

Var sum(Var a) {
  Tape& t = tape_of(a);
  double total = 0.0;
  for (double x : a.value().values()) total += x;
  const std::size_t out = t.next_id();
  return t.record(Tensor2D(1, 1, total), {a}, [a, out](Tape& tp) {
    if (auto* ga = tp.grad_sink(a)) {
      const double g = tp.node(out).grad(0, 0);
      for (double& x : ga->values()) x += g;
    }
  });
}

Var softmax_rows(Var a) {
  Tape& t = tape_of(a);
  const std::size_t out = t.next_id();
  return t.record(numerics::softmax_rows(a.value()), {a}, [a, out](Tape& tp) {
    if (auto* ga = tp.grad_sink(a)) {
      const Tensor2D& g = tp.node(out).grad;
      const Tensor2D& y = tp.node(out).value;
      for (std::size_t r = 0; r < y.rows(); ++r) {
        double dot = 0.0;
        for (std::size_t c = 0; c < y.cols(); ++c) dot += g(r, c) * y(r, c);
        for (std::size_t c = 0; c < y.cols(); ++c) (*ga)(r, c) += y(r, c) * (g(r, c) - dot);
      }
    }
  });
}

Var slice_cols(Var a, std::size_t begin, std::size_t end) {
  Tape& t = tape_of(a);
  if (begin > end || end > a.cols()) {
    throw ShapeError("slice_cols: [" + std::to_string(begin) + "," + std::to_string(end) +
                     ") of " + a.value().shape_string());
  }
  Tensor2D v(a.rows(), end - begin);
  for (std::size_t r = 0; r < v.rows(); ++r)
    for (std::size_t c = begin; c < end; ++c) v(r, c - begin) = a.value()(r, c);
  const std::size_t out = t.next_id();
  return t.record(std::move(v), {a}, [a, begin, out](Tape& tp) {
    if (auto* ga = tp.grad_sink(a)) {
      const Tensor2D& g = tp.node(out).grad;
      for (std::size_t r = 0; r < g.rows(); ++r)
        for (std::size_t c = 0; c < g.cols(); ++c) (*ga)(r, c + begin) += g(r, c);
    }
  });
}

Var concat_cols(std::span<const Var> parts) {
  if (parts.empty()) throw ShapeError("concat_cols: no inputs");
  Tape& t = tape_of(parts.front());
  const std::size_t rows = parts.front().rows();
  std::size_t cols = 0;
  for (const Var& p : parts) {
    if (p.rows() != rows) throw ShapeError("concat_cols: row mismatch");
    cols += p.cols();
  }
  Tensor2D v(rows, cols);
  std::vector<std::size_t> offsets;
  std::size_t off = 0;
  for (const Var& p : parts) {
    offsets.push_back(off);
    for (std::size_t r = 0; r < rows; ++r)
      for (std::size_t c = 0; c < p.cols(); ++c) v(r, off + c) = p.value()(r, c);
    off += p.cols();
  }
  std::vector<Var> inputs(parts.begin(), parts.end());
  const std::size_t out = t.next_id();
  return t.record(std::move(v), parts, [inputs, offsets, out](Tape& tp) {
    const Tensor2D& g = tp.node(out).grad;
    for (std::size_t k = 0; k < inputs.size(); ++k) {
      auto* gk = tp.grad_sink(inputs[k]);
      if (!gk) continue;
      for (std::size_t r = 0; r < gk->rows(); ++r)
        for (std::size_t c = 0; c < gk->cols(); ++c) (*gk)(r, c) += g(r, offsets[k] + c);
    }
  });
}

Var gather_rows(Var a, std::span<const std::size_t> rows) {
  Tape& t = tape_of(a);
  Tensor2D v(rows.size(), a.cols());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (rows[i] >= a.rows()) throw ShapeError("gather_rows: index out of range");
    for (std::size_t c = 0; c < a.cols(); ++c) v(i, c) = a.value()(rows[i], c);
  }
  std::vector<std::size_t> idx(rows.begin(), rows.end());
  const std::size_t out = t.next_id();
  return t.record(std::move(v), {a}, [a, idx, out](Tape& tp) {
    if (auto* ga = tp.grad_sink(a)) {
      const Tensor2D& g = tp.node(out).grad;
      for (std::size_t i = 0; i < idx.size(); ++i)
        for (std::size_t c = 0; c < g.cols(); ++c) (*ga)(idx[i], c) += g(i, c);
    }
  });
}

Var concat_rows(std::span<const Var> parts) {
  if (parts.empty()) throw ShapeError("concat_rows: no inputs");
  Tape& t = tape_of(parts.front());
  const std::size_t cols = parts.front().cols();
  std::size_t rows = 0;
  for (const Var& p : parts) {
    if (p.cols() != cols) throw ShapeError("concat_rows: column mismatch");
    rows += p.rows();
  }
  std::vector<double> values;
  values.reserve(rows * cols);
  for (const Var& p : parts) {
    auto src = p.value().values();
    values.insert(values.end(), src.begin(), src.end());
  }
  std::vector<Var> inputs(parts.begin(), parts.end());
  const std::size_t out = t.next_id();
  return t.record(Tensor2D(rows, cols, std::move(values)), parts, [inputs, out](Tape& tp) {
    const Tensor2D& g = tp.node(out).grad;
    std::size_t offset = 0;
    for (const Var& in : inputs) {
      const std::size_t n = in.value().size();
      if (auto* gi = tp.grad_sink(in)) {
        for (std::size_t k = 0; k < n; ++k) gi->values()[k] += g.values()[offset + k];
      }
      offset += n;
    }
  });
}

Var bce_with_logits_sum(Var logits, const Tensor2D& targets) {
  Tape& t = tape_of(logits);
  require_same_shape(logits.value(), targets, "bce_with_logits_sum");
  // With p = sigmoid(x): -t log p - (1-t) log(1-p) = softplus(x) - t x.
  double total = 0.0;
  for (std::size_t i = 0; i < targets.size(); ++i) {
    const double x = std::clamp(logits.value().values()[i], -kSigmoidClamp, kSigmoidClamp);
    total += softplus(x) - targets.values()[i] * x;
  }
  const std::size_t out = t.next_id();
  return t.record(Tensor2D(1, 1, total), {logits}, [logits, targets, out](Tape& tp) {
    if (auto* gl = tp.grad_sink(logits)) {
      const double g = tp.node(out).grad(0, 0);
      for (std::size_t i = 0; i < targets.size(); ++i) {
        const double x = logits.value().values()[i];
        if (x < -kSigmoidClamp || x > kSigmoidClamp) continue;
        gl->values()[i] += g * (numerics::sigmoid(x) - targets.values()[i]);
      }
    }
  });
}

}  // namespace guardian::numerics
