#pragma once

#include <cstddef>
#include <functional>
#include <map>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "guardian/param_store.hpp"
#include "guardian/tensor.hpp"

namespace guardian::numerics {

class Tape;

/// Handle to a value recorded on a Tape. Valid only while the tape lives.
class Var {
 public:
  Var() = default;

  const Tensor2D& value() const;
  const Tensor2D& grad() const;
  std::size_t rows() const { return value().rows(); }
  std::size_t cols() const { return value().cols(); }
  double scalar() const;

  Tape* tape() const { return tape_; }
  std::size_t id() const { return id_; }
  bool valid() const { return tape_ != nullptr; }

 private:
  friend class Tape;
  Var(Tape* tape, std::size_t id) : tape_(tape), id_(id) {}
  Tape* tape_ = nullptr;
  std::size_t id_ = 0;
};

/// Reverse-mode gradient tape scoped to one forward pass.
///
/// Every op appends a node holding its value and a closure that pushes the
/// node's gradient into its inputs. backward() walks the nodes in reverse and
/// finally accumulates leaf gradients into the owning ParamStore entries.
class Tape {
 public:
  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  Var constant(Tensor2D value);
  /// Leaf bound to a store entry. Reusing the same name returns the same node.
  Var parameter(ParamStore& store, std::string_view name);

  /// Seeds d(loss)/d(loss) = 1 and propagates. loss must be 1x1.
  void backward(Var loss);

  std::size_t node_count() const { return nodes_.size(); }

  // Internal interface used by the op implementations.
  struct Node {
    Tensor2D value;
    Tensor2D grad;
    bool requires_grad = false;
    std::function<void(Tape&)> backward;
  };
  Var record(Tensor2D value, std::initializer_list<Var> inputs,
             std::function<void(Tape&)> backward);
  Var record(Tensor2D value, std::span<const Var> inputs, std::function<void(Tape&)> backward);
  Node& node(std::size_t id) { return nodes_[id]; }
  const Node& node(std::size_t id) const { return nodes_[id]; }
  /// Gradient buffer of an input, allocated on first use. Null when the input is constant.
  Tensor2D* grad_sink(Var v);
  std::size_t next_id() const { return nodes_.size(); }

 private:
  std::vector<Node> nodes_;
  struct Binding {
    ParamStore* store;
    std::string name;
    std::size_t node;
  };
  std::vector<Binding> bindings_;
  std::map<std::pair<ParamStore*, std::string>, std::size_t> binding_index_;
};

// Differentiable ops. Shapes follow the plain Tensor2D functions.
Var matmul(Var a, Var b);
Var transpose(Var a);
Var add(Var a, Var b);
Var sub(Var a, Var b);
Var mul(Var a, Var b);
Var scale(Var a, double s);
Var add_scalar(Var a, double s);
/// a (r x c) + row (1 x c) broadcast over rows.
Var add_row(Var a, Var row);
Var relu(Var a);
Var sigmoid(Var a);
Var exp(Var a);
Var square(Var a);
Var clamp(Var a, double lo, double hi);
Var sum(Var a);
Var softmax_rows(Var a);
Var slice_cols(Var a, std::size_t begin, std::size_t end);
Var concat_cols(std::span<const Var> parts);
Var gather_rows(Var a, std::span<const std::size_t> rows);
Var concat_rows(std::span<const Var> parts);
/// Sum over entries of -[t log p + (1-t) log(1-p)] with p = sigmoid(clamped logit).
Var bce_with_logits_sum(Var logits, const Tensor2D& targets);

}  // namespace guardian::numerics
