#pragma once

#include <cstdint>
#include <string_view>
#include <vector>

#include "adaptkit/tensor.hpp"

namespace adaptkit {

enum class Activation { relu, gelu, swish, tanh };

std::string_view activation_name(Activation a);
Activation parse_activation(std::string_view name);  // throws ValidationError

// Elementwise activation on a raw value and its derivative. Shared by the
// tape and by reference implementations in tests.
double activate(Activation a, double x);
double activate_derivative(Activation a, double x);

enum class Primitive : std::uint8_t {
  leaf,
  matmul,
  add,
  add_bias,
  scale,
  activation,
  softmax_rows,
  layer_norm,
  embedding_lookup,
  pool_first,
  transpose,
  slice_cols,
  concat_cols,
  sum,
  softmax_cross_entropy,
  mse,
};

std::string_view primitive_name(Primitive p);

// Handle to a value recorded on a Tape. Only meaningful for the tape that
// issued it.
struct Var {
  std::uint32_t id = UINT32_MAX;
  bool valid() const { return id != UINT32_MAX; }
};

class Tape;

// Result of Tape::backward: one gradient per node that requires grad.
class Gradients {
 public:
  // nullptr when the node does not require grad.
  const Tensor* get(Var v) const;

 private:
  friend class Tape;
  std::vector<Tensor> grads_;
};

// Reverse-mode differentiation record.
//
// Every primitive evaluates eagerly. When at least one input requires grad the
// application is appended as a record with the intermediates its backward rule
// needs; otherwise only the value is kept. Records are appended in evaluation
// order, so the record list is topologically sorted by construction.
class Tape {
 public:
  Tape() = default;
  // A no-grad tape never records: leaves are created with requires_grad off.
  static Tape no_grad() {
    Tape t;
    t.grad_enabled_ = false;
    return t;
  }

  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;
  Tape(Tape&&) = default;
  Tape& operator=(Tape&&) = default;

  bool grad_enabled() const { return grad_enabled_; }

  // Leaf copying t's values; requires grad iff t.requires_grad() and grad is enabled.
  Var leaf(const Tensor& t);
  Var constant(Tensor t);

  const Tensor& value(Var v) const { return nodes_.at(v.id).value; }
  bool requires_grad(Var v) const { return nodes_.at(v.id).requires_grad; }
  std::size_t node_count() const { return nodes_.size(); }
  std::size_t record_count() const { return records_.size(); }
  Primitive record_kind(std::size_t i) const { return records_.at(i).kind; }

  // a[m×k] · b[k×n]
  Var matmul(Var a, Var b);
  Var add(Var a, Var b);
  // x[r×n] + bias[n] per row
  Var add_bias(Var x, Var bias);
  Var scale(Var x, double alpha);
  Var activation(Var x, Activation a);
  Var softmax_rows(Var x);
  // Rows normalized to zero mean and unit variance, then gamma·x̂ + beta.
  // Rows whose variance is below epsilon normalize to 0 (output = beta).
  Var layer_norm(Var x, Var gamma, Var beta, double epsilon);
  // Rows of table[V×h] selected by ids → (ids.size() × h)
  Var embedding_lookup(Var table, const std::vector<std::size_t>& ids);
  // First row of x → (1 × cols)
  Var pool_first(Var x);
  Var transpose(Var x);
  Var slice_cols(Var x, std::size_t start, std::size_t count);
  Var concat_cols(const std::vector<Var>& parts);
  // Scalar sum over all elements, ascending index.
  Var sum(Var x);
  // Scalar −log softmax(logits)[label] for a single row of logits.
  Var softmax_cross_entropy(Var logits, std::size_t label);
  // Scalar mean((pred − target)²).
  Var mse(Var pred, const Tensor& target);

  // Gradients of a scalar loss for every node requiring grad. Non-destructive:
  // may be called repeatedly for different losses on the same tape.
  Gradients backward(Var loss) const;

 private:
  struct Node {
    Tensor value;
    bool requires_grad = false;
  };
  struct Record {
    Primitive kind;
    std::vector<Var> inputs;
    Var output;
    std::vector<Tensor> saved;
    std::vector<std::size_t> indices;
    double alpha = 0.0;
    Activation act = Activation::relu;
  };

  Var push(Tensor value, Record rec);
  bool any_grad(std::initializer_list<Var> vars) const;
  void backprop(const Record& rec, const Tensor& gout, std::vector<Tensor>& grads) const;

  std::vector<Node> nodes_;
  std::vector<Record> records_;
  bool grad_enabled_ = true;
};

}  // namespace adaptkit
