#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

#include "adaptkit/tape.hpp"
#include "adaptkit/tensor.hpp"

namespace adaptkit {

// Who a parameter belongs to: the frozen pre-trained weights, an adapter, or
// a prediction head. Fixed at creation.
enum class Ownership : std::uint8_t { base = 0, adapter = 1, head = 2 };

std::string_view ownership_name(Ownership o);

class Parameter {
 public:
  Parameter() = default;
  Parameter(std::string name, Ownership owner, Tensor value)
      : name_(std::move(name)), owner_(owner), value(std::move(value)) {}

  const std::string& name() const { return name_; }
  Ownership owner() const { return owner_; }

 private:

  std::string name_;
  Ownership owner_ = Ownership::base;

 public:
  Tensor value;
};

// Lazily binds parameters onto a tape as leaves, once per tape, and remembers
// the mapping so gradients can be routed back.
class Binder {
 public:
  explicit Binder(Tape& tape) : tape_(tape) {}

  Var operator()(const Parameter& p);
  Tape& tape() { return tape_; }
  const std::vector<std::pair<const Parameter*, Var>>& bound() const { return order_; }

 private:
  Tape& tape_;
  std::unordered_map<const Parameter*, Var> vars_;
  std::vector<std::pair<const Parameter*, Var>> order_;
};

}  // namespace adaptkit
