#pragma once

#include <unordered_map>
#include <utility>
#include <vector>

#include "adaptkit/parameter.hpp"

namespace adaptkit {

struct AdamConfig {
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

// Adam with bias correction. Moment state is created lazily for each
// parameter that receives a gradient.
class Adam {
 public:
  explicit Adam(AdamConfig config) : config_(config) {}

  // One update over (parameter, gradient) pairs.
  void step(const std::vector<std::pair<Parameter*, const Tensor*>>& updates);

  std::size_t steps() const { return t_; }
  std::size_t state_size() const { return state_.size(); }
  bool has_state(const Parameter& p) const { return state_.count(&p) > 0; }
  // Ownership tags of every parameter with optimizer state.
  std::vector<Ownership> state_owners() const;

 private:
  struct Moments {
    std::vector<double> m, v;
  };
  AdamConfig config_;
  std::size_t t_ = 0;
  std::unordered_map<const Parameter*, Moments> state_;
};

}  // namespace adaptkit
