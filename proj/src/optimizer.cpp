#include "adaptkit/optimizer.hpp"

#include <cmath>

#include "adaptkit/errors.hpp"

namespace adaptkit {

void Adam::step(const std::vector<std::pair<Parameter*, const Tensor*>>& updates) {
  ++t_;
  const double c1 = 1.0 - std::pow(config_.beta1, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(config_.beta2, static_cast<double>(t_));
  for (auto [param, grad] : updates) {
    if (param->value.shape() != grad->shape())
      throw ShapeError("adam: gradient " + shape_str(grad->shape()) + " for parameter '" +
                       param->name() + "' " + shape_str(param->value.shape()));
    Moments& mo = state_[param];
    if (mo.m.empty()) {
      mo.m.assign(grad->size(), 0.0);
      mo.v.assign(grad->size(), 0.0);
    }
    auto w = param->value.data();
    for (std::size_t i = 0; i < w.size(); ++i) {
      const double g = (*grad)[i];
      mo.m[i] = config_.beta1 * mo.m[i] + (1.0 - config_.beta1) * g;
      mo.v[i] = config_.beta2 * mo.v[i] + (1.0 - config_.beta2) * g * g;
      const double mhat = mo.m[i] / c1;
      const double vhat = mo.v[i] / c2;
      w[i] -= config_.learning_rate * mhat / (std::sqrt(vhat) + config_.epsilon);
    }
  }
}

std::vector<Ownership> Adam::state_owners() const {
  std::vector<Ownership> out;
  out.reserve(state_.size());
  for (const auto& [p, unused] : state_) out.push_back(p->owner());
  return out;
}

}  // namespace adaptkit
