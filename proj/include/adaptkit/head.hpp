#pragma once

#include <string>
#include <string_view>

#include "adaptkit/backbone.hpp"
#include "adaptkit/rng.hpp"

namespace adaptkit {

enum class HeadKind { classification, regression };

std::string_view head_kind_name(HeadKind k);
HeadKind parse_head_kind(std::string_view name);

// Task-specific output layer on the pooled first-token vector.
struct PredictionHead {
  std::string name;
  HeadKind kind = HeadKind::classification;
  std::size_t outputs = 2;  // classes, or 1 for regression
  std::string model_hash;   // ModelConfig the head was built for
  Parameter weight;         // h × outputs
  Parameter bias;           // outputs

  // pooled (1 × h) → logits / prediction (1 × outputs)
  Var forward(Binder& bind, Var pooled) const;

  template <class F>
  void for_each(F&& f) {
    f(weight);
    f(bias);
  }
};

PredictionHead make_head(std::string name, HeadKind kind, std::size_t outputs,
                         const ModelConfig& model, Rng& rng);

}  // namespace adaptkit
