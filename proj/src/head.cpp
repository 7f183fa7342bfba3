#include "adaptkit/head.hpp"

#include "adaptkit/errors.hpp"

namespace adaptkit {

std::string_view head_kind_name(HeadKind k) {
  return k == HeadKind::classification ? "classification" : "regression";
}

HeadKind parse_head_kind(std::string_view name) {
  if (name == "classification") return HeadKind::classification;
  if (name == "regression") return HeadKind::regression;
  throw ValidationError("unknown head kind '" + std::string(name) + "'");
}

Var PredictionHead::forward(Binder& bind, Var pooled) const {
  Tape& t = bind.tape();
  return t.add_bias(t.matmul(pooled, bind(weight)), bind(bias));
}

PredictionHead make_head(std::string name, HeadKind kind, std::size_t outputs,
                         const ModelConfig& model, Rng& rng) {
  if (outputs == 0) throw ValidationError("prediction head needs at least one output");
  if (kind == HeadKind::regression && outputs != 1)
    throw ValidationError("regression heads have exactly one output");
  PredictionHead h;
  h.name = std::move(name);
  h.kind = kind;
  h.outputs = outputs;
  h.model_hash = model.hash();
  h.weight = Parameter("head.weight", Ownership::head,
                       truncated_normal_tensor({model.hidden_size, outputs}, 0.02, rng));
  h.bias = Parameter("head.bias", Ownership::head, Tensor({outputs}));
  return h;
}

}  // namespace adaptkit
