#include "adaptkit/trainer.hpp"

#include "json.hpp"

#include "adaptkit/errors.hpp"
#include "adaptkit/rng.hpp"

namespace adaptkit {

std::string_view train_mode_name(TrainMode m) {
  return m == TrainMode::adapter_only ? "adapter_only" : "full_finetune";
}

TrainMode parse_train_mode(std::string_view name) {
  if (name == "adapter_only") return TrainMode::adapter_only;
  if (name == "full_finetune") return TrainMode::full_finetune;
  throw ValidationError("unknown training mode '" + std::string(name) +
                        "' (expected adapter_only or full_finetune)");
}

TrainConfig TrainConfig::defaults(TrainMode mode) {
  TrainConfig c;
  c.mode = mode;
  c.learning_rate = mode == TrainMode::adapter_only ? 1e-3 : 1e-4;
  return c;
}

void TrainConfig::validate() const {
  if (!(learning_rate >= 0.0)) throw ValidationError("learning_rate must be non-negative");
  if (max_steps < 1) throw ValidationError("max_steps must be at least 1");
  if (batch_size < 1) throw ValidationError("batch_size must be at least 1");
  if (!(beta1 >= 0.0 && beta1 < 1.0 && beta2 >= 0.0 && beta2 < 1.0))
    throw ValidationError("adam betas must lie in [0, 1)");
  if (!(adam_epsilon > 0.0)) throw ValidationError("adam epsilon must be positive");
}

std::string TrainLog::to_jsonl() const {
  std::string out;
  for (const auto& s : steps) {
    nlohmann::ordered_json j;
    j["step"] = s.step;
    j["loss"] = s.loss;
    if (s.dev_metric) j["dev_accuracy"] = *s.dev_metric;
    out += j.dump() + "\n";
  }
  return out;
}

namespace {

Var example_loss(Binder& bind, const Model& model, const PredictionHead& head, const Example& ex) {
  Tape& t = bind.tape();
  const Var hidden = model.forward(bind, ex.token_ids);
  const Var out = head.forward(bind, t.pool_first(hidden));
  if (head.kind == HeadKind::regression) return t.mse(out, Tensor::scalar(ex.label));
  return t.softmax_cross_entropy(out, static_cast<std::size_t>(ex.label));
}

Tensor head_output(const Model& model, const PredictionHead& head,
                   const std::vector<std::size_t>& ids) {
  Tape tape = Tape::no_grad();
  Binder bind(tape);
  const Var out = head.forward(bind, tape.pool_first(model.forward(bind, ids)));
  return tape.value(out);
}

}  // namespace

double batch_loss(const Model& model, const PredictionHead& head,
                  const std::vector<Example>& batch) {
  if (batch.empty()) throw ValidationError("batch_loss: empty batch");
  Tape tape = Tape::no_grad();
  Binder bind(tape);
  Var total = example_loss(bind, model, head, batch[0]);
  for (std::size_t i = 1; i < batch.size(); ++i)
    total = tape.add(total, example_loss(bind, model, head, batch[i]));
  return tape.value(tape.scale(total, 1.0 / static_cast<double>(batch.size())))[0];
}

TrainLog train(Model& model, const std::string& head_name, const ToyTask& task,
               const TrainConfig& cfg) {
  cfg.validate();
  if (task.train.empty()) throw ValidationError("train: task has no training examples");
  PredictionHead& head = model.head(head_name);
  if (head.model_hash != model.config().hash())
    throw CompatibilityError("train: head '" + head_name + "' is bound to another model");

  if (cfg.mode == TrainMode::adapter_only) {
    if (model.state().active_stack.empty())
      throw ValidationError("train: adapter_only mode needs an active adapter stack");
    if (!model.state().frozen_base)
      throw ValidationError("train: adapter_only mode needs a frozen backbone (call train_adapter)");
  } else {
    model.unfreeze_all();
  }
  head.for_each([](Parameter& p) { p.value.set_requires_grad(true); });

  Adam adam({cfg.learning_rate, cfg.beta1, cfg.beta2, cfg.adam_epsilon});
  Rng rng(cfg.seed);
  TrainLog log;
  std::vector<std::pair<Parameter*, const Tensor*>> updates;

  for (std::size_t step = 1; step <= cfg.max_steps; ++step) {
    Tape tape;
    Binder bind(tape);
    Var total;
    for (std::size_t b = 0; b < cfg.batch_size; ++b) {
      const Example& ex = task.train[rng.below(task.train.size())];
      const Var l = example_loss(bind, model, head, ex);
      total = b == 0 ? l : tape.add(total, l);
    }
    const Var loss = tape.scale(total, 1.0 / static_cast<double>(cfg.batch_size));
    const Gradients grads = tape.backward(loss);

    updates.clear();
    for (const auto& [param, var] : bind.bound()) {
      if (!param->value.requires_grad()) continue;
      if (cfg.mode == TrainMode::adapter_only && param->owner() == Ownership::base)
        throw ValidationError("train: backbone parameter '" + param->name() +
                              "' requires grad in adapter_only mode");
      if (const Tensor* g = grads.get(var)) updates.emplace_back(const_cast<Parameter*>(param), g);
    }
    adam.step(updates);

    StepRecord rec{step, tape.value(loss)[0], std::nullopt};
    if (cfg.eval_every && step % cfg.eval_every == 0 && !task.dev.empty())
      rec.dev_metric = evaluate(model, head, task.dev);
    log.steps.push_back(rec);
  }
  for (auto o : adam.state_owners()) log.optimizer_state_owners.insert(o);
  log.final_dev_metric = task.dev.empty() ? 0.0 : evaluate(model, head, task.dev);
  return log;
}

int predict_one(const Model& model, const PredictionHead& head,
                const std::vector<std::size_t>& token_ids) {
  const Tensor out = head_output(model, head, token_ids);
  if (head.kind == HeadKind::regression) return out[0] >= 0.5 ? 1 : 0;
  std::size_t best = 0;
  for (std::size_t j = 1; j < out.size(); ++j)
    if (out[j] > out[best]) best = j;
  return static_cast<int>(best);
}

std::vector<int> predict(const Model& model, const PredictionHead& head,
                         const std::vector<Example>& examples) {
  std::vector<int> out;
  out.reserve(examples.size());
  for (const auto& ex : examples) out.push_back(predict_one(model, head, ex.token_ids));
  return out;
}

double evaluate(const Model& model, const PredictionHead& head,
                const std::vector<Example>& examples, Metric metric) {
  if (examples.empty()) throw ValidationError("evaluate: empty split");
  std::vector<int> labels;
  for (const auto& ex : examples) labels.push_back(ex.label);
  switch (metric) {
    case Metric::accuracy:
      return accuracy(predict(model, head, examples), labels);
    case Metric::f1:
      return f1_binary(predict(model, head, examples), labels);
    case Metric::spearman: {
      std::vector<double> scores, gold;
      for (const auto& ex : examples) {
        const Tensor out = head_output(model, head, ex.token_ids);
        scores.push_back(out.size() == 1 ? out[0] : out[out.size() - 1] - out[0]);
        gold.push_back(ex.label);
      }
      return spearman(scores, gold);
    }
  }
  return 0.0;
}

}  // namespace adaptkit
