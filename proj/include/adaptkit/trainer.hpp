#pragma once

#include <optional>
#include <set>
#include <string>
#include <vector>

#include "adaptkit/metrics.hpp"
#include "adaptkit/model.hpp"
#include "adaptkit/optimizer.hpp"
#include "adaptkit/tasks.hpp"

namespace adaptkit {

enum class TrainMode { adapter_only, full_finetune };

std::string_view train_mode_name(TrainMode m);
TrainMode parse_train_mode(std::string_view name);

struct TrainConfig {
  std::uint64_t seed = 0;
  TrainMode mode = TrainMode::adapter_only;
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double adam_epsilon = 1e-8;
  std::size_t batch_size = 16;
  std::size_t max_steps = 500;
  std::size_t eval_every = 0;  // 0: evaluate on dev only after the last step

  // lr 1e-3 for adapters, 1e-4 for full fine-tuning.
  static TrainConfig defaults(TrainMode mode);
  void validate() const;
};

struct StepRecord {
  std::size_t step;
  double loss;
  std::optional<double> dev_metric;
};

struct TrainLog {
  std::vector<StepRecord> steps;
  double final_dev_metric = 0.0;
  std::set<Ownership> optimizer_state_owners;

  // One JSON object per line: {"step":..,"loss":..[,"dev_accuracy":..]}
  std::string to_jsonl() const;
};

// Trains the named head (and, in adapter_only mode, the trainable adapters)
// on task.train; reports accuracy on task.dev.
//
// adapter_only requires an active stack and a frozen backbone (see
// Model::train_adapter). full_finetune makes every parameter trainable.
TrainLog train(Model& model, const std::string& head_name, const ToyTask& task,
               const TrainConfig& config);

// Mean cross-entropy of the current model over a fixed batch (no update).
double batch_loss(const Model& model, const PredictionHead& head,
                  const std::vector<Example>& batch);

std::vector<int> predict(const Model& model, const PredictionHead& head,
                         const std::vector<Example>& examples);
int predict_one(const Model& model, const PredictionHead& head,
                const std::vector<std::size_t>& token_ids);

// Accuracy or F1 over class predictions, Spearman over the positive-class
// logit margin. Throws ValidationError on an empty split.
double evaluate(const Model& model, const PredictionHead& head,
                const std::vector<Example>& examples, Metric metric = Metric::accuracy);

}  // namespace adaptkit
