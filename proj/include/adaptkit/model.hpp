#pragma once

#include <map>
#include <memory>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "adaptkit/adapter.hpp"
#include "adaptkit/backbone.hpp"
#include "adaptkit/head.hpp"

namespace adaptkit {

enum class AdapterType { text_task, text_lang };

std::string_view adapter_type_name(AdapterType t);
AdapterType parse_adapter_type(std::string_view name);

struct AdapterEntry {
  std::string name;
  AdapterType type = AdapterType::text_task;
  AdapterConfig config;
  AdapterWeights weights;
  bool trained = false;
};

struct ActivationState {
  std::vector<std::string> active_stack;  // first element applied first
  bool frozen_base = false;
  std::set<std::string> trainable_set;
};

struct EncodeOutput {
  Tensor hidden;  // seq × h
  Tensor pooled;  // 1 × h, first position
};

// A backbone instance with its adapter registry, prediction heads and
// activation state.
//
// Stack semantics at every insertion site: the adapters of the active stack
// that configure the site run in stack order. The first one is wired by its
// own adapter_input/residual_source; every later one takes the previous
// adapter's output as both input and residual.
class Model {
 public:
  Model(ModelConfig config, BackboneWeights weights, std::uint64_t seed = 0);
  static Model initialize(const ModelConfig& config, std::uint64_t seed);

  Model(Model&&) = default;
  Model& operator=(Model&&) = default;

  const ModelConfig& config() const { return config_; }
  const BackboneWeights& backbone() const { return backbone_; }
  BackboneWeights& backbone() { return backbone_; }

  // Fresh identity-initialized adapter. Throws on duplicate names or unknown presets.
  AdapterEntry& add_adapter(const std::string& name, AdapterType type, const AdapterConfig& config);
  AdapterEntry& add_adapter(const std::string& name, AdapterType type, std::string_view preset_spec);
  // Registers fully built weights (used when stitching in a loaded package).
  AdapterEntry& register_adapter(AdapterEntry entry);
  // Throws if unknown or currently active.
  void delete_adapter(const std::string& name);
  bool has_adapter(const std::string& name) const;
  const AdapterEntry& adapter(const std::string& name) const;
  AdapterEntry& adapter(const std::string& name);
  // Insertion order.
  std::vector<std::string> list_adapters() const;

  void set_active(const std::vector<std::string>& stack);
  const ActivationState& state() const { return state_; }

  // Freezes the backbone and enables gradients exactly on the named adapters
  // and on heads carrying one of those names. Activates `names` as the stack
  // unless all of them are already active.
  void train_adapter(const std::vector<std::string>& names);
  // Full fine-tuning: every parameter, including the backbone, trainable.
  void unfreeze_all();

  PredictionHead& add_head(const std::string& name, HeadKind kind, std::size_t outputs);
  PredictionHead& set_head(PredictionHead head);
  bool has_head(const std::string& name) const;
  const PredictionHead& head(const std::string& name) const;
  PredictionHead& head(const std::string& name);
  std::vector<std::string> list_heads() const;

  // Hidden states through the backbone and the active stack, on `bind`'s tape.
  Var forward(Binder& bind, const std::vector<std::size_t>& token_ids,
              std::vector<LayerSublayerOutputs>* trace = nullptr) const;

  // Inference: no gradients recorded.
  EncodeOutput encode(const std::vector<std::size_t>& token_ids) const;
  // Encode with an explicit stack, leaving the activation state untouched.
  EncodeOutput encode(const std::vector<std::size_t>& token_ids,
                      const std::vector<std::string>& stack) const;

  // Every parameter: backbone, then adapters in registry order, then heads.
  template <class F>
  void for_each_parameter(F&& f) {
    backbone_.for_each(f);
    for (auto& e : adapters_) e->weights.for_each(f);
    for (auto& [name, h] : heads_) h.for_each(f);
  }

 private:
  Var forward_with(Binder& bind, const std::vector<std::size_t>& token_ids,
                   const std::vector<std::string>& stack,
                   std::vector<LayerSublayerOutputs>* trace) const;
  void check_registered(const std::vector<std::string>& names, const char* op) const;

  ModelConfig config_;
  BackboneWeights backbone_;
  std::vector<std::unique_ptr<AdapterEntry>> adapters_;
  std::map<std::string, PredictionHead> heads_;
  ActivationState state_;
  Rng rng_;
};

// Output after one Add & Norm site with adapters `chain` applied there,
// following the wiring rule documented on Model.
Var apply_adapter_chain(Binder& bind, const std::vector<const AdapterEntry*>& chain,
                        std::size_t layer, Sublayer site, Var sublayer_output, Var sublayer_input,
                        const std::function<Var(Var)>& original_ln, double ln_epsilon);

}  // namespace adaptkit
