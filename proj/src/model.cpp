#include "adaptkit/model.hpp"

#include <algorithm>

#include "adaptkit/errors.hpp"

namespace adaptkit {

std::string_view adapter_type_name(AdapterType t) {
  return t == AdapterType::text_task ? "text_task" : "text_lang";
}

AdapterType parse_adapter_type(std::string_view name) {
  if (name == "text_task") return AdapterType::text_task;
  if (name == "text_lang" || name == "text_language") return AdapterType::text_lang;
  throw ValidationError("unknown adapter type '" + std::string(name) +
                        "' (expected text_task or text_lang)");
}

Model::Model(ModelConfig config, BackboneWeights weights, std::uint64_t seed)
    : config_(std::move(config)), backbone_(std::move(weights)), rng_(seed ^ 0x9e3779b97f4a7c15ULL) {
  config_.validate();
  if (backbone_.layers.size() != config_.num_layers ||
      backbone_.token_embedding.value.shape() != Shape{config_.vocab_size, config_.hidden_size})
    throw CompatibilityError("backbone weights do not match model config " + config_.canonical());
}

Model Model::initialize(const ModelConfig& config, std::uint64_t seed) {
  return Model(config, init_backbone(config, seed), seed);
}

AdapterEntry& Model::add_adapter(const std::string& name, AdapterType type,
                                 const AdapterConfig& config) {
  if (name.empty()) throw ValidationError("adapter name must be nonempty");
  if (has_adapter(name)) throw ValidationError("adapter '" + name + "' already exists");
  config.validate();
  AdapterEntry e;
  e.name = name;
  e.type = type;
  e.config = config;
  e.weights = init_adapter(config_, config, rng_);
  adapters_.push_back(std::make_unique<AdapterEntry>(std::move(e)));
  return *adapters_.back();
}

AdapterEntry& Model::add_adapter(const std::string& name, AdapterType type,
                                 std::string_view preset_spec) {
  return add_adapter(name, type, resolve_adapter_config(preset_spec));
}

AdapterEntry& Model::register_adapter(AdapterEntry entry) {
  if (entry.name.empty()) throw ValidationError("adapter name must be nonempty");
  if (has_adapter(entry.name)) throw ValidationError("adapter '" + entry.name + "' already exists");
  const AdapterWeights expected = empty_adapter(config_, entry.config);
  bool ok = expected.attention.size() == entry.weights.attention.size() &&
            expected.ffn.size() == entry.weights.ffn.size();
  if (ok) {
    std::vector<Shape> want, got;
    expected.for_each([&](const Parameter& p) { want.push_back(p.value.shape()); });
    entry.weights.for_each([&](const Parameter& p) { got.push_back(p.value.shape()); });
    ok = want == got;
  }
  if (!ok)
    throw CompatibilityError("adapter '" + entry.name + "' weights do not match its configuration");
  adapters_.push_back(std::make_unique<AdapterEntry>(std::move(entry)));
  return *adapters_.back();
}

void Model::delete_adapter(const std::string& name) {
  check_registered({name}, "delete_adapter");
  const auto& stack = state_.active_stack;
  if (std::find(stack.begin(), stack.end(), name) != stack.end())
    throw ValidationError("cannot delete adapter '" + name + "' while it is active");
  std::erase_if(adapters_, [&](const auto& e) { return e->name == name; });
  state_.trainable_set.erase(name);
}

bool Model::has_adapter(const std::string& name) const {
  return std::any_of(adapters_.begin(), adapters_.end(),
                     [&](const auto& e) { return e->name == name; });
}

const AdapterEntry& Model::adapter(const std::string& name) const {
  for (const auto& e : adapters_)
    if (e->name == name) return *e;
  throw ValidationError("unknown adapter '" + name + "'");
}

AdapterEntry& Model::adapter(const std::string& name) {
  return const_cast<AdapterEntry&>(std::as_const(*this).adapter(name));
}

std::vector<std::string> Model::list_adapters() const {
  std::vector<std::string> out;
  for (const auto& e : adapters_) out.push_back(e->name);
  return out;
}

void Model::check_registered(const std::vector<std::string>& names, const char* op) const {
  for (const auto& n : names)
    if (!has_adapter(n)) throw ValidationError(std::string(op) + ": unknown adapter '" + n + "'");
}

void Model::set_active(const std::vector<std::string>& stack) {
  check_registered(stack, "set_active");
  for (std::size_t i = 0; i < stack.size(); ++i)
    for (std::size_t j = i + 1; j < stack.size(); ++j)
      if (stack[i] == stack[j])
        throw ValidationError("set_active: adapter '" + stack[i] + "' appears twice in the stack");
  state_.active_stack = stack;
  std::erase_if(state_.trainable_set, [&](const std::string& n) {
    return std::find(stack.begin(), stack.end(), n) == stack.end();
  });
}

void Model::train_adapter(const std::vector<std::string>& names) {
  check_registered(names, "train_adapter");
  const auto& stack = state_.active_stack;
  const bool all_active = std::all_of(names.begin(), names.end(), [&](const std::string& n) {
    return std::find(stack.begin(), stack.end(), n) != stack.end();
  });
  if (!all_active) set_active(names);

  const std::set<std::string> wanted(names.begin(), names.end());
  backbone_.for_each([](Parameter& p) { p.value.set_requires_grad(false); });
  for (auto& e : adapters_) {
    const bool on = wanted.count(e->name) > 0;
    e->weights.for_each([&](Parameter& p) { p.value.set_requires_grad(on); });
  }
  for (auto& [name, h] : heads_) {
    const bool on = wanted.count(name) > 0;
    h.for_each([&](Parameter& p) { p.value.set_requires_grad(on); });
  }
  state_.frozen_base = true;
  state_.trainable_set = wanted;
}

void Model::unfreeze_all() {
  for_each_parameter([](Parameter& p) { p.value.set_requires_grad(true); });
  state_.frozen_base = false;
  state_.trainable_set.clear();
  for (const auto& n : state_.active_stack) state_.trainable_set.insert(n);
}

PredictionHead& Model::add_head(const std::string& name, HeadKind kind, std::size_t outputs) {
  if (has_head(name)) throw ValidationError("head '" + name + "' already exists");
  return set_head(make_head(name, kind, outputs, config_, rng_));
}

PredictionHead& Model::set_head(PredictionHead head) {
  if (head.model_hash != config_.hash())
    throw CompatibilityError("head '" + head.name + "' was built for model " + head.model_hash +
                             ", this model is " + config_.hash());
  if (head.weight.value.shape() != Shape{config_.hidden_size, head.outputs})
    throw CompatibilityError("head '" + head.name + "' has weight shape " +
                             shape_str(head.weight.value.shape()));
  const std::string name = head.name;
  heads_.erase(name);
  return heads_.emplace(name, std::move(head)).first->second;
}

bool Model::has_head(const std::string& name) const { return heads_.count(name) > 0; }

const PredictionHead& Model::head(const std::string& name) const {
  auto it = heads_.find(name);
  if (it == heads_.end()) throw ValidationError("unknown head '" + name + "'");
  return it->second;
}

PredictionHead& Model::head(const std::string& name) {
  return const_cast<PredictionHead&>(std::as_const(*this).head(name));
}

std::vector<std::string> Model::list_heads() const {
  std::vector<std::string> out;
  for (const auto& [name, h] : heads_) out.push_back(name);
  return out;
}

Var apply_adapter_chain(Binder& bind, const std::vector<const AdapterEntry*>& chain,
                        std::size_t layer, Sublayer site, Var s, Var x,
                        const std::function<Var(Var)>& original_ln, double eps) {
  Tape& t = bind.tape();
  if (chain.empty()) return original_ln(t.add(s, x));

  auto rest = [&](Var z) {
    for (std::size_t k = 1; k < chain.size(); ++k)
      z = adapter_forward(bind, z, z, *chain[k]->weights.at(site, layer), chain[k]->config, eps);
    return z;
  };
  const AdapterEntry& first = *chain.front();
  const AdapterLayerWeights& w = *first.weights.at(site, layer);
  const AdapterConfig& c = first.config;
  const bool own_residual = c.residual_source == ResidualSource::adapter_input;

  if (c.adapter_input == AdapterInput::sublayer_output) {
    const Var residual = own_residual ? s : x;
    const Var other = own_residual ? x : s;
    const Var z = rest(adapter_forward(bind, s, residual, w, c, eps));
    return original_ln(t.add(z, other));
  }
  const Var y = original_ln(t.add(s, x));
  if (own_residual) return rest(adapter_forward(bind, y, y, w, c, eps));
  const Var z = rest(adapter_forward(bind, y, x, w, c, eps));
  return original_ln(t.add(z, s));
}

Var Model::forward_with(Binder& bind, const std::vector<std::size_t>& token_ids,
                        const std::vector<std::string>& stack,
                        std::vector<LayerSublayerOutputs>* trace) const {
  check_registered(stack, "encode");
  std::vector<const AdapterEntry*> entries;
  for (const auto& n : stack) entries.push_back(&adapter(n));

  EncoderOptions opts;
  opts.trace = trace;
  AddNormHook hook;
  if (!entries.empty()) {
    hook = [&](std::size_t layer, Sublayer site, Var s, Var x,
               const std::function<Var(Var)>& ln) {
      std::vector<const AdapterEntry*> chain;
      for (const auto* e : entries)
        if (e->config.uses(site)) chain.push_back(e);
      return apply_adapter_chain(bind, chain, layer, site, s, x, ln, config_.layer_norm_epsilon);
    };
    opts.hook = &hook;
  }
  return encoder_forward(bind, config_, backbone_, token_ids, opts);
}

Var Model::forward(Binder& bind, const std::vector<std::size_t>& token_ids,
                   std::vector<LayerSublayerOutputs>* trace) const {
  return forward_with(bind, token_ids, state_.active_stack, trace);
}

EncodeOutput Model::encode(const std::vector<std::size_t>& token_ids) const {
  return encode(token_ids, state_.active_stack);
}

EncodeOutput Model::encode(const std::vector<std::size_t>& token_ids,
                           const std::vector<std::string>& stack) const {
  Tape tape = Tape::no_grad();
  Binder bind(tape);
  const Var hidden = forward_with(bind, token_ids, stack, nullptr);
  const Var pooled = tape.pool_first(hidden);
  return {tape.value(hidden), tape.value(pooled)};
}

}  // namespace adaptkit
