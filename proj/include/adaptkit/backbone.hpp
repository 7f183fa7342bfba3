#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <string_view>
#include <vector>

#include "adaptkit/parameter.hpp"

namespace adaptkit {

// Architecture descriptor of the frozen encoder. Two configs are compatible
// iff every field is equal, which is what hash() captures.
struct ModelConfig {
  std::string model_type = "mini-bert";
  std::size_t hidden_size = 64;
  std::size_t num_layers = 2;
  std::size_t num_heads = 4;
  std::size_t ffn_size = 256;
  std::size_t vocab_size = 128;
  std::size_t max_seq_len = 32;
  double layer_norm_epsilon = 1e-12;

  static ModelConfig desk() { return {}; }
  // BERT-Base / BERT-Large shapes (used for accounting only).
  static ModelConfig base();
  static ModelConfig large();
  // "mini-bert" (desk), "bert-base", "bert-large"
  static ModelConfig named(std::string_view name);

  void validate() const;  // throws ValidationError
  // "model_type=mini-bert;hidden_size=64;..." in fixed field order.
  std::string canonical() const;
  static ModelConfig parse(std::string_view canonical);
  // sha256 hex of canonical().
  std::string hash() const;

  bool operator==(const ModelConfig&) const = default;
};

struct EncoderLayerWeights {
  Parameter q_w, q_b, k_w, k_b, v_w, v_b, o_w, o_b;
  Parameter attn_ln_gamma, attn_ln_beta;
  Parameter ffn_in_w, ffn_in_b, ffn_out_w, ffn_out_b;
  Parameter ffn_ln_gamma, ffn_ln_beta;

  template <class F>
  void for_each(F&& f) {
    for (Parameter* p : {&q_w, &q_b, &k_w, &k_b, &v_w, &v_b, &o_w, &o_b, &attn_ln_gamma,
                         &attn_ln_beta, &ffn_in_w, &ffn_in_b, &ffn_out_w, &ffn_out_b,
                         &ffn_ln_gamma, &ffn_ln_beta})
      f(*p);
  }
};

// The pre-trained parameters. Every tensor is Ownership::base.
struct BackboneWeights {
  Parameter token_embedding, position_embedding, embedding_ln_gamma, embedding_ln_beta;
  std::vector<EncoderLayerWeights> layers;

  template <class F>
  void for_each(F&& f) {
    for (Parameter* p :
         {&token_embedding, &position_embedding, &embedding_ln_gamma, &embedding_ln_beta})
      f(*p);
    for (auto& l : layers) l.for_each(f);
  }
  template <class F>
  void for_each(F&& f) const {
    const_cast<BackboneWeights*>(this)->for_each(
        [&](Parameter& p) { f(static_cast<const Parameter&>(p)); });
  }
};

// Truncated-normal matrices with std 1/sqrt(hidden_size), zero biases, unit
// LayerNorm gains. Values are binary32-representable.
BackboneWeights init_backbone(const ModelConfig& config, std::uint64_t seed);
// Same names and shapes, zero matrices (for loading checkpoints).
BackboneWeights empty_backbone(const ModelConfig& config);

// Closed-form count of every backbone parameter.
std::size_t count_backbone_params(const ModelConfig& config);

// sha256 over the bytes of every base tensor in canonical order.
std::string backbone_digest(const BackboneWeights& weights);

// The two Add & Norm sites of a post-LN encoder layer.
enum class Sublayer { attention, ffn };

// Intermediate signals at one layer's hook points.
struct LayerSublayerOutputs {
  Tensor attention_output;   // attention sublayer output, before the residual add
  Tensor attention_input;    // residual input of the attention sublayer
  Tensor attention_hidden;   // after the attention Add & Norm
  Tensor ffn_output;
  Tensor ffn_input;
  Tensor ffn_hidden;
};

// Replaces the Add & Norm at one sublayer. Receives the sublayer output and
// its input; `original_ln` applies the backbone's LayerNorm for that site.
using AddNormHook = std::function<Var(std::size_t layer, Sublayer site, Var sublayer_output,
                                      Var sublayer_input,
                                      const std::function<Var(Var)>& original_ln)>;

struct EncoderOptions {
  const AddNormHook* hook = nullptr;          // nullptr: plain LN(output + input)
  std::vector<LayerSublayerOutputs>* trace = nullptr;
};

// Embeddings plus all encoder layers; returns hidden states (seq × h).
Var encoder_forward(Binder& bind, const ModelConfig& config, const BackboneWeights& weights,
                    const std::vector<std::size_t>& token_ids, const EncoderOptions& options = {});

// A single encoder layer on hidden states x (seq × h).
Var encoder_layer_forward(Binder& bind, const ModelConfig& config,
                          const EncoderLayerWeights& layer, std::size_t layer_index, Var x,
                          const EncoderOptions& options = {});

// Multi-head self-attention sublayer output (before residual).
Var attention_forward(Binder& bind, const ModelConfig& config, const EncoderLayerWeights& layer,
                      Var x);

// Throws ValidationError on out-of-range ids or over-long / empty sequences.
void check_token_ids(const ModelConfig& config, const std::vector<std::size_t>& token_ids);

}  // namespace adaptkit
