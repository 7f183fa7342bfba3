#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "adaptkit/backbone.hpp"
#include "adaptkit/rng.hpp"

namespace adaptkit {

// Which signal feeds the adapter's down-projection.
enum class AdapterInput { sublayer_output, after_original_ln };
// Which signal the adapter's skip connection adds back.
enum class ResidualSource { adapter_input, pre_sublayer };

struct AdapterConfig {
  std::size_t reduction_factor = 16;
  Activation non_linearity = Activation::relu;
  bool mh_adapter = false;      // after the attention sublayer
  bool output_adapter = true;   // after the feed-forward sublayer
  bool new_ln_before = false;
  bool new_ln_after = false;
  AdapterInput adapter_input = AdapterInput::sublayer_output;
  ResidualSource residual_source = ResidualSource::adapter_input;

  void validate() const;
  // Flat key=value pairs in fixed order, ';'-separated. Hashed for compatibility.
  std::string canonical() const;
  // Same pairs, one per line (the standalone configuration file).
  std::string descriptor_text() const;
  // Accepts either the canonical or the descriptor form.
  static AdapterConfig parse(std::string_view text);
  std::string hash() const;

  bool uses(Sublayer site) const { return site == Sublayer::attention ? mh_adapter : output_adapter; }

  bool operator==(const AdapterConfig&) const = default;
};

std::vector<std::string> preset_names();
// pfeiffer | houlsby | bapna, reduction_factor 16. Throws ValidationError listing valid names.
AdapterConfig preset(std::string_view name);
// Name of the preset this config matches up to reduction_factor, if any.
std::optional<std::string> matching_preset(const AdapterConfig& config);

// "pfeiffer", "houlsby:64", or a canonical/descriptor string.
AdapterConfig resolve_adapter_config(std::string_view spec);

struct Bottleneck {
  std::size_t size;
  bool clamped;  // hidden size not divisible by the reduction factor
};
Bottleneck resolve_bottleneck(std::size_t hidden_size, std::size_t reduction_factor);

struct LayerNormParams {
  Parameter gamma, beta;
};

// Φ_l at one insertion point of one layer.
struct AdapterLayerWeights {
  Parameter down_w, down_b, up_w, up_b;
  std::optional<LayerNormParams> ln_before, ln_after;

  template <class F>
  void for_each(F&& f) {
    for (Parameter* p : {&down_w, &down_b, &up_w, &up_b}) f(*p);
    if (ln_before) {
      f(ln_before->gamma);
      f(ln_before->beta);
    }
    if (ln_after) {
      f(ln_after->gamma);
      f(ln_after->beta);
    }
  }
};

// All of one adapter's weights: per layer, one block per configured site.
struct AdapterWeights {
  std::vector<AdapterLayerWeights> attention;  // empty unless mh_adapter
  std::vector<AdapterLayerWeights> ffn;        // empty unless output_adapter

  const AdapterLayerWeights* at(Sublayer site, std::size_t layer) const {
    const auto& v = site == Sublayer::attention ? attention : ffn;
    return layer < v.size() ? &v[layer] : nullptr;
  }
  // Manifest order: layer ascending, attention before ffn, then tensor order.
  template <class F>
  void for_each(F&& f) {
    const std::size_t n = std::max(attention.size(), ffn.size());
    for (std::size_t l = 0; l < n; ++l) {
      if (l < attention.size()) attention[l].for_each(f);
      if (l < ffn.size()) ffn[l].for_each(f);
    }
  }
  template <class F>
  void for_each(F&& f) const {
    const_cast<AdapterWeights*>(this)->for_each(
        [&](Parameter& p) { f(static_cast<const Parameter&>(p)); });
  }
};

// W_down truncated-normal(0.02); W_up and all biases zero; new LNs gamma=1, beta=0.
AdapterWeights init_adapter(const ModelConfig& model, const AdapterConfig& config, Rng& rng);

// Zero-filled weights with the right names and shapes (for loading).
AdapterWeights empty_adapter(const ModelConfig& model, const AdapterConfig& config);

// Σ over layers and active sites of h·b + b + b·h + h, plus 2h per new LayerNorm.
std::size_t count_adapter_params(const ModelConfig& model, const AdapterConfig& config);

// maybe_ln_after(residual + W_up·act(W_down·maybe_ln_before(hidden) + b_down) + b_up)
Var adapter_forward(Binder& bind, Var hidden, Var residual, const AdapterLayerWeights& weights,
                    const AdapterConfig& config, double ln_epsilon);

}  // namespace adaptkit
