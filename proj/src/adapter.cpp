#include "adaptkit/adapter.hpp"

#include <algorithm>
#include <charconv>
#include <map>

#include "adaptkit/digest.hpp"
#include "adaptkit/errors.hpp"

namespace adaptkit {
namespace {

const char* input_name(AdapterInput v) {
  return v == AdapterInput::sublayer_output ? "sublayer_output" : "after_original_ln";
}
const char* residual_name(ResidualSource v) {
  return v == ResidualSource::adapter_input ? "adapter_input" : "pre_sublayer";
}
const char* bool_name(bool b) { return b ? "true" : "false"; }

bool parse_bool(const std::string& v, const std::string& key) {
  if (v == "true") return true;
  if (v == "false") return false;
  throw ValidationError("adapter config field '" + key + "' must be true or false, got '" + v + "'");
}

std::vector<std::pair<std::string, std::string>> fields(const AdapterConfig& c) {
  return {{"reduction_factor", std::to_string(c.reduction_factor)},
          {"non_linearity", std::string(activation_name(c.non_linearity))},
          {"mh_adapter", bool_name(c.mh_adapter)},
          {"output_adapter", bool_name(c.output_adapter)},
          {"new_ln_before", bool_name(c.new_ln_before)},
          {"new_ln_after", bool_name(c.new_ln_after)},
          {"adapter_input", input_name(c.adapter_input)},
          {"residual_source", residual_name(c.residual_source)}};
}

}  // namespace

void AdapterConfig::validate() const {
  if (reduction_factor == 0) throw ValidationError("adapter config: reduction_factor must be positive");
  if (!mh_adapter && !output_adapter)
    throw ValidationError("adapter config: at least one of mh_adapter, output_adapter must be true");
}

std::string AdapterConfig::canonical() const {
  std::string out;
  for (const auto& [k, v] : fields(*this)) {
    if (!out.empty()) out += ';';
    out += k + "=" + v;
  }
  return out;
}

std::string AdapterConfig::descriptor_text() const {
  std::string out;
  for (const auto& [k, v] : fields(*this)) out += k + "=" + v + "\n";
  return out;
}

AdapterConfig AdapterConfig::parse(std::string_view text) {
  std::map<std::string, std::string> kv;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    std::size_t end = text.find_first_of(";\n", pos);
    if (end == std::string_view::npos) end = text.size();
    std::string item(text.substr(pos, end - pos));
    while (!item.empty() && (item.back() == '\r' || item.back() == ' ')) item.pop_back();
    if (!item.empty() && item.front() != '#') {
      const auto eq = item.find('=');
      if (eq == std::string::npos)
        throw ValidationError("malformed adapter config entry '" + item + "'");
      if (!kv.emplace(item.substr(0, eq), item.substr(eq + 1)).second)
        throw ValidationError("adapter config repeats field '" + item.substr(0, eq) + "'");
    }
    pos = end + 1;
  }
  AdapterConfig c;
  std::vector<std::string> missing;
  for (const auto& [k, unused] : fields(c)) {
    (void)unused;
    if (!kv.count(k)) missing.push_back(k);
  }
  if (!missing.empty())
    throw ValidationError("adapter config missing field(s): " + join(missing, ", "));
  for (const auto& [k, v] : kv) {
    if (k == "reduction_factor") {
      auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), c.reduction_factor);
      if (ec != std::errc{} || p != v.data() + v.size())
        throw ValidationError("adapter config field 'reduction_factor' is not an integer: '" + v + "'");
    } else if (k == "non_linearity") {
      c.non_linearity = parse_activation(v);
    } else if (k == "mh_adapter") {
      c.mh_adapter = parse_bool(v, k);
    } else if (k == "output_adapter") {
      c.output_adapter = parse_bool(v, k);
    } else if (k == "new_ln_before") {
      c.new_ln_before = parse_bool(v, k);
    } else if (k == "new_ln_after") {
      c.new_ln_after = parse_bool(v, k);
    } else if (k == "adapter_input") {
      if (v == "sublayer_output") c.adapter_input = AdapterInput::sublayer_output;
      else if (v == "after_original_ln") c.adapter_input = AdapterInput::after_original_ln;
      else throw ValidationError("adapter config field 'adapter_input' has unknown value '" + v + "'");
    } else if (k == "residual_source") {
      if (v == "adapter_input") c.residual_source = ResidualSource::adapter_input;
      else if (v == "pre_sublayer") c.residual_source = ResidualSource::pre_sublayer;
      else throw ValidationError("adapter config field 'residual_source' has unknown value '" + v + "'");
    } else {
      throw ValidationError("adapter config has unknown field '" + k + "'");
    }
  }
  c.validate();
  return c;
}

std::string AdapterConfig::hash() const { return sha256_hex(canonical()); }

std::vector<std::string> preset_names() { return {"bapna", "houlsby", "pfeiffer"}; }

AdapterConfig preset(std::string_view name) {
  AdapterConfig c;
  if (name == "pfeiffer") {
    return c;
  }
  if (name == "houlsby") {
    c.mh_adapter = true;
    c.output_adapter = true;
    c.non_linearity = Activation::swish;
    return c;
  }
  if (name == "bapna") {
    c.new_ln_before = true;
    return c;
  }
  throw ValidationError("unknown adapter preset '" + std::string(name) +
                        "' (valid presets: " + join(preset_names(), ", ") + ")");
}

std::optional<std::string> matching_preset(const AdapterConfig& config) {
  for (const auto& name : preset_names()) {
    AdapterConfig p = preset(name);
    p.reduction_factor = config.reduction_factor;
    if (p == config) return name;
  }
  return std::nullopt;
}

AdapterConfig resolve_adapter_config(std::string_view spec) {
  if (spec.find('=') != std::string_view::npos) return AdapterConfig::parse(spec);
  const auto colon = spec.find(':');
  AdapterConfig c = preset(spec.substr(0, colon));
  if (colon != std::string_view::npos) {
    const auto rf = spec.substr(colon + 1);
    auto [p, ec] = std::from_chars(rf.data(), rf.data() + rf.size(), c.reduction_factor);
    if (ec != std::errc{} || p != rf.data() + rf.size() || c.reduction_factor == 0)
      throw ValidationError("invalid reduction factor in adapter config '" + std::string(spec) + "'");
  }
  return c;
}

Bottleneck resolve_bottleneck(std::size_t hidden_size, std::size_t reduction_factor) {
  if (hidden_size == 0 || reduction_factor == 0) return {1, true};
  const std::size_t b = hidden_size / reduction_factor;
  const bool exact = hidden_size % reduction_factor == 0;
  return {std::max<std::size_t>(b, 1), !exact};
}

namespace {

AdapterLayerWeights make_block(const ModelConfig& model, const AdapterConfig& config,
                               const std::string& prefix, Rng* rng) {
  const std::size_t h = model.hidden_size;
  const std::size_t b = resolve_bottleneck(h, config.reduction_factor).size;
  auto p = [&](const std::string& n, Tensor t) {
    return Parameter(prefix + n, Ownership::adapter, std::move(t));
  };
  AdapterLayerWeights w;
  w.down_w = p("down.weight", rng ? truncated_normal_tensor({h, b}, 0.02, *rng) : Tensor({h, b}));
  w.down_b = p("down.bias", Tensor({b}));
  w.up_w = p("up.weight", Tensor({b, h}));
  w.up_b = p("up.bias", Tensor({h}));
  const double gain = rng ? 1.0 : 0.0;
  if (config.new_ln_before)
    w.ln_before = LayerNormParams{p("ln_before.gamma", Tensor({h}, gain)), p("ln_before.beta", Tensor({h}))};
  if (config.new_ln_after)
    w.ln_after = LayerNormParams{p("ln_after.gamma", Tensor({h}, gain)), p("ln_after.beta", Tensor({h}))};
  return w;
}

AdapterWeights build(const ModelConfig& model, const AdapterConfig& config, Rng* rng) {
  model.validate();
  config.validate();
  AdapterWeights w;
  for (std::size_t l = 0; l < model.num_layers; ++l) {
    const std::string prefix = "layer." + std::to_string(l) + ".";
    if (config.mh_adapter) w.attention.push_back(make_block(model, config, prefix + "attention.", rng));
    if (config.output_adapter) w.ffn.push_back(make_block(model, config, prefix + "output.", rng));
  }
  return w;
}

}  // namespace

AdapterWeights init_adapter(const ModelConfig& model, const AdapterConfig& config, Rng& rng) {
  return build(model, config, &rng);
}

AdapterWeights empty_adapter(const ModelConfig& model, const AdapterConfig& config) {
  return build(model, config, nullptr);
}

std::size_t count_adapter_params(const ModelConfig& model, const AdapterConfig& config) {
  const std::size_t h = model.hidden_size;
  const std::size_t b = resolve_bottleneck(h, config.reduction_factor).size;
  std::size_t per_site = h * b + b + b * h + h;
  if (config.new_ln_before) per_site += 2 * h;
  if (config.new_ln_after) per_site += 2 * h;
  const std::size_t sites = (config.mh_adapter ? 1 : 0) + (config.output_adapter ? 1 : 0);
  return model.num_layers * sites * per_site;
}

Var adapter_forward(Binder& bind, Var hidden, Var residual, const AdapterLayerWeights& w,
                    const AdapterConfig& config, double ln_epsilon) {
  Tape& t = bind.tape();
  const Tensor& hv = t.value(hidden);
  const Tensor& rv = t.value(residual);
  if (hv.shape() != rv.shape())
    throw ShapeError("adapter_forward: hidden " + shape_str(hv.shape()) + " vs residual " +
                     shape_str(rv.shape()));
  if (hv.cols() != w.down_w.value.rows())
    throw ShapeError("adapter_forward: hidden " + shape_str(hv.shape()) + " vs down-projection " +
                     shape_str(w.down_w.value.shape()));
  if (config.new_ln_before != w.ln_before.has_value() || config.new_ln_after != w.ln_after.has_value())
    throw ValidationError("adapter_forward: weights do not match the configured LayerNorms");

  Var x = hidden;
  if (w.ln_before) x = t.layer_norm(x, bind(w.ln_before->gamma), bind(w.ln_before->beta), ln_epsilon);
  const Var down = t.add_bias(t.matmul(x, bind(w.down_w)), bind(w.down_b));
  const Var up = t.add_bias(t.matmul(t.activation(down, config.non_linearity), bind(w.up_w)),
                            bind(w.up_b));
  Var out = t.add(residual, up);
  if (w.ln_after) out = t.layer_norm(out, bind(w.ln_after->gamma), bind(w.ln_after->beta), ln_epsilon);
  return out;
}

}  // namespace adaptkit
