#include "adaptkit/backbone.hpp"

#include <charconv>
#include <cmath>
#include <cstdio>
#include <map>

#include "adaptkit/digest.hpp"
#include "adaptkit/errors.hpp"
#include "adaptkit/rng.hpp"

namespace adaptkit {

std::string_view ownership_name(Ownership o) {
  switch (o) {
    case Ownership::base:
      return "base";
    case Ownership::adapter:
      return "adapter";
    case Ownership::head:
      return "head";
  }
  return "unknown";
}

Var Binder::operator()(const Parameter& p) {
  if (auto it = vars_.find(&p); it != vars_.end()) return it->second;
  Var v = tape_.leaf(p.value);
  vars_.emplace(&p, v);
  order_.emplace_back(&p, v);
  return v;
}

ModelConfig ModelConfig::base() {
  ModelConfig c;
  c.model_type = "bert-base";
  c.hidden_size = 768;
  c.num_layers = 12;
  c.num_heads = 12;
  c.ffn_size = 3072;
  c.vocab_size = 30522;
  c.max_seq_len = 512;
  return c;
}

ModelConfig ModelConfig::large() {
  ModelConfig c;
  c.model_type = "bert-large";
  c.hidden_size = 1024;
  c.num_layers = 24;
  c.num_heads = 16;
  c.ffn_size = 4096;
  c.vocab_size = 30522;
  c.max_seq_len = 512;
  return c;
}

ModelConfig ModelConfig::named(std::string_view name) {
  if (name == "mini-bert") return desk();
  if (name == "bert-base") return base();
  if (name == "bert-large") return large();
  throw ValidationError("unknown model config '" + std::string(name) +
                        "' (expected mini-bert, bert-base or bert-large)");
}

void ModelConfig::validate() const {
  std::vector<std::string> problems;
  if (model_type.empty() || model_type.find_first_of(";=\n") != std::string::npos)
    problems.push_back("model_type must be a nonempty identifier");
  auto positive = [&](std::size_t v, const char* name) {
    if (v == 0) problems.push_back(std::string(name) + " must be positive");
  };
  positive(hidden_size, "hidden_size");
  positive(num_layers, "num_layers");
  positive(num_heads, "num_heads");
  positive(ffn_size, "ffn_size");
  positive(vocab_size, "vocab_size");
  positive(max_seq_len, "max_seq_len");
  if (num_heads && hidden_size % num_heads != 0)
    problems.push_back("hidden_size must be divisible by num_heads");
  if (!(layer_norm_epsilon > 0.0)) problems.push_back("layer_norm_epsilon must be positive");
  if (!problems.empty()) throw ValidationError("invalid model config: " + join(problems, "; "));
}

std::string ModelConfig::canonical() const {
  char eps[32];
  std::snprintf(eps, sizeof eps, "%.17g", layer_norm_epsilon);
  return "model_type=" + model_type + ";hidden_size=" + std::to_string(hidden_size) +
         ";num_layers=" + std::to_string(num_layers) + ";num_heads=" + std::to_string(num_heads) +
         ";ffn_size=" + std::to_string(ffn_size) + ";vocab_size=" + std::to_string(vocab_size) +
         ";max_seq_len=" + std::to_string(max_seq_len) + ";layer_norm_epsilon=" + eps;
}

namespace {

std::map<std::string, std::string> split_fields(std::string_view text, std::string_view what) {
  std::map<std::string, std::string> out;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    std::size_t end = text.find_first_of(";\n", pos);
    if (end == std::string_view::npos) end = text.size();
    std::string_view item = text.substr(pos, end - pos);
    while (!item.empty() && (item.back() == '\r' || item.back() == ' ')) item.remove_suffix(1);
    while (!item.empty() && item.front() == ' ') item.remove_prefix(1);
    if (!item.empty() && item.front() != '#') {
      auto eq = item.find('=');
      if (eq == std::string_view::npos)
        throw ValidationError("malformed " + std::string(what) + " entry '" + std::string(item) +
                              "' (expected key=value)");
      out[std::string(item.substr(0, eq))] = std::string(item.substr(eq + 1));
    }
    pos = end + 1;
  }
  return out;
}

std::size_t parse_size(const std::string& v, const std::string& key) {
  std::size_t out = 0;
  auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc{} || p != v.data() + v.size())
    throw ValidationError("field '" + key + "' is not an unsigned integer: '" + v + "'");
  return out;
}

}  // namespace

ModelConfig ModelConfig::parse(std::string_view canonical) {
  auto f = split_fields(canonical, "model config");
  auto take = [&](const char* key) {
    auto it = f.find(key);
    if (it == f.end()) throw ValidationError(std::string("model config missing field '") + key + "'");
    std::string v = it->second;
    f.erase(it);
    return v;
  };
  ModelConfig c;
  c.model_type = take("model_type");
  c.hidden_size = parse_size(take("hidden_size"), "hidden_size");
  c.num_layers = parse_size(take("num_layers"), "num_layers");
  c.num_heads = parse_size(take("num_heads"), "num_heads");
  c.ffn_size = parse_size(take("ffn_size"), "ffn_size");
  c.vocab_size = parse_size(take("vocab_size"), "vocab_size");
  c.max_seq_len = parse_size(take("max_seq_len"), "max_seq_len");
  const std::string eps = take("layer_norm_epsilon");
  char* end = nullptr;
  c.layer_norm_epsilon = std::strtod(eps.c_str(), &end);
  if (end != eps.c_str() + eps.size())
    throw ValidationError("field 'layer_norm_epsilon' is not a number: '" + eps + "'");
  if (!f.empty()) throw ValidationError("model config has unknown field '" + f.begin()->first + "'");
  c.validate();
  return c;
}

std::string ModelConfig::hash() const { return sha256_hex(canonical()); }

namespace {

BackboneWeights make_backbone(const ModelConfig& c, Rng* rng) {
  c.validate();
  const std::size_t h = c.hidden_size, f = c.ffn_size;
  const double std_dev = 1.0 / std::sqrt(static_cast<double>(h));
  auto matrix = [&](std::string name, std::size_t r, std::size_t cols) {
    return Parameter(std::move(name), Ownership::base,
                     rng ? truncated_normal_tensor({r, cols}, std_dev, *rng) : Tensor({r, cols}));
  };
  auto vec = [&](std::string name, std::size_t n, double fill) {
    return Parameter(std::move(name), Ownership::base, Tensor({n}, fill));
  };

  BackboneWeights w;
  w.token_embedding = matrix("embeddings.token", c.vocab_size, h);
  w.position_embedding = matrix("embeddings.position", c.max_seq_len, h);
  w.embedding_ln_gamma = vec("embeddings.ln.gamma", h, 1.0);
  w.embedding_ln_beta = vec("embeddings.ln.beta", h, 0.0);
  w.layers.reserve(c.num_layers);
  for (std::size_t l = 0; l < c.num_layers; ++l) {
    const std::string p = "layer." + std::to_string(l) + ".";
    EncoderLayerWeights L;
    L.q_w = matrix(p + "attention.query.weight", h, h);
    L.q_b = vec(p + "attention.query.bias", h, 0.0);
    L.k_w = matrix(p + "attention.key.weight", h, h);
    L.k_b = vec(p + "attention.key.bias", h, 0.0);
    L.v_w = matrix(p + "attention.value.weight", h, h);
    L.v_b = vec(p + "attention.value.bias", h, 0.0);
    L.o_w = matrix(p + "attention.output.weight", h, h);
    L.o_b = vec(p + "attention.output.bias", h, 0.0);
    L.attn_ln_gamma = vec(p + "attention.ln.gamma", h, 1.0);
    L.attn_ln_beta = vec(p + "attention.ln.beta", h, 0.0);
    L.ffn_in_w = matrix(p + "ffn.intermediate.weight", h, f);
    L.ffn_in_b = vec(p + "ffn.intermediate.bias", f, 0.0);
    L.ffn_out_w = matrix(p + "ffn.output.weight", f, h);
    L.ffn_out_b = vec(p + "ffn.output.bias", h, 0.0);
    L.ffn_ln_gamma = vec(p + "ffn.ln.gamma", h, 1.0);
    L.ffn_ln_beta = vec(p + "ffn.ln.beta", h, 0.0);
    w.layers.push_back(std::move(L));
  }
  return w;
}

}  // namespace

BackboneWeights init_backbone(const ModelConfig& config, std::uint64_t seed) {
  Rng rng(seed);
  return make_backbone(config, &rng);
}

BackboneWeights empty_backbone(const ModelConfig& config) { return make_backbone(config, nullptr); }

std::size_t count_backbone_params(const ModelConfig& c) {
  const std::size_t h = c.hidden_size, f = c.ffn_size;
  const std::size_t embeddings = c.vocab_size * h + c.max_seq_len * h + 2 * h;
  const std::size_t attention = 4 * (h * h + h) + 2 * h;
  const std::size_t ffn = h * f + f + f * h + h + 2 * h;
  return embeddings + c.num_layers * (attention + ffn);
}

std::string backbone_digest(const BackboneWeights& weights) {
  Sha256Stream s;
  weights.for_each([&](const Parameter& p) {
    s.update(std::span(reinterpret_cast<const std::uint8_t*>(p.name().data()), p.name().size()));
    const auto d = p.value.data();
    s.update(std::span(reinterpret_cast<const std::uint8_t*>(d.data()), d.size_bytes()));
  });
  return to_hex(s.finish());
}

void check_token_ids(const ModelConfig& config, const std::vector<std::size_t>& ids) {
  if (ids.empty()) throw ValidationError("token sequence is empty");
  if (ids.size() > config.max_seq_len)
    throw ValidationError("sequence length " + std::to_string(ids.size()) + " exceeds max_seq_len " +
                          std::to_string(config.max_seq_len));
  for (std::size_t i = 0; i < ids.size(); ++i)
    if (ids[i] >= config.vocab_size)
      throw ValidationError("token id " + std::to_string(ids[i]) + " at position " +
                            std::to_string(i) + " is out of range for vocab_size " +
                            std::to_string(config.vocab_size));
}

Var attention_forward(Binder& bind, const ModelConfig& config, const EncoderLayerWeights& L,
                      Var x) {
  Tape& t = bind.tape();
  const Var q = t.add_bias(t.matmul(x, bind(L.q_w)), bind(L.q_b));
  const Var k = t.add_bias(t.matmul(x, bind(L.k_w)), bind(L.k_b));
  const Var v = t.add_bias(t.matmul(x, bind(L.v_w)), bind(L.v_b));
  const std::size_t dh = config.hidden_size / config.num_heads;
  const double inv_sqrt = 1.0 / std::sqrt(static_cast<double>(dh));
  std::vector<Var> heads;
  heads.reserve(config.num_heads);
  for (std::size_t hd = 0; hd < config.num_heads; ++hd) {
    const Var qh = t.slice_cols(q, hd * dh, dh);
    const Var kh = t.slice_cols(k, hd * dh, dh);
    const Var vh = t.slice_cols(v, hd * dh, dh);
    const Var scores = t.scale(t.matmul(qh, t.transpose(kh)), inv_sqrt);
    heads.push_back(t.matmul(t.softmax_rows(scores), vh));
  }
  const Var ctx = config.num_heads == 1 ? heads[0] : t.concat_cols(heads);
  return t.add_bias(t.matmul(ctx, bind(L.o_w)), bind(L.o_b));
}

Var encoder_layer_forward(Binder& bind, const ModelConfig& config, const EncoderLayerWeights& L,
                          std::size_t layer_index, Var x, const EncoderOptions& options) {
  Tape& t = bind.tape();
  const double eps = config.layer_norm_epsilon;

  auto add_norm = [&](Sublayer site, Var out, Var in, const Parameter& g, const Parameter& b) {
    const std::function<Var(Var)> ln = [&](Var v) { return t.layer_norm(v, bind(g), bind(b), eps); };
    if (options.hook) return (*options.hook)(layer_index, site, out, in, ln);
    return ln(t.add(out, in));
  };

  const Var attn = attention_forward(bind, config, L, x);
  const Var h1 = add_norm(Sublayer::attention, attn, x, L.attn_ln_gamma, L.attn_ln_beta);

  const Var inter = t.activation(t.add_bias(t.matmul(h1, bind(L.ffn_in_w)), bind(L.ffn_in_b)),
                                 Activation::gelu);
  const Var ffn = t.add_bias(t.matmul(inter, bind(L.ffn_out_w)), bind(L.ffn_out_b));
  const Var h2 = add_norm(Sublayer::ffn, ffn, h1, L.ffn_ln_gamma, L.ffn_ln_beta);

  if (options.trace)
    options.trace->push_back({t.value(attn), t.value(x), t.value(h1), t.value(ffn), t.value(h1),
                              t.value(h2)});
  return h2;
}

Var encoder_forward(Binder& bind, const ModelConfig& config, const BackboneWeights& w,
                    const std::vector<std::size_t>& token_ids, const EncoderOptions& options) {
  check_token_ids(config, token_ids);
  Tape& t = bind.tape();
  std::vector<std::size_t> positions(token_ids.size());
  for (std::size_t i = 0; i < positions.size(); ++i) positions[i] = i;
  const Var tok = t.embedding_lookup(bind(w.token_embedding), token_ids);
  const Var pos = t.embedding_lookup(bind(w.position_embedding), positions);
  Var x = t.layer_norm(t.add(tok, pos), bind(w.embedding_ln_gamma), bind(w.embedding_ln_beta),
                       config.layer_norm_epsilon);
  for (std::size_t l = 0; l < w.layers.size(); ++l)
    x = encoder_layer_forward(bind, config, w.layers[l], l, x, options);
  return x;
}

}  // namespace adaptkit
