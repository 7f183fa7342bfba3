#include "adaptkit/package.hpp"

#include <unistd.h>

#include <atomic>
#include <bit>
#include <cstring>
#include <fstream>
#include <map>

#include "adaptkit/errors.hpp"
#include "adaptkit/zip.hpp"

namespace adaptkit {
namespace fs = std::filesystem;

namespace {

static_assert(std::endian::native == std::endian::little || std::endian::native == std::endian::big);

class Writer {
 public:
  void u8(std::uint8_t v) { out_.push_back(v); }
  void u16(std::uint16_t v) { le(v, 2); }
  void u32(std::uint32_t v) { le(v, 4); }
  void u64(std::uint64_t v) { le(v, 8); }
  void bytes(std::span<const std::uint8_t> b) { out_.insert(out_.end(), b.begin(), b.end()); }
  void text(std::string_view s) { out_.insert(out_.end(), s.begin(), s.end()); }
  std::vector<std::uint8_t>& buffer() { return out_; }

 private:
  void le(std::uint64_t v, int n) {
    for (int i = 0; i < n; ++i) out_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
  }
  std::vector<std::uint8_t> out_;
};

class Reader {
 public:
  explicit Reader(std::span<const std::uint8_t> b) : b_(b) {}
  std::uint8_t u8() { return static_cast<std::uint8_t>(le(1)); }
  std::uint16_t u16() { return static_cast<std::uint16_t>(le(2)); }
  std::uint32_t u32() { return static_cast<std::uint32_t>(le(4)); }
  std::uint64_t u64() { return le(8); }
  std::span<const std::uint8_t> bytes(std::uint64_t n) {
    need(n);
    auto s = b_.subspan(pos_, n);
    pos_ += n;
    return s;
  }
  std::string text(std::uint64_t n) {
    auto s = bytes(n);
    return std::string(s.begin(), s.end());
  }
  std::size_t pos() const { return pos_; }

 private:
  void need(std::uint64_t n) const {
    if (n > b_.size() - pos_) throw ValidationError("package truncated at byte " + std::to_string(pos_));
  }
  std::uint64_t le(int n) {
    need(n);
    std::uint64_t v = 0;
    for (int i = 0; i < n; ++i) v |= static_cast<std::uint64_t>(b_[pos_ + i]) << (8 * i);
    pos_ += n;
    return v;
  }
  std::span<const std::uint8_t> b_;
  std::size_t pos_ = 0;
};

void encode_section(Writer& w, const TensorSection& s) {
  w.u32(static_cast<std::uint32_t>(s.manifest.size()));
  for (const auto& r : s.manifest) {
    w.u16(static_cast<std::uint16_t>(r.name.size()));
    w.text(r.name);
    w.u8(static_cast<std::uint8_t>(r.owner));
    w.u8(static_cast<std::uint8_t>(r.shape.size()));
    for (auto d : r.shape) w.u32(static_cast<std::uint32_t>(d));
    w.u64(r.offset);
    w.u64(r.nbytes);
    w.bytes(r.digest);
  }
  w.u64(s.blob.size());
  w.bytes(s.blob);
}

TensorSection decode_section(Reader& r, const char* what) {
  TensorSection s;
  const std::uint32_t count = r.u32();
  for (std::uint32_t i = 0; i < count; ++i) {
    TensorRecord rec;
    rec.name = r.text(r.u16());
    const std::uint8_t owner = r.u8();
    if (owner > 2) throw ValidationError(std::string(what) + ": tensor '" + rec.name + "' has unknown ownership tag " + std::to_string(owner));
    rec.owner = static_cast<Ownership>(owner);
    const std::uint8_t rank = r.u8();
    if (rank < 1 || rank > 2) throw ValidationError(std::string(what) + ": tensor '" + rec.name + "' has rank " + std::to_string(rank));
    std::uint64_t elems = 1;
    for (std::uint8_t d = 0; d < rank; ++d) {
      rec.shape.push_back(r.u32());
      if (rec.shape.back() == 0) throw ValidationError(std::string(what) + ": tensor '" + rec.name + "' has a zero dimension");
      elems *= rec.shape.back();
    }
    rec.offset = r.u64();
    rec.nbytes = r.u64();
    if (rec.nbytes != 4 * elems)
      throw ValidationError(std::string(what) + ": tensor '" + rec.name + "' declares " + std::to_string(rec.nbytes) + " bytes for shape " + shape_str(rec.shape));
    auto d = r.bytes(32);
    std::copy(d.begin(), d.end(), rec.digest.begin());
    s.manifest.push_back(std::move(rec));
  }
  const std::uint64_t blob_len = r.u64();
  auto blob = r.bytes(blob_len);
  s.blob.assign(blob.begin(), blob.end());
  std::uint64_t expect_offset = 0;
  for (const auto& rec : s.manifest) {
    if (rec.offset != expect_offset)
      throw ValidationError(std::string(what) + ": tensor '" + rec.name + "' is not at the expected offset");
    expect_offset += rec.nbytes;
    if (expect_offset > s.blob.size())
      throw ValidationError(std::string(what) + ": tensor '" + rec.name + "' extends past the blob");
    const auto bytes = std::span<const std::uint8_t>(s.blob).subspan(rec.offset, rec.nbytes);
    if (sha256(bytes) != rec.digest)
      throw IntegrityError(std::string(what) + ": sha256 mismatch for tensor '" + rec.name + "'");
  }
  if (expect_offset != s.blob.size())
    throw ValidationError(std::string(what) + ": blob has " + std::to_string(s.blob.size() - expect_offset) + " trailing bytes");
  return s;
}

std::string bool_str(bool b) { return b ? "true" : "false"; }

std::map<std::string, std::string> parse_header(const std::string& text) {
  std::map<std::string, std::string> kv;
  std::size_t start = 0;
  while (start < text.size()) {
    std::size_t end = text.find('\n', start);
    if (end == std::string::npos) end = text.size();
    const std::string line = text.substr(start, end - start);
    start = end + 1;
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw ValidationError("package header line without '=': " + line);
    if (!kv.emplace(line.substr(0, eq), line.substr(eq + 1)).second)
      throw ValidationError("package header repeats field '" + line.substr(0, eq) + "'");
  }
  return kv;
}

const std::string& field(const std::map<std::string, std::string>& kv, const std::string& key) {
  auto it = kv.find(key);
  if (it == kv.end()) throw ValidationError("package header is missing field '" + key + "'");
  return it->second;
}

std::size_t parse_count(const std::string& s, const std::string& key) {
  std::size_t pos = 0;
  unsigned long long v = 0;
  try {
    v = std::stoull(s, &pos);
  } catch (const std::exception&) {
    pos = 0;
  }
  if (pos != s.size() || s.empty()) throw ValidationError("package header field '" + key + "' is not a count: " + s);
  return static_cast<std::size_t>(v);
}

Tensor tensor_from(const TensorSection& s, const std::string& name) {
  for (const auto& rec : s.manifest)
    if (rec.name == name) return s.tensor(rec);
  throw ValidationError("package has no tensor named '" + name + "'");
}

void fill_from(Parameter& p, const TensorSection& s) { p.value = tensor_from(s, p.name()); }

struct Expected {
  std::string name;
  Ownership owner;
  Shape shape;
};

void compare_manifest(const std::vector<TensorRecord>& got, const std::vector<Expected>& want,
                      const std::string& what, std::vector<std::string>& out) {
  std::map<std::string, const TensorRecord*> by_name;
  for (const auto& r : got)
    if (!by_name.emplace(r.name, &r).second) out.push_back(what + ": duplicate tensor '" + r.name + "'");
  std::map<std::string, bool> wanted;
  for (const auto& e : want) {
    wanted[e.name] = true;
    auto it = by_name.find(e.name);
    if (it == by_name.end()) {
      out.push_back(what + ": missing tensor '" + e.name + "'");
      continue;
    }
    const TensorRecord& r = *it->second;
    if (r.shape != e.shape)
      out.push_back(what + ": tensor '" + e.name + "' has shape " + shape_str(r.shape) + ", expected " + shape_str(e.shape));
    if (r.owner != e.owner)
      out.push_back(what + ": tensor '" + e.name + "' is tagged " + std::string(ownership_name(r.owner)) + ", expected " + std::string(ownership_name(e.owner)));
  }
  for (const auto& r : got)
    if (!wanted.count(r.name)) out.push_back(what + ": unexpected tensor '" + r.name + "'");
  if (out.empty()) {
    for (std::size_t i = 0; i < want.size(); ++i)
      if (got[i].name != want[i].name) {
        out.push_back(what + ": tensors are not in canonical order");
        break;
      }
  }
}

std::vector<Expected> head_expectation(const ModelConfig& model, const HeadInfo& info) {
  return {{"head.weight", Ownership::head, {model.hidden_size, info.outputs}},
          {"head.bias", Ownership::head, {info.outputs}}};
}

void add_head_section(Package& pkg, const PredictionHead& head) {
  pkg.head_info = HeadInfo{head.name, head.kind, head.outputs};
  pkg.head.emplace();
  add_tensor(*pkg.head, head.weight);
  add_tensor(*pkg.head, head.bias);
}

PredictionHead head_from(const Package& pkg, const std::string& name, const ModelConfig& model) {
  PredictionHead h;
  h.name = name;
  h.kind = pkg.head_info->kind;
  h.outputs = pkg.head_info->outputs;
  h.model_hash = model.hash();
  h.weight = Parameter("head.weight", Ownership::head, tensor_from(*pkg.head, "head.weight"));
  h.bias = Parameter("head.bias", Ownership::head, tensor_from(*pkg.head, "head.bias"));
  return h;
}

std::string trailer_hex(const std::vector<std::uint8_t>& bytes) {
  return to_hex(std::span(bytes).last(32));
}

Package decode_checked(std::span<const std::uint8_t> bytes, PackageKind kind) {
  Package pkg = decode_package(bytes);
  if (pkg.kind != kind)
    throw ValidationError(std::string("expected ") + (kind == PackageKind::adapter ? "an adapter package" : "a backbone checkpoint") + ", found the other kind");
  const auto violations = check_manifest(pkg);
  if (!violations.empty()) throw ValidationError("package manifest inconsistent: " + join(violations, "; "));
  return pkg;
}

fs::path package_path(const fs::path& dest, const std::string& stem, const char* ext) {
  const std::string s = dest.string();
  if (fs::is_directory(dest) || (!s.empty() && s.back() == '/')) return dest / (stem + ext);
  return dest;
}

std::vector<std::uint8_t> package_bytes_from(const fs::path& source) {
  fs::path file = source;
  if (fs::is_directory(source)) {
    std::vector<fs::path> found;
    for (const auto& e : fs::directory_iterator(source)) {
      const auto name = e.path().filename().string();
      if (e.is_regular_file() && (e.path().extension() == ".adpk" || name == "adapter.pkg" || e.path().extension() == ".zip"))
        found.push_back(e.path());
    }
    if (found.empty()) throw NotFoundError("no adapter package in directory " + source.string());
    if (found.size() > 1) {
      std::vector<std::string> names;
      for (auto& f : found) names.push_back(f.filename().string());
      std::sort(names.begin(), names.end());
      throw AmbiguityError("several adapter packages in " + source.string() + ": " + join(names, ", "), names);
    }
    file = found.front();
  }
  auto bytes = read_file(file);
  if (!looks_like_zip(bytes)) return bytes;
  for (auto& entry : zip_read(bytes))
    if (entry.name == "adapter.pkg") return std::move(entry.data);
  throw ValidationError("archive " + file.string() + " has no adapter.pkg entry");
}

}  // namespace

Tensor TensorSection::tensor(const TensorRecord& rec) const {
  if (rec.offset + rec.nbytes > blob.size()) throw ValidationError("tensor '" + rec.name + "' extends past the blob");
  std::vector<double> values(rec.nbytes / 4);
  for (std::size_t i = 0; i < values.size(); ++i) {
    const std::uint8_t* p = blob.data() + rec.offset + 4 * i;
    const std::uint32_t bits = static_cast<std::uint32_t>(p[0]) | (static_cast<std::uint32_t>(p[1]) << 8) |
                               (static_cast<std::uint32_t>(p[2]) << 16) | (static_cast<std::uint32_t>(p[3]) << 24);
    values[i] = static_cast<double>(std::bit_cast<float>(bits));
  }
  return Tensor(rec.shape, std::move(values));
}

void add_tensor(TensorSection& section, const Parameter& p) {
  TensorRecord rec;
  rec.name = p.name();
  rec.owner = p.owner();
  rec.shape = p.value.shape();
  rec.offset = section.blob.size();
  rec.nbytes = 4 * p.value.size();
  for (double v : p.value.data()) {
    const std::uint32_t bits = std::bit_cast<std::uint32_t>(static_cast<float>(v));
    for (int i = 0; i < 4; ++i) section.blob.push_back(static_cast<std::uint8_t>(bits >> (8 * i)));
  }
  rec.digest = sha256(std::span<const std::uint8_t>(section.blob).subspan(rec.offset, rec.nbytes));
  section.manifest.push_back(std::move(rec));
}

std::vector<std::pair<std::string, std::string>> Package::header() const {
  std::vector<std::pair<std::string, std::string>> h;
  h.emplace_back("package_kind", kind == PackageKind::adapter ? "adapter" : "backbone");
  h.emplace_back("model_type", model.model_type);
  h.emplace_back("model_config", model.canonical());
  h.emplace_back("model_hash", model.hash());
  if (kind == PackageKind::adapter) {
    h.emplace_back("adapter_name", adapter_name);
    h.emplace_back("adapter_type", std::string(adapter_type_name(adapter_type)));
    h.emplace_back("adapter_config", adapter_config.canonical());
    h.emplace_back("adapter_config_hash", adapter_config.hash());
    h.emplace_back("preset", preset_label());
  }
  h.emplace_back("has_head", bool_str(head_info.has_value()));
  if (head_info) {
    h.emplace_back("head_name", head_info->name);
    h.emplace_back("head_kind", std::string(head_kind_name(head_info->kind)));
    h.emplace_back("head_outputs", std::to_string(head_info->outputs));
  }
  return h;
}

std::string Package::preset_label() const { return matching_preset(adapter_config).value_or("custom"); }

std::vector<std::uint8_t> encode_package(const Package& pkg) {
  if (pkg.head_info.has_value() != pkg.head.has_value())
    throw ValidationError("package head info and head tensors must be given together");
  std::string header;
  for (const auto& [k, v] : pkg.header()) {
    if (k.find_first_of("=\n") != std::string::npos || v.find('\n') != std::string::npos)
      throw ValidationError("package header field '" + k + "' contains a reserved character");
    header += k + "=" + v + "\n";
  }
  Writer w;
  w.text(std::string_view(kPackageMagic, 4));
  w.u32(pkg.format_version);
  w.u32(static_cast<std::uint32_t>(header.size()));
  w.text(header);
  encode_section(w, pkg.weights);
  w.u8(pkg.head ? 1 : 0);
  if (pkg.head) encode_section(w, *pkg.head);
  const Sha256 digest = sha256(w.buffer());
  w.bytes(digest);
  return std::move(w.buffer());
}

Package decode_package(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < 4 + 4 + 4 + 32) throw ValidationError("not an adapter package (too short)");
  const bool magic_ok = std::memcmp(bytes.data(), kPackageMagic, 4) == 0;
  const auto body = bytes.first(bytes.size() - 32);
  const auto trailer = bytes.last(32);
  if (!std::equal(trailer.begin(), trailer.end(), sha256(body).begin()))
    throw IntegrityError(magic_ok ? "package sha256 mismatch: contents do not match the recorded digest"
                                  : "package sha256 mismatch (bad magic; possibly not an adapter package)");
  if (!magic_ok) throw ValidationError("not an adapter package (bad magic)");

  Package pkg;
  Reader r(body);
  r.bytes(4);
  pkg.format_version = r.u32();
  if (pkg.format_version != kPackageFormatVersion)
    throw CompatibilityError("unsupported package format version " + std::to_string(pkg.format_version));
  const auto kv = parse_header(r.text(r.u32()));

  const std::string& kind = field(kv, "package_kind");
  if (kind == "adapter")
    pkg.kind = PackageKind::adapter;
  else if (kind == "backbone")
    pkg.kind = PackageKind::backbone;
  else
    throw ValidationError("unknown package kind '" + kind + "'");

  pkg.model = ModelConfig::parse(field(kv, "model_config"));
  if (pkg.model.model_type != field(kv, "model_type"))
    throw ValidationError("package model_type disagrees with its model_config");
  if (pkg.model.hash() != field(kv, "model_hash"))
    throw IntegrityError("package model_hash does not match its model_config");
  if (pkg.kind == PackageKind::adapter) {
    pkg.adapter_name = field(kv, "adapter_name");
    if (pkg.adapter_name.empty()) throw ValidationError("package adapter_name is empty");
    pkg.adapter_type = parse_adapter_type(field(kv, "adapter_type"));
    pkg.adapter_config = AdapterConfig::parse(field(kv, "adapter_config"));
    if (pkg.adapter_config.hash() != field(kv, "adapter_config_hash"))
      throw IntegrityError("package adapter_config_hash does not match its adapter_config");
  }
  const std::string& has_head = field(kv, "has_head");
  if (has_head != "true" && has_head != "false") throw ValidationError("package has_head must be true or false");
  if (has_head == "true")
    pkg.head_info = HeadInfo{field(kv, "head_name"), parse_head_kind(field(kv, "head_kind")),
                             parse_count(field(kv, "head_outputs"), "head_outputs")};

  pkg.weights = decode_section(r, "weights");
  const std::uint8_t head_flag = r.u8();
  if (head_flag > 1 || (head_flag == 1) != pkg.head_info.has_value())
    throw ValidationError("package head flag disagrees with its header");
  if (head_flag) pkg.head = decode_section(r, "head");
  if (r.pos() != body.size()) throw ValidationError("package has trailing bytes before its digest");
  pkg.sha256 = to_hex(trailer);
  return pkg;
}

std::vector<std::string> check_manifest(const Package& pkg) {
  std::vector<std::string> out;
  std::vector<Expected> want;
  try {
    pkg.model.validate();
    if (pkg.kind == PackageKind::adapter) {
      pkg.adapter_config.validate();
      empty_adapter(pkg.model, pkg.adapter_config).for_each([&](const Parameter& p) {
        want.push_back({p.name(), p.owner(), p.value.shape()});
      });
    } else {
      empty_backbone(pkg.model).for_each([&](const Parameter& p) {
        want.push_back({p.name(), p.owner(), p.value.shape()});
      });
    }
  } catch (const ValidationError& e) {
    return {e.what()};
  }
  compare_manifest(pkg.weights.manifest, want, "weights", out);
  if (pkg.kind == PackageKind::adapter)
    for (const auto& r : pkg.weights.manifest)
      if (r.owner == Ownership::base) out.push_back("weights: adapter package contains base tensor '" + r.name + "'");
  if (pkg.head_info && pkg.head) {
    if (pkg.head_info->outputs == 0) out.push_back("head: zero outputs");
    else if (pkg.head_info->kind == HeadKind::regression && pkg.head_info->outputs != 1)
      out.push_back("head: regression heads have exactly one output");
    else
      compare_manifest(pkg.head->manifest, head_expectation(pkg.model, *pkg.head_info), "head", out);
  }
  const std::uint64_t expected_blob =
      pkg.kind == PackageKind::adapter ? 4ull * count_adapter_params(pkg.model, pkg.adapter_config) : 0;
  if (pkg.kind == PackageKind::adapter && out.empty() && pkg.weights.blob.size() != expected_blob)
    out.push_back("weights: blob holds " + std::to_string(pkg.weights.blob.size()) + " bytes, expected " +
                  std::to_string(expected_blob));
  return out;
}

Package build_adapter_package(const ModelConfig& model, const AdapterEntry& adapter,
                              const PredictionHead* head) {
  Package pkg;
  pkg.kind = PackageKind::adapter;
  pkg.model = model;
  pkg.adapter_name = adapter.name;
  pkg.adapter_type = adapter.type;
  pkg.adapter_config = adapter.config;
  adapter.weights.for_each([&](const Parameter& p) { add_tensor(pkg.weights, p); });
  if (head) add_head_section(pkg, *head);
  pkg.sha256 = trailer_hex(encode_package(pkg));
  return pkg;
}

Package build_adapter_package(const Model& model, const std::string& adapter_name, bool include_head) {
  const AdapterEntry& entry = model.adapter(adapter_name);
  const PredictionHead* head = include_head && model.has_head(adapter_name) ? &model.head(adapter_name) : nullptr;
  return build_adapter_package(model.config(), entry, head);
}

Package build_backbone_package(const Model& model, const std::string& head_name) {
  Package pkg;
  pkg.kind = PackageKind::backbone;
  pkg.model = model.config();
  model.backbone().for_each([&](const Parameter& p) { add_tensor(pkg.weights, p); });
  if (!head_name.empty()) add_head_section(pkg, model.head(head_name));
  pkg.sha256 = trailer_hex(encode_package(pkg));
  return pkg;
}

fs::path save_adapter(const Model& model, const std::string& adapter_name, const fs::path& dest,
                      bool include_head) {
  const Package pkg = build_adapter_package(model, adapter_name, include_head);
  const fs::path path = package_path(dest, adapter_name, ".adpk");
  write_file_atomic(path, encode_package(pkg));
  return path;
}

AdapterEntry& stitch_package(Model& model, const Package& pkg, const LoadOptions& options) {
  if (pkg.kind != PackageKind::adapter) throw ValidationError("not an adapter package");
  const std::string live = model.config().hash();
  if (pkg.model.hash() != live)
    throw CompatibilityError("adapter '" + pkg.adapter_name + "' was trained on model " + pkg.model.hash() +
                             " (" + pkg.model.model_type + "), but the live model is " + live + " (" +
                             model.config().model_type + ")");
  if (options.expected_config && !(*options.expected_config == pkg.adapter_config))
    throw CompatibilityError("requested adapter configuration " + options.expected_config->hash() + " [" +
                             matching_preset(*options.expected_config).value_or("custom") +
                             "] conflicts with the package configuration " + pkg.adapter_config.hash() +
                             " [" + pkg.preset_label() + "]");
  const auto violations = check_manifest(pkg);
  if (!violations.empty()) throw ValidationError("package manifest inconsistent: " + join(violations, "; "));

  AdapterEntry entry;
  entry.name = options.rename.value_or(pkg.adapter_name);
  entry.type = pkg.adapter_type;
  entry.config = pkg.adapter_config;
  entry.weights = empty_adapter(model.config(), pkg.adapter_config);
  entry.weights.for_each([&](const Parameter& p) { fill_from(const_cast<Parameter&>(p), pkg.weights); });
  entry.trained = true;
  std::optional<PredictionHead> head;
  if (options.with_head && pkg.head) head = head_from(pkg, entry.name, model.config());
  AdapterEntry& stored = model.register_adapter(std::move(entry));
  if (head) model.set_head(std::move(*head));
  return stored;
}

AdapterEntry& load_adapter(Model& model, const fs::path& source, const LoadOptions& options) {
  const Package pkg = decode_package(package_bytes_from(source));
  return stitch_package(model, pkg, options);
}

fs::path save_backbone(const Model& model, const fs::path& dest, const std::string& head_name) {
  const Package pkg = build_backbone_package(model, head_name);
  const fs::path path = package_path(dest, "backbone", ".ckpt");
  write_file_atomic(path, encode_package(pkg));
  return path;
}

Model load_backbone(const fs::path& source) {
  const Package pkg = decode_checked(read_file(source), PackageKind::backbone);
  BackboneWeights weights = empty_backbone(pkg.model);
  weights.for_each([&](Parameter& p) { fill_from(p, pkg.weights); });
  Model model(pkg.model, std::move(weights));
  if (pkg.head) model.set_head(head_from(pkg, pkg.head_info->name, pkg.model));
  return model;
}

std::vector<std::uint8_t> read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string() + " for reading");
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  if (in.bad()) throw IoError("failed reading " + path.string());
  return bytes;
}

void write_file_atomic(const fs::path& path, std::span<const std::uint8_t> bytes) {
  static std::atomic<unsigned> counter{0};
  std::error_code ec;
  if (path.has_parent_path()) {
    fs::create_directories(path.parent_path(), ec);
    if (ec) throw IoError("cannot create directory " + path.parent_path().string() + ": " + ec.message());
  }
  fs::path tmp = path;
  tmp += ".tmp." + std::to_string(::getpid()) + "." + std::to_string(counter++);
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write " + path.string());
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    out.flush();
    if (!out) {
      fs::remove(tmp, ec);
      throw IoError("failed writing " + path.string());
    }
  }
  fs::rename(tmp, path, ec);
  if (ec) {
    std::error_code ignored;
    fs::remove(tmp, ignored);
    throw IoError("cannot move " + tmp.string() + " to " + path.string() + ": " + ec.message());
  }
}

void write_file_atomic(const fs::path& path, std::string_view text) {
  write_file_atomic(path, std::span<const std::uint8_t>(reinterpret_cast<const std::uint8_t*>(text.data()), text.size()));
}

}  // namespace adaptkit
