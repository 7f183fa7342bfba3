#include "adaptkit/hub_metadata.hpp"

#include <yaml-cpp/yaml.h>

#include <algorithm>
#include <cctype>
#include <set>

#include "adaptkit/package.hpp"

namespace adaptkit {
namespace {

std::string describe(const std::vector<Violation>& vs) {
  std::string s = "metadata has " + std::to_string(vs.size()) + " violation" + (vs.size() == 1 ? "" : "s");
  for (const auto& v : vs) s += "\n  " + v.path + ": " + v.message;
  return s;
}

class Checker {
 public:
  std::vector<Violation> out;

  void fail(std::string path, std::string message) { out.push_back({std::move(path), std::move(message)}); }

  // Scalar string at `node[key]`; records a violation when required and absent.
  std::optional<std::string> scalar(const YAML::Node& node, const std::string& key, const std::string& path,
                                    bool required) {
    const YAML::Node v = node[key];
    if (!v || v.IsNull()) {
      if (required) fail(path, "required field is missing");
      return std::nullopt;
    }
    if (!v.IsScalar()) {
      fail(path, "must be a scalar");
      return std::nullopt;
    }
    std::string s = v.Scalar();
    if (required && s.empty()) {
      fail(path, "must be nonempty");
      return std::nullopt;
    }
    return s;
  }

  void known_keys(const YAML::Node& node, const std::set<std::string>& allowed, const std::string& prefix) {
    for (const auto& kv : node) {
      const std::string key = kv.first.IsScalar() ? kv.first.Scalar() : std::string("?");
      if (!allowed.count(key)) fail(prefix + key, "unknown field");
    }
  }

  // Absent sections report their required fields by path.
  std::optional<YAML::Node> mapping(const YAML::Node& node, const std::string& key,
                                    const std::vector<std::string>& required_fields) {
    const YAML::Node v = node[key];
    if (!v || v.IsNull()) {
      for (const auto& f : required_fields) fail(key + "." + f, "required field is missing");
      return std::nullopt;
    }
    if (!v.IsMap()) {
      fail(key, "must be a mapping");
      return std::nullopt;
    }
    return v;
  }

  void hash(const std::optional<std::string>& v, const std::string& path) {
    if (v && !is_sha256_hex(*v)) fail(path, "must be 64 lowercase hex digits");
  }
};

}  // namespace

MetadataError::MetadataError(std::vector<Violation> violations)
    : ValidationError(describe(violations)), violations_(std::move(violations)) {}

bool is_valid_adapter_id(std::string_view id) {
  if (id.empty() || id.size() > 128) return false;
  for (char c : id)
    if (!(std::isalnum(static_cast<unsigned char>(c)) || c == '-' || c == '_' || c == '.' || c == '@' || c == '/'))
      return false;
  return true;
}

bool is_well_formed_url(std::string_view url) {
  for (std::string_view scheme : {"http://", "https://"}) {
    if (url.starts_with(scheme)) {
      const auto rest = url.substr(scheme.size());
      const auto host = rest.substr(0, rest.find('/'));
      if (host.empty() || host.find_first_of(" \t") != std::string_view::npos) return false;
      return rest.find_first_of(" \t\n") == std::string_view::npos;
    }
  }
  if (url.starts_with("file://")) {
    const auto path = url.substr(7);
    return path.size() > 1 && path.front() == '/' && path.find('\n') == std::string_view::npos;
  }
  return false;
}

MetadataReport validate_metadata(std::string_view yaml_text) {
  MetadataReport report;
  YAML::Node root;
  try {
    root = YAML::Load(std::string(yaml_text));
  } catch (const YAML::Exception& e) {
    report.violations.push_back({"(document)", std::string("not valid YAML: ") + e.what()});
    return report;
  }
  if (!root.IsMap()) {
    report.violations.push_back({"(document)", "must be a mapping"});
    return report;
  }

  Checker c;
  c.known_keys(root, {"id", "type", "category", "dataset", "description", "model", "adapter", "url", "sha256",
                      "author", "training"},
               "");
  HubEntry e;
  if (auto v = c.scalar(root, "id", "id", true)) {
    if (!is_valid_adapter_id(*v)) c.fail("id", "may only contain letters, digits, '-', '_', '.', '@', '/'");
    e.id = *v;
  }
  if (auto v = c.scalar(root, "type", "type", true)) {
    if (*v == "text_task" || *v == "text_lang")
      e.type = parse_adapter_type(*v);
    else
      c.fail("type", "must be text_task or text_lang, got '" + *v + "'");
  }
  if (auto v = c.scalar(root, "category", "category", true)) e.category = *v;
  if (auto v = c.scalar(root, "dataset", "dataset", true)) e.dataset = *v;
  if (auto v = c.scalar(root, "description", "description", false)) e.description = *v;
  if (auto v = c.scalar(root, "training", "training", false)) e.training = *v;

  if (auto model = c.mapping(root, "model", {"type", "hash"})) {
    c.known_keys(*model, {"type", "hash"}, "model.");
    if (auto v = c.scalar(*model, "type", "model.type", true)) e.model_type = *v;
    auto h = c.scalar(*model, "hash", "model.hash", true);
    c.hash(h, "model.hash");
    if (h) e.model_hash = *h;
  }

  if (auto adapter_node = c.mapping(root, "adapter", {"config_hash"})) {
    const YAML::Node& adapter = *adapter_node;
    c.known_keys(adapter, {"config_hash", "preset", "reduction_factor"}, "adapter.");
    auto h = c.scalar(adapter, "config_hash", "adapter.config_hash", true);
    c.hash(h, "adapter.config_hash");
    if (h) e.config_hash = *h;
    if (auto v = c.scalar(adapter, "preset", "adapter.preset", false)) {
      const auto names = preset_names();
      if (*v != "custom" && std::find(names.begin(), names.end(), *v) == names.end())
        c.fail("adapter.preset", "must be one of " + join(names, ", ") + ", custom");
      e.preset = *v;
    }
    if (auto v = c.scalar(adapter, "reduction_factor", "adapter.reduction_factor", false)) {
      std::size_t pos = 0;
      long long n = 0;
      try {
        n = std::stoll(*v, &pos);
      } catch (const std::exception&) {
        pos = 0;
      }
      if (pos != v->size() || n <= 0)
        c.fail("adapter.reduction_factor", "must be a positive integer");
      else
        e.reduction_factor = static_cast<std::size_t>(n);
    }
  }

  if (auto v = c.scalar(root, "url", "url", true)) {
    if (!is_well_formed_url(*v)) c.fail("url", "must be an http://, https:// or absolute file:// URL");
    e.url = *v;
  }
  {
    auto v = c.scalar(root, "sha256", "sha256", true);
    c.hash(v, "sha256");
    if (v) e.sha256 = *v;
  }
  if (auto author_node = c.mapping(root, "author", {})) {
    const YAML::Node& author = *author_node;
    c.known_keys(author, {"name", "github", "twitter"}, "author.");
    if (auto v = c.scalar(author, "name", "author.name", false)) e.author.name = *v;
    if (auto v = c.scalar(author, "github", "author.github", false)) e.author.github = *v;
    if (auto v = c.scalar(author, "twitter", "author.twitter", false)) e.author.twitter = *v;
  }

  report.violations = std::move(c.out);
  if (report.violations.empty()) report.entry = std::move(e);
  return report;
}

HubEntry parse_metadata(std::string_view yaml_text) {
  auto report = validate_metadata(yaml_text);
  if (!report.ok()) throw MetadataError(std::move(report.violations));
  return std::move(*report.entry);
}

HubEntry ingest_metadata(const std::filesystem::path& file) {
  const auto bytes = read_file(file);
  return parse_metadata(std::string_view(reinterpret_cast<const char*>(bytes.data()), bytes.size()));
}

std::string metadata_yaml(const HubEntry& e) {
  YAML::Emitter out;
  out << YAML::BeginMap;
  out << YAML::Key << "id" << YAML::Value << e.id;
  out << YAML::Key << "type" << YAML::Value << std::string(adapter_type_name(e.type));
  out << YAML::Key << "category" << YAML::Value << e.category;
  out << YAML::Key << "dataset" << YAML::Value << e.dataset;
  if (!e.description.empty()) out << YAML::Key << "description" << YAML::Value << e.description;
  out << YAML::Key << "model" << YAML::Value << YAML::BeginMap;
  out << YAML::Key << "type" << YAML::Value << e.model_type;
  out << YAML::Key << "hash" << YAML::Value << e.model_hash;
  out << YAML::EndMap;
  out << YAML::Key << "adapter" << YAML::Value << YAML::BeginMap;
  out << YAML::Key << "config_hash" << YAML::Value << e.config_hash;
  if (!e.preset.empty()) out << YAML::Key << "preset" << YAML::Value << e.preset;
  if (e.reduction_factor) out << YAML::Key << "reduction_factor" << YAML::Value << e.reduction_factor;
  out << YAML::EndMap;
  out << YAML::Key << "url" << YAML::Value << e.url;
  out << YAML::Key << "sha256" << YAML::Value << e.sha256;
  if (!e.author.name.empty() || !e.author.github.empty() || !e.author.twitter.empty()) {
    out << YAML::Key << "author" << YAML::Value << YAML::BeginMap;
    if (!e.author.name.empty()) out << YAML::Key << "name" << YAML::Value << e.author.name;
    if (!e.author.github.empty()) out << YAML::Key << "github" << YAML::Value << e.author.github;
    if (!e.author.twitter.empty()) out << YAML::Key << "twitter" << YAML::Value << e.author.twitter;
    out << YAML::EndMap;
  }
  if (!e.training.empty()) out << YAML::Key << "training" << YAML::Value << e.training;
  out << YAML::EndMap;
  return std::string(out.c_str()) + "\n";
}

}  // namespace adaptkit
