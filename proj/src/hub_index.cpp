#include "adaptkit/hub_index.hpp"

#include <algorithm>
#include <cctype>
#include "json.hpp"
#include <set>
#include <tuple>

#include "adaptkit/package.hpp"

namespace adaptkit {
namespace {

using nlohmann::json;

auto key_of(const HubEntry& e) { return std::tie(e.id, e.model_hash, e.config_hash); }

std::string lower(std::string_view s) {
  std::string out(s);
  for (auto& c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return out;
}

std::size_t edit_distance(const std::string& a, const std::string& b) {
  std::vector<std::size_t> prev(b.size() + 1), cur(b.size() + 1);
  for (std::size_t j = 0; j <= b.size(); ++j) prev[j] = j;
  for (std::size_t i = 1; i <= a.size(); ++i) {
    cur[0] = i;
    for (std::size_t j = 1; j <= b.size(); ++j)
      cur[j] = std::min({prev[j] + 1, cur[j - 1] + 1, prev[j - 1] + (a[i - 1] == b[j - 1] ? 0 : 1)});
    std::swap(prev, cur);
  }
  return prev[b.size()];
}

json entry_json(const HubEntry& e) {
  json j;
  j["id"] = e.id;
  j["type"] = std::string(adapter_type_name(e.type));
  j["category"] = e.category;
  j["dataset"] = e.dataset;
  j["model"] = {{"type", e.model_type}, {"hash", e.model_hash}};
  json adapter = {{"config_hash", e.config_hash}};
  if (!e.preset.empty()) adapter["preset"] = e.preset;
  if (e.reduction_factor) adapter["reduction_factor"] = e.reduction_factor;
  j["adapter"] = adapter;
  j["url"] = e.url;
  j["sha256"] = e.sha256;
  if (!e.description.empty()) j["description"] = e.description;
  if (!e.training.empty()) j["training"] = e.training;
  json author = json::object();
  if (!e.author.name.empty()) author["name"] = e.author.name;
  if (!e.author.github.empty()) author["github"] = e.author.github;
  if (!e.author.twitter.empty()) author["twitter"] = e.author.twitter;
  if (!author.empty()) j["author"] = author;
  return j;
}

std::string describe_entry(const HubEntry& e) {
  std::string s = e.id + " (model " + e.model_hash.substr(0, 12) + ", config " + e.config_hash.substr(0, 12);
  if (!e.preset.empty()) s += ", " + e.preset;
  if (e.reduction_factor) s += ":" + std::to_string(e.reduction_factor);
  return s + ")";
}

bool config_matches(const HubEntry& e, const std::string& spec) {
  if (is_sha256_hex(spec)) return e.config_hash == spec;
  const auto colon = spec.find(':');
  const std::string preset = lower(spec.substr(0, colon));
  if (lower(e.preset) != preset) return false;
  if (colon == std::string::npos) return true;
  return std::to_string(e.reduction_factor) == spec.substr(colon + 1);
}

}  // namespace

std::string hub_entry_json(const HubEntry& entry) { return entry_json(entry).dump(); }

std::string_view level1_name(AdapterType type) {
  return type == AdapterType::text_task ? "task" : "language";
}

AdapterType parse_level1(std::string_view name) {
  if (name == "task") return AdapterType::text_task;
  if (name == "language") return AdapterType::text_lang;
  throw ValidationError("level1 must be 'task' or 'language', got '" + std::string(name) + "'");
}

HubIndex build_index(std::vector<HubEntry> entries) {
  std::sort(entries.begin(), entries.end(), [](const HubEntry& a, const HubEntry& b) {
    return std::tie(a.id, a.model_hash, a.config_hash, a.url, a.sha256) <
           std::tie(b.id, b.model_hash, b.config_hash, b.url, b.sha256);
  });
  std::vector<std::string> dups;
  for (std::size_t i = 1; i < entries.size(); ++i)
    if (key_of(entries[i]) == key_of(entries[i - 1])) dups.push_back(describe_entry(entries[i]));
  if (!dups.empty()) throw ValidationError("duplicate hub entries (same id, model hash and config hash): " + join(dups, "; "));
  std::vector<Violation> problems;
  for (const auto& e : entries) {
    const auto report = validate_metadata(metadata_yaml(e));
    for (const auto& v : report.violations) problems.push_back({e.id + "." + v.path, v.message});
  }
  if (!problems.empty()) throw MetadataError(std::move(problems));

  HubIndex index;
  index.entries_ = std::move(entries);
  for (std::size_t i = 0; i < index.entries_.size(); ++i) {
    const auto& e = index.entries_[i];
    index.tree_[std::string(level1_name(e.type))][e.category][e.dataset].push_back(i);
  }
  return index;
}

HubIndex add_entry(const HubIndex& index, HubEntry entry) {
  for (const auto& e : index.entries())
    if (key_of(e) == key_of(entry))
      throw ValidationError("rejected as duplicate: " + describe_entry(entry) + " is already in the index");
  auto entries = index.entries();
  entries.push_back(std::move(entry));
  return build_index(std::move(entries));
}

std::string HubIndex::serialize() const {
  json doc;
  doc["format"] = "adaptkit-hub-index";
  doc["version"] = kIndexFormatVersion;
  json list = json::array();
  for (const auto& e : entries_) list.push_back(entry_json(e));
  doc["entries"] = list;
  json tree = json::object();
  for (const auto& [l1, cats] : tree_)
    for (const auto& [cat, datasets] : cats)
      for (const auto& [ds, positions] : datasets) {
        json ids = json::array();
        for (auto i : positions) ids.push_back(entries_[i].id);
        tree[l1][cat][ds] = ids;
      }
  doc["tree"] = tree;
  return doc.dump(2) + "\n";
}

HubIndex parse_index(std::string_view text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::exception& e) {
    throw ValidationError(std::string("index is not valid JSON: ") + e.what());
  }
  if (!doc.is_object() || doc.value("format", "") != "adaptkit-hub-index")
    throw ValidationError("not a hub index document");
  if (doc.value("version", 0) != kIndexFormatVersion)
    throw CompatibilityError("unsupported hub index version " + doc.value("version", json()).dump());
  if (!doc.contains("entries") || !doc["entries"].is_array()) throw ValidationError("hub index has no entries array");
  std::vector<HubEntry> entries;
  std::vector<Violation> problems;
  for (std::size_t i = 0; i < doc["entries"].size(); ++i) {
    // Entries go through the same schema as metadata files (JSON is YAML).
    const auto report = validate_metadata(doc["entries"][i].dump());
    for (const auto& v : report.violations) problems.push_back({"entries[" + std::to_string(i) + "]." + v.path, v.message});
    if (report.entry) entries.push_back(*report.entry);
  }
  if (!problems.empty()) throw MetadataError(std::move(problems));
  return build_index(std::move(entries));
}

HubIndex load_index(const std::filesystem::path& file) {
  const auto bytes = read_file(file);
  return parse_index(std::string_view(reinterpret_cast<const char*>(bytes.data()), bytes.size()));
}

std::vector<std::string> explore(const HubIndex& index, const std::optional<std::string>& level1,
                                 const std::optional<std::string>& level2) {
  if (level2 && !level1) throw ValidationError("--level2 requires --level1");
  std::vector<std::string> out;
  const auto& tree = index.tree();
  if (!level1) {
    for (const auto& [l1, cats] : tree) {
      std::size_t n = 0;
      for (const auto& [c, ds] : cats)
        for (const auto& [d, pos] : ds) n += pos.size();
      out.push_back(l1 + " (" + std::to_string(n) + ")");
    }
    return out;
  }
  parse_level1(*level1);
  auto l1 = tree.find(*level1);
  if (l1 == tree.end()) return out;
  if (!level2) {
    for (const auto& [cat, datasets] : l1->second) {
      out.push_back(cat);
      for (const auto& [ds, pos] : datasets) out.push_back("  " + ds + " (" + std::to_string(pos.size()) + ")");
    }
    return out;
  }
  auto l2 = l1->second.find(*level2);
  if (l2 == l1->second.end()) {
    std::vector<std::string> cats;
    for (const auto& [c, ds] : l1->second) cats.push_back(c);
    throw NotFoundError("no category '" + *level2 + "' under " + *level1, cats);
  }
  for (const auto& [ds, positions] : l2->second) {
    out.push_back(ds);
    for (auto i : positions) out.push_back("  " + describe_entry(index.entries()[i]));
  }
  return out;
}

const HubEntry& resolve(const HubIndex& index, const ResolveQuery& q) {
  if (q.fragment.empty()) throw ValidationError("resolve needs a nonempty name fragment");
  const std::string frag = lower(q.fragment);
  std::vector<const HubEntry*> candidates;
  std::vector<const HubEntry*> name_only;  // matched the name but filtered out
  for (const auto& e : index.entries()) {
    if (lower(e.id).find(frag) == std::string::npos) continue;
    const bool ok = e.model_hash == q.model_hash && (!q.config || config_matches(e, *q.config));
    (ok ? candidates : name_only).push_back(&e);
  }
  if (candidates.size() > 1) {
    std::vector<const HubEntry*> exact;
    for (auto* e : candidates)
      if (lower(e->id) == frag) exact.push_back(e);
    if (!exact.empty()) candidates = exact;
  }
  if (candidates.size() == 1) return *candidates.front();

  if (candidates.empty()) {
    std::vector<std::string> nearest;
    for (auto* e : name_only) nearest.push_back(describe_entry(*e) + " [incompatible]");
    std::vector<std::pair<std::size_t, std::string>> ranked;
    std::set<std::string> seen;
    for (const auto& e : index.entries())
      if (e.model_hash == q.model_hash && seen.insert(e.id).second)
        ranked.emplace_back(edit_distance(frag, lower(e.id)), e.id);
    std::sort(ranked.begin(), ranked.end());
    for (std::size_t i = 0; i < ranked.size() && i < 3; ++i) nearest.push_back(ranked[i].second);
    std::string msg = "no adapter matching '" + q.fragment + "' for model " + q.model_hash;
    if (q.config) msg += " with config " + *q.config;
    if (!nearest.empty()) msg += "; nearest: " + join(nearest, ", ");
    throw NotFoundError(msg, nearest);
  }

  std::vector<std::string> names;
  for (auto* e : candidates) names.push_back(describe_entry(*e));
  throw AmbiguityError("'" + q.fragment + "' is ambiguous; candidates: " + join(names, ", "), names);
}

}  // namespace adaptkit
