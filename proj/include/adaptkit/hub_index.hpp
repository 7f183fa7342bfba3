#pragma once

#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "adaptkit/hub_metadata.hpp"

namespace adaptkit {

inline constexpr int kIndexFormatVersion = 1;

// level1 ("task" | "language") → level2 category → level3 dataset → entry positions.
using ExploreTree =
    std::map<std::string, std::map<std::string, std::map<std::string, std::vector<std::size_t>>>>;

std::string_view level1_name(AdapterType type);
AdapterType parse_level1(std::string_view name);  // "task" | "language"

// Validated entries sorted by (id, model_hash, config_hash), and the explore
// tree over them. Immutable once built.
class HubIndex {
 public:
  HubIndex() = default;

  const std::vector<HubEntry>& entries() const { return entries_; }
  const ExploreTree& tree() const { return tree_; }

  // Deterministic JSON document; byte-identical for equal entry sets.
  std::string serialize() const;

 private:
  friend HubIndex build_index(std::vector<HubEntry> entries);
  std::vector<HubEntry> entries_;
  ExploreTree tree_;
};

// One entry as a JSON object (same layout as in the index file).
std::string hub_entry_json(const HubEntry& entry);

// Rejects duplicate (id, model_hash, config_hash) keys, listing every one.
HubIndex build_index(std::vector<HubEntry> entries);
// Regenerates the index with `entry` added; rejects duplicates.
HubIndex add_entry(const HubIndex& index, HubEntry entry);
HubIndex parse_index(std::string_view json_text);
HubIndex load_index(const std::filesystem::path& file);

// One line per tree node down to the requested depth, indented two spaces per level.
std::vector<std::string> explore(const HubIndex& index, const std::optional<std::string>& level1 = {},
                                 const std::optional<std::string>& level2 = {});

struct ResolveQuery {
  std::string fragment;    // case-insensitive substring of adapter_id
  std::string model_hash;  // live model; only compatible entries qualify
  // Optional: a 64-hex config hash, a preset name, or "preset:reduction_factor".
  std::optional<std::string> config;
};

// Exactly one candidate, or NotFoundError (nearest ids) / AmbiguityError
// (every candidate). An exact id match wins over longer ids containing it.
const HubEntry& resolve(const HubIndex& index, const ResolveQuery& query);

}  // namespace adaptkit
