#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "adaptkit/errors.hpp"
#include "adaptkit/model.hpp"

namespace adaptkit {

struct AuthorInfo {
  std::string name;
  std::string github;
  std::string twitter;
  bool operator==(const AuthorInfo&) const = default;
};

// One published adapter as described by its metadata file.
struct HubEntry {
  std::string id;
  AdapterType type = AdapterType::text_task;
  std::string category;  // e.g. "sentiment", or a language code
  std::string dataset;   // e.g. "sst-2", "wikipedia-sw"
  std::string model_type;
  std::string model_hash;
  std::string config_hash;
  std::string preset;               // preset name or "custom"; optional
  std::size_t reduction_factor = 0; // 0 when not given
  std::string url;
  std::string sha256;
  std::string description;
  AuthorInfo author;
  std::string training;

  bool operator==(const HubEntry&) const = default;
};

struct Violation {
  std::string path;  // dotted field path, e.g. "model.hash"
  std::string message;
};

// Schema violations, all of them, not just the first.
class MetadataError : public ValidationError {
 public:
  explicit MetadataError(std::vector<Violation> violations);
  const std::vector<Violation>& violations() const { return violations_; }

 private:
  std::vector<Violation> violations_;
};

struct MetadataReport {
  std::optional<HubEntry> entry;
  std::vector<Violation> violations;
  bool ok() const { return violations.empty(); }
};

MetadataReport validate_metadata(std::string_view yaml_text);
// Throws MetadataError (or IoError when unreadable).
HubEntry ingest_metadata(const std::filesystem::path& file);
HubEntry parse_metadata(std::string_view yaml_text);

// Metadata document for `entry`. Empty optional fields are omitted.
std::string metadata_yaml(const HubEntry& entry);

bool is_well_formed_url(std::string_view url);
bool is_valid_adapter_id(std::string_view id);

}  // namespace adaptkit
