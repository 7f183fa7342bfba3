#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "adaptkit/hub_metadata.hpp"
#include "adaptkit/package.hpp"

namespace adaptkit {

inline constexpr const char* kArchivePackageEntry = "adapter.pkg";
inline constexpr const char* kArchiveConfigEntry = "adapter_config.txt";
inline constexpr const char* kArchiveMetadataEntry = "metadata.yaml";

// Hub entry prefilled from a package. url and sha256 stay empty until the
// archive is published.
HubEntry metadata_stub(const Package& pkg, const std::string& category = {},
                       const std::string& dataset = {});

// Zip with the package, its configuration descriptor and a metadata stub.
// Throws if the package does not decode.
std::vector<std::uint8_t> pack_archive(std::span<const std::uint8_t> package_bytes,
                                       const HubEntry& stub);

struct ArchiveCheck {
  std::string name;
  bool passed = false;
  std::string detail;
};

struct ArchiveReport {
  std::vector<ArchiveCheck> checks;
  std::optional<Package> package;
  std::size_t param_count = 0;  // from the embedded configuration
  std::size_t blob_bytes = 0;
  std::string archive_sha256;

  bool ok() const;
  std::vector<std::string> failures() const;
};

// Recomputes every digest and checks manifest, descriptor and stub against
// each other. Never throws for bad archives; failures are in the report.
ArchiveReport verify_archive(std::span<const std::uint8_t> archive);

}  // namespace adaptkit
