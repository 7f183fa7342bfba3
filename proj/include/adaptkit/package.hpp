#pragma once

// Portable adapter packages and backbone checkpoints.
//
// Container layout (all integers little-endian), documented in docs/FORMATS.md:
//
//   "ADPK" | u32 format_version | u32 header_len | header text
//   | tensor section (weights) | u8 has_head | [tensor section (head)]
//   | sha256 of every preceding byte (32 raw bytes)
//
// tensor section: u32 count, then per tensor
//   u16 name_len | name | u8 ownership | u8 rank | u32 dims[rank]
//   | u64 offset | u64 nbytes | sha256 of the tensor bytes (32 raw bytes)
// followed by u64 blob_len | blob (binary32, row-major, manifest order).

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "adaptkit/digest.hpp"
#include "adaptkit/model.hpp"

namespace adaptkit {

inline constexpr std::uint32_t kPackageFormatVersion = 1;
inline constexpr char kPackageMagic[4] = {'A', 'D', 'P', 'K'};

struct TensorRecord {
  std::string name;
  Ownership owner = Ownership::adapter;
  Shape shape;
  std::uint64_t offset = 0;
  std::uint64_t nbytes = 0;
  Sha256 digest{};
};

struct TensorSection {
  std::vector<TensorRecord> manifest;
  std::vector<std::uint8_t> blob;

  // Decoded values (binary32 widened to f64) of one manifest entry.
  Tensor tensor(const TensorRecord& rec) const;
};

// Appends parameters to a section, encoding each as binary32.
void add_tensor(TensorSection& section, const Parameter& p);

struct HeadInfo {
  std::string name;
  HeadKind kind = HeadKind::classification;
  std::size_t outputs = 0;
};

enum class PackageKind { adapter, backbone };

struct Package {
  std::uint32_t format_version = kPackageFormatVersion;
  PackageKind kind = PackageKind::adapter;
  ModelConfig model;
  // Adapter packages only.
  std::string adapter_name;
  AdapterType adapter_type = AdapterType::text_task;
  AdapterConfig adapter_config;
  TensorSection weights;
  std::optional<HeadInfo> head_info;
  std::optional<TensorSection> head;
  std::string sha256;  // trailing digest of the encoded container, as hex

  // Header fields in canonical order.
  std::vector<std::pair<std::string, std::string>> header() const;
  std::string preset_label() const;
};

std::vector<std::uint8_t> encode_package(const Package& pkg);

// Parses and checks the trailing sha256 and every per-tensor digest.
// Throws IntegrityError on digest failures, ValidationError on malformed input.
Package decode_package(std::span<const std::uint8_t> bytes);

// Every manifest entry matches the names and shapes implied by the model and
// adapter configuration (adapter packages) or the model alone (backbones).
// Returns violations; empty when consistent.
std::vector<std::string> check_manifest(const Package& pkg);

Package build_adapter_package(const Model& model, const std::string& adapter_name,
                              bool include_head = true);
// Without a live backbone (e.g. for accounting on full-size configurations).
Package build_adapter_package(const ModelConfig& model, const AdapterEntry& adapter,
                              const PredictionHead* head = nullptr);
Package build_backbone_package(const Model& model, const std::string& head_name = {});

// Writes `<dest>/<name>.adpk` when dest is a directory (or ends in '/'),
// otherwise writes dest itself. Atomic (temp file + rename). Returns the path.
std::filesystem::path save_adapter(const Model& model, const std::string& adapter_name,
                                   const std::filesystem::path& dest, bool include_head = true);

struct LoadOptions {
  // Requested configuration; must match the package's exactly when given.
  std::optional<AdapterConfig> expected_config;
  std::optional<std::string> rename;
  bool with_head = true;
};

// Stitches a package into `model`. `source` may be a package file, a
// directory holding one, or a zip archive produced by pack_archive.
// Rejects mismatched model hashes (both hashes cited), digest failures and
// configuration conflicts.
AdapterEntry& load_adapter(Model& model, const std::filesystem::path& source,
                           const LoadOptions& options = {});
AdapterEntry& stitch_package(Model& model, const Package& pkg, const LoadOptions& options = {});

std::filesystem::path save_backbone(const Model& model, const std::filesystem::path& dest,
                                    const std::string& head_name = {});
Model load_backbone(const std::filesystem::path& source);

// File helpers shared with the hub layer.
std::vector<std::uint8_t> read_file(const std::filesystem::path& path);
void write_file_atomic(const std::filesystem::path& path, std::span<const std::uint8_t> bytes);
void write_file_atomic(const std::filesystem::path& path, std::string_view text);

}  // namespace adaptkit
