#include "adaptkit/archive.hpp"

#include <yaml-cpp/yaml.h>

#include "adaptkit/zip.hpp"

namespace adaptkit {
namespace {

std::vector<std::uint8_t> bytes_of(const std::string& s) { return {s.begin(), s.end()}; }

const ZipEntry* find_entry(const std::vector<ZipEntry>& entries, const char* name) {
  for (const auto& e : entries)
    if (e.name == name) return &e;
  return nullptr;
}

std::string text_of(const ZipEntry& e) { return std::string(e.data.begin(), e.data.end()); }

}  // namespace

HubEntry metadata_stub(const Package& pkg, const std::string& category, const std::string& dataset) {
  HubEntry e;
  e.id = pkg.adapter_name;
  e.type = pkg.adapter_type;
  e.category = category;
  e.dataset = dataset.empty() ? pkg.adapter_name : dataset;
  e.model_type = pkg.model.model_type;
  e.model_hash = pkg.model.hash();
  e.config_hash = pkg.adapter_config.hash();
  e.preset = pkg.preset_label();
  e.reduction_factor = pkg.adapter_config.reduction_factor;
  return e;
}

std::vector<std::uint8_t> pack_archive(std::span<const std::uint8_t> package_bytes, const HubEntry& stub) {
  const Package pkg = decode_package(package_bytes);
  if (pkg.kind != PackageKind::adapter) throw ValidationError("only adapter packages can be archived");
  std::vector<ZipEntry> entries;
  entries.push_back({kArchivePackageEntry, {package_bytes.begin(), package_bytes.end()}});
  entries.push_back({kArchiveConfigEntry, bytes_of(pkg.adapter_config.descriptor_text())});
  entries.push_back({kArchiveMetadataEntry, bytes_of(metadata_yaml(stub))});
  return zip_write(entries);
}

bool ArchiveReport::ok() const {
  if (checks.empty()) return false;
  for (const auto& c : checks)
    if (!c.passed) return false;
  return true;
}

std::vector<std::string> ArchiveReport::failures() const {
  std::vector<std::string> out;
  for (const auto& c : checks)
    if (!c.passed) out.push_back(c.name + ": " + c.detail);
  return out;
}

ArchiveReport verify_archive(std::span<const std::uint8_t> archive) {
  ArchiveReport r;
  auto check = [&](std::string name, bool passed, std::string detail = {}) {
    r.checks.push_back({std::move(name), passed, std::move(detail)});
    return passed;
  };
  r.archive_sha256 = sha256_hex(archive);

  std::vector<ZipEntry> entries;
  try {
    entries = zip_read(archive);
    check("archive", true);
  } catch (const Error& e) {
    check("archive", false, e.what());
    return r;
  }

  const ZipEntry* pkg_entry = find_entry(entries, kArchivePackageEntry);
  const ZipEntry* cfg_entry = find_entry(entries, kArchiveConfigEntry);
  const ZipEntry* meta_entry = find_entry(entries, kArchiveMetadataEntry);
  check("package entry", pkg_entry != nullptr, pkg_entry ? "" : std::string("missing ") + kArchivePackageEntry);
  check("configuration entry", cfg_entry != nullptr,
        cfg_entry ? "" : std::string("missing configuration (") + kArchiveConfigEntry + ")");
  check("metadata entry", meta_entry != nullptr,
        meta_entry ? "" : std::string("missing metadata (") + kArchiveMetadataEntry + ")");

  if (pkg_entry) {
    try {
      r.package = decode_package(pkg_entry->data);
      check("package digests", true, "sha256 " + r.package->sha256);
    } catch (const Error& e) {
      check("package digests", false, e.what());
    }
  }
  if (r.package && r.package->kind != PackageKind::adapter) {
    check("package kind", false, "archive holds a backbone checkpoint");
    r.package.reset();
  }

  std::optional<AdapterConfig> descriptor;
  if (cfg_entry) {
    try {
      descriptor = AdapterConfig::parse(text_of(*cfg_entry));
      check("configuration descriptor", true, descriptor->hash());
    } catch (const Error& e) {
      check("configuration descriptor", false, std::string("malformed descriptor: ") + e.what());
    }
  }

  if (r.package) {
    const Package& pkg = *r.package;
    const auto violations = check_manifest(pkg);
    check("manifest", violations.empty(), join(violations, "; "));
    r.param_count = count_adapter_params(pkg.model, pkg.adapter_config);
    r.blob_bytes = pkg.weights.blob.size();
    check("size law", r.blob_bytes == 4 * r.param_count,
          std::to_string(r.blob_bytes) + " bytes for " + std::to_string(r.param_count) + " parameters");
    if (descriptor)
      check("descriptor matches package", *descriptor == pkg.adapter_config,
            *descriptor == pkg.adapter_config
                ? ""
                : "descriptor " + descriptor->hash() + " vs package " + pkg.adapter_config.hash());
  }

  if (meta_entry) {
    try {
      const YAML::Node root = YAML::Load(text_of(*meta_entry));
      if (!root.IsMap()) throw ValidationError("metadata stub is not a mapping");
      std::vector<std::string> problems;
      if (r.package) {
        const auto expect = [&](const YAML::Node& n, const std::string& want, const std::string& path) {
          if (n && n.IsScalar() && !n.Scalar().empty() && n.Scalar() != want)
            problems.push_back(path + " is " + n.Scalar() + ", package has " + want);
        };
        const YAML::Node model = root["model"];
        const YAML::Node adapter = root["adapter"];
        if (model && model.IsMap()) expect(model["hash"], r.package->model.hash(), "model.hash");
        if (adapter && adapter.IsMap())
          expect(adapter["config_hash"], r.package->adapter_config.hash(), "adapter.config_hash");
      }
      check("metadata stub", problems.empty(), join(problems, "; "));
    } catch (const YAML::Exception& e) {
      check("metadata stub", false, std::string("not valid YAML: ") + e.what());
    } catch (const Error& e) {
      check("metadata stub", false, e.what());
    }
  }
  return r;
}

}  // namespace adaptkit
