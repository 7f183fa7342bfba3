#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace adaptkit {

struct ZipEntry {
  std::string name;
  std::vector<std::uint8_t> data;
};

// Stored (uncompressed) archive with fixed timestamps, so identical entries
// always produce identical bytes.
std::vector<std::uint8_t> zip_write(const std::vector<ZipEntry>& entries);

// Reads stored and deflated entries; verifies CRC-32. Throws ValidationError
// on malformed archives and IntegrityError on CRC mismatches.
std::vector<ZipEntry> zip_read(std::span<const std::uint8_t> archive);

bool looks_like_zip(std::span<const std::uint8_t> bytes);

}  // namespace adaptkit
