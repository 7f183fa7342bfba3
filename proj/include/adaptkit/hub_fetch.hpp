#pragma once

#include <atomic>
#include <filesystem>
#include <string>

#include "adaptkit/hub_metadata.hpp"

namespace adaptkit {

// $ADAPTKIT_CACHE, else $XDG_CACHE_HOME/adaptkit, else $HOME/.cache/adaptkit.
std::filesystem::path default_cache_dir();

struct FetchResult {
  std::filesystem::path slot;     // <cache>/sha256/<hex>
  std::filesystem::path package;  // slot / adapter.pkg
  bool from_cache = false;
};

// Content-addressed archive cache. Slots are keyed by the archive sha256 and
// appear atomically (unpacked into a temporary directory, then renamed).
class Fetcher {
 public:
  explicit Fetcher(std::filesystem::path cache_dir = default_cache_dir());

  // Downloads (http, https) or copies (file) the archive, verifies its sha256
  // against the entry, verifies the archive contents, and unpacks it.
  // TransportError on network or source failures; IntegrityError on digest
  // mismatches, in which case nothing is written.
  FetchResult fetch(const HubEntry& entry);

  const std::filesystem::path& cache_dir() const { return cache_dir_; }
  // Number of downloads or copies performed by this fetcher.
  std::size_t transfers() const { return transfers_; }

 private:
  std::filesystem::path cache_dir_;
  std::atomic<std::size_t> transfers_{0};
};

// Raw bytes behind a URL (http, https, file). Throws TransportError.
std::vector<std::uint8_t> download(const std::string& url);

}  // namespace adaptkit
