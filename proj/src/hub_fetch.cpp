#include "adaptkit/hub_fetch.hpp"

#include <unistd.h>

#include <cstdlib>

#include "adaptkit/archive.hpp"
#include "adaptkit/zip.hpp"
#include "httplib.h"

namespace adaptkit {
namespace fs = std::filesystem;

fs::path default_cache_dir() {
  if (const char* dir = std::getenv("ADAPTKIT_CACHE"); dir && *dir) return dir;
  if (const char* xdg = std::getenv("XDG_CACHE_HOME"); xdg && *xdg) return fs::path(xdg) / "adaptkit";
  if (const char* home = std::getenv("HOME"); home && *home) return fs::path(home) / ".cache" / "adaptkit";
  return fs::temp_directory_path() / "adaptkit-cache";
}

std::vector<std::uint8_t> download(const std::string& url) {
  if (url.starts_with("file://")) {
    const fs::path path = url.substr(7);
    try {
      return read_file(path);
    } catch (const IoError& e) {
      throw TransportError(std::string("cannot fetch ") + url + ": " + e.what());
    }
  }
  const bool https = url.starts_with("https://");
  if (!https && !url.starts_with("http://")) throw ValidationError("unsupported URL scheme: " + url);
  const std::size_t host_start = https ? 8 : 7;
  const std::size_t slash = url.find('/', host_start);
  const std::string origin = url.substr(0, slash);
  const std::string path = slash == std::string::npos ? "/" : url.substr(slash);

  httplib::Client client(origin);
  client.set_follow_location(true);
  client.set_connection_timeout(10);
  client.set_read_timeout(60);
  auto res = client.Get(path);
  if (!res) throw TransportError("cannot fetch " + url + ": " + httplib::to_string(res.error()));
  if (res->status != 200) throw TransportError("cannot fetch " + url + ": HTTP status " + std::to_string(res->status));
  return {res->body.begin(), res->body.end()};
}

Fetcher::Fetcher(fs::path cache_dir) : cache_dir_(std::move(cache_dir)) {}

FetchResult Fetcher::fetch(const HubEntry& entry) {
  if (!is_sha256_hex(entry.sha256)) throw ValidationError("entry '" + entry.id + "' has no valid sha256");
  FetchResult result;
  result.slot = cache_dir_ / "sha256" / entry.sha256;
  result.package = result.slot / kArchivePackageEntry;
  if (fs::is_regular_file(result.package)) {
    result.from_cache = true;
    return result;
  }

  ++transfers_;
  const auto bytes = download(entry.url);
  const std::string got = sha256_hex(bytes);
  if (got != entry.sha256)
    throw IntegrityError("archive for '" + entry.id + "' has sha256 " + got + ", index expects " + entry.sha256 +
                         "; discarded");
  const ArchiveReport report = verify_archive(bytes);
  if (!report.ok()) throw IntegrityError("archive for '" + entry.id + "' failed verification: " + join(report.failures(), "; "));

  static std::atomic<unsigned> counter{0};
  std::error_code ec;
  fs::create_directories(result.slot.parent_path(), ec);
  if (ec) throw IoError("cannot create cache directory " + result.slot.parent_path().string() + ": " + ec.message());
  const fs::path tmp = result.slot.parent_path() /
                       (".tmp-" + entry.sha256.substr(0, 16) + "-" + std::to_string(::getpid()) + "-" +
                        std::to_string(counter++));
  fs::create_directories(tmp, ec);
  if (ec) throw IoError("cannot create " + tmp.string() + ": " + ec.message());
  try {
    for (const auto& e : zip_read(bytes)) {
      if (e.name.find('/') != std::string::npos || e.name.find("..") != std::string::npos)
        throw IntegrityError("archive entry with a path component: " + e.name);
      write_file_atomic(tmp / e.name, e.data);
    }
    write_file_atomic(tmp / "archive.zip", bytes);
  } catch (...) {
    fs::remove_all(tmp, ec);
    throw;
  }
  fs::rename(tmp, result.slot, ec);
  if (ec) {
    std::error_code ignored;
    fs::remove_all(tmp, ignored);
    // A concurrent fetch of the same digest finished first.
    if (!fs::is_regular_file(result.package))
      throw IoError("cannot populate cache slot " + result.slot.string() + ": " + ec.message());
  }
  return result;
}

}  // namespace adaptkit
