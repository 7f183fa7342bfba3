#include "adaptkit/zip.hpp"

#include <zlib.h>

#include "adaptkit/errors.hpp"

namespace adaptkit {
namespace {

constexpr std::uint32_t kLocalSig = 0x04034b50;
constexpr std::uint32_t kCentralSig = 0x02014b50;
constexpr std::uint32_t kEndSig = 0x06054b50;
constexpr std::uint16_t kDosDate1980 = (0 << 9) | (1 << 5) | 1;

void put16(std::vector<std::uint8_t>& out, std::uint16_t v) {
  out.push_back(v & 0xFF);
  out.push_back(v >> 8);
}
void put32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back((v >> (8 * i)) & 0xFF);
}

std::uint32_t crc(std::span<const std::uint8_t> d) {
  return static_cast<std::uint32_t>(::crc32(0L, d.data(), static_cast<uInt>(d.size())));
}

struct Reader {
  std::span<const std::uint8_t> b;
  std::uint16_t u16(std::size_t at) const {
    need(at, 2);
    return static_cast<std::uint16_t>(b[at] | (b[at + 1] << 8));
  }
  std::uint32_t u32(std::size_t at) const {
    need(at, 4);
    return static_cast<std::uint32_t>(b[at]) | (static_cast<std::uint32_t>(b[at + 1]) << 8) |
           (static_cast<std::uint32_t>(b[at + 2]) << 16) | (static_cast<std::uint32_t>(b[at + 3]) << 24);
  }
  void need(std::size_t at, std::size_t n) const {
    if (at + n > b.size() || at + n < at) throw ValidationError("zip: truncated archive");
  }
};

std::vector<std::uint8_t> inflate_raw(std::span<const std::uint8_t> in, std::size_t out_size) {
  std::vector<std::uint8_t> out(out_size);
  z_stream zs{};
  if (inflateInit2(&zs, -MAX_WBITS) != Z_OK) throw Error("zip: inflate init failed");
  zs.next_in = const_cast<Bytef*>(in.data());
  zs.avail_in = static_cast<uInt>(in.size());
  zs.next_out = out.data();
  zs.avail_out = static_cast<uInt>(out.size());
  const int rc = inflate(&zs, Z_FINISH);
  inflateEnd(&zs);
  if (rc != Z_STREAM_END || zs.total_out != out_size)
    throw ValidationError("zip: corrupt deflate stream");
  return out;
}

}  // namespace

std::vector<std::uint8_t> zip_write(const std::vector<ZipEntry>& entries) {
  std::vector<std::uint8_t> out, central;
  for (const auto& e : entries) {
    if (e.data.size() > 0xFFFFFFFEu || out.size() > 0xFFFFFFFEu)
      throw ValidationError("zip: entries over 4 GiB are not supported");
    const std::uint32_t offset = static_cast<std::uint32_t>(out.size());
    const std::uint32_t c = crc(e.data);
    const auto size = static_cast<std::uint32_t>(e.data.size());
    const auto name_len = static_cast<std::uint16_t>(e.name.size());

    put32(out, kLocalSig);
    put16(out, 20);  // version needed
    put16(out, 0);   // flags
    put16(out, 0);   // stored
    put16(out, 0);   // time
    put16(out, kDosDate1980);
    put32(out, c);
    put32(out, size);
    put32(out, size);
    put16(out, name_len);
    put16(out, 0);
    out.insert(out.end(), e.name.begin(), e.name.end());
    out.insert(out.end(), e.data.begin(), e.data.end());

    put32(central, kCentralSig);
    put16(central, 20);  // version made by
    put16(central, 20);
    put16(central, 0);
    put16(central, 0);
    put16(central, 0);
    put16(central, kDosDate1980);
    put32(central, c);
    put32(central, size);
    put32(central, size);
    put16(central, name_len);
    put16(central, 0);  // extra
    put16(central, 0);  // comment
    put16(central, 0);  // disk
    put16(central, 0);  // internal attrs
    put32(central, 0);  // external attrs
    put32(central, offset);
    central.insert(central.end(), e.name.begin(), e.name.end());
  }
  const auto cd_offset = static_cast<std::uint32_t>(out.size());
  out.insert(out.end(), central.begin(), central.end());
  put32(out, kEndSig);
  put16(out, 0);
  put16(out, 0);
  put16(out, static_cast<std::uint16_t>(entries.size()));
  put16(out, static_cast<std::uint16_t>(entries.size()));
  put32(out, static_cast<std::uint32_t>(central.size()));
  put32(out, cd_offset);
  put16(out, 0);
  return out;
}

bool looks_like_zip(std::span<const std::uint8_t> bytes) {
  return bytes.size() >= 4 && bytes[0] == 'P' && bytes[1] == 'K' && bytes[2] == 3 && bytes[3] == 4;
}

std::vector<ZipEntry> zip_read(std::span<const std::uint8_t> archive) {
  Reader r{archive};
  if (archive.size() < 22) throw ValidationError("zip: archive too small");
  // End-of-central-directory record, allowing for a trailing comment.
  std::size_t eocd = std::string::npos;
  const std::size_t lowest = archive.size() > 22 + 0xFFFF ? archive.size() - 22 - 0xFFFF : 0;
  for (std::size_t i = archive.size() - 22 + 1; i-- > lowest;)
    if (r.u32(i) == kEndSig) {
      eocd = i;
      break;
    }
  if (eocd == std::string::npos) throw ValidationError("zip: end of central directory not found");

  const std::uint16_t count = r.u16(eocd + 10);
  std::size_t pos = r.u32(eocd + 16);
  std::vector<ZipEntry> out;
  for (std::uint16_t i = 0; i < count; ++i) {
    if (r.u32(pos) != kCentralSig) throw ValidationError("zip: bad central directory entry");
    const std::uint16_t method = r.u16(pos + 10);
    const std::uint32_t c = r.u32(pos + 16);
    const std::uint32_t csize = r.u32(pos + 20);
    const std::uint32_t usize = r.u32(pos + 24);
    const std::uint16_t name_len = r.u16(pos + 28);
    const std::uint16_t extra_len = r.u16(pos + 30);
    const std::uint16_t comment_len = r.u16(pos + 32);
    const std::uint32_t local = r.u32(pos + 42);
    r.need(pos + 46, name_len);
    ZipEntry e;
    e.name.assign(reinterpret_cast<const char*>(archive.data() + pos + 46), name_len);
    pos += 46 + name_len + extra_len + comment_len;

    if (r.u32(local) != kLocalSig) throw ValidationError("zip: bad local header for " + e.name);
    const std::size_t data_at = local + 30 + r.u16(local + 26) + r.u16(local + 28);
    r.need(data_at, csize);
    const auto raw = archive.subspan(data_at, csize);
    if (method == 0) {
      if (csize != usize) throw ValidationError("zip: size mismatch for stored entry " + e.name);
      e.data.assign(raw.begin(), raw.end());
    } else if (method == 8) {
      e.data = inflate_raw(raw, usize);
    } else {
      throw ValidationError("zip: unsupported compression method " + std::to_string(method) +
                            " for " + e.name);
    }
    if (crc(e.data) != c) throw IntegrityError("zip: CRC mismatch for " + e.name);
    out.push_back(std::move(e));
  }
  return out;
}

}  // namespace adaptkit
