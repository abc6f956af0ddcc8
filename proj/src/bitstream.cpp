#include "sevc/bitstream.hpp"

#include <algorithm>
#include <cstring>

#include <zlib.h>

namespace sevc::bitstream {

namespace {

void put_u16(std::vector<uint8_t>& out, uint32_t v) {
  out.push_back(static_cast<uint8_t>(v));
  out.push_back(static_cast<uint8_t>(v >> 8));
}

void put_u32(std::vector<uint8_t>& out, uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<uint8_t>(v >> (8 * i)));
}

void put_u64(std::vector<uint8_t>& out, uint64_t v) {
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<uint8_t>(v >> (8 * i)));
}

uint32_t get_u32(const uint8_t* p) {
  return uint32_t{p[0]} | uint32_t{p[1]} << 8 | uint32_t{p[2]} << 16 | uint32_t{p[3]} << 24;
}

uint64_t get_u64(const uint8_t* p) {
  return uint64_t{get_u32(p)} | uint64_t{get_u32(p + 4)} << 32;
}

int symbol_index(int s) {
  if (s < kSymbolMin || s > kSymbolMax) {
    throw CdfError("rans_encode: symbol " + std::to_string(s) + " outside [-256, 255]");
  }
  return s - kSymbolMin;
}

}  // namespace

std::vector<uint8_t> rans_encode(const SymbolStream& s) { return rans_encode(s.symbols, s.cdfs); }

std::vector<uint8_t> rans_encode(std::span<const int> symbols, const CdfTable& cdfs) {
  validate_cdf(cdfs);
  if (cdfs.rows() != symbols.size()) {
    throw CdfError("rans_encode: " + std::to_string(symbols.size()) + " symbols but " +
                   std::to_string(cdfs.rows()) + " cdf rows");
  }
  for (int s : symbols) symbol_index(s);

  uint32_t x = kRansLower;
  std::vector<uint16_t> words;
  words.reserve(symbols.size() / 2 + 1);
  for (size_t i = symbols.size(); i-- > 0;) {
    const int k = symbol_index(symbols[i]);
    const uint32_t start = cdfs.cum(i, k);
    const uint32_t freq = cdfs.freq(i, k);
    // Keep (x / freq) < 2^16 so the next state fits in 32 bits.
    if (x >= (freq << 16)) {
      words.push_back(static_cast<uint16_t>(x & 0xffff));
      x >>= 16;
    }
    x = ((x / freq) << kCdfBits) + (x % freq) + start;
  }
  std::vector<uint8_t> out;
  out.reserve(4 + 2 * words.size());
  put_u32(out, x);
  for (auto it = words.rbegin(); it != words.rend(); ++it) put_u16(out, *it);
  return out;
}

std::vector<int> rans_decode(std::span<const uint8_t> chunk, size_t n, const CdfTable& cdfs) {
  validate_cdf(cdfs);
  if (cdfs.rows() != n) {
    throw CdfError("rans_decode: " + std::to_string(n) + " symbols but " + std::to_string(cdfs.rows()) +
                   " cdf rows");
  }
  if (chunk.size() < 4 || chunk.size() % 2 != 0) throw CorruptStream();
  uint32_t x = get_u32(chunk.data());
  if (x < kRansLower) throw CorruptStream();
  size_t pos = 4;
  std::vector<int> out(n);
  for (size_t i = 0; i < n; ++i) {
    const uint32_t slot = x & (kCdfTotal - 1);
    const uint16_t* row = cdfs.row(i);
    // Last k with row[k] <= slot.
    const int k = static_cast<int>(std::upper_bound(row, row + kNumSymbols, slot) - row) - 1;
    const uint32_t start = row[k];
    const uint32_t freq = cdfs.cum(i, k + 1) - start;
    x = freq * (x >> kCdfBits) + slot - start;
    if (x < kRansLower) {
      if (pos + 2 > chunk.size()) throw CorruptStream();
      x = (x << 16) | uint32_t{chunk[pos]} | uint32_t{chunk[pos + 1]} << 8;
      pos += 2;
    }
    out[i] = k + kSymbolMin;
  }
  if (x != kRansLower || pos != chunk.size()) throw CorruptStream();
  return out;
}

size_t record_bytes(const FrameRecord& r) {
  size_t n = 1;
  for (const auto& s : r.substreams) n += 4 + s.size();
  return n;
}

namespace {

size_t expected_substreams(FrameType t) { return t == FrameType::kIntra ? 1 : 3; }

}  // namespace

namespace {

uint32_t checksum(std::span<const uint8_t> bytes) {
  uLong crc = crc32(0L, Z_NULL, 0);
  size_t done = 0;
  while (done < bytes.size()) {
    const auto n = static_cast<uInt>(std::min<size_t>(bytes.size() - done, 1u << 30));
    crc = crc32(crc, bytes.data() + done, n);
    done += n;
  }
  return static_cast<uint32_t>(crc);
}

}  // namespace

std::vector<uint8_t> write_container(const Container& c) {
  if (c.header.frame_count < 1) throw ContainerError("frame_count must be at least 1");
  if (c.frames.size() != c.header.frame_count) {
    throw ContainerError("header frame_count " + std::to_string(c.header.frame_count) + " but " +
                         std::to_string(c.frames.size()) + " records");
  }
  std::vector<uint8_t> out = {'S', 'E', 'V', 'C', kContainerVersion};
  put_u32(out, c.header.width);
  put_u32(out, c.header.height);
  put_u32(out, c.header.frame_count);
  put_u32(out, static_cast<uint32_t>(c.header.intra_period));
  out.push_back(c.header.lambda_index);
  put_u64(out, c.header.model_hash);
  for (size_t i = 0; i < c.frames.size(); ++i) {
    const FrameRecord& r = c.frames[i];
    if (r.type != FrameType::kIntra && r.type != FrameType::kPredicted) {
      throw ContainerError("frame " + std::to_string(i) + ": unknown frame type");
    }
    if (r.substreams.size() != expected_substreams(r.type)) {
      throw ContainerError("frame " + std::to_string(i) + ": wrong substream count");
    }
    out.push_back(static_cast<uint8_t>(r.type));
    for (const auto& s : r.substreams) {
      if (s.size() > UINT32_MAX) throw ContainerError("substream too large");
      put_u32(out, static_cast<uint32_t>(s.size()));
      out.insert(out.end(), s.begin(), s.end());
    }
  }
  put_u32(out, checksum(out));
  return out;
}

Container read_container(std::span<const uint8_t> bytes) {
  if (bytes.size() < 5 || std::memcmp(bytes.data(), "SEVC", 4) != 0) throw ContainerError("bad magic");
  if (bytes[4] != kContainerVersion) {
    throw ContainerError("unsupported container version " + std::to_string(bytes[4]));
  }
  if (bytes.size() < kHeaderBytes) throw ContainerError("truncated header");
  Container c;
  const uint8_t* p = bytes.data() + 5;
  c.header.width = get_u32(p);
  c.header.height = get_u32(p + 4);
  c.header.frame_count = get_u32(p + 8);
  c.header.intra_period = static_cast<int32_t>(get_u32(p + 12));
  c.header.lambda_index = p[16];
  c.header.model_hash = get_u64(p + 17);
  if (c.header.frame_count < 1) throw ContainerError("frame_count must be at least 1");

  size_t pos = kHeaderBytes;
  for (uint32_t i = 0; i < c.header.frame_count; ++i) {
    const std::string where = "truncated record at frame " + std::to_string(i);
    if (pos + 1 > bytes.size()) throw ContainerError(where);
    FrameRecord r;
    const uint8_t type = bytes[pos++];
    if (type > 1) throw ContainerError("frame " + std::to_string(i) + ": unknown frame type");
    r.type = static_cast<FrameType>(type);
    for (size_t s = 0; s < expected_substreams(r.type); ++s) {
      if (pos + 4 > bytes.size()) throw ContainerError(where);
      const uint32_t len = get_u32(bytes.data() + pos);
      pos += 4;
      if (len > bytes.size() - pos) throw ContainerError(where);
      r.substreams.emplace_back(bytes.begin() + static_cast<std::ptrdiff_t>(pos),
                                bytes.begin() + static_cast<std::ptrdiff_t>(pos + len));
      pos += len;
    }
    c.frames.push_back(std::move(r));
  }
  if (bytes.size() - pos < kChecksumBytes) throw ContainerError("truncated checksum");
  if (bytes.size() - pos > kChecksumBytes) {
    throw ContainerError("trailing bytes after frame " + std::to_string(c.header.frame_count - 1));
  }
  if (get_u32(bytes.data() + pos) != checksum(bytes.first(pos))) throw CorruptStream();
  return c;
}

}  // namespace sevc::bitstream
