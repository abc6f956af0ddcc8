#pragma once

#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "sevc/cdf.hpp"

namespace sevc::bitstream {

class CorruptStream : public std::runtime_error {
 public:
  CorruptStream() : std::runtime_error("corrupt stream") {}
};

class ContainerError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Symbols in [kSymbolMin, kSymbolMax], one CDF row per symbol.
struct SymbolStream {
  std::vector<int> symbols;
  CdfTable cdfs;
};

// rANS parameters: 32-bit state, lower bound 2^16, 16-bit renormalization.
inline constexpr uint32_t kRansLower = 1u << 16;

// Layout: final encoder state (4 bytes LE), then 16-bit LE words in the
// order the decoder consumes them. Symbols are encoded last to first.
std::vector<uint8_t> rans_encode(const SymbolStream& s);
std::vector<uint8_t> rans_encode(std::span<const int> symbols, const CdfTable& cdfs);

// Throws CorruptStream if the bytes run out, the state leaves its range,
// or the final state / byte count do not match a conforming encoder.
std::vector<int> rans_decode(std::span<const uint8_t> chunk, size_t n, const CdfTable& cdfs);

enum class FrameType : uint8_t { kIntra = 0, kPredicted = 1 };

// Substream slots of a P-frame record.
enum PSlot : int { kBaseMotion = 0, kBaseFrame = 1, kFullLatent = 2 };

struct Header {
  uint32_t width = 0;
  uint32_t height = 0;
  uint32_t frame_count = 0;
  int32_t intra_period = -1;
  uint8_t lambda_index = 0;
  uint64_t model_hash = 0;
  bool operator==(const Header&) const = default;
};

struct FrameRecord {
  FrameType type = FrameType::kIntra;
  // kIntra: 1 substream. kPredicted: 3 (see PSlot).
  std::vector<std::vector<uint8_t>> substreams;
  bool operator==(const FrameRecord&) const = default;
};

struct Container {
  Header header;
  std::vector<FrameRecord> frames;
  bool operator==(const Container&) const = default;
};

inline constexpr uint8_t kContainerVersion = 1;
inline constexpr size_t kHeaderBytes = 4 + 1 + 4 + 4 + 4 + 4 + 1 + 8;
// CRC-32 (zlib polynomial) of every preceding byte, appended after the last
// record.
inline constexpr size_t kChecksumBytes = 4;

size_t record_bytes(const FrameRecord& r);
std::vector<uint8_t> write_container(const Container& c);
// Structural errors throw ContainerError; a checksum mismatch throws
// CorruptStream.
Container read_container(std::span<const uint8_t> bytes);

}  // namespace sevc::bitstream
