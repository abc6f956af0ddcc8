#pragma once

#include <cstddef>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace sevc {

// Quantized symbol alphabet shared by the entropy model and the coder.
inline constexpr int kSymbolMin = -256;
inline constexpr int kSymbolMax = 255;
inline constexpr int kNumSymbols = kSymbolMax - kSymbolMin + 1;  // 512
inline constexpr int kCdfBits = 16;
inline constexpr uint32_t kCdfTotal = 1u << kCdfBits;  // 65536

class CdfError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// One 16-bit CDF per coded element, stored flat with stride kNumSymbols.
// Entry k of a row is CDF(kSymbolMin + k): row[0] == 0, strictly increasing,
// and the implicit upper endpoint CDF(kSymbolMax + 1) == 65536. Every symbol
// therefore has frequency >= 1.
struct CdfTable {
  std::vector<uint16_t> blob;

  size_t rows() const { return blob.size() / kNumSymbols; }
  const uint16_t* row(size_t i) const { return blob.data() + i * kNumSymbols; }
  // Cumulative frequency of symbol index k in [0, kNumSymbols].
  uint32_t cum(size_t i, int k) const {
    return k == kNumSymbols ? kCdfTotal : blob[i * kNumSymbols + static_cast<size_t>(k)];
  }
  uint32_t freq(size_t i, int k) const { return cum(i, k + 1) - cum(i, k); }
};

// Returns an empty string if the rows satisfy the table invariants, else a
// description of the first violation.
inline std::string validate_cdf_rows(const uint16_t* blob, size_t rows) {
  for (size_t i = 0; i < rows; ++i) {
    const uint16_t* r = blob + i * kNumSymbols;
    if (r[0] != 0) return "row " + std::to_string(i) + ": CDF(min) != 0";
    for (int k = 1; k < kNumSymbols; ++k) {
      if (r[k] <= r[k - 1]) return "row " + std::to_string(i) + ": not strictly increasing at " + std::to_string(k);
    }
  }
  return {};
}

inline void validate_cdf(const CdfTable& t) {
  if (t.blob.size() % kNumSymbols != 0) throw CdfError("cdf blob size is not a multiple of 512");
  if (auto e = validate_cdf_rows(t.blob.data(), t.rows()); !e.empty()) throw CdfError(e);
}

}  // namespace sevc
