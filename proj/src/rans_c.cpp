#include "sevc/rans_c.h"

#include <algorithm>
#include <cstring>

#include "sevc/bitstream.hpp"

namespace {

using sevc::CdfTable;

bool overlaps(const void* a, size_t a_len, const void* b, size_t b_len) {
  if (a_len == 0 || b_len == 0) return false;
  const auto pa = reinterpret_cast<uintptr_t>(a), pb = reinterpret_cast<uintptr_t>(b);
  return pa < pb + b_len && pb < pa + a_len;
}

int load_cdfs(size_t n, const uint16_t* cdf_blob, size_t cdf_len, CdfTable& t) {
  if (n != 0 && cdf_blob == nullptr) return SEVC_RANS_ERR_NULL;
  if (n > SIZE_MAX / SEVC_RANS_STRIDE || cdf_len != n * SEVC_RANS_STRIDE) return SEVC_RANS_ERR_LENGTH;
  if (!sevc::validate_cdf_rows(cdf_blob, n).empty()) return SEVC_RANS_ERR_CDF;
  t.blob.assign(cdf_blob, cdf_blob + cdf_len);
  return SEVC_RANS_OK;
}

}  // namespace

extern "C" {

size_t sevc_rans_encode_bound(size_t n) { return 4 + 2 * n; }

int sevc_rans_encode(const int16_t* symbols, size_t n, const uint16_t* cdf_blob, size_t cdf_len,
                     uint8_t* out, size_t out_cap, size_t* out_len) {
  if (out_len == nullptr) return SEVC_RANS_ERR_NULL;
  *out_len = 0;
  if ((n != 0 && symbols == nullptr) || out == nullptr) return SEVC_RANS_ERR_NULL;
  if (overlaps(out, out_cap, symbols, n * sizeof(int16_t)) ||
      overlaps(out, out_cap, cdf_blob, cdf_len * sizeof(uint16_t))) {
    return SEVC_RANS_ERR_ALIAS;
  }
  CdfTable t;
  if (int rc = load_cdfs(n, cdf_blob, cdf_len, t); rc != SEVC_RANS_OK) return rc;
  std::vector<int> s(symbols, symbols + n);
  for (int v : s)
    if (v < sevc::kSymbolMin || v > sevc::kSymbolMax) return SEVC_RANS_ERR_SYMBOL;
  const std::vector<uint8_t> bytes = sevc::bitstream::rans_encode(s, t);
  if (bytes.size() > out_cap) return SEVC_RANS_ERR_CAPACITY;
  std::memcpy(out, bytes.data(), bytes.size());
  *out_len = bytes.size();
  return SEVC_RANS_OK;
}

int sevc_rans_decode(const uint8_t* chunk, size_t chunk_len, size_t n, const uint16_t* cdf_blob,
                     size_t cdf_len, int16_t* symbols_out) {
  if ((chunk_len != 0 && chunk == nullptr) || (n != 0 && symbols_out == nullptr)) return SEVC_RANS_ERR_NULL;
  if (overlaps(symbols_out, n * sizeof(int16_t), chunk, chunk_len) ||
      overlaps(symbols_out, n * sizeof(int16_t), cdf_blob, cdf_len * sizeof(uint16_t))) {
    return SEVC_RANS_ERR_ALIAS;
  }
  CdfTable t;
  if (int rc = load_cdfs(n, cdf_blob, cdf_len, t); rc != SEVC_RANS_OK) return rc;
  std::vector<int> s;
  try {
    s = sevc::bitstream::rans_decode({chunk, chunk_len}, n, t);
  } catch (const sevc::bitstream::CorruptStream&) {
    return SEVC_RANS_ERR_CORRUPT;
  }
  std::copy(s.begin(), s.end(), symbols_out);
  return SEVC_RANS_OK;
}

}  // extern "C"
