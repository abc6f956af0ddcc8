/* Reference rANS coder over flat buffers. The byte format is the one
 * produced by sevc::bitstream::rans_encode.
 *
 * cdf_blob holds one row of SEVC_RANS_STRIDE uint16 cumulative frequencies
 * per symbol: row[0] == 0, strictly increasing, implicit total 65536.
 * Symbols are int16 values in [-256, 255].
 */
#ifndef SEVC_RANS_C_H
#define SEVC_RANS_C_H

#include <stddef.h>
#include <stdint.h>

#ifdef __cplusplus
extern "C" {
#endif

#define SEVC_RANS_STRIDE 512

enum sevc_rans_status {
  SEVC_RANS_OK = 0,
  SEVC_RANS_ERR_NULL = 1,      /* required pointer is null */
  SEVC_RANS_ERR_LENGTH = 2,    /* cdf_len != n * SEVC_RANS_STRIDE */
  SEVC_RANS_ERR_CDF = 3,       /* a cdf row violates the table invariants */
  SEVC_RANS_ERR_SYMBOL = 4,    /* symbol outside [-256, 255] */
  SEVC_RANS_ERR_CAPACITY = 5,  /* output buffer too small */
  SEVC_RANS_ERR_ALIAS = 6,     /* input and output buffers overlap */
  SEVC_RANS_ERR_CORRUPT = 7    /* chunk is not a conforming stream */
};

/* Upper bound on encoded bytes for n symbols. */
size_t sevc_rans_encode_bound(size_t n);

/* On success writes *out_len bytes to out. On error nothing is written to
 * out and *out_len is 0. */
int sevc_rans_encode(const int16_t* symbols, size_t n, const uint16_t* cdf_blob, size_t cdf_len,
                     uint8_t* out, size_t out_cap, size_t* out_len);

/* Decodes exactly n symbols. On error symbols_out is left untouched. */
int sevc_rans_decode(const uint8_t* chunk, size_t chunk_len, size_t n, const uint16_t* cdf_blob,
                     size_t cdf_len, int16_t* symbols_out);

#ifdef __cplusplus
}
#endif

#endif
