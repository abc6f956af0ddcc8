#pragma once

#include <vector>

#include "sevc/bitstream.hpp"
#include "sevc/frame_io.hpp"
#include "sevc/model.hpp"

namespace sevc::session {

struct EncodeOptions {
  int intra_period = -1;  // -1: single leading I-frame
  int lambda_index = 0;
};

// True when frame t starts a new intra period.
bool is_intra(int64_t t, int intra_period);

struct FrameStats {
  bitstream::FrameType type = bitstream::FrameType::kIntra;
  double intra_bits = 0;  // estimated
  double motion_bits = 0;
  double base_frame_bits = 0;
  double full_bits = 0;
  size_t record_bytes = 0;  // actual, including record framing
  double estimated_bits() const { return intra_bits + motion_bits + base_frame_bits + full_bits; }
  double base_bits() const { return motion_bits + base_frame_bits; }
};

struct EncodeResult {
  bitstream::Container container;
  std::vector<Frame> recon;       // cropped, clamped
  std::vector<Frame> base_recon;  // cropped to the base grid, clamped
  std::vector<nn::Tensor> raw_recon;  // padded, unclamped: the exact decoder output
  std::vector<uint64_t> state_digests;
  std::vector<FrameStats> stats;
};

struct DecodeResult {
  std::vector<Frame> frames;
  std::vector<nn::Tensor> raw_frames;
  std::vector<uint64_t> state_digests;
};

EncodeResult encode_video(const Model& model, const std::vector<Frame>& frames, const EncodeOptions& opt);

// base_only returns the low-resolution video (full decoding still runs for
// I-frames, which seed the base chain).
DecodeResult decode_video(const Model& model, const bitstream::Container& c, bool base_only = false);

// Digest of every tensor a decoder carries between frames.
uint64_t state_digest(const StreamState& s);

}  // namespace sevc::session
