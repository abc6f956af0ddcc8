#pragma once

#include <cstdint>

#include "sevc/base_codec.hpp"
#include "sevc/context_codec.hpp"
#include "sevc/intra_codec.hpp"
#include "sevc/latent_prior.hpp"

namespace sevc {

inline const std::string kBaseGroup = "base";
inline const std::string kAugmentGroup = "augment";

// Everything a decoder carries from one frame to the next.
struct StreamState {
  nn::Var frame;    // previous full reconstruction
  nn::Var feature;  // propagated full-resolution feature
  base::BaseState base;
  prior::LatentQueue queue;
  int64_t index = 0;  // display index of the next frame
  bool started() const { return frame.node() != nullptr; }
};

struct FrameResult {
  bool intra = false;
  int phase = 0;
  nn::Var recon;       // full reconstruction (absent in base-only decoding)
  nn::Var base_recon;  // base reconstruction
  nn::Var base_input;  // downsampled input (encoder side)
  // Scalar bit estimates; slots not coded in this frame hold zero.
  nn::Var intra_bits, motion_bits, base_frame_bits, full_bits;
  // P-frame internals.
  base::SpatialRefs refs;
  mfca::ContextSet contexts;
  nn::Var upsampled_latent;  // UP(spatial latent)
  nn::Var latent_prior;      // prior handed to the entropy model
  nn::Var latent;            // decoder-domain full latent
  entropy::DistParams params;

  double base_bits() const;
  double total_bits() const;
};

class Model {
 public:
  explicit Model(const ModelConfig& cfg, uint64_t seed = 1);
  Model(const Model&) = delete;
  Model& operator=(const Model&) = delete;

  const ModelConfig& config() const { return cfg_; }
  nn::ParamStore& params() { return store_; }
  const nn::ParamStore& params() const { return store_; }

  // x == nullptr decodes. h and w are the (padded) frame dimensions.
  FrameResult code_intra(const nn::Var* x, int h, int w, StreamState& s, const codec::Resolver& resolve) const;
  FrameResult code_predicted(const nn::Var* x, StreamState& s, const codec::Resolver& resolve,
                             bool base_only = false) const;

  // 4x bicubic downsampling as a differentiable linear map.
  static nn::Var downsample(const nn::Var& x);

  // Digest of the configuration and all weights.
  uint64_t hash() const;

  const intra::IntraCodec& intra() const { return intra_; }
  const base::BaseCodec& base() const { return base_; }
  const mfca::Mfca& mfca() const { return mfca_; }
  const prior::LatentPrior& prior() const { return prior_; }
  const contextual::ContextCodec& context() const { return context_; }

 private:
  ModelConfig cfg_;
  nn::ParamStore store_;
  intra::IntraCodec intra_;
  base::BaseCodec base_;
  mfca::Mfca mfca_;
  prior::LatentPrior prior_;
  contextual::ContextCodec context_;
};

}  // namespace sevc
