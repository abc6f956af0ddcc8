#pragma once

#include <array>

#include "sevc/coding.hpp"
#include "sevc/mfca.hpp"

namespace sevc::contextual {

struct Output {
  nn::Var recon;    // (3, H, W)
  nn::Var feature;  // (n1, H, W), propagated to the next frame
  nn::Var latent;   // decoder-domain latent (C_y, H/16, W/16)
  nn::Var bits;
  entropy::DistParams params;
};

// Full-resolution conditional codec. The encoder and decoder see the three
// multi-scale contexts; the entropy model sees the latent prior and a prior
// derived from the coarsest context.
struct ContextCodec {
  std::array<nn::Conv2d, 4> enc;
  std::array<nn::Conv2d, 2> ctx_prior;
  entropy::ParamNet params;
  std::array<nn::SubpixelUp2, 4> up;
  std::array<nn::Conv2d, 3> fuse;
  nn::Conv2d out;
  codec::PhaseGains gains;

  // x == nullptr decodes. prediction is the picture the residual is added to.
  Output code(const nn::Var* x, const mfca::Pyramid& contexts, const nn::Var& latent_prior,
              const nn::Var& prediction, int phase, const codec::Resolver& resolve) const;
};

ContextCodec make_context_codec(nn::ParamStore& store, const ModelConfig& cfg, const std::string& group);

}  // namespace sevc::contextual
