#pragma once

#include <array>

#include "sevc/coding.hpp"
#include "sevc/model_config.hpp"

namespace sevc::intra {

struct Output {
  nn::Var recon;    // (3, H, W)
  nn::Var feature;  // (n1, H, W), last decoder hidden layer
  nn::Var latent;   // (C_y, H/16, W/16), quantized
  nn::Var bits;
};

// Factorized-prior image autoencoder for I-frames.
struct IntraCodec {
  std::array<nn::Conv2d, 4> enc;
  entropy::FactorizedPrior prior;
  std::array<nn::SubpixelUp2, 4> dec;
  nn::Conv2d head, out;

  // x == nullptr decodes.
  Output code(const nn::Var* x, int h, int w, const codec::Resolver& resolve) const;
};

IntraCodec make_intra_codec(nn::ParamStore& store, const ModelConfig& cfg, const std::string& group);

}  // namespace sevc::intra
