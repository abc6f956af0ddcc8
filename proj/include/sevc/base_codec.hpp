#pragma once

#include <array>

#include "sevc/coding.hpp"
#include "sevc/model_config.hpp"

// Conditional codec at 1/4 resolution. Codes base motion and the base frame
// and exports the three spatial references.
namespace sevc::base {

struct SpatialRefs {
  nn::Var base_mv;          // (2, H/4, W/4) decoded motion
  nn::Var spatial_feature;  // (n3, H/4, W/4) last decoder hidden layer
  nn::Var spatial_latent;   // (C_y, H/64, W/64) quantized frame latent
};

struct BaseState {
  nn::Var frame;    // previous base reconstruction
  nn::Var feature;  // propagated feature (n3)
  bool ready() const { return frame.node() != nullptr && feature.node() != nullptr; }
};

struct StepOutput {
  nn::Var recon;
  SpatialRefs refs;
  nn::Var motion_bits;
  nn::Var frame_bits;
  nn::Var estimated_flow;  // encoder side only
};

// Coarse-to-fine flow over a 3-level average-pooled pyramid. Each level adds a
// residual from a three-layer network whose last layer starts at zero.
struct MotionEstimator {
  std::array<std::array<nn::Conv2d, 3>, 3> nets;  // [level][layer], level 0 finest
  nn::Var operator()(const nn::Var& cur, const nn::Var& ref) const;
};

struct BaseCodec {
  MotionEstimator estimator;
  std::array<nn::Conv2d, 2> motion_enc;
  std::array<nn::SubpixelUp2, 2> motion_dec;
  entropy::FactorizedPrior motion_prior;
  std::array<nn::Conv2d, 2> context;
  std::array<nn::Conv2d, 4> enc;
  std::array<nn::Conv2d, 4> prior;
  std::array<nn::SubpixelUp2, 4> dec;
  nn::Conv2d fuse, out, boot;
  codec::PhaseGains gains;
  int latent_channels = 0;

  // Seeds the reference chain from a base-resolution picture.
  void bootstrap(const nn::Var& base_frame, BaseState& state) const;
  // x_b == nullptr decodes.
  StepOutput step(const nn::Var* x_b, BaseState& state, int phase, const codec::Resolver& resolve) const;
};

BaseCodec make_base_codec(nn::ParamStore& store, const ModelConfig& cfg, const std::string& group);

}  // namespace sevc::base
