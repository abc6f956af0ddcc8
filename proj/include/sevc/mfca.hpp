#pragma once

#include <array>
#include <vector>

#include "sevc/model_config.hpp"
#include "sevc/motion_ops.hpp"

// Motion and feature co-augmentation. Scale index 0 is the working
// resolution, 1 is 1/2, 2 is 1/4 (the base resolution).
namespace sevc::mfca {

using Pyramid = std::array<nn::Var, 3>;

// Residual predictor at its input resolution: two stride-2 convolutions, a
// residual trunk, two subpixel upsamplers. The last layer starts at zero, so
// a fresh unit is the zero map.
struct AugmentUnit {
  nn::Conv2d down1, down2, trunk1, trunk2;
  nn::SubpixelUp2 up1, up2;
  int in_channels = 0;
  nn::Var operator()(const nn::Var& x) const;
};

AugmentUnit make_augment_unit(nn::ParamStore& store, const std::string& name, int cin, int width, int cout,
                              const std::string& group);

// Strided convolutions from the propagated feature to channels (n1, n2, n3).
struct Extractor {
  nn::Conv2d l1, l2, l3;
  Pyramid operator()(const nn::Var& feature) const;
};

struct StageOut {
  nn::Var motion;
  nn::Var feature;
};

// One augment stage: motion first, then the feature update aligned with the
// already-updated motion.
struct AugmentStage {
  AugmentUnit motion_unit, feature_unit;
  StageOut operator()(const nn::Var& motion, const nn::Var& feature, const nn::Var& temporal) const;
};

struct ContextSet {
  Pyramid contexts;   // C1, C2, C3
  Pyramid motions;    // final motion per scale
  Pyramid features;   // augmented spatial feature per scale
};

struct Mfca {
  ModelConfig cfg;
  Extractor extract;
  std::array<std::vector<AugmentStage>, 3> stages;
  nn::SubpixelUp2 up_2to1, up_1to0;  // feature upsamplers between scales
  nn::Conv2d oda_head;               // group offsets at scale 0 (zero init)
  std::array<nn::Conv2d, 3> fuse_a, fuse_b;

  // base_mv and spatial_feature at 1/4 resolution; temporal feature at the
  // working resolution.
  ContextSet operator()(const nn::Var& base_mv, const nn::Var& spatial_feature,
                        const nn::Var& temporal_feature) const;
};

Mfca make_mfca(nn::ParamStore& store, const ModelConfig& cfg, const std::string& group);

}  // namespace sevc::mfca
