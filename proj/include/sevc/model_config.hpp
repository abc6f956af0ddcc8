#pragma once

#include <array>
#include <string>

#include "json.hpp"

namespace sevc {

// Rate-distortion trade-off points, addressed by lambda index.
inline constexpr std::array<double, 4> kLambdas = {50, 95, 200, 400};

// Channel plan and depth of every sub-network. Presets: "paper_default"
// (published widths), "desk" (single-core CPU budget), "tiny" (short
// training runs), "toy" (< 10^4 parameters, for gradient checks).
struct ModelConfig {
  std::string preset = "desk";

  // Feature pyramid channels at scales 1, 1/2, 1/4 of the working resolution.
  int n1 = 16;
  int n2 = 24;
  int n3 = 48;

  int latent_channels = 128;   // C_y, full and base frame latents
  int motion_latent = 32;      // base motion latent channels
  int intra_width = 32;
  int base_width = 32;
  int me_width = 16;
  int motion_width = 32;
  int ctx_width = 32;          // contextual encoder/decoder width
  int ctx_prior_channels = 64;
  int param_hidden = 96;

  int au_width = 24;
  int stages_per_scale = 2;
  int oda_groups = 2;

  int attn_heads = 8;
  int window = 8;
  int rstb_blocks = 2;
  int stl_per_block = 2;
  int mlp_ratio = 2;

  int period = 4;  // phases of the hierarchical quality structure

  static ModelConfig preset_named(const std::string& name);
  nlohmann::json to_json() const;
  static ModelConfig from_json(const nlohmann::json& j);
  void validate() const;
};

}  // namespace sevc
