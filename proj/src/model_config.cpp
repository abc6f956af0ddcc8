#include "sevc/model_config.hpp"

#include <stdexcept>

namespace sevc {

namespace {

#define SEVC_CONFIG_FIELDS(X)                                                                     \
  X(n1) X(n2) X(n3) X(latent_channels) X(motion_latent) X(intra_width) X(base_width) X(me_width) \
  X(motion_width) X(ctx_width) X(ctx_prior_channels) X(param_hidden) X(au_width)                 \
  X(stages_per_scale) X(oda_groups) X(attn_heads) X(window) X(rstb_blocks) X(stl_per_block)      \
  X(mlp_ratio) X(period)

}  // namespace

ModelConfig ModelConfig::preset_named(const std::string& name) {
  ModelConfig c;
  c.preset = name;
  if (name == "desk") return c;
  if (name == "paper_default") {
    c.n1 = 48;
    c.n2 = 64;
    c.n3 = 48;
    c.intra_width = 128;
    c.base_width = 64;
    c.me_width = 32;
    c.motion_width = 64;
    c.ctx_width = 64;
    c.ctx_prior_channels = 128;
    c.param_hidden = 192;
    c.au_width = 64;
    c.motion_latent = 64;
    return c;
  }
  if (name == "tiny") {
    c.n1 = 8;
    c.n2 = 12;
    c.n3 = 16;
    c.latent_channels = 32;
    c.motion_latent = 8;
    c.intra_width = 16;
    c.base_width = 16;
    c.me_width = 8;
    c.motion_width = 16;
    c.ctx_width = 16;
    c.ctx_prior_channels = 16;
    c.param_hidden = 32;
    c.au_width = 12;
    c.stages_per_scale = 1;
    c.attn_heads = 4;
    c.window = 4;
    c.rstb_blocks = 1;
    return c;
  }
  if (name == "toy") {
    c.n1 = 2;
    c.n2 = 2;
    c.n3 = 2;
    c.latent_channels = 2;
    c.motion_latent = 1;
    c.intra_width = 2;
    c.base_width = 2;
    c.me_width = 2;
    c.motion_width = 2;
    c.ctx_width = 2;
    c.ctx_prior_channels = 2;
    c.param_hidden = 2;
    c.au_width = 2;
    c.stages_per_scale = 1;
    c.oda_groups = 2;
    c.attn_heads = 1;
    c.window = 2;
    c.rstb_blocks = 1;
    c.stl_per_block = 2;
    c.mlp_ratio = 1;
    return c;
  }
  throw std::invalid_argument("unknown model preset: " + name);
}

nlohmann::json ModelConfig::to_json() const {
  nlohmann::json j;
  j["preset"] = preset;
#define SEVC_TO_JSON(f) j[#f] = f;
  SEVC_CONFIG_FIELDS(SEVC_TO_JSON)
#undef SEVC_TO_JSON
  return j;
}

ModelConfig ModelConfig::from_json(const nlohmann::json& j) {
  ModelConfig c;
  c.preset = j.value("preset", c.preset);
#define SEVC_FROM_JSON(f) c.f = j.value(#f, c.f);
  SEVC_CONFIG_FIELDS(SEVC_FROM_JSON)
#undef SEVC_FROM_JSON
  c.validate();
  return c;
}

void ModelConfig::validate() const {
  auto need = [](bool ok, const std::string& what) {
    if (!ok) throw std::invalid_argument("model config: " + what);
  };
  need(n1 > 0 && n2 > 0 && n3 > 0, "channel counts must be positive");
  need(latent_channels > 0 && motion_latent > 0, "latent channels must be positive");
  need(stages_per_scale >= 0, "stages_per_scale must be >= 0");
  need(oda_groups >= 1 && n1 % oda_groups == 0, "n1 must be divisible by oda_groups");
  need(attn_heads >= 1 && latent_channels % attn_heads == 0, "latent_channels must be divisible by attn_heads");
  need(window >= 2 && window % 2 == 0, "window must be even and >= 2");
  need(rstb_blocks >= 0 && stl_per_block >= 1, "attention depth");
  need(period >= 1, "period must be >= 1");
}

}  // namespace sevc
