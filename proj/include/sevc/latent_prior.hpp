#pragma once

#include <deque>
#include <vector>

#include "sevc/model_config.hpp"
#include "sevc/nn/layers.hpp"

namespace sevc::prior {

inline constexpr int kQueueDepth = 3;

// FIFO of the most recent full-resolution latents, newest first.
class LatentQueue {
 public:
  void push(const nn::Var& latent);
  size_t size() const { return entries_.size(); }
  bool empty() const { return entries_.empty(); }
  const nn::Var& operator[](size_t i) const { return entries_.at(i); }
  void clear() { entries_.clear(); }

 private:
  std::deque<nn::Var> entries_;
};

// Token geometry of one (possibly shifted) window partition over a padded
// grid. Query rows index the h*w stream, key rows the depth*h*w stream; -1
// marks padding.
struct WindowPlan {
  int window = 0;
  int windows = 0;
  std::vector<int> query_rows;      // windows * window^2
  std::vector<int> key_rows;        // windows * depth * window^2
  std::vector<unsigned char> mask;  // per window: window^2 x depth*window^2
  std::vector<int> bias_index;      // relative position row, same layout as one window's mask
};

WindowPlan plan_windows(int h, int w, int window, bool shifted, int depth = kQueueDepth);

// Cross-attention layer: queries from the prior stream, keys/values from the
// temporal queue, within 3-D (depth x window x window) windows.
struct AttentionLayer {
  nn::LayerNorm norm_q, norm_kv, norm_mlp;
  nn::Linear wq, wk, wv, proj, mlp1, mlp2;
  nn::Var bias_table;  // (depth * (2w-1)^2, heads)
  int heads = 1;
  int window = 2;
  bool shifted = false;
  nn::Var operator()(const nn::Var& x, const nn::Var& kv, int h, int w) const;
};

struct ResidualBlock {
  std::vector<AttentionLayer> layers;
  nn::Linear out;
};

struct LatentPrior {
  nn::SubpixelUp2 up1, up2;
  std::vector<ResidualBlock> blocks;
  nn::Linear head;  // zero init
  int channels = 0;

  // Two chained learned 2x upsamplers: base latent grid to full latent grid.
  nn::Var upsample(const nn::Var& base_latent) const;
  // Prior for the current latent. Missing queue entries are filled with the
  // upsampled spatial latent so keys and values are always three deep.
  nn::Var operator()(const nn::Var& base_latent, const LatentQueue& queue) const;
  nn::Var from_upsampled(const nn::Var& up, const LatentQueue& queue) const;
};

LatentPrior make_latent_prior(nn::ParamStore& store, const ModelConfig& cfg, const std::string& group);

}  // namespace sevc::prior
