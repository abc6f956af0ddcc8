#include "sevc/latent_prior.hpp"

#include <cmath>

namespace sevc::prior {

using nn::Var;

void LatentQueue::push(const Var& latent) {
  if (!entries_.empty() && entries_.front().shape() != latent.shape()) {
    throw nn::ShapeError("push_latent: latent " + latent.value().shape_str() + " does not match queue entries " +
                         entries_.front().value().shape_str());
  }
  entries_.push_front(latent);
  if (entries_.size() > kQueueDepth) entries_.pop_back();
}

WindowPlan plan_windows(int h, int w, int window, bool shifted, int depth) {
  const int hp = (h + window - 1) / window * window;
  const int wp = (w + window - 1) / window * window;
  // A single window already sees the whole grid; shifting adds nothing.
  const int shift = (shifted && (hp > window || wp > window)) ? window / 2 : 0;
  const int n = window * window;
  const int span = 2 * window - 1;
  auto region = [&](int v, int size) {
    if (shift == 0) return 0;
    return v < size - window ? 0 : (v < size - shift ? 1 : 2);
  };

  WindowPlan p;
  p.window = window;
  p.windows = (hp / window) * (wp / window);
  p.mask.reserve(static_cast<size_t>(p.windows) * n * depth * n);
  p.bias_index.resize(static_cast<size_t>(n) * depth * n);
  for (int qi = 0; qi < n; ++qi)
    for (int t = 0; t < depth; ++t)
      for (int ki = 0; ki < n; ++ki) {
        const int dy = qi / window - ki / window + window - 1;
        const int dx = qi % window - ki % window + window - 1;
        p.bias_index[(static_cast<size_t>(qi) * depth + t) * n + ki] = (t * span + dy) * span + dx;
      }

  for (int wy = 0; wy < hp / window; ++wy)
    for (int wx = 0; wx < wp / window; ++wx) {
      std::vector<int> token(n), label(n);
      for (int i = 0; i < n; ++i) {
        const int ry = wy * window + i / window, rx = wx * window + i % window;
        const int oy = (ry + shift) % hp, ox = (rx + shift) % wp;
        token[i] = (oy < h && ox < w) ? oy * w + ox : -1;
        label[i] = region(ry, hp) * 3 + region(rx, wp);
        p.query_rows.push_back(token[i]);
      }
      for (int t = 0; t < depth; ++t)
        for (int i = 0; i < n; ++i) p.key_rows.push_back(token[i] < 0 ? -1 : t * h * w + token[i]);
      for (int qi = 0; qi < n; ++qi)
        for (int t = 0; t < depth; ++t)
          for (int ki = 0; ki < n; ++ki) p.mask.push_back(token[ki] >= 0 && label[ki] == label[qi] ? 1 : 0);
    }
  return p;
}

Var AttentionLayer::operator()(const Var& x, const Var& kv, int h, int w) const {
  const int c = x.dim(1);
  const int d = c / heads;
  const int depth = kv.dim(0) / (h * w);
  const WindowPlan plan = plan_windows(h, w, window, shifted, depth);
  const int nq = window * window;
  const int nk = depth * nq;

  Var q = wq(norm_q(x));
  Var kvn = norm_kv(kv);
  Var k = wk(kvn);
  Var v = wv(kvn);
  Var qw = nn::gather_rows(q, plan.query_rows);
  Var kw = nn::gather_rows(k, plan.key_rows);
  Var vw = nn::gather_rows(v, plan.key_rows);

  std::vector<Var> bias(static_cast<size_t>(heads));
  for (int hd = 0; hd < heads; ++hd) {
    std::vector<int> idx(plan.bias_index.size());
    for (size_t i = 0; i < idx.size(); ++i) idx[i] = plan.bias_index[i] * heads + hd;
    bias[static_cast<size_t>(hd)] = nn::gather(bias_table, idx, {nq, nk});
  }

  const double inv = 1.0 / std::sqrt(static_cast<double>(d));
  std::vector<Var> rows;
  rows.reserve(static_cast<size_t>(plan.windows));
  for (int wi = 0; wi < plan.windows; ++wi) {
    Var qwin = nn::slice(qw, 0, wi * nq, nq);
    Var kwin = nn::slice(kw, 0, wi * nk, nk);
    Var vwin = nn::slice(vw, 0, wi * nk, nk);
    const std::vector<unsigned char> mask(plan.mask.begin() + static_cast<std::ptrdiff_t>(wi) * nq * nk,
                                          plan.mask.begin() + static_cast<std::ptrdiff_t>(wi + 1) * nq * nk);
    std::vector<Var> outs;
    for (int hd = 0; hd < heads; ++hd) {
      Var qh = nn::slice(qwin, 1, hd * d, d);
      Var kh = nn::slice(kwin, 1, hd * d, d);
      Var vh = nn::slice(vwin, 1, hd * d, d);
      Var scores = nn::add(nn::scale(nn::matmul(qh, nn::transpose2d(kh)), inv), bias[static_cast<size_t>(hd)]);
      outs.push_back(nn::matmul(nn::softmax_rows(scores, mask), vh));
    }
    rows.push_back(heads == 1 ? outs[0] : nn::concat(outs, 1));
  }
  Var attn = nn::scatter_rows(nn::concat(rows, 0), plan.query_rows, h * w);
  Var y = nn::add(x, proj(attn));
  return nn::add(y, mlp2(nn::gelu(mlp1(norm_mlp(y)))));
}

Var LatentPrior::upsample(const Var& base_latent) const { return up2(nn::leaky_relu(up1(base_latent))); }

Var LatentPrior::operator()(const Var& base_latent, const LatentQueue& queue) const {
  return from_upsampled(upsample(base_latent), queue);
}

Var LatentPrior::from_upsampled(const Var& up, const LatentQueue& queue) const {
  const int h = up.dim(1), w = up.dim(2);
  std::vector<Var> kv;
  for (size_t i = 0; i < kQueueDepth; ++i) {
    const Var& e = i < queue.size() ? queue[i] : up;
    if (e.shape() != up.shape()) {
      throw nn::ShapeError("generate_prior: queue entry " + e.value().shape_str() + " vs prior " +
                           up.value().shape_str());
    }
    kv.push_back(nn::to_tokens(e));
  }
  Var keys = nn::concat(kv, 0);
  Var s = nn::to_tokens(up);
  for (const ResidualBlock& b : blocks) {
    Var t = s;
    for (const AttentionLayer& l : b.layers) t = l(t, keys, h, w);
    s = nn::add(s, b.out(t));
  }
  return nn::add(up, nn::from_tokens(head(s), h, w));
}

LatentPrior make_latent_prior(nn::ParamStore& store, const ModelConfig& cfg, const std::string& group) {
  LatentPrior p;
  const int c = cfg.latent_channels;
  p.channels = c;
  p.up1 = nn::make_subpixel_up2(store, "prior.up1", c, c, group);
  p.up2 = nn::make_subpixel_up2(store, "prior.up2", c, c, group);
  const int span = 2 * cfg.window - 1;
  for (int b = 0; b < cfg.rstb_blocks; ++b) {
    ResidualBlock block;
    for (int l = 0; l < cfg.stl_per_block; ++l) {
      const std::string n = "prior.rstb" + std::to_string(b) + ".stl" + std::to_string(l);
      AttentionLayer a;
      a.norm_q = nn::make_layer_norm(store, n + ".norm_q", c, group);
      a.norm_kv = nn::make_layer_norm(store, n + ".norm_kv", c, group);
      a.norm_mlp = nn::make_layer_norm(store, n + ".norm_mlp", c, group);
      a.wq = nn::make_linear(store, n + ".wq", c, c, group);
      a.wk = nn::make_linear(store, n + ".wk", c, c, group);
      a.wv = nn::make_linear(store, n + ".wv", c, c, group);
      a.proj = nn::make_linear(store, n + ".proj", c, c, group);
      a.mlp1 = nn::make_linear(store, n + ".mlp1", c, c * cfg.mlp_ratio, group);
      a.mlp2 = nn::make_linear(store, n + ".mlp2", c * cfg.mlp_ratio, c, group);
      a.bias_table = store.create(n + ".bias_table", {kQueueDepth * span * span, cfg.attn_heads},
                                  nn::Init::kSmall, 1, group);
      a.heads = cfg.attn_heads;
      a.window = cfg.window;
      a.shifted = l % 2 == 1;
      block.layers.push_back(std::move(a));
    }
    block.out = nn::make_linear(store, "prior.rstb" + std::to_string(b) + ".out", c, c, group);
    p.blocks.push_back(std::move(block));
  }
  p.head = nn::make_linear(store, "prior.head", c, c, group, nn::Init::kZero);
  return p;
}

}  // namespace sevc::prior
