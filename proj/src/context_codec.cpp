#include "sevc/context_codec.hpp"

namespace sevc::contextual {

using nn::Var;

Output ContextCodec::code(const Var* x, const mfca::Pyramid& c, const Var& latent_prior, const Var& prediction,
                          int phase, const codec::Resolver& resolve) const {
  Var y;
  if (x != nullptr) {
    Var e = nn::leaky_relu(enc[0](nn::concat({*x, c[0]}, 0)));
    e = nn::leaky_relu(enc[1](nn::concat({e, c[1]}, 0)));
    e = nn::leaky_relu(enc[2](nn::concat({e, c[2]}, 0)));
    y = enc[3](e);
  }
  Var cp = ctx_prior[1](nn::leaky_relu(ctx_prior[0](c[2])));
  const Var g_enc = gains.encoder_gain(phase);
  Output o;
  o.params = params(latent_prior, cp, &g_enc);
  if (x != nullptr) y = nn::mul_channel(y, g_enc);
  codec::CodedLatent coded =
      codec::code_latent(codec::Slot::kFullLatent, x != nullptr ? &y : nullptr, o.params, resolve);
  o.bits = coded.bits;
  o.latent = nn::mul_channel(coded.symbols, gains.decoder_gain(phase));

  Var d = nn::leaky_relu(up[0](o.latent));
  d = nn::leaky_relu(up[1](d));
  d = nn::leaky_relu(fuse[0](nn::concat({d, c[2]}, 0)));
  d = nn::leaky_relu(up[2](d));
  d = nn::leaky_relu(fuse[1](nn::concat({d, c[1]}, 0)));
  d = nn::leaky_relu(up[3](d));
  o.feature = nn::leaky_relu(fuse[2](nn::concat({d, c[0]}, 0)));
  o.recon = nn::add(out(o.feature), prediction);
  return o;
}

ContextCodec make_context_codec(nn::ParamStore& store, const ModelConfig& cfg, const std::string& group) {
  ContextCodec k;
  const int cw = cfg.ctx_width, cy = cfg.latent_channels;
  const int n1 = cfg.n1, n2 = cfg.n2, n3 = cfg.n3;
  k.enc[0] = nn::make_conv(store, "ctx.enc0", 3 + n1, cw, 3, 2, group);
  k.enc[1] = nn::make_conv(store, "ctx.enc1", cw + n2, cw, 3, 2, group);
  k.enc[2] = nn::make_conv(store, "ctx.enc2", cw + n3, cw, 3, 2, group);
  k.enc[3] = nn::make_conv(store, "ctx.enc3", cw, cy, 3, 2, group);
  k.ctx_prior[0] = nn::make_conv(store, "ctx.cprior0", n3, cfg.ctx_prior_channels, 3, 2, group);
  k.ctx_prior[1] = nn::make_conv(store, "ctx.cprior1", cfg.ctx_prior_channels, cfg.ctx_prior_channels, 3, 2, group);
  k.params = entropy::make_param_net(store, "ctx.params", cy, cfg.ctx_prior_channels, cfg.param_hidden, group);
  k.up[0] = nn::make_subpixel_up2(store, "ctx.up0", cy, cw, group);
  k.up[1] = nn::make_subpixel_up2(store, "ctx.up1", cw, cw, group);
  k.up[2] = nn::make_subpixel_up2(store, "ctx.up2", cw, cw, group);
  k.up[3] = nn::make_subpixel_up2(store, "ctx.up3", cw, cw, group);
  k.fuse[0] = nn::make_conv(store, "ctx.fuse0", cw + n3, cw, 3, 1, group);
  k.fuse[1] = nn::make_conv(store, "ctx.fuse1", cw + n2, cw, 3, 1, group);
  k.fuse[2] = nn::make_conv(store, "ctx.fuse2", cw + n1, n1, 3, 1, group, nn::Init::kLecun);
  k.out = nn::make_conv(store, "ctx.out", n1, 3, 3, 1, group, nn::Init::kSmall);
  k.gains = codec::make_phase_gains(store, "ctx.gain", cfg.period, cy, group);
  return k;
}

}  // namespace sevc::contextual
