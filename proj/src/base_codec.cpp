#include "sevc/base_codec.hpp"

#include <stdexcept>

#include "sevc/motion_ops.hpp"

namespace sevc::base {

using nn::Var;

Var MotionEstimator::operator()(const Var& cur, const Var& ref) const {
  if (cur.shape() != ref.shape()) {
    throw nn::ShapeError("estimate_motion: " + cur.value().shape_str() + " vs " + ref.value().shape_str());
  }
  std::array<Var, 3> c{cur, Var(), Var()}, r{ref, Var(), Var()};
  for (size_t l = 1; l < 3; ++l) {
    c[l] = nn::avg_pool2(c[l - 1]);
    r[l] = nn::avg_pool2(r[l - 1]);
  }
  auto net = [&](size_t l, const Var& in) {
    const auto& n = nets[l];
    return n[2](nn::leaky_relu(n[1](nn::leaky_relu(n[0](in)))));
  };
  Var flow = net(2, nn::concat({c[2], r[2]}, 0));
  for (int l = 1; l >= 0; --l) {
    const size_t i = static_cast<size_t>(l);
    Var f = motion::rescale_flow_up2(flow);
    flow = nn::add(f, net(i, nn::concat({c[i], motion::warp(r[i], f), f}, 0)));
  }
  return flow;
}

void BaseCodec::bootstrap(const Var& base_frame, BaseState& state) const {
  state.frame = nn::clamp(base_frame, 0.0, 1.0);
  state.feature = nn::leaky_relu(boot(base_frame));
}

StepOutput BaseCodec::step(const Var* x_b, BaseState& state, int phase, const codec::Resolver& resolve) const {
  if (!state.ready()) throw std::logic_error("base_step: state not initialized");
  const int h = state.frame.dim(1), w = state.frame.dim(2);
  if (h % 16 != 0 || w % 16 != 0) {
    throw nn::ShapeError("base_step: base frame " + state.frame.value().shape_str() + " is not a multiple of 16");
  }
  if (x_b != nullptr && x_b->shape() != state.frame.shape()) {
    throw nn::ShapeError("base_step: input " + x_b->value().shape_str() + " vs reference " +
                         state.frame.value().shape_str());
  }
  StepOutput o;

  Var m_lat;
  if (x_b != nullptr) {
    o.estimated_flow = estimator(*x_b, state.frame);
    m_lat = motion_enc[1](nn::leaky_relu(motion_enc[0](o.estimated_flow)));
  }
  const entropy::DistParams mp = motion_prior(h / 4, w / 4);
  codec::CodedLatent mc =
      codec::code_latent(codec::Slot::kBaseMotion, x_b != nullptr ? &m_lat : nullptr, mp, resolve);
  o.motion_bits = mc.bits;
  Var mv = motion_dec[1](nn::leaky_relu(motion_dec[0](mc.symbols)));

  Var ctx = context[1](nn::leaky_relu(context[0](motion::warp(state.feature, mv))));

  Var pr = ctx;
  for (size_t i = 0; i < prior.size(); ++i) {
    pr = prior[i](pr);
    if (i + 1 < prior.size()) pr = nn::leaky_relu(pr);
  }
  const Var g_enc = gains.encoder_gain(phase);
  const entropy::DistParams fp{nn::mul_channel(nn::slice(pr, 0, 0, latent_channels), g_enc),
                               entropy::scale_map(nn::slice(pr, 0, latent_channels, latent_channels), g_enc)};
  Var y;
  if (x_b != nullptr) {
    y = nn::concat({*x_b, ctx}, 0);
    for (size_t i = 0; i < enc.size(); ++i) {
      y = enc[i](y);
      if (i + 1 < enc.size()) y = nn::leaky_relu(y);
    }
    y = nn::mul_channel(y, g_enc);
  }
  codec::CodedLatent fc = codec::code_latent(codec::Slot::kBaseFrame, x_b != nullptr ? &y : nullptr, fp, resolve);
  o.frame_bits = fc.bits;
  Var latent = nn::mul_channel(fc.symbols, gains.decoder_gain(phase));

  Var d = latent;
  for (const auto& up : dec) d = nn::leaky_relu(up(d));
  Var feature = nn::leaky_relu(fuse(nn::concat({d, ctx}, 0)));
  o.recon = nn::add(out(feature), motion::warp(state.frame, mv));
  o.refs = {mv, feature, latent};
  state.frame = nn::clamp(o.recon, 0.0, 1.0);
  state.feature = feature;
  return o;
}

BaseCodec make_base_codec(nn::ParamStore& store, const ModelConfig& cfg, const std::string& group) {
  BaseCodec b;
  const int n3 = cfg.n3, bw = cfg.base_width, cy = cfg.latent_channels, mw = cfg.motion_width;
  b.latent_channels = cy;
  const int me_in[3] = {8, 8, 6};
  for (size_t l = 0; l < 3; ++l) {
    const std::string p = "base.me" + std::to_string(l);
    b.estimator.nets[l][0] = nn::make_conv(store, p + ".c0", me_in[l], cfg.me_width, 3, 1, group);
    b.estimator.nets[l][1] = nn::make_conv(store, p + ".c1", cfg.me_width, cfg.me_width, 3, 1, group);
    b.estimator.nets[l][2] = nn::make_conv(store, p + ".c2", cfg.me_width, 2, 3, 1, group, nn::Init::kZero);
  }
  b.motion_enc[0] = nn::make_conv(store, "base.menc0", 2, mw, 3, 2, group);
  b.motion_enc[1] = nn::make_conv(store, "base.menc1", mw, cfg.motion_latent, 3, 2, group);
  b.motion_dec[0] = nn::make_subpixel_up2(store, "base.mdec0", cfg.motion_latent, mw, group);
  b.motion_dec[1] = nn::make_subpixel_up2(store, "base.mdec1", mw, 2, group);
  b.motion_prior = entropy::make_factorized_prior(store, "base.mprior", cfg.motion_latent, group);
  b.context[0] = nn::make_conv(store, "base.ctx0", n3, n3, 3, 1, group);
  b.context[1] = nn::make_conv(store, "base.ctx1", n3, n3, 3, 1, group, nn::Init::kLecun);
  const int ein[4] = {3 + n3, bw, bw, bw};
  const int eout[4] = {bw, bw, bw, cy};
  const int pin[4] = {n3, bw, bw, bw};
  const int pout[4] = {bw, bw, bw, 2 * cy};
  const int din[4] = {cy, bw, bw, bw};
  for (size_t i = 0; i < 4; ++i) {
    const std::string s = std::to_string(i);
    b.enc[i] = nn::make_conv(store, "base.enc" + s, ein[i], eout[i], 3, 2, group);
    b.prior[i] = nn::make_conv(store, "base.prior" + s, pin[i], pout[i], 3, 2, group);
    b.dec[i] = nn::make_subpixel_up2(store, "base.dec" + s, din[i], bw, group);
  }
  b.fuse = nn::make_conv(store, "base.fuse", bw + n3, n3, 3, 1, group, nn::Init::kLecun);
  b.out = nn::make_conv(store, "base.out", n3, 3, 3, 1, group, nn::Init::kSmall);
  b.boot = nn::make_conv(store, "base.boot", 3, n3, 3, 1, group);
  b.gains = codec::make_phase_gains(store, "base.gain", cfg.period, cy, group);
  return b;
}

}  // namespace sevc::base
