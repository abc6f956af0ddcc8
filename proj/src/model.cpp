#include "sevc/model.hpp"

#include <stdexcept>

#include "sevc/frame_io.hpp"
#include "sevc/motion_ops.hpp"

namespace sevc {

using nn::Var;

namespace {

Var zero_scalar() { return nn::constant(nn::Tensor({1}, 0.0)); }

// Decoded frames kept as references are limited to the pixel range.
Var reference(const Var& recon) { return nn::clamp(recon, 0.0, 1.0); }

}  // namespace

double FrameResult::base_bits() const { return motion_bits.value()[0] + base_frame_bits.value()[0]; }

double FrameResult::total_bits() const {
  return intra_bits.value()[0] + base_bits() + full_bits.value()[0];
}

Model::Model(const ModelConfig& cfg, uint64_t seed) : cfg_(cfg), store_(seed) {
  cfg_.validate();
  intra_ = intra::make_intra_codec(store_, cfg_, kBaseGroup);
  base_ = base::make_base_codec(store_, cfg_, kBaseGroup);
  mfca_ = mfca::make_mfca(store_, cfg_, kAugmentGroup);
  prior_ = prior::make_latent_prior(store_, cfg_, kAugmentGroup);
  context_ = contextual::make_context_codec(store_, cfg_, kAugmentGroup);
}

Var Model::downsample(const Var& x) {
  return nn::resample_separable(x, bicubic_matrix(x.dim(1), 4), bicubic_matrix(x.dim(2), 4));
}

FrameResult Model::code_intra(const Var* x, int h, int w, StreamState& s, const codec::Resolver& resolve) const {
  if (h % kPadMultiple != 0 || w % kPadMultiple != 0) {
    throw nn::ShapeError("code_intra: " + std::to_string(h) + "x" + std::to_string(w) + " is not a multiple of " +
                         std::to_string(kPadMultiple));
  }
  if (x != nullptr && (x->dim(0) != 3 || x->dim(1) != h || x->dim(2) != w)) {
    throw nn::ShapeError("code_intra: input " + x->value().shape_str() + " does not match " + std::to_string(h) +
                         "x" + std::to_string(w));
  }
  FrameResult r;
  r.intra = true;
  r.phase = static_cast<int>(s.index % cfg_.period);
  intra::Output o = intra_.code(x, h, w, resolve);
  r.recon = o.recon;
  r.intra_bits = o.bits;
  r.motion_bits = r.base_frame_bits = r.full_bits = zero_scalar();
  r.latent = o.latent;
  if (x != nullptr) r.base_input = downsample(*x);
  r.base_recon = downsample(o.recon);

  s.frame = reference(o.recon);
  s.feature = o.feature;
  s.queue.clear();
  s.queue.push(o.latent);
  base_.bootstrap(r.base_recon, s.base);
  ++s.index;
  return r;
}

FrameResult Model::code_predicted(const Var* x, StreamState& s, const codec::Resolver& resolve,
                                  bool base_only) const {
  if (!s.started()) throw std::logic_error("code_predicted: stream has no decoded reference");
  if (x != nullptr && x->shape() != s.frame.shape()) {
    throw nn::ShapeError("code_predicted: input " + x->value().shape_str() + " vs reference " +
                         s.frame.value().shape_str());
  }
  FrameResult r;
  r.phase = static_cast<int>(s.index % cfg_.period);
  r.intra_bits = r.full_bits = zero_scalar();
  if (x != nullptr) r.base_input = downsample(*x);
  base::StepOutput b = base_.step(x != nullptr ? &r.base_input : nullptr, s.base, r.phase, resolve);
  r.base_recon = b.recon;
  r.refs = b.refs;
  r.motion_bits = b.motion_bits;
  r.base_frame_bits = b.frame_bits;
  if (base_only) {
    ++s.index;
    return r;
  }

  r.contexts = mfca_(b.refs.base_mv, b.refs.spatial_feature, s.feature);
  r.upsampled_latent = prior_.upsample(b.refs.spatial_latent);
  r.latent_prior = prior_.from_upsampled(r.upsampled_latent, s.queue);
  Var prediction = motion::warp(s.frame, r.contexts.motions[0]);
  contextual::Output o = context_.code(x, r.contexts.contexts, r.latent_prior, prediction, r.phase, resolve);
  r.recon = o.recon;
  r.full_bits = o.bits;
  r.latent = o.latent;
  r.params = o.params;

  s.frame = reference(o.recon);
  s.feature = o.feature;
  s.queue.push(o.latent);
  ++s.index;
  return r;
}

uint64_t Model::hash() const {
  uint64_t h = 1469598103934665603ull;
  for (unsigned char ch : cfg_.to_json().dump()) {
    h ^= ch;
    h *= 1099511628211ull;
  }
  const uint64_t f = store_.fingerprint();
  for (int i = 0; i < 8; ++i) {
    h ^= (f >> (8 * i)) & 0xffu;
    h *= 1099511628211ull;
  }
  return h;
}

}  // namespace sevc
