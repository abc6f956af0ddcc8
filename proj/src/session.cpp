#include "sevc/session.hpp"

#include <stdexcept>

namespace sevc::session {

using bitstream::FrameType;
using nn::Tensor;
using nn::Var;

namespace {

std::vector<int> to_symbols(const Tensor& t) {
  std::vector<int> s(t.size());
  for (size_t i = 0; i < t.size(); ++i) s[i] = static_cast<int>(t[i]);
  return s;
}

size_t substream_index(codec::Slot slot) {
  switch (slot) {
    case codec::Slot::kIntra:
      return 0;
    case codec::Slot::kBaseMotion:
      return bitstream::kBaseMotion;
    case codec::Slot::kBaseFrame:
      return bitstream::kBaseFrame;
    case codec::Slot::kFullLatent:
      return bitstream::kFullLatent;
  }
  return 0;
}

Frame to_frame(const Tensor& padded, int h, int w) {
  Frame f(h, w);
  for (int c = 0; c < 3; ++c)
    for (int y = 0; y < h; ++y)
      for (int x = 0; x < w; ++x) {
        const double v = padded.at(c, y, x);
        f.pixels.at(c, y, x) = v < 0 ? 0 : (v > 1 ? 1 : v);
      }
  return f;
}

void mix(uint64_t& h, const Tensor& t) {
  const auto* b = reinterpret_cast<const unsigned char*>(t.data());
  for (size_t i = 0; i < t.size() * sizeof(double); ++i) {
    h ^= b[i];
    h *= 1099511628211ull;
  }
}

}  // namespace

bool is_intra(int64_t t, int intra_period) {
  if (intra_period == -1) return t == 0;
  if (intra_period < 1) throw std::invalid_argument("intra period must be -1 or >= 1");
  return t % intra_period == 0;
}

uint64_t state_digest(const StreamState& s) {
  uint64_t h = 1469598103934665603ull;
  if (!s.started()) return h;
  mix(h, s.frame.value());
  mix(h, s.feature.value());
  mix(h, s.base.frame.value());
  mix(h, s.base.feature.value());
  for (size_t i = 0; i < s.queue.size(); ++i) mix(h, s.queue[i].value());
  return h;
}

EncodeResult encode_video(const Model& model, const std::vector<Frame>& frames, const EncodeOptions& opt) {
  if (frames.empty()) throw std::invalid_argument("encode: no frames");
  if (opt.lambda_index < 0 || opt.lambda_index >= static_cast<int>(kLambdas.size())) {
    throw std::invalid_argument("encode: lambda index must be in 0..3");
  }
  const int orig_h = frames[0].height(), orig_w = frames[0].width();
  nn::NoGradGuard no_grad;
  EncodeResult r;
  bitstream::Header& hdr = r.container.header;
  hdr.width = static_cast<uint32_t>(orig_w);
  hdr.height = static_cast<uint32_t>(orig_h);
  hdr.frame_count = static_cast<uint32_t>(frames.size());
  hdr.intra_period = opt.intra_period;
  hdr.lambda_index = static_cast<uint8_t>(opt.lambda_index);
  hdr.model_hash = model.hash();

  StreamState state;
  bitstream::FrameRecord* record = nullptr;
  codec::Resolver encode = [&record](codec::Slot slot, const Var* y, const entropy::DistParams& p) {
    if (y == nullptr) throw std::logic_error("encoder resolver needs a latent");
    Tensor q = entropy::quantize(y->value());
    CdfTable cdf = entropy::build_cdf(p.mean.value(), p.scale.value());
    record->substreams.at(substream_index(slot)) = bitstream::rans_encode(to_symbols(q), cdf);
    Var v = nn::constant(std::move(q));
    return entropy::Quantized{v, v};
  };

  for (size_t t = 0; t < frames.size(); ++t) {
    if (frames[t].height() != orig_h || frames[t].width() != orig_w) {
      throw std::invalid_argument("encode: frame " + std::to_string(t) + " has a different size");
    }
    auto [padded, pad] = pad_to_64(frames[t]);
    Var x = nn::constant(padded.pixels);
    r.container.frames.emplace_back();
    record = &r.container.frames.back();
    FrameResult fr;
    if (is_intra(static_cast<int64_t>(t), opt.intra_period)) {
      record->type = FrameType::kIntra;
      record->substreams.resize(1);
      fr = model.code_intra(&x, pad.padded_h(), pad.padded_w(), state, encode);
    } else {
      record->type = FrameType::kPredicted;
      record->substreams.resize(3);
      fr = model.code_predicted(&x, state, encode);
    }
    FrameStats st;
    st.type = record->type;
    st.intra_bits = fr.intra_bits.value()[0];
    st.motion_bits = fr.motion_bits.value()[0];
    st.base_frame_bits = fr.base_frame_bits.value()[0];
    st.full_bits = fr.full_bits.value()[0];
    st.record_bytes = bitstream::record_bytes(*record);
    r.stats.push_back(st);
    r.raw_recon.push_back(fr.recon.value());
    r.recon.push_back(to_frame(fr.recon.value(), orig_h, orig_w));
    r.base_recon.push_back(to_frame(fr.base_recon.value(), (orig_h + 3) / 4, (orig_w + 3) / 4));
    r.state_digests.push_back(state_digest(state));
  }
  return r;
}

DecodeResult decode_video(const Model& model, const bitstream::Container& c, bool base_only) {
  const bitstream::Header& hdr = c.header;
  if (hdr.model_hash != model.hash()) {
    throw std::runtime_error("bitstream was produced by a different model checkpoint");
  }
  if (hdr.frame_count != c.frames.size()) throw bitstream::ContainerError("frame count mismatch");
  const int orig_h = static_cast<int>(hdr.height), orig_w = static_cast<int>(hdr.width);
  if (orig_h < 1 || orig_w < 1) throw bitstream::ContainerError("invalid frame size in header");
  const int ph = (orig_h + kPadMultiple - 1) / kPadMultiple * kPadMultiple;
  const int pw = (orig_w + kPadMultiple - 1) / kPadMultiple * kPadMultiple;

  nn::NoGradGuard no_grad;
  DecodeResult r;
  StreamState state;
  const bitstream::FrameRecord* record = nullptr;
  codec::Resolver decode = [&record](codec::Slot slot, const Var*, const entropy::DistParams& p) {
    const size_t idx = substream_index(slot);
    if (idx >= record->substreams.size()) throw bitstream::CorruptStream();
    CdfTable cdf = entropy::build_cdf(p.mean.value(), p.scale.value());
    std::vector<int> sym = bitstream::rans_decode(record->substreams[idx], p.mean.value().size(), cdf);
    Tensor q(p.mean.shape());
    for (size_t i = 0; i < sym.size(); ++i) q[i] = sym[i];
    Var v = nn::constant(std::move(q));
    return entropy::Quantized{v, v};
  };

  for (size_t t = 0; t < c.frames.size(); ++t) {
    record = &c.frames[t];
    const bool intra = is_intra(static_cast<int64_t>(t), hdr.intra_period);
    if (intra != (record->type == FrameType::kIntra)) {
      throw bitstream::ContainerError("frame " + std::to_string(t) + " has an unexpected type");
    }
    FrameResult fr = intra ? model.code_intra(nullptr, ph, pw, state, decode)
                           : model.code_predicted(nullptr, state, decode, base_only);
    if (base_only) {
      r.raw_frames.push_back(fr.base_recon.value());
      r.frames.push_back(to_frame(fr.base_recon.value(), (orig_h + 3) / 4, (orig_w + 3) / 4));
    } else {
      r.raw_frames.push_back(fr.recon.value());
      r.frames.push_back(to_frame(fr.recon.value(), orig_h, orig_w));
      r.state_digests.push_back(state_digest(state));
    }
  }
  return r;
}

}  // namespace sevc::session
