#include "sevc/intra_codec.hpp"

namespace sevc::intra {

using nn::Var;

Output IntraCodec::code(const Var* x, int h, int w, const codec::Resolver& resolve) const {
  if (h % 16 != 0 || w % 16 != 0) {
    throw nn::ShapeError("intra: frame " + std::to_string(h) + "x" + std::to_string(w) +
                         " is not a multiple of 16");
  }
  Var y;
  if (x != nullptr) {
    y = *x;
    for (size_t i = 0; i < enc.size(); ++i) {
      y = enc[i](y);
      if (i + 1 < enc.size()) y = nn::leaky_relu(y);
    }
  }
  const entropy::DistParams p = prior(h / 16, w / 16);
  codec::CodedLatent c = codec::code_latent(codec::Slot::kIntra, x != nullptr ? &y : nullptr, p, resolve);
  Var d = c.symbols;
  for (const auto& up : dec) d = nn::leaky_relu(up(d));
  Var feature = nn::leaky_relu(head(d));
  return {out(feature), feature, c.symbols, c.bits};
}

IntraCodec make_intra_codec(nn::ParamStore& store, const ModelConfig& cfg, const std::string& group) {
  IntraCodec c;
  const int iw = cfg.intra_width;
  const int cy = cfg.latent_channels;
  const int ein[4] = {3, iw, iw, iw};
  const int eout[4] = {iw, iw, iw, cy};
  for (int i = 0; i < 4; ++i)
    c.enc[static_cast<size_t>(i)] =
        nn::make_conv(store, "intra.enc" + std::to_string(i), ein[i], eout[i], 3, 2, group);
  c.prior = entropy::make_factorized_prior(store, "intra.prior", cy, group);
  const int din[4] = {cy, iw, iw, iw};
  const int dout[4] = {iw, iw, iw, cfg.n1};
  for (int i = 0; i < 4; ++i)
    c.dec[static_cast<size_t>(i)] =
        nn::make_subpixel_up2(store, "intra.dec" + std::to_string(i), din[i], dout[i], group);
  c.head = nn::make_conv(store, "intra.head", cfg.n1, cfg.n1, 3, 1, group);
  c.out = nn::make_conv(store, "intra.out", cfg.n1, 3, 3, 1, group, nn::Init::kSmall);
  return c;
}

}  // namespace sevc::intra
