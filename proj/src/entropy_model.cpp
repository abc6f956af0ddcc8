#include "sevc/entropy_model.hpp"

#include <algorithm>
#include <cmath>

#include "sevc/nn/laplace.hpp"

namespace sevc::entropy {

double quantize_value(double y) {
  const double r = std::round(y);  // std::round ties away from zero
  // + 0.0 maps -0.0 to +0.0 so symbols match the integers a decoder rebuilds.
  return std::clamp(r, static_cast<double>(kSymbolMin), static_cast<double>(kSymbolMax)) + 0.0;
}

nn::Tensor quantize(const nn::Tensor& y) {
  nn::Tensor q(y.shape());
  for (size_t i = 0; i < y.size(); ++i) q[i] = quantize_value(y[i]);
  return q;
}

Quantized quantize(const nn::Var& y, Mode mode, nn::Rng* rng, Relax relax) {
  if (mode == Mode::kEval) {
    nn::Var q = nn::constant(quantize(y.value()));
    return {q, q};
  }
  if (relax == Relax::kIdentity) return {y, y};
  if (rng == nullptr) throw std::invalid_argument("quantize: train mode needs an rng");
  nn::Tensor noise(y.value().shape());
  for (double& v : noise.values()) v = rng->uniform(-0.5, 0.5);
  nn::Tensor offset = quantize(y.value());
  for (size_t i = 0; i < offset.size(); ++i) offset[i] -= y.value()[i];
  return {nn::add(y, nn::constant(std::move(noise))), nn::add(y, nn::constant(std::move(offset)))};
}

nn::Var scale_map(const nn::Var& raw) { return nn::clamp_min(nn::softplus(raw), kScaleFloor); }

nn::Var scale_map(const nn::Var& raw, const nn::Var& gain) {
  return nn::clamp_min(nn::mul_channel(nn::softplus(raw), gain), kScaleFloor);
}

DistParams ParamNet::operator()(const nn::Var& latent_prior, const nn::Var& ctx_prior,
                                const nn::Var* gain) const {
  if (latent_prior.dim(1) != ctx_prior.dim(1) || latent_prior.dim(2) != ctx_prior.dim(2)) {
    throw nn::ShapeError("predict_params: latent prior " + latent_prior.value().shape_str() +
                         " and context prior " + ctx_prior.value().shape_str() + " differ in resolution");
  }
  if (latent_prior.dim(0) != latent_channels) {
    throw nn::ShapeError("predict_params: latent prior has " + std::to_string(latent_prior.dim(0)) +
                         " channels, expected " + std::to_string(latent_channels));
  }
  nn::Var h = nn::leaky_relu(c1(nn::concat({latent_prior, ctx_prior}, 0)));
  h = nn::leaky_relu(c2(h));
  nn::Var o = out(h);
  nn::Var mean = nn::slice(o, 0, 0, latent_channels);
  nn::Var raw = nn::slice(o, 0, latent_channels, latent_channels);
  if (gain == nullptr) return {mean, scale_map(raw)};
  return {nn::mul_channel(mean, *gain), scale_map(raw, *gain)};
}

ParamNet make_param_net(nn::ParamStore& store, const std::string& name, int latent_channels,
                        int ctx_channels, int hidden, const std::string& group) {
  ParamNet net;
  net.latent_channels = latent_channels;
  net.c1 = nn::make_conv(store, name + ".c1", latent_channels + ctx_channels, hidden, 3, 1, group);
  net.c2 = nn::make_conv(store, name + ".c2", hidden, hidden, 3, 1, group);
  net.out = nn::make_conv(store, name + ".out", hidden, 2 * latent_channels, 1, 1, group);
  return net;
}

DistParams FactorizedPrior::operator()(int h, int w) const {
  nn::Var ones = nn::constant(nn::Tensor({mean.dim(0), h, w}, 1.0));
  return {nn::mul_channel(ones, mean), scale_map(nn::mul_channel(ones, raw_scale))};
}

FactorizedPrior make_factorized_prior(nn::ParamStore& store, const std::string& name, int channels,
                                      const std::string& group) {
  // softplus(0.5) ~ 0.97 at init. The table is a handful of scalars that must
  // move by several units, so it steps faster than the network weights.
  FactorizedPrior p{store.create(name + ".mean", {channels}, nn::Init::kZero, 1, group),
                    store.create_constant(name + ".raw_scale", {channels}, 0.5, group)};
  store.set_lr_scale(name + ".mean", kPriorLrScale);
  store.set_lr_scale(name + ".raw_scale", kPriorLrScale);
  return p;
}

nn::Var rate_bits(const nn::Var& y_hat, const DistParams& p) {
  return nn::sum(nn::laplace_bits(y_hat, p.mean, p.scale));
}

std::vector<uint32_t> laplace_frequencies(double mean, double scale) {
  if (!std::isfinite(mean) || !std::isfinite(scale) || scale <= 0) {
    throw CdfError("build_cdf: invalid Laplace parameters (mean " + std::to_string(mean) + ", scale " +
                   std::to_string(scale) + ")");
  }
  // Each symbol gets 1 + floor(mass * spare); spare leaves room for the
  // 512 unit floors, and the leftover goes to the most probable symbol.
  constexpr uint32_t kSpare = kCdfTotal - kNumSymbols;
  std::vector<uint32_t> freq(kNumSymbols, 1);
  // Beyond this distance the mass is below 1/(e * kSpare), so the floor is 0.
  const double reach = 2.0 + scale * (std::log(static_cast<double>(kSpare)) + 1.0);
  const double lo_d = std::clamp(std::floor(mean - reach), double{kSymbolMin}, double{kSymbolMax});
  const double hi_d = std::clamp(std::ceil(mean + reach), double{kSymbolMin}, double{kSymbolMax});
  const int lo = static_cast<int>(lo_d), hi = static_cast<int>(hi_d);
  for (int s = lo; s <= hi; ++s) {
    double mass;
    if (s == kSymbolMin) {
      mass = nn::laplace_cdf(s + 0.5 - mean, scale);
    } else if (s == kSymbolMax) {
      mass = 1.0 - nn::laplace_cdf(s - 0.5 - mean, scale);
    } else {
      mass = std::exp(nn::laplace_bin(s - mean, scale).log_mass);
    }
    freq[static_cast<size_t>(s - kSymbolMin)] += static_cast<uint32_t>(std::floor(mass * kSpare));
  }
  uint32_t total = 0;
  size_t peak = 0;
  for (size_t k = 0; k < freq.size(); ++k) {
    total += freq[k];
    if (freq[k] > freq[peak]) peak = k;
  }
  freq[peak] += kCdfTotal - total;
  return freq;
}

CdfTable build_cdf(const nn::Tensor& mean, const nn::Tensor& scale) {
  if (!mean.same_shape(scale)) throw CdfError("build_cdf: mean and scale shapes differ");
  CdfTable t;
  t.blob.resize(mean.size() * kNumSymbols);
  for (size_t i = 0; i < mean.size(); ++i) {
    const std::vector<uint32_t> f = laplace_frequencies(mean[i], scale[i]);
    uint16_t* row = t.blob.data() + i * kNumSymbols;
    uint32_t c = 0;
    for (int k = 0; k < kNumSymbols; ++k) {
      row[k] = static_cast<uint16_t>(c);
      c += f[static_cast<size_t>(k)];
    }
  }
  return t;
}

}  // namespace sevc::entropy
