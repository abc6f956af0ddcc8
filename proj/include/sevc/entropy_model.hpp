#pragma once

#include "sevc/cdf.hpp"
#include "sevc/nn/layers.hpp"

namespace sevc::entropy {

inline constexpr double kScaleFloor = 0.11;

enum class Mode { kTrain, kEval };

// kNoise: uniform noise on the rate path, straight-through rounding on the
// reconstruction path. kIdentity: both paths return y unchanged (used for
// gradient checks).
enum class Relax { kNoise, kIdentity };

// Round half away from zero, clamped to the symbol alphabet.
double quantize_value(double y);
nn::Tensor quantize(const nn::Tensor& y);

struct Quantized {
  nn::Var rate;   // feeds rate_bits
  nn::Var recon;  // feeds the synthesis path
};

// Eval mode ignores rng and relax; both paths hold the rounded symbols.
Quantized quantize(const nn::Var& y, Mode mode, nn::Rng* rng, Relax relax = Relax::kNoise);

struct DistParams {
  nn::Var mean;
  nn::Var scale;
};

// Fuses the latent prior and the context prior into per-element Laplace
// parameters. An optional per-channel gain g (C) describes the coded latent
// y*g: mean and scale are multiplied by g before the scale floor.
struct ParamNet {
  nn::Conv2d c1, c2, out;
  int latent_channels = 0;
  DistParams operator()(const nn::Var& latent_prior, const nn::Var& ctx_prior,
                        const nn::Var* gain = nullptr) const;
};

ParamNet make_param_net(nn::ParamStore& store, const std::string& name, int latent_channels,
                        int ctx_channels, int hidden, const std::string& group);

// Learned per-channel (mean, scale) broadcast over space. Used for latents
// coded without a spatial prior.
struct FactorizedPrior {
  nn::Var mean;      // (C)
  nn::Var raw_scale; // (C), mapped through softplus + floor
  DistParams operator()(int h, int w) const;
};

// Optimizer step multiplier for factorized prior tables.
inline constexpr double kPriorLrScale = 10.0;

FactorizedPrior make_factorized_prior(nn::ParamStore& store, const std::string& name, int channels,
                                      const std::string& group);

// Maps an unconstrained tensor to a valid scale: max(softplus(x), floor).
nn::Var scale_map(const nn::Var& raw);
// Same with a per-channel gain applied before the floor.
nn::Var scale_map(const nn::Var& raw, const nn::Var& gain);

// Total self-information in bits of y_hat under the discretized Laplace.
nn::Var rate_bits(const nn::Var& y_hat, const DistParams& p);

// Deterministic 16-bit CDF per element. Throws CdfError on non-finite or
// non-positive parameters.
CdfTable build_cdf(const nn::Tensor& mean, const nn::Tensor& scale);

// Integer frequencies (sum 65536) for one element; exposed for tests.
std::vector<uint32_t> laplace_frequencies(double mean, double scale);

}  // namespace sevc::entropy
