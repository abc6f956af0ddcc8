#pragma once

#include <functional>

#include "sevc/entropy_model.hpp"

namespace sevc::codec {

// Latents coded per frame, in bitstream order.
enum class Slot { kIntra, kBaseMotion, kBaseFrame, kFullLatent };

// Quantizes one latent. Encoders and trainers receive y; decoders receive
// y == nullptr and return the decoded symbols (shape taken from params.mean).
using Resolver = std::function<entropy::Quantized(Slot, const nn::Var* y, const entropy::DistParams& params)>;

struct CodedLatent {
  nn::Var symbols;  // quantized latent as seen by the synthesis path
  nn::Var bits;     // scalar estimated bits
};

CodedLatent code_latent(Slot slot, const nn::Var* y, const entropy::DistParams& params, const Resolver& resolve);

// Resolver for training and analysis: train-mode quantization (or eval-mode
// rounding when rng is null).
Resolver training_resolver(nn::Rng* rng, entropy::Relax relax = entropy::Relax::kNoise);

// Per-phase per-channel log gains (period, C), zero at init. The encoder
// scales the latent by exp(enc[phase]) before quantization, the decoder by
// exp(dec[phase]) after.
struct PhaseGains {
  nn::Var enc;
  nn::Var dec;
  nn::Var encoder_gain(int phase) const;
  nn::Var decoder_gain(int phase) const;
};

PhaseGains make_phase_gains(nn::ParamStore& store, const std::string& name, int period, int channels,
                            const std::string& group);

}  // namespace sevc::codec
