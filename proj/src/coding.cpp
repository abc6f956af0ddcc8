#include "sevc/coding.hpp"

namespace sevc::codec {

using nn::Var;

CodedLatent code_latent(Slot slot, const Var* y, const entropy::DistParams& params, const Resolver& resolve) {
  entropy::Quantized q = resolve(slot, y, params);
  if (q.recon.shape() != params.mean.shape()) {
    throw nn::ShapeError("code_latent: resolved latent " + q.recon.value().shape_str() + " vs parameters " +
                         params.mean.value().shape_str());
  }
  return {q.recon, entropy::rate_bits(q.rate, params)};
}

Resolver training_resolver(nn::Rng* rng, entropy::Relax relax) {
  return [rng, relax](Slot, const Var* y, const entropy::DistParams&) {
    if (y == nullptr) throw std::invalid_argument("training_resolver: latent required");
    return entropy::quantize(*y, rng == nullptr ? entropy::Mode::kEval : entropy::Mode::kTrain, rng, relax);
  };
}

namespace {

Var row_gain(const Var& table, int phase) {
  const int period = table.dim(0);
  const int p = ((phase % period) + period) % period;
  return nn::exp(nn::reshape(nn::slice(table, 0, p, 1), {table.dim(1)}));
}

}  // namespace

Var PhaseGains::encoder_gain(int phase) const { return row_gain(enc, phase); }
Var PhaseGains::decoder_gain(int phase) const { return row_gain(dec, phase); }

PhaseGains make_phase_gains(nn::ParamStore& store, const std::string& name, int period, int channels,
                            const std::string& group) {
  return {store.create(name + ".enc", {period, channels}, nn::Init::kZero, 1, group),
          store.create(name + ".dec", {period, channels}, nn::Init::kZero, 1, group)};
}

}  // namespace sevc::codec
