#pragma once

#include <cstdint>
#include <map>
#include <random>
#include <string>
#include <vector>

#include "sevc/nn/ops.hpp"

namespace sevc::nn {

// Portable uniform / normal draws on top of mt19937_64, whose output
// sequence is fixed by the standard (the distributions are not).
class Rng {
 public:
  explicit Rng(uint64_t seed) : engine_(seed) {}
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  double normal();
  uint64_t next() { return engine_(); }

 private:
  std::mt19937_64 engine_;
};

enum class Init { kHe, kLecun, kZero, kSmall };

// Owns every parameter of a model in creation order. Names are unique.
class ParamStore {
 public:
  explicit ParamStore(uint64_t seed = 1) : rng_(seed) {}

  Var create(const std::string& name, std::vector<int> shape, Init init, int fan_in,
             const std::string& group);
  Var create_constant(const std::string& name, std::vector<int> shape, double value,
                      const std::string& group);

  std::vector<Parameter>& params() { return params_; }
  const std::vector<Parameter>& params() const { return params_; }
  const Parameter& find(const std::string& name) const;
  void set_lr_scale(const std::string& name, double scale);
  size_t count() const;
  size_t count(const std::string& group) const;

  // Marks every parameter trainable iff its group is in `groups`.
  void set_trainable_groups(const std::vector<std::string>& groups);
  void set_all_trainable(bool on);
  void zero_grad();

  // Digest of all parameter bytes (FNV-1a); identifies a weight set.
  uint64_t fingerprint() const;

 private:
  Rng rng_;
  std::vector<Parameter> params_;
  std::map<std::string, size_t> index_;
};

struct Conv2d {
  Var weight;
  Var bias;
  int stride = 1;
  Var operator()(const Var& x) const { return conv2d(x, weight, bias, stride); }
  int in_channels() const { return weight.dim(1); }
  int out_channels() const { return weight.dim(0); }
};

Conv2d make_conv(ParamStore& store, const std::string& name, int cin, int cout, int k,
                 int stride, const std::string& group, Init init = Init::kHe);

// Learned convolution to 4x channels followed by a 2x pixel shuffle.
struct SubpixelUp2 {
  Conv2d conv;
  Var operator()(const Var& x) const { return pixel_shuffle(conv(x), 2); }
};

SubpixelUp2 make_subpixel_up2(ParamStore& store, const std::string& name, int cin, int cout,
                              const std::string& group, Init init = Init::kHe);

struct Linear {
  Var weight;
  Var bias;
  Var operator()(const Var& x) const { return linear(x, weight, bias); }
};

Linear make_linear(ParamStore& store, const std::string& name, int in, int out,
                   const std::string& group, Init init = Init::kHe);

struct LayerNorm {
  Var gamma;
  Var beta;
  Var operator()(const Var& x) const { return layer_norm(x, gamma, beta); }
};

LayerNorm make_layer_norm(ParamStore& store, const std::string& name, int width,
                          const std::string& group);

class Adam {
 public:
  struct Options {
    double lr = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    double clip_norm = 0.0;  // 0 disables global-norm clipping
  };

  explicit Adam(Options opt) : opt_(opt) {}

  // Updates trainable parameters that received a gradient, then clears grads.
  // Returns the pre-clip global gradient norm.
  double step(std::vector<Parameter>& params);
  int64_t steps() const { return t_; }

 private:
  Options opt_;
  int64_t t_ = 0;
  std::map<std::string, std::pair<Tensor, Tensor>> moments_;
};

}  // namespace sevc::nn
