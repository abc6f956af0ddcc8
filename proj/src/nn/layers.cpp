#include "sevc/nn/layers.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <numbers>

namespace sevc::nn {

double Rng::normal() {
  // Box-Muller on two portable uniforms.
  double u1 = uniform();
  while (u1 <= 0.0) u1 = uniform();
  const double u2 = uniform();
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

Var ParamStore::create(const std::string& name, std::vector<int> shape, Init init, int fan_in,
                       const std::string& group) {
  if (index_.count(name)) throw std::invalid_argument("duplicate parameter name: " + name);
  Tensor t(std::move(shape), 0.0);
  switch (init) {
    case Init::kHe: {
      const double bound = std::sqrt(6.0 / (1.01 * std::max(fan_in, 1)));
      for (double& v : t.values()) v = rng_.uniform(-bound, bound);
      break;
    }
    case Init::kLecun: {
      const double bound = std::sqrt(3.0 / std::max(fan_in, 1));
      for (double& v : t.values()) v = rng_.uniform(-bound, bound);
      break;
    }
    case Init::kSmall:
      for (double& v : t.values()) v = 0.02 * rng_.normal();
      break;
    case Init::kZero:
      break;
  }
  index_[name] = params_.size();
  params_.push_back(Parameter{name, Var(std::move(t), true), true, group});
  return params_.back().var;
}

Var ParamStore::create_constant(const std::string& name, std::vector<int> shape, double value,
                                const std::string& group) {
  Var v = create(name, std::move(shape), Init::kZero, 1, group);
  v.mutable_value().fill(value);
  return v;
}

void ParamStore::set_lr_scale(const std::string& name, double scale) {
  auto it = index_.find(name);
  if (it == index_.end()) throw std::out_of_range("no parameter named " + name);
  params_[it->second].lr_scale = scale;
}

const Parameter& ParamStore::find(const std::string& name) const {
  auto it = index_.find(name);
  if (it == index_.end()) throw std::out_of_range("no parameter named " + name);
  return params_[it->second];
}

size_t ParamStore::count() const {
  size_t n = 0;
  for (const auto& p : params_) n += p.var.value().size();
  return n;
}

size_t ParamStore::count(const std::string& group) const {
  size_t n = 0;
  for (const auto& p : params_)
    if (p.group == group) n += p.var.value().size();
  return n;
}

void ParamStore::set_trainable_groups(const std::vector<std::string>& groups) {
  for (auto& p : params_) {
    p.trainable = std::find(groups.begin(), groups.end(), p.group) != groups.end();
    p.var.node()->requires_grad = p.trainable;
  }
}

void ParamStore::set_all_trainable(bool on) {
  for (auto& p : params_) {
    p.trainable = on;
    p.var.node()->requires_grad = on;
  }
}

void ParamStore::zero_grad() {
  for (auto& p : params_) p.var.node()->grad = Tensor();
}

uint64_t ParamStore::fingerprint() const {
  uint64_t h = 1469598103934665603ull;
  auto mix = [&h](const void* data, size_t n) {
    const auto* b = static_cast<const unsigned char*>(data);
    for (size_t i = 0; i < n; ++i) {
      h ^= b[i];
      h *= 1099511628211ull;
    }
  };
  for (const auto& p : params_) {
    mix(p.name.data(), p.name.size());
    const Tensor& t = p.var.value();
    mix(t.data(), t.size() * sizeof(double));
  }
  return h;
}

Conv2d make_conv(ParamStore& store, const std::string& name, int cin, int cout, int k,
                 int stride, const std::string& group, Init init) {
  Conv2d c;
  c.weight = store.create(name + ".weight", {cout, cin, k, k}, init, cin * k * k, group);
  c.bias = store.create(name + ".bias", {cout}, Init::kZero, 1, group);
  c.stride = stride;
  return c;
}

SubpixelUp2 make_subpixel_up2(ParamStore& store, const std::string& name, int cin, int cout,
                              const std::string& group, Init init) {
  return SubpixelUp2{make_conv(store, name, cin, cout * 4, 3, 1, group, init)};
}

Linear make_linear(ParamStore& store, const std::string& name, int in, int out,
                   const std::string& group, Init init) {
  Linear l;
  l.weight = store.create(name + ".weight", {out, in}, init, in, group);
  l.bias = store.create(name + ".bias", {out}, Init::kZero, 1, group);
  return l;
}

LayerNorm make_layer_norm(ParamStore& store, const std::string& name, int width,
                          const std::string& group) {
  return LayerNorm{store.create_constant(name + ".gamma", {width}, 1.0, group),
                   store.create(name + ".beta", {width}, Init::kZero, 1, group)};
}

double Adam::step(std::vector<Parameter>& params) {
  ++t_;
  double sq = 0;
  for (auto& p : params)
    if (p.trainable && p.var.has_grad())
      for (double g : p.var.grad().values()) sq += g * g;
  const double norm = std::sqrt(sq);
  const double clip = (opt_.clip_norm > 0 && norm > opt_.clip_norm) ? opt_.clip_norm / norm : 1.0;
  const double bc1 = 1.0 - std::pow(opt_.beta1, static_cast<double>(t_));
  const double bc2 = 1.0 - std::pow(opt_.beta2, static_cast<double>(t_));
  for (auto& p : params) {
    if (!p.trainable || !p.var.has_grad()) continue;
    Tensor& value = p.var.mutable_value();
    const Tensor& grad = p.var.grad();
    auto [it, fresh] = moments_.try_emplace(p.name, Tensor(value.shape(), 0.0), Tensor(value.shape(), 0.0));
    Tensor& m = it->second.first;
    Tensor& v = it->second.second;
    for (size_t i = 0; i < value.size(); ++i) {
      const double g = grad[i] * clip;
      m[i] = opt_.beta1 * m[i] + (1 - opt_.beta1) * g;
      v[i] = opt_.beta2 * v[i] + (1 - opt_.beta2) * g * g;
      value[i] -= opt_.lr * p.lr_scale * (m[i] / bc1) / (std::sqrt(v[i] / bc2) + opt_.eps);
    }
    p.var.node()->grad = Tensor();
  }
  return norm;
}

}  // namespace sevc::nn
