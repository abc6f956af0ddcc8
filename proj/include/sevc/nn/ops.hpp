#pragma once

#include <vector>

#include "sevc/nn/autograd.hpp"

// Differentiable primitives. Image tensors are (C, H, W); token matrices are
// (rows, cols). Every op records its backward only when grad mode is on.
namespace sevc::nn {

inline Var constant(Tensor t) { return Var(std::move(t), false); }

Var add(const Var& a, const Var& b);
Var sub(const Var& a, const Var& b);
Var mul(const Var& a, const Var& b);
Var scale(const Var& a, double s);
Var add_scalar(const Var& a, double s);
// a (C,H,W) times a per-channel vector g (C).
Var mul_channel(const Var& a, const Var& g);
// a (R,C) plus a row vector b (C).
Var add_row(const Var& a, const Var& b);

Var concat(const std::vector<Var>& parts, int axis = 0);
Var slice(const Var& a, int axis, int start, int length);
Var reshape(const Var& a, std::vector<int> shape);
Var transpose2d(const Var& a);

Var leaky_relu(const Var& a, double slope = 0.1);
Var gelu(const Var& a);
Var softplus(const Var& a);
Var exp(const Var& a);
// max(a, floor); gradient passes only where a > floor.
Var clamp_min(const Var& a, double floor);
// min(max(a, lo), hi); gradient passes only strictly inside (lo, hi).
Var clamp(const Var& a, double lo, double hi);
// Forward rounds half away from zero; backward is the identity.
Var round_ste(const Var& a);

Var sum(const Var& a);
Var mean(const Var& a);
// Mean squared error between equally shaped tensors.
Var mse(const Var& a, const Var& b);

// x (Cin,H,W), w (Cout,Cin,k,k), b (Cout); zero padding k/2.
Var conv2d(const Var& x, const Var& w, const Var& b, int stride = 1);
// (C*r*r, H, W) -> (C, H*r, W*r).
Var pixel_shuffle(const Var& x, int r = 2);

// Backward warp with border-clamped bilinear sampling.
// flow channel 0 = horizontal, 1 = vertical displacement in pixels.
Var warp_bilinear(const Var& x, const Var& flow);
// 2x bilinear upsampling, half-pixel centers, border clamp.
Var upsample_bilinear2(const Var& x);
Var avg_pool2(const Var& x);
// out[c] = rows (Ho x H) * x[c] * cols^T (W x Wo).
Var resample_separable(const Var& x, const Tensor& rows, const Tensor& cols);

Var matmul(const Var& a, const Var& b);
// x (N,in), w (out,in), b (out) -> (N,out).
Var linear(const Var& x, const Var& w, const Var& b);
// Normalizes each row of x (N,C).
Var layer_norm(const Var& x, const Var& gamma, const Var& beta, double eps = 1e-5);
// Row softmax; entries with mask == 0 get probability 0. A fully masked row
// yields zeros.
Var softmax_rows(const Var& scores, const std::vector<unsigned char>& mask);

// out row i = x row idx[i]; idx < 0 gives a zero row.
Var gather_rows(const Var& x, const std::vector<int>& idx);
// out row idx[i] = x row i (rows with idx < 0 are dropped); other rows zero.
Var scatter_rows(const Var& x, const std::vector<int>& idx, int out_rows);
// Flat gather: out[i] = x[idx[i]], shaped by out_shape.
Var gather(const Var& x, const std::vector<int>& idx, std::vector<int> out_shape);

// (C,H,W) <-> (H*W, C)
Var to_tokens(const Var& x);
Var from_tokens(const Var& t, int h, int w);

// Per-element self-information in bits of the integer bin [y-0.5, y+0.5]
// under Laplace(mean, scale).
Var laplace_bits(const Var& y, const Var& mean, const Var& scale);

}  // namespace sevc::nn
