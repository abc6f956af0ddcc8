#pragma once

#include "sevc/nn/layers.hpp"

// Geometry shared by the base and augmentative codecs. Motion fields are
// (2, h, w) tensors in pixels at their own scale: channel 0 horizontal,
// channel 1 vertical. Features are (C, h, w).
namespace sevc::motion {

// Backward warp: out(p) = x(p + v(p)), border-clamped bilinear.
nn::Var warp(const nn::Var& x, const nn::Var& flow);

// Doubles resolution and displacement so the field keeps pixel units.
nn::Var rescale_flow_up2(const nn::Var& flow);

// Warps channel group g of x with offsets[2g : 2g+2]. groups == 1 is warp().
nn::Var group_offset_align(const nn::Var& x, const nn::Var& offsets, int groups);

// Learned 2x upsampling (conv to 4*C' channels, then pixel shuffle).
using SubpixelUp2 = nn::SubpixelUp2;

// Sanity bound from the MotionField invariant: finite and |v| <= max(h, w).
bool is_sane_flow(const nn::Tensor& flow);

}  // namespace sevc::motion
