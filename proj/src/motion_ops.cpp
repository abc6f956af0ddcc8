#include "sevc/motion_ops.hpp"

#include <cmath>
#include <string>

namespace sevc::motion {

nn::Var warp(const nn::Var& x, const nn::Var& flow) { return nn::warp_bilinear(x, flow); }

nn::Var rescale_flow_up2(const nn::Var& flow) {
  if (flow.value().rank() != 3 || flow.dim(0) != 2) {
    throw nn::ShapeError("rescale_flow_up2: expects a (2,h,w) field, got " + flow.value().shape_str());
  }
  return nn::scale(nn::upsample_bilinear2(flow), 2.0);
}

nn::Var group_offset_align(const nn::Var& x, const nn::Var& offsets, int groups) {
  const int c = x.dim(0);
  if (groups <= 0 || c % groups != 0) {
    throw nn::ShapeError("group_offset_align: " + std::to_string(c) + " channels not divisible into " +
                         std::to_string(groups) + " groups");
  }
  if (offsets.dim(0) != 2 * groups) {
    throw nn::ShapeError("group_offset_align: need " + std::to_string(2 * groups) +
                         " offset channels, got " + std::to_string(offsets.dim(0)));
  }
  if (groups == 1) return warp(x, offsets);
  const int per = c / groups;
  std::vector<nn::Var> parts;
  parts.reserve(static_cast<size_t>(groups));
  for (int g = 0; g < groups; ++g) {
    parts.push_back(warp(nn::slice(x, 0, g * per, per), nn::slice(offsets, 0, 2 * g, 2)));
  }
  return nn::concat(parts, 0);
}

bool is_sane_flow(const nn::Tensor& flow) {
  if (flow.rank() != 3 || flow.channels() != 2) return false;
  const double bound = std::max(flow.height(), flow.width());
  for (double v : flow.values())
    if (!std::isfinite(v) || std::fabs(v) > bound) return false;
  return true;
}

}  // namespace sevc::motion
