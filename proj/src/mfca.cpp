#include "sevc/mfca.hpp"

namespace sevc::mfca {

using nn::Var;

Var AugmentUnit::operator()(const Var& x) const {
  if (x.dim(0) != in_channels) {
    throw nn::ShapeError("augment_unit: expected " + std::to_string(in_channels) + " input channels, got " +
                         std::to_string(x.dim(0)));
  }
  Var h = nn::leaky_relu(down1(x));
  h = nn::leaky_relu(down2(h));
  h = nn::add(h, trunk2(nn::leaky_relu(trunk1(h))));
  h = nn::leaky_relu(up1(h));
  return up2(h);
}

AugmentUnit make_augment_unit(nn::ParamStore& store, const std::string& name, int cin, int width, int cout,
                              const std::string& group) {
  AugmentUnit u;
  u.in_channels = cin;
  u.down1 = nn::make_conv(store, name + ".down1", cin, width, 3, 2, group);
  u.down2 = nn::make_conv(store, name + ".down2", width, width, 3, 2, group);
  u.trunk1 = nn::make_conv(store, name + ".trunk1", width, width, 3, 1, group);
  u.trunk2 = nn::make_conv(store, name + ".trunk2", width, width, 3, 1, group);
  u.up1 = nn::make_subpixel_up2(store, name + ".up1", width, width, group);
  u.up2 = nn::make_subpixel_up2(store, name + ".up2", width, cout, group, nn::Init::kZero);
  return u;
}

Pyramid Extractor::operator()(const Var& feature) const {
  Var a = l1(feature);
  Var b = l2(nn::leaky_relu(a));
  Var c = l3(nn::leaky_relu(b));
  return {a, b, c};
}

StageOut AugmentStage::operator()(const Var& motion, const Var& feature, const Var& temporal) const {
  const auto& m = motion.shape();
  const auto& f = feature.shape();
  const auto& t = temporal.shape();
  if (m[1] != f[1] || m[2] != f[2] || t[1] != f[1] || t[2] != f[2]) {
    throw nn::ShapeError("augment_stage: scale mismatch between motion " + motion.value().shape_str() +
                         ", feature " + feature.value().shape_str() + ", temporal " +
                         temporal.value().shape_str());
  }
  Var next_motion = nn::add(motion, motion_unit(nn::concat({temporal, feature, motion}, 0)));
  Var aligned = motion::warp(temporal, next_motion);
  Var next_feature = nn::add(feature, feature_unit(nn::concat({aligned, feature}, 0)));
  return {next_motion, next_feature};
}

ContextSet Mfca::operator()(const Var& base_mv, const Var& spatial_feature, const Var& temporal_feature) const {
  const Pyramid temporal = extract(temporal_feature);
  ContextSet out;
  Var motion = base_mv;
  Var feature = spatial_feature;
  for (int s = 2; s >= 0; --s) {
    if (s < 2) {
      feature = s == 1 ? up_2to1(feature) : up_1to0(feature);
      motion = motion::rescale_flow_up2(motion);
    }
    for (const AugmentStage& stage : stages[static_cast<size_t>(s)]) {
      StageOut o = stage(motion, feature, temporal[static_cast<size_t>(s)]);
      motion = o.motion;
      feature = o.feature;
    }
    Var aligned;
    if (s == 0 && cfg.oda_groups > 1) {
      std::vector<Var> base(static_cast<size_t>(cfg.oda_groups), motion);
      Var offsets = nn::add(nn::concat(base, 0), oda_head(nn::concat({motion, temporal[0], feature}, 0)));
      aligned = motion::group_offset_align(temporal[0], offsets, cfg.oda_groups);
    } else {
      aligned = motion::warp(temporal[static_cast<size_t>(s)], motion);
    }
    const size_t i = static_cast<size_t>(s);
    out.contexts[i] = fuse_b[i](nn::leaky_relu(fuse_a[i](nn::concat({aligned, feature}, 0))));
    out.motions[i] = motion;
    out.features[i] = feature;
  }
  return out;
}

Mfca make_mfca(nn::ParamStore& store, const ModelConfig& cfg, const std::string& group) {
  Mfca m;
  m.cfg = cfg;
  const int n[3] = {cfg.n1, cfg.n2, cfg.n3};
  m.extract.l1 = nn::make_conv(store, "mfca.extract.l1", cfg.n1, cfg.n1, 3, 1, group);
  m.extract.l2 = nn::make_conv(store, "mfca.extract.l2", cfg.n1, cfg.n2, 3, 2, group);
  m.extract.l3 = nn::make_conv(store, "mfca.extract.l3", cfg.n2, cfg.n3, 3, 2, group);
  for (int s = 2; s >= 0; --s) {
    for (int k = 0; k < cfg.stages_per_scale; ++k) {
      const std::string p = "mfca.s" + std::to_string(s) + ".stage" + std::to_string(k);
      const int c = n[s];
      m.stages[static_cast<size_t>(s)].push_back(
          {make_augment_unit(store, p + ".motion", 2 * c + 2, cfg.au_width, 2, group),
           make_augment_unit(store, p + ".feature", 2 * c, cfg.au_width, c, group)});
    }
  }
  m.up_2to1 = nn::make_subpixel_up2(store, "mfca.up_2to1", cfg.n3, cfg.n2, group);
  m.up_1to0 = nn::make_subpixel_up2(store, "mfca.up_1to0", cfg.n2, cfg.n1, group);
  m.oda_head = nn::make_conv(store, "mfca.oda_head", 2 + 2 * cfg.n1, 2 * cfg.oda_groups, 3, 1, group,
                             nn::Init::kZero);
  for (int s = 0; s < 3; ++s) {
    const std::string p = "mfca.fuse" + std::to_string(s);
    m.fuse_a[static_cast<size_t>(s)] = nn::make_conv(store, p + ".a", 2 * n[s], n[s], 3, 1, group);
    m.fuse_b[static_cast<size_t>(s)] = nn::make_conv(store, p + ".b", n[s], n[s], 3, 1, group, nn::Init::kLecun);
  }
  return m;
}

}  // namespace sevc::mfca
