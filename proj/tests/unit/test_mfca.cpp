#include "doctest.h"
#include "gradcheck.hpp"
#include "sevc/mfca.hpp"

using namespace sevc;
using namespace sevc::nn;
using sevc::testing::grad_check;
using sevc::testing::random_tensor;

namespace {

ModelConfig toy() {
  ModelConfig c = ModelConfig::preset_named("toy");
  c.n1 = c.n2 = c.n3 = 4;
  c.latent_channels = 4;
  c.attn_heads = 2;
  return c;
}

void randomize(ParamStore& store, uint64_t seed, double amp = 0.3) {
  Rng rng(seed);
  for (auto& p : store.params())
    for (double& v : p.var.mutable_value().values()) v = rng.uniform(-amp, amp);
}

}  // namespace

TEST_CASE("augment unit is zero at init and keeps resolution") {
  ParamStore store(1);
  auto au = mfca::make_augment_unit(store, "au", 6, 4, 2, "g");
  Rng rng(1);
  Var x = constant(random_tensor({6, 8, 12}, rng));
  Var y = au(x);
  CHECK(y.shape() == std::vector<int>{2, 8, 12});
  for (double v : y.value().values()) CHECK(v == 0.0);
  CHECK_THROWS_AS(au(constant(random_tensor({5, 8, 12}, rng))), ShapeError);
}

TEST_CASE("augment unit gradients") {
  ParamStore store(2);
  auto au = mfca::make_augment_unit(store, "au", 3, 2, 2, "g");
  randomize(store, 2);
  Rng rng(2);
  Var x(random_tensor({3, 8, 8}, rng), true);
  Tensor probe = random_tensor({2, 8, 8}, rng);
  auto r = grad_check([&] { return sum(mul(au(x), constant(probe))); },
                      {x, au.down1.weight, au.trunk1.weight, au.up2.conv.weight}, 12);
  CHECK(r.max_rel_err < 1e-4);
}

TEST_CASE("extractor pyramid shapes and zero map") {
  ParamStore store(3);
  auto m = mfca::make_mfca(store, toy(), "g");
  mfca::Pyramid p = m.extract(constant(Tensor({4, 16, 16}, 0.0)));
  CHECK(p[0].shape() == std::vector<int>{4, 16, 16});
  CHECK(p[1].shape() == std::vector<int>{4, 8, 8});
  CHECK(p[2].shape() == std::vector<int>{4, 4, 4});
  for (const auto& v : p)
    for (double x : v.value().values()) CHECK(x == 0.0);
}

TEST_CASE("augment stage is the identity at init and rejects scale mismatch") {
  ParamStore store(4);
  auto m = mfca::make_mfca(store, toy(), "g");
  Rng rng(4);
  Var motion = constant(random_tensor({2, 4, 4}, rng, -2, 2));
  Var feature = constant(random_tensor({4, 4, 4}, rng));
  Var temporal = constant(random_tensor({4, 4, 4}, rng));
  auto o = m.stages[2][0](motion, feature, temporal);
  CHECK(o.motion.value() == motion.value());
  CHECK(o.feature.value() == feature.value());
  CHECK_THROWS_AS(m.stages[2][0](motion, feature, constant(random_tensor({4, 8, 8}, rng))), ShapeError);
}

TEST_CASE("mfca at init reproduces rescaled base motion and upsampled feature") {
  ParamStore store(5);
  const ModelConfig cfg = toy();
  auto m = mfca::make_mfca(store, cfg, "g");
  Rng rng(5);
  Var base_mv = constant(random_tensor({2, 4, 4}, rng, -1.5, 1.5));
  Var spatial = constant(random_tensor({4, 4, 4}, rng));
  Var temporal = constant(random_tensor({4, 16, 16}, rng));
  auto cs = m(base_mv, spatial, temporal);

  CHECK(cs.motions[2].value() == base_mv.value());
  Var mv1 = motion::rescale_flow_up2(base_mv);
  CHECK(cs.motions[1].value() == mv1.value());
  CHECK(cs.motions[0].value() == motion::rescale_flow_up2(mv1).value());
  CHECK(cs.features[1].value() == m.up_2to1(spatial).value());
  CHECK(cs.features[0].value() == m.up_1to0(m.up_2to1(spatial)).value());
  CHECK(cs.contexts[0].shape() == std::vector<int>{4, 16, 16});
  CHECK(cs.contexts[1].shape() == std::vector<int>{4, 8, 8});
  CHECK(cs.contexts[2].shape() == std::vector<int>{4, 4, 4});
}

TEST_CASE("mfca without augment stages and single group") {
  ModelConfig cfg = toy();
  cfg.stages_per_scale = 0;
  cfg.oda_groups = 1;
  ParamStore store(6);
  auto m = mfca::make_mfca(store, cfg, "g");
  Rng rng(6);
  Var base_mv = constant(random_tensor({2, 4, 4}, rng));
  Var spatial = constant(random_tensor({4, 4, 4}, rng));
  Var temporal = constant(random_tensor({4, 16, 16}, rng));
  auto cs = m(base_mv, spatial, temporal);
  mfca::Pyramid tp = m.extract(temporal);
  Var aligned = motion::warp(tp[0], cs.motions[0]);
  Var expect = m.fuse_b[0](leaky_relu(m.fuse_a[0](concat({aligned, cs.features[0]}, 0))));
  CHECK(cs.contexts[0].value() == expect.value());
}

TEST_CASE("mfca is deterministic and differentiable end to end") {
  ParamStore store(7);
  auto m = mfca::make_mfca(store, toy(), "g");
  randomize(store, 7, 0.2);
  Rng rng(7);
  Var base_mv(random_tensor({2, 4, 4}, rng, -0.7, 0.7), true);
  Var spatial(random_tensor({4, 4, 4}, rng), true);
  Var temporal(random_tensor({4, 16, 16}, rng), true);
  auto a = m(base_mv, spatial, temporal);
  auto b = m(base_mv, spatial, temporal);
  for (int s = 0; s < 3; ++s) CHECK(a.contexts[s].value() == b.contexts[s].value());

  auto loss = [&] {
    auto cs = m(base_mv, spatial, temporal);
    return add(add(mean(mul(cs.contexts[0], cs.contexts[0])), mean(cs.contexts[1])), mean(cs.contexts[2]));
  };
  auto r = grad_check(loss, {spatial, temporal, m.oda_head.weight, m.stages[1][0].motion_unit.up2.conv.weight}, 8);
  CHECK(r.max_rel_err < 1e-3);
}
