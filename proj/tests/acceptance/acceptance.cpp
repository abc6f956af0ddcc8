// Acceptance suite: one PASS/FAIL line per criterion. Arguments select
// criteria by number (default: all). Exit status is non-zero if any fail.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <map>
#include <numeric>
#include <random>
#include <set>
#include <string>

#include "bd_oracle.hpp"
#include "gradcheck.hpp"
#include "sevc/eval.hpp"
#include "sevc/info_theory.hpp"
#include "sevc/motion_ops.hpp"
#include "sevc/rans_c.h"
#include "sevc/session.hpp"
#include "sevc/training.hpp"

using namespace sevc;
using namespace sevc::nn;
using Clock = std::chrono::steady_clock;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof(buf), f, args...);
  return buf;
}

// 1. Entropy decomposition -------------------------------------------------

Outcome entropy_decomposition() {
  const auto t0 = Clock::now();
  const info::TrialSummary s = info::run_trials(1000, 2024);
  const double secs = seconds_since(t0);
  return {s.trials == 1000 && s.max_residual <= 1e-9 && secs < 10.0,
          fmt("trials %zu max residual %.3e time %.2f s", s.trials, s.max_residual, secs)};
}

// 2. Codec roundtrip ---------------------------------------------------------

bool same_decode(const Model& m, const session::EncodeResult& enc, std::string* why) {
  const auto bytes = bitstream::write_container(enc.container);
  const auto dec = session::decode_video(m, bitstream::read_container(bytes));
  if (dec.raw_frames.size() != enc.raw_recon.size()) {
    *why = "frame count differs";
    return false;
  }
  for (size_t t = 0; t < dec.raw_frames.size(); ++t) {
    if (!(dec.raw_frames[t] == enc.raw_recon[t]) || dec.state_digests[t] != enc.state_digests[t]) {
      *why = fmt("frame %zu differs", t);
      return false;
    }
  }
  return true;
}

Outcome codec_roundtrip() {
  const auto t0 = Clock::now();
  Model m(ModelConfig::preset_named("desk"));
  std::string why;
  const auto clip = train::synthetic_clip(64, 64, 9, 21);
  for (int li = 0; li < 4; ++li) {
    session::EncodeOptions opt;
    opt.lambda_index = li;
    if (!same_decode(m, session::encode_video(m, clip, opt), &why))
      return {false, fmt("lambda %g: %s", kLambdas[static_cast<size_t>(li)], why.c_str())};
  }
  const auto long_clip = train::synthetic_clip(64, 64, 96, 22);
  const auto enc = session::encode_video(m, long_clip, {});
  if (!same_decode(m, enc, &why)) return {false, "96 frames, single intra: " + why};
  const double secs = seconds_since(t0);
  return {secs < 300, fmt("4 lambdas x 9 frames and 96 frames bit-exact, time %.1f s", secs)};
}

// 3. Rate fidelity -----------------------------------------------------------

Outcome rate_fidelity() {
  Model m(ModelConfig::preset_named("desk"));
  std::mt19937_64 rng(31);
  double worst_margin = 1e300;
  size_t frames = 0;
  for (int clip_i = 0; clip_i < 20; ++clip_i) {
    const int h = 64 + 16 * static_cast<int>(rng() % 3), w = 64 + 16 * static_cast<int>(rng() % 3);
    const auto clip = train::synthetic_clip(h, w, 5, rng());
    session::EncodeOptions opt;
    opt.lambda_index = static_cast<int>(rng() % 4);
    const auto enc = session::encode_video(m, clip, opt);
    for (const auto& s : enc.stats) {
      const double est = s.estimated_bits() / 8.0;
      const double allowed = 0.02 * est + 32.0;
      const double err = std::abs(static_cast<double>(s.record_bytes) - est);
      worst_margin = std::min(worst_margin, allowed - err);
      ++frames;
      if (err > allowed)
        return {false, fmt("clip %d: %zu bytes vs %.1f estimated (allowed %.1f)", clip_i, s.record_bytes, est, allowed)};
    }
  }
  return {true, fmt("%zu frames, smallest margin %.1f B", frames, worst_margin)};
}

// 4. Reference coder ---------------------------------------------------------

// Random cdf over the full alphabet; every symbol keeps frequency >= 1.
std::vector<uint16_t> random_cdf(std::mt19937_64& rng, std::vector<double>* pmf) {
  const int k = SEVC_RANS_STRIDE;
  std::vector<double> w(k);
  const int live = 1 + static_cast<int>(rng() % 16);
  const int first = static_cast<int>(rng() % (k - live));
  std::uniform_real_distribution<double> u(0.05, 1.0);
  double sum = 0;
  for (int i = first; i < first + live; ++i) sum += w[static_cast<size_t>(i)] = u(rng);
  const uint32_t spare = 65536 - k;
  std::vector<uint32_t> freq(k, 1);
  uint32_t given = 0;
  for (int i = first; i < first + live; ++i) {
    const auto f = static_cast<uint32_t>(std::floor(spare * w[static_cast<size_t>(i)] / sum));
    freq[static_cast<size_t>(i)] += f;
    given += f;
  }
  freq[static_cast<size_t>(first)] += spare - given;
  std::vector<uint16_t> cdf(k);
  uint32_t acc = 0;
  pmf->assign(k, 0.0);
  for (int i = 0; i < k; ++i) {
    cdf[static_cast<size_t>(i)] = static_cast<uint16_t>(acc);
    acc += freq[static_cast<size_t>(i)];
    (*pmf)[static_cast<size_t>(i)] = freq[static_cast<size_t>(i)] / 65536.0;
  }
  return cdf;
}

Outcome reference_coder() {
  std::mt19937_64 rng(41);
  for (int trial = 0; trial < 10000; ++trial) {
    const size_t n = rng() % 300;
    const int tables = 1 + static_cast<int>(rng() % 3);
    std::vector<uint16_t> blob;
    std::vector<std::discrete_distribution<int>> dists;
    for (int t = 0; t < tables; ++t) {
      std::vector<double> pmf;
      const auto cdf = random_cdf(rng, &pmf);
      blob.insert(blob.end(), cdf.begin(), cdf.end());
      dists.emplace_back(pmf.begin(), pmf.end());
    }
    // Each position uses its own row of the blob; rows cycle over the tables.
    std::vector<uint16_t> rows;
    std::vector<int16_t> sym(n);
    for (size_t i = 0; i < n; ++i) {
      const size_t t = i % static_cast<size_t>(tables);
      rows.insert(rows.end(), blob.begin() + static_cast<long>(t * SEVC_RANS_STRIDE),
                  blob.begin() + static_cast<long>((t + 1) * SEVC_RANS_STRIDE));
      sym[i] = static_cast<int16_t>(dists[t](rng) - 256);
    }
    std::vector<uint8_t> out(sevc_rans_encode_bound(n));
    size_t len = 0;
    if (sevc_rans_encode(sym.data(), n, rows.data(), rows.size(), out.data(), out.size(), &len) != SEVC_RANS_OK)
      return {false, fmt("trial %d: encode failed", trial)};
    std::vector<int16_t> back(n, 999);
    if (sevc_rans_decode(out.data(), len, n, rows.data(), rows.size(), back.data()) != SEVC_RANS_OK || back != sym)
      return {false, fmt("trial %d: decode mismatch", trial)};
  }

  const size_t n = 200000;
  std::vector<uint16_t> row(SEVC_RANS_STRIDE);
  const uint32_t half = (65536 - (SEVC_RANS_STRIDE - 2)) / 2;
  uint32_t acc = 0;
  for (int i = 0; i < SEVC_RANS_STRIDE; ++i) {
    row[static_cast<size_t>(i)] = static_cast<uint16_t>(acc);
    acc += (i == 256 || i == 257) ? half : 1;
  }
  std::vector<uint16_t> rows;
  std::vector<int16_t> sym(n);
  for (size_t i = 0; i < n; ++i) {
    rows.insert(rows.end(), row.begin(), row.end());
    sym[i] = static_cast<int16_t>(rng() & 1);
  }
  std::vector<uint8_t> out(sevc_rans_encode_bound(n));
  size_t len = 0;
  if (sevc_rans_encode(sym.data(), n, rows.data(), rows.size(), out.data(), out.size(), &len) != SEVC_RANS_OK)
    return {false, "uniform binary encode failed"};
  const double bps = 8.0 * static_cast<double>(len) / static_cast<double>(n);
  return {std::abs(bps - 1.0) <= 0.06, fmt("10000 roundtrips exact, uniform binary %.4f bit/symbol", bps)};
}

// 5. Identity at init ----------------------------------------------------------

Outcome identity_at_init() {
  Model m(ModelConfig::preset_named("desk"));
  const auto clip = train::synthetic_clip(64, 64, 5, 51);
  const auto resolve = codec::training_resolver(nullptr);
  StreamState s;
  Var x0 = constant(clip[0].pixels);
  m.code_intra(&x0, 64, 64, s, resolve);
  for (size_t t = 1; t < clip.size(); ++t) {
    Var x = constant(clip[t].pixels);
    const auto r = m.code_predicted(&x, s, resolve);
    const Var up = motion::rescale_flow_up2(motion::rescale_flow_up2(r.refs.base_mv));
    if (!(r.contexts.motions[0].value() == up.value())) return {false, fmt("frame %zu: refined motion differs", t)};
    if (!(r.latent_prior.value() == r.upsampled_latent.value()))
      return {false, fmt("frame %zu: latent prior differs from upsampled latent", t)};
  }
  return {true, "desk model, 4 P-frames: motion and latent prior exact"};
}

// 6. Gradient checks -----------------------------------------------------------

Outcome gradient_checks() {
  Model m(ModelConfig::preset_named("toy"));
  const size_t params = m.params().count();
  Rng rng(61);
  for (auto& p : m.params().params())
    for (double& v : p.var.mutable_value().values()) v += rng.uniform(-0.05, 0.05);
  std::vector<Var> xs;
  for (const Frame& f : train::synthetic_clip(64, 64, 3, 61)) xs.push_back(constant(f.pixels));
  const auto weights = train::TrainConfig{}.quality_weights;
  Rng unused(0);
  const auto resolve = codec::training_resolver(&unused, entropy::Relax::kIdentity);

  struct Case {
    const char* name;
    train::Stage stage;
    std::function<Var(const train::GroupForward&)> loss;
  };
  const std::vector<Case> cases = {
      {"independent/base", train::Stage::kBase,
       [](const train::GroupForward& g) { return train::loss_independent(g, train::Stage::kBase, 95); }},
      {"independent/augment", train::Stage::kAugment,
       [](const train::GroupForward& g) { return train::loss_independent(g, train::Stage::kAugment, 95); }},
      {"joint", train::Stage::kJoint, [](const train::GroupForward& g) { return train::loss_joint(g, 95, 0.05); }},
  };
  std::string detail = fmt("toy model %zu params;", params);
  bool pass = params <= 10000;
  for (const Case& c : cases) {
    m.params().set_trainable_groups(train::trainable_groups(c.stage));
    std::vector<Var> leaves;
    std::map<std::string, int> taken;
    for (auto& p : m.params().params()) {
      if (!p.trainable || p.name.find(".bias") != std::string::npos) continue;
      const std::string head = p.name.substr(0, p.name.find('.'));
      if (taken[head]++ < 3) leaves.push_back(p.var);
    }
    auto fn = [&] { return c.loss(train::forward_group(m, xs, resolve, weights)); };
    const auto r = testing::grad_check(fn, leaves, 3, 1e-6, 1e-4, 61, 1e-7);
    pass = pass && r.checked > 10 && r.zero_leaves == 0 && r.max_rel_err <= 1e-3;
    detail += fmt(" %s %zu leaves %d coords max rel err %.2e;", c.name, leaves.size(), r.checked, r.max_rel_err);
    if (r.zero_leaves > 0) detail += fmt(" %d leaves without gradient;", r.zero_leaves);
  }
  detail.pop_back();
  return {pass, detail};
}

// 7 and 8. Short training runs on the tiny preset -----------------------------

struct RunResult {
  std::vector<double> losses;
  std::vector<double> fractions;
  std::vector<double> p_psnr;  // coded P-frames after training
  double coded_fraction = 0;
  double seconds = 0;
};

RunResult overfit_run(double w_l) {
  const auto t0 = Clock::now();
  Model m(ModelConfig::preset_named("tiny"));
  train::TrainConfig tc;
  tc.stage = train::Stage::kJoint;
  tc.lambda = 50;
  tc.lr = 2e-3;
  tc.w_l = w_l;
  tc.group_len = 9;
  tc.steps = 200;
  const auto clip = train::synthetic_clip(64, 64, 9, 7);
  train::Trainer tr(m, tc);
  RunResult r;
  for (int s = 0; s < tc.steps; ++s) {
    const auto rep = tr.step(clip);
    r.losses.push_back(rep.loss);
    r.fractions.push_back(rep.base_bit_fraction);
  }
  const auto enc = session::encode_video(m, clip, {});
  double base = 0, total = 0;
  for (size_t t = 1; t < clip.size(); ++t) {
    r.p_psnr.push_back(eval::psnr_rgb(enc.recon[t], clip[t]));
    base += enc.stats[t].base_bits();
    total += enc.stats[t].estimated_bits();
  }
  r.coded_fraction = base / total;
  r.seconds = seconds_since(t0);
  return r;
}

double mean_tail(const std::vector<double>& v, size_t n) {
  return std::accumulate(v.end() - static_cast<long>(n), v.end(), 0.0) / static_cast<double>(n);
}

Outcome overfit() {
  const RunResult r = overfit_run(train::TrainConfig{}.w_l);
  const double first = r.losses.front(), last = mean_tail(r.losses, 10);
  const double reduction = 1.0 - last / first;
  const int lag = eval::dominant_lag(r.p_psnr, 4);

  // Phase of the heaviest weight must be the phase of the best mean PSNR.
  const auto& w = train::TrainConfig{}.quality_weights;
  std::vector<double> phase_psnr(train::kWeightPeriod, 0.0);
  for (size_t i = 0; i < r.p_psnr.size(); ++i) phase_psnr[(i + 1) % train::kWeightPeriod] += r.p_psnr[i];
  const auto best_phase = std::max_element(phase_psnr.begin(), phase_psnr.end()) - phase_psnr.begin();
  const auto heavy_phase = std::max_element(w.begin(), w.end()) - w.begin();

  std::string series;
  for (double p : r.p_psnr) series += fmt(" %.2f", p);
  return {reduction >= 0.5 && lag == 4 && best_phase == heavy_phase,
          fmt("loss %.3f -> %.3f (-%.1f%%), P-frame PSNR%s, dominant lag %d, best phase %ld (weight phase %ld), %.0f s",
              first, last, 100 * reduction, series.c_str(), lag, static_cast<long>(best_phase),
              static_cast<long>(heavy_phase), r.seconds)};
}

Outcome ablation() {
  const auto t0 = Clock::now();
  const RunResult off = overfit_run(0.0), on = overfit_run(1.0);
  const double f0 = mean_tail(off.fractions, 20), f1 = mean_tail(on.fractions, 20);
  const double secs = seconds_since(t0);
  return {f1 > f0 && secs < 1800,
          fmt("base bit fraction w_l=0 %.3f, w_l=1 %.3f (coded %.3f vs %.3f), %.0f s", f0, f1, off.coded_fraction,
              on.coded_fraction, secs)};
}

// 9. BD-rate -----------------------------------------------------------------

Outcome bd_rate() {
  std::mt19937_64 rng(91);
  const auto anchor = testing::random_curve(rng, 4);
  const double same = eval::bd_rate(anchor, anchor);
  const double doubled = eval::bd_rate(testing::scaled(anchor, 2.0), anchor);
  double worst = 0;
  for (int i = 0; i < 200; ++i) {
    const auto a = testing::random_curve(rng, 4 + rng() % 3);
    auto b = testing::random_curve(rng, 4 + rng() % 3);
    const double shift = std::uniform_real_distribution<double>(-1.0, 1.0)(rng);
    for (auto& p : b) p.psnr += shift;
    const double lo = std::max(a.front().psnr, b.front().psnr), hi = std::min(a.back().psnr, b.back().psnr);
    if (hi - lo < 0.5) continue;
    const double got = eval::bd_rate(b, a), want = testing::oracle_bd(b, a);
    worst = std::max(worst, std::abs(got - want) / std::max(1.0, std::abs(want)));
  }
  return {std::abs(same) <= 1e-9 && std::abs(doubled - 100.0) <= 0.1 && worst <= 1e-6,
          fmt("identical %.2e%%, doubled rate %.6f%%, worst deviation from integration oracle %.2e", same, doubled,
              worst)};
}

// 10. AEPE -------------------------------------------------------------------

Outcome aepe() {
  Tensor flow({2, 16, 24}), zero({2, 16, 24}, 0.0);
  for (int y = 0; y < 16; ++y)
    for (int x = 0; x < 24; ++x) {
      flow.at(0, y, x) = 3.0;
      flow.at(1, y, x) = 4.0;
    }
  const double constant_case = eval::aepe(flow, zero);

  std::mt19937_64 rng(101);
  std::normal_distribution<double> g(0.0, 3.0);
  double worst = 0;
  for (int trial = 0; trial < 50; ++trial) {
    const int h = 4 + static_cast<int>(rng() % 30), w = 4 + static_cast<int>(rng() % 30);
    Tensor a({2, h, w}), b({2, h, w});
    for (double& v : a.values()) v = g(rng);
    for (double& v : b.values()) v = g(rng);
    const Tensor mask = eval::large_motion_mask(b, 2.0);
    double sum = 0, sum_m = 0;
    int count_m = 0;
    for (int y = 0; y < h; ++y)
      for (int x = 0; x < w; ++x) {
        const double e = std::hypot(a.at(0, y, x) - b.at(0, y, x), a.at(1, y, x) - b.at(1, y, x));
        sum += e;
        if (std::hypot(b.at(0, y, x), b.at(1, y, x)) > 2.0) {
          sum_m += e;
          ++count_m;
        }
      }
    worst = std::max(worst, std::abs(eval::aepe(a, b) - sum / (h * w)));
    if (count_m > 0) worst = std::max(worst, std::abs(eval::aepe(a, b, &mask) - sum_m / count_m));
  }
  return {std::abs(constant_case - 5.0) <= 1e-12 && worst <= 1e-6,
          fmt("(3,4) vs zero %.12f, loop oracle max deviation %.2e", constant_case, worst)};
}

}  // namespace

int main(int argc, char** argv) {
  const std::vector<std::pair<const char*, std::function<Outcome()>>> criteria = {
      {"entropy decomposition", entropy_decomposition},
      {"codec roundtrip", codec_roundtrip},
      {"rate fidelity", rate_fidelity},
      {"reference coder", reference_coder},
      {"identity at init", identity_at_init},
      {"gradient checks", gradient_checks},
      {"overfit and periodic quality", overfit},
      {"base-loss weight ablation", ablation},
      {"bd-rate", bd_rate},
      {"aepe", aepe},
  };
  std::set<int> only;
  for (int i = 1; i < argc; ++i) only.insert(std::stoi(argv[i]));
  int failed = 0;
  for (size_t i = 0; i < criteria.size(); ++i) {
    const int id = static_cast<int>(i) + 1;
    if (!only.empty() && !only.count(id)) continue;
    Outcome o;
    try {
      o = criteria[i].second();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    failed += !o.pass;
    std::printf("[%s] %2d %s: %s\n", o.pass ? "PASS" : "FAIL", id, criteria[i].first, o.detail.c_str());
    std::fflush(stdout);
  }
  return failed == 0 ? 0 : 1;
}
