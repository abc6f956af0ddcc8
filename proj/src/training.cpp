#include "sevc/training.hpp"

#include <cmath>
#include <cstring>
#include <fstream>
#include <numbers>

namespace sevc::train {

using nn::Tensor;
using nn::Var;

Stage parse_stage(const std::string& s) {
  if (s == "base") return Stage::kBase;
  if (s == "augment") return Stage::kAugment;
  if (s == "joint") return Stage::kJoint;
  throw std::invalid_argument("unknown stage: " + s + " (expected base, augment or joint)");
}

std::string stage_name(Stage s) {
  switch (s) {
    case Stage::kBase:
      return "base";
    case Stage::kAugment:
      return "augment";
    case Stage::kJoint:
      return "joint";
  }
  return "joint";
}

void TrainConfig::validate() const {
  auto need = [](bool ok, const std::string& what) {
    if (!ok) throw std::invalid_argument("train config: " + what);
  };
  need(std::find(kLambdas.begin(), kLambdas.end(), lambda) != kLambdas.end(),
       "lambda must be one of 50, 95, 200, 400");
  need(w_l >= 0, "w_l must be >= 0");
  need(group_len >= 2, "group_len must be >= 2");
  need(quality_weights.size() == kWeightPeriod, "quality_weights must hold one weight per phase (4)");
  for (double w : quality_weights) need(w > 0, "quality weights must be positive");
  need(*std::max_element(quality_weights.begin(), quality_weights.end()) >
           *std::min_element(quality_weights.begin(), quality_weights.end()),
       "quality weights must not all be equal");
  need(steps >= 0, "steps must be >= 0");
  need(lr > 0, "lr must be positive");
}

nlohmann::json TrainConfig::to_json() const {
  return {{"lambda", lambda},     {"w_l", w_l},   {"group_len", group_len},   {"stage", stage_name(stage)},
          {"quality_weights", quality_weights}, {"steps", steps}, {"lr", lr}, {"clip_norm", clip_norm},
          {"seed", seed},         {"noise", noise}, {"dump_dir", dump_dir.string()}};
}

TrainConfig TrainConfig::from_json(const nlohmann::json& j) {
  TrainConfig c;
  c.lambda = j.value("lambda", c.lambda);
  c.w_l = j.value("w_l", c.w_l);
  c.group_len = j.value("group_len", c.group_len);
  c.stage = parse_stage(j.value("stage", stage_name(c.stage)));
  c.quality_weights = j.value("quality_weights", c.quality_weights);
  c.steps = j.value("steps", c.steps);
  c.lr = j.value("lr", c.lr);
  c.clip_norm = j.value("clip_norm", c.clip_norm);
  c.seed = j.value("seed", c.seed);
  c.noise = j.value("noise", c.noise);
  c.dump_dir = j.value("dump_dir", std::string());
  c.validate();
  return c;
}

double hierarchical_weight(int64_t t, const std::vector<double>& weights) {
  if (t < 0) throw std::invalid_argument("hierarchical_weight: negative frame index");
  return weights.at(static_cast<size_t>(t % static_cast<int64_t>(weights.size())));
}

GroupForward forward_group(const Model& model, const std::vector<Var>& frames, const codec::Resolver& resolve,
                           const std::vector<double>& weights) {
  if (frames.empty()) throw std::invalid_argument("forward_group: empty group");
  GroupForward g;
  StreamState s;
  const int h = frames[0].dim(1), w = frames[0].dim(2);
  const double pixels = static_cast<double>(h) * w;
  for (size_t t = 0; t < frames.size(); ++t) {
    FrameResult r = t == 0 ? model.code_intra(&frames[t], h, w, s, resolve) : model.code_predicted(&frames[t], s, resolve);
    FrameTerms ft;
    ft.intra = r.intra;
    ft.weight = hierarchical_weight(static_cast<int64_t>(t), weights);
    ft.d = nn::mse(r.recon, frames[t]);
    ft.d_base = nn::mse(r.base_recon, r.base_input);
    if (r.intra) {
      ft.r = nn::scale(r.intra_bits, 1.0 / pixels);
      ft.r_base = nn::constant(Tensor({1}, 0.0));
    } else {
      ft.r = nn::scale(r.full_bits, 1.0 / pixels);
      ft.r_base = nn::scale(nn::add(r.motion_bits, r.base_frame_bits), 1.0 / pixels);
    }
    g.terms.push_back(ft);
    g.frames.push_back(std::move(r));
  }
  return g;
}

Var loss_independent(const GroupForward& g, Stage stage, double lambda, bool total_rate) {
  Var total = nn::constant(Tensor({1}, 0.0));
  for (const FrameTerms& f : g.terms) {
    Var term;
    if (f.intra) {
      term = nn::add(nn::scale(f.d, f.weight * lambda), f.r);
    } else if (stage == Stage::kBase) {
      term = nn::add(nn::scale(f.d_base, f.weight * lambda), f.r_base);
    } else {
      term = nn::add(nn::scale(f.d, f.weight * lambda), total_rate ? nn::add(f.r, f.r_base) : f.r);
    }
    total = nn::add(total, term);
  }
  return nn::scale(total, 1.0 / static_cast<double>(g.terms.size()));
}

Var loss_joint(const GroupForward& g, double lambda, double w_l) {
  Var total = nn::constant(Tensor({1}, 0.0));
  for (const FrameTerms& f : g.terms) {
    Var d = nn::add(f.d, nn::scale(f.d_base, w_l));
    total = nn::add(total, nn::add(nn::scale(d, f.weight * lambda), nn::add(f.r, f.r_base)));
  }
  return nn::scale(total, 1.0 / static_cast<double>(g.terms.size()));
}

Var stage_loss(const GroupForward& g, const TrainConfig& cfg) {
  return cfg.stage == Stage::kJoint ? loss_joint(g, cfg.lambda, cfg.w_l) : loss_independent(g, cfg.stage, cfg.lambda);
}

StepReport summarize(const GroupForward& g, double loss) {
  StepReport r;
  r.loss = loss;
  int n = 0;
  for (const FrameTerms& f : g.terms) {
    if (f.intra) continue;
    r.d += f.d.value()[0];
    r.d_base += f.d_base.value()[0];
    r.r += f.r.value()[0] + f.r_base.value()[0];
    r.r_base += f.r_base.value()[0];
    ++n;
  }
  if (n > 0) {
    r.d /= n;
    r.d_base /= n;
    r.r /= n;
    r.r_base /= n;
  }
  r.base_bit_fraction = r.r > 0 ? r.r_base / r.r : 0;
  return r;
}

std::vector<std::string> trainable_groups(Stage s) {
  switch (s) {
    case Stage::kBase:
      return {kBaseGroup};
    case Stage::kAugment:
      return {kAugmentGroup};
    case Stage::kJoint:
      return {kBaseGroup, kAugmentGroup};
  }
  return {};
}

Trainer::Trainer(Model& model, const TrainConfig& cfg)
    : model_(model), cfg_(cfg), adam_({cfg.lr, 0.9, 0.999, 1e-8, cfg.clip_norm}), rng_(cfg.seed) {
  cfg_.validate();
  model_.params().set_trainable_groups(trainable_groups(cfg_.stage));
}

namespace {

void dump_batch(const std::filesystem::path& dir, const std::vector<Frame>& group) {
  if (dir.empty()) return;
  std::filesystem::create_directories(dir);
  std::vector<YuvFrame> yuv;
  for (const Frame& f : group) yuv.push_back(rgb_to_yuv_bt601(f));
  write_yuv420(dir / "failed_batch.yuv", yuv);
}

}  // namespace

StepReport Trainer::step(const std::vector<Frame>& group) {
  if (static_cast<int>(group.size()) < 2) throw std::invalid_argument("train step: group needs >= 2 frames");
  std::vector<Var> xs;
  for (const Frame& f : group) xs.push_back(nn::constant(pad_to_64(f).first.pixels));
  const codec::Resolver resolve =
      codec::training_resolver(&rng_, cfg_.noise ? entropy::Relax::kNoise : entropy::Relax::kIdentity);
  GroupForward g = forward_group(model_, xs, resolve, cfg_.quality_weights);
  Var loss = stage_loss(g, cfg_);
  const double lv = loss.value()[0];
  StepReport rep = summarize(g, lv);
  if (!std::isfinite(lv)) {
    dump_batch(cfg_.dump_dir, group);
    throw TrainingError("non-finite loss at step " + std::to_string(adam_.steps()) + " (D " +
                        std::to_string(rep.d) + ", D_b " + std::to_string(rep.d_base) + ", R " +
                        std::to_string(rep.r) + ", R_b " + std::to_string(rep.r_base) + ")");
  }
  loss.backward();
  rep.grad_norm = adam_.step(model_.params().params());
  return rep;
}

std::vector<Frame> synthetic_clip(int h, int w, int n, uint64_t seed) {
  nn::Rng rng(seed);
  const double pi = std::numbers::pi;
  struct Wave {
    double fx, fy, phase, amp;
  };
  std::array<std::array<Wave, 3>, 3> bg{};
  for (auto& ch : bg)
    for (auto& wv : ch) wv = {rng.uniform(-0.35, 0.35), rng.uniform(-0.35, 0.35), rng.uniform(0, 2 * pi), rng.uniform(0.04, 0.12)};
  std::array<double, 3> base_color{rng.uniform(0.3, 0.7), rng.uniform(0.3, 0.7), rng.uniform(0.3, 0.7)};
  std::array<double, 3> disc_color{rng.uniform(0.1, 0.9), rng.uniform(0.1, 0.9), rng.uniform(0.1, 0.9)};
  const double gvx = rng.uniform(-1.5, 1.5), gvy = rng.uniform(-1.5, 1.5);
  const double dvx = rng.uniform(-2.5, 2.5), dvy = rng.uniform(-2.5, 2.5);
  const double cx0 = rng.uniform(0.3, 0.7) * w, cy0 = rng.uniform(0.3, 0.7) * h;
  const double radius = rng.uniform(0.12, 0.25) * std::min(h, w);
  const double stripe = rng.uniform(0.3, 0.8);
  const double block = 8.0 * (1 + static_cast<int>(rng.next() % 2));

  std::vector<Frame> clip;
  for (int t = 0; t < n; ++t) {
    Frame f(h, w);
    const double cx = cx0 + dvx * t, cy = cy0 + dvy * t;
    for (int y = 0; y < h; ++y)
      for (int x = 0; x < w; ++x) {
        const double bx = x - gvx * t, by = y - gvy * t;
        const double check = (static_cast<int64_t>(std::floor(bx / block)) + static_cast<int64_t>(std::floor(by / block))) % 2 == 0 ? 0.06 : -0.06;
        const double dx = x - cx, dy = y - cy;
        const double r = std::sqrt(dx * dx + dy * dy);
        const double inside = std::clamp(radius - r + 0.5, 0.0, 1.0);
        for (int c = 0; c < 3; ++c) {
          double v = base_color[static_cast<size_t>(c)] + check;
          for (const Wave& wv : bg[static_cast<size_t>(c)]) v += wv.amp * std::sin(wv.fx * bx + wv.fy * by + wv.phase);
          const double d = disc_color[static_cast<size_t>(c)] + 0.15 * std::sin(stripe * (dx + 0.5 * dy));
          v = (1 - inside) * v + inside * d;
          f.pixels.at(c, y, x) = std::clamp(v, 0.0, 1.0);
        }
      }
    clip.push_back(std::move(f));
  }
  return clip;
}

namespace {

constexpr char kCheckpointMagic[8] = {'S', 'E', 'V', 'C', 'C', 'K', 'P', 'T'};

}  // namespace

void save_checkpoint(const std::filesystem::path& path, const Model& model, const nlohmann::json& meta) {
  nlohmann::json header;
  header["config"] = model.config().to_json();
  header["meta"] = meta;
  header["hash"] = model.hash();
  nlohmann::json params = nlohmann::json::array();
  for (const auto& p : model.params().params()) params.push_back({{"name", p.name}, {"shape", p.var.shape()}});
  header["params"] = params;
  const std::string text = header.dump();

  const std::filesystem::path tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary);
    if (!out) throw std::runtime_error("checkpoint: cannot write " + tmp.string());
    out.write(kCheckpointMagic, sizeof(kCheckpointMagic));
    const uint32_t version = kCheckpointVersion;
    const uint64_t len = text.size();
    out.write(reinterpret_cast<const char*>(&version), sizeof(version));
    out.write(reinterpret_cast<const char*>(&len), sizeof(len));
    out.write(text.data(), static_cast<std::streamsize>(text.size()));
    for (const auto& p : model.params().params()) {
      const Tensor& t = p.var.value();
      out.write(reinterpret_cast<const char*>(t.data()), static_cast<std::streamsize>(t.size() * sizeof(double)));
    }
    if (!out) throw std::runtime_error("checkpoint: write failed for " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("checkpoint: cannot open " + path.string());
  char magic[8];
  uint32_t version = 0;
  uint64_t len = 0;
  in.read(magic, sizeof(magic));
  in.read(reinterpret_cast<char*>(&version), sizeof(version));
  in.read(reinterpret_cast<char*>(&len), sizeof(len));
  if (!in || std::memcmp(magic, kCheckpointMagic, sizeof(magic)) != 0) {
    throw std::runtime_error("checkpoint: " + path.string() + " is not a checkpoint file");
  }
  if (version != kCheckpointVersion) {
    throw std::runtime_error("checkpoint: unsupported version " + std::to_string(version));
  }
  if (len > (1u << 26)) throw std::runtime_error("checkpoint: header too large");
  std::string text(len, '\0');
  in.read(text.data(), static_cast<std::streamsize>(len));
  if (!in) throw std::runtime_error("checkpoint: truncated header");
  const nlohmann::json header = nlohmann::json::parse(text);

  Checkpoint ck;
  ck.meta = header.value("meta", nlohmann::json::object());
  ck.model = std::make_unique<Model>(ModelConfig::from_json(header.at("config")));
  auto& params = ck.model->params().params();
  const auto& listed = header.at("params");
  if (listed.size() != params.size()) throw std::runtime_error("checkpoint: parameter count does not match model");
  for (size_t i = 0; i < params.size(); ++i) {
    if (listed[i].at("name") != params[i].name || listed[i].at("shape").get<std::vector<int>>() != params[i].var.shape()) {
      throw std::runtime_error("checkpoint: parameter " + params[i].name + " does not match");
    }
    Tensor& t = params[i].var.mutable_value();
    in.read(reinterpret_cast<char*>(t.data()), static_cast<std::streamsize>(t.size() * sizeof(double)));
    if (!in) throw std::runtime_error("checkpoint: truncated weights");
  }
  if (in.peek() != std::char_traits<char>::eof()) throw std::runtime_error("checkpoint: trailing bytes");
  if (header.contains("hash") && header["hash"].get<uint64_t>() != ck.model->hash()) {
    throw std::runtime_error("checkpoint: weight digest mismatch");
  }
  return ck;
}

}  // namespace sevc::train
