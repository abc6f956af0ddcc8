#pragma once

#include <filesystem>
#include <memory>
#include <optional>
#include <stdexcept>
#include <vector>

#include "sevc/frame_io.hpp"
#include "sevc/model.hpp"

namespace sevc::train {

enum class Stage { kBase, kAugment, kJoint };

Stage parse_stage(const std::string& s);
std::string stage_name(Stage s);

inline constexpr size_t kWeightPeriod = 4;

struct TrainConfig {
  double lambda = 95;
  double w_l = 0.05;
  int group_len = 5;  // 1 I-frame + (group_len - 1) P-frames
  Stage stage = Stage::kJoint;
  std::vector<double> quality_weights = {1.2, 0.5, 0.5, 0.5};
  int steps = 200;
  double lr = 1e-3;
  double clip_norm = 10.0;
  uint64_t seed = 1;
  bool noise = true;  // false: identity quantizer (gradient checks)
  std::filesystem::path dump_dir;  // where a failing batch is written

  void validate() const;
  nlohmann::json to_json() const;
  static TrainConfig from_json(const nlohmann::json& j);
};

class TrainingError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Cyclic lookup of the per-frame quality weight.
double hierarchical_weight(int64_t t, const std::vector<double>& weights);

// Per-frame loss ingredients. D terms are MSE on [0,1] RGB; R terms are bits
// per full-resolution pixel.
struct FrameTerms {
  bool intra = false;
  double weight = 1;
  nn::Var d, d_base, r, r_base;
};

struct GroupForward {
  std::vector<FrameTerms> terms;
  std::vector<FrameResult> frames;
};

// Codes one group (first frame intra) with the given resolver.
GroupForward forward_group(const Model& model, const std::vector<nn::Var>& frames, const codec::Resolver& resolve,
                           const std::vector<double>& weights);

// (1/T) sum_t w_t lambda D + R. Base stage uses the base terms on P-frames;
// otherwise the full terms. I-frames always contribute their intra terms.
// total_rate adds base bits to R on P-frames.
nn::Var loss_independent(const GroupForward& g, Stage stage, double lambda, bool total_rate = false);
// (1/T) sum_t w_t lambda (D + w_l D_b) + R, R including base bits.
nn::Var loss_joint(const GroupForward& g, double lambda, double w_l);
nn::Var stage_loss(const GroupForward& g, const TrainConfig& cfg);

struct StepReport {
  double loss = 0;
  double d = 0, d_base = 0;  // mean over P-frames
  double r = 0, r_base = 0;  // mean over P-frames, bpp
  double base_bit_fraction = 0;
  double grad_norm = 0;
};

StepReport summarize(const GroupForward& g, double loss);

// Parameter groups updated in a stage.
std::vector<std::string> trainable_groups(Stage s);

class Trainer {
 public:
  Trainer(Model& model, const TrainConfig& cfg);
  // One optimization step on a group of equally sized frames (padded to 64).
  StepReport step(const std::vector<Frame>& group);
  const TrainConfig& config() const { return cfg_; }

 private:
  Model& model_;
  TrainConfig cfg_;
  nn::Adam adam_;
  nn::Rng rng_;
};

// Deterministic synthetic clip: a textured background under global motion
// plus a textured disc moving with its own velocity.
std::vector<Frame> synthetic_clip(int h, int w, int n, uint64_t seed);

// Self-describing weight file: magic, version, JSON header, raw doubles.
inline constexpr uint32_t kCheckpointVersion = 1;
void save_checkpoint(const std::filesystem::path& path, const Model& model, const nlohmann::json& meta = {});
struct Checkpoint {
  std::unique_ptr<Model> model;
  nlohmann::json meta;
};
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace sevc::train
