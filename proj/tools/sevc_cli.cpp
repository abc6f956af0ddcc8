// Command-line front end: encode, decode, train, eval, bdrate, export-rd,
// synth, verify-info.

#include <chrono>
#include <cstdio>
#include <ctime>
#include <fstream>
#include <iostream>
#include <map>
#include <set>

#include "CLI11.hpp"
#include "json.hpp"
#include "sevc/eval.hpp"
#include "sevc/info_theory.hpp"
#include "sevc/session.hpp"
#include "sevc/training.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace sevc;

namespace {

class CliError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

bool is_yuv(const fs::path& p) { return p.extension() == ".yuv"; }

// A .yuv file (needs width, height, frames) or a folder of PNGs.
std::vector<Frame> load_video(const fs::path& path, int width, int height, int frames) {
  if (frames <= 0) throw CliError("--frames must be positive");
  if (fs::is_directory(path)) {
    auto v = read_png_sequence(path, frames);
    if ((width > 0 && v[0].width() != width) || (height > 0 && v[0].height() != height)) {
      throw CliError("PNG frames are " + std::to_string(v[0].width()) + "x" + std::to_string(v[0].height()) +
                     ", not the requested size");
    }
    return v;
  }
  if (!is_yuv(path)) throw CliError("input must be a .yuv file or a folder of PNG frames: " + path.string());
  if (width <= 0 || height <= 0) throw CliError("--width and --height are required for .yuv input");
  std::vector<Frame> v;
  for (const YuvFrame& f : read_yuv420(path, width, height, frames)) v.push_back(yuv_to_rgb_bt601(f));
  return v;
}

// .yuv path: 4:2:0 BT.601; anything else: folder of frame_NNNN.png.
void save_video(const fs::path& path, const std::vector<Frame>& frames) {
  if (is_yuv(path)) {
    std::vector<YuvFrame> yuv;
    for (const Frame& f : frames) yuv.push_back(rgb_to_yuv_bt601(f));
    write_yuv420(path, yuv);
    return;
  }
  fs::create_directories(path);
  for (size_t t = 0; t < frames.size(); ++t) {
    char name[32];
    std::snprintf(name, sizeof(name), "frame_%04zu.png", t);
    write_png(path / name, frames[t]);
  }
}

std::vector<uint8_t> read_bytes(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw CliError("cannot open " + p.string());
  return std::vector<uint8_t>(std::istreambuf_iterator<char>(in), {});
}

// Writes next to the target and renames, so failures leave no partial file.
void write_atomic(const fs::path& p, const std::string& data) {
  const fs::path tmp = p.string() + ".part";
  {
    std::ofstream out(tmp, std::ios::binary);
    if (!out) throw CliError("cannot write " + tmp.string());
    out.write(data.data(), static_cast<std::streamsize>(data.size()));
    if (!out) throw CliError("write failed: " + tmp.string());
  }
  fs::rename(tmp, p);
}

struct ModelSource {
  std::string checkpoint;
  std::string preset = "desk";
  uint64_t seed = 1;

  void add(CLI::App* app) {
    app->add_option("--checkpoint", checkpoint, "Trained weights (default: freshly initialized preset)");
    app->add_option("--preset", preset, "Model preset when no checkpoint is given")
        ->check(CLI::IsMember({"desk", "tiny", "toy", "paper_default"}));
    app->add_option("--seed", seed, "Initialization seed when no checkpoint is given");
  }
  std::unique_ptr<Model> load(json* meta = nullptr) const {
    if (!checkpoint.empty()) {
      train::Checkpoint ck = train::load_checkpoint(checkpoint);
      if (meta != nullptr) *meta = ck.meta;
      return std::move(ck.model);
    }
    return std::make_unique<Model>(ModelConfig::preset_named(preset), seed);
  }
};

std::string now_utc() {
  const std::time_t t = std::time(nullptr);
  char buf[32];
  std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", std::gmtime(&t));
  return buf;
}

// ---------------------------------------------------------------------------

struct EncodeArgs {
  std::string input, output, recon, stats;
  int width = 0, height = 0, frames = 0, ip = -1, lambda_index = 0;
  ModelSource model;
};

int run_encode(const EncodeArgs& a) {
  json meta;
  auto model = a.model.load(&meta);
  if (meta.contains("lambda") && meta["lambda"].get<double>() != kLambdas[static_cast<size_t>(a.lambda_index)]) {
    std::cerr << "warning: checkpoint was trained for lambda " << meta["lambda"] << ", header says "
              << kLambdas[static_cast<size_t>(a.lambda_index)] << "\n";
  }
  const auto frames = load_video(a.input, a.width, a.height, a.frames);
  session::EncodeOptions opt;
  opt.intra_period = a.ip;
  opt.lambda_index = a.lambda_index;
  const auto r = session::encode_video(*model, frames, opt);
  const auto bytes = bitstream::write_container(r.container);
  write_atomic(a.output, std::string(bytes.begin(), bytes.end()));

  const double pixels = static_cast<double>(frames[0].height()) * frames[0].width();
  std::ostringstream table;
  table << "frame,type,bpp,base_fraction,psnr\n";
  double base = 0, total = 0, psnr = 0;
  for (size_t t = 0; t < r.stats.size(); ++t) {
    const auto& s = r.stats[t];
    const bool intra = s.type == bitstream::FrameType::kIntra;
    const double frac = intra ? 0.0 : s.base_bits() / s.estimated_bits();
    const double p = eval::psnr_rgb(r.recon[t], frames[t]);
    if (!intra) {
      base += s.base_bits();
      total += s.estimated_bits();
    }
    psnr += p;
    char line[128];
    std::snprintf(line, sizeof(line), "%zu,%c,%.6f,%.4f,%.4f\n", t, intra ? 'I' : 'P', 8.0 * s.record_bytes / pixels, frac, p);
    table << line;
  }
  std::cout << table.str();
  std::printf("frames %zu  bytes %zu  bpp %.6f  psnr %.4f  base_fraction(P) %.4f\n", frames.size(), bytes.size(),
              8.0 * static_cast<double>(bytes.size()) / (pixels * static_cast<double>(frames.size())),
              psnr / static_cast<double>(frames.size()), total > 0 ? base / total : 0.0);
  if (!a.stats.empty()) write_atomic(a.stats, table.str());
  if (!a.recon.empty()) save_video(a.recon, r.recon);
  return 0;
}

struct DecodeArgs {
  std::string input, output;
  bool base_only = false;
  ModelSource model;
};

int run_decode(const DecodeArgs& a) {
  auto model = a.model.load();
  const auto container = bitstream::read_container(read_bytes(a.input));
  const auto r = session::decode_video(*model, container, a.base_only);
  save_video(a.output, r.frames);
  std::printf("decoded %zu frames at %dx%d%s\n", r.frames.size(), r.frames[0].width(), r.frames[0].height(),
              a.base_only ? " (base layer)" : "");
  return 0;
}

// ---------------------------------------------------------------------------

struct TrainArgs {
  std::string stage, config;
};

std::vector<Frame> training_frames(const json& c) {
  const std::string data = c.value("data", std::string("synthetic"));
  const int h = c.value("height", 64), w = c.value("width", 64), n = c.value("frames", 9);
  if (data == "synthetic") return train::synthetic_clip(h, w, n, c.value("data_seed", uint64_t{7}));
  return load_video(data, w, h, n);
}

int run_train(const TrainArgs& a) {
  std::ifstream in(a.config);
  if (!in) throw CliError("cannot open config " + a.config);
  json c = json::parse(in, nullptr, true, true);
  if (!c.is_object()) throw CliError("config must be a flat JSON object");
  c["stage"] = a.stage;
  const train::TrainConfig tc = train::TrainConfig::from_json(c);
  const fs::path output = c.value("output", std::string("sevc.ckpt"));
  const fs::path manifest_path = c.value("manifest", output.string() + ".manifest.json");
  const int log_every = std::max(1, c.value("log_every", 10));

  std::unique_ptr<Model> model;
  json stages = json::array();
  if (c.contains("init")) {
    train::Checkpoint ck = train::load_checkpoint(c["init"].get<std::string>());
    model = std::move(ck.model);
    stages = ck.meta.value("stages", json::array());
  } else {
    model = std::make_unique<Model>(ModelConfig::preset_named(c.value("preset", std::string("desk"))),
                                    c.value("model_seed", uint64_t{1}));
  }
  const std::map<train::Stage, std::string> needs = {{train::Stage::kAugment, "base"}, {train::Stage::kJoint, "augment"}};
  if (auto it = needs.find(tc.stage); it != needs.end() && !c.value("allow_stage_skip", false)) {
    const bool done = std::find(stages.begin(), stages.end(), it->second) != stages.end();
    if (!done) {
      throw CliError("stage " + train::stage_name(tc.stage) + " needs an init checkpoint that finished stage " +
                     it->second + " (set allow_stage_skip to override)");
    }
  }

  const auto frames = training_frames(c);
  if (static_cast<int>(frames.size()) < tc.group_len) throw CliError("fewer frames than group_len");
  json manifest;
  manifest["command"] = "train";
  manifest["config_file"] = a.config;
  manifest["config"] = c;
  manifest["train_config"] = tc.to_json();
  manifest["model_config"] = model->config().to_json();
  manifest["parameters"] = model->params().count();
  manifest["trainable_groups"] = train::trainable_groups(tc.stage);
  manifest["data"] = {{"frames", frames.size()}, {"height", frames[0].height()}, {"width", frames[0].width()}};
  manifest["started"] = now_utc();
  manifest["status"] = "running";
  manifest["log"] = json::array();
  auto flush = [&] { write_atomic(manifest_path, manifest.dump(2) + "\n"); };
  flush();

  train::Trainer trainer(*model, tc);
  const int windows = static_cast<int>(frames.size()) - tc.group_len + 1;
  const auto t0 = std::chrono::steady_clock::now();
  try {
    for (int s = 0; s < tc.steps; ++s) {
      const int start = (s * tc.group_len) % windows;
      std::vector<Frame> group(frames.begin() + start, frames.begin() + start + tc.group_len);
      const train::StepReport r = trainer.step(group);
      if (s % log_every == 0 || s + 1 == tc.steps) {
        manifest["log"].push_back({{"step", s}, {"loss", r.loss}, {"d", r.d}, {"d_base", r.d_base}, {"r", r.r},
                                   {"r_base", r.r_base}, {"base_bit_fraction", r.base_bit_fraction},
                                   {"grad_norm", r.grad_norm}});
        std::printf("step %d loss %.5f D %.6f D_b %.6f R %.5f R_b %.5f base %.3f\n", s, r.loss, r.d, r.d_base, r.r,
                    r.r_base, r.base_bit_fraction);
        std::fflush(stdout);
      }
    }
  } catch (const train::TrainingError& e) {
    manifest["status"] = "failed";
    manifest["error"] = e.what();
    flush();
    throw;
  }
  stages.push_back(train::stage_name(tc.stage));
  json meta = {{"stages", stages}, {"lambda", tc.lambda}, {"train_config", tc.to_json()}, {"finished", now_utc()}};
  train::save_checkpoint(output, *model, meta);
  manifest["status"] = "completed";
  manifest["finished"] = now_utc();
  manifest["seconds"] = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  manifest["checkpoint"] = output.string();
  manifest["model_hash"] = model->hash();
  flush();
  std::printf("wrote %s and %s\n", output.string().c_str(), manifest_path.string().c_str());
  return 0;
}

// ---------------------------------------------------------------------------

struct EvalArgs {
  std::string recon, orig, report, bitstream;
  int width = 0, height = 0, frames = 0;
};

int run_eval(const EvalArgs& a) {
  const auto recon = load_video(a.recon, a.width, a.height, a.frames);
  const auto orig = load_video(a.orig, a.width, a.height, a.frames);
  json rep;
  rep["frames"] = recon.size();
  rep["psnr"] = json::array();
  double sum = 0;
  for (size_t t = 0; t < recon.size(); ++t) {
    const double p = eval::psnr_rgb(recon[t], orig[t]);
    rep["psnr"].push_back(p);
    sum += p;
  }
  rep["mean_psnr"] = sum / static_cast<double>(recon.size());
  if (!a.bitstream.empty()) {
    const double bytes = static_cast<double>(fs::file_size(a.bitstream));
    rep["bitstream_bytes"] = bytes;
    rep["bpp"] = bytes * 8.0 / (static_cast<double>(recon.size()) * orig[0].height() * orig[0].width());
  }
  write_atomic(a.report, rep.dump(2) + "\n");
  std::printf("mean psnr %.4f dB over %zu frames\n", rep["mean_psnr"].get<double>(), recon.size());
  return 0;
}

struct BdArgs {
  std::string test, anchor;
};

int run_bdrate(const BdArgs& a) {
  const auto test = eval::read_rd_csv(a.test);
  const auto anchor = eval::read_rd_csv(a.anchor);
  std::set<std::pair<std::string, std::string>> tk, ak;
  for (const auto& r : test) tk.insert({r.dataset, r.codec});
  for (const auto& r : anchor) ak.insert({r.dataset, r.codec});
  std::printf("dataset,test,anchor,bd_rate_percent\n");
  int pairs = 0;
  for (const auto& [dataset, tcodec] : tk)
    for (const auto& [adataset, acodec] : ak) {
      if (adataset != dataset) continue;
      const double bd = eval::bd_rate(eval::curve_of(test, tcodec, dataset), eval::curve_of(anchor, acodec, dataset));
      std::printf("%s,%s,%s,%.4f\n", dataset.c_str(), tcodec.c_str(), acodec.c_str(), bd);
      ++pairs;
    }
  if (pairs == 0) throw CliError("the two files share no dataset");
  return 0;
}

struct ExportArgs {
  std::vector<std::string> inputs;
  std::string output;
};

int run_export(const ExportArgs& a) {
  std::vector<eval::RdRow> rows;
  for (const auto& p : a.inputs) {
    auto r = eval::read_rd_csv(p);
    rows.insert(rows.end(), r.begin(), r.end());
  }
  eval::export_rd(rows, a.output);
  std::printf("wrote %s.csv and %s.svg (%zu rows)\n", a.output.c_str(), a.output.c_str(), rows.size());
  return 0;
}

struct SynthArgs {
  std::string output;
  int width = 64, height = 64, frames = 9;
  uint64_t seed = 7;
};

int run_synth(const SynthArgs& a) {
  save_video(a.output, train::synthetic_clip(a.height, a.width, a.frames, a.seed));
  std::printf("wrote %d synthetic frames to %s\n", a.frames, a.output.c_str());
  return 0;
}

struct InfoArgs {
  size_t trials = 1000;
  uint64_t seed = 1;
};

int run_verify_info(const InfoArgs& a) {
  const auto s = info::run_trials(a.trials, a.seed);
  const bool ok = s.max_residual <= 1e-9;
  std::printf("trials %zu  max |H(X) - H(X_b) - H(X|X_b)| %.3e  time %.3f s  %s\n", s.trials, s.max_residual,
              s.seconds, ok ? "PASS" : "FAIL");
  return ok ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Spatially embedded video codec"};
  app.require_subcommand(1);

  EncodeArgs enc;
  auto* e = app.add_subcommand("encode", "Encode a video into a container");
  e->add_option("--input", enc.input, ".yuv file or PNG folder")->required();
  e->add_option("--width", enc.width, "Frame width (.yuv input)");
  e->add_option("--height", enc.height, "Frame height (.yuv input)");
  e->add_option("--frames", enc.frames, "Number of frames")->required();
  e->add_option("--ip", enc.ip, "Intra period: 32, or -1 for a single leading I-frame")->check(CLI::IsMember({32, -1}));
  e->add_option("--lambda-index", enc.lambda_index, "Rate point 0..3 (lambda 50, 95, 200, 400)")->check(CLI::Range(0, 3));
  e->add_option("--output", enc.output, "Container path")->required();
  e->add_option("--recon", enc.recon, "Also write the reconstruction (.yuv or PNG folder)");
  e->add_option("--stats", enc.stats, "Per-frame CSV (bpp, base fraction, PSNR)");
  enc.model.add(e);

  DecodeArgs dec;
  auto* d = app.add_subcommand("decode", "Decode a container");
  d->add_option("--input", dec.input, "Container path")->required();
  d->add_option("--output", dec.output, ".yuv file or PNG folder")->required();
  d->add_flag("--base-only", dec.base_only, "Decode only the quarter-resolution base layer");
  dec.model.add(d);

  TrainArgs tr;
  auto* t = app.add_subcommand("train", "Run one training stage");
  t->add_option("--stage", tr.stage, "base, augment or joint")->required()->check(CLI::IsMember({"base", "augment", "joint"}));
  t->add_option("--config", tr.config, "Flat JSON config")->required()->check(CLI::ExistingFile);

  EvalArgs ev;
  auto* v = app.add_subcommand("eval", "PSNR report of a reconstruction");
  v->add_option("--recon", ev.recon, "Reconstruction (.yuv or PNG folder)")->required();
  v->add_option("--orig", ev.orig, "Original (.yuv or PNG folder)")->required();
  v->add_option("--report", ev.report, "JSON report path")->required();
  v->add_option("--width", ev.width, "Frame width (.yuv)");
  v->add_option("--height", ev.height, "Frame height (.yuv)");
  v->add_option("--frames", ev.frames, "Number of frames")->required();
  v->add_option("--bitstream", ev.bitstream, "Container, to report bpp");

  BdArgs bd;
  auto* b = app.add_subcommand("bdrate", "BD-rate of test curves against anchor curves");
  b->add_option("--test", bd.test, "RD CSV")->required()->check(CLI::ExistingFile);
  b->add_option("--anchor", bd.anchor, "RD CSV")->required()->check(CLI::ExistingFile);

  ExportArgs ex;
  auto* x = app.add_subcommand("export-rd", "Merge RD CSVs and render the plot");
  x->add_option("--input", ex.inputs, "RD CSV (repeatable)")->required()->check(CLI::ExistingFile);
  x->add_option("--output", ex.output, "Output stem (.csv and .svg are added)")->required();

  SynthArgs sy;
  auto* y = app.add_subcommand("synth", "Write a synthetic moving-pattern clip");
  y->add_option("--output", sy.output, ".yuv file or PNG folder")->required();
  y->add_option("--width", sy.width, "Frame width");
  y->add_option("--height", sy.height, "Frame height");
  y->add_option("--frames", sy.frames, "Number of frames")->check(CLI::PositiveNumber);
  y->add_option("--seed", sy.seed, "Clip seed");

  InfoArgs info;
  auto* i = app.add_subcommand("verify-info", "Check H(X) = H(X_b) + H(X|X_b) on random discrete sources");
  i->add_option("--trials", info.trials, "Number of random sources")->required()->check(CLI::PositiveNumber);
  i->add_option("--seed", info.seed, "Random seed");

  CLI11_PARSE(app, argc, argv);
  try {
    if (*e) return run_encode(enc);
    if (*d) return run_decode(dec);
    if (*t) return run_train(tr);
    if (*v) return run_eval(ev);
    if (*b) return run_bdrate(bd);
    if (*x) return run_export(ex);
    if (*y) return run_synth(sy);
    if (*i) return run_verify_info(info);
  } catch (const std::exception& err) {
    std::cerr << "error: " << err.what() << "\n";
    return 1;
  }
  return 0;
}
