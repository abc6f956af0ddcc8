#include <cmath>
#include <filesystem>
#include <fstream>

#include "doctest.h"
#include "sevc/frame_io.hpp"
#include "sevc/nn/layers.hpp"

using namespace sevc;

namespace {

std::filesystem::path temp_file(const std::string& name, size_t bytes, uint8_t fill) {
  auto p = std::filesystem::temp_directory_path() / name;
  std::ofstream out(p, std::ios::binary);
  std::vector<char> buf(bytes, static_cast<char>(fill));
  out.write(buf.data(), static_cast<std::streamsize>(buf.size()));
  return p;
}

Frame random_frame(int h, int w, uint64_t seed) {
  nn::Rng rng(seed);
  Frame f(h, w);
  for (double& v : f.pixels.values()) v = rng.uniform();
  return f;
}

}  // namespace

TEST_CASE("read_yuv420 counts frames from file size") {
  auto p = temp_file("sevc_two_frames.yuv", 12288, 128);
  auto frames = read_yuv420(p, 64, 64, 2);
  REQUIRE(frames.size() == 2);
  for (uint8_t v : frames[1].y) CHECK(v == 128);
  Frame rgb = yuv_to_rgb_bt601(frames[0]);
  const double gray = (128 - 16) * 255.0 / 219.0 / 255.0;
  for (double v : rgb.pixels.values()) CHECK(v == doctest::Approx(gray).epsilon(1e-12));

  try {
    read_yuv420(p, 64, 64, 3);
    FAIL("expected truncation error");
  } catch (const FrameIoError& e) {
    CHECK(std::string(e.what()) == "truncated at frame 2");
  }
  CHECK_THROWS_AS(read_yuv420(p, 63, 64, 1), FrameIoError);
}

TEST_CASE("limited-range black and white") {
  YuvFrame f(2, 2);
  std::fill(f.y.begin(), f.y.end(), 16);
  Frame lo = yuv_to_rgb_bt601(f);
  for (double v : lo.pixels.values()) CHECK(v == doctest::Approx(0.0).epsilon(1e-12));
  std::fill(f.y.begin(), f.y.end(), 235);
  Frame hi = yuv_to_rgb_bt601(f);
  for (double v : hi.pixels.values()) CHECK(v == doctest::Approx(1.0).epsilon(1e-12));

  Frame black(2, 2, 0.0), white(2, 2, 1.0);
  YuvFrame yb = rgb_to_yuv_bt601(black), yw = rgb_to_yuv_bt601(white);
  CHECK(yb.y[0] == 16);
  CHECK(yb.u[0] == 128);
  CHECK(yb.v[0] == 128);
  CHECK(yw.y[3] == 235);
  CHECK(yw.u[0] == 128);
  CHECK(yw.v[0] == 128);
}

TEST_CASE("color round trip stays within 2/255 over 10k random colors") {
  // Each color fills a 2x2 block so the 4:2:0 chroma sample is exact.
  nn::Rng rng(17);
  double worst = 0;
  for (int i = 0; i < 10000; ++i) {
    Frame f(2, 2);
    const double rgb[3] = {rng.uniform(), rng.uniform(), rng.uniform()};
    for (int c = 0; c < 3; ++c)
      for (int p = 0; p < 4; ++p) f.pixels[c * 4 + p] = rgb[c];
    Frame back = yuv_to_rgb_bt601(rgb_to_yuv_bt601(f));
    for (size_t k = 0; k < back.pixels.size(); ++k)
      worst = std::max(worst, std::fabs(back.pixels[k] - f.pixels[k]));
  }
  CHECK(worst <= 2.0 / 255.0);
}

TEST_CASE("color conversion is value-deterministic") {
  Frame f = random_frame(8, 12, 3);
  YuvFrame a = rgb_to_yuv_bt601(f), b = rgb_to_yuv_bt601(f);
  CHECK(a.y == b.y);
  CHECK(a.u == b.u);
  CHECK(yuv_to_rgb_bt601(a).pixels == yuv_to_rgb_bt601(b).pixels);
}

TEST_CASE("bicubic downsampling") {
  SUBCASE("constants are preserved") {
    Frame f(64, 64, 0.3125);
    for (int factor : {2, 4}) {
      Frame d = bicubic_downsample(f, factor);
      for (double v : d.pixels.values()) CHECK(std::fabs(v - 0.3125) <= 1e-15);
    }
  }
  SUBCASE("4x4 checkerboard at factor 4") {
    // Oracle: evaluate the stretched kernel directly at each source tap.
    Frame f(4, 4);
    for (int c = 0; c < 3; ++c)
      for (int y = 0; y < 4; ++y)
        for (int x = 0; x < 4; ++x) f.pixels.at(c, y, x) = (x + y) % 2;
    double num = 0, den = 0;
    const double center = 1.5;
    for (int j = -8; j <= 11; ++j)
      for (int i = -8; i <= 11; ++i) {
        const double w = cubic_kernel((i - center) / 4.0) * cubic_kernel((j - center) / 4.0);
        const int yy = std::clamp(j, 0, 3), xx = std::clamp(i, 0, 3);
        num += w * ((xx + yy) % 2);
        den += w;
      }
    Frame d = bicubic_downsample(f, 4);
    REQUIRE(d.height() == 1);
    CHECK(d.pixels.at(0, 0, 0) == doctest::Approx(num / den).epsilon(1e-12));
    CHECK(d.pixels.at(0, 0, 0) == doctest::Approx(0.5).epsilon(1e-12));
  }
  SUBCASE("shape and rejection") {
    Frame d = bicubic_downsample(Frame(64, 64, 0.5), 4);
    CHECK(d.height() == 16);
    CHECK(d.width() == 16);
    CHECK_THROWS_AS(bicubic_downsample(Frame(66, 64), 4), FrameIoError);
    CHECK_THROWS_AS(bicubic_downsample(Frame(64, 64), 3), FrameIoError);
  }
}

TEST_CASE("pad and crop") {
  auto [p1080, spec] = pad_to_64(Frame(1080, 1920, 0.1));
  CHECK(p1080.height() == 1088);
  CHECK(p1080.width() == 1920);
  CHECK(spec.pad_h == 8);
  CHECK(spec.pad_w == 0);

  auto [same, s64] = pad_to_64(Frame(64, 64, 0.2));
  CHECK(same.height() == 64);
  CHECK(s64.pad_h == 0);
  CHECK(s64.pad_w == 0);

  for (uint64_t seed = 0; seed < 5; ++seed) {
    nn::Rng rng(seed + 100);
    const int h = 1 + static_cast<int>(rng.next() % 150), w = 1 + static_cast<int>(rng.next() % 150);
    Frame f = random_frame(h, w, seed);
    auto [padded, ps] = pad_to_64(f);
    CHECK(padded.height() % 64 == 0);
    CHECK(padded.width() % 64 == 0);
    // replicate padding
    CHECK(padded.pixels.at(1, padded.height() - 1, padded.width() - 1) == f.pixels.at(1, h - 1, w - 1));
    CHECK(crop(padded, ps).pixels == f.pixels);
  }
  Frame f = random_frame(100, 130, 9);
  auto [padded, ps] = pad_to_64(f);
  CHECK(crop(padded, ps).pixels == f.pixels);
  PadSpec bad = ps;
  bad.pad_h += 1;
  CHECK_THROWS_AS(crop(padded, bad), FrameIoError);
}

TEST_CASE("png write and read roundtrip at 8 bits") {
  const auto dir = std::filesystem::temp_directory_path() / "sevc_test_png";
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  Frame f(5, 7);
  for (size_t i = 0; i < f.pixels.size(); ++i) f.pixels[i] = static_cast<double>((i * 37) % 256) / 255.0;
  write_png(dir / "b.png", f);
  Frame g(5, 7, 1.0);
  write_png(dir / "a.png", g);
  Frame back = read_png(dir / "b.png");
  CHECK(back.pixels == f.pixels);
  auto seq = read_png_sequence(dir, 2);
  CHECK(seq[0].pixels == g.pixels);
  CHECK(seq[1].pixels == f.pixels);
  CHECK_THROWS_AS(read_png_sequence(dir, 3), FrameIoError);
  std::filesystem::remove_all(dir);
}
