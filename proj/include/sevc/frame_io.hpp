#pragma once

#include <cstdint>
#include <filesystem>
#include <stdexcept>
#include <string>
#include <vector>

#include "sevc/nn/tensor.hpp"

namespace sevc {

class FrameIoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// 8-bit planar 4:2:0 picture.
struct YuvFrame {
  int width = 0;
  int height = 0;
  std::vector<uint8_t> y;
  std::vector<uint8_t> u;
  std::vector<uint8_t> v;

  YuvFrame() = default;
  YuvFrame(int w, int h);
  size_t byte_size() const { return y.size() + u.size() + v.size(); }
};

// RGB picture in [0,1], stored planar as a (3, H, W) tensor.
struct Frame {
  nn::Tensor pixels;

  Frame() = default;
  Frame(int h, int w, double fill = 0.0) : pixels({3, h, w}, fill) {}
  explicit Frame(nn::Tensor t);

  int height() const { return pixels.height(); }
  int width() const { return pixels.width(); }
};

// Replicate padding added on the right and bottom so both dims are multiples
// of 64.
struct PadSpec {
  int orig_h = 0;
  int orig_w = 0;
  int pad_h = 0;
  int pad_w = 0;
  int padded_h() const { return orig_h + pad_h; }
  int padded_w() const { return orig_w + pad_w; }
  bool operator==(const PadSpec&) const = default;
};

inline constexpr int kPadMultiple = 64;

std::vector<YuvFrame> read_yuv420(const std::filesystem::path& path, int width, int height, int count);
void write_yuv420(const std::filesystem::path& path, const std::vector<YuvFrame>& frames);

// Limited-range BT.601. Forward matrix (RGB in [0,1] to 8-bit code values):
//   Y = 16  +  65.481 R + 128.553 G +  24.966 B
//   U = 128 -  37.797 R -  74.203 G + 112.000 B
//   V = 128 + 112.000 R -  93.786 G -  18.214 B
// The inverse is the exact inverse of this matrix. Chroma is box-filtered
// 2x2 on the way down and bilinearly upsampled (centered siting) on the way up.
Frame yuv_to_rgb_bt601(const YuvFrame& f);
YuvFrame rgb_to_yuv_bt601(const Frame& f);

// Antialiased Catmull-Rom (a = -0.5) downsampling with the kernel stretched by
// the factor, replicate boundaries, output clamped to [0,1].
Frame bicubic_downsample(const Frame& f, int factor);
// 1-D resampling matrix (n/factor x n) used by bicubic_downsample. Exposed so
// the training graph can apply the same linear map differentiably.
nn::Tensor bicubic_matrix(int n, int factor);
double cubic_kernel(double x, double a = -0.5);

std::pair<Frame, PadSpec> pad_to_64(const Frame& f);
Frame crop(const Frame& f, const PadSpec& p);

// Loads an 8-bit RGB(A) or gray PNG as a Frame.
Frame read_png(const std::filesystem::path& path);
// Writes 8-bit RGB (values rounded by to_byte).
void write_png(const std::filesystem::path& path, const Frame& f);
// Loads every *.png in a folder, sorted by file name.
std::vector<Frame> read_png_sequence(const std::filesystem::path& dir, int count);

// Quantizes [0,1] RGB to 0..255 with rounding.
inline uint8_t to_byte(double v) {
  const double c = v < 0 ? 0 : (v > 1 ? 1 : v);
  return static_cast<uint8_t>(c * 255.0 + 0.5);
}

}  // namespace sevc
