#include "sevc/frame_io.hpp"

#include <png.h>

#include <algorithm>
#include <array>
#include <cmath>
#include <fstream>

namespace sevc {

namespace {

using Mat3 = std::array<std::array<double, 3>, 3>;

// RGB [0,1] -> code-value offsets for Y, U, V.
constexpr Mat3 kRgbToYuv = {{{65.481, 128.553, 24.966},
                             {-37.797, -74.203, 112.0},
                             {112.0, -93.786, -18.214}}};
constexpr std::array<double, 3> kYuvOffset = {16.0, 128.0, 128.0};

constexpr Mat3 invert(const Mat3& m) {
  const double det = m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1]) -
                     m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0]) +
                     m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0]);
  Mat3 r{};
  r[0][0] = (m[1][1] * m[2][2] - m[1][2] * m[2][1]) / det;
  r[0][1] = (m[0][2] * m[2][1] - m[0][1] * m[2][2]) / det;
  r[0][2] = (m[0][1] * m[1][2] - m[0][2] * m[1][1]) / det;
  r[1][0] = (m[1][2] * m[2][0] - m[1][0] * m[2][2]) / det;
  r[1][1] = (m[0][0] * m[2][2] - m[0][2] * m[2][0]) / det;
  r[1][2] = (m[0][2] * m[1][0] - m[0][0] * m[1][2]) / det;
  r[2][0] = (m[1][0] * m[2][1] - m[1][1] * m[2][0]) / det;
  r[2][1] = (m[0][1] * m[2][0] - m[0][0] * m[2][1]) / det;
  r[2][2] = (m[0][0] * m[1][1] - m[0][1] * m[1][0]) / det;
  return r;
}

constexpr Mat3 kYuvToRgb = invert(kRgbToYuv);

double clamp01(double v) { return v < 0 ? 0 : (v > 1 ? 1 : v); }

uint8_t clamp_code(double v) {
  const double r = std::round(v);
  return static_cast<uint8_t>(r < 0 ? 0 : (r > 255 ? 255 : r));
}

// Bilinear sample of a half-resolution chroma plane at luma position (x, y).
double chroma_at(const std::vector<uint8_t>& plane, int cw, int ch, int x, int y) {
  double sx = std::clamp((x + 0.5) / 2.0 - 0.5, 0.0, static_cast<double>(cw - 1));
  double sy = std::clamp((y + 0.5) / 2.0 - 0.5, 0.0, static_cast<double>(ch - 1));
  const int x0 = static_cast<int>(sx), y0 = static_cast<int>(sy);
  const int x1 = std::min(x0 + 1, cw - 1), y1 = std::min(y0 + 1, ch - 1);
  const double fx = sx - x0, fy = sy - y0;
  auto p = [&](int yy, int xx) { return static_cast<double>(plane[static_cast<size_t>(yy) * cw + xx]); };
  return (1 - fy) * ((1 - fx) * p(y0, x0) + fx * p(y0, x1)) + fy * ((1 - fx) * p(y1, x0) + fx * p(y1, x1));
}

}  // namespace

YuvFrame::YuvFrame(int w, int h) : width(w), height(h) {
  if (w <= 0 || h <= 0 || w % 2 || h % 2) {
    throw FrameIoError("YUV420 dimensions must be positive and even, got " + std::to_string(w) +
                       "x" + std::to_string(h));
  }
  y.assign(static_cast<size_t>(w) * h, 0);
  u.assign(static_cast<size_t>(w / 2) * (h / 2), 128);
  v.assign(static_cast<size_t>(w / 2) * (h / 2), 128);
}

Frame::Frame(nn::Tensor t) : pixels(std::move(t)) {
  if (pixels.rank() != 3 || pixels.channels() != 3) {
    throw FrameIoError("Frame expects a (3,H,W) tensor, got " + pixels.shape_str());
  }
}

std::vector<YuvFrame> read_yuv420(const std::filesystem::path& path, int width, int height, int count) {
  if (width % 2 || height % 2 || width <= 0 || height <= 0) {
    throw FrameIoError("YUV420 dimensions must be positive and even");
  }
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FrameIoError("cannot open " + path.string());
  std::vector<YuvFrame> frames;
  frames.reserve(static_cast<size_t>(std::max(count, 0)));
  for (int i = 0; i < count; ++i) {
    YuvFrame f(width, height);
    in.read(reinterpret_cast<char*>(f.y.data()), static_cast<std::streamsize>(f.y.size()));
    in.read(reinterpret_cast<char*>(f.u.data()), static_cast<std::streamsize>(f.u.size()));
    in.read(reinterpret_cast<char*>(f.v.data()), static_cast<std::streamsize>(f.v.size()));
    if (!in) throw FrameIoError("truncated at frame " + std::to_string(i));
    frames.push_back(std::move(f));
  }
  return frames;
}

void write_yuv420(const std::filesystem::path& path, const std::vector<YuvFrame>& frames) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw FrameIoError("cannot write " + path.string());
  for (const auto& f : frames) {
    out.write(reinterpret_cast<const char*>(f.y.data()), static_cast<std::streamsize>(f.y.size()));
    out.write(reinterpret_cast<const char*>(f.u.data()), static_cast<std::streamsize>(f.u.size()));
    out.write(reinterpret_cast<const char*>(f.v.data()), static_cast<std::streamsize>(f.v.size()));
  }
  if (!out) throw FrameIoError("write failed: " + path.string());
}

Frame yuv_to_rgb_bt601(const YuvFrame& f) {
  const int w = f.width, h = f.height, cw = w / 2, ch = h / 2;
  Frame out(h, w);
  for (int yy = 0; yy < h; ++yy) {
    for (int xx = 0; xx < w; ++xx) {
      const double d[3] = {f.y[static_cast<size_t>(yy) * w + xx] - kYuvOffset[0],
                           chroma_at(f.u, cw, ch, xx, yy) - kYuvOffset[1],
                           chroma_at(f.v, cw, ch, xx, yy) - kYuvOffset[2]};
      for (int c = 0; c < 3; ++c) {
        const double v = kYuvToRgb[c][0] * d[0] + kYuvToRgb[c][1] * d[1] + kYuvToRgb[c][2] * d[2];
        out.pixels.at(c, yy, xx) = clamp01(v);
      }
    }
  }
  return out;
}

YuvFrame rgb_to_yuv_bt601(const Frame& f) {
  const int w = f.width(), h = f.height();
  YuvFrame out(w, h);
  std::vector<double> u_full(static_cast<size_t>(w) * h), v_full(u_full.size());
  for (int yy = 0; yy < h; ++yy) {
    for (int xx = 0; xx < w; ++xx) {
      const double rgb[3] = {clamp01(f.pixels.at(0, yy, xx)), clamp01(f.pixels.at(1, yy, xx)),
                             clamp01(f.pixels.at(2, yy, xx))};
      double yuv[3];
      for (int c = 0; c < 3; ++c)
        yuv[c] = kYuvOffset[c] + kRgbToYuv[c][0] * rgb[0] + kRgbToYuv[c][1] * rgb[1] +
                 kRgbToYuv[c][2] * rgb[2];
      const size_t i = static_cast<size_t>(yy) * w + xx;
      out.y[i] = clamp_code(yuv[0]);
      u_full[i] = yuv[1];
      v_full[i] = yuv[2];
    }
  }
  const int cw = w / 2;
  for (int cy = 0; cy < h / 2; ++cy) {
    for (int cx = 0; cx < cw; ++cx) {
      const size_t a = static_cast<size_t>(2 * cy) * w + 2 * cx;
      const size_t b = a + static_cast<size_t>(w);
      out.u[static_cast<size_t>(cy) * cw + cx] =
          clamp_code(0.25 * (u_full[a] + u_full[a + 1] + u_full[b] + u_full[b + 1]));
      out.v[static_cast<size_t>(cy) * cw + cx] =
          clamp_code(0.25 * (v_full[a] + v_full[a + 1] + v_full[b] + v_full[b + 1]));
    }
  }
  return out;
}

double cubic_kernel(double x, double a) {
  const double t = std::fabs(x);
  if (t <= 1) return (a + 2) * t * t * t - (a + 3) * t * t + 1;
  if (t < 2) return a * t * t * t - 5 * a * t * t + 8 * a * t - 4 * a;
  return 0.0;
}

nn::Tensor bicubic_matrix(int n, int factor) {
  if (factor <= 0 || n % factor) {
    throw FrameIoError("bicubic_downsample: size " + std::to_string(n) + " not divisible by " +
                       std::to_string(factor));
  }
  const int m = n / factor;
  nn::Tensor mat({m, n}, 0.0);
  const double support = 2.0 * factor;
  for (int i = 0; i < m; ++i) {
    const double center = (i + 0.5) * factor - 0.5;
    const int lo = static_cast<int>(std::floor(center - support));
    const int hi = static_cast<int>(std::ceil(center + support));
    double total = 0;
    std::vector<double> row(static_cast<size_t>(n), 0.0);
    for (int j = lo; j <= hi; ++j) {
      const double wgt = cubic_kernel((j - center) / factor);
      if (wgt == 0.0) continue;
      row[static_cast<size_t>(std::clamp(j, 0, n - 1))] += wgt;
      total += wgt;
    }
    for (int j = 0; j < n; ++j) mat[static_cast<size_t>(i) * n + j] = row[j] / total;
  }
  return mat;
}

Frame bicubic_downsample(const Frame& f, int factor) {
  if (factor != 2 && factor != 4) throw FrameIoError("bicubic_downsample: factor must be 2 or 4");
  const int h = f.height(), w = f.width();
  if (h % factor || w % factor) {
    throw FrameIoError("bicubic_downsample: " + std::to_string(h) + "x" + std::to_string(w) +
                       " not divisible by " + std::to_string(factor));
  }
  const nn::Tensor rows = bicubic_matrix(h, factor);
  const nn::Tensor cols = bicubic_matrix(w, factor);
  const int ho = h / factor, wo = w / factor;
  Frame out(ho, wo);
  std::vector<double> tmp(static_cast<size_t>(ho) * w);
  for (int c = 0; c < 3; ++c) {
    for (int i = 0; i < ho; ++i)
      for (int x = 0; x < w; ++x) {
        double s = 0;
        for (int y = 0; y < h; ++y) s += rows[static_cast<size_t>(i) * h + y] * f.pixels.at(c, y, x);
        tmp[static_cast<size_t>(i) * w + x] = s;
      }
    for (int i = 0; i < ho; ++i)
      for (int j = 0; j < wo; ++j) {
        double s = 0;
        for (int x = 0; x < w; ++x) s += cols[static_cast<size_t>(j) * w + x] * tmp[static_cast<size_t>(i) * w + x];
        out.pixels.at(c, i, j) = clamp01(s);
      }
  }
  return out;
}

std::pair<Frame, PadSpec> pad_to_64(const Frame& f) {
  PadSpec p;
  p.orig_h = f.height();
  p.orig_w = f.width();
  p.pad_h = (kPadMultiple - p.orig_h % kPadMultiple) % kPadMultiple;
  p.pad_w = (kPadMultiple - p.orig_w % kPadMultiple) % kPadMultiple;
  if (p.pad_h == 0 && p.pad_w == 0) return {f, p};
  Frame out(p.padded_h(), p.padded_w());
  for (int c = 0; c < 3; ++c)
    for (int y = 0; y < p.padded_h(); ++y)
      for (int x = 0; x < p.padded_w(); ++x)
        out.pixels.at(c, y, x) = f.pixels.at(c, std::min(y, p.orig_h - 1), std::min(x, p.orig_w - 1));
  return {std::move(out), p};
}

Frame crop(const Frame& f, const PadSpec& p) {
  if (f.height() != p.padded_h() || f.width() != p.padded_w() || p.orig_h <= 0 || p.orig_w <= 0 ||
      p.pad_h < 0 || p.pad_w < 0) {
    throw FrameIoError("crop: PadSpec does not match a " + std::to_string(f.height()) + "x" +
                       std::to_string(f.width()) + " frame");
  }
  Frame out(p.orig_h, p.orig_w);
  for (int c = 0; c < 3; ++c)
    for (int y = 0; y < p.orig_h; ++y)
      for (int x = 0; x < p.orig_w; ++x) out.pixels.at(c, y, x) = f.pixels.at(c, y, x);
  return out;
}

Frame read_png(const std::filesystem::path& path) {
  png_image image{};
  image.version = PNG_IMAGE_VERSION;
  if (!png_image_begin_read_from_file(&image, path.string().c_str())) {
    throw FrameIoError("cannot read PNG " + path.string() + ": " + image.message);
  }
  image.format = PNG_FORMAT_RGB;
  std::vector<uint8_t> buf(PNG_IMAGE_SIZE(image));
  if (!png_image_finish_read(&image, nullptr, buf.data(), 0, nullptr)) {
    png_image_free(&image);
    throw FrameIoError("cannot decode PNG " + path.string() + ": " + image.message);
  }
  const int w = static_cast<int>(image.width), h = static_cast<int>(image.height);
  Frame out(h, w);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x)
      for (int c = 0; c < 3; ++c)
        out.pixels.at(c, y, x) = buf[(static_cast<size_t>(y) * w + x) * 3 + c] / 255.0;
  return out;
}

void write_png(const std::filesystem::path& path, const Frame& f) {
  const int w = f.width(), h = f.height();
  std::vector<uint8_t> buf(static_cast<size_t>(w) * h * 3);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x)
      for (int c = 0; c < 3; ++c) buf[(static_cast<size_t>(y) * w + x) * 3 + c] = to_byte(f.pixels.at(c, y, x));
  png_image image{};
  image.version = PNG_IMAGE_VERSION;
  image.width = static_cast<png_uint_32>(w);
  image.height = static_cast<png_uint_32>(h);
  image.format = PNG_FORMAT_RGB;
  if (!png_image_write_to_file(&image, path.string().c_str(), 0, buf.data(), 0, nullptr)) {
    throw FrameIoError("cannot write PNG " + path.string() + ": " + image.message);
  }
}

std::vector<Frame> read_png_sequence(const std::filesystem::path& dir, int count) {
  std::vector<std::filesystem::path> files;
  for (const auto& e : std::filesystem::directory_iterator(dir))
    if (e.is_regular_file() && e.path().extension() == ".png") files.push_back(e.path());
  std::sort(files.begin(), files.end());
  if (static_cast<int>(files.size()) < count) {
    throw FrameIoError("PNG folder " + dir.string() + " has " + std::to_string(files.size()) +
                       " frames, need " + std::to_string(count));
  }
  std::vector<Frame> frames;
  for (int i = 0; i < count; ++i) frames.push_back(read_png(files[static_cast<size_t>(i)]));
  return frames;
}

}  // namespace sevc
