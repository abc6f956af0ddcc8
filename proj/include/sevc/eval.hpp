#pragma once

#include <filesystem>
#include <stdexcept>
#include <string>
#include <vector>

#include "sevc/frame_io.hpp"
#include "sevc/nn/tensor.hpp"

namespace sevc::eval {

inline constexpr double kPsnrCap = 99.0;

class EvalError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Mean squared error on the 0..255 scale over all RGB samples.
double mse_255(const Frame& a, const Frame& b);
// 10 log10(255^2 / MSE), capped at 99 dB (identical frames report the cap).
double psnr_from_mse(double mse);
double psnr_rgb(const Frame& a, const Frame& b);

struct RdPoint {
  double bpp = 0;
  double psnr = 0;
};

// Shape-preserving piecewise cubic Hermite interpolant (monotone data stays
// monotone). Knots must be strictly increasing.
class Pchip {
 public:
  Pchip(std::vector<double> x, std::vector<double> y);
  double operator()(double x) const;
  // Exact integral of the interpolant over [a, b] inside the knot range.
  double integral(double a, double b) const;
  double x_min() const { return x_.front(); }
  double x_max() const { return x_.back(); }
  const std::vector<double>& slopes() const { return d_; }

 private:
  size_t segment(double x) const;
  double segment_integral(size_t k, double a, double b) const;
  std::vector<double> x_, y_, d_;
};

// Bjontegaard rate difference in percent: log10(rate) interpolated as a
// function of PSNR, averaged over the common PSNR interval. Needs at least 4
// points per curve, strictly increasing in rate and PSNR. No extrapolation:
// an empty overlap is an error.
double bd_rate(const std::vector<RdPoint>& test, const std::vector<RdPoint>& anchor);

// Average endpoint error between two (2, H, W) flows. The optional (1, H, W)
// mask selects pixels with non-zero entries.
double aepe(const nn::Tensor& flow, const nn::Tensor& ref_flow, const nn::Tensor* mask = nullptr);
// Mask of pixels whose reference motion magnitude exceeds `threshold`.
nn::Tensor large_motion_mask(const nn::Tensor& ref_flow, double threshold);

// Normalized autocorrelation of a series after removing its least-squares
// line; element k - 1 holds lag k for k = 1..max_lag.
std::vector<double> detrended_autocorrelation(const std::vector<double>& series, int max_lag);
// Lag in 1..max_lag with the largest detrended autocorrelation.
int dominant_lag(const std::vector<double>& series, int max_lag);

struct RdRow {
  std::string codec;
  std::string dataset;
  double lambda = 0;
  double bpp = 0;
  double psnr = 0;
  bool operator==(const RdRow&) const = default;
};

inline constexpr const char* kRdCsvHeader = "codec,dataset,lambda,bpp,psnr";

std::string rd_csv(const std::vector<RdRow>& rows);
std::vector<RdRow> parse_rd_csv(const std::string& text);
std::vector<RdRow> read_rd_csv(const std::filesystem::path& path);
// SVG plot of PSNR against bpp, one series per (codec, dataset).
std::string rd_svg(const std::vector<RdRow>& rows);
// Writes <stem>.csv and <stem>.svg.
void export_rd(const std::vector<RdRow>& rows, const std::filesystem::path& stem);

// Curve of one (codec, dataset) pair ordered by bpp.
std::vector<RdPoint> curve_of(const std::vector<RdRow>& rows, const std::string& codec, const std::string& dataset);

}  // namespace sevc::eval
