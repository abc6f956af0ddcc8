#include "sevc/eval.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>

namespace sevc::eval {

using nn::Tensor;

double mse_255(const Frame& a, const Frame& b) {
  if (a.pixels.shape() != b.pixels.shape()) throw EvalError("psnr: frames differ in shape");
  if (a.pixels.size() == 0) throw EvalError("psnr: empty frame");
  double se = 0;
  for (size_t i = 0; i < a.pixels.size(); ++i) {
    const double d = 255.0 * (a.pixels[i] - b.pixels[i]);
    se += d * d;
  }
  return se / static_cast<double>(a.pixels.size());
}

double psnr_from_mse(double mse) {
  if (!(mse > 0)) return kPsnrCap;
  return std::min(kPsnrCap, 10.0 * std::log10(255.0 * 255.0 / mse));
}

double psnr_rgb(const Frame& a, const Frame& b) { return psnr_from_mse(mse_255(a, b)); }

Pchip::Pchip(std::vector<double> x, std::vector<double> y) : x_(std::move(x)), y_(std::move(y)) {
  const size_t n = x_.size();
  if (n < 2 || y_.size() != n) throw EvalError("pchip: need at least 2 knots with matching values");
  std::vector<double> h(n - 1), delta(n - 1);
  for (size_t k = 0; k + 1 < n; ++k) {
    h[k] = x_[k + 1] - x_[k];
    if (!(h[k] > 0)) throw EvalError("pchip: knots must be strictly increasing");
    delta[k] = (y_[k + 1] - y_[k]) / h[k];
  }
  d_.assign(n, 0.0);
  if (n == 2) {
    d_[0] = d_[1] = delta[0];
    return;
  }
  for (size_t k = 1; k + 1 < n; ++k) {
    if (delta[k - 1] * delta[k] <= 0) continue;
    const double w1 = 2 * h[k] + h[k - 1], w2 = h[k] + 2 * h[k - 1];
    d_[k] = (w1 + w2) / (w1 / delta[k - 1] + w2 / delta[k]);
  }
  // One-sided three-point end slopes, limited to keep the shape.
  auto end_slope = [](double h0, double h1, double m0, double m1) {
    double d = ((2 * h0 + h1) * m0 - h0 * m1) / (h0 + h1);
    if (std::signbit(d) != std::signbit(m0) || m0 == 0) {
      d = 0;
    } else if (std::signbit(m0) != std::signbit(m1) && std::abs(d) > 3 * std::abs(m0)) {
      d = 3 * m0;
    }
    return d;
  };
  d_[0] = end_slope(h[0], h[1], delta[0], delta[1]);
  d_[n - 1] = end_slope(h[n - 2], h[n - 3], delta[n - 2], delta[n - 3]);
}

size_t Pchip::segment(double x) const {
  const auto it = std::upper_bound(x_.begin(), x_.end(), x);
  const size_t k = it == x_.begin() ? 0 : static_cast<size_t>(it - x_.begin()) - 1;
  return std::min(k, x_.size() - 2);
}

double Pchip::operator()(double x) const {
  if (x < x_min() || x > x_max()) throw EvalError("pchip: no extrapolation outside the knot range");
  const size_t k = segment(x);
  const double h = x_[k + 1] - x_[k], t = (x - x_[k]) / h;
  const double t2 = t * t, t3 = t2 * t;
  return (2 * t3 - 3 * t2 + 1) * y_[k] + (t3 - 2 * t2 + t) * h * d_[k] + (-2 * t3 + 3 * t2) * y_[k + 1] +
         (t3 - t2) * h * d_[k + 1];
}

double Pchip::segment_integral(size_t k, double a, double b) const {
  const double h = x_[k + 1] - x_[k];
  auto anti = [&](double x) {
    const double t = (x - x_[k]) / h;
    const double t2 = t * t, t3 = t2 * t, t4 = t3 * t;
    return h * ((t - t3 + t4 / 2) * y_[k] + (t2 / 2 - 2 * t3 / 3 + t4 / 4) * h * d_[k] + (t3 - t4 / 2) * y_[k + 1] +
                (t4 / 4 - t3 / 3) * h * d_[k + 1]);
  };
  return anti(b) - anti(a);
}

double Pchip::integral(double a, double b) const {
  if (a > b) return -integral(b, a);
  if (a < x_min() || b > x_max()) throw EvalError("pchip: no extrapolation outside the knot range");
  double total = 0;
  for (size_t k = segment(a); k + 1 < x_.size() && x_[k] < b; ++k) {
    total += segment_integral(k, std::max(a, x_[k]), std::min(b, x_[k + 1]));
  }
  return total;
}

namespace {

Pchip log_rate_of_psnr(const std::vector<RdPoint>& curve, const char* which) {
  if (curve.size() < 4) throw EvalError(std::string("bd_rate: ") + which + " curve needs at least 4 points");
  std::vector<double> q, r;
  for (size_t i = 0; i < curve.size(); ++i) {
    const RdPoint& p = curve[i];
    if (!(p.bpp > 0) || !std::isfinite(p.bpp) || !std::isfinite(p.psnr)) {
      throw EvalError(std::string("bd_rate: ") + which + " curve has a non-positive or non-finite point");
    }
    if (i > 0 && !(p.bpp > curve[i - 1].bpp && p.psnr > curve[i - 1].psnr)) {
      throw EvalError(std::string("bd_rate: ") + which + " curve must increase in both rate and PSNR");
    }
    q.push_back(p.psnr);
    r.push_back(std::log10(p.bpp));
  }
  return Pchip(q, r);
}

}  // namespace

double bd_rate(const std::vector<RdPoint>& test, const std::vector<RdPoint>& anchor) {
  const Pchip t = log_rate_of_psnr(test, "test");
  const Pchip a = log_rate_of_psnr(anchor, "anchor");
  const double lo = std::max(t.x_min(), a.x_min()), hi = std::min(t.x_max(), a.x_max());
  if (!(hi > lo)) throw EvalError("bd_rate: curves have no overlapping PSNR range");
  const double delta = (t.integral(lo, hi) - a.integral(lo, hi)) / (hi - lo);
  return 100.0 * (std::pow(10.0, delta) - 1.0);
}

double aepe(const Tensor& flow, const Tensor& ref_flow, const Tensor* mask) {
  if (flow.shape() != ref_flow.shape() || flow.rank() != 3 || flow.dim(0) != 2) {
    throw EvalError("aepe: flows must both be (2, H, W)");
  }
  const int h = flow.dim(1), w = flow.dim(2);
  if (mask != nullptr && mask->shape() != std::vector<int>{1, h, w}) throw EvalError("aepe: mask must be (1, H, W)");
  double sum = 0;
  size_t n = 0;
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      if (mask != nullptr && mask->at(0, y, x) == 0) continue;
      const double du = flow.at(0, y, x) - ref_flow.at(0, y, x);
      const double dv = flow.at(1, y, x) - ref_flow.at(1, y, x);
      sum += std::sqrt(du * du + dv * dv);
      ++n;
    }
  if (n == 0) throw EvalError("aepe: mask selects no pixels");
  return sum / static_cast<double>(n);
}

Tensor large_motion_mask(const Tensor& ref_flow, double threshold) {
  if (ref_flow.rank() != 3 || ref_flow.dim(0) != 2) throw EvalError("mask: flow must be (2, H, W)");
  Tensor m({1, ref_flow.dim(1), ref_flow.dim(2)}, 0.0);
  for (int y = 0; y < ref_flow.dim(1); ++y)
    for (int x = 0; x < ref_flow.dim(2); ++x) {
      const double u = ref_flow.at(0, y, x), v = ref_flow.at(1, y, x);
      m.at(0, y, x) = std::sqrt(u * u + v * v) > threshold ? 1.0 : 0.0;
    }
  return m;
}

std::vector<double> detrended_autocorrelation(const std::vector<double>& series, int max_lag) {
  const size_t n = series.size();
  if (max_lag < 1 || n < static_cast<size_t>(max_lag) + 2) {
    throw EvalError("autocorrelation: need at least max_lag + 2 samples");
  }
  double mt = 0, my = 0;
  for (size_t t = 0; t < n; ++t) {
    mt += static_cast<double>(t);
    my += series[t];
  }
  mt /= static_cast<double>(n);
  my /= static_cast<double>(n);
  double stt = 0, sty = 0;
  for (size_t t = 0; t < n; ++t) {
    stt += (static_cast<double>(t) - mt) * (static_cast<double>(t) - mt);
    sty += (static_cast<double>(t) - mt) * (series[t] - my);
  }
  const double slope = sty / stt;
  std::vector<double> e(n);
  double energy = 0;
  for (size_t t = 0; t < n; ++t) {
    e[t] = series[t] - my - slope * (static_cast<double>(t) - mt);
    energy += e[t] * e[t];
  }
  if (!(energy > 0)) throw EvalError("autocorrelation: series is a straight line");
  std::vector<double> r;
  for (int k = 1; k <= max_lag; ++k) {
    double s = 0;
    for (size_t t = 0; t + static_cast<size_t>(k) < n; ++t) s += e[t] * e[t + static_cast<size_t>(k)];
    r.push_back(s / energy);
  }
  return r;
}

int dominant_lag(const std::vector<double>& series, int max_lag) {
  const std::vector<double> r = detrended_autocorrelation(series, max_lag);
  return static_cast<int>(std::max_element(r.begin(), r.end()) - r.begin()) + 1;
}

namespace {

void check_name(const std::string& s) {
  if (s.empty() || s.find_first_of(",\"\r\n") != std::string::npos) {
    throw EvalError("rd csv: names must be non-empty without commas, quotes or newlines: '" + s + "'");
  }
}

std::string format(const char* fmt, double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), fmt, v);
  return buf;
}

double parse_number(const std::string& s, size_t line) {
  size_t used = 0;
  double v = 0;
  try {
    v = std::stod(s, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used != s.size() || s.empty()) throw EvalError("rd csv: bad number '" + s + "' on line " + std::to_string(line));
  return v;
}

}  // namespace

std::string rd_csv(const std::vector<RdRow>& rows) {
  std::string out = std::string(kRdCsvHeader) + "\n";
  for (const RdRow& r : rows) {
    check_name(r.codec);
    check_name(r.dataset);
    out += r.codec + "," + r.dataset + "," + format("%g", r.lambda) + "," + format("%.6f", r.bpp) + "," +
           format("%.4f", r.psnr) + "\n";
  }
  return out;
}

std::vector<RdRow> parse_rd_csv(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line) || line != kRdCsvHeader) {
    throw EvalError(std::string("rd csv: header must be '") + kRdCsvHeader + "'");
  }
  std::vector<RdRow> rows;
  size_t n = 1;
  while (std::getline(in, line)) {
    ++n;
    if (line.empty()) continue;
    std::vector<std::string> f;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) f.push_back(cell);
    if (f.size() != 5) throw EvalError("rd csv: expected 5 fields on line " + std::to_string(n));
    rows.push_back({f[0], f[1], parse_number(f[2], n), parse_number(f[3], n), parse_number(f[4], n)});
  }
  return rows;
}

std::vector<RdRow> read_rd_csv(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw EvalError("rd csv: cannot open " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_rd_csv(ss.str());
}

std::vector<RdPoint> curve_of(const std::vector<RdRow>& rows, const std::string& codec, const std::string& dataset) {
  std::vector<RdPoint> c;
  for (const RdRow& r : rows)
    if (r.codec == codec && r.dataset == dataset) c.push_back({r.bpp, r.psnr});
  std::sort(c.begin(), c.end(), [](const RdPoint& a, const RdPoint& b) { return a.bpp < b.bpp; });
  return c;
}

std::string rd_svg(const std::vector<RdRow>& rows) {
  constexpr double kW = 640, kH = 480, kLeft = 70, kRight = 170, kTop = 30, kBottom = 60;
  static const char* kColors[] = {"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b"};
  std::map<std::pair<std::string, std::string>, std::vector<RdPoint>> series;
  for (const RdRow& r : rows) series[{r.codec, r.dataset}];
  for (auto& [key, pts] : series) pts = curve_of(rows, key.first, key.second);

  double x0 = 0, x1 = 1, y0 = 0, y1 = 1;
  if (!rows.empty()) {
    x0 = x1 = rows[0].bpp;
    y0 = y1 = rows[0].psnr;
    for (const RdRow& r : rows) {
      x0 = std::min(x0, r.bpp);
      x1 = std::max(x1, r.bpp);
      y0 = std::min(y0, r.psnr);
      y1 = std::max(y1, r.psnr);
    }
    const double px = std::max(1e-6, 0.05 * (x1 - x0)), py = std::max(1e-3, 0.05 * (y1 - y0));
    x0 -= px, x1 += px, y0 -= py, y1 += py;
  }
  const double pw = kW - kLeft - kRight, ph = kH - kTop - kBottom;
  auto sx = [&](double v) { return kLeft + (v - x0) / (x1 - x0) * pw; };
  auto sy = [&](double v) { return kTop + (1 - (v - y0) / (y1 - y0)) * ph; };

  std::ostringstream o;
  o << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << kW << "\" height=\"" << kH << "\" font-family=\"sans-serif\" font-size=\"12\">\n";
  o << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  o << "<rect x=\"" << kLeft << "\" y=\"" << kTop << "\" width=\"" << pw << "\" height=\"" << ph << "\" fill=\"none\" stroke=\"black\"/>\n";
  for (int i = 0; i <= 4; ++i) {
    const double xv = x0 + (x1 - x0) * i / 4, yv = y0 + (y1 - y0) * i / 4;
    o << "<text x=\"" << sx(xv) << "\" y=\"" << kTop + ph + 18 << "\" text-anchor=\"middle\">" << format("%.3f", xv) << "</text>\n";
    o << "<text x=\"" << kLeft - 6 << "\" y=\"" << sy(yv) + 4 << "\" text-anchor=\"end\">" << format("%.2f", yv) << "</text>\n";
  }
  o << "<text x=\"" << kLeft + pw / 2 << "\" y=\"" << kH - 15 << "\" text-anchor=\"middle\">bpp</text>\n";
  o << "<text x=\"18\" y=\"" << kTop + ph / 2 << "\" text-anchor=\"middle\" transform=\"rotate(-90 18 " << kTop + ph / 2 << ")\">PSNR (dB)</text>\n";
  size_t idx = 0;
  for (const auto& [key, pts] : series) {
    const char* color = kColors[idx % (sizeof(kColors) / sizeof(kColors[0]))];
    o << "<polyline class=\"series\" fill=\"none\" stroke=\"" << color << "\" stroke-width=\"2\" points=\"";
    for (const RdPoint& p : pts) o << sx(p.bpp) << "," << sy(p.psnr) << " ";
    o << "\"/>\n";
    for (const RdPoint& p : pts) o << "<circle cx=\"" << sx(p.bpp) << "\" cy=\"" << sy(p.psnr) << "\" r=\"3\" fill=\"" << color << "\"/>\n";
    const double ly = kTop + 10 + 18.0 * static_cast<double>(idx);
    o << "<line x1=\"" << kW - kRight + 10 << "\" y1=\"" << ly << "\" x2=\"" << kW - kRight + 30 << "\" y2=\"" << ly << "\" stroke=\"" << color << "\" stroke-width=\"2\"/>\n";
    o << "<text x=\"" << kW - kRight + 35 << "\" y=\"" << ly + 4 << "\">" << key.first << " / " << key.second << "</text>\n";
    ++idx;
  }
  o << "</svg>\n";
  return o.str();
}

void export_rd(const std::vector<RdRow>& rows, const std::filesystem::path& stem) {
  const std::string csv = rd_csv(rows);
  const std::string svg = rd_svg(rows);
  auto write = [](const std::filesystem::path& p, const std::string& s) {
    std::ofstream out(p, std::ios::binary);
    if (!out) throw EvalError("export_rd: cannot write " + p.string());
    out.write(s.data(), static_cast<std::streamsize>(s.size()));
  };
  write(std::filesystem::path(stem.string() + ".csv"), csv);
  write(std::filesystem::path(stem.string() + ".svg"), svg);
}

}  // namespace sevc::eval
