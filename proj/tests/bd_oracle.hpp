#pragma once

// Independent BD-rate reference: textbook PCHIP plus Simpson integration.

#include <algorithm>
#include <cmath>
#include <random>
#include <vector>

#include "sevc/eval.hpp"

namespace sevc::testing {

using eval::RdPoint;

// Fritsch-Carlson slopes written out from the textbook recipe, evaluated
// through the power-basis cubic of each interval.
struct OracleCubic {
  std::vector<double> x, a, b, c, d;
  double eval(double v) const {
    size_t k = 0;
    while (k + 2 < x.size() && v > x[k + 1]) ++k;
    const double s = v - x[k];
    return a[k] + s * (b[k] + s * (c[k] + s * d[k]));
  }
};

inline OracleCubic oracle_pchip(const std::vector<double>& x, const std::vector<double>& y) {
  const size_t n = x.size();
  std::vector<double> h(n - 1), del(n - 1), m(n, 0.0);
  for (size_t k = 0; k + 1 < n; ++k) {
    h[k] = x[k + 1] - x[k];
    del[k] = (y[k + 1] - y[k]) / h[k];
  }
  for (size_t k = 1; k + 1 < n; ++k) {
    if ((del[k - 1] > 0 && del[k] > 0) || (del[k - 1] < 0 && del[k] < 0)) {
      const double w1 = 2 * h[k] + h[k - 1], w2 = h[k] + 2 * h[k - 1];
      m[k] = (w1 + w2) / (w1 / del[k - 1] + w2 / del[k]);
    }
  }
  auto edge = [](double h0, double h1, double d0, double d1) {
    double s = ((2 * h0 + h1) * d0 - h0 * d1) / (h0 + h1);
    if (s * d0 <= 0) return 0.0;
    if (d0 * d1 < 0 && std::abs(s) > 3 * std::abs(d0)) return 3 * d0;
    return s;
  };
  m[0] = edge(h[0], h[1], del[0], del[1]);
  m[n - 1] = edge(h[n - 2], h[n - 3], del[n - 2], del[n - 3]);
  OracleCubic o;
  o.x = x;
  for (size_t k = 0; k + 1 < n; ++k) {
    o.a.push_back(y[k]);
    o.b.push_back(m[k]);
    o.c.push_back((3 * del[k] - 2 * m[k] - m[k + 1]) / h[k]);
    o.d.push_back((m[k] + m[k + 1] - 2 * del[k]) / (h[k] * h[k]));
  }
  return o;
}

inline double simpson(const OracleCubic& f, double lo, double hi, int n = 20000) {
  const double h = (hi - lo) / n;
  double s = f.eval(lo) + f.eval(hi);
  for (int i = 1; i < n; ++i) s += (i % 2 ? 4 : 2) * f.eval(lo + i * h);
  return s * h / 3;
}

inline double oracle_bd(const std::vector<RdPoint>& test, const std::vector<RdPoint>& anchor) {
  auto build = [](const std::vector<RdPoint>& c) {
    std::vector<double> q, r;
    for (const auto& p : c) {
      q.push_back(p.psnr);
      r.push_back(std::log10(p.bpp));
    }
    return oracle_pchip(q, r);
  };
  const OracleCubic t = build(test), a = build(anchor);
  const double lo = std::max(test.front().psnr, anchor.front().psnr);
  const double hi = std::min(test.back().psnr, anchor.back().psnr);
  const double delta = (simpson(t, lo, hi) - simpson(a, lo, hi)) / (hi - lo);
  return 100.0 * (std::pow(10.0, delta) - 1.0);
}

inline std::vector<RdPoint> random_curve(std::mt19937_64& rng, size_t n) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<RdPoint> c;
  double bpp = 0.02 + 0.05 * u(rng), psnr = 26 + 4 * u(rng);
  for (size_t i = 0; i < n; ++i) {
    c.push_back({bpp, psnr});
    bpp *= 1.3 + u(rng);
    psnr += 0.5 + 2.5 * u(rng);
  }
  return c;
}

inline std::vector<RdPoint> scaled(std::vector<RdPoint> c, double f) {
  for (auto& p : c) p.bpp *= f;
  return c;
}

}  // namespace sevc::testing
