#include "sevc/nn/ops.hpp"

#include <Eigen/Core>
#include <algorithm>
#include <cmath>
#include <limits>
#include <memory>
#include <numbers>

#include "sevc/nn/laplace.hpp"

namespace sevc::nn {

namespace {

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MapMat = Eigen::Map<RowMat>;
using CMapMat = Eigen::Map<const RowMat>;

void require(bool cond, const char* what) {
  if (!cond) throw ShapeError(what);
}

void require_same(const Var& a, const Var& b, const char* op) {
  if (a.shape() != b.shape()) {
    throw ShapeError(std::string(op) + ": shape mismatch " + a.value().shape_str() + " vs " +
                     b.value().shape_str());
  }
}

// Parent grad accumulation helper.
inline void acc(Node& self, size_t i, const Tensor& g) { self.parents[i]->accumulate(g); }
inline bool wants(Node& self, size_t i) { return self.parents[i]->requires_grad; }

template <typename F>
Var unary(const Var& a, F&& fwd_and_deriv) {
  const Tensor& x = a.value();
  Tensor y(x.shape());
  Tensor d(x.shape());
  for (size_t i = 0; i < x.size(); ++i) fwd_and_deriv(x[i], y[i], d[i]);
  return make_op(std::move(y), {a}, [d = std::move(d)](Node& self) {
    Tensor g = self.grad;
    for (size_t i = 0; i < g.size(); ++i) g[i] *= d[i];
    acc(self, 0, g);
  });
}

}  // namespace

Var add(const Var& a, const Var& b) {
  require_same(a, b, "add");
  Tensor y = a.value();
  y.add_(b.value());
  return make_op(std::move(y), {a, b}, [](Node& self) {
    acc(self, 0, self.grad);
    acc(self, 1, self.grad);
  });
}

Var sub(const Var& a, const Var& b) {
  require_same(a, b, "sub");
  Tensor y = a.value();
  for (size_t i = 0; i < y.size(); ++i) y[i] -= b.value()[i];
  return make_op(std::move(y), {a, b}, [](Node& self) {
    acc(self, 0, self.grad);
    if (wants(self, 1)) {
      Tensor g = self.grad;
      g.scale_(-1.0);
      acc(self, 1, g);
    }
  });
}

Var mul(const Var& a, const Var& b) {
  require_same(a, b, "mul");
  Tensor y = a.value();
  for (size_t i = 0; i < y.size(); ++i) y[i] *= b.value()[i];
  return make_op(std::move(y), {a, b}, [](Node& self) {
    const Tensor& av = self.parents[0]->value;
    const Tensor& bv = self.parents[1]->value;
    if (wants(self, 0)) {
      Tensor g = self.grad;
      for (size_t i = 0; i < g.size(); ++i) g[i] *= bv[i];
      acc(self, 0, g);
    }
    if (wants(self, 1)) {
      Tensor g = self.grad;
      for (size_t i = 0; i < g.size(); ++i) g[i] *= av[i];
      acc(self, 1, g);
    }
  });
}

Var scale(const Var& a, double s) {
  Tensor y = a.value();
  y.scale_(s);
  return make_op(std::move(y), {a}, [s](Node& self) {
    Tensor g = self.grad;
    g.scale_(s);
    acc(self, 0, g);
  });
}

Var add_scalar(const Var& a, double s) {
  Tensor y = a.value();
  for (double& v : y.values()) v += s;
  return make_op(std::move(y), {a}, [](Node& self) { acc(self, 0, self.grad); });
}

Var mul_channel(const Var& a, const Var& g) {
  const Tensor& x = a.value();
  require(x.rank() == 3 && g.value().size() == static_cast<size_t>(x.channels()),
          "mul_channel: expects (C,H,W) and C gains");
  const size_t plane = static_cast<size_t>(x.height()) * x.width();
  Tensor y = x;
  for (int c = 0; c < x.channels(); ++c) {
    const double s = g.value()[c];
    for (size_t i = 0; i < plane; ++i) y[c * plane + i] *= s;
  }
  return make_op(std::move(y), {a, g}, [plane](Node& self) {
    const Tensor& xv = self.parents[0]->value;
    const Tensor& gv = self.parents[1]->value;
    const int channels = xv.channels();
    if (wants(self, 0)) {
      Tensor dx = self.grad;
      for (int c = 0; c < channels; ++c)
        for (size_t i = 0; i < plane; ++i) dx[c * plane + i] *= gv[c];
      acc(self, 0, dx);
    }
    if (wants(self, 1)) {
      Tensor dg(gv.shape(), 0.0);
      for (int c = 0; c < channels; ++c) {
        double s = 0;
        for (size_t i = 0; i < plane; ++i) s += self.grad[c * plane + i] * xv[c * plane + i];
        dg[c] = s;
      }
      acc(self, 1, dg);
    }
  });
}

Var add_row(const Var& a, const Var& b) {
  const Tensor& x = a.value();
  require(x.rank() == 2 && b.value().size() == static_cast<size_t>(x.dim(1)),
          "add_row: expects (R,C) and C");
  const int rows = x.dim(0), cols = x.dim(1);
  Tensor y = x;
  for (int r = 0; r < rows; ++r)
    for (int c = 0; c < cols; ++c) y[static_cast<size_t>(r) * cols + c] += b.value()[c];
  return make_op(std::move(y), {a, b}, [rows, cols](Node& self) {
    acc(self, 0, self.grad);
    if (wants(self, 1)) {
      Tensor db(self.parents[1]->value.shape(), 0.0);
      for (int r = 0; r < rows; ++r)
        for (int c = 0; c < cols; ++c) db[c] += self.grad[static_cast<size_t>(r) * cols + c];
      acc(self, 1, db);
    }
  });
}

Var concat(const std::vector<Var>& parts, int axis) {
  require(!parts.empty(), "concat: no inputs");
  const auto& s0 = parts[0].shape();
  const int rank = static_cast<int>(s0.size());
  require(axis >= 0 && axis < rank, "concat: bad axis");
  size_t outer = 1, inner = 1;
  for (int i = 0; i < axis; ++i) outer *= s0[i];
  for (int i = axis + 1; i < rank; ++i) inner *= s0[i];
  std::vector<int> out_shape = s0;
  int total = 0;
  std::vector<int> sizes;
  for (const Var& p : parts) {
    const auto& s = p.shape();
    require(static_cast<int>(s.size()) == rank, "concat: rank mismatch");
    for (int i = 0; i < rank; ++i) {
      if (i != axis && s[i] != s0[i]) {
        throw ShapeError("concat: incompatible shapes " + p.value().shape_str() + " vs " +
                         parts[0].value().shape_str());
      }
    }
    sizes.push_back(s[axis]);
    total += s[axis];
  }
  out_shape[axis] = total;
  Tensor y(out_shape);
  const size_t out_block = static_cast<size_t>(total) * inner;
  size_t offset = 0;
  for (size_t k = 0; k < parts.size(); ++k) {
    const size_t block = static_cast<size_t>(sizes[k]) * inner;
    const Tensor& v = parts[k].value();
    for (size_t o = 0; o < outer; ++o)
      std::copy_n(v.data() + o * block, block, y.data() + o * out_block + offset);
    offset += block;
  }
  return make_op(std::move(y), parts, [sizes, outer, inner, out_block](Node& self) {
    size_t off = 0;
    for (size_t k = 0; k < sizes.size(); ++k) {
      const size_t block = static_cast<size_t>(sizes[k]) * inner;
      if (wants(self, k)) {
        Tensor g(self.parents[k]->value.shape());
        for (size_t o = 0; o < outer; ++o)
          std::copy_n(self.grad.data() + o * out_block + off, block, g.data() + o * block);
        acc(self, k, g);
      }
      off += block;
    }
  });
}

Var slice(const Var& a, int axis, int start, int length) {
  const auto& s = a.shape();
  const int rank = static_cast<int>(s.size());
  require(axis >= 0 && axis < rank, "slice: bad axis");
  require(start >= 0 && length >= 0 && start + length <= s[axis], "slice: out of range");
  size_t outer = 1, inner = 1;
  for (int i = 0; i < axis; ++i) outer *= s[i];
  for (int i = axis + 1; i < rank; ++i) inner *= s[i];
  std::vector<int> out_shape = s;
  out_shape[axis] = length;
  Tensor y(out_shape);
  const size_t in_block = static_cast<size_t>(s[axis]) * inner;
  const size_t block = static_cast<size_t>(length) * inner;
  const size_t off = static_cast<size_t>(start) * inner;
  for (size_t o = 0; o < outer; ++o)
    std::copy_n(a.value().data() + o * in_block + off, block, y.data() + o * block);
  return make_op(std::move(y), {a}, [outer, in_block, block, off](Node& self) {
    Tensor g(self.parents[0]->value.shape(), 0.0);
    for (size_t o = 0; o < outer; ++o)
      std::copy_n(self.grad.data() + o * block, block, g.data() + o * in_block + off);
    acc(self, 0, g);
  });
}

Var reshape(const Var& a, std::vector<int> shape) {
  Tensor y = a.value().reshaped(std::move(shape));
  return make_op(std::move(y), {a}, [](Node& self) {
    acc(self, 0, self.grad.reshaped(self.parents[0]->value.shape()));
  });
}

Var transpose2d(const Var& a) {
  const Tensor& x = a.value();
  require(x.rank() == 2, "transpose2d: rank 2 required");
  const int r = x.dim(0), c = x.dim(1);
  Tensor y({c, r});
  MapMat(y.data(), c, r) = CMapMat(x.data(), r, c).transpose();
  return make_op(std::move(y), {a}, [r, c](Node& self) {
    Tensor g({r, c});
    MapMat(g.data(), r, c) = CMapMat(self.grad.data(), c, r).transpose();
    acc(self, 0, g);
  });
}

Var leaky_relu(const Var& a, double slope) {
  return unary(a, [slope](double x, double& y, double& d) {
    y = x > 0 ? x : slope * x;
    d = x > 0 ? 1.0 : slope;
  });
}

Var gelu(const Var& a) {
  constexpr double k = 0.7978845608028654;  // sqrt(2/pi)
  return unary(a, [](double x, double& y, double& d) {
    const double u = k * (x + 0.044715 * x * x * x);
    const double t = std::tanh(u);
    y = 0.5 * x * (1.0 + t);
    d = 0.5 * (1.0 + t) + 0.5 * x * (1.0 - t * t) * k * (1.0 + 3.0 * 0.044715 * x * x);
  });
}

Var softplus(const Var& a) {
  return unary(a, [](double x, double& y, double& d) {
    y = x > 30.0 ? x : std::log1p(std::exp(x));
    d = 1.0 / (1.0 + std::exp(-x));
  });
}

Var exp(const Var& a) {
  return unary(a, [](double x, double& y, double& d) {
    y = std::exp(x);
    d = y;
  });
}

Var clamp_min(const Var& a, double floor) {
  return unary(a, [floor](double x, double& y, double& d) {
    y = x > floor ? x : floor;
    d = x > floor ? 1.0 : 0.0;
  });
}

Var clamp(const Var& a, double lo, double hi) {
  return unary(a, [lo, hi](double x, double& y, double& d) {
    const bool inside = x > lo && x < hi;
    y = inside ? x : (x <= lo ? lo : hi);
    d = inside ? 1.0 : 0.0;
  });
}

Var round_ste(const Var& a) {
  Tensor y = a.value();
  for (double& v : y.values()) v = std::round(v);
  return make_op(std::move(y), {a}, [](Node& self) { acc(self, 0, self.grad); });
}

Var sum(const Var& a) {
  double s = 0;
  for (double v : a.value().values()) s += v;
  return make_op(Tensor({1}, s), {a}, [](Node& self) {
    acc(self, 0, Tensor(self.parents[0]->value.shape(), self.grad[0]));
  });
}

Var mean(const Var& a) {
  const double n = static_cast<double>(a.value().size());
  return scale(sum(a), 1.0 / n);
}

Var mse(const Var& a, const Var& b) {
  require_same(a, b, "mse");
  const Tensor& x = a.value();
  const Tensor& y = b.value();
  const double n = static_cast<double>(x.size());
  double s = 0;
  for (size_t i = 0; i < x.size(); ++i) {
    const double d = x[i] - y[i];
    s += d * d;
  }
  return make_op(Tensor({1}, s / n), {a, b}, [n](Node& self) {
    const Tensor& xv = self.parents[0]->value;
    const Tensor& yv = self.parents[1]->value;
    Tensor g(xv.shape());
    const double k = 2.0 * self.grad[0] / n;
    for (size_t i = 0; i < g.size(); ++i) g[i] = k * (xv[i] - yv[i]);
    if (wants(self, 0)) acc(self, 0, g);
    if (wants(self, 1)) {
      g.scale_(-1.0);
      acc(self, 1, g);
    }
  });
}

Var conv2d(const Var& x, const Var& w, const Var& b, int stride) {
  const Tensor& xv = x.value();
  const Tensor& wv = w.value();
  require(xv.rank() == 3 && wv.rank() == 4, "conv2d: expects (C,H,W) input and 4-d weight");
  const int cin = xv.channels(), h = xv.height(), wd = xv.width();
  const int cout = wv.dim(0), k = wv.dim(2);
  if (wv.dim(1) != cin) {
    throw ShapeError("conv2d: input has " + std::to_string(cin) + " channels, weight expects " +
                     std::to_string(wv.dim(1)));
  }
  require(wv.dim(3) == k && k % 2 == 1, "conv2d: odd square kernels only");
  require(b.value().size() == static_cast<size_t>(cout), "conv2d: bias size");
  const int pad = k / 2;
  const int ho = (h + 2 * pad - k) / stride + 1;
  const int wo = (wd + 2 * pad - k) / stride + 1;
  const int kk = cin * k * k;
  const int npix = ho * wo;

  auto cols = std::make_shared<RowMat>(kk, npix);
  if (k == 1 && stride == 1) {
    *cols = CMapMat(xv.data(), cin, npix);
  } else {
    for (int ci = 0; ci < cin; ++ci) {
      for (int ky = 0; ky < k; ++ky) {
        for (int kx = 0; kx < k; ++kx) {
          double* row = cols->data() + static_cast<size_t>((ci * k + ky) * k + kx) * npix;
          for (int oy = 0; oy < ho; ++oy) {
            const int iy = oy * stride + ky - pad;
            double* dst = row + static_cast<size_t>(oy) * wo;
            if (iy < 0 || iy >= h) {
              std::fill_n(dst, wo, 0.0);
              continue;
            }
            const double* src = xv.data() + (static_cast<size_t>(ci) * h + iy) * wd;
            for (int ox = 0; ox < wo; ++ox) {
              const int ix = ox * stride + kx - pad;
              dst[ox] = (ix >= 0 && ix < wd) ? src[ix] : 0.0;
            }
          }
        }
      }
    }
  }

  Tensor y({cout, ho, wo});
  MapMat ym(y.data(), cout, npix);
  ym.noalias() = CMapMat(wv.data(), cout, kk) * (*cols);
  for (int co = 0; co < cout; ++co) ym.row(co).array() += b.value()[co];

  return make_op(std::move(y), {x, w, b},
                 [cols, cin, h, wd, cout, k, stride, pad, ho, wo, kk, npix](Node& self) {
                   CMapMat g(self.grad.data(), cout, npix);
                   if (wants(self, 1)) {
                     Tensor dw(self.parents[1]->value.shape());
                     MapMat(dw.data(), cout, kk).noalias() = g * cols->transpose();
                     acc(self, 1, dw);
                   }
                   if (wants(self, 2)) {
                     Tensor db({cout});
                     for (int co = 0; co < cout; ++co) db[co] = g.row(co).sum();
                     acc(self, 2, db);
                   }
                   if (wants(self, 0)) {
                     const Tensor& wv = self.parents[1]->value;
                     RowMat dcols = CMapMat(wv.data(), cout, kk).transpose() * g;
                     Tensor dx({cin, h, wd}, 0.0);
                     if (k == 1 && stride == 1) {
                       MapMat(dx.data(), cin, npix) = dcols;
                     } else {
                       for (int ci = 0; ci < cin; ++ci)
                         for (int ky = 0; ky < k; ++ky)
                           for (int kx = 0; kx < k; ++kx) {
                             const double* row =
                                 dcols.data() + static_cast<size_t>((ci * k + ky) * k + kx) * npix;
                             for (int oy = 0; oy < ho; ++oy) {
                               const int iy = oy * stride + ky - pad;
                               if (iy < 0 || iy >= h) continue;
                               double* dst = dx.data() + (static_cast<size_t>(ci) * h + iy) * wd;
                               const double* src = row + static_cast<size_t>(oy) * wo;
                               for (int ox = 0; ox < wo; ++ox) {
                                 const int ix = ox * stride + kx - pad;
                                 if (ix >= 0 && ix < wd) dst[ix] += src[ox];
                               }
                             }
                           }
                     }
                     acc(self, 0, dx);
                   }
                 });
}

Var pixel_shuffle(const Var& x, int r) {
  const Tensor& xv = x.value();
  require(xv.rank() == 3 && xv.channels() % (r * r) == 0,
          "pixel_shuffle: channels must be divisible by r*r");
  const int c = xv.channels() / (r * r), h = xv.height(), w = xv.width();
  Tensor y({c, h * r, w * r});
  for (int ci = 0; ci < c; ++ci)
    for (int i = 0; i < r; ++i)
      for (int j = 0; j < r; ++j)
        for (int yy = 0; yy < h; ++yy)
          for (int xx = 0; xx < w; ++xx)
            y.at(ci, yy * r + i, xx * r + j) = xv.at(ci * r * r + i * r + j, yy, xx);
  return make_op(std::move(y), {x}, [c, h, w, r](Node& self) {
    Tensor g({c * r * r, h, w});
    for (int ci = 0; ci < c; ++ci)
      for (int i = 0; i < r; ++i)
        for (int j = 0; j < r; ++j)
          for (int yy = 0; yy < h; ++yy)
            for (int xx = 0; xx < w; ++xx)
              g.at(ci * r * r + i * r + j, yy, xx) = self.grad.at(ci, yy * r + i, xx * r + j);
    acc(self, 0, g);
  });
}

Var warp_bilinear(const Var& x, const Var& flow) {
  const Tensor& xv = x.value();
  const Tensor& fv = flow.value();
  require(xv.rank() == 3 && fv.rank() == 3 && fv.channels() == 2, "warp: expects (C,H,W) and (2,H,W)");
  if (xv.height() != fv.height() || xv.width() != fv.width()) {
    throw ShapeError("warp: spatial mismatch " + xv.shape_str() + " vs flow " + fv.shape_str());
  }
  const int c = xv.channels(), h = xv.height(), w = xv.width();
  const size_t plane = static_cast<size_t>(h) * w;

  // Per-pixel sampling geometry, shared by forward and backward.
  struct Tap {
    int x0, x1, y0, y1;
    double wx, wy;
    bool clamp_x, clamp_y;
  };
  auto taps = std::make_shared<std::vector<Tap>>(plane);
  for (int yy = 0; yy < h; ++yy) {
    for (int xx = 0; xx < w; ++xx) {
      const size_t p = static_cast<size_t>(yy) * w + xx;
      double px = xx + fv[p];
      double py = yy + fv[plane + p];
      Tap t{};
      const bool nan = std::isnan(px) || std::isnan(py);
      if (nan) px = py = 0.0;
      t.clamp_x = !(px > 0.0 && px < w - 1);
      t.clamp_y = !(py > 0.0 && py < h - 1);
      px = std::clamp(px, 0.0, static_cast<double>(w - 1));
      py = std::clamp(py, 0.0, static_cast<double>(h - 1));
      t.x0 = static_cast<int>(std::floor(px));
      t.y0 = static_cast<int>(std::floor(py));
      t.x1 = std::min(t.x0 + 1, w - 1);
      t.y1 = std::min(t.y0 + 1, h - 1);
      t.wx = px - t.x0;
      t.wy = py - t.y0;
      if (nan) t.wx = t.wy = std::numeric_limits<double>::quiet_NaN();
      (*taps)[p] = t;
    }
  }
  Tensor y({c, h, w});
  for (int ci = 0; ci < c; ++ci) {
    const double* src = xv.data() + ci * plane;
    double* dst = y.data() + ci * plane;
    for (size_t p = 0; p < plane; ++p) {
      const Tap& t = (*taps)[p];
      const double v00 = src[t.y0 * w + t.x0], v01 = src[t.y0 * w + t.x1];
      const double v10 = src[t.y1 * w + t.x0], v11 = src[t.y1 * w + t.x1];
      dst[p] = (1 - t.wy) * ((1 - t.wx) * v00 + t.wx * v01) + t.wy * ((1 - t.wx) * v10 + t.wx * v11);
    }
  }
  return make_op(std::move(y), {x, flow}, [taps, c, h, w, plane](Node& self) {
    const Tensor& xv = self.parents[0]->value;
    if (wants(self, 0)) {
      Tensor dx({c, h, w}, 0.0);
      for (int ci = 0; ci < c; ++ci) {
        double* d = dx.data() + ci * plane;
        const double* g = self.grad.data() + ci * plane;
        for (size_t p = 0; p < plane; ++p) {
          const Tap& t = (*taps)[p];
          d[t.y0 * w + t.x0] += g[p] * (1 - t.wy) * (1 - t.wx);
          d[t.y0 * w + t.x1] += g[p] * (1 - t.wy) * t.wx;
          d[t.y1 * w + t.x0] += g[p] * t.wy * (1 - t.wx);
          d[t.y1 * w + t.x1] += g[p] * t.wy * t.wx;
        }
      }
      acc(self, 0, dx);
    }
    if (wants(self, 1)) {
      Tensor df({2, h, w}, 0.0);
      for (size_t p = 0; p < plane; ++p) {
        const Tap& t = (*taps)[p];
        double gx = 0, gy = 0;
        for (int ci = 0; ci < c; ++ci) {
          const double* src = xv.data() + ci * plane;
          const double g = self.grad[ci * plane + p];
          const double v00 = src[t.y0 * w + t.x0], v01 = src[t.y0 * w + t.x1];
          const double v10 = src[t.y1 * w + t.x0], v11 = src[t.y1 * w + t.x1];
          gx += g * ((1 - t.wy) * (v01 - v00) + t.wy * (v11 - v10));
          gy += g * ((1 - t.wx) * (v10 - v00) + t.wx * (v11 - v01));
        }
        df[p] = t.clamp_x ? 0.0 : gx;
        df[plane + p] = t.clamp_y ? 0.0 : gy;
      }
      acc(self, 1, df);
    }
  });
}

Var resample_separable(const Var& x, const Tensor& rows, const Tensor& cols) {
  const Tensor& xv = x.value();
  require(xv.rank() == 3, "resample: expects (C,H,W)");
  const int c = xv.channels(), h = xv.height(), w = xv.width();
  require(rows.rank() == 2 && rows.dim(1) == h, "resample: row matrix mismatch");
  require(cols.rank() == 2 && cols.dim(1) == w, "resample: column matrix mismatch");
  const int ho = rows.dim(0), wo = cols.dim(0);
  Tensor y({c, ho, wo});
  CMapMat R(rows.data(), ho, h);
  CMapMat C(cols.data(), wo, w);
  for (int ci = 0; ci < c; ++ci) {
    MapMat(y.data() + static_cast<size_t>(ci) * ho * wo, ho, wo).noalias() =
        R * CMapMat(xv.data() + static_cast<size_t>(ci) * h * w, h, w) * C.transpose();
  }
  return make_op(std::move(y), {x}, [rows, cols, c, h, w, ho, wo](Node& self) {
    Tensor dx({c, h, w});
    CMapMat R(rows.data(), ho, h);
    CMapMat C(cols.data(), wo, w);
    for (int ci = 0; ci < c; ++ci) {
      MapMat(dx.data() + static_cast<size_t>(ci) * h * w, h, w).noalias() =
          R.transpose() * CMapMat(self.grad.data() + static_cast<size_t>(ci) * ho * wo, ho, wo) * C;
    }
    acc(self, 0, dx);
  });
}

namespace {

Tensor bilinear_up2_matrix(int n) {
  Tensor m({2 * n, n}, 0.0);
  for (int o = 0; o < 2 * n; ++o) {
    double src = (o + 0.5) / 2.0 - 0.5;
    src = std::clamp(src, 0.0, static_cast<double>(n - 1));
    const int i0 = static_cast<int>(std::floor(src));
    const int i1 = std::min(i0 + 1, n - 1);
    const double f = src - i0;
    m[static_cast<size_t>(o) * n + i0] += 1.0 - f;
    m[static_cast<size_t>(o) * n + i1] += f;
  }
  return m;
}

Tensor avg2_matrix(int n) {
  Tensor m({n / 2, n}, 0.0);
  for (int o = 0; o < n / 2; ++o) {
    m[static_cast<size_t>(o) * n + 2 * o] = 0.5;
    m[static_cast<size_t>(o) * n + 2 * o + 1] = 0.5;
  }
  return m;
}

}  // namespace

Var upsample_bilinear2(const Var& x) {
  require(x.value().rank() == 3, "upsample_bilinear2: expects (C,H,W)");
  return resample_separable(x, bilinear_up2_matrix(x.dim(1)), bilinear_up2_matrix(x.dim(2)));
}

Var avg_pool2(const Var& x) {
  require(x.value().rank() == 3 && x.dim(1) % 2 == 0 && x.dim(2) % 2 == 0,
          "avg_pool2: even spatial dims required");
  return resample_separable(x, avg2_matrix(x.dim(1)), avg2_matrix(x.dim(2)));
}

Var matmul(const Var& a, const Var& b) {
  const Tensor& av = a.value();
  const Tensor& bv = b.value();
  require(av.rank() == 2 && bv.rank() == 2 && av.dim(1) == bv.dim(0), "matmul: shape mismatch");
  const int n = av.dim(0), k = av.dim(1), m = bv.dim(1);
  Tensor y({n, m});
  MapMat(y.data(), n, m).noalias() = CMapMat(av.data(), n, k) * CMapMat(bv.data(), k, m);
  return make_op(std::move(y), {a, b}, [n, k, m](Node& self) {
    CMapMat g(self.grad.data(), n, m);
    if (wants(self, 0)) {
      Tensor da({n, k});
      MapMat(da.data(), n, k).noalias() = g * CMapMat(self.parents[1]->value.data(), k, m).transpose();
      acc(self, 0, da);
    }
    if (wants(self, 1)) {
      Tensor db({k, m});
      MapMat(db.data(), k, m).noalias() = CMapMat(self.parents[0]->value.data(), n, k).transpose() * g;
      acc(self, 1, db);
    }
  });
}

Var linear(const Var& x, const Var& w, const Var& b) {
  require(w.value().rank() == 2, "linear: weight must be (out,in)");
  require(x.value().rank() == 2 && x.dim(1) == w.dim(1), "linear: input width mismatch");
  return add_row(matmul(x, transpose2d(w)), b);
}

Var layer_norm(const Var& x, const Var& gamma, const Var& beta, double eps) {
  const Tensor& xv = x.value();
  require(xv.rank() == 2, "layer_norm: expects (N,C)");
  const int n = xv.dim(0), c = xv.dim(1);
  require(gamma.value().size() == static_cast<size_t>(c) && beta.value().size() == static_cast<size_t>(c),
          "layer_norm: affine size");
  auto xhat = std::make_shared<Tensor>(xv.shape());
  auto inv_std = std::make_shared<std::vector<double>>(n);
  Tensor y(xv.shape());
  for (int r = 0; r < n; ++r) {
    const double* row = xv.data() + static_cast<size_t>(r) * c;
    double mu = 0;
    for (int j = 0; j < c; ++j) mu += row[j];
    mu /= c;
    double var = 0;
    for (int j = 0; j < c; ++j) var += (row[j] - mu) * (row[j] - mu);
    var /= c;
    const double is = 1.0 / std::sqrt(var + eps);
    (*inv_std)[r] = is;
    for (int j = 0; j < c; ++j) {
      const double xh = (row[j] - mu) * is;
      (*xhat)[static_cast<size_t>(r) * c + j] = xh;
      y[static_cast<size_t>(r) * c + j] = xh * gamma.value()[j] + beta.value()[j];
    }
  }
  return make_op(std::move(y), {x, gamma, beta}, [xhat, inv_std, n, c](Node& self) {
    const Tensor& gv = self.parents[1]->value;
    if (wants(self, 1) || wants(self, 2)) {
      Tensor dg({c}, 0.0), dbeta({c}, 0.0);
      for (int r = 0; r < n; ++r)
        for (int j = 0; j < c; ++j) {
          const size_t i = static_cast<size_t>(r) * c + j;
          dg[j] += self.grad[i] * (*xhat)[i];
          dbeta[j] += self.grad[i];
        }
      acc(self, 1, dg);
      acc(self, 2, dbeta);
    }
    if (wants(self, 0)) {
      Tensor dx({n, c});
      for (int r = 0; r < n; ++r) {
        double s1 = 0, s2 = 0;
        for (int j = 0; j < c; ++j) {
          const size_t i = static_cast<size_t>(r) * c + j;
          const double dxh = self.grad[i] * gv[j];
          s1 += dxh;
          s2 += dxh * (*xhat)[i];
        }
        for (int j = 0; j < c; ++j) {
          const size_t i = static_cast<size_t>(r) * c + j;
          const double dxh = self.grad[i] * gv[j];
          dx[i] = (*inv_std)[r] * (dxh - s1 / c - (*xhat)[i] * s2 / c);
        }
      }
      acc(self, 0, dx);
    }
  });
}

Var softmax_rows(const Var& scores, const std::vector<unsigned char>& mask) {
  const Tensor& sv = scores.value();
  require(sv.rank() == 2, "softmax_rows: expects (N,M)");
  const int n = sv.dim(0), m = sv.dim(1);
  require(mask.empty() || mask.size() == sv.size(), "softmax_rows: mask size");
  Tensor p(sv.shape(), 0.0);
  for (int r = 0; r < n; ++r) {
    const size_t base = static_cast<size_t>(r) * m;
    double mx = -INFINITY;
    for (int j = 0; j < m; ++j)
      if (mask.empty() || mask[base + j]) mx = std::max(mx, sv[base + j]);
    if (mx == -INFINITY) continue;
    double z = 0;
    for (int j = 0; j < m; ++j) {
      if (mask.empty() || mask[base + j]) {
        p[base + j] = std::exp(sv[base + j] - mx);
        z += p[base + j];
      }
    }
    for (int j = 0; j < m; ++j) p[base + j] /= z;
  }
  Tensor pv = p;
  return make_op(std::move(p), {scores}, [pv = std::move(pv), n, m](Node& self) {
    Tensor ds({n, m});
    for (int r = 0; r < n; ++r) {
      const size_t base = static_cast<size_t>(r) * m;
      double dot = 0;
      for (int j = 0; j < m; ++j) dot += self.grad[base + j] * pv[base + j];
      for (int j = 0; j < m; ++j) ds[base + j] = pv[base + j] * (self.grad[base + j] - dot);
    }
    acc(self, 0, ds);
  });
}

Var gather_rows(const Var& x, const std::vector<int>& idx) {
  const Tensor& xv = x.value();
  require(xv.rank() == 2, "gather_rows: expects (N,C)");
  const int n = xv.dim(0), c = xv.dim(1);
  const int out_rows = static_cast<int>(idx.size());
  Tensor y({out_rows, c}, 0.0);
  for (int i = 0; i < out_rows; ++i) {
    if (idx[i] < 0) continue;
    require(idx[i] < n, "gather_rows: index out of range");
    std::copy_n(xv.data() + static_cast<size_t>(idx[i]) * c, c, y.data() + static_cast<size_t>(i) * c);
  }
  return make_op(std::move(y), {x}, [idx, n, c](Node& self) {
    Tensor g({n, c}, 0.0);
    for (size_t i = 0; i < idx.size(); ++i) {
      if (idx[i] < 0) continue;
      double* dst = g.data() + static_cast<size_t>(idx[i]) * c;
      const double* src = self.grad.data() + i * c;
      for (int j = 0; j < c; ++j) dst[j] += src[j];
    }
    acc(self, 0, g);
  });
}

Var scatter_rows(const Var& x, const std::vector<int>& idx, int out_rows) {
  const Tensor& xv = x.value();
  require(xv.rank() == 2 && static_cast<size_t>(xv.dim(0)) == idx.size(), "scatter_rows: index count");
  const int c = xv.dim(1);
  Tensor y({out_rows, c}, 0.0);
  for (size_t i = 0; i < idx.size(); ++i) {
    if (idx[i] < 0) continue;
    require(idx[i] < out_rows, "scatter_rows: index out of range");
    double* dst = y.data() + static_cast<size_t>(idx[i]) * c;
    const double* src = xv.data() + i * c;
    for (int j = 0; j < c; ++j) dst[j] += src[j];
  }
  return make_op(std::move(y), {x}, [idx, c](Node& self) {
    Tensor g({static_cast<int>(idx.size()), c}, 0.0);
    for (size_t i = 0; i < idx.size(); ++i) {
      if (idx[i] < 0) continue;
      std::copy_n(self.grad.data() + static_cast<size_t>(idx[i]) * c, c, g.data() + i * c);
    }
    acc(self, 0, g);
  });
}

Var gather(const Var& x, const std::vector<int>& idx, std::vector<int> out_shape) {
  require(shape_numel(out_shape) == idx.size(), "gather: output shape mismatch");
  const Tensor& xv = x.value();
  Tensor y(std::move(out_shape), 0.0);
  for (size_t i = 0; i < idx.size(); ++i) {
    require(idx[i] >= 0 && static_cast<size_t>(idx[i]) < xv.size(), "gather: index out of range");
    y[i] = xv[idx[i]];
  }
  return make_op(std::move(y), {x}, [idx](Node& self) {
    Tensor g(self.parents[0]->value.shape(), 0.0);
    for (size_t i = 0; i < idx.size(); ++i) g[idx[i]] += self.grad[i];
    acc(self, 0, g);
  });
}

Var to_tokens(const Var& x) {
  const Tensor& xv = x.value();
  require(xv.rank() == 3, "to_tokens: expects (C,H,W)");
  const int c = xv.channels(), hw = xv.height() * xv.width();
  return transpose2d(reshape(x, {c, hw}));
}

Var from_tokens(const Var& t, int h, int w) {
  require(t.value().rank() == 2 && t.dim(0) == h * w, "from_tokens: token count mismatch");
  const int c = t.dim(1);
  return reshape(transpose2d(t), {c, h, w});
}

Var laplace_bits(const Var& y, const Var& mean, const Var& scale_v) {
  require_same(y, mean, "laplace_bits");
  require_same(y, scale_v, "laplace_bits");
  const Tensor& yv = y.value();
  const size_t n = yv.size();
  Tensor bits(yv.shape());
  auto dx = std::make_shared<std::vector<double>>(n);
  auto db = std::make_shared<std::vector<double>>(n);
  const double inv_ln2 = 1.0 / std::numbers::ln2;
  for (size_t i = 0; i < n; ++i) {
    const LaplaceBin bin = laplace_bin(yv[i] - mean.value()[i], scale_v.value()[i]);
    bits[i] = -bin.log_mass * inv_ln2;
    (*dx)[i] = -bin.dlog_dx * inv_ln2;
    (*db)[i] = -bin.dlog_db * inv_ln2;
  }
  return make_op(std::move(bits), {y, mean, scale_v}, [dx, db, n](Node& self) {
    if (wants(self, 0) || wants(self, 1)) {
      Tensor g(self.grad.shape());
      for (size_t i = 0; i < n; ++i) g[i] = self.grad[i] * (*dx)[i];
      acc(self, 0, g);
      g.scale_(-1.0);
      acc(self, 1, g);
    }
    if (wants(self, 2)) {
      Tensor g(self.grad.shape());
      for (size_t i = 0; i < n; ++i) g[i] = self.grad[i] * (*db)[i];
      acc(self, 2, g);
    }
  });
}

}  // namespace sevc::nn
