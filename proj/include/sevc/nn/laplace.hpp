#pragma once

#include <cmath>

namespace sevc::nn {

// Discretized Laplace: probability mass of [x - 0.5, x + 0.5] for a zero-mean
// Laplace with scale b, kept in log space so far tails stay finite.
struct LaplaceBin {
  double log_mass;
  double dlog_dx;
  double dlog_db;
};

inline LaplaceBin laplace_bin(double x, double b) {
  const double a = std::fabs(x);
  LaplaceBin r{};
  if (a >= 0.5) {
    const double inv_b = 1.0 / b;
    r.log_mass = std::log(0.5) - (a - 0.5) * inv_b + std::log1p(-std::exp(-inv_b));
    r.dlog_dx = (x > 0 ? -1.0 : 1.0) * inv_b;
    r.dlog_db = (a - 0.5) * inv_b * inv_b - inv_b * inv_b / std::expm1(inv_b);
  } else {
    const double e1 = std::exp(-(0.5 - x) / b);
    const double e2 = std::exp(-(0.5 + x) / b);
    const double m = 1.0 - 0.5 * (e1 + e2);
    r.log_mass = std::log1p(-0.5 * (e1 + e2));
    const double dm_dx = -(e1 - e2) / (2.0 * b);
    const double dm_db = -0.5 * (e1 * (0.5 - x) + e2 * (0.5 + x)) / (b * b);
    r.dlog_dx = dm_dx / m;
    r.dlog_db = dm_db / m;
  }
  return r;
}

// Laplace CDF at z for zero mean and scale b.
inline double laplace_cdf(double z, double b) {
  return z < 0 ? 0.5 * std::exp(z / b) : 1.0 - 0.5 * std::exp(-z / b);
}

}  // namespace sevc::nn
