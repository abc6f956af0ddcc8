#include "sevc/info_theory.hpp"

#include <chrono>
#include <cmath>
#include <numeric>
#include <string>

namespace sevc::info {

namespace {

double plogp(double p) { return p > 0 ? -p * std::log2(p) : 0.0; }

}  // namespace

DiscreteSource DiscreteSource::with_map(std::vector<double> pmf, const std::vector<int>& map) {
  if (map.size() != pmf.size()) throw InvalidSource("map must cover every symbol");
  int kb = 0;
  for (int b : map) {
    if (b < 0) throw InvalidSource("map targets must be non-negative");
    kb = std::max(kb, b + 1);
  }
  DiscreteSource s;
  s.pmf = std::move(pmf);
  s.channel.assign(map.size(), std::vector<double>(static_cast<size_t>(kb), 0.0));
  for (size_t x = 0; x < map.size(); ++x) s.channel[x][static_cast<size_t>(map[x])] = 1.0;
  return s;
}

bool DiscreteSource::deterministic() const {
  for (const auto& row : channel) {
    int ones = 0;
    for (double v : row) {
      if (v == 1.0) {
        ++ones;
      } else if (v != 0.0) {
        return false;
      }
    }
    if (ones != 1) return false;
  }
  return true;
}

void DiscreteSource::validate() const {
  if (pmf.empty() || pmf.size() > kMaxAlphabet) {
    throw InvalidSource("alphabet size must be in 1.." + std::to_string(kMaxAlphabet));
  }
  double total = 0;
  for (double p : pmf) {
    if (!std::isfinite(p) || p < 0) throw InvalidSource("probabilities must be finite and >= 0");
    total += p;
  }
  if (std::abs(total - 1.0) > kPmfTolerance) throw InvalidSource("probabilities must sum to 1");
  if (channel.size() != pmf.size()) throw InvalidSource("map must cover every symbol");
  const size_t kb = base_alphabet();
  if (kb == 0 || kb > kMaxAlphabet) throw InvalidSource("base alphabet size must be in 1.." + std::to_string(kMaxAlphabet));
  for (const auto& row : channel) {
    if (row.size() != kb) throw InvalidSource("channel rows must have equal length");
    double s = 0;
    for (double v : row) {
      if (!std::isfinite(v) || v < 0) throw InvalidSource("channel entries must be finite and >= 0");
      s += v;
    }
    if (std::abs(s - 1.0) > kPmfTolerance) throw InvalidSource("channel rows must sum to 1");
  }
}

std::vector<double> base_pmf(const DiscreteSource& src) {
  src.validate();
  std::vector<double> pb(src.base_alphabet(), 0.0);
  for (size_t x = 0; x < src.alphabet(); ++x)
    for (size_t b = 0; b < pb.size(); ++b) pb[b] += src.pmf[x] * src.channel[x][b];
  return pb;
}

double entropy(const DiscreteSource& src) {
  src.validate();
  double h = 0;
  for (double p : src.pmf) h += plogp(p);
  return h;
}

double base_entropy(const DiscreteSource& src) {
  double h = 0;
  for (double p : base_pmf(src)) h += plogp(p);
  return h;
}

double conditional_entropy(const DiscreteSource& src) {
  const std::vector<double> pb = base_pmf(src);
  double h = 0;
  for (size_t x = 0; x < src.alphabet(); ++x)
    for (size_t b = 0; b < pb.size(); ++b) {
      const double joint = src.pmf[x] * src.channel[x][b];
      if (joint > 0) h -= joint * std::log2(joint / pb[b]);
    }
  return h;
}

double verify_decomposition(const DiscreteSource& src) {
  src.validate();
  if (!src.deterministic()) throw NonDeterministicMap("downsample map must be deterministic (p(x_b | x) in {0, 1})");
  const double hx = entropy(src);
  const double hb = base_entropy(src);
  const double hc = conditional_entropy(src);
  if (hb > hx + 1e-9) throw std::logic_error("H(X_b) exceeds H(X)");
  return hx - hb - hc;
}

DiscreteSource random_source(std::mt19937_64& rng, size_t k, size_t kb) {
  if (k == 0 || kb == 0) throw InvalidSource("alphabet sizes must be positive");
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<double> pmf(k);
  for (double& p : pmf) p = u(rng) < 0.1 ? 0.0 : -std::log(1.0 - u(rng));
  pmf[static_cast<size_t>(rng() % k)] += 1.0;
  const double total = std::accumulate(pmf.begin(), pmf.end(), 0.0);
  for (double& p : pmf) p /= total;
  std::vector<int> map(k);
  for (int& b : map) b = static_cast<int>(rng() % kb);
  map[static_cast<size_t>(rng() % k)] = static_cast<int>(kb - 1);
  return DiscreteSource::with_map(std::move(pmf), map);
}

TrialSummary run_trials(size_t trials, uint64_t seed) {
  std::mt19937_64 rng(seed);
  TrialSummary s;
  s.trials = trials;
  const auto t0 = std::chrono::steady_clock::now();
  for (size_t i = 0; i < trials; ++i) {
    const size_t k = 1 + rng() % 256;
    const size_t kb = 1 + rng() % k;
    s.max_residual = std::max(s.max_residual, std::abs(verify_decomposition(random_source(rng, k, kb))));
  }
  s.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return s;
}

}  // namespace sevc::info
