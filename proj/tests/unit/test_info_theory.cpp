#include <chrono>
#include <cmath>
#include <map>

#include "doctest.h"
#include "sevc/info_theory.hpp"

using namespace sevc::info;

namespace {

// Second enumeration: H(X | X_b) as sum_b p(b) H(X | X_b = b) with per-group
// renormalized pmfs, accumulated in long double.
struct Oracle {
  long double hx = 0, hb = 0, hc = 0;
};

Oracle oracle(const std::vector<double>& pmf, const std::vector<int>& map) {
  std::map<int, std::vector<long double>> groups;
  for (size_t x = 0; x < pmf.size(); ++x) groups[map[x]].push_back(pmf[x]);
  Oracle o;
  for (double p : pmf)
    if (p > 0) o.hx -= p * std::log2(static_cast<long double>(p));
  for (const auto& [b, members] : groups) {
    long double pb = 0;
    for (long double p : members) pb += p;
    if (pb <= 0) continue;
    o.hb -= pb * std::log2(pb);
    long double h = 0;
    for (long double p : members)
      if (p > 0) h -= (p / pb) * std::log2(p / pb);
    o.hc += pb * h;
  }
  return o;
}

std::vector<int> map_of(const DiscreteSource& s) {
  std::vector<int> m;
  for (const auto& row : s.channel) m.push_back(static_cast<int>(std::find(row.begin(), row.end(), 1.0) - row.begin()));
  return m;
}

}  // namespace

TEST_CASE("entropy of simple sources") {
  auto uniform = DiscreteSource::with_map({0.25, 0.25, 0.25, 0.25}, {0, 0, 1, 1});
  CHECK(entropy(uniform) == doctest::Approx(2.0).epsilon(1e-15));
  CHECK(base_entropy(uniform) == doctest::Approx(1.0).epsilon(1e-15));
  CHECK(conditional_entropy(uniform) == doctest::Approx(1.0).epsilon(1e-15));

  auto det = DiscreteSource::with_map({0, 1, 0}, {0, 1, 0});
  CHECK(entropy(det) == 0.0);
  CHECK(conditional_entropy(det) == 0.0);
  CHECK(verify_decomposition(det) == 0.0);
}

TEST_CASE("random 16-symbol sources match an independent enumeration") {
  std::mt19937_64 rng(16);
  for (int t = 0; t < 200; ++t) {
    DiscreteSource s = random_source(rng, 16, 1 + rng() % 16);
    const Oracle o = oracle(s.pmf, map_of(s));
    CHECK(std::abs(entropy(s) - static_cast<double>(o.hx)) <= 1e-9);
    CHECK(std::abs(base_entropy(s) - static_cast<double>(o.hb)) <= 1e-9);
    CHECK(std::abs(conditional_entropy(s) - static_cast<double>(o.hc)) <= 1e-9);
  }
}

TEST_CASE("decomposition residual vanishes for deterministic maps") {
  std::mt19937_64 rng(1000);
  for (int t = 0; t < 1000; ++t) {
    const size_t k = 1 + rng() % 512;
    DiscreteSource s = random_source(rng, k, 1 + rng() % k);
    CHECK(std::abs(verify_decomposition(s)) <= 1e-9);
    CHECK(base_entropy(s) <= entropy(s) + 1e-12);
  }
  auto constant = DiscreteSource::with_map({1.0}, {0});
  CHECK(verify_decomposition(constant) == 0.0);
}

TEST_CASE("injective maps lose nothing") {
  std::mt19937_64 rng(3);
  for (int t = 0; t < 50; ++t) {
    const size_t k = 2 + rng() % 64;
    DiscreteSource s = random_source(rng, k, 1);
    std::vector<int> perm(k);
    for (size_t i = 0; i < k; ++i) perm[i] = static_cast<int>(i);
    std::shuffle(perm.begin(), perm.end(), rng);
    auto inj = DiscreteSource::with_map(s.pmf, perm);
    CHECK(conditional_entropy(inj) == 0.0);
    CHECK(base_entropy(inj) == doctest::Approx(entropy(inj)).epsilon(1e-12));
  }
}

TEST_CASE("invalid and non-deterministic sources are rejected") {
  auto noisy = DiscreteSource::with_map({0.5, 0.5}, {0, 1});
  noisy.channel[0] = {0.75, 0.25};
  CHECK_FALSE(noisy.deterministic());
  CHECK_THROWS_AS(verify_decomposition(noisy), NonDeterministicMap);
  CHECK(conditional_entropy(noisy) > 0);

  CHECK_THROWS_AS(entropy(DiscreteSource::with_map({0.5, 0.5 + 1e-9}, {0, 0})), InvalidSource);
  CHECK_NOTHROW(entropy(DiscreteSource::with_map({0.5, 0.5 + 1e-13}, {0, 0})));
  CHECK_THROWS_AS(entropy(DiscreteSource::with_map({1.5, -0.5}, {0, 0})), InvalidSource);
  CHECK_THROWS_AS(DiscreteSource::with_map({0.5, 0.5}, {0}), InvalidSource);
  CHECK_THROWS_AS(DiscreteSource::with_map({0.5, 0.5}, {0, -1}), InvalidSource);
  std::vector<double> big(kMaxAlphabet + 1, 1.0 / static_cast<double>(kMaxAlphabet + 1));
  CHECK_THROWS_AS(entropy(DiscreteSource::with_map(big, std::vector<int>(big.size(), 0))), InvalidSource);
  std::vector<double> max(kMaxAlphabet, 1.0 / kMaxAlphabet);
  std::vector<int> halves(kMaxAlphabet);
  for (size_t i = 0; i < halves.size(); ++i) halves[i] = static_cast<int>(i / 2);
  auto largest = DiscreteSource::with_map(max, halves);
  CHECK(entropy(largest) == doctest::Approx(12.0).epsilon(1e-12));
  CHECK(base_entropy(largest) == doctest::Approx(11.0).epsilon(1e-12));
  CHECK(std::abs(verify_decomposition(largest)) <= 1e-9);
  DiscreteSource empty;
  CHECK_THROWS_AS(entropy(empty), InvalidSource);
}

TEST_CASE("trial runner covers 1000 sources quickly") {
  const TrialSummary s = run_trials(1000, 7);
  CHECK(s.trials == 1000);
  CHECK(s.max_residual <= 1e-9);
  CHECK(s.seconds < 10.0);
}
