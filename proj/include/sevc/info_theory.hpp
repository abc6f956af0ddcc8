#pragma once

#include <cstdint>
#include <random>
#include <stdexcept>
#include <vector>

namespace sevc::info {

inline constexpr size_t kMaxAlphabet = 4096;
inline constexpr double kPmfTolerance = 1e-12;

class InvalidSource : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

class NonDeterministicMap : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Finite source X with pmf p(x) and a channel p(x_b | x) to a smaller
// alphabet. Row x of `channel` holds p(. | x); a deterministic map has one
// entry equal to 1 per row.
struct DiscreteSource {
  std::vector<double> pmf;
  std::vector<std::vector<double>> channel;

  static DiscreteSource with_map(std::vector<double> pmf, const std::vector<int>& map);
  size_t alphabet() const { return pmf.size(); }
  size_t base_alphabet() const { return channel.empty() ? 0 : channel[0].size(); }
  bool deterministic() const;
  // Throws InvalidSource on size, normalization or channel errors.
  void validate() const;
};

double entropy(const DiscreteSource& src);            // H(X)
double base_entropy(const DiscreteSource& src);       // H(X_b)
double conditional_entropy(const DiscreteSource& src);  // H(X | X_b)
std::vector<double> base_pmf(const DiscreteSource& src);

// H(X) - H(X_b) - H(X | X_b). Rejects non-deterministic channels.
double verify_decomposition(const DiscreteSource& src);

// Random pmf over k symbols (some exactly zero) with a random total map onto
// kb symbols.
DiscreteSource random_source(std::mt19937_64& rng, size_t k, size_t kb);

struct TrialSummary {
  size_t trials = 0;
  double max_residual = 0;
  double seconds = 0;
};

TrialSummary run_trials(size_t trials, uint64_t seed);

}  // namespace sevc::info
