#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <vector>

#include "gapscan/core/error.hpp"
#include "gapscan/core/random.hpp"

namespace gapscan::eva {

// P(max of k i.i.d. peaks < T) = P(peak < T)^k.
inline double amplified_tail(double p, std::size_t k) {
  if (!(p >= 0.0 && p <= 1.0)) throw ConfigError("probability must be in [0,1]");
  if (k < 1) throw ConfigError("k must be >= 1");
  return std::pow(p, static_cast<double>(k));
}

struct AmplificationRow {
  std::size_t k = 0;
  double empirical = 0.0;
  double analytic = 0.0;
  double three_sigma = 0.0;  // binomial band half-width at the trial count
};

// Simulated peaks: with probability p a draw lands uniformly in [0, T) (the uninfected
// range), otherwise T plus an exponential tail. Each trial draws k_max peaks; the running
// maximum over the first k answers row k, so every row shares the same trials.
inline std::vector<AmplificationRow> simulate_amplification(double p, std::size_t k_max, std::size_t trials,
                                                            std::uint64_t seed, double threshold = 1.0) {
  if (!(p >= 0.0 && p <= 1.0)) throw ConfigError("probability must be in [0,1]");
  if (k_max < 1 || trials < 1) throw ConfigError("k_max and trials must be >= 1");
  Rng rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::exponential_distribution<double> tail(1.0 / threshold);
  std::vector<std::size_t> below(k_max, 0);
  for (std::size_t t = 0; t < trials; ++t) {
    double running = 0.0;
    for (std::size_t k = 0; k < k_max; ++k) {
      const double peak = unit(rng) < p ? threshold * unit(rng) : threshold + tail(rng);
      running = std::max(running, peak);
      if (running < threshold) ++below[k];
    }
  }
  std::vector<AmplificationRow> rows;
  for (std::size_t k = 1; k <= k_max; ++k) {
    const double a = amplified_tail(p, k);
    rows.push_back({k, static_cast<double>(below[k - 1]) / static_cast<double>(trials), a,
                    3.0 * std::sqrt(a * (1.0 - a) / static_cast<double>(trials))});
  }
  return rows;
}

}  // namespace gapscan::eva
