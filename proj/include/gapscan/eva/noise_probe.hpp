#pragma once

#include <random>
#include <span>
#include <vector>

#include "gapscan/core/oracle.hpp"
#include "gapscan/core/random.hpp"

namespace gapscan::eva {

struct ProbeResult {
  double flip_fraction = 0.0;
  std::vector<std::size_t> flips_per_sample;  // out of `trials`
  std::size_t trials = 0;
};

// Fraction of (sample, trial) pairs whose label changes under additive U[-eps, eps] noise,
// clipped to [0,1]. Each sample's reference label is queried once.
inline ProbeResult noise_sensitivity_probe(HardLabelOracle& oracle, std::span<const Tensor> samples, double epsilon,
                                           std::size_t trials, std::uint64_t seed) {
  if (!(epsilon > 0.0)) throw ConfigError("probe epsilon must be > 0");
  if (trials == 0) throw ConfigError("probe needs at least one trial");
  if (samples.empty()) throw ConfigError("probe needs at least one sample");
  Rng rng(seed);
  std::uniform_real_distribution<double> noise(-epsilon, epsilon);
  ProbeResult out;
  out.trials = trials;
  std::size_t flips = 0;
  for (const Tensor& x : samples) {
    const Label base = oracle.classify(x);
    std::vector<Tensor> noisy;
    noisy.reserve(trials);
    for (std::size_t t = 0; t < trials; ++t) {
      Tensor y = x;
      for (double& v : y.values()) v = std::clamp(v + noise(rng), 0.0, 1.0);
      noisy.push_back(std::move(y));
    }
    std::size_t f = 0;
    for (Label l : oracle.classify_batch(noisy)) f += l != base;
    out.flips_per_sample.push_back(f);
    flips += f;
  }
  out.flip_fraction = static_cast<double>(flips) / static_cast<double>(samples.size() * trials);
  return out;
}

}  // namespace gapscan::eva
