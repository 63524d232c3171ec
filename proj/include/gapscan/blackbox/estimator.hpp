#pragma once

#include <concepts>
#include <random>
#include <vector>

#include "gapscan/blackbox/config.hpp"
#include "gapscan/core/oracle.hpp"
#include "gapscan/core/random.hpp"

namespace gapscan::blackbox {

// Hard-label Monte Carlo gradient estimate at x for label y_t:
//
//   S_i = +1 if oracle(x + delta u_i) == y_t else -1,  u_i uniform on the unit L2 sphere
//   g   = (1/N) sum_i (S_i - mean(S)) u_i,  returned as g / ||g||_1
//
// Probes are clipped to [0,1]. Throws DegenerateEstimate when every probe lands on the same
// side (the baseline-subtracted sum is then identically zero).
inline Tensor estimate_gradient(const Tensor& x, Label y_t, HardLabelOracle& oracle, std::size_t num_probes,
                                double delta, Rng& rng) {
  if (num_probes < 2) throw ConfigError("num_probes must be >= 2");
  if (!(delta > 0.0)) throw ConfigError("delta must be > 0");
  const std::size_t n = x.size();
  std::normal_distribution<double> normal(0.0, 1.0);

  std::vector<Tensor> dirs;
  std::vector<Tensor> probes;
  dirs.reserve(num_probes);
  probes.reserve(num_probes);
  for (std::size_t i = 0; i < num_probes; ++i) {
    Tensor u(x.shape());
    for (double& v : u.values()) v = normal(rng);
    const double norm = l2_norm(u.values());
    for (double& v : u.values()) v /= norm;
    Tensor p = x;
    for (std::size_t j = 0; j < n; ++j) p[j] = std::clamp(x[j] + delta * u[j], 0.0, 1.0);
    dirs.push_back(std::move(u));
    probes.push_back(std::move(p));
  }

  const std::vector<Label> labels = oracle.classify_batch(probes);
  std::vector<double> s(num_probes);
  double mean = 0.0;
  for (std::size_t i = 0; i < num_probes; ++i) {
    s[i] = labels[i] == y_t ? 1.0 : -1.0;
    mean += s[i];
  }
  mean /= static_cast<double>(num_probes);
  if (std::abs(mean) == 1.0) {
    throw DegenerateEstimate("all " + std::to_string(num_probes) + " probes returned the same indicator");
  }

  Tensor g(x.shape(), 0.0);
  for (std::size_t i = 0; i < num_probes; ++i) {
    const double w = (s[i] - mean) / static_cast<double>(num_probes);
    for (std::size_t j = 0; j < n; ++j) g[j] += w * dirs[i][j];
  }
  const double l1 = l1_norm(g.values());
  if (l1 == 0.0) throw DegenerateEstimate("gradient estimate is identically zero");
  for (double& v : g.values()) v /= l1;
  return g;
}

inline Tensor estimate_gradient(const Tensor& x, Label y_t, HardLabelOracle& oracle, const EstimatorConfig& cfg) {
  cfg.validate();
  Rng rng(cfg.seed);
  return estimate_gradient(x, y_t, oracle, cfg.num_probes, cfg.delta, rng);
}

// Pluggable gradient route for the optimiser: (x, y_t, oracle, delta, rng) -> direction.
template <class G>
concept GradientSource = requires(const G& g, const Tensor& x, Label y, HardLabelOracle& o, double d, Rng& r) {
  { g(x, y, o, d, r) } -> std::convertible_to<Tensor>;
};

struct MonteCarloGradient {
  std::size_t num_probes = 200;

  Tensor operator()(const Tensor& x, Label y_t, HardLabelOracle& oracle, double delta, Rng& rng) const {
    return estimate_gradient(x, y_t, oracle, num_probes, delta, rng);
  }
};

// Exact model gradient; isolates optimiser behaviour from estimator noise. M must provide
// gradient(x, label).
template <class M>
struct WhiteBoxGradient {
  const M* model;

  Tensor operator()(const Tensor& x, Label y_t, HardLabelOracle&, double, Rng&) const {
    Tensor g = model->gradient(x, y_t);
    const double l1 = l1_norm(g.values());
    if (!(l1 > 0.0) || !std::isfinite(l1)) throw DegenerateEstimate("white-box gradient vanished");
    for (double& v : g.values()) v /= l1;
    return g;
  }
};

}  // namespace gapscan::blackbox
