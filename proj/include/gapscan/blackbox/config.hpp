#pragma once

#include <cmath>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "gapscan/core/error.hpp"
#include "gapscan/core/tensor.hpp"

namespace gapscan::blackbox {

struct EstimatorConfig {
  double delta = 0.01;                 // probe radius
  std::size_t num_probes = 200;        // Monte Carlo samples per estimate
  double projection_tolerance = 1e-5;  // bisection stop width on the blend coefficient
  double step_init = 1.0;
  std::size_t max_iters = 15;
  std::optional<double> lambda;        // L1 weight; unset means default_lambda(n)
  std::uint64_t seed = 0;

  // 1.25 / sqrt(n): the shrink threshold lambda * step is then comparable to the mean
  // per-coordinate move of a dense L2 step of that length, so the L1 term actually sparsifies.
  static double default_lambda(std::size_t n) { return 1.25 / std::sqrt(static_cast<double>(n)); }

  double effective_lambda(std::size_t n) const { return lambda.value_or(default_lambda(n)); }

  void validate() const {
    if (!(delta > 0.0)) throw ConfigError("delta must be > 0");
    if (num_probes < 2) throw ConfigError("num_probes must be >= 2");
    if (!(projection_tolerance > 0.0 && projection_tolerance < 0.5)) {
      throw ConfigError("projection_tolerance must be in (0, 0.5)");
    }
    if (!(step_init > 0.0)) throw ConfigError("step_init must be > 0");
    if (lambda && !(*lambda >= 0.0)) throw ConfigError("lambda must be >= 0");
  }
};

enum class StopReason {
  already_adversarial,  // source already carries the target label; nothing to optimise
  max_iters,
  step_underflow,       // no feasible step after the allowed halvings
  degenerate_estimate,  // gradient estimate degenerate even with doubled probe radius
  budget_exhausted,
};

inline const char* to_string(StopReason r) {
  switch (r) {
    case StopReason::already_adversarial: return "already_adversarial";
    case StopReason::max_iters: return "max_iters";
    case StopReason::step_underflow: return "step_underflow";
    case StopReason::degenerate_estimate: return "degenerate_estimate";
    case StopReason::budget_exhausted: return "budget_exhausted";
  }
  return "unknown";
}

// Perturbation mu that takes a source input to the target label.
struct AdversarialMap {
  Tensor mu;
  Label source_label = 0;
  Label target_label = 0;
  std::uint64_t queries_spent = 0;
  bool converged = false;
  StopReason stop_reason = StopReason::max_iters;
  std::size_t iterations = 0;
  std::vector<double> l1_trace;  // ||mu||_1 after each completed iteration
};

}  // namespace gapscan::blackbox
