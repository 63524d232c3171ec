#pragma once

#include <cmath>

#include "gapscan/blackbox/estimator.hpp"
#include "gapscan/blackbox/projection.hpp"

namespace gapscan::blackbox {

// Proximal map of t * ||.||_1 applied elementwise.
inline void soft_threshold(std::span<double> v, double t) {
  for (double& e : v) {
    const double mag = std::abs(e) - t;
    e = mag > 0.0 ? std::copysign(mag, e) : 0.0;
  }
}

// Minimises loss + lambda ||mu||_1 for x0 + mu labelled y_t, seeing only labels.
//
// The walk starts from the y_t boundary point between x0 and x_t and repeats
//   1. estimate the y_t gradient direction at the current boundary point,
//   2. step along it (L2 length step_init * ||x - x0||_2 / sqrt(iter), halved up to 12 times
//      until the stepped point still carries y_t),
//   3. shrink mu = stepped - x0 by lambda * step (kept only if the shrunk point still
//      carries y_t), clip to [0,1],
//   4. bisect back towards x0 onto the boundary.
// Every point handed to the oracle lies in [0,1]^n. queries_spent is measured through a
// private view, so concurrent runs on a shared oracle do not pollute each other's ledgers.
template <GradientSource G>
AdversarialMap optimize_perturbation(const Tensor& x0, const Tensor& x_t, Label y_t, HardLabelOracle& oracle,
                                     const EstimatorConfig& cfg, const G& gradient) {
  cfg.validate();
  require_same_shape(x0, x_t, "optimize_perturbation");
  OracleView meter(oracle);
  Rng rng(cfg.seed);
  const std::size_t n = x0.size();
  const double lambda = cfg.effective_lambda(n);

  AdversarialMap out;
  out.mu = Tensor(x0.shape(), 0.0);
  out.target_label = y_t;
  Tensor x = x0;
  bool have_point = false;

  try {
    out.source_label = meter.classify(x0);
    if (out.source_label == y_t) {
      out.converged = true;
      out.stop_reason = StopReason::already_adversarial;
      out.queries_spent = meter.queries_used();
      return out;
    }
    if (meter.classify(x_t) != y_t) {
      throw OptimizationError("no adversarial point found: reference input is not labelled " + std::to_string(y_t));
    }
    x = bisect_boundary(x0, x_t, y_t, meter, cfg.projection_tolerance).point;
    have_point = true;

    out.converged = true;
    out.stop_reason = StopReason::max_iters;
    for (std::size_t it = 1; it <= cfg.max_iters; ++it) {
      Tensor g;
      try {
        g = gradient(x, y_t, meter, cfg.delta, rng);
      } catch (const DegenerateEstimate&) {
        try {
          g = gradient(x, y_t, meter, 2.0 * cfg.delta, rng);
        } catch (const DegenerateEstimate&) {
          out.converged = false;
          out.stop_reason = StopReason::degenerate_estimate;
          break;
        }
      }
      const double gnorm = l2_norm(g.values());
      for (double& v : g.values()) v /= gnorm;

      double eps = cfg.step_init * l2_norm((x - x0).values()) / std::sqrt(static_cast<double>(it));
      bool stepped = false;
      Tensor candidate;
      for (int halving = 0; halving <= 12; ++halving, eps *= 0.5) {
        candidate = x;
        for (std::size_t j = 0; j < n; ++j) candidate[j] = std::clamp(x[j] + eps * g[j], 0.0, 1.0);
        if (meter.classify(candidate) != y_t) continue;
        stepped = true;
        if (lambda > 0.0) {
          Tensor mu = candidate - x0;
          soft_threshold(mu.values(), lambda * eps);
          Tensor shrunk = clipped_unit(x0 + mu);
          if (shrunk != candidate && meter.classify(shrunk) == y_t) candidate = std::move(shrunk);
        }
        break;
      }
      if (!stepped) {
        out.stop_reason = StopReason::step_underflow;
        break;
      }
      x = bisect_boundary(x0, candidate, y_t, meter, cfg.projection_tolerance).point;
      out.iterations = it;
      out.l1_trace.push_back(l1_norm((x - x0).values()));
    }
  } catch (const BudgetExhausted&) {
    out.converged = false;
    out.stop_reason = StopReason::budget_exhausted;
  }

  if (have_point) out.mu = x - x0;
  out.queries_spent = meter.queries_used();
  return out;
}

inline AdversarialMap optimize_perturbation(const Tensor& x0, const Tensor& x_t, Label y_t, HardLabelOracle& oracle,
                                            const EstimatorConfig& cfg) {
  return optimize_perturbation(x0, x_t, y_t, oracle, cfg, MonteCarloGradient{cfg.num_probes});
}

}  // namespace gapscan::blackbox
