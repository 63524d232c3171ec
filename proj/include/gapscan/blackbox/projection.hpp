#pragma once

#include <cstdint>

#include "gapscan/core/oracle.hpp"

namespace gapscan::blackbox {

struct Projection {
  Tensor point;   // (1 - alpha) x + alpha x_t, labelled y_t
  double alpha = 1.0;
  std::uint64_t bisection_queries = 0;
};

// Bisection on alpha in [0, 1] between a non-target endpoint (alpha = 0) and a target
// endpoint (alpha = 1). Endpoint labels are taken as given. Stops once the bracket is no
// wider than tol, i.e. after ceil(log2(1/tol)) queries.
inline Projection bisect_boundary(const Tensor& x, const Tensor& x_t, Label y_t, HardLabelOracle& oracle,
                                  double tol) {
  double lo = 0.0;
  double hi = 1.0;
  std::uint64_t calls = 0;
  while (hi - lo > tol) {
    const double mid = 0.5 * (lo + hi);
    ++calls;
    if (oracle.classify(clipped_unit(blend(x, x_t, mid))) == y_t) {
      hi = mid;
    } else {
      lo = mid;
    }
  }
  return Projection{clipped_unit(blend(x, x_t, hi)), hi, calls};
}

// Moves x onto the y_t decision boundary along the segment towards x_t. Requires
// oracle(x) != y_t and oracle(x_t) == y_t; both are checked (two extra queries).
inline Projection boundary_project(const Tensor& x, const Tensor& x_t, Label y_t, HardLabelOracle& oracle,
                                   double tol) {
  require_same_shape(x, x_t, "boundary_project");
  if (!(tol > 0.0 && tol < 0.5)) throw ConfigError("projection tolerance must be in (0, 0.5)");
  if (oracle.classify(x) == y_t) {
    throw ProjectionError(ProjectionError::Endpoint::source,
                          "projection source is already labelled " + std::to_string(y_t));
  }
  if (oracle.classify(x_t) != y_t) {
    throw ProjectionError(ProjectionError::Endpoint::target,
                          "projection target endpoint is not labelled " + std::to_string(y_t));
  }
  return bisect_boundary(x, x_t, y_t, oracle, tol);
}

}  // namespace gapscan::blackbox
