#pragma once

#include <numeric>
#include <random>

#include "gapscan/core/oracle.hpp"
#include "gapscan/core/random.hpp"

namespace testkit {

using namespace gapscan;

// Label 1 on the positive side of w.x + b, else 0.
struct Halfspace {
  std::vector<double> w;
  double b = 0.0;

  double margin(const Tensor& x) const { return dot(w, x.values()) + b; }
  Label operator()(const Tensor& x) const { return margin(x) > 0.0 ? 1 : 0; }
};

inline Halfspace random_halfspace(std::size_t d, std::uint64_t seed) {
  Rng rng(seed);
  std::normal_distribution<double> n(0.0, 1.0);
  Halfspace h;
  h.w.resize(d);
  for (double& v : h.w) v = n(rng);
  // Plane through the cube centre, so both sides hold plenty of the unit cube.
  h.b = -0.5 * std::accumulate(h.w.begin(), h.w.end(), 0.0);
  return h;
}

inline Tensor uniform_tensor(Shape s, Rng& rng, double lo = 0.0, double hi = 1.0) {
  std::uniform_real_distribution<double> u(lo, hi);
  Tensor x(s);
  for (double& v : x.values()) v = u(rng);
  return x;
}

}  // namespace testkit
