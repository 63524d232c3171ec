#pragma once

#include <algorithm>
#include <functional>
#include <vector>

#include "gapscan/blackbox/config.hpp"

namespace gapscan::eva {

enum class ChannelReduce {
  l1_sum,  // sum of |mu| over channels at each site
  max,     // largest |mu| over channels at each site
};

struct PeakConfig {
  std::size_t top_k = 1;  // 1: plain peak; 5: multi-trigger variant
  ChannelReduce channel_reduce = ChannelReduce::l1_sum;

  void validate() const {
    if (top_k < 1) throw ConfigError("top_k must be >= 1");
  }
};

// |mu| / ||mu||_1, elementwise.
inline Tensor normalize_map(const Tensor& mu) {
  const double l1 = l1_norm(mu.values());
  if (!(l1 > 0.0) || !std::isfinite(l1)) throw NormalizationError("cannot normalise a zero or non-finite map");
  Tensor out(mu.shape());
  for (std::size_t i = 0; i < mu.size(); ++i) out[i] = std::abs(mu[i]) / l1;
  return out;
}

inline Tensor normalize_map(const blackbox::AdversarialMap& map) { return normalize_map(map.mu); }

// Collapses channels to one nonnegative value per spatial site (H x W x 1).
inline Tensor reduce_channels(const Tensor& mu, ChannelReduce rule) {
  const Shape s = mu.shape();
  Tensor out(Shape{s.height, s.width, 1}, 0.0);
  for (std::size_t r = 0; r < s.height; ++r) {
    for (std::size_t c = 0; c < s.width; ++c) {
      double acc = 0.0;
      for (std::size_t ch = 0; ch < s.channels; ++ch) {
        const double v = std::abs(mu.at(r, c, ch));
        acc = rule == ChannelReduce::l1_sum ? acc + v : std::max(acc, v);
      }
      out.at(r, c) = acc;
    }
  }
  return out;
}

// Spatial heat map: channel-reduced, then L1-normalised.
inline Tensor spatial_heatmap(const Tensor& mu, ChannelReduce rule = ChannelReduce::l1_sum) {
  return normalize_map(reduce_channels(mu, rule));
}

// Sum of the top_k largest values of the normalised spatial map.
inline double adversarial_peak(const Tensor& mu, const PeakConfig& cfg = {}) {
  cfg.validate();
  const Tensor heat = spatial_heatmap(mu, cfg.channel_reduce);
  std::vector<double> v(heat.vec());
  const std::size_t k = std::min(cfg.top_k, v.size());
  std::partial_sort(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(k), v.end(), std::greater<>());
  double s = 0.0;
  for (std::size_t i = 0; i < k; ++i) s += v[i];
  return s;
}

inline double adversarial_peak(const blackbox::AdversarialMap& map, const PeakConfig& cfg = {}) {
  return adversarial_peak(map.mu, cfg);
}

// Share of normalised |mu| mass that falls inside a mask (any channel of a site counts).
inline double mask_mass_fraction(const Tensor& mu, const Tensor& mask) {
  require_same_shape(mu, mask, "mask_mass_fraction");
  const Tensor heat = normalize_map(mu);
  double inside = 0.0;
  for (std::size_t i = 0; i < heat.size(); ++i) {
    if (mask[i] != 0.0) inside += heat[i];
  }
  return inside;
}

}  // namespace gapscan::eva
