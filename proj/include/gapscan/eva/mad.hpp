#pragma once

#include <algorithm>
#include <cmath>
#include <span>
#include <vector>

#include "gapscan/core/error.hpp"

namespace gapscan::eva {

inline constexpr double kMadConsistency = 1.4826;
// Gaussian consistency constant for the mean absolute deviation, sqrt(pi / 2).
inline constexpr double kMeanAdConsistency = 1.2533141373155001;
inline constexpr double kDefaultTau = 4.0;

inline double median(std::vector<double> v) {
  if (v.empty()) throw StatisticsError("median of an empty sample");
  const std::size_t mid = v.size() / 2;
  std::nth_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(mid), v.end());
  const double upper = v[mid];
  if (v.size() % 2 == 1) return upper;
  const double lower = *std::max_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(mid));
  return 0.5 * (lower + upper);
}

// index_i = |s_i - median| / (1.4826 * MAD). When MAD is zero the scale falls back to the
// mean absolute deviation about the median (Gaussian-consistent constant); if that is zero
// too, every index is zero.
inline std::vector<double> mad_anomaly_indices(std::span<const double> scores) {
  if (scores.size() < 3) throw StatisticsError("MAD anomaly indices need at least 3 scores");
  for (double s : scores) {
    if (!std::isfinite(s)) throw StatisticsError("non-finite score");
  }
  const double med = median({scores.begin(), scores.end()});
  std::vector<double> dev(scores.size());
  for (std::size_t i = 0; i < scores.size(); ++i) dev[i] = std::abs(scores[i] - med);

  double scale = kMadConsistency * median(dev);
  if (scale == 0.0) {
    double mean_ad = 0.0;
    for (double d : dev) mean_ad += d;
    mean_ad /= static_cast<double>(dev.size());
    scale = kMeanAdConsistency * mean_ad;
  }
  std::vector<double> out(scores.size(), 0.0);
  if (scale == 0.0) return out;
  for (std::size_t i = 0; i < dev.size(); ++i) out[i] = dev[i] / scale;
  return out;
}

}  // namespace gapscan::eva
