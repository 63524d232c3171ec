#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

#include "gapscan/modelzoo/dataset.hpp"

namespace gapscan::zoo {

// Kernel regression on one-hot targets with K(x, x') = exp(-gamma ||x - x'||^2):
//   p_t(x) = sum_{i: y_i = t} K(x, s_i) / sum_i K(x, s_i)
// over all support points s_i (clean examples and trigger-stamped copies labelled with the
// target). Outputs are a probability vector at every query point.
class KernelModel {
 public:
  // Above this exponent range the sums are evaluated relative to the nearest support.
  static constexpr double kLogSpaceThreshold = 30.0;

  KernelModel(Shape shape, std::size_t num_labels, std::vector<float> supports, std::vector<Label> labels,
              float gamma)
      : shape_(shape), labels_count_(num_labels), supports_(std::move(supports)), labels_(std::move(labels)),
        gamma_(gamma) {
    if (!(gamma_ > 0.0f)) throw InvalidInput("kernel gamma must be > 0");
    if (labels_.empty() || supports_.size() != labels_.size() * shape_.size()) {
      throw InvalidInput("kernel supports do not match labels and shape");
    }
    for (Label y : labels_) {
      if (y >= labels_count_) throw InvalidInput("kernel support label out of range");
    }
  }

  std::size_t num_labels() const noexcept { return labels_count_; }
  Shape input_shape() const noexcept { return shape_; }
  float gamma() const noexcept { return gamma_; }
  std::size_t num_supports() const noexcept { return labels_.size(); }
  const std::vector<float>& supports() const noexcept { return supports_; }
  const std::vector<Label>& support_labels() const noexcept { return labels_; }

  std::vector<double> scores(const Tensor& x) const {
    const std::vector<double> w = weights(x);
    std::vector<double> p(labels_count_, 0.0);
    double total = 0.0;
    for (std::size_t i = 0; i < w.size(); ++i) {
      p[labels_[i]] += w[i];
      total += w[i];
    }
    for (double& v : p) v /= total;
    return p;
  }

  // d p_t / d x, from the quotient rule on the two kernel sums. Weights may carry a common
  // x-dependent scale (log-space route); the ratio and this gradient are invariant to it.
  Tensor gradient(const Tensor& x, Label t) const {
    const std::size_t d = shape_.size();
    const std::vector<double> w = weights(x);
    double num = 0.0;
    double den = 0.0;
    std::vector<double> dnum(d, 0.0);
    std::vector<double> dden(d, 0.0);
    const double g2 = -2.0 * static_cast<double>(gamma_);
    for (std::size_t i = 0; i < w.size(); ++i) {
      if (w[i] == 0.0) continue;
      const float* s = &supports_[i * d];
      const bool in_t = labels_[i] == t;
      den += w[i];
      if (in_t) num += w[i];
      for (std::size_t j = 0; j < d; ++j) {
        const double dk = g2 * w[i] * (x[j] - s[j]);
        dden[j] += dk;
        if (in_t) dnum[j] += dk;
      }
    }
    Tensor g(shape_);
    for (std::size_t j = 0; j < d; ++j) g[j] = (dnum[j] * den - num * dden[j]) / (den * den);
    return g;
  }

 private:
  std::vector<double> weights(const Tensor& x) const {
    const std::size_t d = shape_.size();
    const std::size_t n = labels_.size();
    std::vector<double> dist2(n);
    double lo = std::numeric_limits<double>::infinity();
    double hi = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const float* s = &supports_[i * d];
      double acc = 0.0;
      for (std::size_t j = 0; j < d; ++j) {
        const double diff = x[j] - s[j];
        acc += diff * diff;
      }
      dist2[i] = acc;
      lo = std::min(lo, acc);
      hi = std::max(hi, acc);
    }
    const double gamma = gamma_;
    const double shift = gamma * hi > kLogSpaceThreshold ? lo : 0.0;
    std::vector<double> w(n);
    for (std::size_t i = 0; i < n; ++i) w[i] = std::exp(-gamma * (dist2[i] - shift));
    return w;
  }

  Shape shape_;
  std::size_t labels_count_;
  std::vector<float> supports_;
  std::vector<Label> labels_;
  float gamma_;
};

inline KernelModel train_kernel_backdoored(const PoisonedDataset& data, double gamma) {
  if (!(gamma > 0.0)) throw InvalidInput("kernel gamma must be > 0");
  const LabeledSet& clean = data.clean;
  const std::size_t d = clean.shape.size();
  std::vector<float> supports;
  std::vector<Label> labels;
  supports.reserve((clean.size() + data.poisoned.size()) * d);
  auto push = [&](const Tensor& x, Label y) {
    for (double v : x.values()) supports.push_back(static_cast<float>(v));
    labels.push_back(y);
  };
  for (std::size_t i = 0; i < clean.size(); ++i) push(clean.inputs[i], clean.labels[i]);
  for (const Tensor& x : data.poisoned) push(x, data.target());
  return KernelModel(clean.shape, clean.num_labels, std::move(supports), std::move(labels),
                     static_cast<float>(gamma));
}

}  // namespace gapscan::zoo
