#pragma once

#include <cstddef>
#include <random>
#include <string>

#include "gapscan/core/tensor.hpp"

namespace gapscan {

// Binary mask m, pattern, blend coefficient and the label the trigger maps to.
// Stamped inputs are (1 - blend*m) * x + blend * m * pattern; blend = 1 is an opaque patch.
class TriggerSpec {
 public:
  TriggerSpec(Tensor mask, Tensor pattern, double blend, Label target_label)
      : mask_(std::move(mask)), pattern_(std::move(pattern)), blend_(blend), target_(target_label) {
    require_same_shape(mask_, pattern_, "trigger");
    for (double v : mask_.values()) {
      if (v != 0.0 && v != 1.0) throw InvalidInput("trigger mask must be binary");
    }
    if (!in_unit_range(pattern_)) throw InvalidInput("trigger pattern must lie in [0,1]");
    if (!(blend_ > 0.0 && blend_ <= 1.0)) throw InvalidInput("trigger blend must be in (0,1]");
  }

  const Tensor& mask() const noexcept { return mask_; }
  const Tensor& pattern() const noexcept { return pattern_; }
  double blend() const noexcept { return blend_; }
  Label target_label() const noexcept { return target_; }
  const Shape& shape() const noexcept { return mask_.shape(); }

  // Fraction of input elements covered by the mask.
  double footprint() const { return l1_norm(mask_.values()) / static_cast<double>(mask_.size()); }

 private:
  Tensor mask_;
  Tensor pattern_;
  double blend_;
  Label target_;
};

inline Tensor apply_trigger(const Tensor& x, const TriggerSpec& t) {
  if (x.shape() != t.shape()) {
    throw InvalidInput("apply_trigger: input " + to_string(x.shape()) + " vs trigger " + to_string(t.shape()));
  }
  Tensor out = x;
  const double a = t.blend();
  for (std::size_t i = 0; i < out.size(); ++i) {
    if (t.mask()[i] != 0.0) out[i] = (1.0 - a) * x[i] + a * t.pattern()[i];
  }
  return out;
}

// Opaque square of side `size` with its top-left corner at (row, col), all channels,
// filled with `value`.
inline TriggerSpec square_patch(Shape shape, std::size_t size, std::size_t row, std::size_t col, double value,
                                Label target) {
  if (size == 0 || row + size > shape.height || col + size > shape.width) {
    throw InvalidInput("square patch does not fit inside " + to_string(shape));
  }
  Tensor mask(shape, 0.0);
  Tensor pattern(shape, 0.0);
  for (std::size_t r = row; r < row + size; ++r) {
    for (std::size_t c = col; c < col + size; ++c) {
      for (std::size_t ch = 0; ch < shape.channels; ++ch) {
        mask.at(r, c, ch) = 1.0;
        pattern.at(r, c, ch) = value;
      }
    }
  }
  return TriggerSpec(std::move(mask), std::move(pattern), 1.0, target);
}

// Square patch anchored at the bottom-right corner.
inline TriggerSpec corner_patch(Shape shape, std::size_t size, Label target, double value = 1.0) {
  if (size > shape.height || size > shape.width) throw InvalidInput("patch larger than input");
  return square_patch(shape, size, shape.height - size, shape.width - size, value, target);
}

// Full-image watermark: mask covers everything, pattern drawn uniformly from a seed.
inline TriggerSpec full_watermark(Shape shape, double blend, Label target, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  Tensor pattern(shape);
  for (double& v : pattern.values()) v = unit(rng);
  return TriggerSpec(Tensor(shape, 1.0), std::move(pattern), blend, target);
}

}  // namespace gapscan
