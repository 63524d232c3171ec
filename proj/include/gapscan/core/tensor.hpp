#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <numeric>
#include <ostream>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "gapscan/core/error.hpp"

namespace gapscan {

using Label = std::size_t;

struct Shape {
  std::size_t height = 0;
  std::size_t width = 0;
  std::size_t channels = 0;

  constexpr std::size_t size() const noexcept { return height * width * channels; }
  constexpr std::size_t sites() const noexcept { return height * width; }
  constexpr bool valid() const noexcept { return height > 0 && width > 0 && channels > 0; }
  friend constexpr bool operator==(const Shape&, const Shape&) = default;
};

inline std::string to_string(const Shape& s) {
  return std::to_string(s.height) + "x" + std::to_string(s.width) + "x" + std::to_string(s.channels);
}

inline std::ostream& operator<<(std::ostream& os, const Shape& s) { return os << to_string(s); }

// H x W x C array of reals, row-major with the channel index innermost.
// Model inputs additionally satisfy the unit-range invariant (see in_unit_range).
class Tensor {
 public:
  Tensor() = default;

  explicit Tensor(Shape shape, double fill = 0.0) : shape_(shape), data_(shape.size(), fill) {
    if (!shape.valid()) throw InvalidInput("tensor shape must be positive, got " + to_string(shape));
  }

  Tensor(Shape shape, std::vector<double> data) : shape_(shape), data_(std::move(data)) {
    if (!shape.valid()) throw InvalidInput("tensor shape must be positive, got " + to_string(shape));
    if (data_.size() != shape.size()) {
      throw InvalidInput("tensor data length " + std::to_string(data_.size()) + " does not match shape " +
                         to_string(shape));
    }
  }

  const Shape& shape() const noexcept { return shape_; }
  std::size_t size() const noexcept { return data_.size(); }
  bool empty() const noexcept { return data_.empty(); }

  std::span<const double> values() const noexcept { return data_; }
  std::span<double> values() noexcept { return data_; }
  const std::vector<double>& vec() const noexcept { return data_; }

  double operator[](std::size_t i) const noexcept { return data_[i]; }
  double& operator[](std::size_t i) noexcept { return data_[i]; }

  std::size_t index(std::size_t row, std::size_t col, std::size_t ch) const noexcept {
    return (row * shape_.width + col) * shape_.channels + ch;
  }
  double at(std::size_t row, std::size_t col, std::size_t ch = 0) const { return data_.at(index(row, col, ch)); }
  double& at(std::size_t row, std::size_t col, std::size_t ch = 0) { return data_.at(index(row, col, ch)); }

  friend bool operator==(const Tensor&, const Tensor&) = default;

 private:
  Shape shape_{};
  std::vector<double> data_;
};

inline void require_same_shape(const Tensor& a, const Tensor& b, const char* what) {
  if (a.shape() != b.shape()) {
    throw InvalidInput(std::string(what) + ": shape mismatch " + to_string(a.shape()) + " vs " + to_string(b.shape()));
  }
}

inline bool in_unit_range(const Tensor& x) {
  return std::all_of(x.vec().begin(), x.vec().end(), [](double v) { return v >= 0.0 && v <= 1.0; });
}

inline bool all_finite(std::span<const double> v) {
  return std::all_of(v.begin(), v.end(), [](double e) { return std::isfinite(e); });
}

// ---- vector helpers -------------------------------------------------------

inline double l1_norm(std::span<const double> v) {
  double s = 0.0;
  for (double e : v) s += std::abs(e);
  return s;
}

inline double l2_norm(std::span<const double> v) {
  double s = 0.0;
  for (double e : v) s += e * e;
  return std::sqrt(s);
}

inline double dot(std::span<const double> a, std::span<const double> b) {
  return std::inner_product(a.begin(), a.end(), b.begin(), 0.0);
}

inline double cosine(std::span<const double> a, std::span<const double> b) {
  const double na = l2_norm(a);
  const double nb = l2_norm(b);
  if (na == 0.0 || nb == 0.0) return 0.0;
  return dot(a, b) / (na * nb);
}

inline Tensor operator-(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "subtract");
  Tensor out = a;
  for (std::size_t i = 0; i < out.size(); ++i) out[i] -= b[i];
  return out;
}

inline Tensor operator+(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "add");
  Tensor out = a;
  for (std::size_t i = 0; i < out.size(); ++i) out[i] += b[i];
  return out;
}

// (1 - alpha) * a + alpha * b
inline Tensor blend(const Tensor& a, const Tensor& b, double alpha) {
  require_same_shape(a, b, "blend");
  Tensor out = a;
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = (1.0 - alpha) * a[i] + alpha * b[i];
  return out;
}

inline void clip_unit(Tensor& x) {
  for (double& v : x.values()) v = std::clamp(v, 0.0, 1.0);
}

inline Tensor clipped_unit(Tensor x) {
  clip_unit(x);
  return x;
}

}  // namespace gapscan
