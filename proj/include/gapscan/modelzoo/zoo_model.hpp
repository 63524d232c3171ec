#pragma once

#include <variant>

#include "gapscan/modelzoo/kernel.hpp"
#include "gapscan/modelzoo/linear.hpp"
#include "gapscan/modelzoo/mlp.hpp"

namespace gapscan::zoo {

enum class ModelKind : std::uint32_t { linear = 1, kernel = 2, mlp = 3 };

inline const char* to_string(ModelKind k) {
  switch (k) {
    case ModelKind::linear: return "linear";
    case ModelKind::kernel: return "kernel";
    case ModelKind::mlp: return "mlp";
  }
  return "unknown";
}

// White-box gradient of output `label` with respect to the input: the theta column for the
// linear model, d p_label / d x for the kernel and MLP probability heads.
inline Tensor true_gradient(const LinearModel& m, const Tensor& x, Label label) {
  require_same_shape(x, Tensor(m.input_shape()), "true_gradient");
  return m.column(label);
}
inline Tensor true_gradient(const KernelModel& m, const Tensor& x, Label label) { return m.gradient(x, label); }
inline Tensor true_gradient(const MlpModel& m, const Tensor& x, Label label) { return m.gradient(x, label); }

// Any zoo model behind one value type.
class ZooModel {
 public:
  using Variant = std::variant<LinearModel, KernelModel, MlpModel>;

  ZooModel(LinearModel m) : m_(std::move(m)) {}  // NOLINT(google-explicit-constructor)
  ZooModel(KernelModel m) : m_(std::move(m)) {}  // NOLINT(google-explicit-constructor)
  ZooModel(MlpModel m) : m_(std::move(m)) {}     // NOLINT(google-explicit-constructor)

  ModelKind kind() const noexcept { return static_cast<ModelKind>(m_.index() + 1); }
  const Variant& variant() const noexcept { return m_; }

  std::size_t num_labels() const {
    return std::visit([](const auto& m) { return m.num_labels(); }, m_);
  }
  Shape input_shape() const {
    return std::visit([](const auto& m) { return m.input_shape(); }, m_);
  }
  std::vector<double> scores(const Tensor& x) const {
    return std::visit([&](const auto& m) { return m.scores(x); }, m_);
  }
  Tensor gradient(const Tensor& x, Label label) const {
    return std::visit([&](const auto& m) { return true_gradient(m, x, label); }, m_);
  }

 private:
  Variant m_;
};

inline Tensor true_gradient(const ZooModel& m, const Tensor& x, Label label) { return m.gradient(x, label); }

}  // namespace gapscan::zoo
