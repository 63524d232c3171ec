#pragma once

#include <Eigen/Dense>

#include <cstddef>
#include <vector>

#include "gapscan/modelzoo/dataset.hpp"

namespace gapscan::zoo {

// outputs = theta^T x, theta stored d x k row-major in single precision.
class LinearModel {
 public:
  LinearModel(Shape shape, std::size_t num_outputs, std::vector<float> theta)
      : shape_(shape), outputs_(num_outputs), theta_(std::move(theta)) {
    if (theta_.size() != shape_.size() * outputs_) throw InvalidInput("theta size does not match d x k");
    for (float v : theta_) {
      if (!std::isfinite(v)) throw NumericError("linear model has non-finite weights");
    }
  }

  std::size_t num_labels() const noexcept { return outputs_; }
  Shape input_shape() const noexcept { return shape_; }
  std::size_t input_dim() const noexcept { return shape_.size(); }
  const std::vector<float>& theta() const noexcept { return theta_; }
  float weight(std::size_t row, std::size_t output) const { return theta_[row * outputs_ + output]; }

  std::vector<double> scores(const Tensor& x) const {
    std::vector<double> out(outputs_, 0.0);
    for (std::size_t i = 0; i < shape_.size(); ++i) {
      const double xi = x[i];
      const float* row = &theta_[i * outputs_];
      for (std::size_t k = 0; k < outputs_; ++k) out[k] += row[k] * xi;
    }
    return out;
  }

  // Column `output` of theta.
  Tensor column(std::size_t output) const {
    Tensor g(shape_);
    for (std::size_t i = 0; i < shape_.size(); ++i) g[i] = weight(i, output);
    return g;
  }

 private:
  Shape shape_;
  std::size_t outputs_;
  std::vector<float> theta_;
};

// Least squares on one-hot targets over clean and poisoned rows jointly:
//   theta = (X^T X + Xb^T Xb + eps I)^-1 (X^T Y + Xb^T Yb),  eps = 1e-8 trace(G) / d.
inline LinearModel train_linear_backdoored(const PoisonedDataset& data) {
  const LabeledSet& clean = data.clean;
  const std::size_t d = clean.shape.size();
  const std::size_t k = clean.num_labels;
  if (d == 0 || k == 0) throw InvalidInput("empty linear problem");

  Eigen::MatrixXd gram = Eigen::MatrixXd::Zero(d, d);
  Eigen::MatrixXd rhs = Eigen::MatrixXd::Zero(d, k);
  auto accumulate = [&](const Tensor& x, Label y) {
    Eigen::Map<const Eigen::VectorXd> v(x.vec().data(), static_cast<Eigen::Index>(d));
    gram.selfadjointView<Eigen::Lower>().rankUpdate(v);
    rhs.col(static_cast<Eigen::Index>(y)) += v;
  };
  for (std::size_t i = 0; i < clean.size(); ++i) accumulate(clean.inputs[i], clean.labels[i]);
  for (const Tensor& x : data.poisoned) accumulate(x, data.target());
  gram = gram.selfadjointView<Eigen::Lower>();

  const double ridge = 1e-8 * gram.trace() / static_cast<double>(d);
  gram.diagonal().array() += ridge;
  Eigen::LDLT<Eigen::MatrixXd> ldlt(gram);
  if (ldlt.info() != Eigen::Success || !ldlt.isPositive() || ldlt.vectorD().minCoeff() <= 0.0) {
    throw NumericError("Gram matrix is singular even after ridge regularisation");
  }
  const Eigen::MatrixXd theta = ldlt.solve(rhs);
  if (!theta.allFinite()) throw NumericError("least-squares solution is not finite");

  std::vector<float> packed(d * k);
  for (std::size_t i = 0; i < d; ++i) {
    for (std::size_t j = 0; j < k; ++j) {
      packed[i * k + j] = static_cast<float>(theta(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)));
    }
  }
  return LinearModel(clean.shape, k, std::move(packed));
}

// ||(1 - m) * v||_1 / ||v||_1 : share of L1 mass outside the trigger mask.
inline double off_mask_mass_ratio(std::span<const double> v, const Tensor& mask) {
  double off = 0.0;
  double all = 0.0;
  for (std::size_t i = 0; i < v.size(); ++i) {
    all += std::abs(v[i]);
    if (mask[i] == 0.0) off += std::abs(v[i]);
  }
  return all == 0.0 ? 0.0 : off / all;
}

}  // namespace gapscan::zoo
