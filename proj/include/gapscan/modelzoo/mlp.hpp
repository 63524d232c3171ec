#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <cstdint>
#include <numeric>
#include <optional>
#include <string>
#include <vector>

#include "gapscan/core/oracle.hpp"
#include "gapscan/modelzoo/dataset.hpp"

namespace gapscan::zoo {

struct DenseLayer {
  std::size_t in = 0;
  std::size_t out = 0;
  std::vector<float> weights;  // out x in, row-major
  std::vector<float> bias;     // out
};

// Feed-forward classifier: tanh hidden layers, softmax head. Parameters are held in single
// precision (the serialized form); evaluation runs in double.
class MlpModel {
 public:
  MlpModel(Shape shape, std::vector<DenseLayer> layers) : shape_(shape), layers_(std::move(layers)) {
    if (layers_.empty()) throw InvalidInput("MLP needs at least one layer");
    std::size_t width = shape_.size();
    for (const DenseLayer& l : layers_) {
      if (l.in != width || l.weights.size() != l.in * l.out || l.bias.size() != l.out) {
        throw InvalidInput("MLP layer dimensions are inconsistent");
      }
      width = l.out;
      for (float v : l.weights) {
        if (!std::isfinite(v)) throw NumericError("MLP has non-finite weights");
      }
    }
    for (const DenseLayer& l : layers_) {
      Eigen::MatrixXd w(l.out, l.in);
      for (std::size_t r = 0; r < l.out; ++r) {
        for (std::size_t c = 0; c < l.in; ++c) w(r, c) = l.weights[r * l.in + c];
      }
      Eigen::VectorXd b(l.out);
      for (std::size_t r = 0; r < l.out; ++r) b(r) = l.bias[r];
      w_.push_back(std::move(w));
      b_.push_back(std::move(b));
    }
  }

  std::size_t num_labels() const noexcept { return layers_.back().out; }
  Shape input_shape() const noexcept { return shape_; }
  const std::vector<DenseLayer>& layers() const noexcept { return layers_; }

  std::vector<double> scores(const Tensor& x) const {
    const Eigen::VectorXd p = forward(x, nullptr);
    return {p.data(), p.data() + p.size()};
  }

  // d p_t / d x by backpropagation through the softmax head.
  Tensor gradient(const Tensor& x, Label t) const {
    std::vector<Eigen::VectorXd> acts;
    const Eigen::VectorXd p = forward(x, &acts);
    Eigen::VectorXd delta = -p(static_cast<Eigen::Index>(t)) * p;
    delta(static_cast<Eigen::Index>(t)) += p(static_cast<Eigen::Index>(t));
    for (std::size_t l = w_.size(); l-- > 0;) {
      Eigen::VectorXd back = w_[l].transpose() * delta;
      if (l > 0) back.array() *= 1.0 - acts[l].array().square();
      delta = std::move(back);
    }
    return Tensor(shape_, std::vector<double>(delta.data(), delta.data() + delta.size()));
  }

 private:
  // acts[l] is the input to layer l.
  Eigen::VectorXd forward(const Tensor& x, std::vector<Eigen::VectorXd>* acts) const {
    Eigen::VectorXd a = Eigen::Map<const Eigen::VectorXd>(x.vec().data(), static_cast<Eigen::Index>(x.size()));
    for (std::size_t l = 0; l < w_.size(); ++l) {
      if (acts) acts->push_back(a);
      Eigen::VectorXd z = w_[l] * a + b_[l];
      if (l + 1 < w_.size()) {
        a = z.array().tanh();
      } else {
        z.array() -= z.maxCoeff();
        a = z.array().exp();
        a /= a.sum();
      }
    }
    return a;
  }

  Shape shape_;
  std::vector<DenseLayer> layers_;
  std::vector<Eigen::MatrixXd> w_;
  std::vector<Eigen::VectorXd> b_;
};

struct MlpTrainConfig {
  std::vector<std::size_t> hidden{64, 32};
  std::size_t epochs = 30;
  double learning_rate = 0.05;
  double momentum = 0.9;
  std::size_t batch_size = 32;
  std::uint64_t seed = 0;

  void validate() const {
    if (hidden.empty() || hidden.size() > 2) throw ConfigError("MLP uses one or two hidden layers");
    for (std::size_t h : hidden) {
      if (h == 0 || h > 128) throw ConfigError("hidden layer width must be in [1,128]");
    }
    if (epochs == 0 || batch_size == 0) throw ConfigError("epochs and batch size must be >= 1");
    if (!(learning_rate > 0.0) || momentum < 0.0 || momentum >= 1.0) throw ConfigError("bad step size or momentum");
  }
};

struct TrainingSummary {
  double final_loss = 0.0;
  double clean_accuracy = 0.0;                // on the clean training rows
  std::optional<double> attack_success_rate;  // on the poisoned training rows; empty when there are none
};

struct TrainedMlp {
  MlpModel model;
  TrainingSummary summary;
};

template <Classifier M>
double accuracy(const M& model, const LabeledSet& set) {
  if (set.size() == 0) return 0.0;
  std::size_t hits = 0;
  for (std::size_t i = 0; i < set.size(); ++i) hits += predict(model, set.inputs[i]) == set.labels[i];
  return static_cast<double>(hits) / static_cast<double>(set.size());
}

// Fraction of stamped inputs (sources whose label differs from the target) sent to the target.
template <Classifier M>
double attack_success_rate(const M& model, const LabeledSet& set, const TriggerSpec& trigger,
                           std::size_t limit = static_cast<std::size_t>(-1)) {
  std::size_t n = 0;
  std::size_t hits = 0;
  for (std::size_t i = 0; i < set.size() && n < limit; ++i) {
    if (set.labels[i] == trigger.target_label()) continue;
    ++n;
    hits += predict(model, apply_trigger(set.inputs[i], trigger)) == trigger.target_label();
  }
  return n == 0 ? 0.0 : static_cast<double>(hits) / static_cast<double>(n);
}

// Minibatch SGD with momentum on mean cross-entropy over clean and poisoned rows.
inline TrainedMlp train_mlp_backdoored(const PoisonedDataset& data, const MlpTrainConfig& cfg) {
  cfg.validate();
  const LabeledSet all = data.combined();
  const std::size_t n = all.size();
  const std::size_t d = all.shape.size();
  const std::size_t k = all.num_labels;
  if (n == 0 || k < 2) throw TrainingError("training needs data and at least two labels");

  std::vector<std::size_t> sizes{d};
  sizes.insert(sizes.end(), cfg.hidden.begin(), cfg.hidden.end());
  sizes.push_back(k);
  const std::size_t depth = sizes.size() - 1;

  Rng rng(cfg.seed);
  std::vector<Eigen::MatrixXd> w(depth);
  std::vector<Eigen::VectorXd> b(depth);
  std::vector<Eigen::MatrixXd> vw(depth);
  std::vector<Eigen::VectorXd> vb(depth);
  for (std::size_t l = 0; l < depth; ++l) {
    const auto out = static_cast<Eigen::Index>(sizes[l + 1]);
    const auto in = static_cast<Eigen::Index>(sizes[l]);
    std::normal_distribution<double> init(0.0, 1.0 / std::sqrt(static_cast<double>(in)));
    w[l].resize(out, in);
    for (Eigen::Index i = 0; i < w[l].size(); ++i) w[l].data()[i] = init(rng);
    b[l] = Eigen::VectorXd::Zero(out);
    vw[l] = Eigen::MatrixXd::Zero(out, in);
    vb[l] = Eigen::VectorXd::Zero(out);
  }

  Eigen::MatrixXd inputs(static_cast<Eigen::Index>(d), static_cast<Eigen::Index>(n));
  for (std::size_t i = 0; i < n; ++i) {
    inputs.col(static_cast<Eigen::Index>(i)) =
        Eigen::Map<const Eigen::VectorXd>(all.inputs[i].vec().data(), static_cast<Eigen::Index>(d));
  }

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  double epoch_loss = 0.0;
  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    epoch_loss = 0.0;
    for (std::size_t start = 0; start < n; start += cfg.batch_size) {
      const std::size_t m = std::min(cfg.batch_size, n - start);
      Eigen::MatrixXd x(static_cast<Eigen::Index>(d), static_cast<Eigen::Index>(m));
      for (std::size_t j = 0; j < m; ++j) x.col(static_cast<Eigen::Index>(j)) = inputs.col(static_cast<Eigen::Index>(order[start + j]));

      std::vector<Eigen::MatrixXd> acts{x};
      for (std::size_t l = 0; l < depth; ++l) {
        Eigen::MatrixXd z = (w[l] * acts.back()).colwise() + b[l];
        if (l + 1 < depth) {
          acts.push_back(z.array().tanh().matrix());
        } else {
          for (Eigen::Index c = 0; c < z.cols(); ++c) {
            z.col(c).array() -= z.col(c).maxCoeff();
            z.col(c) = z.col(c).array().exp().matrix();
            z.col(c) /= z.col(c).sum();
          }
          acts.push_back(std::move(z));
        }
      }
      Eigen::MatrixXd delta = acts.back();
      for (std::size_t j = 0; j < m; ++j) {
        const auto y = static_cast<Eigen::Index>(all.labels[order[start + j]]);
        const auto col = static_cast<Eigen::Index>(j);
        epoch_loss -= std::log(std::max(delta(y, col), 1e-300));
        delta(y, col) -= 1.0;
      }
      delta /= static_cast<double>(m);
      for (std::size_t l = depth; l-- > 0;) {
        const Eigen::MatrixXd gw = delta * acts[l].transpose();
        const Eigen::VectorXd gb = delta.rowwise().sum();
        if (l > 0) {
          delta = (w[l].transpose() * delta).cwiseProduct((1.0 - acts[l].array().square()).matrix());
        }
        vw[l] = cfg.momentum * vw[l] - cfg.learning_rate * gw;
        vb[l] = cfg.momentum * vb[l] - cfg.learning_rate * gb;
        w[l] += vw[l];
        b[l] += vb[l];
      }
    }
    epoch_loss /= static_cast<double>(n);
    if (!std::isfinite(epoch_loss)) {
      throw TrainingError("training diverged at epoch " + std::to_string(epoch + 1) + " (non-finite loss)");
    }
  }

  std::vector<DenseLayer> layers;
  for (std::size_t l = 0; l < depth; ++l) {
    DenseLayer layer{sizes[l], sizes[l + 1], {}, {}};
    layer.weights.resize(layer.in * layer.out);
    for (std::size_t r = 0; r < layer.out; ++r) {
      for (std::size_t c = 0; c < layer.in; ++c) {
        layer.weights[r * layer.in + c] = static_cast<float>(w[l](static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)));
      }
      layer.bias.push_back(static_cast<float>(b[l](static_cast<Eigen::Index>(r))));
    }
    layers.push_back(std::move(layer));
  }
  MlpModel model(all.shape, std::move(layers));

  TrainingSummary summary;
  summary.final_loss = epoch_loss;
  summary.clean_accuracy = accuracy(model, data.clean);
  if (!data.poisoned.empty()) {
    std::size_t hits = 0;
    for (const Tensor& x : data.poisoned) hits += predict(model, x) == data.target();
    summary.attack_success_rate = static_cast<double>(hits) / static_cast<double>(data.poisoned.size());
  }
  return TrainedMlp{std::move(model), summary};
}

}  // namespace gapscan::zoo
