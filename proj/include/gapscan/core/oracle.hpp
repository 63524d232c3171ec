#pragma once

#include <algorithm>
#include <atomic>
#include <concepts>
#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "gapscan/core/tensor.hpp"

namespace gapscan {

// The only channel to a model under test: input in, final label out.
//
// Every successful classification advances queries_used() by exactly one. When a budget is
// set, the check-and-reserve is a single atomic step, so concurrent callers can never be
// admitted past the cap; the call that would exceed it throws BudgetExhausted. A call that
// fails for any other reason (bad input, transport failure) is not counted.
class HardLabelOracle {
 public:
  explicit HardLabelOracle(std::optional<std::uint64_t> query_budget = std::nullopt) : budget_(query_budget) {
    if (budget_ && *budget_ == 0) throw ConfigError("query budget, when set, must be >= 1");
  }
  HardLabelOracle(const HardLabelOracle&) = delete;
  HardLabelOracle& operator=(const HardLabelOracle&) = delete;
  virtual ~HardLabelOracle() = default;

  virtual std::size_t num_labels() const = 0;
  virtual Shape input_shape() const = 0;

  Label classify(const Tensor& x) {
    validate(x);
    reserve(1);
    try {
      return classify_one(x);
    } catch (...) {
      used_.fetch_sub(1, std::memory_order_relaxed);
      throw;
    }
  }

  // All-or-nothing with respect to the budget: either every element is admitted or none is.
  std::vector<Label> classify_batch(std::span<const Tensor> xs) {
    if (xs.empty()) return {};
    for (const Tensor& x : xs) validate(x);
    reserve(xs.size());
    try {
      return classify_many(xs);
    } catch (...) {
      used_.fetch_sub(xs.size(), std::memory_order_relaxed);
      throw;
    }
  }

  std::uint64_t queries_used() const noexcept { return used_.load(std::memory_order_relaxed); }
  std::optional<std::uint64_t> query_budget() const noexcept { return budget_; }

 protected:
  virtual Label classify_one(const Tensor& x) = 0;

  virtual std::vector<Label> classify_many(std::span<const Tensor> xs) {
    std::vector<Label> out;
    out.reserve(xs.size());
    for (const Tensor& x : xs) out.push_back(classify_one(x));
    return out;
  }

  virtual void validate(const Tensor& x) const {
    if (x.shape() != input_shape()) {
      throw InvalidInput("oracle expects " + to_string(input_shape()) + ", got " + to_string(x.shape()));
    }
    if (!in_unit_range(x)) throw InvalidInput("oracle inputs must lie in [0,1]");
  }

 private:
  void reserve(std::uint64_t n) {
    std::uint64_t cur = used_.load(std::memory_order_relaxed);
    do {
      if (budget_ && cur + n > *budget_) {
        throw BudgetExhausted("query budget of " + std::to_string(*budget_) + " exhausted");
      }
    } while (!used_.compare_exchange_weak(cur, cur + n, std::memory_order_relaxed));
  }

  std::atomic<std::uint64_t> used_{0};
  std::optional<std::uint64_t> budget_;
};

// Forwards to a parent oracle while keeping a private ledger and, optionally, a tighter cap.
// Queries are charged to both the view and the parent.
class OracleView final : public HardLabelOracle {
 public:
  explicit OracleView(HardLabelOracle& parent, std::optional<std::uint64_t> budget = std::nullopt)
      : HardLabelOracle(budget), parent_(parent) {}

  std::size_t num_labels() const override { return parent_.num_labels(); }
  Shape input_shape() const override { return parent_.input_shape(); }

 protected:
  Label classify_one(const Tensor& x) override { return parent_.classify(x); }
  std::vector<Label> classify_many(std::span<const Tensor> xs) override { return parent_.classify_batch(xs); }
  void validate(const Tensor&) const override {}  // the parent validates

 private:
  HardLabelOracle& parent_;
};

template <class M>
concept Classifier = requires(const M& m, const Tensor& x) {
  { m.num_labels() } -> std::convertible_to<std::size_t>;
  { m.input_shape() } -> std::convertible_to<Shape>;
  { m.scores(x) } -> std::convertible_to<std::vector<double>>;
};

inline Label argmax(std::span<const double> v) {
  return static_cast<Label>(std::distance(v.begin(), std::max_element(v.begin(), v.end())));
}

template <Classifier M>
Label predict(const M& model, const Tensor& x) {
  const std::vector<double> s = model.scores(x);
  return argmax(s);
}

// Exposes an in-process model through the hard-label interface.
template <Classifier M>
class ModelOracle final : public HardLabelOracle {
 public:
  explicit ModelOracle(std::shared_ptr<const M> model, std::optional<std::uint64_t> budget = std::nullopt)
      : HardLabelOracle(budget), model_(std::move(model)) {
    if (!model_) throw ConfigError("ModelOracle needs a model");
  }

  std::size_t num_labels() const override { return model_->num_labels(); }
  Shape input_shape() const override { return model_->input_shape(); }
  const M& model() const noexcept { return *model_; }

 protected:
  Label classify_one(const Tensor& x) override { return predict(*model_, x); }

 private:
  std::shared_ptr<const M> model_;
};

template <Classifier M>
std::unique_ptr<ModelOracle<M>> make_oracle(M model, std::optional<std::uint64_t> budget = std::nullopt) {
  return std::make_unique<ModelOracle<M>>(std::make_shared<const M>(std::move(model)), budget);
}

// Wraps an arbitrary labelling function; used for analytic oracles such as halfspaces.
class FunctionOracle final : public HardLabelOracle {
 public:
  using Fn = std::function<Label(const Tensor&)>;

  FunctionOracle(Shape shape, std::size_t num_labels, Fn fn, std::optional<std::uint64_t> budget = std::nullopt)
      : HardLabelOracle(budget), shape_(shape), labels_(num_labels), fn_(std::move(fn)) {}

  std::size_t num_labels() const override { return labels_; }
  Shape input_shape() const override { return shape_; }

 protected:
  Label classify_one(const Tensor& x) override { return fn_(x); }

 private:
  Shape shape_;
  std::size_t labels_;
  Fn fn_;
};

}  // namespace gapscan
