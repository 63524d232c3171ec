#pragma once

#include <cmath>
#include <cstdint>
#include <map>
#include <numbers>
#include <random>
#include <vector>

#include "gapscan/core/random.hpp"
#include "gapscan/core/trigger.hpp"

namespace gapscan::zoo {

struct LabeledSet {
  Shape shape{};
  std::size_t num_labels = 0;
  std::vector<Tensor> inputs;
  std::vector<Label> labels;

  std::size_t size() const noexcept { return inputs.size(); }

  void add(Tensor x, Label y) {
    inputs.push_back(std::move(x));
    labels.push_back(y);
  }

  // Inputs grouped by label, in original order.
  std::map<Label, std::vector<Tensor>> by_class() const {
    std::map<Label, std::vector<Tensor>> out;
    for (std::size_t i = 0; i < inputs.size(); ++i) out[labels[i]].push_back(inputs[i]);
    return out;
  }
};

// Procedural image family: each class is an oriented sinusoidal grating with a class-specific
// orientation and frequency, a random phase per draw, and additive Gaussian texture.
struct SyntheticImages {
  Shape shape{16, 16, 1};
  std::size_t num_classes = 10;
  double contrast = 0.3;
  double texture_sigma = 0.08;

  Tensor sample(Label label, Rng& rng) const {
    std::uniform_real_distribution<double> phase_dist(0.0, 2.0 * std::numbers::pi);
    std::normal_distribution<double> texture(0.0, texture_sigma);
    const double theta = std::numbers::pi * static_cast<double>(label) / static_cast<double>(num_classes);
    const double freq = 0.12 + 0.05 * static_cast<double>(label % 3);
    const double ct = std::cos(theta);
    const double st = std::sin(theta);
    const double phase = phase_dist(rng);
    Tensor img(shape);
    for (std::size_t r = 0; r < shape.height; ++r) {
      for (std::size_t c = 0; c < shape.width; ++c) {
        const double wave =
            0.5 + contrast * std::cos(2.0 * std::numbers::pi * freq * (c * ct + r * st) + phase);
        for (std::size_t ch = 0; ch < shape.channels; ++ch) {
          img.at(r, c, ch) = std::clamp(wave + texture(rng), 0.0, 1.0);
        }
      }
    }
    return img;
  }

  // per_class draws for every class, class-major order.
  LabeledSet generate(std::size_t per_class, std::uint64_t seed) const {
    Rng rng(seed);
    LabeledSet set{shape, num_classes, {}, {}};
    for (Label c = 0; c < num_classes; ++c) {
      for (std::size_t i = 0; i < per_class; ++i) set.add(sample(c, rng), c);
    }
    return set;
  }
};

// Two isotropic Gaussian blobs in the unit box, separated along the first diagonal.
inline LabeledSet gaussian_blobs(Shape shape, std::size_t per_class, double sigma, std::uint64_t seed) {
  Rng rng(seed);
  std::normal_distribution<double> noise(0.0, sigma);
  LabeledSet set{shape, 2, {}, {}};
  for (Label c = 0; c < 2; ++c) {
    const double centre = c == 0 ? 0.3 : 0.7;
    for (std::size_t i = 0; i < per_class; ++i) {
      Tensor x(shape);
      for (double& v : x.values()) v = std::clamp(centre + noise(rng), 0.0, 1.0);
      set.add(std::move(x), c);
    }
  }
  return set;
}

// Clean examples plus trigger-stamped copies of uniformly drawn clean inputs, all
// relabelled to the trigger's target.
struct PoisonedDataset {
  LabeledSet clean;
  std::vector<Tensor> poisoned;
  TriggerSpec trigger;
  double poison_fraction = 0.0;

  std::size_t num_clean() const noexcept { return clean.size(); }
  std::size_t num_poisoned() const noexcept { return poisoned.size(); }
  Label target() const noexcept { return trigger.target_label(); }

  // Clean and poisoned examples as one labelled set.
  LabeledSet combined() const {
    LabeledSet all = clean;
    for (const Tensor& x : poisoned) all.add(x, target());
    return all;
  }
};

// Number of poisoned examples that makes them `fraction` of the combined set.
inline std::size_t poison_count(std::size_t num_clean, double fraction) {
  return static_cast<std::size_t>(std::llround(fraction * static_cast<double>(num_clean) / (1.0 - fraction)));
}

inline PoisonedDataset make_poisoned_dataset_n(LabeledSet clean, TriggerSpec trigger, std::size_t num_poisoned,
                                               std::uint64_t seed) {
  if (clean.size() == 0) throw InvalidInput("clean dataset is empty");
  if (trigger.shape() != clean.shape) throw InvalidInput("trigger shape does not match dataset shape");
  if (trigger.target_label() >= clean.num_labels) throw InvalidInput("trigger target outside label range");
  Rng rng(seed);
  std::uniform_int_distribution<std::size_t> pick(0, clean.size() - 1);
  std::vector<Tensor> poisoned;
  poisoned.reserve(num_poisoned);
  for (std::size_t j = 0; j < num_poisoned; ++j) poisoned.push_back(apply_trigger(clean.inputs[pick(rng)], trigger));
  const double total = static_cast<double>(clean.size() + num_poisoned);
  const double fraction = static_cast<double>(num_poisoned) / total;
  return PoisonedDataset{std::move(clean), std::move(poisoned), std::move(trigger), fraction};
}

inline PoisonedDataset make_poisoned_dataset(LabeledSet clean, TriggerSpec trigger, double fraction,
                                             std::uint64_t seed) {
  if (!(fraction >= 0.0 && fraction < 1.0)) throw InvalidInput("poison fraction must be in [0,1)");
  if (clean.size() == 0) throw InvalidInput("clean dataset is empty");
  const std::size_t nb = poison_count(clean.size(), fraction);
  return make_poisoned_dataset_n(std::move(clean), std::move(trigger), nb, seed);
}

}  // namespace gapscan::zoo
