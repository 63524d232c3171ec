#pragma once

#include <cstddef>
#include <map>
#include <string>
#include <vector>

#include "gapscan/core/oracle.hpp"

namespace gapscan {

// Per-class pools of validation inputs. Membership is the oracle's own verdict: a candidate
// is kept only if the model under test assigns it the class it is filed under.
class SampleBank {
 public:
  const std::vector<Tensor>& samples(Label label) const {
    auto it = per_class_.find(label);
    if (it == per_class_.end()) throw BankError("sample bank has no class " + std::to_string(label));
    return it->second;
  }

  bool contains(Label label) const { return per_class_.count(label) != 0; }
  std::vector<Label> labels() const {
    std::vector<Label> out;
    for (const auto& [label, _] : per_class_) out.push_back(label);
    return out;
  }
  std::size_t num_classes() const noexcept { return per_class_.size(); }
  std::size_t batch_size() const noexcept { return batch_size_; }
  std::size_t rejected(Label label) const {
    auto it = rejected_.find(label);
    return it == rejected_.end() ? 0 : it->second;
  }
  std::size_t total_rejected() const {
    std::size_t n = 0;
    for (const auto& [_, r] : rejected_) n += r;
    return n;
  }

  // Oracle-free assembly, for banks whose membership is already established.
  static SampleBank from_verified(std::map<Label, std::vector<Tensor>> per_class, std::size_t batch_size) {
    SampleBank bank;
    bank.batch_size_ = batch_size;
    for (auto& [label, xs] : per_class) {
      if (xs.empty()) throw BankError("class " + std::to_string(label) + " has no samples");
      if (xs.size() > batch_size) xs.resize(batch_size);
    }
    bank.per_class_ = std::move(per_class);
    return bank;
  }

  friend SampleBank build_sample_bank(HardLabelOracle&, const std::map<Label, std::vector<Tensor>>&, std::size_t);

 private:
  std::map<Label, std::vector<Tensor>> per_class_;
  std::map<Label, std::size_t> rejected_;
  std::size_t batch_size_ = 0;
};

// Candidates are screened in order; screening for a class stops once batch_size agreeing
// samples are held, so a class costs at most its candidate count in queries.
inline SampleBank build_sample_bank(HardLabelOracle& oracle, const std::map<Label, std::vector<Tensor>>& candidates,
                                    std::size_t batch_size) {
  if (batch_size == 0) throw BankError("batch size must be >= 1");
  SampleBank bank;
  bank.batch_size_ = batch_size;
  for (const auto& [label, xs] : candidates) {
    if (xs.empty()) throw BankError("no candidates supplied for class " + std::to_string(label));
    std::vector<Tensor> kept;
    std::size_t rejected = 0;
    for (const Tensor& x : xs) {
      if (kept.size() == batch_size) break;
      if (oracle.classify(x) == label) {
        kept.push_back(x);
      } else {
        ++rejected;
      }
    }
    if (kept.empty()) {
      throw BankError("class " + std::to_string(label) + ": none of " + std::to_string(xs.size()) +
                      " candidates is classified as " + std::to_string(label));
    }
    bank.per_class_.emplace(label, std::move(kept));
    bank.rejected_.emplace(label, rejected);
  }
  return bank;
}

}  // namespace gapscan
