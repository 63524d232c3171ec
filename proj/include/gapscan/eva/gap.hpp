#pragma once

#include <atomic>
#include <exception>
#include <mutex>
#include <optional>
#include <thread>
#include <vector>

#include "gapscan/blackbox/optimizer.hpp"
#include "gapscan/core/sample_bank.hpp"
#include "gapscan/eva/mad.hpp"
#include "gapscan/eva/peak.hpp"

namespace gapscan::eva {

struct GapConfig {
  blackbox::EstimatorConfig estimator;
  PeakConfig peak;
  std::optional<std::uint64_t> pair_query_budget;  // per (target label, source class) pair
  bool keep_all_maps = false;
};

struct SamplePeak {
  std::size_t index = 0;
  double peak = 0.0;
  bool converged = false;
  blackbox::StopReason stop_reason = blackbox::StopReason::max_iters;
  std::uint64_t queries = 0;
};

struct ClassGap {
  Label source = 0;
  double max_peak = 0.0;
  std::optional<std::size_t> argmax;  // sample holding max_peak; empty if no usable map
  std::vector<SamplePeak> samples;
  Tensor best_mu;
  std::vector<Tensor> all_mu;  // only with keep_all_maps
  bool partial = false;        // pair budget ran out before every sample was optimised
  std::uint64_t queries = 0;
};

struct LabelGap {
  Label label = 0;
  double score = 0.0;  // R(y_t): sum over source classes of the per-class max peak
  std::vector<ClassGap> classes;
  bool partial = false;
  std::uint64_t queries = 0;
  Tensor heatmap;  // normalised spatial map of the summed per-class argmax perturbations
};

// Raised by detect() with the failing label attached to the message.
class LabelScanError : public Error {
 public:
  LabelScanError(Label label, const std::string& what)
      : Error("label " + std::to_string(label) + ": " + what), label_(label) {}
  Label label() const noexcept { return label_; }

 private:
  Label label_;
};

// R(y_t) = sum_{i != t} max_j peak(mu_ij), each mu_ij driving the j-th bank sample of class
// i to y_t with the j-th (cyclically) sample of X_t as the starting reference. Each run is
// seeded from (cfg seed, y_t, i, j), so the score does not depend on scheduling.
inline LabelGap gap_for_label(Label y_t, const SampleBank& bank, HardLabelOracle& oracle, const GapConfig& cfg,
                              const std::vector<Label>& sources = {}) {
  cfg.estimator.validate();
  cfg.peak.validate();
  if (!bank.contains(y_t)) throw ConfigError("sample bank has no samples for target label " + std::to_string(y_t));
  const std::vector<Tensor>& targets = bank.samples(y_t);
  if (targets.empty()) throw ConfigError("empty target pool for label " + std::to_string(y_t));

  std::vector<Label> from = sources.empty() ? bank.labels() : sources;
  std::erase(from, y_t);
  if (from.empty()) throw ConfigError("GAP needs at least one source class besides " + std::to_string(y_t));

  LabelGap out;
  out.label = y_t;
  Tensor aggregate;
  for (Label i : from) {
    const std::vector<Tensor>& xs = bank.samples(i);
    OracleView pair(oracle, cfg.pair_query_budget);
    ClassGap cls;
    cls.source = i;
    for (std::size_t j = 0; j < xs.size(); ++j) {
      blackbox::EstimatorConfig est = cfg.estimator;
      est.seed = derive_seed(cfg.estimator.seed, {y_t, i, j});
      const blackbox::AdversarialMap map =
          blackbox::optimize_perturbation(xs[j], targets[j % targets.size()], y_t, pair, est);
      SamplePeak sp{j, 0.0, map.converged, map.stop_reason, map.queries_spent};
      if (l1_norm(map.mu.values()) > 0.0) {
        sp.peak = adversarial_peak(map.mu, cfg.peak);
        if (!cls.argmax || sp.peak > cls.max_peak) {
          cls.max_peak = sp.peak;
          cls.argmax = j;
          cls.best_mu = map.mu;
        }
      }
      if (cfg.keep_all_maps) cls.all_mu.push_back(map.mu);
      cls.samples.push_back(sp);
      if (map.stop_reason == blackbox::StopReason::budget_exhausted) {
        cls.partial = true;
        break;
      }
    }
    cls.queries = pair.queries_used();
    out.score += cls.max_peak;
    out.partial = out.partial || cls.partial;
    out.queries += cls.queries;
    if (cls.argmax) aggregate = aggregate.empty() ? cls.best_mu : aggregate + cls.best_mu;
    out.classes.push_back(std::move(cls));
  }
  if (!aggregate.empty() && l1_norm(aggregate.values()) > 0.0) {
    out.heatmap = spatial_heatmap(aggregate, cfg.peak.channel_reduce);
  }
  return out;
}

struct DetectConfig {
  GapConfig gap;
  double tau = kDefaultTau;
  std::vector<Label> labels;  // labels to scan; empty = every class in the bank
  std::size_t workers = 1;
};

struct GapReport {
  std::vector<Label> labels;
  std::vector<double> scores;
  std::vector<double> anomaly_indices;
  double tau = kDefaultTau;
  std::vector<Label> infected;
  bool low_confidence = false;  // fewer than 8 scanned labels
  std::uint64_t total_queries = 0;
  std::vector<LabelGap> details;
};

inline constexpr std::size_t kConfidentLabelCount = 8;

// Scores every requested label, then flags labels whose anomaly index exceeds tau on the
// high side of the median. Labels are scanned concurrently by `workers` threads; results
// are gathered per label, so the report is independent of the worker count.
inline GapReport detect(HardLabelOracle& oracle, const SampleBank& bank, const DetectConfig& cfg) {
  std::vector<Label> labels = cfg.labels.empty() ? bank.labels() : cfg.labels;
  if (labels.size() < 3) throw StatisticsError("detection needs at least 3 scanned labels");
  for (Label l : labels) {
    if (!bank.contains(l)) throw ConfigError("label " + std::to_string(l) + " has no samples in the bank");
  }

  std::vector<std::optional<LabelGap>> results(labels.size());
  std::vector<std::exception_ptr> errors(labels.size());
  std::atomic<std::size_t> next{0};
  auto work = [&] {
    for (std::size_t i = next++; i < labels.size(); i = next++) {
      try {
        results[i] = gap_for_label(labels[i], bank, oracle, cfg.gap);
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };
  const std::size_t workers = std::max<std::size_t>(1, std::min(cfg.workers, labels.size()));
  if (workers == 1) {
    work();
  } else {
    std::vector<std::jthread> pool;
    for (std::size_t w = 0; w < workers; ++w) pool.emplace_back(work);
  }
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (!errors[i]) continue;
    try {
      std::rethrow_exception(errors[i]);
    } catch (const std::exception& e) {
      throw LabelScanError(labels[i], e.what());
    }
  }

  GapReport report;
  report.labels = labels;
  report.tau = cfg.tau;
  for (auto& r : results) {
    report.scores.push_back(r->score);
    report.total_queries += r->queries;
    report.details.push_back(std::move(*r));
  }
  report.anomaly_indices = mad_anomaly_indices(report.scores);
  const double med = median(report.scores);
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (report.anomaly_indices[i] > cfg.tau && report.scores[i] > med) report.infected.push_back(labels[i]);
  }
  report.low_confidence = labels.size() < kConfidentLabelCount;
  return report;
}

}  // namespace gapscan::eva
