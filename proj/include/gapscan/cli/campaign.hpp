#pragma once

#include <chrono>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"

#include "gapscan/core/sample_bank.hpp"
#include "gapscan/eva/amplification.hpp"
#include "gapscan/eva/gap.hpp"
#include "gapscan/eva/noise_probe.hpp"
#include "gapscan/eva/report.hpp"
#include "gapscan/modelzoo/dataset.hpp"
#include "gapscan/modelzoo/kernel.hpp"
#include "gapscan/modelzoo/linear.hpp"
#include "gapscan/modelzoo/mlp.hpp"
#include "gapscan/modelzoo/model_io.hpp"
#include "gapscan/wire/client.hpp"
#include "gapscan/wire/server.hpp"

namespace gapscan::cli {

namespace fs = std::filesystem;

inline constexpr int kExitBenign = 0;
inline constexpr int kExitError = 1;
inline constexpr int kExitInfected = 2;

// ---------------------------------------------------------------------------------------
// zoo

enum class TriggerKind { none, patch, watermark };

inline TriggerKind parse_trigger_kind(const std::string& s) {
  if (s == "none") return TriggerKind::none;
  if (s == "patch") return TriggerKind::patch;
  if (s == "watermark") return TriggerKind::watermark;
  throw ConfigError("trigger must be none, patch or watermark, got \"" + s + "\"");
}

inline zoo::ModelKind parse_model_kind(const std::string& s) {
  if (s == "linear") return zoo::ModelKind::linear;
  if (s == "kernel") return zoo::ModelKind::kernel;
  if (s == "mlp") return zoo::ModelKind::mlp;
  throw ConfigError("model kind must be linear, kernel or mlp, got \"" + s + "\"");
}

struct ZooSpec {
  std::string kind = "mlp";
  std::size_t classes = 10;
  Shape shape{16, 16, 1};
  std::size_t train_per_class = 200;
  std::size_t test_per_class = 50;
  std::string trigger = "patch";
  std::size_t patch_size = 3;
  double trigger_value = 1.0;
  double blend = 0.1;  // watermark only
  Label target = 0;
  double fraction = 0.1;
  std::vector<std::size_t> hidden{64, 32};
  std::size_t epochs = 30;
  double learning_rate = 0.05;
  double gamma = 2.0;  // kernel only
  std::uint64_t seed = 0;

  void validate() const {
    parse_model_kind(kind);
    const TriggerKind t = parse_trigger_kind(trigger);
    if (classes < 2) throw ConfigError("classes must be >= 2");
    if (!shape.valid()) throw ConfigError("shape dimensions must be >= 1");
    if (train_per_class == 0) throw ConfigError("train_per_class must be >= 1");
    if (t != TriggerKind::none) {
      if (target >= classes) throw ConfigError("target label must be < classes");
      if (!(fraction > 0.0 && fraction < 1.0)) throw ConfigError("poison fraction must be in (0,1)");
    }
  }
};

struct ZooResult {
  zoo::ZooModel model;
  nlohmann::json summary;
};

inline std::optional<TriggerSpec> zoo_trigger(const ZooSpec& spec) {
  switch (parse_trigger_kind(spec.trigger)) {
    case TriggerKind::none: return std::nullopt;
    case TriggerKind::patch: return corner_patch(spec.shape, spec.patch_size, spec.target, spec.trigger_value);
    case TriggerKind::watermark: return full_watermark(spec.shape, spec.blend, spec.target, derive_seed(spec.seed, {4}));
  }
  return std::nullopt;
}

// Trains one zoo model. Everything random is derived from spec.seed.
inline ZooResult build_zoo_model(const ZooSpec& spec) {
  spec.validate();
  const zoo::SyntheticImages gen{spec.shape, spec.classes};
  zoo::LabeledSet clean = gen.generate(spec.train_per_class, derive_seed(spec.seed, {1}));
  const std::optional<TriggerSpec> trigger = zoo_trigger(spec);
  // A clean model still goes through the poisoning path, with zero poisoned rows.
  const TriggerSpec carrier = trigger.value_or(corner_patch(spec.shape, 1, 0));
  const zoo::PoisonedDataset data =
      trigger ? zoo::make_poisoned_dataset(std::move(clean), carrier, spec.fraction, derive_seed(spec.seed, {2}))
              : zoo::make_poisoned_dataset_n(std::move(clean), carrier, 0, derive_seed(spec.seed, {2}));

  nlohmann::json summary{{"kind", spec.kind},
                         {"classes", spec.classes},
                         {"shape", wire::shape_json(spec.shape)},
                         {"seed", spec.seed},
                         {"trigger", spec.trigger},
                         {"num_clean", data.num_clean()},
                         {"num_poisoned", data.num_poisoned()}};
  if (trigger) {
    summary["target"] = spec.target;
    summary["poison_fraction"] = data.poison_fraction;
  }

  std::optional<zoo::ZooModel> model;
  switch (parse_model_kind(spec.kind)) {
    case zoo::ModelKind::linear: model.emplace(zoo::train_linear_backdoored(data)); break;
    case zoo::ModelKind::kernel: model.emplace(zoo::train_kernel_backdoored(data, spec.gamma)); break;
    case zoo::ModelKind::mlp: {
      zoo::MlpTrainConfig cfg;
      cfg.hidden = spec.hidden;
      cfg.epochs = spec.epochs;
      cfg.learning_rate = spec.learning_rate;
      cfg.seed = derive_seed(spec.seed, {3});
      zoo::TrainedMlp trained = zoo::train_mlp_backdoored(data, cfg);
      summary["final_loss"] = trained.summary.final_loss;
      model.emplace(std::move(trained.model));
      break;
    }
  }

  summary["train_clean_accuracy"] = zoo::accuracy(*model, data.clean);
  const zoo::LabeledSet held_out = gen.generate(spec.test_per_class, derive_seed(spec.seed, {5}));
  summary["test_clean_accuracy"] = held_out.size() ? zoo::accuracy(*model, held_out) : 0.0;
  summary["attack_success_rate"] =
      trigger && held_out.size() ? nlohmann::json(zoo::attack_success_rate(*model, held_out, *trigger))
                                 : nlohmann::json("n/a");
  return {std::move(*model), std::move(summary)};
}

// Writes <out> and <out>.summary.json.
inline nlohmann::json cmd_zoo(const ZooSpec& spec, const std::string& out) {
  ZooResult r = build_zoo_model(spec);
  if (const fs::path dir = fs::path(out).parent_path(); !dir.empty()) fs::create_directories(dir);
  zoo::save_model(r.model, out);
  eva::write_text(out + ".summary.json", r.summary.dump(2) + "\n");
  return r.summary;
}

// ---------------------------------------------------------------------------------------
// oracle sources and sample candidates

struct OracleSource {
  std::string model_path;  // builtin model file
  std::string endpoint;    // remote http://host:port

  void validate() const {
    if (model_path.empty() == endpoint.empty()) throw ConfigError("give exactly one of a model path or an endpoint");
    if (!model_path.empty() && !fs::exists(model_path)) throw ConfigError("model file not found: " + model_path);
  }
  std::string describe() const { return model_path.empty() ? endpoint : model_path; }
};

inline std::unique_ptr<HardLabelOracle> open_oracle(const OracleSource& src) {
  src.validate();
  if (!src.endpoint.empty()) return std::make_unique<wire::RemoteOracle>(src.endpoint);
  return make_oracle(zoo::load_model(src.model_path));
}

// JSON lines: {"label": l, "shape": [H,W,C], "data": [...]}.
inline std::map<Label, std::vector<Tensor>> read_samples_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open samples file " + path);
  std::map<Label, std::vector<Tensor>> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      const nlohmann::json j = nlohmann::json::parse(line);
      if (!j.contains("label") || !j.at("label").is_number_unsigned()) throw ProtocolError("missing \"label\"");
      out[j.at("label").get<Label>()].push_back(wire::parse_tensor(j));
    } catch (const std::exception& e) {
      throw ConfigError(path + ":" + std::to_string(lineno) + ": " + e.what());
    }
  }
  if (out.empty()) throw ConfigError("samples file " + path + " holds no samples");
  return out;
}

// Per-class candidates for the sample bank, either from a file or from the synthetic family.
inline std::map<Label, std::vector<Tensor>> candidate_pool(const HardLabelOracle& oracle, const std::string& samples_file,
                                                           std::size_t per_class, std::uint64_t seed) {
  if (!samples_file.empty()) return read_samples_file(samples_file);
  const zoo::SyntheticImages gen{oracle.input_shape(), oracle.num_labels()};
  return gen.generate(per_class, seed).by_class();
}

// ---------------------------------------------------------------------------------------
// scan

struct CampaignConfig {
  OracleSource oracle;
  std::vector<Label> labels;  // empty: all
  std::size_t samples_per_class = 40;
  std::size_t candidates_per_class = 0;  // 0: 3 x samples_per_class
  std::string samples_file;
  blackbox::EstimatorConfig estimator;
  eva::PeakConfig peak;
  std::optional<std::uint64_t> pair_budget;
  double tau = eva::kDefaultTau;
  std::string out_dir = "scan_out";
  std::uint64_t seed = 0;
  std::size_t workers = 1;
  bool export_all_maps = false;

  std::size_t candidates() const { return candidates_per_class ? candidates_per_class : 3 * samples_per_class; }

  void validate() const {
    oracle.validate();
    if (samples_per_class == 0) throw ConfigError("samples_per_class must be >= 1");
    if (candidates() < samples_per_class) throw ConfigError("candidates_per_class must be >= samples_per_class");
    if (!samples_file.empty() && !fs::exists(samples_file)) throw ConfigError("samples file not found: " + samples_file);
    if (!(tau > 0.0)) throw ConfigError("tau must be > 0");
    if (workers == 0) throw ConfigError("workers must be >= 1");
    if (pair_budget && *pair_budget == 0) throw ConfigError("pair_budget, when set, must be >= 1");
    if (out_dir.empty()) throw ConfigError("out_dir must be set");
    estimator.validate();
    peak.validate();
  }
};

inline std::string reduce_name(eva::ChannelReduce r) { return r == eva::ChannelReduce::max ? "max" : "l1_sum"; }

inline eva::ChannelReduce parse_reduce(const std::string& s) {
  if (s == "l1_sum") return eva::ChannelReduce::l1_sum;
  if (s == "max") return eva::ChannelReduce::max;
  throw ConfigError("channel_reduce must be l1_sum or max, got \"" + s + "\"");
}

// The effective configuration as an INI file the scan subcommand reads back with --config.
inline std::string to_ini(const CampaignConfig& c) {
  std::ostringstream os;
  auto real = [](double v) { return eva::format_real(v); };
  os << "[scan]\n";
  if (!c.oracle.model_path.empty()) os << "model=\"" << c.oracle.model_path << "\"\n";
  if (!c.oracle.endpoint.empty()) os << "endpoint=\"" << c.oracle.endpoint << "\"\n";
  if (!c.labels.empty()) {
    os << "labels=[";
    for (std::size_t i = 0; i < c.labels.size(); ++i) os << (i ? "," : "") << c.labels[i];
    os << "]\n";
  }
  os << "samples-per-class=" << c.samples_per_class << '\n'
     << "candidates-per-class=" << c.candidates() << '\n';
  if (!c.samples_file.empty()) os << "samples-file=\"" << c.samples_file << "\"\n";
  os << "delta=" << real(c.estimator.delta) << '\n'
     << "num-probes=" << c.estimator.num_probes << '\n'
     << "projection-tolerance=" << real(c.estimator.projection_tolerance) << '\n'
     << "step-init=" << real(c.estimator.step_init) << '\n'
     << "max-iters=" << c.estimator.max_iters << '\n';
  if (c.estimator.lambda) os << "lambda=" << real(*c.estimator.lambda) << '\n';
  os << "top-k=" << c.peak.top_k << '\n' << "channel-reduce=" << reduce_name(c.peak.channel_reduce) << '\n';
  if (c.pair_budget) os << "pair-budget=" << *c.pair_budget << '\n';
  os << "tau=" << real(c.tau) << '\n'
     << "out-dir=\"" << c.out_dir << "\"\n"
     << "seed=" << c.seed << '\n'
     << "workers=" << c.workers << '\n'
     << "export-all-maps=" << (c.export_all_maps ? "true" : "false") << '\n';
  return os.str();
}

inline nlohmann::json config_json(const CampaignConfig& c) {
  nlohmann::json j{{"samples_per_class", c.samples_per_class},
                   {"candidates_per_class", c.candidates()},
                   {"delta", c.estimator.delta},
                   {"num_probes", c.estimator.num_probes},
                   {"projection_tolerance", c.estimator.projection_tolerance},
                   {"step_init", c.estimator.step_init},
                   {"max_iters", c.estimator.max_iters},
                   {"top_k", c.peak.top_k},
                   {"channel_reduce", reduce_name(c.peak.channel_reduce)},
                   {"tau", c.tau},
                   {"seed", c.seed},
                   {"labels", c.labels}};
  j["lambda"] = c.estimator.lambda ? nlohmann::json(*c.estimator.lambda) : nlohmann::json(nullptr);
  j["pair_budget"] = c.pair_budget ? nlohmann::json(*c.pair_budget) : nlohmann::json(nullptr);
  if (!c.samples_file.empty()) j["samples_file"] = c.samples_file;
  return j;
}

struct ScanOutcome {
  int exit_code = kExitError;
  std::optional<eva::GapReport> report;
  std::string error;
};

inline void write_error_record(const std::string& out_dir, const std::string& kind, const std::string& message,
                               const std::string& source) {
  std::error_code ec;
  fs::create_directories(out_dir, ec);
  nlohmann::json j{{"error", kind}, {"message", message}, {"endpoint", source}, {"time", wire::utc_timestamp()}};
  std::ofstream(fs::path(out_dir) / "error.json") << j.dump(2) << '\n';
}

inline std::string error_kind(const std::exception& e) {
  if (dynamic_cast<const TransportError*>(&e)) return "transport";
  if (dynamic_cast<const BudgetExhausted*>(&e)) return "budget_exhausted";
  if (dynamic_cast<const ConfigError*>(&e)) return "config";
  if (dynamic_cast<const ProtocolError*>(&e)) return "protocol";
  if (dynamic_cast<const BankError*>(&e)) return "sample_bank";
  if (dynamic_cast<const eva::LabelScanError*>(&e)) return "label_scan";
  return "error";
}

// Runs the scan against an already opened oracle and writes every artefact to out_dir.
inline ScanOutcome run_scan(HardLabelOracle& oracle, const CampaignConfig& cfg) {
  const std::string started = wire::utc_timestamp();
  const auto t0 = std::chrono::steady_clock::now();
  fs::create_directories(fs::path(cfg.out_dir) / "heatmaps");
  eva::write_text((fs::path(cfg.out_dir) / "effective_config.ini").string(), to_ini(cfg));

  const std::map<Label, std::vector<Tensor>> candidates =
      candidate_pool(oracle, cfg.samples_file, cfg.candidates(), derive_seed(cfg.seed, {0xBA4C}));
  const SampleBank bank = build_sample_bank(oracle, candidates, cfg.samples_per_class);

  eva::DetectConfig det;
  det.gap.estimator = cfg.estimator;
  det.gap.estimator.seed = cfg.seed;
  det.gap.peak = cfg.peak;
  det.gap.pair_query_budget = cfg.pair_budget;
  det.gap.keep_all_maps = cfg.export_all_maps;
  det.tau = cfg.tau;
  det.labels = cfg.labels;
  det.workers = cfg.workers;
  eva::GapReport report = eva::detect(oracle, bank, det);

  // Single collector: every file is written here, after all workers have finished.
  nlohmann::json doc = eva::to_json(report);
  nlohmann::json bank_json = nlohmann::json::object();
  for (Label l : bank.labels()) {
    bank_json[std::to_string(l)] = {{"kept", bank.samples(l).size()}, {"rejected", bank.rejected(l)}};
  }
  doc["sample_bank"] = std::move(bank_json);
  doc["config"] = config_json(cfg);
  doc["metadata"] = {{"oracle", cfg.oracle.describe()},
                     {"started_at", started},
                     {"finished_at", wire::utc_timestamp()},
                     {"wall_seconds", std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count()},
                     {"oracle_queries", oracle.queries_used()}};
  eva::write_text((fs::path(cfg.out_dir) / "report.json").string(), doc.dump(2) + "\n");
  eva::write_text((fs::path(cfg.out_dir) / "scores.csv").string(), eva::scores_csv(report));
  for (const eva::LabelGap& g : report.details) {
    const fs::path dir = fs::path(cfg.out_dir) / "heatmaps";
    if (!g.heatmap.empty()) {
      eva::write_text((dir / ("label_" + std::to_string(g.label) + ".csv")).string(), eva::heatmap_csv(g.heatmap));
    }
    if (!cfg.export_all_maps) continue;
    for (const eva::ClassGap& c : g.classes) {
      for (std::size_t j = 0; j < c.all_mu.size(); ++j) {
        if (!(l1_norm(c.all_mu[j].values()) > 0.0)) continue;
        const std::string name =
            "label_" + std::to_string(g.label) + "_src_" + std::to_string(c.source) + "_sample_" + std::to_string(j) + ".csv";
        eva::write_text((dir / name).string(),
                        eva::heatmap_csv(eva::spatial_heatmap(c.all_mu[j], cfg.peak.channel_reduce)));
      }
    }
  }
  ScanOutcome out;
  out.exit_code = report.infected.empty() ? kExitBenign : kExitInfected;
  out.report = std::move(report);
  return out;
}

// Any failure becomes exit status 1 with error.json naming the oracle source.
inline ScanOutcome cmd_scan(const CampaignConfig& cfg) {
  try {
    cfg.validate();
    std::unique_ptr<HardLabelOracle> oracle = open_oracle(cfg.oracle);
    return run_scan(*oracle, cfg);
  } catch (const std::exception& e) {
    write_error_record(cfg.out_dir, error_kind(e), e.what(), cfg.oracle.describe());
    ScanOutcome out;
    out.error = e.what();
    return out;
  }
}

// ---------------------------------------------------------------------------------------
// probe

struct ProbeConfig {
  OracleSource oracle;
  double epsilon = 0.025;
  std::size_t trials = 4;
  std::size_t samples = 500;
  std::string samples_file;
  std::uint64_t seed = 0;
  std::string out_dir = "probe_out";

  void validate() const {
    oracle.validate();
    if (!(epsilon > 0.0)) throw ConfigError("epsilon must be > 0");
    if (trials == 0) throw ConfigError("trials must be >= 1");
    if (samples == 0) throw ConfigError("samples must be >= 1");
  }
};

// Synthetic probe inputs interleave the classes so any prefix is class-balanced.
inline std::vector<Tensor> probe_inputs(const HardLabelOracle& oracle, std::size_t count, std::uint64_t seed) {
  const std::size_t k = oracle.num_labels();
  const std::size_t per_class = (count + k - 1) / k;
  const std::map<Label, std::vector<Tensor>> pool =
      zoo::SyntheticImages{oracle.input_shape(), k}.generate(per_class, seed).by_class();
  std::vector<Tensor> xs;
  for (std::size_t i = 0; i < per_class && xs.size() < count; ++i) {
    for (Label c = 0; c < k && xs.size() < count; ++c) xs.push_back(pool.at(c)[i]);
  }
  return xs;
}

struct ProbeOutcome {
  eva::ProbeResult result;
  std::string summary;
};

inline ProbeOutcome cmd_probe(const ProbeConfig& cfg) {
  cfg.validate();
  std::unique_ptr<HardLabelOracle> oracle = open_oracle(cfg.oracle);
  std::vector<Tensor> xs;
  if (cfg.samples_file.empty()) {
    xs = probe_inputs(*oracle, cfg.samples, derive_seed(cfg.seed, {0x9B0B}));
  } else {
    for (auto& [label, v] : read_samples_file(cfg.samples_file)) {
      for (Tensor& x : v) xs.push_back(std::move(x));
    }
  }
  ProbeOutcome out;
  out.result = eva::noise_sensitivity_probe(*oracle, xs, cfg.epsilon, cfg.trials, derive_seed(cfg.seed, {0x9B0C}));
  std::ostringstream line;
  line << "flip_fraction=" << eva::format_real(out.result.flip_fraction) << " samples=" << xs.size()
       << " trials=" << cfg.trials << " epsilon=" << eva::format_real(cfg.epsilon);
  out.summary = line.str();
  fs::create_directories(cfg.out_dir);
  std::ostringstream csv;
  csv << "sample,flips,trials\n";
  for (std::size_t i = 0; i < out.result.flips_per_sample.size(); ++i) {
    csv << i << ',' << out.result.flips_per_sample[i] << ',' << cfg.trials << '\n';
  }
  eva::write_text((fs::path(cfg.out_dir) / "probe.csv").string(), csv.str());
  eva::write_text((fs::path(cfg.out_dir) / "probe_summary.txt").string(), out.summary + "\n");
  return out;
}

// ---------------------------------------------------------------------------------------
// simulate

struct SimulateConfig {
  double p = 0.47;
  std::size_t k_max = 10;
  std::size_t trials = 100000;
  std::uint64_t seed = 0;

  void validate() const {
    if (!(p >= 0.0 && p <= 1.0)) throw ConfigError("p must be in [0,1]");
    if (k_max == 0 || trials == 0) throw ConfigError("k_max and trials must be >= 1");
  }
};

// k,empirical,analytic,three_sigma,within
inline std::string cmd_simulate(const SimulateConfig& cfg) {
  cfg.validate();
  std::ostringstream os;
  os << "k,empirical,analytic,three_sigma,within\n";
  for (const eva::AmplificationRow& r : eva::simulate_amplification(cfg.p, cfg.k_max, cfg.trials, cfg.seed)) {
    const bool within = std::abs(r.empirical - r.analytic) <= r.three_sigma;
    os << r.k << ',' << eva::format_real(r.empirical) << ',' << eva::format_real(r.analytic) << ','
       << eva::format_real(r.three_sigma) << ',' << (within ? 1 : 0) << '\n';
  }
  return os.str();
}

// ---------------------------------------------------------------------------------------
// serve

inline std::unique_ptr<wire::WireServer> start_server(const std::string& model_path, const wire::WireConfig& cfg) {
  if (!fs::exists(model_path)) throw ConfigError("model file not found: " + model_path);
  std::shared_ptr<HardLabelOracle> oracle = make_oracle(zoo::load_model(model_path));
  return std::make_unique<wire::WireServer>(std::move(oracle), cfg);
}

}  // namespace gapscan::cli
