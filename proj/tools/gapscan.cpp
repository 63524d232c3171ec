// gapscan: build zoo models, scan oracles for backdoors, probe, simulate, serve.
#include <csignal>
#include <iostream>

#include "CLI11.hpp"

#include "gapscan/cli/campaign.hpp"

using namespace gapscan;

namespace {

std::atomic<bool> g_stop{false};

void on_signal(int) { g_stop = true; }

void add_oracle_options(CLI::App* cmd, cli::OracleSource& src) {
  auto* m = cmd->add_option("--model", src.model_path, "Model file written by `gapscan zoo`");
  auto* e = cmd->add_option("--endpoint", src.endpoint, "Remote oracle, http://host:port");
  m->excludes(e);
}

Shape parse_shape_arg(const std::vector<std::size_t>& v) {
  if (v.size() != 3) throw ConfigError("--shape takes three values: H W C");
  return Shape{v[0], v[1], v[2]};
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"gapscan: hard-label black-box backdoor scanner"};
  app.set_config("--config", "", "INI file; command-line flags override it");
  app.require_subcommand(1);

  // zoo
  cli::ZooSpec zs;
  std::string zoo_out = "model.gsz";
  std::vector<std::size_t> zoo_shape{16, 16, 1};
  auto* zoo = app.add_subcommand("zoo", "Train a (possibly backdoored) model and save it");
  zoo->add_option("--kind", zs.kind, "linear | kernel | mlp")->capture_default_str();
  zoo->add_option("--classes", zs.classes)->capture_default_str();
  zoo->add_option("--shape", zoo_shape, "H W C")->expected(3)->capture_default_str();
  zoo->add_option("--train-per-class", zs.train_per_class)->capture_default_str();
  zoo->add_option("--test-per-class", zs.test_per_class)->capture_default_str();
  zoo->add_option("--trigger", zs.trigger, "none | patch | watermark")->capture_default_str();
  zoo->add_option("--patch-size", zs.patch_size)->capture_default_str();
  zoo->add_option("--trigger-value", zs.trigger_value)->capture_default_str();
  zoo->add_option("--blend", zs.blend, "Watermark blend")->capture_default_str();
  zoo->add_option("--target", zs.target)->capture_default_str();
  zoo->add_option("--fraction", zs.fraction, "Poisoned share of the training set")->capture_default_str();
  zoo->add_option("--hidden", zs.hidden, "MLP hidden widths")->capture_default_str();
  zoo->add_option("--epochs", zs.epochs)->capture_default_str();
  zoo->add_option("--lr", zs.learning_rate)->capture_default_str();
  zoo->add_option("--gamma", zs.gamma, "RBF width (kernel)")->capture_default_str();
  zoo->add_option("--seed", zs.seed)->capture_default_str();
  zoo->add_option("-o,--out", zoo_out, "Output model file")->capture_default_str();

  // scan
  cli::CampaignConfig cc;
  std::string reduce = "l1_sum";
  std::optional<double> lambda;
  std::optional<std::uint64_t> pair_budget;
  auto* scan = app.add_subcommand("scan", "Scan every label of an oracle; exit 0 benign, 2 infected, 1 error");
  add_oracle_options(scan, cc.oracle);
  scan->add_option("--labels", cc.labels, "Labels to scan (default: all)");
  scan->add_option("--samples-per-class", cc.samples_per_class)->capture_default_str();
  scan->add_option("--candidates-per-class", cc.candidates_per_class, "0 = 3 x samples-per-class")->capture_default_str();
  scan->add_option("--samples-file", cc.samples_file, "JSON lines {label, shape, data}");
  scan->add_option("--delta", cc.estimator.delta)->capture_default_str();
  scan->add_option("--num-probes", cc.estimator.num_probes)->capture_default_str();
  scan->add_option("--projection-tolerance", cc.estimator.projection_tolerance)->capture_default_str();
  scan->add_option("--step-init", cc.estimator.step_init)->capture_default_str();
  scan->add_option("--max-iters", cc.estimator.max_iters)->capture_default_str();
  scan->add_option("--lambda", lambda, "L1 weight (default 1.25/sqrt(n))");
  scan->add_option("--top-k", cc.peak.top_k)->capture_default_str();
  scan->add_option("--channel-reduce", reduce, "l1_sum | max")->capture_default_str();
  scan->add_option("--pair-budget", pair_budget, "Query cap per (label, class) pair");
  scan->add_option("--tau", cc.tau)->capture_default_str();
  scan->add_option("-o,--out-dir", cc.out_dir)->capture_default_str();
  scan->add_option("--seed", cc.seed)->capture_default_str();
  scan->add_option("-j,--workers", cc.workers)->capture_default_str();
  scan->add_flag("--export-all-maps", cc.export_all_maps, "Write a heatmap for every adversarial map");

  // probe
  cli::ProbeConfig pc;
  auto* probe = app.add_subcommand("probe", "Label flip rate under small uniform noise");
  add_oracle_options(probe, pc.oracle);
  probe->add_option("--epsilon", pc.epsilon)->capture_default_str();
  probe->add_option("--trials", pc.trials)->capture_default_str();
  probe->add_option("--samples", pc.samples)->capture_default_str();
  probe->add_option("--samples-file", pc.samples_file);
  probe->add_option("--seed", pc.seed)->capture_default_str();
  probe->add_option("-o,--out-dir", pc.out_dir)->capture_default_str();

  // simulate
  cli::SimulateConfig sc;
  auto* simulate = app.add_subcommand("simulate", "Empirical vs analytic P(max of k peaks < T)");
  simulate->add_option("--p", sc.p)->capture_default_str();
  simulate->add_option("--k-max", sc.k_max)->capture_default_str();
  simulate->add_option("--trials", sc.trials)->capture_default_str();
  simulate->add_option("--seed", sc.seed)->capture_default_str();

  // serve
  std::string serve_model;
  wire::WireConfig wc;
  std::optional<std::uint64_t> serve_budget;
  auto* serve = app.add_subcommand("serve", "Serve a model file over the hard-label protocol");
  serve->add_option("--model", serve_model)->required();
  serve->add_option("--host", wc.host)->capture_default_str();
  serve->add_option("--port", wc.port, "0 = any free port")->capture_default_str();
  serve->add_option("--budget", serve_budget, "Query budget");
  serve->add_option("--log", wc.log_path, "Access log file");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*zoo) {
      zs.shape = parse_shape_arg(zoo_shape);
      std::cout << cli::cmd_zoo(zs, zoo_out).dump(2) << '\n';
      return 0;
    }
    if (*scan) {
      cc.estimator.lambda = lambda;
      cc.pair_budget = pair_budget;
      cc.peak.channel_reduce = cli::parse_reduce(reduce);
      const cli::ScanOutcome r = cli::cmd_scan(cc);
      if (r.exit_code == cli::kExitError) {
        std::cerr << "error: " << r.error << '\n';
      } else {
        std::cout << eva::scores_csv(*r.report);
        std::cout << "verdict: " << (r.report->infected.empty() ? "benign" : "infected") << '\n';
      }
      return r.exit_code;
    }
    if (*probe) {
      std::cout << cli::cmd_probe(pc).summary << '\n';
      return 0;
    }
    if (*simulate) {
      std::cout << cli::cmd_simulate(sc);
      return 0;
    }
    if (*serve) {
      wc.query_budget = serve_budget;
      auto server = cli::start_server(serve_model, wc);
      std::signal(SIGINT, on_signal);
      std::signal(SIGTERM, on_signal);
      std::cout << "serving " << serve_model << " at " << server->endpoint() << std::endl;
      while (!g_stop) std::this_thread::sleep_for(std::chrono::milliseconds(100));
      server->stop();
      std::cout << "served " << server->queries_served() << " queries\n";
      return 0;
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return cli::kExitError;
  }
  return cli::kExitError;
}
