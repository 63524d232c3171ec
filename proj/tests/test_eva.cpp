#include <gtest/gtest.h>

#include <limits>

#include "gapscan/eva/amplification.hpp"
#include "gapscan/eva/gap.hpp"
#include "gapscan/eva/mad.hpp"
#include "gapscan/eva/noise_probe.hpp"
#include "gapscan/eva/report.hpp"
#include "gapscan/modelzoo/dataset.hpp"
#include "gapscan/modelzoo/mlp.hpp"
#include "helpers.hpp"

using namespace gapscan;
using namespace gapscan::eva;

namespace {

const Shape kImg{16, 16, 1};

TEST(Normalize, SingleSiteAndUniformMaps) {
  Tensor one(kImg, 0.0);
  one[37] = -0.3;
  const Tensor n1 = normalize_map(one);
  for (std::size_t i = 0; i < n1.size(); ++i) EXPECT_EQ(n1[i], i == 37 ? 1.0 : 0.0);
  const Tensor n2 = normalize_map(Tensor(kImg, 0.25));
  for (double v : n2.values()) EXPECT_DOUBLE_EQ(v, 1.0 / 256.0);
  EXPECT_THROW(normalize_map(Tensor(kImg, 0.0)), NormalizationError);
}

TEST(Peak, DefinitionalValues) {
  Tensor one(kImg, 0.0);
  one[5] = 0.8;
  EXPECT_DOUBLE_EQ(adversarial_peak(one), 1.0);
  EXPECT_DOUBLE_EQ(adversarial_peak(Tensor(kImg, 0.5)), 1.0 / 256.0);
  Tensor two(kImg, 0.0);
  two[0] = 0.6;
  two[200] = -0.4;
  EXPECT_DOUBLE_EQ(adversarial_peak(two, PeakConfig{5, ChannelReduce::l1_sum}), 1.0);
  EXPECT_DOUBLE_EQ(adversarial_peak(two, PeakConfig{1, ChannelReduce::l1_sum}), 0.6);
  EXPECT_THROW(adversarial_peak(two, PeakConfig{0, ChannelReduce::l1_sum}), ConfigError);
}

TEST(Peak, AllSitesSumToOneAndChannelsCollapse) {
  Rng rng(3);
  const Shape rgb{4, 4, 3};
  for (int i = 0; i < 20; ++i) {
    const Tensor mu = testkit::uniform_tensor(rgb, rng, -1.0, 1.0);
    EXPECT_NEAR(adversarial_peak(mu, PeakConfig{16, ChannelReduce::l1_sum}), 1.0, 1e-12);
    const Tensor heat = spatial_heatmap(mu);
    EXPECT_EQ(heat.shape(), (Shape{4, 4, 1}));
    EXPECT_NEAR(l1_norm(heat.values()), 1.0, 1e-12);
    for (double v : heat.values()) EXPECT_GE(v, 0.0);
  }
  Tensor mu(rgb, 0.0);
  mu.at(1, 2, 0) = 0.2;
  mu.at(1, 2, 2) = -0.2;
  mu.at(3, 3, 1) = 0.3;
  EXPECT_DOUBLE_EQ(adversarial_peak(mu, PeakConfig{1, ChannelReduce::l1_sum}), 0.4 / 0.7);
  EXPECT_DOUBLE_EQ(adversarial_peak(mu, PeakConfig{1, ChannelReduce::max}), 0.3 / 0.5);
}

TEST(Mad, HandEvaluatedExample) {
  const std::vector<double> s{2, 3, 3, 4, 20};
  const std::vector<double> idx = mad_anomaly_indices(s);
  EXPECT_NEAR(idx[4], 17.0 / 1.4826, 1e-12);
  EXPECT_NEAR(idx[4], 11.466, 0.001);
  EXPECT_NEAR(idx[0], 1.0 / 1.4826, 1e-12);
  EXPECT_EQ(idx[1], 0.0);
}

TEST(Mad, DegenerateSpreads) {
  const std::vector<double> flat(6, 2.5);
  for (double v : mad_anomaly_indices(flat)) EXPECT_EQ(v, 0.0);
  // MAD = 0, mean absolute deviation = 0.8
  const std::vector<double> spike{1, 1, 1, 1, 5};
  EXPECT_NEAR(mad_anomaly_indices(spike)[4], 4.0 / (0.8 * 1.2533141373155001), 1e-12);
  EXPECT_THROW(mad_anomaly_indices(std::vector<double>{1, 2}), StatisticsError);
}

TEST(Mad, AffineInvariantAndPermutationEquivariant) {
  Rng rng(17);
  std::uniform_real_distribution<double> u(-5.0, 5.0);
  std::uniform_real_distribution<double> pos(0.01, 100.0);
  for (int trial = 0; trial < 100; ++trial) {
    std::vector<double> s(3 + trial % 12);
    for (double& v : s) v = u(rng);
    const std::vector<double> base = mad_anomaly_indices(s);
    const double a = pos(rng);
    const double c = u(rng);
    std::vector<double> t = s;
    for (double& v : t) v = a * v + c;
    const std::vector<double> moved = mad_anomaly_indices(t);
    for (std::size_t i = 0; i < s.size(); ++i) EXPECT_NEAR(moved[i], base[i], 1e-9 * (1.0 + base[i]));
    std::vector<std::size_t> perm(s.size());
    std::iota(perm.begin(), perm.end(), 0);
    std::shuffle(perm.begin(), perm.end(), rng);
    std::vector<double> p(s.size());
    for (std::size_t i = 0; i < s.size(); ++i) p[i] = s[perm[i]];
    const std::vector<double> permuted = mad_anomaly_indices(p);
    for (std::size_t i = 0; i < s.size(); ++i) EXPECT_DOUBLE_EQ(permuted[i], base[perm[i]]);
    for (double v : base) EXPECT_GE(v, 0.0);
  }
}

TEST(Amplification, AnalyticTail) {
  EXPECT_NEAR(amplified_tail(0.47, 6), 0.010779215329, 1e-12);
  EXPECT_NEAR(amplified_tail(0.47, 6), 0.0107, 1e-4);
  EXPECT_DOUBLE_EQ(amplified_tail(0.3, 1), 0.3);
  for (std::size_t k = 1; k < 20; ++k) EXPECT_LT(amplified_tail(0.47, k + 1), amplified_tail(0.47, k));
  EXPECT_EQ(amplified_tail(1.0, 7), 1.0);
  EXPECT_THROW(amplified_tail(1.2, 2), ConfigError);
  EXPECT_THROW(amplified_tail(0.5, 0), ConfigError);
}

TEST(Amplification, SimulationWithinThreeSigma) {
  const std::vector<AmplificationRow> rows = simulate_amplification(0.47, 10, 100000, 42);
  ASSERT_EQ(rows.size(), 10u);
  for (const AmplificationRow& r : rows) {
    EXPECT_LE(std::abs(r.empirical - r.analytic), r.three_sigma) << "k=" << r.k;
  }
  EXPECT_NEAR(rows[5].empirical, 0.0107, 0.01);
  for (const AmplificationRow& r : simulate_amplification(1.0, 5, 1000, 1)) EXPECT_EQ(r.empirical, 1.0);
}

// One infected 6-class MLP (3x3 patch, target 2) shared by the campaign tests below.
struct Campaign {
  std::shared_ptr<const zoo::MlpModel> model;
  SampleBank bank;

  static const Campaign& get() {
    static const Campaign c = [] {
      const zoo::SyntheticImages gen{kImg, 6};
      zoo::MlpTrainConfig tc;
      tc.seed = 3;
      auto m = std::make_shared<const zoo::MlpModel>(
          zoo::train_mlp_backdoored(zoo::make_poisoned_dataset(gen.generate(200, 1), corner_patch(kImg, 3, 2), 0.1, 2), tc)
              .model);
      ModelOracle<zoo::MlpModel> o(m);
      SampleBank b = build_sample_bank(o, gen.generate(8, 4).by_class(), 3);
      return Campaign{m, std::move(b)};
    }();
    return c;
  }
};

GapConfig quick_gap() {
  GapConfig g;
  g.estimator.max_iters = 8;
  g.estimator.num_probes = 100;
  g.estimator.seed = 7;
  return g;
}

TEST(Gap, ScoreIsTheSumOfPerClassMaxima) {
  const Campaign& c = Campaign::get();
  ModelOracle<zoo::MlpModel> o(c.model);
  const LabelGap g = gap_for_label(2, c.bank, o, quick_gap(), {0, 4});
  ASSERT_EQ(g.classes.size(), 2u);
  double sum = 0.0;
  for (const ClassGap& cls : g.classes) {
    double best = 0.0;
    for (const SamplePeak& s : cls.samples) best = std::max(best, s.peak);
    EXPECT_DOUBLE_EQ(cls.max_peak, best);
    sum += cls.max_peak;
  }
  EXPECT_DOUBLE_EQ(g.score, sum);
  EXPECT_EQ(g.queries, o.queries_used());
  EXPECT_NEAR(l1_norm(g.heatmap.values()), 1.0, 1e-9);
  for (const ClassGap& cls : g.classes) {
    ASSERT_TRUE(cls.argmax.has_value());
    EXPECT_NEAR(l1_norm(normalize_map(cls.best_mu).values()), 1.0, 1e-9);
  }
}

TEST(Gap, MonotoneInSamplesAndSources) {
  const Campaign& c = Campaign::get();
  ModelOracle<zoo::MlpModel> o(c.model);
  std::map<Label, std::vector<Tensor>> fewer;
  for (Label l : c.bank.labels()) {
    const auto& xs = c.bank.samples(l);
    fewer[l] = l == 1 ? std::vector<Tensor>(xs.begin(), xs.begin() + 2) : xs;
  }
  const SampleBank small = SampleBank::from_verified(fewer, 3);
  const LabelGap full = gap_for_label(3, c.bank, o, quick_gap(), {0, 1});
  const LabelGap part = gap_for_label(3, small, o, quick_gap(), {0, 1});
  EXPECT_GE(full.classes[1].max_peak, part.classes[1].max_peak);
  EXPECT_GE(full.score, part.score);
  const LabelGap one = gap_for_label(3, c.bank, o, quick_gap(), {0});
  EXPECT_GE(full.score, one.score);
  EXPECT_DOUBLE_EQ(one.score, full.classes[0].max_peak);
}

TEST(Gap, PairBudgetMarksPartialResults) {
  const Campaign& c = Campaign::get();
  ModelOracle<zoo::MlpModel> o(c.model);
  GapConfig g = quick_gap();
  g.pair_query_budget = 1500;
  const LabelGap r = gap_for_label(2, c.bank, o, g, {0, 1});
  EXPECT_TRUE(r.partial);
  for (const ClassGap& cls : r.classes) EXPECT_LE(cls.queries, 1500u);
}

// Seeded regression value: the infected label's GAP against the mean of the clean labels.
TEST(Detect, InfectedCampaignSeparatesTheTarget) {
  const Campaign& c = Campaign::get();
  ModelOracle<zoo::MlpModel> o(c.model);
  DetectConfig d;
  d.gap = quick_gap();
  d.workers = 3;
  const GapReport r = detect(o, c.bank, d);
  ASSERT_EQ(r.labels.size(), 6u);
  EXPECT_EQ(r.infected, std::vector<Label>{2});
  EXPECT_TRUE(r.low_confidence);
  double clean = 0.0;
  for (std::size_t i = 0; i < 6; ++i) clean += i == 2 ? 0.0 : r.scores[i] / 5.0;
  const double separation = r.scores[2] / clean;
  EXPECT_NEAR(separation, 3.8520352727841534, 1e-6);
  EXPECT_EQ(r.total_queries, o.queries_used());

  d.workers = 1;
  ModelOracle<zoo::MlpModel> o2(c.model);
  EXPECT_EQ(detect(o2, c.bank, d).scores, r.scores);  // worker count does not change results

  d.tau = std::numeric_limits<double>::infinity();
  ModelOracle<zoo::MlpModel> o3(c.model);
  EXPECT_TRUE(detect(o3, c.bank, d).infected.empty());
}

TEST(Detect, NeedsThreeLabels) {
  const Campaign& c = Campaign::get();
  ModelOracle<zoo::MlpModel> o(c.model);
  DetectConfig d;
  d.labels = {0, 1};
  EXPECT_THROW(detect(o, c.bank, d), StatisticsError);
}

TEST(Report, JsonAndCsvLayouts) {
  GapReport r;
  r.labels = {0, 1, 2};
  r.scores = {0.5, 0.25, 2.0};
  r.anomaly_indices = {0.0, 0.7, 5.1};
  r.infected = {2};
  r.low_confidence = true;
  r.total_queries = 30;
  for (Label l : r.labels) {
    LabelGap g;
    g.label = l;
    g.queries = 10;
    r.details.push_back(g);
  }
  const nlohmann::json j = to_json(r);
  EXPECT_EQ(j.at("schema_version"), kReportSchemaVersion);
  EXPECT_EQ(j.at("verdict"), "infected");
  EXPECT_EQ(j.at("labels").size(), 3u);
  EXPECT_EQ(scores_csv(r),
            "label,score,anomaly_index,infected,partial,queries\n"
            "0,0.5,0,0,0,10\n1,0.25,0.69999999999999996,0,0,10\n2,2,5.0999999999999996,1,0,10\n");
  Tensor heat(Shape{2, 3, 1}, 0.0);
  heat.at(1, 2) = 1.0;
  EXPECT_EQ(heatmap_csv(heat), "0,0,0\n0,0,1\n");
}

TEST(NoiseProbe, TinyNoiseOnARobustModelFlipsNothing) {
  const Campaign& c = Campaign::get();
  ModelOracle<zoo::MlpModel> o(c.model);
  const std::vector<Tensor>& xs = c.bank.samples(0);
  const ProbeResult r = noise_sensitivity_probe(o, xs, 1e-6, 5, 1);
  EXPECT_EQ(r.flip_fraction, 0.0);
  EXPECT_EQ(r.flips_per_sample.size(), xs.size());
  EXPECT_EQ(o.queries_used(), xs.size() * 6);
  EXPECT_THROW(noise_sensitivity_probe(o, xs, 0.025, 0, 1), ConfigError);
  EXPECT_THROW(noise_sensitivity_probe(o, xs, 0.0, 3, 1), ConfigError);
}

}  // namespace
