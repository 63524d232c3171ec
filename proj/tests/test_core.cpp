#include <gtest/gtest.h>

#include <thread>

#include "gapscan/core/sample_bank.hpp"
#include "gapscan/core/trigger.hpp"
#include "helpers.hpp"

using namespace gapscan;

namespace {

const Shape kImg{16, 16, 1};

TEST(Tensor, RejectsWrongLengthAndReportsShape) {
  EXPECT_THROW(Tensor(Shape{2, 2, 1}, std::vector<double>{1, 2, 3}), InvalidInput);
  Tensor x(Shape{2, 3, 2}, 0.0);
  EXPECT_EQ(x.size(), 12u);
  x.at(1, 2, 1) = 0.5;
  EXPECT_EQ(x.index(1, 2, 1), 11u);  // row-major, channel innermost
  EXPECT_EQ(x[11], 0.5);
}

TEST(Trigger, EmptyMaskIsIdentity) {
  Rng rng(1);
  const Tensor x = testkit::uniform_tensor(kImg, rng);
  const TriggerSpec t(Tensor(kImg, 0.0), testkit::uniform_tensor(kImg, rng), 1.0, 3);
  EXPECT_EQ(apply_trigger(x, t), x);
}

TEST(Trigger, OpaqueSingleSiteSubstitutesPattern) {
  Tensor mask(kImg, 0.0);
  Tensor pattern(kImg, 0.0);
  mask.at(0, 0) = 1.0;
  pattern.at(0, 0) = 0.7;
  Tensor x(kImg, 0.4);
  x.at(0, 0) = 0.2;
  const Tensor y = apply_trigger(x, TriggerSpec(mask, pattern, 1.0, 0));
  EXPECT_DOUBLE_EQ(y.at(0, 0), 0.7);
  for (std::size_t i = 1; i < y.size(); ++i) EXPECT_EQ(y[i], 0.4);
}

TEST(Trigger, FourByFourPatchFootprintOnThirtyTwo) {
  const TriggerSpec t = square_patch(Shape{32, 32, 1}, 4, 3, 5, 1.0, 0);
  EXPECT_NEAR(t.footprint(), 16.0 / 1024.0, 1e-15);
  EXPECT_NEAR(t.footprint(), 0.016, 0.001);
}

TEST(Trigger, ValidatesMaskPatternAndBlend) {
  Tensor bad_mask(kImg, 0.0);
  bad_mask[0] = 0.5;
  EXPECT_THROW(TriggerSpec(bad_mask, Tensor(kImg, 0.0), 1.0, 0), InvalidInput);
  EXPECT_THROW(TriggerSpec(Tensor(kImg, 0.0), Tensor(kImg, 1.5), 1.0, 0), InvalidInput);
  EXPECT_THROW(TriggerSpec(Tensor(kImg, 0.0), Tensor(kImg, 0.5), 0.0, 0), InvalidInput);
  EXPECT_THROW(TriggerSpec(Tensor(kImg, 0.0), Tensor(Shape{4, 4, 1}, 0.5), 1.0, 0), InvalidInput);
  EXPECT_THROW(square_patch(kImg, 4, 14, 0, 1.0, 0), InvalidInput);
}

TEST(Trigger, IdempotentAtFullBlendAndStaysInRange) {
  Rng rng(7);
  const TriggerSpec patch = corner_patch(kImg, 3, 2);
  const TriggerSpec mark = full_watermark(kImg, 0.1, 2, 9);
  for (int i = 0; i < 50; ++i) {
    const Tensor x = testkit::uniform_tensor(kImg, rng);
    const Tensor once = apply_trigger(x, patch);
    EXPECT_EQ(apply_trigger(once, patch), once);
    EXPECT_TRUE(in_unit_range(apply_trigger(x, mark)));
  }
  EXPECT_EQ(corner_patch(kImg, 3, 2).mask().at(15, 15), 1.0);
  EXPECT_EQ(corner_patch(kImg, 3, 2).mask().at(12, 15), 0.0);
}

TEST(Oracle, CountsExactlyOnePerCallAndIsDeterministic) {
  FunctionOracle o(kImg, 3, [](const Tensor& x) { return static_cast<Label>(x[0] * 2.999); });
  Rng rng(3);
  for (std::uint64_t k = 1; k <= 20; ++k) {
    const Tensor x = testkit::uniform_tensor(kImg, rng);
    const Label a = o.classify(x);
    EXPECT_EQ(o.queries_used(), 2 * k - 1);
    EXPECT_EQ(o.classify(x), a);
    EXPECT_EQ(o.queries_used(), 2 * k);
  }
  const std::vector<Tensor> batch(5, Tensor(kImg, 0.5));
  EXPECT_EQ(o.classify_batch(batch).size(), 5u);
  EXPECT_EQ(o.queries_used(), 45u);
}

TEST(Oracle, InvalidInputIsRejectedAndNotCounted) {
  FunctionOracle o(kImg, 2, [](const Tensor&) { return Label{0}; });
  EXPECT_THROW(o.classify(Tensor(Shape{4, 4, 1}, 0.5)), InvalidInput);
  EXPECT_THROW(o.classify(Tensor(kImg, 1.5)), InvalidInput);
  EXPECT_EQ(o.queries_used(), 0u);
}

TEST(Oracle, ThrowingModelIsRolledBack) {
  FunctionOracle o(kImg, 2, [](const Tensor&) -> Label { throw NumericError("boom"); });
  EXPECT_THROW(o.classify(Tensor(kImg, 0.5)), NumericError);
  EXPECT_EQ(o.queries_used(), 0u);
}

TEST(Oracle, BudgetIsExactAndBatchesAllOrNothing) {
  FunctionOracle o(kImg, 2, [](const Tensor&) { return Label{1}; }, 10);
  const Tensor x(kImg, 0.5);
  for (int i = 0; i < 8; ++i) o.classify(x);
  const std::vector<Tensor> three(3, x);
  EXPECT_THROW(o.classify_batch(three), BudgetExhausted);
  EXPECT_EQ(o.queries_used(), 8u);
  o.classify(x);
  o.classify(x);
  EXPECT_THROW(o.classify(x), BudgetExhausted);
  EXPECT_EQ(o.queries_used(), 10u);
  EXPECT_THROW(FunctionOracle(kImg, 2, [](const Tensor&) { return Label{0}; }, 0), ConfigError);
}

TEST(Oracle, ConcurrentCallersNeverOverAdmit) {
  FunctionOracle o(kImg, 2, [](const Tensor&) { return Label{0}; }, 1000);
  std::atomic<int> ok{0};
  std::atomic<int> refused{0};
  {
    std::vector<std::jthread> pool;
    for (int t = 0; t < 4; ++t) {
      pool.emplace_back([&] {
        const Tensor x(kImg, 0.5);
        for (int i = 0; i < 400; ++i) {
          try {
            o.classify(x);
            ++ok;
          } catch (const BudgetExhausted&) {
            ++refused;
          }
        }
      });
    }
  }
  EXPECT_EQ(ok.load(), 1000);
  EXPECT_EQ(refused.load(), 600);
  EXPECT_EQ(o.queries_used(), 1000u);
}

TEST(OracleView, ChargesBothLedgersAndEnforcesItsOwnCap) {
  FunctionOracle parent(kImg, 2, [](const Tensor&) { return Label{0}; });
  OracleView view(parent, 3);
  const Tensor x(kImg, 0.5);
  parent.classify(x);
  for (int i = 0; i < 3; ++i) view.classify(x);
  EXPECT_THROW(view.classify(x), BudgetExhausted);
  EXPECT_EQ(view.queries_used(), 3u);
  EXPECT_EQ(parent.queries_used(), 4u);
}

TEST(SampleBank, FullAgreementKeepsAll) {
  FunctionOracle o(kImg, 2, [](const Tensor&) { return Label{0}; });
  Rng rng(2);
  std::map<Label, std::vector<Tensor>> c;
  for (int i = 0; i < 10; ++i) c[0].push_back(testkit::uniform_tensor(kImg, rng));
  const SampleBank bank = build_sample_bank(o, c, 40);
  EXPECT_EQ(bank.samples(0).size(), 10u);
  EXPECT_EQ(bank.rejected(0), 0u);
}

TEST(SampleBank, FullDisagreementNamesTheClass) {
  FunctionOracle o(kImg, 2, [](const Tensor&) { return Label{0}; });
  std::map<Label, std::vector<Tensor>> c;
  c[1].assign(5, Tensor(kImg, 0.5));
  try {
    build_sample_bank(o, c, 40);
    FAIL() << "expected BankError";
  } catch (const BankError& e) {
    EXPECT_NE(std::string(e.what()).find("class 1"), std::string::npos);
  }
}

// Agreement decided by the first pixel: ~70% of uniform candidates fall below 0.7.
TEST(SampleBank, MixedAgreementCountMatchesDirectFilter) {
  auto label_of = [](const Tensor& x) { return x[0] < 0.7 ? Label{0} : Label{1}; };
  FunctionOracle o(kImg, 2, label_of);
  Rng rng(20240607);
  std::map<Label, std::vector<Tensor>> c;
  for (int i = 0; i < 60; ++i) c[0].push_back(testkit::uniform_tensor(kImg, rng));

  // Oracle: walk the candidates by hand.
  std::size_t agree = 0;
  std::size_t screened = 0;
  for (const Tensor& x : c[0]) {
    if (agree == 40) break;
    ++screened;
    agree += label_of(x) == 0;
  }
  const SampleBank bank = build_sample_bank(o, c, 40);
  EXPECT_EQ(bank.samples(0).size(), agree);
  EXPECT_EQ(bank.samples(0).size(), 40u);  // frozen
  EXPECT_EQ(bank.rejected(0), screened - agree);
  EXPECT_EQ(o.queries_used(), screened);
  for (const Tensor& x : bank.samples(0)) EXPECT_EQ(label_of(x), 0u);
}

TEST(Random, DerivedSeedsAreStableAndDistinct) {
  EXPECT_EQ(derive_seed(5, {1, 2, 3}), derive_seed(5, {1, 2, 3}));
  EXPECT_NE(derive_seed(5, {1, 2, 3}), derive_seed(5, {1, 3, 2}));
  EXPECT_NE(derive_seed(5, {1}), derive_seed(6, {1}));
}

}  // namespace
