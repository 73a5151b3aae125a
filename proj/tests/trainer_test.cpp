#include "peqa/trainer.hpp"

#include <gtest/gtest.h>

#include <limits>

#include "peqa/error.hpp"

namespace peqa {
namespace {

std::vector<Matrix<double>> Snapshot(const ToyModel<double>& m, bool trainable) {
  std::vector<Matrix<double>> out;
  m.ForEachTensor([&](const Tensor<double>& t) {
    if (t.trainable == trainable) out.push_back(t.value);
  });
  return out;
}

bool BitEqual(const std::vector<Matrix<double>>& a, const std::vector<Matrix<double>>& b) {
  if (a.size() != b.size()) return false;
  for (std::size_t i = 0; i < a.size(); ++i)
    if (a[i].size() != b[i].size() || !(a[i].array() == b[i].array()).all()) return false;
  return true;
}

TEST(TrainAdapters, CopyTaskLossDropsTenfold) {
  auto model = ToyModel<double>::Build(ToyConfig{});
  const auto data = MakeCopyTask(32, 6, 64, 6);
  const TrainLog log = TrainAdapters(model, data, TrainHyper{});
  EXPECT_EQ(log.step_losses.size(), 200u);
  EXPECT_LT(log.final_loss, 0.1 * log.initial_loss);
  EXPECT_EQ(log.trainable_parameters, model.trainable_count());
}

TEST(TrainAdapters, FrozenTensorsAreUntouched) {
  auto model = ToyModel<double>::Build(ToyConfig{});
  const auto frozen = Snapshot(model, false);
  const auto before = Snapshot(model, true);
  TrainHyper h;
  h.steps = 20;
  TrainAdapters(model, MakeCopyTask(16, 5, 64, 1), h);
  EXPECT_TRUE(BitEqual(Snapshot(model, false), frozen));
  EXPECT_FALSE(BitEqual(Snapshot(model, true), before));
}

TEST(TrainAdapters, ZeroLearningRateChangesNothing) {
  for (Optimizer opt : {Optimizer::kSgd, Optimizer::kAdam}) {
    auto model = ToyModel<double>::Build(ToyConfig{});
    model.RandomizeAdapters(2, 0.1);
    const auto before = Snapshot(model, true);
    TrainHyper h;
    h.steps = 10;
    h.learning_rate = 0.0;
    h.optimizer = opt;
    h.batch_size = 8;
    const TrainLog log = TrainAdapters(model, MakeCopyTask(8, 5, 64, 2), h);
    EXPECT_TRUE(BitEqual(Snapshot(model, true), before));
    for (double l : log.step_losses) EXPECT_EQ(l, log.step_losses.front());
    EXPECT_EQ(log.final_loss, log.initial_loss);
  }
}

TEST(TrainAdapters, NoAdaptersMeansConstantLoss) {
  ToyConfig c;
  c.adapters = AdapterSet(2, 2);
  auto model = ToyModel<double>::Build(c);
  TrainHyper h;
  h.steps = 5;
  h.batch_size = 4;
  const TrainLog log = TrainAdapters(model, MakeCopyTask(4, 5, 64, 3), h);
  EXPECT_EQ(log.trainable_parameters, 0);
  for (double l : log.step_losses) EXPECT_EQ(l, log.initial_loss);
  EXPECT_EQ(log.final_loss, log.initial_loss);
}

TEST(TrainAdapters, SameSeedSameLog) {
  TrainHyper h;
  h.steps = 15;
  h.batch_size = 5;
  const auto data = MakeCopyTask(12, 5, 64, 9);
  auto a = ToyModel<double>::Build(ToyConfig{});
  auto b = ToyModel<double>::Build(ToyConfig{});
  EXPECT_EQ(TrainLogToJson(TrainAdapters(a, data, h)), TrainLogToJson(TrainAdapters(b, data, h)));
}

TEST(TrainAdapters, SinglePrecisionAlsoLearns) {
  auto model = ToyModel<float>::Build(ToyConfig{});
  const TrainLog log = TrainAdapters(model, MakeCopyTask(32, 6, 64, 6), TrainHyper{});
  EXPECT_LT(log.final_loss, 0.1 * log.initial_loss);
}

TEST(TrainAdapters, DivergenceIsReported) {
  // Post-norm layers keep the loss bounded under huge steps, so plant a NaN.
  auto model = ToyModel<double>::Build(ToyConfig{});
  model.ForEachTensor([](Tensor<double>& t) {
    if (t.trainable) t.value(0, 0) = std::numeric_limits<double>::quiet_NaN();
  });
  TrainHyper h;
  h.steps = 3;
  try {
    TrainAdapters(model, MakeCopyTask(4, 5, 64, 1), h);
    FAIL() << "expected divergence";
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::kDivergence);
  }
}

TEST(TrainAdapters, RejectsBadHyperParameters) {
  auto model = ToyModel<double>::Build(ToyConfig{});
  TrainHyper h;
  h.batch_size = 0;
  EXPECT_THROW(TrainAdapters(model, MakeCopyTask(4, 5, 64, 1), h), Error);
  EXPECT_THROW(TrainAdapters(model, {}, TrainHyper{}), Error);
}

TEST(MakeCopyTask, TokensAvoidBos) {
  for (const Sample& s : MakeCopyTask(50, 8, 5, 7)) {
    EXPECT_EQ(s.source, s.target);
    for (int t : s.source) {
      EXPECT_GE(t, 1);
      EXPECT_LE(t, 4);
    }
  }
}

}  // namespace
}  // namespace peqa
