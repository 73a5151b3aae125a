#include "peqa/ablation.hpp"

#include <gtest/gtest.h>

#include <sstream>

#include "peqa/error.hpp"

namespace peqa {
namespace {

std::vector<int> Iota(int first, int last) {
  std::vector<int> v;
  for (int i = first; i <= last; ++i) v.push_back(i);
  return v;
}

AdapterCount Cost(const AblationConfig& c) {
  const ModelDims dims = ReferenceDims();
  return CountAdapterParams(dims, ApplyAblation(AdapterSet::Full(12, 12), c));
}

TEST(UniformPlan, TwelveNestedConfigs) {
  const auto plan = UniformAblationPlan(ReferenceDims());
  ASSERT_EQ(plan.size(), 12u);
  EXPECT_EQ(plan[0], (AblationConfig{{0}, {12}}));
  EXPECT_EQ(plan[11], (AblationConfig{Iota(0, 11), Iota(12, 23)}));
  EXPECT_EQ(Cost(plan[11]).count, 0);
  for (std::size_t k = 0; k + 1 < plan.size(); ++k)
    EXPECT_GT(Cost(plan[k]).count, Cost(plan[k + 1]).count);
}

TEST(GridPlan, ThirtySixConfigsEncoderFastest) {
  const auto plan = GridAblationPlan(ReferenceDims());
  ASSERT_EQ(plan.size(), 36u);
  EXPECT_EQ(plan[0].label(), "(0-6, 12-18)");
  EXPECT_EQ(plan[1].label(), "(0-7, 12-18)");
  EXPECT_EQ(plan[6].label(), "(0-6, 12-19)");
  EXPECT_EQ(plan[35].label(), "(0-11, 12-23)");
}

TEST(GridPlan, CostsMatchClosedForm) {
  const std::int64_t per_layer = 2 * AdapterParamCount(1024, 64);
  ASSERT_EQ(per_layer, 264'320);
  for (const CostedAblation& c : CostPlan(GridAblationPlan(ReferenceDims()), ReferenceDims())) {
    const auto active = 24 - c.config.removed_encoder.size() - c.config.removed_decoder.size();
    EXPECT_EQ(c.cost.count, static_cast<std::int64_t>(active) * per_layer) << c.config.label();
  }
}

TEST(GridPlan, TableCosts) {
  struct Row {
    AblationConfig config;
    std::int64_t count;
    double percent;
  };
  for (const Row& r : {Row{{Iota(0, 6), Iota(12, 18)}, 2'643'200, 0.65},
                       Row{{Iota(0, 8), Iota(12, 20)}, 1'585'920, 0.39},
                       Row{{Iota(0, 10), Iota(12, 22)}, 528'640, 0.13},
                       Row{{Iota(0, 11), Iota(12, 23)}, 0, 0.0}}) {
    const AdapterCount c = Cost(r.config);
    EXPECT_EQ(c.count, r.count);
    EXPECT_EQ(c.percent, r.percent);
  }
}

TEST(Labels, EmptySidesPrintDash) {
  EXPECT_EQ((AblationConfig{}).label(), "(-, -)");
  EXPECT_EQ((AblationConfig{{0, 1, 2}, {}}).label(), "(0-2, -)");
  EXPECT_EQ((AblationConfig{{0}, {12}}).label(), "(0-0, 12-12)");
}

TEST(ApplyAblation, Idempotent) {
  const AdapterSet full = AdapterSet::Full(12, 12);
  for (const auto& c : GridAblationPlan(ReferenceDims())) {
    const AdapterSet once = ApplyAblation(full, c);
    EXPECT_EQ(ApplyAblation(once, c), once);
  }
}

TEST(ValidateAblation, RejectsBadRanges) {
  EXPECT_THROW(ValidateAblation({{1, 2}, {}}, 12, 12), Error);      // not from 0
  EXPECT_THROW(ValidateAblation({{0, 2}, {}}, 12, 12), Error);      // gap
  EXPECT_THROW(ValidateAblation({{}, {0}}, 12, 12), Error);         // encoder layer in decoder
  EXPECT_THROW(ValidateAblation({Iota(0, 12), {}}, 12, 12), Error);  // past the encoder
  EXPECT_NO_THROW(ValidateAblation({Iota(0, 11), Iota(12, 23)}, 12, 12));
}

TEST(UniformPlan, NeedsEqualDepths) {
  ModelDims d = ReferenceDims();
  d.n_decoder_layers = 6;
  EXPECT_THROW(UniformAblationPlan(d), Error);
}

TEST(Manifest, OneOrderedObjectPerLine) {
  const std::string text = ManifestJsonl(CostPlan(UniformAblationPlan(ReferenceDims()), ReferenceDims()));
  std::istringstream in(text);
  std::string line;
  int n = 0;
  while (std::getline(in, line)) {
    const auto j = nlohmann::ordered_json::parse(line);
    EXPECT_EQ(j.begin().key(), "label");
    EXPECT_EQ(AblationFromJson(j), UniformAblationPlan(ReferenceDims())[n]);
    ++n;
  }
  EXPECT_EQ(n, 12);
  EXPECT_EQ(text.rfind(R"j({"label":"(0-0, 12-12)","removed_encoder":[0],"removed_decoder":[12],"trainable":5815040,"percent":1.43})j", 0), 0u);
}

TEST(DimsFromJson, DefaultsToReference) {
  const ModelDims d = DimsFromJson(nlohmann::json::object());
  EXPECT_EQ(d.d_model, 1024);
  EXPECT_EQ(d.base_total_params, 406'291'456);
  EXPECT_EQ(DimsFromJson(nlohmann::json{{"bottleneck", 32}}).bottleneck, 32);
}

}  // namespace
}  // namespace peqa
