#include <gtest/gtest.h>

#include <random>
#include <sstream>

#include "adaptraj/types.hpp"
#include "test_util.hpp"

using namespace adaptraj;

namespace {

TrajectoryScene valid_scene() {
  std::mt19937_64 rng(3);
  return testutil::random_scene(rng, 2, 1);
}

}  // namespace

TEST(ValidateScene, AcceptsWellFormedScene) { EXPECT_TRUE(validate_scene(valid_scene()).empty()); }

TEST(ValidateScene, ShortObservationWindow) {
  auto s = valid_scene();
  s.focal_observed.pop_back();
  const auto v = validate_scene(s);
  ASSERT_EQ(v.size(), 1u);
  EXPECT_EQ(v[0], "focal_observed length 7 ≠ 8");
}

TEST(ValidateScene, NeighborWithoutValidFrame) {
  auto s = valid_scene();
  s.neighbors[0].valid.assign(kObsLen, false);
  const auto v = validate_scene(s);
  ASSERT_EQ(v.size(), 1u);
  EXPECT_EQ(v[0], "neighbor 0 never co-occurs");
}

TEST(ValidateScene, FutureLengthAndFiniteness) {
  auto s = valid_scene();
  s.focal_future.resize(5);
  s.focal_observed[2].x = std::nan("");
  const auto v = validate_scene(s);
  EXPECT_EQ(v.size(), 2u);
}

TEST(ValidateScene, NegativeUnmaskedDomain) {
  auto s = valid_scene();
  s.domain_id = -4;
  EXPECT_EQ(validate_scene(s).size(), 1u);
  s.domain_id = kMaskedDomain;
  EXPECT_TRUE(validate_scene(s).empty());
}

TEST(SceneRecord, ExactFieldSet) {
  const json j = scene_to_json(valid_scene());
  std::vector<std::string> keys;
  for (const auto& [k, _] : j.items()) keys.push_back(k);
  std::sort(keys.begin(), keys.end());
  EXPECT_EQ(keys, (std::vector<std::string>{"domain_id", "focal", "future", "neighbors", "scene_id", "t0"}));
  EXPECT_EQ(j["focal"].size(), 8u);
  EXPECT_EQ(j["future"].size(), 12u);
  EXPECT_EQ(j["neighbors"][0]["mask"].size(), 8u);
  EXPECT_EQ(j["neighbors"][0]["pts"][0].size(), 2u);
}

TEST(SceneRecord, RoundTrip) {
  std::mt19937_64 rng(11);
  auto scenes = testutil::random_scenes(rng, 7, 2);
  scenes[3].domain_id = kMaskedDomain;
  std::stringstream ss;
  write_scenes(ss, scenes);
  EXPECT_EQ(read_scenes(ss), scenes);
}

TEST(SceneRecord, MaskedDomainSpelledOut) {
  auto s = valid_scene();
  s.domain_id = kMaskedDomain;
  EXPECT_EQ(scene_to_json(s)["domain_id"], "MASKED");
}

TEST(SceneRecord, RejectsUnknownFieldsAndBadValues) {
  json j = scene_to_json(valid_scene());
  j["extra"] = 1;
  EXPECT_THROW(scene_from_json(j), DataError);
  j = scene_to_json(valid_scene());
  j["domain_id"] = "other";
  EXPECT_THROW(scene_from_json(j), DataError);
  j = scene_to_json(valid_scene());
  j["focal"][0] = json::array({1.0});
  EXPECT_THROW(scene_from_json(j), DataError);
  EXPECT_THROW(decode_scene("{not json"), DataError);
}

TEST(HyperParams, DefaultsValidate) { EXPECT_NO_THROW(HyperParams{}.validate()); }

TEST(HyperParams, JsonRoundTripCoversEveryField) {
  HyperParams hp;
  hp.alpha = 0.2;
  hp.seed = 99;
  hp.simse_variant = SimseVariant::kLiteral;
  hp.e_total = 40;
  const json j = hp;
  EXPECT_EQ(j.size(), 20u);
  const auto back = j.get<HyperParams>();
  EXPECT_EQ(json(back), j);
}

TEST(HyperParams, RejectsUnknownKeysAndBadValues) {
  EXPECT_THROW(json({{"learning_rate", 0.1}}).get<HyperParams>(), ConfigError);
  EXPECT_THROW(json({{"simse_variant", "other"}}).get<HyperParams>(), ConfigError);
  HyperParams hp;
  hp.sigma = 1.5;
  EXPECT_THROW(hp.validate(), ConfigError);
  hp = HyperParams{};
  hp.e_start = 25;
  EXPECT_THROW(hp.validate(), ConfigError);
  hp = HyperParams{};
  hp.f_low = 2.0;
  EXPECT_THROW(hp.validate(), ConfigError);
}

TEST(FeatureBundle, DimensionCheck) {
  FeatureBundle fb;
  for (auto* v : {&fb.indiv_hidden, &fb.interaction, &fb.indiv_invariant, &fb.neigh_invariant, &fb.indiv_specific,
                  &fb.neigh_specific, &fb.fused_invariant, &fb.fused_specific}) {
    v->assign(4, 0.5);
  }
  EXPECT_NO_THROW(fb.check(4));
  EXPECT_THROW(fb.check(5), DimensionError);
  fb.fused_specific[1] = std::numeric_limits<double>::infinity();
  EXPECT_THROW(fb.check(4), DimensionError);
}
