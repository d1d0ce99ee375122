#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>

#include "adaptraj/synthetic.hpp"

using namespace adaptraj;

namespace {

DomainProfile small_profile(int scenes = 60) {
  DomainProfile p;
  p.domain_id = 2;
  p.name = "small";
  p.scene_count = scenes;
  return p;
}

}  // namespace

TEST(SyntheticDomain, ScenesAreValidAndLabeled) {
  const auto c = generate_synthetic_domain(small_profile(), 7);
  ASSERT_EQ(c.scenes.size(), 60u);
  EXPECT_TRUE(c.is_split());
  EXPECT_EQ(c.n_train, 36u);
  for (const auto& s : c.scenes) {
    EXPECT_TRUE(validate_scene(s).empty());
    EXPECT_EQ(s.domain_id, 2);
    EXPECT_LE(s.neighbors.size(), synth::kNeighborCap);
  }
  EXPECT_EQ(c.stats.n_sequences, 60u);
}

TEST(SyntheticDomain, DeterministicPerSeed) {
  const auto a = generate_synthetic_domain(small_profile(), 7);
  const auto b = generate_synthetic_domain(small_profile(), 7);
  const auto c = generate_synthetic_domain(small_profile(), 8);
  EXPECT_EQ(a.scenes, b.scenes);
  EXPECT_NE(a.scenes, c.scenes);
}

TEST(SyntheticDomain, AxisScaleStretchesLateralSpeed) {
  auto p1 = small_profile(200);
  auto p5 = p1;
  p5.axis_scale_y = 5.0;
  const auto s1 = generate_synthetic_domain(p1, 3).stats;
  const auto s5 = generate_synthetic_domain(p5, 3).stats;
  EXPECT_NEAR(s5.vy_mean / s1.vy_mean, 5.0, 0.5);
  EXPECT_NEAR(s5.vx_mean / s1.vx_mean, 1.0, 1e-12);
}

TEST(SyntheticDomain, DesiredSpeedDrivesMeanSpeed) {
  auto slow = small_profile(200);
  auto fast = slow;
  fast.desired_speed_mean = 2.0;
  EXPECT_GT(generate_synthetic_domain(fast, 3).stats.vx_mean, 1.4 * generate_synthetic_domain(slow, 3).stats.vx_mean);
}

TEST(SyntheticDomain, DensityFollowsProfile) {
  auto sparse = small_profile(300);
  sparse.agents_per_scene_mean = 2.0;
  auto dense = sparse;
  dense.agents_per_scene_mean = 9.0;
  EXPECT_NEAR(generate_synthetic_domain(sparse, 1).stats.num_mean, 2.0, 0.3);
  EXPECT_NEAR(generate_synthetic_domain(dense, 1).stats.num_mean, 9.0, 0.8);
}

TEST(SyntheticDomain, RejectsInvalidProfiles) {
  auto p = small_profile();
  p.axis_scale_y = 0;
  EXPECT_THROW(generate_synthetic_domain(p, 1), ConfigError);
  p = small_profile();
  p.passing_side_bias = 2;
  EXPECT_THROW(generate_synthetic_domain(p, 1), ConfigError);
}

TEST(NeighborCap, KeepsClosestInOriginalOrder) {
  TrajectoryScene s;
  s.focal_observed.assign(kObsLen, Location{0, 0});
  for (double d : {5.0, 1.0, 3.0, 2.0}) {
    NeighborTrack nb;
    nb.pts.assign(kObsLen, Location{d, 0});
    nb.valid.assign(kObsLen, true);
    s.neighbors.push_back(nb);
  }
  cap_neighbors(s, 2);
  ASSERT_EQ(s.neighbors.size(), 2u);
  EXPECT_EQ(s.neighbors[0].pts[0].x, 1.0);
  EXPECT_EQ(s.neighbors[1].pts[0].x, 2.0);
}

TEST(Profiles, ReadsListObjectAndSingle) {
  const auto dir = std::filesystem::temp_directory_path() / "adaptraj_profiles";
  std::filesystem::create_directories(dir);
  {
    std::ofstream(dir / "list.json") << R"({"domains": [{"domain_id": 0, "name": "a"}, {"domain_id": 1}]})";
    std::ofstream(dir / "one.json") << R"({"domain_id": 4, "axis_scale_y": 2.0})";
    std::ofstream(dir / "bad.json") << R"({"domain_id": 4, "speed": 2.0})";
  }
  const auto list = read_profiles(dir / "list.json");
  ASSERT_EQ(list.size(), 2u);
  EXPECT_EQ(list[0].name, "a");
  EXPECT_EQ(list[1].name, "domain1");
  const auto one = read_profiles(dir / "one.json");
  ASSERT_EQ(one.size(), 1u);
  EXPECT_DOUBLE_EQ(one[0].axis_scale_y, 2.0);
  EXPECT_THROW(read_profiles(dir / "bad.json"), ConfigError);
  EXPECT_THROW(read_profiles(dir / "missing.json"), ConfigError);
  std::filesystem::remove_all(dir);
}
