#include <gtest/gtest.h>

#include <sstream>

#include "adaptraj/ingest.hpp"

using namespace adaptraj;

namespace {

RawTracks straight(const std::string& agent, int n, double t0 = 0.0, double dt = 0.4, double vx = 1.0) {
  RawTracks tracks;
  for (int i = 0; i < n; ++i) {
    const double t = t0 + dt * i;
    tracks[agent].push_back({t, {vx * (t - t0), 0.5}});
  }
  return tracks;
}

}  // namespace

TEST(Ingest, TwentySamplesGiveOneScene) {
  EXPECT_EQ(resample_and_normalize(straight("a", 20), parse_units("m")).scenes.size(), 1u);
  EXPECT_EQ(resample_and_normalize(straight("a", 21), parse_units("m")).scenes.size(), 2u);
  EXPECT_EQ(resample_and_normalize(straight("a", 19), parse_units("m")).scenes.size(), 0u);
}

TEST(Ingest, ResamplesOntoTheFrameGrid) {
  // 0.1 s samples: every fourth lands on the grid.
  const auto r = resample_and_normalize(straight("a", 77, 2.0, 0.1), parse_units("m"), 5);
  ASSERT_EQ(r.scenes.size(), 1u);
  const auto& s = r.scenes[0];
  EXPECT_TRUE(validate_scene(s).empty());
  EXPECT_EQ(s.domain_id, 5);
  EXPECT_DOUBLE_EQ(s.timestamp_origin, 2.0);
  for (std::size_t t = 0; t < kObsLen; ++t) EXPECT_NEAR(s.focal_observed[t].x, 0.4 * static_cast<double>(t), 1e-9);
  EXPECT_NEAR(s.focal_future.back().x, 0.4 * 19, 1e-9);
}

TEST(Ingest, LinearInterpolationBetweenSamples) {
  // 0.3 s samples with unit speed: grid points fall between samples.
  const auto r = resample_and_normalize(straight("a", 40, 0.0, 0.3), parse_units("m"));
  ASSERT_FALSE(r.scenes.empty());
  for (std::size_t t = 0; t < kObsLen; ++t) EXPECT_NEAR(r.scenes[0].focal_observed[t].x, 0.4 * static_cast<double>(t), 1e-9);
}

TEST(Ingest, PixelUnitsAreScaled) {
  const auto r = resample_and_normalize(straight("a", 20, 0.0, 0.4, 10.0), parse_units("px:0.05"));
  ASSERT_EQ(r.scenes.size(), 1u);
  EXPECT_NEAR(r.scenes[0].focal_observed[1].x, 4.0 * 0.05, 1e-12);
  EXPECT_NEAR(r.scenes[0].focal_observed[0].y, 0.5 * 0.05, 1e-12);
}

TEST(Ingest, NeighborsAreMaskedOutsideTheirLifetime) {
  auto tracks = straight("a", 20);
  tracks["b"] = {{1.2, {0, 1}}, {1.6, {0.4, 1}}, {2.0, {0.8, 1}}};
  tracks["c"] = {{6.0, {0, 1}}, {7.0, {0.4, 1}}};  // only after the observed window
  const auto r = resample_and_normalize(tracks, parse_units("m"));
  ASSERT_EQ(r.scenes.size(), 1u);
  const auto& s = r.scenes[0];
  ASSERT_EQ(s.neighbors.size(), 1u);
  EXPECT_EQ(s.neighbors[0].valid, (std::vector<bool>{false, false, false, true, true, true, false, false}));
  EXPECT_TRUE(validate_scene(s).empty());
}

TEST(Ingest, ErrorsAndSkips) {
  RawTracks bad;
  bad["a"] = {{0.0, {0, 0}}, {0.0, {1, 0}}};
  EXPECT_THROW(resample_and_normalize(bad, parse_units("m")), DataError);
  RawTracks single = straight("a", 20);
  single["lonely"] = {{0.0, {0, 0}}};
  EXPECT_EQ(resample_and_normalize(single, parse_units("m")).skipped_tracks, 1u);
  EXPECT_THROW(parse_units("ft"), ConfigError);
  EXPECT_THROW(parse_units("px:abc"), ConfigError);
  EXPECT_THROW(parse_units("px:-1"), ConfigError);
}

TEST(Ingest, ParsesRawText) {
  std::istringstream is("# t agent x y\n0.0,7,1.0,2.0\n0.4 7 1.5 2.0\n\n0.0 8 0 0\n");
  const auto t = read_raw_tracks(is);
  ASSERT_EQ(t.size(), 2u);
  EXPECT_EQ(t.at("7").size(), 2u);
  EXPECT_DOUBLE_EQ(t.at("7")[1].p.x, 1.5);
  std::istringstream broken("0.0 7 1.0\n");
  EXPECT_THROW(read_raw_tracks(broken), DataError);
}
