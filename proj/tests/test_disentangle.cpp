#include <gtest/gtest.h>

#include <random>

#include "adaptraj/model.hpp"
#include "test_util.hpp"

using namespace adaptraj;

namespace {

HyperParams small_hp(int k = 3) {
  HyperParams hp;
  hp.d_f = 6;
  hp.embed_dim = 4;
  hp.noise_dim = 2;
  hp.n_domains = k;
  hp.seed = 5;
  return hp;
}

std::size_t count_prefix(const AdapTrajModel<double>& m, const std::string& prefix) {
  std::size_t n = 0;
  m.params().for_each([&](const Parameter<double>& p) { n += p.name.rfind(prefix, 0) == 0 ? 1 : 0; });
  return n;
}

}  // namespace

TEST(InvariantExtractorTest, OneSharedParameterSetForAnyDomainCount) {
  for (int k : {1, 3, 5}) {
    AdapTrajModel<double> m(small_hp(k), Method::kAdapTraj);
    EXPECT_EQ(count_prefix(m, "invariant/"), 12u);
    EXPECT_EQ(count_prefix(m, "expert_"), 8u * static_cast<std::size_t>(k));
  }
}

TEST(InvariantExtractorTest, FeaturesIgnoreTheDomainLabel) {
  AdapTrajModel<double> m(small_hp(), Method::kAdapTraj);
  std::mt19937_64 rng(1);
  const auto scenes = testutil::random_scenes(rng, 4);
  const auto b = make_batch<double>(testutil::pointers(scenes));
  Tape<double> tape;
  const std::vector<int> l0(4, 0), l2(4, 2);
  const auto f0 = m.forward(tape, b, &l0, m.zero_noise(4));
  const auto f2 = m.forward(tape, b, &l2, m.zero_noise(4));
  EXPECT_EQ(f0.invariant->fused.value(), f2.invariant->fused.value());
  EXPECT_NE(f0.specific->fused.value(), f2.specific->fused.value());
}

TEST(SpecificExtractorTest, GradientsReachOnlyTheSelectedExpert) {
  AdapTrajModel<double> m(small_hp(), Method::kAdapTraj);
  std::mt19937_64 rng(2);
  const auto scenes = testutil::random_scenes(rng, 5);
  const auto b = make_batch<double>(testutil::pointers(scenes));
  for (int k = 0; k < 3; ++k) {
    m.params().zero_grad();
    Tape<double> tape;
    const std::vector<int> labels(5, k);
    const auto fwd = m.forward(tape, b, &labels, m.zero_noise(5));
    tape.backward(m.losses(tape, fwd, b, &labels, 0.5).total);
    m.params().for_each([&](const Parameter<double>& p) {
      if (p.name.rfind("expert_", 0) != 0) return;
      const bool mine = p.name.rfind("expert_" + std::to_string(k) + "/", 0) == 0;
      EXPECT_EQ(p.touched, mine) << p.name;
      if (!mine) EXPECT_EQ(p.grad.squaredNorm(), 0.0) << p.name;
    });
    EXPECT_FALSE(m.params().at("aggregator/ind/l1/w").touched);
  }
}

TEST(SpecificExtractorTest, MixedLabelsRouteRowByRow) {
  AdapTrajModel<double> m(small_hp(), Method::kAdapTraj);
  std::mt19937_64 rng(3);
  const auto scenes = testutil::random_scenes(rng, 6);
  const auto b = make_batch<double>(testutil::pointers(scenes));
  const std::vector<int> mixed = {2, 0, 1, 0, 2, 2};
  Tape<double> tape;
  const auto enc = m.backbone().encode(tape, b);
  const auto& spec = *m.specific_extractor();
  const auto routed = spec.extract(tape, enc.indiv, enc.interaction, mixed).fused.value();
  for (int k = 0; k < 3; ++k) {
    const auto uniform = spec.extract(tape, enc.indiv, enc.interaction, std::vector<int>(6, k)).fused.value();
    for (int r = 0; r < 6; ++r) {
      if (mixed[static_cast<std::size_t>(r)] == k) EXPECT_LT((routed.row(r) - uniform.row(r)).cwiseAbs().maxCoeff(), 1e-12);
    }
  }
  EXPECT_THROW(spec.extract(tape, enc.indiv, enc.interaction, std::vector<int>(6, 3)), std::out_of_range);
  EXPECT_THROW(spec.extract(tape, enc.indiv, enc.interaction, std::vector<int>(2, 0)), std::invalid_argument);
}

TEST(AggregatorTest, InputIsTheSumOfExpertOutputs) {
  AdapTrajModel<double> m(small_hp(2), Method::kAdapTraj);
  Mat<double> u(1, 6), v(1, 6);
  u << 1, -2, 0.5, 3, 0, 4;
  v << 0.25, 1, -1, 2, 7, -3;
  for (const auto& [k, val] : {std::pair{0, u}, std::pair{1, v}}) {
    for (const char* stream : {"ind", "nei"}) {
      const std::string p = "expert_" + std::to_string(k) + "/" + stream + "/l2/";
      m.params().at(p + "w").value.setZero();
      m.params().at(p + "b").value = val;
    }
  }
  std::mt19937_64 rng(4);
  const auto scenes = testutil::random_scenes(rng, 3);
  const auto b = make_batch<double>(testutil::pointers(scenes));
  Tape<double> tape;
  const auto enc = m.backbone().encode(tape, b);
  const auto [si, sn] = m.specific_extractor()->expert_sums(tape, enc.indiv, enc.interaction);
  for (int r = 0; r < 3; ++r) {
    EXPECT_EQ(si.value().row(r), u + v);
    EXPECT_EQ(sn.value().row(r), u + v);
  }
}

TEST(AggregatorTest, ExpertOrderInvariance) {
  AdapTrajModel<double> m(small_hp(3), Method::kAdapTraj);
  std::mt19937_64 rng(5);
  const auto scenes = testutil::random_scenes(rng, 4);
  const auto b = make_batch<double>(testutil::pointers(scenes));
  const auto before = m.predict(b, m.zero_noise(4));
  // Rotate the experts: 0 ← 1 ← 2 ← 0.
  auto snap = m.params().snapshot();
  m.params().for_each([&](Parameter<double>& p) {
    if (p.name.rfind("expert_", 0) != 0) return;
    const int k = p.name[7] - '0';
    std::string src = p.name;
    src[7] = static_cast<char>('0' + (k + 1) % 3);
    p.value = snap.at(src);
  });
  const auto after = m.predict(b, m.zero_noise(4));
  for (std::size_t i = 0; i < 4; ++i) {
    for (std::size_t t = 0; t < kPredLen; ++t) {
      EXPECT_NEAR(after[i][t].x, before[i][t].x, 1e-12);
      EXPECT_NEAR(after[i][t].y, before[i][t].y, 1e-12);
    }
  }
}

TEST(AggregatorTest, MaskedRouteNeverSelectsByLabel) {
  AdapTrajModel<double> m(small_hp(), Method::kAdapTraj);
  std::mt19937_64 rng(6);
  const auto scenes = testutil::random_scenes(rng, 3);
  const auto b = make_batch<double>(testutil::pointers(scenes));
  Tape<double> tape;
  m.forward(tape, b, nullptr, m.zero_noise(3));
  EXPECT_EQ(m.labeled_routes(), 0u);
  const std::vector<int> labels(3, 1);
  m.forward(tape, b, &labels, m.zero_noise(3));
  EXPECT_EQ(m.labeled_routes(), 1u);
}

TEST(ReconstructionAndClassifier, Shapes) {
  AdapTrajModel<double> m(small_hp(4), Method::kAdapTraj);
  std::mt19937_64 rng(7);
  const auto scenes = testutil::random_scenes(rng, 5);
  const auto b = make_batch<double>(testutil::pointers(scenes));
  Tape<double> tape;
  const std::vector<int> labels = {0, 1, 2, 3, 0};
  const auto fwd = m.forward(tape, b, &labels, m.zero_noise(5));
  const auto logits = m.classify(tape, fwd);
  EXPECT_EQ(logits.rows(), 5);
  EXPECT_EQ(logits.cols(), 4);
  EXPECT_EQ(m.params().at("recon/l2/w").value.cols(), 16);
}
