#include <gtest/gtest.h>

#include "flof/flof.hpp"
#include "support.hpp"

using namespace flof;

namespace {

FlofParams small_params() {
  FlofParams p;
  p.gamma_max = 20.0;
  p.beta_image = beta_image(20.0);
  p.s_max = 6;
  return p;
}

}  // namespace

TEST(Flof, IdenticalInputsGiveZeroDeformation) {
  const auto [a, b] = flof::testing::small_circle_pair();
  const MatchResult r = run_flof(a.field, a.field, small_params());
  EXPECT_EQ(r.error_initial, 0.0);
  EXPECT_EQ(r.error_final, 0.0);
  EXPECT_LT(max_abs(r.deformation), 1e-12);
}

TEST(Flof, ReducesErrorAndLogsEveryStep) {
  const auto [a, b] = flof::testing::small_circle_pair();
  const MatchResult r = run_flof(a, b, small_params());
  EXPECT_GT(r.error_initial, 0.0);
  EXPECT_LE(r.error_final, 0.5 * r.error_initial);
  ASSERT_FALSE(r.level_trace.empty());
  // Accepted steps never increase the error; the last accepted value is the result.
  double last = r.error_initial;
  bool seen_level1 = false, seen_projection = false;
  for (const auto& e : r.level_trace) {
    if (e.accepted) EXPECT_LE(e.error_after, e.error_before);
    if (e.level == 1) seen_level1 = true;
    if (e.stage == "projection") {
      seen_projection = true;
      EXPECT_EQ(e.level, 0);
    }
    if (e.level == 0 && e.accepted) last = e.error_after;
  }
  EXPECT_TRUE(seen_level1);
  EXPECT_TRUE(seen_projection);
  EXPECT_DOUBLE_EQ(last, r.error_final);
  EXPECT_DOUBLE_EQ(r.error_final, error_metric(advect(a.field, r.deformation, 1.0), b.field));
}

TEST(Flof, KernelShrinksByThreeQuartersPerAcceptedStep) {
  const auto [a, b] = flof::testing::small_circle_pair();
  const FlofParams p = small_params();
  const MatchResult r = run_flof(a, b, p);
  for (std::size_t k = 1; k < r.level_trace.size(); ++k) {
    const auto& prev = r.level_trace[k - 1];
    const auto& cur = r.level_trace[k];
    if (cur.level != prev.level || cur.stage != prev.stage) {
      EXPECT_DOUBLE_EQ(cur.sigma, cur.stage == "flow" ? p.sigma_of : p.sigma_proj);
      continue;
    }
    EXPECT_TRUE(prev.accepted);
    EXPECT_DOUBLE_EQ(cur.sigma, 0.75 * prev.sigma);
  }
}

TEST(Flof, StagesCanBeDisabled) {
  const auto [a, b] = flof::testing::small_circle_pair();
  FlofStages flat{false, false, false};
  const MatchResult r = run_flof(a, b, small_params(), flat);
  ASSERT_EQ(r.level_trace.size(), 1u);
  EXPECT_EQ(r.level_trace[0].level, 0);
  EXPECT_EQ(r.level_trace[0].stage, "flow");
  EXPECT_LE(r.error_final, r.error_initial);
}

TEST(Flof, DeformationVanishesOnTheBoundary) {
  const auto [a, b] = flof::testing::small_circle_pair();
  const MatchResult r = run_flof(a, b, small_params());
  const Extents& ext = r.deformation.extents();
  double m = 0.0;
  for_each_cell(ext, [&](std::size_t i, const Coord& c) {
    if (ext.on_boundary(c))
      for (int k = 0; k < ext.rank(); ++k) m = std::max(m, std::abs(r.deformation[k][i]));
  });
  EXPECT_EQ(m, 0.0);
}

TEST(Flof, PairRunsBothDirections) {
  const auto [a, b] = flof::testing::small_circle_pair();
  const MatchPair pair = match_pair(a, b, small_params());
  EXPECT_LE(pair.forward.error_final, pair.forward.error_initial);
  EXPECT_LE(pair.backward.error_final, pair.backward.error_initial);
  EXPECT_EQ(pair.forward.error_initial, pair.backward.error_initial);
  // The backward field moves content the other way along axis 1.
  const Extents& ext = pair.forward.deformation.extents();
  double fwd = 0.0, bwd = 0.0;
  for (std::size_t i = 0; i < ext.size(); ++i) {
    fwd += pair.forward.deformation[1][i];
    bwd += pair.backward.deformation[1][i];
  }
  EXPECT_GT(fwd, 0.0);
  EXPECT_LT(bwd, 0.0);
}

TEST(Flof, DeterministicAcrossRunsAndThreadCounts) {
  const auto [a, b] = flof::testing::small_circle_pair();
  setenv("FLOF_THREADS", "1", 1);
  const MatchResult one = run_flof(a, b, small_params());
  setenv("FLOF_THREADS", "5", 1);
  const MatchResult five = run_flof(a, b, small_params());
  unsetenv("FLOF_THREADS");
  EXPECT_EQ(one.deformation, five.deformation);
  EXPECT_EQ(one.error_final, five.error_final);
}

TEST(Flof, MismatchedInputsThrow) {
  const auto [a, b] = flof::testing::small_circle_pair();
  EXPECT_THROW(run_flof(a.field, ScalarField(Extents{4, 4, 4}, 1.0)), Error);
  FlofParams bad = small_params();
  bad.l_max = 0;
  EXPECT_THROW(run_flof(a, b, bad), Error);
}
