#include <cmath>
#include <numeric>

#include <gtest/gtest.h>

#include "lpca/simlab.hpp"
#include "lpca/synth.hpp"

namespace lpca {
namespace {

DataMatrix three_by_three() {
  Matrix y(3, 3);
  y << 1, 4, 7,
       2, 5, 8,
       3, 6, 9;
  return DataMatrix(y);
}

TEST(MaskTreated, Example) {
  const auto x = mask_treated(three_by_three(), {0, 2});
  Matrix expected(3, 3);
  expected << 1, 4, 7,
              2, 5, 8,
              0, 6, 9;
  EXPECT_EQ(x.values, expected);
  EXPECT_EQ(x.missing_count(), 1);
  EXPECT_FALSE(x.mask(2, 0));
}

TEST(MaskTreated, BoundaryAndIdempotence) {
  const auto once = mask_treated(three_by_three(), {1, 1});
  EXPECT_EQ(once.missing_count(), 2);
  EXPECT_EQ(mask_treated(once, {1, 1}), once);
  EXPECT_THROW(mask_treated(three_by_three(), {3, 1}), ConfigError);
  EXPECT_THROW(mask_treated(three_by_three(), {0, 3}), ConfigError);
  EXPECT_THROW(mask_treated(three_by_three(), {0, 0}), ConfigError);
}

TEST(GrowthToLevel, Examples) {
  Vector g(3);
  g << 2, -1, 3;
  Vector expected(3);
  expected << 102, 101, 104;
  EXPECT_EQ(growth_to_level(100.0, g), expected);
  EXPECT_EQ(growth_to_level(100.0, Vector::Zero(4)), Vector::Constant(4, 100.0));
  Vector tenth(1);
  tenth << 0.1;
  EXPECT_NEAR(growth_to_level(100.0, tenth, LevelMode::Multiplicative)(0), 110.0, 1e-12);
}

TEST(GrowthToLevel, DomainErrors) {
  Vector crash(2);
  crash << 0.1, -1.0;
  EXPECT_THROW(growth_to_level(100.0, crash, LevelMode::Multiplicative), DataError);
  EXPECT_NO_THROW(growth_to_level(100.0, crash, LevelMode::Additive));
  EXPECT_THROW(growth_to_level(std::nan(""), crash), DataError);
}

// One zero-filled cell perturbs a rank-one block; to first order the fitted
// value at that cell loses the fraction f_l^2/|f|^2 + a_i^2/|a_N|^2 of itself.
TEST(SynthEstimate, RankOneCompletionMatchesFirstOrderBias) {
  double previous = 1.0;
  for (Index n : {50, 100, 200, 400}) {
    const auto d = sim::generate_scalar_linear(n, n, 1);
    LpcaOptions opt;
    opt.k = n / 2;
    opt.rule = FactorCountRule::fixed(1);
    opt.distance = DistanceKind::euclidean();
    const auto split = leading_split(n, n / 2);
    const auto r = synth_estimate(d.x, {0, n - 1}, split, opt);
    const double truth = d.h(n - 1, 0);
    const double err = truth - r.counterfactual(0);

    const Vector f = d.h.col(0).tail(n / 2) / d.alpha(0);
    double alpha_sq = 0.0;
    for (Index j : r.fit.neighbors[0].indices) alpha_sq += d.alpha(j) * d.alpha(j);
    const double predicted = truth * (f(f.size() - 1) * f(f.size() - 1) / f.squaredNorm() +
                                      d.alpha(0) * d.alpha(0) / alpha_sq);
    EXPECT_NEAR(err, predicted, 0.25 * predicted) << "n=" << n;
    EXPECT_LT(std::abs(err) / truth, previous) << "n=" << n;
    previous = std::abs(err) / truth;
  }
}

TEST(SynthEstimate, EffectsAreObservedMinusCounterfactual) {
  const auto d = sim::generate(sim::SimModel::LaplaceKernel, 60, 60, 9);
  LpcaOptions opt;
  opt.k = 16;
  const auto r = synth_estimate(d.x, {5, 54}, leading_split(60, 30), opt);
  ASSERT_EQ(r.effects.size(), 6);
  EXPECT_EQ(r.periods.front(), 54);
  EXPECT_LT((r.effects - (r.observed - r.counterfactual)).cwiseAbs().maxCoeff(), 1e-12);
  EXPECT_NEAR(r.avg_effect, r.effects.mean(), 1e-12);
  for (Index t = 0; t < 6; ++t) EXPECT_EQ(r.observed(t), d.x.values(54 + t, 5));
}

TEST(SynthEstimate, LevelsFollowCounterfactualPath) {
  const auto d = sim::generate(sim::SimModel::LaplaceKernel, 40, 40, 2);
  LpcaOptions opt;
  opt.k = 16;
  auto r = synth_estimate(d.x, {0, 36}, leading_split(40, 20), opt);
  attach_levels(r, 50.0, LevelMode::Additive);
  ASSERT_TRUE(r.counterfactual_level.has_value());
  EXPECT_NEAR((*r.counterfactual_level)(3), 50.0 + r.counterfactual.sum(), 1e-12);
  EXPECT_NEAR((*r.observed_level)(3), 50.0 + r.observed.sum(), 1e-12);
}

TEST(SynthEstimate, RejectsPostPeriodInMatchingRows) {
  const auto d = sim::generate(sim::SimModel::LaplaceKernel, 30, 30, 1);
  LpcaOptions opt;
  opt.k = 10;
  RowSplit split{{0, 1, 2, 29}, {}, {}};
  for (Index l = 3; l < 29; ++l) split.ddagger.push_back(l);
  try {
    synth_estimate(d.x, {0, 27}, split, opt);
    FAIL();
  } catch (const ConfigError& e) {
    EXPECT_NE(std::string(e.what()).find("period 30"), std::string::npos);
  }
}

TEST(SynthEstimate, MissingnessGuard) {
  EXPECT_EQ(missing_cell_limit(50, 105), 5);
  auto d = sim::generate(sim::SimModel::LaplaceKernel, 30, 30, 1);
  LpcaOptions opt;
  opt.k = 10;
  opt.rule = FactorCountRule::fixed(2);
  const auto split = leading_split(30, 10);
  // Twenty post periods for the treated unit are expected and allowed.
  EXPECT_NO_THROW(synth_estimate(d.x, {0, 10}, split, opt));
  for (Index i = 1; i < 6; ++i) d.x.mask(12, i) = false;
  EXPECT_THROW(synth_estimate(mask_to_zero(d.x), {0, 10}, split, opt), ConfigError);

  auto treated_gap = sim::generate(sim::SimModel::LaplaceKernel, 30, 30, 1);
  treated_gap.x.mask(25, 0) = false;
  EXPECT_THROW(synth_estimate(treated_gap.x, {0, 10}, split, opt), DataError);
}

TEST(SynthEstimate, ZeroEffectIsCenteredNearZero) {
  std::vector<double> avg;
  for (std::uint64_t s = 0; s < 50; ++s) {
    const auto d = sim::generate(sim::SimModel::LaplaceKernel, 100, 100, 1000 + s);
    LpcaOptions opt;
    opt.k = k_from_constant(1.0, 100);
    avg.push_back(synth_estimate(d.x, {0, 90}, leading_split(100, 50), opt).avg_effect);
  }
  const double mean = std::accumulate(avg.begin(), avg.end(), 0.0) / 50.0;
  double var = 0.0;
  for (double a : avg) var += (a - mean) * (a - mean);
  const double se = std::sqrt(var / 49.0 / 50.0);
  EXPECT_LT(std::abs(mean), 2.0 * se);
}

TEST(SynthEstimate, UntreatedFitsStabilizeWithSize) {
  auto discrepancy = [](Index n, std::uint64_t seed) {
    const auto d = sim::generate(sim::SimModel::LaplaceKernel, n, n, seed);
    LpcaOptions opt;
    opt.k = k_from_constant(1.0, n);
    const auto split = leading_split(n, n / 2);
    const auto synth = synth_estimate(d.x, {0, n - 4}, split, opt);
    const auto plain = run_lpca(d.x.values, split, opt);
    return (synth.fit.fitted.rightCols(n - 1) - plain.fitted.rightCols(n - 1)).cwiseAbs().maxCoeff();
  };
  int decreased = 0;
  for (std::uint64_t s = 0; s < 20; ++s) decreased += discrepancy(400, 300 + s) < discrepancy(200, 300 + s);
  EXPECT_GT(decreased, 10);
}

}  // namespace
}  // namespace lpca
