#include <random>

#include <gtest/gtest.h>

#include "lpca/covadjust.hpp"
#include "lpca/simlab.hpp"
#include "oracles.hpp"

namespace lpca {
namespace {

Matrix gaussian(Index rows, Index cols, std::uint64_t seed) {
  std::mt19937_64 gen(seed);
  std::normal_distribution<double> z(0.0, 1.0);
  Matrix m(rows, cols);
  for (auto& v : m.reshaped()) v = z(gen);
  return m;
}

// Stacks the residual matrices into the (n p) x q least-squares design.
Vector stacked_oracle(const std::vector<Matrix>& e, const Matrix& u) {
  Matrix design(u.size(), static_cast<Index>(e.size()));
  for (std::size_t a = 0; a < e.size(); ++a) design.col(static_cast<Index>(a)) = e[a].reshaped();
  return testing::qr_least_squares(design, u.reshaped());
}

RowSplit thirds(Index p) {
  const double f[] = {1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0};
  return row_split(p, f);
}

TEST(EstimateTheta, ClosedFormRatio) {
  const auto est = estimate_theta({Matrix::Ones(4, 3)}, Matrix::Constant(4, 3, 0.5));
  EXPECT_NEAR(est.theta(0), 0.5, 1e-15);
  EXPECT_NEAR(est.gram(0, 0), 12.0, 1e-15);
}

TEST(EstimateTheta, ConsistentSystemIsSolvedExactly) {
  const std::vector<Matrix> e{gaussian(10, 8, 1), gaussian(10, 8, 2), gaussian(10, 8, 3)};
  Vector theta(3);
  theta << 1.5, -0.25, 2.0;
  const Matrix u = theta(0) * e[0] + theta(1) * e[1] + theta(2) * e[2];
  EXPECT_LT((estimate_theta(e, u).theta - theta).cwiseAbs().maxCoeff(), 1e-10);
}

TEST(EstimateTheta, MatchesStackedLeastSquares) {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const Index q = 1 + static_cast<Index>(seed % 4);
    std::vector<Matrix> e;
    for (Index a = 0; a < q; ++a) e.push_back(gaussian(12, 9, seed * 10 + static_cast<std::uint64_t>(a)));
    const Matrix u = gaussian(12, 9, seed + 1000);
    EXPECT_LT((estimate_theta(e, u).theta - stacked_oracle(e, u)).cwiseAbs().maxCoeff(), 1e-10);
  }
}

TEST(EstimateTheta, DegenerateInputs) {
  try {
    estimate_theta({Matrix::Zero(3, 3)}, Matrix::Ones(3, 3));
    FAIL();
  } catch (const NumericalError& e) {
    EXPECT_NE(std::string(e.what()).find("too collinear"), std::string::npos);
  }
  const Matrix e = gaussian(5, 5, 1);
  EXPECT_THROW(estimate_theta({e, 2.0 * e}, gaussian(5, 5, 2)), NumericalError);
  try {
    estimate_theta({}, Matrix::Ones(3, 3));
    FAIL();
  } catch (const ConfigError& err) {
    EXPECT_NE(std::string(err.what()).find("use plain LPCA"), std::string::npos);
  }
  EXPECT_THROW(estimate_theta({Matrix::Ones(2, 3)}, Matrix::Ones(3, 3)), ContractError);
}

TEST(Residualize, RankOneStructureLeavesNothing) {
  const Matrix m = gaussian(30, 1, 1).cwiseAbs() * gaussian(1, 40, 2);
  LpcaOptions opt;
  opt.k = 10;
  opt.rule = FactorCountRule::fixed(1);
  const auto split = leading_split(30, 12);
  const Matrix r = residualize(m, split.dagger, split.ddagger, opt);
  EXPECT_EQ(r.rows(), 18);
  EXPECT_EQ(r.cols(), 40);
  EXPECT_LT(r.cwiseAbs().maxCoeff(), 1e-8);
}

TEST(CovAdjust, RejectsBadInputs) {
  const DataMatrix x(gaussian(12, 10, 1));
  LpcaOptions opt;
  opt.k = 4;
  opt.rule = FactorCountRule::fixed(1);
  EXPECT_THROW(covadjusted_lpca(x, CovariatePanel{}, thirds(12), opt), ConfigError);
  const CovariatePanel w{{gaussian(12, 10, 2)}};
  EXPECT_THROW(covadjusted_lpca(x, w, leading_split(12, 6), opt), ConfigError);
  const CovariatePanel wrong{{gaussian(11, 10, 2)}};
  EXPECT_THROW(covadjusted_lpca(x, wrong, thirds(12), opt), DataError);
}

TEST(CovAdjust, ReportsFailingStep) {
  const DataMatrix x(gaussian(12, 10, 1));
  const CovariatePanel w{{Matrix::Zero(12, 10)}};
  LpcaOptions opt;
  opt.k = 4;
  opt.rule = FactorCountRule::fixed(1);
  try {
    covadjusted_lpca(x, w, thirds(12), opt);
    FAIL();
  } catch (const NumericalError& e) {
    EXPECT_NE(std::string(e.what()).find("step (d)"), std::string::npos);
  }
}

TEST(CovAdjust, PureRegressorOutcomeRecoversSlope) {
  // x = theta * W with no factor component: matching and PCA are both
  // equivariant under scaling, so the outcome residuals are theta times the
  // regressor residuals.
  const Matrix w = gaussian(45, 30, 7);
  for (double theta : {0.7, -1.3}) {
    const DataMatrix x(theta * w);
    LpcaOptions opt;
    opt.k = 8;
    opt.rule = FactorCountRule::fixed(1);
    const auto res = covadjusted_lpca(x, CovariatePanel{{w}}, thirds(45), opt);
    EXPECT_NEAR(res.theta.theta(0), theta, 1e-6);
    EXPECT_EQ(res.fitted.rows(), 15);
  }
}

TEST(CovAdjust, SlopeEqualsLeastSquaresOnSameResiduals) {
  Vector theta(2);
  theta << 1.0, -0.5;
  const auto data = sim::generate_covariate_panel(60, 60, theta, 3);
  LpcaOptions opt;
  opt.k = k_from_constant(1.0, 60);
  opt.rule = FactorCountRule::fixed(2);
  const auto split = thirds(60);
  const auto res = covadjusted_lpca(data.x, data.w, split, opt);
  std::vector<Matrix> e;
  for (const auto& m : data.w.w) e.push_back(residualize(m, split.dagger, split.ddagger, opt));
  const Matrix u = residualize(data.x.values, split.dagger, split.ddagger, opt);
  EXPECT_LT((res.theta.theta - stacked_oracle(e, u)).cwiseAbs().maxCoeff(), 1e-10);
}

TEST(CovAdjust, PerRegressorOverrides) {
  Vector theta(1);
  theta << 1.0;
  const auto data = sim::generate_covariate_panel(45, 45, theta, 4);
  LpcaOptions opt;
  opt.k = 12;
  opt.rule = FactorCountRule::fixed(2);
  LpcaOptions other = opt;
  other.k = 5;
  other.distance = DistanceKind::euclidean();
  const auto split = thirds(45);
  const auto res = covadjusted_lpca(data.x, data.w, split, opt, {other});
  const std::vector<Matrix> e{residualize(data.w.w[0], split.dagger, split.ddagger, other)};
  const Matrix u = residualize(data.x.values, split.dagger, split.ddagger, opt);
  EXPECT_NEAR(res.theta.theta(0), stacked_oracle(e, u)(0), 1e-10);
}

TEST(CovAdjust, ZeroSlopeAgreesWithPlainLpca) {
  const Vector theta = Vector::Zero(2);
  for (std::uint64_t seed = 50; seed < 53; ++seed) {
    const auto data = sim::generate_covariate_panel(150, 150, theta, seed);
    const auto split = thirds(150);
    LpcaOptions opt;
    opt.k = k_from_constant(1.0, 150);
    const auto res = covadjusted_lpca(data.x, data.w, split, opt);
    const auto plain = run_lpca(data.x.values, split.ddagger, split.wr, opt);
    EXPECT_LT(res.theta.theta.norm(), 0.05);
    EXPECT_LT((res.fitted - plain.fitted).cwiseAbs().mean(), 0.05);
  }
}

}  // namespace
}  // namespace lpca
