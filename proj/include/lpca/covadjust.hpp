#pragma once

// Covariate-adjusted local PCA for x_i = W_i theta + eta(alpha_i) + u_i.
//
// With a three-way row split (dagger, ddagger, wr):
//   (b) residualize each regressor: match on dagger, local PCA on ddagger;
//   (c) residualize the outcome the same way;
//   (d) theta = G^{-1} sum_{i,t} e_it u_it with G = sum_{i,t} e_it e_it',
//       e_it in R^q the regressor residuals at unit i, feature t;
//   (e) rerun local PCA on x - W theta: match on ddagger, PCA on wr.
// The Gram in (d) sums over features as well as units.

#include <optional>
#include <string>
#include <vector>

#include "lpca/data.hpp"
#include "lpca/pipeline.hpp"

namespace lpca {

struct CovariatePanel {
  std::vector<Matrix> w;  // q matrices, each p x n

  Index q() const { return static_cast<Index>(w.size()); }
};

struct ThetaEstimate {
  Vector theta;
  Matrix gram;
};

struct CovAdjustResult {
  ThetaEstimate theta;
  std::vector<NeighborSet> neighbors;
  std::vector<LocalFactorModel> models;
  Matrix fitted;  // |wr| x n fitted means of x - W theta
};

/// Observed minus reconstructed values of `m` on the PCA rows.
inline Matrix residualize(const Matrix& m, const IndexList& match_rows, const IndexList& pca_rows, const LpcaOptions& opt) {
  const auto fit = run_lpca(m, match_rows, pca_rows, opt);
  return select_rows(m, pca_rows) - fit.fitted;
}

inline constexpr double kMaxThetaCondition = 1e12;

inline ThetaEstimate estimate_theta(const std::vector<Matrix>& e_hats, const Matrix& u_hat) {
  const auto q = static_cast<Index>(e_hats.size());
  if (q == 0) throw ConfigError("no covariates: use plain LPCA");
  for (const auto& e : e_hats)
    detail::require(e.rows() == u_hat.rows() && e.cols() == u_hat.cols(), "estimate_theta: residual shapes differ");

  ThetaEstimate out;
  out.gram.resize(q, q);
  Vector rhs(q);
  for (Index a = 0; a < q; ++a) {
    rhs(a) = e_hats[a].cwiseProduct(u_hat).sum();
    for (Index b = 0; b <= a; ++b) out.gram(a, b) = out.gram(b, a) = e_hats[a].cwiseProduct(e_hats[b]).sum();
  }
  Eigen::SelfAdjointEigenSolver<Matrix> es(out.gram, Eigen::EigenvaluesOnly);
  const double lo = es.eigenvalues()(0);
  const double hi = es.eigenvalues()(q - 1);
  if (!(lo > 0.0) || hi / lo > kMaxThetaCondition)
    throw NumericalError("covariates too collinear with factor structure (Gram condition number exceeds 1e12)");
  out.theta = out.gram.ldlt().solve(rhs);
  return out;
}

namespace detail {
template <class Fn>
auto at_step(const std::string& step, Fn&& fn) -> decltype(fn()) {
  try {
    return fn();
  } catch (const Error& e) {
    throw_error(e.kind(), "covariate adjustment " + step + ": " + e.what());
  }
}
}  // namespace detail

/// `regressor_opt`, when given, overrides K / distance / rule per regressor.
inline CovAdjustResult covadjusted_lpca(const DataMatrix& x, const CovariatePanel& w, const RowSplit& split,
                                        const LpcaOptions& opt,
                                        const std::vector<std::optional<LpcaOptions>>& regressor_opt = {}) {
  if (w.q() == 0) throw ConfigError("no covariates: use plain LPCA");
  if (!split.three_way()) throw ConfigError("covariate adjustment needs a three-way row split");
  validate_split(split, x.p());
  for (const auto& m : w.w)
    if (m.rows() != x.p() || m.cols() != x.n()) throw DataError("covariate matrices must match the outcome's shape");

  std::vector<Matrix> e_hats;
  for (Index l = 0; l < w.q(); ++l) {
    const auto& ropt = static_cast<std::size_t>(l) < regressor_opt.size() && regressor_opt[l] ? *regressor_opt[l] : opt;
    e_hats.push_back(detail::at_step("step (b), regressor " + std::to_string(l + 1),
                                     [&] { return residualize(w.w[l], split.dagger, split.ddagger, ropt); }));
  }
  const Matrix u_hat = detail::at_step("step (c)", [&] { return residualize(x.values, split.dagger, split.ddagger, opt); });

  CovAdjustResult out;
  out.theta = detail::at_step("step (d)", [&] { return estimate_theta(e_hats, u_hat); });

  Matrix adjusted = x.values;
  for (Index l = 0; l < w.q(); ++l) adjusted -= out.theta.theta(l) * w.w[l];
  auto fit = detail::at_step("step (e)", [&] { return run_lpca(adjusted, split.ddagger, split.wr, opt); });
  out.neighbors = std::move(fit.neighbors);
  out.models = std::move(fit.models);
  out.fitted = std::move(fit.fitted);
  return out;
}

}  // namespace lpca
