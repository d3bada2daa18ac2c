#pragma once

// Global PCA comparator. The factor count comes from the eigenvalue-ratio
// statistic on the doubly demeaned panel; the fit itself uses the raw panel.

#include <span>
#include <string>

#include "lpca/data.hpp"
#include "lpca/local_pca.hpp"

namespace lpca {

struct GlobalFactorModel {
  Index r = 0;
  Matrix factors;   // p x r, factors' factors / p = I
  Matrix loadings;  // n x r
  Matrix fitted;    // p x n
  Vector selection_spectrum;  // eigenvalues of the demeaned Gram, descending
};

/// argmax over k in [1, kmax] of eigvals[k] / eigvals[k+1] (1-based); the
/// smallest k wins ties.
inline Index eigenvalue_ratio_select(std::span<const double> eigvals, Index kmax) {
  if (kmax < 1) throw ConfigError("kmax must be at least 1");
  if (static_cast<Index>(eigvals.size()) < kmax + 1)
    throw ConfigError("eigenvalue ratio test needs kmax+1=" + std::to_string(kmax + 1) + " eigenvalues, got " +
                      std::to_string(eigvals.size()));
  for (Index k = 0; k <= kmax; ++k)
    detail::require(eigvals[static_cast<std::size_t>(k)] > 0.0, "eigenvalue ratio test needs positive eigenvalues");
  Index best = 1;
  double best_ratio = -1.0;
  for (Index k = 1; k <= kmax; ++k) {
    const double ratio = eigvals[static_cast<std::size_t>(k - 1)] / eigvals[static_cast<std::size_t>(k)];
    if (ratio > best_ratio) {
      best_ratio = ratio;
      best = k;
    }
  }
  return best;
}

inline GlobalFactorModel gpca_fit(const DataMatrix& x, Index kmax = 8) {
  const Matrix demeaned = double_demean(x);
  const Index m = std::min(x.p(), x.n());
  if (kmax + 1 > m) throw ConfigError("kmax+1 exceeds min(p, n)");

  GlobalFactorModel out;
  out.selection_spectrum = local_spectrum(demeaned);
  // Numerically null eigenvalues are floored at 1e-14 times the top one.
  const double floor = std::max(out.selection_spectrum(0), 1e-300) * 1e-14;
  std::vector<double> ev(static_cast<std::size_t>(kmax + 1));
  for (Index k = 0; k <= kmax; ++k) ev[static_cast<std::size_t>(k)] = std::max(out.selection_spectrum(k), floor);
  out.r = eigenvalue_ratio_select(ev, kmax);

  const auto fit = local_pca(x.values, out.r);
  out.factors = fit.factors;
  out.loadings = fit.loadings;
  out.fitted = fit.factors * fit.loadings.transpose();
  return out;
}

}  // namespace lpca
