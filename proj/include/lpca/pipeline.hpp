#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "lpca/data.hpp"
#include "lpca/distance.hpp"
#include "lpca/local_pca.hpp"
#include "lpca/matching.hpp"

namespace lpca {

struct LpcaOptions {
  Index k = 0;
  DistanceKind distance = DistanceKind::pseudo_max();
  FactorCountRule rule = FactorCountRule::ratio_loglog();
  Threads threads{};
};

struct LpcaFit {
  IndexList match_rows;
  IndexList pca_rows;
  std::vector<NeighborSet> neighbors;
  std::vector<LocalFactorModel> models;
  Matrix fitted;  // |pca_rows| x n, row r estimates feature pca_rows[r]
};

/// K = round(c * n^(2/3)), required to lie in [2, n].
inline Index k_from_constant(double c, Index n) {
  if (!(c > 0.0)) throw ConfigError("K constant must be positive");
  const auto k = static_cast<Index>(std::llround(c * std::pow(static_cast<double>(n), 2.0 / 3.0)));
  if (k < 2 || k > n)
    throw ConfigError("K = round(c*n^(2/3)) = " + std::to_string(k) + " outside [2, n=" + std::to_string(n) + "]");
  return k;
}

inline void validate_rows(const IndexList& rows, Index p, const char* what) {
  if (rows.empty()) throw ConfigError(std::string(what) + " rows are empty");
  for (std::size_t k = 0; k < rows.size(); ++k) {
    if (rows[k] < 0 || rows[k] >= p) throw ConfigError(std::string(what) + " row index out of range");
    if (k > 0 && rows[k] <= rows[k - 1]) throw ConfigError(std::string(what) + " rows must be sorted and distinct");
  }
}

/// Checks that the split partitions [0, p).
inline void validate_split(const RowSplit& s, Index p) {
  validate_rows(s.dagger, p, "matching");
  validate_rows(s.ddagger, p, "PCA");
  if (s.three_way()) validate_rows(s.wr, p, "third");
  std::vector<int> seen(static_cast<std::size_t>(p), 0);
  for (const auto* set : {&s.dagger, &s.ddagger, &s.wr})
    for (Index l : *set) ++seen[static_cast<std::size_t>(l)];
  for (Index l = 0; l < p; ++l)
    if (seen[static_cast<std::size_t>(l)] != 1)
      throw ConfigError("split does not partition the rows (row " + std::to_string(l + 1) + ")");
}

/// Match units on `match_rows`, run local PCA on `pca_rows`, reconstruct.
inline LpcaFit run_lpca(const Matrix& x, const IndexList& match_rows, const IndexList& pca_rows, const LpcaOptions& opt) {
  validate_rows(match_rows, x.rows(), "matching");
  validate_rows(pca_rows, x.rows(), "PCA");
  LpcaFit fit;
  fit.match_rows = match_rows;
  fit.pca_rows = pca_rows;
  const Matrix dist = pairwise_distances(select_rows(x, match_rows), opt.distance, opt.threads);
  fit.neighbors = match_all(dist, opt.k, opt.threads);
  const Matrix pca_block = select_rows(x, pca_rows);
  fit.models = fit_all(pca_block, fit.neighbors, opt.rule, opt.threads);
  fit.fitted = reconstruct(fit.models, fit.neighbors);
  return fit;
}

inline LpcaFit run_lpca(const Matrix& x, const RowSplit& split, const LpcaOptions& opt) {
  return run_lpca(x, split.dagger, split.ddagger, opt);
}

}  // namespace lpca
