#pragma once

// Principal components of each unit's neighborhood.
//
// For a local block X (p rows, K matched columns) the fit solves
//   min tr[(X - F L')(X - F L')']  s.t.  F'F / p = I,  L'L / K diagonal,
// whose solution is F = sqrt(p) * (top eigenvectors of X X' / (pK)) and
// L = X' F / p. The eigenproblem is solved on whichever Gram matrix is
// smaller; the K x K route recovers the factors through X.

#include <cmath>
#include <limits>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Eigenvalues>

#include "lpca/data.hpp"
#include "lpca/matching.hpp"
#include "lpca/parallel.hpp"

namespace lpca {

struct LocalFactorModel {
  Index unit = 0;
  Matrix factors;    // p x d, factors' factors / p = I
  Matrix loadings;   // K x d, loadings = X' factors / p
  Vector eigenvalues;  // top d eigenvalues of X X' / (pK), descending
  Vector spectrum;     // all min(p, K) eigenvalues, descending
  Index d = 0;
  Index self_position = -1;

  /// F L', the fitted local block.
  Matrix fitted() const { return factors * loadings.transpose(); }
};

struct FactorCountRule {
  enum class Kind { Fixed, Ratio };
  Kind kind = Kind::Ratio;
  Index d = 1;          // Fixed
  Index d_max = 2;      // Ratio
  bool loglog = true;   // Ratio: threshold ln(ln K) when set, else `threshold`
  double threshold = 0.0;

  static FactorCountRule fixed(Index d) {
    if (d < 1) throw ConfigError("fixed factor count must be at least 1");
    return {Kind::Fixed, d, d, false, 0.0};
  }
  static FactorCountRule ratio_loglog(Index d_max = 2) {
    if (d_max < 1) throw ConfigError("d_max must be at least 1");
    return {Kind::Ratio, 1, d_max, true, 0.0};
  }
  static FactorCountRule ratio(Index d_max, double threshold) {
    if (d_max < 1) throw ConfigError("d_max must be at least 1");
    if (!(threshold > 0.0) || !std::isfinite(threshold)) throw ConfigError("ratio threshold must be positive");
    return {Kind::Ratio, 1, d_max, false, threshold};
  }
};

inline std::string to_string(const FactorCountRule& r) {
  if (r.kind == FactorCountRule::Kind::Fixed) return "fixed:" + std::to_string(r.d);
  return "ratio:" + std::to_string(r.d_max) + ":" + (r.loglog ? std::string("loglogK") : detail::format_double(r.threshold, 17));
}

/// "fixed:<d>", "ratio:<d_max>:loglogK" or "ratio:<d_max>:<threshold>".
inline FactorCountRule parse_factor_rule(const std::string& spec) {
  auto fail = [&]() -> FactorCountRule { throw ConfigError("invalid factor-count rule '" + spec + "'"); };
  try {
    if (spec.rfind("fixed:", 0) == 0) return FactorCountRule::fixed(std::stol(spec.substr(6)));
    if (spec.rfind("ratio:", 0) == 0) {
      const auto rest = spec.substr(6);
      const auto colon = rest.find(':');
      if (colon == std::string::npos) return fail();
      const Index d_max = std::stol(rest.substr(0, colon));
      const auto thr = rest.substr(colon + 1);
      if (thr == "loglogK") return FactorCountRule::ratio_loglog(d_max);
      return FactorCountRule::ratio(d_max, std::stod(thr));
    }
  } catch (const std::logic_error&) {
    return fail();
  }
  return fail();
}

/// Number of local factors from the leading singular values of the local
/// block. The ratio rule returns the largest j <= d_max with
/// s_j / s_{j+1} >= threshold (a zero denominator counts as +inf), or 1.
/// With d_max = 2 and the ln(ln K) threshold this is: 2 if s_2/s_3 >= ln ln K,
/// else 1.
inline Index select_d(std::span<const double> singular_values, Index k, const FactorCountRule& rule) {
  if (rule.kind == FactorCountRule::Kind::Fixed) return rule.d;
  if (static_cast<Index>(singular_values.size()) < rule.d_max + 1)
    throw ContractError("select_d: need " + std::to_string(rule.d_max + 1) + " singular values, got " +
                        std::to_string(singular_values.size()));
  double tau = rule.threshold;
  if (rule.loglog) {
    if (k < 16) throw ConfigError("ln(ln K) threshold requires K >= 16 (K=" + std::to_string(k) + ")");
    tau = std::log(std::log(static_cast<double>(k)));
  }
  for (Index j = rule.d_max; j >= 1; --j) {
    const double num = singular_values[static_cast<std::size_t>(j - 1)];
    const double den = singular_values[static_cast<std::size_t>(j)];
    const double ratio = den == 0.0 ? std::numeric_limits<double>::infinity() : num / den;
    if (ratio >= tau) return j;
  }
  return 1;
}

namespace detail {

struct GramEigen {
  Vector values;   // descending, clamped at 0
  Matrix vectors;  // matching columns
  bool row_side = true;  // eigenvectors live in feature space
};

inline GramEigen gram_eigen(const Matrix& x, bool row_side, Index unit) {
  const auto p = static_cast<double>(x.rows());
  const auto k = static_cast<double>(x.cols());
  Matrix gram;
  if (row_side)
    gram.noalias() = x * x.transpose();
  else
    gram.noalias() = x.transpose() * x;
  gram /= p * k;
  Eigen::SelfAdjointEigenSolver<Matrix> es(gram);
  if (es.info() != Eigen::Success)
    throw NumericalError("eigensolver failed to converge for unit " + std::to_string(unit + 1));
  GramEigen out;
  out.row_side = row_side;
  out.values = es.eigenvalues().reverse().cwiseMax(0.0);
  out.vectors = es.eigenvectors().rowwise().reverse();
  return out;
}

inline void apply_sign_convention(Matrix& factors) {
  for (Index c = 0; c < factors.cols(); ++c) {
    Index best = 0;
    for (Index r = 1; r < factors.rows(); ++r)
      if (std::abs(factors(r, c)) > std::abs(factors(best, c))) best = r;
    if (factors(best, c) < 0.0) factors.col(c) *= -1.0;
  }
}

/// Orthonormalizes the columns in place (modified Gram-Schmidt).
inline void orthonormalize(Matrix& u) {
  for (Index c = 0; c < u.cols(); ++c) {
    for (Index prev = 0; prev < c; ++prev) u.col(c) -= u.col(prev).dot(u.col(c)) * u.col(prev);
    u.col(c).normalize();
  }
}

}  // namespace detail

/// Local PCA on one block with its full Gram spectrum already computed.
inline LocalFactorModel local_pca_from(const Matrix& x, const detail::GramEigen& eig, Index d, Index unit = 0) {
  const Index p = x.rows();
  const Index m = std::min(p, x.cols());
  if (d < 1 || d > m)
    throw ConfigError("factor count d=" + std::to_string(d) + " outside [1, min(p, K)=" + std::to_string(m) + "]");

  Matrix u;
  if (eig.row_side) {
    u = eig.vectors.leftCols(d);
  } else {
    const double top = eig.values(0);
    if (!(eig.values(d - 1) > 1e-10 * top)) {
      // Too close to rank deficiency to recover the factors through X.
      return local_pca_from(x, detail::gram_eigen(x, true, unit), d, unit);
    }
    const double scale = static_cast<double>(p) * static_cast<double>(x.cols());
    u = x * eig.vectors.leftCols(d);
    for (Index c = 0; c < d; ++c) u.col(c) /= std::sqrt(scale * eig.values(c));
    detail::orthonormalize(u);
  }

  LocalFactorModel model;
  model.unit = unit;
  model.d = d;
  model.factors = std::sqrt(static_cast<double>(p)) * u;
  detail::apply_sign_convention(model.factors);
  model.loadings.noalias() = x.transpose() * model.factors;
  model.loadings /= static_cast<double>(p);
  model.spectrum = eig.values.head(m);
  model.eigenvalues = eig.values.head(d);
  return model;
}

/// Eigenvalues of X X' / (pK), descending (length min(p, K)).
inline Vector local_spectrum(const Matrix& x, Index unit = 0) {
  detail::require(x.size() > 0, "local block is empty");
  const auto eig = detail::gram_eigen(x, x.rows() <= x.cols(), unit);
  return eig.values.head(std::min(x.rows(), x.cols()));
}

inline LocalFactorModel local_pca(const Matrix& x, Index d, Index unit = 0) {
  detail::require(x.size() > 0, "local block is empty");
  if (!x.allFinite()) throw DataError("local block for unit " + std::to_string(unit + 1) + " has non-finite entries");
  const Index m = std::min(x.rows(), x.cols());
  if (d < 1 || d > m)
    throw ConfigError("factor count d=" + std::to_string(d) + " outside [1, min(p, K)=" + std::to_string(m) + "]");
  return local_pca_from(x, detail::gram_eigen(x, x.rows() <= x.cols(), unit), d, unit);
}

/// Singular values of the local block from the Gram eigenvalues.
inline std::vector<double> singular_values_from_spectrum(const Vector& spectrum, Index p, Index k) {
  std::vector<double> s(static_cast<std::size_t>(spectrum.size()));
  const double scale = static_cast<double>(p) * static_cast<double>(k);
  for (Index j = 0; j < spectrum.size(); ++j) s[static_cast<std::size_t>(j)] = std::sqrt(scale * spectrum(j));
  return s;
}

/// Local block of unit i: columns of `x` in neighbor order.
inline Matrix local_block(const Matrix& x, const NeighborSet& nb) { return x(Eigen::all, nb.indices); }

inline LocalFactorModel fit_unit(const Matrix& x, const NeighborSet& nb, const FactorCountRule& rule) {
  for (Index j : nb.indices)
    detail::require(j >= 0 && j < x.cols(), "neighbor index outside the PCA block");
  const Index self = nb.self_position();
  if (self < 0) throw ContractError("internal: unit " + std::to_string(nb.unit + 1) + " missing from its neighbor set");
  const Matrix block = local_block(x, nb);
  if (!block.allFinite()) throw DataError("local block for unit " + std::to_string(nb.unit + 1) + " has non-finite entries");
  const auto eig = detail::gram_eigen(block, block.rows() <= block.cols(), nb.unit);
  const Index m = std::min(block.rows(), block.cols());
  const auto sv = singular_values_from_spectrum(eig.values.head(m), block.rows(), block.cols());
  const Index d = select_d(sv, block.cols(), rule);
  auto model = local_pca_from(block, eig, d, nb.unit);
  model.self_position = self;
  return model;
}

/// One model per unit, in unit order.
inline std::vector<LocalFactorModel> fit_all(const Matrix& x, const std::vector<NeighborSet>& neighbors,
                                             const FactorCountRule& rule, Threads threads = {}) {
  std::vector<LocalFactorModel> models(neighbors.size());
  parallel_for(neighbors.size(), threads, [&](std::size_t s) { models[s] = fit_unit(x, neighbors[s], rule); });
  return models;
}

/// Fitted means on the PCA rows: column i is unit i's own column of its
/// neighborhood fit F L'.
inline Matrix reconstruct(const std::vector<LocalFactorModel>& models, const std::vector<NeighborSet>& neighbors) {
  detail::require(models.size() == neighbors.size(), "reconstruct: models and neighbor sets differ in length");
  detail::require(!models.empty(), "reconstruct: no models");
  const Index p = models.front().factors.rows();
  const auto n = static_cast<Index>(models.size());
  Matrix h(p, n);
  for (std::size_t s = 0; s < models.size(); ++s) {
    const auto& m = models[s];
    detail::require(m.unit == neighbors[s].unit, "reconstruct: models and neighbor sets are not aligned");
    detail::require(m.unit >= 0 && m.unit < n, "reconstruct: unit out of range");
    if (m.self_position < 0 || m.self_position >= m.loadings.rows())
      throw ContractError("internal: missing self position for unit " + std::to_string(m.unit + 1));
    h.col(m.unit) = m.factors * m.loadings.row(m.self_position).transpose();
  }
  return h;
}

/// Per-unit selected d and spectrum: unit,d,eig1,eig2,... (1-based units).
inline void write_spectra_csv(std::ostream& out, const std::vector<LocalFactorModel>& models, int digits = 12) {
  out << "unit,d,spectrum\n";
  for (const auto& m : models) {
    out << (m.unit + 1) << ',' << m.d;
    for (Index j = 0; j < m.spectrum.size(); ++j) out << ',' << detail::format_double(m.spectrum(j), digits);
    out << '\n';
  }
}

// Latent-dimension heuristic (experimental diagnostic).
//
// The leading local eigenvalue tracks the local constant; the group right
// after it tracks the local linear terms, one per latent coordinate. Its size
// is the count of eigenvalues from position 2 up to the first gap
// omega_j / omega_{j+1} >= gap_ratio.

struct SecondGroup {
  Index size = 0;
  bool inconclusive = false;  // no gap found; size counts every post-leading eigenvalue
};

inline SecondGroup second_group_size(const Vector& spectrum, double gap_ratio) {
  if (!(gap_ratio > 1.0)) throw ConfigError("gap ratio must exceed 1");
  if (spectrum.size() < 3) throw DataError("latent-dimension diagnostic unavailable: fewer than 3 local eigenvalues");
  const Index m = spectrum.size();
  for (Index j = 1; j + 1 < m; ++j) {
    const double next = spectrum(j + 1);
    const double ratio = next <= 0.0 ? std::numeric_limits<double>::infinity() : spectrum(j) / next;
    if (spectrum(j) > 0.0 && ratio >= gap_ratio) return {j, false};
  }
  return {m - 1, true};
}

struct LatentDimEstimate {
  Index r = 0;
  bool inconclusive = false;
  std::vector<Index> per_unit;
};

inline LatentDimEstimate estimate_latent_dim(const Matrix& x, const std::vector<NeighborSet>& neighbors, double gap_ratio,
                                             Threads threads = {}) {
  if (!(gap_ratio > 1.0)) throw ConfigError("gap ratio must exceed 1");
  std::vector<SecondGroup> groups(neighbors.size());
  parallel_for(neighbors.size(), threads, [&](std::size_t s) {
    groups[s] = second_group_size(local_spectrum(local_block(x, neighbors[s]), neighbors[s].unit), gap_ratio);
  });
  LatentDimEstimate out;
  for (const auto& g : groups) {
    out.per_unit.push_back(g.size);
    out.r = std::max(out.r, g.size);
    out.inconclusive = out.inconclusive || g.inconclusive;
  }
  return out;
}

}  // namespace lpca
