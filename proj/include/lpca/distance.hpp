#pragma once

// Matching distances between units, evaluated on the matching rows.
//
// EuclideanSq is the scaled squared Euclidean distance (1/p)||v_i - v_j||^2.
// It induces the same neighbor ranking as (1/sqrt(p))||v_i - v_j|| since the
// two differ by a monotone transform.

#include <cmath>
#include <string>
#include <utility>
#include <vector>

#include "lpca/data.hpp"
#include "lpca/parallel.hpp"

namespace lpca {

struct DistanceKind {
  enum class Tag { EuclideanSq, PseudoMax, Average, Weighted };

  Tag tag = Tag::PseudoMax;
  Vector weights;  // Weighted only, one non-negative entry per matching row
  std::string weights_source;

  static DistanceKind euclidean() { return {Tag::EuclideanSq, {}, {}}; }
  static DistanceKind pseudo_max() { return {Tag::PseudoMax, {}, {}}; }
  static DistanceKind average() { return {Tag::Average, {}, {}}; }
  static DistanceKind weighted(Vector w, std::string source = {}) {
    if (w.size() == 0) throw ConfigError("weighted distance needs at least one weight");
    if ((w.array() < 0.0).any() || !w.allFinite()) throw ConfigError("distance weights must be finite and non-negative");
    if ((w.array() == 0.0).all()) throw ConfigError("distance weights must not all be zero");
    return {Tag::Weighted, std::move(w), std::move(source)};
  }
};

/// Name used in config files and on the command line.
inline std::string to_string(const DistanceKind& k) {
  switch (k.tag) {
    case DistanceKind::Tag::EuclideanSq: return "euclidean";
    case DistanceKind::Tag::PseudoMax: return "pseudo-max";
    case DistanceKind::Tag::Average: return "average";
    case DistanceKind::Tag::Weighted: return "weighted:" + k.weights_source;
  }
  return "unknown";
}

/// Accepts "euclidean", "pseudo-max", "average" or "weighted:<csv path>". The
/// weights file holds one number per matching row, as a single row or column.
inline DistanceKind parse_distance_kind(const std::string& spec) {
  if (spec == "euclidean") return DistanceKind::euclidean();
  if (spec == "pseudo-max") return DistanceKind::pseudo_max();
  if (spec == "average") return DistanceKind::average();
  if (spec.rfind("weighted:", 0) == 0) {
    const std::string path = spec.substr(9);
    DataMatrix w = load_csv(path);
    if (!w.all_observed()) throw DataError("distance weights file has missing cells: " + path);
    if (w.p() != 1 && w.n() != 1) throw DataError("distance weights must be a single row or column: " + path);
    Vector flat = w.values.reshaped();
    return DistanceKind::weighted(std::move(flat), path);
  }
  throw ConfigError("unknown distance '" + spec + "'");
}

template <class A, class B>
double euclidean_sq(const Eigen::MatrixBase<A>& vi, const Eigen::MatrixBase<B>& vj) {
  detail::require(vi.size() == vj.size(), "euclidean_sq: length mismatch");
  detail::require(vi.size() >= 1, "euclidean_sq: empty vectors");
  return (vi - vj).squaredNorm() / static_cast<double>(vi.size());
}

template <class A, class B>
double average_dist(const Eigen::MatrixBase<A>& vi, const Eigen::MatrixBase<B>& vj) {
  detail::require(vi.size() == vj.size(), "average_dist: length mismatch");
  detail::require(vi.size() >= 1, "average_dist: empty vectors");
  return std::abs((vi - vj).sum()) / static_cast<double>(vi.size());
}

/// (1/p) max over third units l != i, j of |(x_i - x_j)' x_l|.
inline double pseudo_max(const Matrix& x, Index i, Index j) {
  if (x.cols() < 3) throw ConfigError("pseudo-max needs at least three units");
  detail::require(i >= 0 && i < x.cols() && j >= 0 && j < x.cols(), "pseudo_max: unit out of range");
  if (i == j) return 0.0;
  const Vector diff = x.col(i) - x.col(j);
  double best = 0.0;
  for (Index l = 0; l < x.cols(); ++l) {
    if (l == i || l == j) continue;
    best = std::max(best, std::abs(diff.dot(x.col(l))));
  }
  return best / static_cast<double>(x.rows());
}

namespace detail {

template <class PairFn>
Matrix fill_symmetric(Index n, Threads threads, PairFn&& pair) {
  Matrix d = Matrix::Zero(n, n);
  parallel_for(static_cast<std::size_t>(n), threads, [&](std::size_t ui) {
    const auto i = static_cast<Index>(ui);
    for (Index j = i + 1; j < n; ++j) d(j, i) = pair(i, j);
  });
  for (Index i = 0; i < n; ++i)
    for (Index j = i + 1; j < n; ++j) d(i, j) = d(j, i);
  return d;
}

}  // namespace detail

/// n x n matrix D with D(i, j) the distance between columns i and j of the
/// matching block. D is exactly symmetric with a zero diagonal.
inline Matrix pairwise_distances(const Matrix& x, const DistanceKind& kind, Threads threads = {}) {
  const Index n = x.cols();
  const auto p = static_cast<double>(x.rows());
  if (n < 2) throw ConfigError("pairwise distances need at least two units");
  if (x.rows() < 1) throw ConfigError("matching block has no rows");

  switch (kind.tag) {
    case DistanceKind::Tag::EuclideanSq:
      return detail::fill_symmetric(n, threads, [&](Index i, Index j) { return (x.col(i) - x.col(j)).squaredNorm() / p; });

    case DistanceKind::Tag::Average:
      return detail::fill_symmetric(n, threads, [&](Index i, Index j) { return std::abs((x.col(i) - x.col(j)).sum()) / p; });

    case DistanceKind::Tag::Weighted: {
      if (kind.weights.size() != x.rows())
        throw ConfigError("weighted distance has " + std::to_string(kind.weights.size()) + " weights for " +
                          std::to_string(x.rows()) + " matching rows");
      const Matrix scaled = kind.weights.array().sqrt().matrix().asDiagonal() * x;
      return detail::fill_symmetric(n, threads,
                                    [&](Index i, Index j) { return (scaled.col(i) - scaled.col(j)).squaredNorm() / p; });
    }

    case DistanceKind::Tag::PseudoMax: {
      if (n < 3) throw ConfigError("pseudo-max needs at least three units");
      // (x_i - x_j)' x_l = G(l, i) - G(l, j) with G = X'X.
      Matrix gram(n, n);
      gram.noalias() = x.transpose() * x;
      return detail::fill_symmetric(n, threads, [&](Index i, Index j) {
        const double* gi = gram.col(i).data();
        const double* gj = gram.col(j).data();
        double best = 0.0;
        for (Index l = 0; l < n; ++l) {
          if (l == i || l == j) continue;
          best = std::max(best, std::abs(gi[l] - gj[l]));
        }
        return best / p;
      });
    }
  }
  throw ContractError("unhandled distance kind");
}

}  // namespace lpca
