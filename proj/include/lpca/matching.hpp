#pragma once

#include <algorithm>
#include <fstream>
#include <numeric>
#include <ostream>
#include <string>
#include <vector>

#include "lpca/data.hpp"
#include "lpca/parallel.hpp"

namespace lpca {

/// The K nearest neighbors of one unit, the unit itself first.
struct NeighborSet {
  Index unit = 0;
  IndexList indices;
  std::vector<double> distances;  // distance from `unit` to each member, same order
  double radius = 0.0;

  Index size() const { return static_cast<Index>(indices.size()); }

  /// Position of `unit` inside `indices`, or -1 if absent.
  Index self_position() const {
    auto it = std::find(indices.begin(), indices.end(), unit);
    return it == indices.end() ? Index{-1} : static_cast<Index>(it - indices.begin());
  }

  friend bool operator==(const NeighborSet&, const NeighborSet&) = default;
};

/// K nearest neighbors of unit i under the distance matrix D. Members are
/// ordered by (distance, index); unit i always comes first, even when other
/// units tie with it at distance 0.
inline NeighborSet knn_match(const Matrix& d, Index i, Index k) {
  const Index n = d.rows();
  detail::require(d.cols() == n, "distance matrix must be square");
  detail::require(i >= 0 && i < n, "knn_match: unit out of range");
  if (k < 1) throw ConfigError("K must be at least 1");
  if (k > n) throw ConfigError("K exceeds sample size (K=" + std::to_string(k) + ", n=" + std::to_string(n) + ")");

  IndexList order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), Index{0});
  auto before = [&](Index a, Index b) {
    if (a == i || b == i) return a == i && b != i;
    const double da = d(i, a), db = d(i, b);
    if (da != db) return da < db;
    return a < b;
  };
  std::partial_sort(order.begin(), order.begin() + k, order.end(), before);
  order.resize(static_cast<std::size_t>(k));

  NeighborSet out;
  out.unit = i;
  out.distances.reserve(order.size());
  for (Index j : order) {
    out.distances.push_back(d(i, j));
    out.radius = std::max(out.radius, d(i, j));
  }
  out.indices = std::move(order);
  return out;
}

inline std::vector<NeighborSet> match_all(const Matrix& d, Index k, Threads threads = {}) {
  const Index n = d.rows();
  if (k < 1) throw ConfigError("K must be at least 1");
  if (k > n) throw ConfigError("K exceeds sample size (K=" + std::to_string(k) + ", n=" + std::to_string(n) + ")");
  std::vector<NeighborSet> out(static_cast<std::size_t>(n));
  parallel_for(out.size(), threads, [&](std::size_t i) { out[i] = knn_match(d, static_cast<Index>(i), k); });
  return out;
}

/// Largest latent-space distance ||alpha_i - alpha_j|| between each unit and
/// its matched neighbors. Columns of `alpha` are units. Simulation use only:
/// the latent variables are never available for real data.
inline Vector unit_discrepancies(const Matrix& alpha, const std::vector<NeighborSet>& neighbors) {
  Vector out(static_cast<Index>(neighbors.size()));
  for (std::size_t s = 0; s < neighbors.size(); ++s) {
    const auto& nb = neighbors[s];
    detail::require(nb.unit >= 0 && nb.unit < alpha.cols(), "matching_discrepancy: unit outside alpha");
    double worst = 0.0;
    for (Index j : nb.indices) {
      detail::require(j >= 0 && j < alpha.cols(), "matching_discrepancy: neighbor outside alpha");
      worst = std::max(worst, (alpha.col(nb.unit) - alpha.col(j)).norm());
    }
    out(static_cast<Index>(s)) = worst;
  }
  return out;
}

inline double matching_discrepancy(const Matrix& alpha, const std::vector<NeighborSet>& neighbors) {
  if (neighbors.empty()) return 0.0;
  return unit_discrepancies(alpha, neighbors).maxCoeff();
}

/// Audit table: unit,rank,neighbor,distance (1-based units and ranks).
inline void write_neighbors_csv(std::ostream& out, const std::vector<NeighborSet>& neighbors, int digits = 12) {
  out << "unit,rank,neighbor,distance\n";
  for (const auto& nb : neighbors)
    for (std::size_t k = 0; k < nb.indices.size(); ++k)
      out << (nb.unit + 1) << ',' << (k + 1) << ',' << (nb.indices[k] + 1) << ','
          << detail::format_double(nb.distances[k], digits) << '\n';
}

}  // namespace lpca
