#include <algorithm>
#include <random>
#include <sstream>

#include <gtest/gtest.h>

#include "lpca/distance.hpp"
#include "lpca/matching.hpp"

namespace lpca {
namespace {

Matrix one_dimensional_distances() {
  Matrix x(1, 4);
  x << 0, 1, 3, 7;
  return pairwise_distances(x, DistanceKind::euclidean());
}

Matrix random_distances(Index n, std::uint64_t seed) {
  std::mt19937_64 gen(seed);
  std::normal_distribution<double> z(0.0, 1.0);
  Matrix x(3, n);
  for (auto& v : x.reshaped()) v = z(gen);
  return pairwise_distances(x, DistanceKind::pseudo_max());
}

void expect_valid(const NeighborSet& nb, const Matrix& d, Index k) {
  ASSERT_EQ(nb.size(), k);
  IndexList sorted = nb.indices;
  std::sort(sorted.begin(), sorted.end());
  EXPECT_EQ(std::adjacent_find(sorted.begin(), sorted.end()), sorted.end());
  EXPECT_EQ(nb.indices.front(), nb.unit);
  double r = 0.0;
  for (Index j : nb.indices) r = std::max(r, d(nb.unit, j));
  EXPECT_EQ(nb.radius, r);
}

TEST(KnnMatch, SingleNeighborIsSelf) {
  const Matrix d = one_dimensional_distances();
  for (Index i = 0; i < 4; ++i) EXPECT_EQ(knn_match(d, i, 1).indices, IndexList{i});
}

TEST(KnnMatch, OneDimensionalExample) {
  const auto nb = knn_match(one_dimensional_distances(), 1, 2);
  EXPECT_EQ(nb.indices, (IndexList{1, 0}));
  EXPECT_EQ(nb.radius, 1.0);
}

TEST(KnnMatch, TiesBrokenSelfFirstThenIndex) {
  const Matrix d = Matrix::Zero(6, 6);
  EXPECT_EQ(knn_match(d, 4, 3).indices, (IndexList{4, 0, 1}));
  EXPECT_EQ(knn_match(d, 0, 3).indices, (IndexList{0, 1, 2}));
}

TEST(KnnMatch, RejectsBadK) {
  const Matrix d = one_dimensional_distances();
  try {
    knn_match(d, 0, 5);
    FAIL();
  } catch (const ConfigError& e) {
    EXPECT_NE(std::string(e.what()).find("K exceeds sample size"), std::string::npos);
  }
  EXPECT_THROW(knn_match(d, 0, 0), ConfigError);
  EXPECT_THROW(match_all(d, 5), ConfigError);
}

TEST(MatchAll, ExhaustiveWhenKEqualsN) {
  const Matrix d = random_distances(7, 1);
  for (const auto& nb : match_all(d, 7)) {
    IndexList sorted = nb.indices;
    std::sort(sorted.begin(), sorted.end());
    EXPECT_EQ(sorted, (IndexList{0, 1, 2, 3, 4, 5, 6}));
  }
}

TEST(MatchAll, StructureAndDeterminism) {
  const Matrix d = random_distances(40, 2);
  const auto a = match_all(d, 9, Threads{1});
  const auto b = match_all(d, 9, Threads{3});
  ASSERT_EQ(a.size(), 40u);
  EXPECT_EQ(a, b);
  for (std::size_t i = 0; i < a.size(); ++i) {
    EXPECT_EQ(a[i].unit, static_cast<Index>(i));
    expect_valid(a[i], d, 9);
    EXPECT_TRUE(std::is_sorted(a[i].distances.begin() + 1, a[i].distances.end()));
  }
}

TEST(MatchAll, NeighborSetsGrowMonotonicallyInK) {
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    Matrix d = random_distances(30, seed);
    // Rounded distances produce ties.
    d = (d * 4.0).array().round().matrix();
    for (Index i = 0; i < 30; ++i)
      for (Index k = 1; k < 30; ++k) {
        const auto small = knn_match(d, i, k), large = knn_match(d, i, k + 1);
        EXPECT_TRUE(std::equal(small.indices.begin(), small.indices.end(), large.indices.begin()));
      }
  }
}

TEST(MatchingDiscrepancy, Examples) {
  Matrix alpha(1, 3);
  alpha << 0.1, 0.2, 0.9;
  std::vector<NeighborSet> self_only;
  for (Index i = 0; i < 3; ++i) self_only.push_back({i, {i}, {0.0}, 0.0});
  EXPECT_EQ(matching_discrepancy(alpha, self_only), 0.0);

  std::vector<NeighborSet> one{{0, {0, 1}, {0.0, 0.0}, 0.0}};
  EXPECT_NEAR(matching_discrepancy(alpha, one), 0.1, 1e-15);

  Matrix bad(1, 1);
  EXPECT_THROW(matching_discrepancy(bad, one), ContractError);
}

TEST(MatchingDiscrepancy, InvariantToRelabeling) {
  std::mt19937_64 gen(3);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  Matrix alpha(2, 12);
  for (auto& v : alpha.reshaped()) v = u(gen);
  const auto neighbors = match_all(random_distances(12, 4), 4);

  IndexList perm(12);
  std::iota(perm.begin(), perm.end(), Index{0});
  std::shuffle(perm.begin(), perm.end(), gen);  // old label -> new label
  Matrix relabeled(2, 12);
  for (Index i = 0; i < 12; ++i) relabeled.col(perm[i]) = alpha.col(i);
  auto moved = neighbors;
  for (auto& nb : moved) {
    nb.unit = perm[nb.unit];
    for (auto& j : nb.indices) j = perm[j];
  }
  EXPECT_EQ(matching_discrepancy(alpha, neighbors), matching_discrepancy(relabeled, moved));
}

TEST(NeighborsCsv, OneBasedAuditTable) {
  const auto nb = match_all(one_dimensional_distances(), 2);
  std::ostringstream out;
  write_neighbors_csv(out, nb);
  EXPECT_EQ(out.str(),
            "unit,rank,neighbor,distance\n"
            "1,1,1,0\n1,2,2,1\n"
            "2,1,2,0\n2,2,1,1\n"
            "3,1,3,0\n3,2,2,4\n"
            "4,1,4,0\n4,2,3,16\n");
}

}  // namespace
}  // namespace lpca
