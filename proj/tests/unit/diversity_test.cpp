#include "ecos/diversity.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <set>

#include <gtest/gtest.h>

namespace ecos {
namespace {

FeatureDataset line(std::initializer_list<float> xs) {
  return FeatureDataset(xs.size(), 1, std::vector<float>(xs));
}

// Covering radius of `centers` over the whole pool, recomputed from scratch.
double covering_radius(const FeatureDataset& pool, const std::vector<std::size_t>& centers) {
  double worst = 0.0;
  for (std::size_t i = 0; i < pool.size(); ++i) {
    double best = std::numeric_limits<double>::infinity();
    for (auto c : centers) best = std::min(best, squared_distance(pool.row(i), pool.row(c)));
    worst = std::max(worst, best);
  }
  return worst;
}

double optimal_radius(const FeatureDataset& pool, std::size_t k) {
  const std::size_t n = pool.size();
  double best = std::numeric_limits<double>::infinity();
  for (unsigned mask = 1; mask < (1u << n); ++mask) {
    if (static_cast<std::size_t>(__builtin_popcount(mask)) != k) continue;
    std::vector<std::size_t> c;
    for (std::size_t i = 0; i < n; ++i) {
      if (mask >> i & 1u) c.push_back(i);
    }
    best = std::min(best, covering_radius(pool, c));
  }
  return best;
}

std::uint64_t seed_with_first_pick(std::size_t pool, std::size_t want) {
  for (std::uint64_t s = 0;; ++s) {
    if (Rng(s).below(pool) == want) return s;
  }
}

TEST(KCenter, FarthestFirstByHand) {
  auto pool = line({0, 1, 10});
  auto sel = kcenter_select(pool, std::nullopt, 2, seed_with_first_pick(3, 0));
  EXPECT_EQ(sel.indices, (std::vector<std::size_t>{0, 2}));
  EXPECT_EQ(sel.radii, (std::vector<double>{100.0, 1.0}));
}

TEST(KCenter, SaturationReturnsWholePool) {
  auto pool = line({4, 1, 9, 2});
  auto sel = kcenter_select(pool, std::nullopt, 10, 5);
  std::set<std::size_t> got(sel.indices.begin(), sel.indices.end());
  EXPECT_EQ(got, (std::set<std::size_t>{0, 1, 2, 3}));
  EXPECT_EQ(sel.radii.back(), 0.0);
}

TEST(KCenter, IdenticalPointsTieToLowestUnselected) {
  auto pool = line({2, 2, 2, 2, 2});
  auto sel = kcenter_select_from(pool, std::vector<std::size_t>{0, 1, 2, 3, 4}, 3, 2);
  EXPECT_EQ(sel.indices, (std::vector<std::size_t>{2, 0, 1}));
  EXPECT_EQ(sel.radii, (std::vector<double>{0, 0, 0}));
}

TEST(KCenter, SubsetRestrictsCandidates) {
  auto pool = line({0, 100, 1, 2, 50});
  std::vector<std::size_t> subset = {0, 2, 3};
  auto sel = kcenter_select(pool, std::span<const std::size_t>(subset), 3, 1);
  std::set<std::size_t> got(sel.indices.begin(), sel.indices.end());
  EXPECT_EQ(got, (std::set<std::size_t>{0, 2, 3}));
}

TEST(KCenter, Errors) {
  auto pool = line({0, 1});
  EXPECT_THROW(kcenter_select(pool, std::nullopt, 0, 1), InvalidArgument);
  EXPECT_THROW(kcenter_select(FeatureDataset(0, 1, {}), std::nullopt, 1, 1), InvalidArgument);
  std::vector<std::size_t> empty;
  EXPECT_THROW(kcenter_select(pool, std::span<const std::size_t>(empty), 1, 1), InvalidArgument);
}

TEST(KCenter, RadiiMatchRecomputationAndNeverIncrease) {
  Rng rng(3);
  for (int trial = 0; trial < 30; ++trial) {
    const std::size_t n = 5 + rng.below(60), dim = 1 + rng.below(3);
    std::vector<float> data(n * dim);
    for (auto& x : data) x = static_cast<float>(rng.normal() * 5);
    FeatureDataset pool(n, dim, data);
    auto sel = kcenter_select(pool, std::nullopt, 1 + rng.below(n), rng.next());
    std::set<std::size_t> unique(sel.indices.begin(), sel.indices.end());
    EXPECT_EQ(unique.size(), sel.indices.size());
    for (std::size_t k = 0; k < sel.indices.size(); ++k) {
      std::vector<std::size_t> prefix(sel.indices.begin(), sel.indices.begin() + k + 1);
      EXPECT_EQ(sel.radii[k], covering_radius(pool, prefix));
      if (k > 0) {
        EXPECT_LE(sel.radii[k], sel.radii[k - 1]);
      }
    }
  }
}

TEST(KCenter, TwoApproximationOnSmallInstances) {
  Rng rng(17);
  for (int trial = 0; trial < 60; ++trial) {
    const std::size_t n = 2 + rng.below(9), dim = 1 + rng.below(3);
    std::vector<float> data(n * dim);
    for (auto& x : data) x = static_cast<float>(rng.uniform() * 10);
    FeatureDataset pool(n, dim, data);
    const std::size_t k = 1 + rng.below(std::min<std::size_t>(4, n));
    auto sel = kcenter_select(pool, std::nullopt, k, rng.next());
    // The guarantee is on plain distances; radii are squared, so the factor is 4.
    EXPECT_LE(sel.radii.back(), 4.0 * optimal_radius(pool, k) + 1e-9);
  }
}

TEST(KCenter, PermutationEquivariance) {
  Rng rng(23);
  for (int trial = 0; trial < 20; ++trial) {
    const std::size_t n = 10;
    std::vector<float> data(n * 2);
    for (auto& x : data) x = static_cast<float>(rng.uniform() * 10);
    FeatureDataset pool(n, 2, data);
    std::vector<std::size_t> perm(n);
    std::iota(perm.begin(), perm.end(), std::size_t{0});
    for (std::size_t i = n - 1; i > 0; --i) std::swap(perm[i], perm[rng.below(i + 1)]);
    // permuted row p holds original row perm[p]
    std::vector<float> pdata;
    for (auto p : perm) pdata.insert(pdata.end(), pool.row(p).begin(), pool.row(p).end());
    FeatureDataset permuted(n, 2, pdata);
    std::vector<std::size_t> inverse(n);
    for (std::size_t p = 0; p < n; ++p) inverse[perm[p]] = p;

    std::vector<std::size_t> all(n);
    std::iota(all.begin(), all.end(), std::size_t{0});
    auto a = kcenter_select_from(pool, all, 4, 3);
    auto b = kcenter_select_from(permuted, all, 4, inverse[3]);
    for (std::size_t k = 0; k < 4; ++k) EXPECT_EQ(perm[b.indices[k]], a.indices[k]);
  }
}

TEST(RandomSelect, SaturationIsPermutation) {
  auto sel = random_select(6, 6, 3);
  std::sort(sel.begin(), sel.end());
  EXPECT_EQ(sel, (std::vector<std::size_t>{0, 1, 2, 3, 4, 5}));
}

TEST(RandomSelect, DeterministicPerSeed) {
  EXPECT_EQ(random_select(100, 10, 42), random_select(100, 10, 42));
  EXPECT_NE(random_select(100, 10, 42), random_select(100, 10, 43));
}

TEST(RandomSelect, UniformOneOfThree) {
  const int draws = 10000;
  std::array<int, 3> freq{};
  for (int s = 0; s < draws; ++s) ++freq[random_select(3, 1, static_cast<std::uint64_t>(s))[0]];
  const double mean = draws / 3.0;
  const double sd = std::sqrt(draws * (1.0 / 3.0) * (2.0 / 3.0));
  for (int f : freq) EXPECT_NEAR(f, mean, 3 * sd);
}

TEST(RandomSelect, BudgetTooLarge) { EXPECT_THROW(random_select(3, 4, 0), InvalidArgument); }

}  // namespace
}  // namespace ecos
