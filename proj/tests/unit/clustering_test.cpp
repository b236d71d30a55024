#include "ecos/clustering.hpp"

#include <algorithm>
#include <limits>

#include <gtest/gtest.h>

#include "ecos/random.hpp"

namespace ecos {
namespace {

FeatureDataset make(std::size_t n, std::size_t dim, std::initializer_list<float> values) {
  return FeatureDataset(n, dim, std::vector<float>(values));
}

FeatureDataset gaussian_cloud(std::uint64_t seed, std::size_t n, std::size_t dim) {
  Rng rng(seed);
  std::vector<float> data(n * dim);
  for (std::size_t i = 0; i < n; ++i) {
    const double shift = 6.0 * static_cast<double>(rng.below(4));
    for (std::size_t j = 0; j < dim; ++j) data[i * dim + j] = static_cast<float>(shift + rng.normal());
  }
  return FeatureDataset(n, dim, std::move(data));
}

// Minimum SSE over every 2-partition into non-empty parts, by enumeration.
double best_two_partition_sse(const FeatureDataset& ds) {
  const std::size_t n = ds.size(), dim = ds.dim();
  double best = std::numeric_limits<double>::infinity();
  for (unsigned mask = 1; mask + 1 < (1u << n); ++mask) {
    double sse = 0.0;
    for (int side = 0; side < 2; ++side) {
      std::vector<double> mean(dim, 0.0);
      int count = 0;
      for (std::size_t i = 0; i < n; ++i) {
        if (((mask >> i) & 1u) != static_cast<unsigned>(side)) continue;
        ++count;
        for (std::size_t j = 0; j < dim; ++j) mean[j] += ds.row(i)[j];
      }
      for (auto& m : mean) m /= count;
      for (std::size_t i = 0; i < n; ++i) {
        if (((mask >> i) & 1u) != static_cast<unsigned>(side)) continue;
        for (std::size_t j = 0; j < dim; ++j) sse += (ds.row(i)[j] - mean[j]) * (ds.row(i)[j] - mean[j]);
      }
    }
    best = std::min(best, sse);
  }
  return best;
}

TEST(KMeans, FourPointsTwoClusters) {
  auto ds = make(4, 2, {0, 0, 0, 1, 10, 0, 10, 1});
  EXPECT_DOUBLE_EQ(best_two_partition_sse(ds), 1.0);
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    auto cb = kmeans_compress(ds, 2, seed);
    EXPECT_DOUBLE_EQ(cb.sse(), 1.0);
    std::vector<std::pair<float, float>> c = {{cb.centroids[0], cb.centroids[1]},
                                              {cb.centroids[2], cb.centroids[3]}};
    std::sort(c.begin(), c.end());
    EXPECT_EQ(c[0], std::make_pair(0.0f, 0.5f));
    EXPECT_EQ(c[1], std::make_pair(10.0f, 0.5f));
  }
}

TEST(KMeans, SaturationEachPointOwnCentroid) {
  auto ds = make(5, 1, {3, -1, 7, 2, 0});
  auto cb = kmeans_compress(ds, 5, 3);
  EXPECT_EQ(cb.sse(), 0.0);
  EXPECT_EQ(cb.cluster_sizes, std::vector<std::size_t>(5, 1));
}

TEST(KMeans, SingleClusterIsMean) {
  auto ds = make(4, 2, {1, 2, 3, 4, 5, 6, 7, 9});
  auto cb = kmeans_compress(ds, 1, 0);
  EXPECT_FLOAT_EQ(cb.centroids[0], 4.0f);
  EXPECT_FLOAT_EQ(cb.centroids[1], 5.25f);
  EXPECT_EQ(cb.cluster_sizes[0], 4u);
}

TEST(KMeans, Errors) {
  auto ds = make(3, 1, {0, 1, 2});
  EXPECT_THROW(kmeans_compress(ds, 0, 0), InvalidArgument);
  EXPECT_THROW(kmeans_compress(ds, 4, 0), InvalidArgument);
  EXPECT_THROW(kmeans_compress(ds, 2, 0, {0, 1e-6}), InvalidArgument);
  EXPECT_THROW(kmeans_compress(ds, 2, 0, {10, -1.0}), InvalidArgument);
  // Two distinct rows cannot populate three clusters.
  EXPECT_THROW(kmeans_compress(make(3, 1, {1, 1, 2}), 3, 0), InvalidArgument);
}

TEST(KMeans, InvariantsOnRandomClouds) {
  for (std::uint64_t seed = 1; seed <= 12; ++seed) {
    auto ds = gaussian_cloud(seed, 300, 3);
    const std::size_t r = 2 + seed % 9;
    auto cb = kmeans_compress(ds, r, seed);

    std::size_t total = 0;
    for (auto s : cb.cluster_sizes) {
      EXPECT_GE(s, 1u);
      total += s;
    }
    EXPECT_EQ(total, ds.size());
    EXPECT_EQ(assign(cb, ds), cb.assignment);
    for (std::size_t i = 1; i < cb.sse_history.size(); ++i) {
      EXPECT_LE(cb.sse_history[i], cb.sse_history[i - 1] * (1.0 + 1e-9))
          << "seed " << seed << " step " << i;
    }
    EXPECT_GE(cb.iters_run, 1u);
    EXPECT_LE(cb.iters_run, 100u);
  }
}

TEST(KMeans, Deterministic) {
  auto ds = gaussian_cloud(5, 400, 4);
  auto a = kmeans_compress(ds, 7, 99);
  auto b = kmeans_compress(ds, 7, 99);
  EXPECT_EQ(a.centroids, b.centroids);
  EXPECT_EQ(a.assignment, b.assignment);
  EXPECT_EQ(a.iters_run, b.iters_run);
  EXPECT_EQ(a.sse_history, b.sse_history);
}

TEST(KMeans, MaxItersBoundsTheRun) {
  auto ds = gaussian_cloud(2, 500, 2);
  auto cb = kmeans_compress(ds, 10, 4, {1, 0.0});
  EXPECT_EQ(cb.iters_run, 1u);
  EXPECT_EQ(assign(cb, ds), cb.assignment);
}

TEST(KMeans, MoreCentroidsRarelyWorse) {
  int ok = 0, trials = 40;
  for (int t = 0; t < trials; ++t) {
    auto ds = gaussian_cloud(100 + t, 200, 2);
    auto small = kmeans_compress(ds, 4, 1000 + t);
    auto large = kmeans_compress(ds, 8, 1000 + t);
    ok += large.sse() <= small.sse();
  }
  EXPECT_GE(ok, static_cast<int>(0.95 * trials));
}

TEST(KMeans, DuplicateHeavyDataHasNoEmptyCluster) {
  // Many duplicates of few points push k-means++ into the repair path.
  std::vector<float> data;
  for (int i = 0; i < 40; ++i) data.push_back(0.0f);
  for (int i = 0; i < 3; ++i) data.push_back(5.0f + i);
  FeatureDataset ds(data.size(), 1, data);
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    auto cb = kmeans_compress(ds, 4, seed);
    for (auto s : cb.cluster_sizes) EXPECT_GE(s, 1u);
    EXPECT_EQ(assign(cb, ds), cb.assignment);
  }
}

TEST(Assign, NearestCentroid) {
  auto centroids = make(2, 2, {0, 0, 10, 0});
  EXPECT_EQ(assign(centroids, make(1, 2, {1, 0})), std::vector<std::int32_t>{0});
  EXPECT_EQ(assign(centroids, make(1, 2, {5, 0})), std::vector<std::int32_t>{0});
  EXPECT_EQ(assign(centroids, make(3, 2, {1, 0, 2, 0, 9, 0})), (std::vector<std::int32_t>{0, 0, 1}));
  EXPECT_THROW(assign(centroids, make(1, 1, {0})), InvalidArgument);
}

}  // namespace
}  // namespace ecos
