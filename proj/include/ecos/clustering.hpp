#pragma once

#include <algorithm>
#include <cstdint>
#include <limits>
#include <string>
#include <vector>

#include "ecos/dataset.hpp"
#include "ecos/error.hpp"
#include "ecos/random.hpp"

namespace ecos {

/// R centroids plus the cloud-side partition they induce.
struct Codebook {
  std::size_t r = 0;
  std::size_t dim = 0;
  std::vector<float> centroids;  // r x dim, row-major
  std::vector<std::int32_t> assignment;
  std::vector<std::size_t> cluster_sizes;
  std::uint64_t seed = 0;
  std::size_t iters_run = 0;
  std::size_t max_iters = 0;
  double tol = 0.0;
  // Within-cluster SSE after every assignment step, the last entry being the
  // finalized partition.
  std::vector<double> sse_history;

  std::span<const float> centroid(std::size_t k) const {
    return {centroids.data() + k * dim, dim};
  }

  FeatureDataset centroid_set() const { return FeatureDataset(r, dim, centroids); }

  double sse() const { return sse_history.empty() ? 0.0 : sse_history.back(); }
};

struct KMeansOptions {
  std::size_t max_iters = 100;
  double tol = 1e-6;
};

namespace detail {

struct Partition {
  std::vector<std::int32_t> labels;
  std::vector<double> dist;  // squared distance to the assigned centroid
  double sse = 0.0;
};

inline Partition nearest_centroids(const FeatureDataset& ds, const std::vector<float>& centroids,
                                   std::size_t r) {
  Partition p;
  p.labels.resize(ds.size());
  p.dist.resize(ds.size());
  const std::size_t dim = ds.dim();
  for (std::size_t i = 0; i < ds.size(); ++i) {
    auto x = ds.row(i);
    double best = std::numeric_limits<double>::infinity();
    std::size_t arg = 0;
    for (std::size_t k = 0; k < r; ++k) {
      const double d = squared_distance(x, {centroids.data() + k * dim, dim});
      if (d < best) {
        best = d;
        arg = k;
      }
    }
    p.labels[i] = static_cast<std::int32_t>(arg);
    p.dist[i] = best;
    p.sse += best;
  }
  return p;
}

// k-means++ seeding: first centre uniform, later centres drawn with
// probability proportional to squared distance to the nearest chosen centre.
inline std::vector<float> kmeanspp_init(const FeatureDataset& ds, std::size_t r, Rng& rng) {
  const std::size_t n = ds.size();
  const std::size_t dim = ds.dim();
  std::vector<float> centroids;
  centroids.reserve(r * dim);
  auto push = [&](std::size_t i) {
    auto row = ds.row(i);
    centroids.insert(centroids.end(), row.begin(), row.end());
  };
  std::size_t first = rng.below(n);
  push(first);
  std::vector<double> d2(n);
  for (std::size_t i = 0; i < n; ++i) d2[i] = squared_distance(ds.row(i), ds.row(first));
  for (std::size_t k = 1; k < r; ++k) {
    double total = 0.0;
    for (double d : d2) total += d;
    std::size_t pick = 0;
    if (total > 0.0) {
      const double target = rng.uniform() * total;
      double acc = 0.0;
      pick = n;
      for (std::size_t i = 0; i < n; ++i) {
        acc += d2[i];
        if (d2[i] > 0.0 && target < acc) {
          pick = i;
          break;
        }
      }
      if (pick == n) {  // rounding at the tail: take the last positive-weight point
        for (std::size_t i = n; i-- > 0;) {
          if (d2[i] > 0.0) {
            pick = i;
            break;
          }
        }
      }
    } else {
      pick = rng.below(n);
    }
    push(pick);
    for (std::size_t i = 0; i < n; ++i) {
      d2[i] = std::min(d2[i], squared_distance(ds.row(i), ds.row(pick)));
    }
  }
  return centroids;
}

inline std::size_t count_distinct_rows(const FeatureDataset& ds, std::size_t stop_at) {
  std::vector<std::size_t> order(ds.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    auto ra = ds.row(a), rb = ds.row(b);
    return std::lexicographical_compare(ra.begin(), ra.end(), rb.begin(), rb.end());
  });
  std::size_t distinct = 0;
  for (std::size_t i = 0; i < order.size() && distinct < stop_at; ++i) {
    if (i == 0 || !std::ranges::equal(ds.row(order[i]), ds.row(order[i - 1]))) ++distinct;
  }
  return distinct;
}

// Moves every empty cluster's centroid onto the point farthest from its own
// centroid, then reassigns. Repeats until no cluster is empty.
inline void repair_empty_clusters(const FeatureDataset& ds, std::vector<float>& centroids,
                                  std::size_t r, Partition& part) {
  const std::size_t dim = ds.dim();
  for (std::size_t round = 0; round <= 2 * r + 8; ++round) {
    std::vector<std::size_t> sizes(r, 0);
    for (auto l : part.labels) ++sizes[l];
    std::vector<std::size_t> empty;
    for (std::size_t k = 0; k < r; ++k) {
      if (sizes[k] == 0) empty.push_back(k);
    }
    if (empty.empty()) return;
    std::vector<bool> taken(ds.size(), false);
    for (std::size_t k : empty) {
      std::size_t far = ds.size();
      double far_d = -1.0;
      for (std::size_t i = 0; i < ds.size(); ++i) {
        if (!taken[i] && part.dist[i] > far_d) {
          far_d = part.dist[i];
          far = i;
        }
      }
      taken[far] = true;
      auto row = ds.row(far);
      std::copy(row.begin(), row.end(), centroids.begin() + static_cast<std::ptrdiff_t>(k * dim));
    }
    part = nearest_centroids(ds, centroids, r);
  }
  throw std::logic_error("empty-cluster repair did not converge");
}

}  // namespace detail

/// Seeded Lloyd k-means from k-means++ initialization. Stops once the largest
/// squared centroid shift falls to tol * (mean squared feature norm) or after
/// max_iters iterations. The returned assignment is consistent with the final
/// centroids and no cluster is empty.
inline Codebook kmeans_compress(const FeatureDataset& cloud, std::size_t r, std::uint64_t seed,
                                KMeansOptions opts = {}) {
  require(r >= 1, "r must be ≥ 1");
  require(r <= cloud.size(), "r must be <= number of cloud rows (r=" + std::to_string(r) +
                                 ", n=" + std::to_string(cloud.size()) + ")");
  require(opts.max_iters >= 1, "max_iters must be >= 1");
  require(opts.tol >= 0.0, "tol must be >= 0");
  require(detail::count_distinct_rows(cloud, r) >= r,
          "r exceeds the number of distinct cloud rows");

  const std::size_t n = cloud.size();
  const std::size_t dim = cloud.dim();
  Rng rng(seed);

  double mean_norm2 = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    for (float v : cloud.row(i)) mean_norm2 += static_cast<double>(v) * v;
  }
  mean_norm2 /= static_cast<double>(n);
  const double stop_shift = opts.tol * mean_norm2;

  Codebook cb;
  cb.r = r;
  cb.dim = dim;
  cb.seed = seed;
  cb.max_iters = opts.max_iters;
  cb.tol = opts.tol;
  cb.centroids = detail::kmeanspp_init(cloud, r, rng);

  std::vector<double> sums(r * dim);
  std::vector<std::size_t> counts(r);
  for (std::size_t it = 1; it <= opts.max_iters; ++it) {
    auto part = detail::nearest_centroids(cloud, cb.centroids, r);
    cb.sse_history.push_back(part.sse);

    std::fill(sums.begin(), sums.end(), 0.0);
    std::fill(counts.begin(), counts.end(), 0);
    for (std::size_t i = 0; i < n; ++i) {
      const auto k = static_cast<std::size_t>(part.labels[i]);
      ++counts[k];
      auto x = cloud.row(i);
      for (std::size_t j = 0; j < dim; ++j) sums[k * dim + j] += x[j];
    }
    std::vector<float> next = cb.centroids;
    for (std::size_t k = 0; k < r; ++k) {
      if (counts[k] == 0) continue;
      for (std::size_t j = 0; j < dim; ++j) {
        next[k * dim + j] = static_cast<float>(sums[k * dim + j] / static_cast<double>(counts[k]));
      }
    }
    // Empty clusters keep their stale centroid here; repair happens against
    // the partition induced by the updated centroids.
    if (std::find(counts.begin(), counts.end(), 0) != counts.end()) {
      auto moved = detail::nearest_centroids(cloud, next, r);
      detail::repair_empty_clusters(cloud, next, r, moved);
    }
    double shift = 0.0;
    for (std::size_t k = 0; k < r; ++k) {
      shift = std::max(shift, squared_distance(cb.centroid(k), {next.data() + k * dim, dim}));
    }
    cb.centroids = std::move(next);
    cb.iters_run = it;
    if (shift <= stop_shift) break;
  }

  auto final_part = detail::nearest_centroids(cloud, cb.centroids, r);
  detail::repair_empty_clusters(cloud, cb.centroids, r, final_part);
  cb.sse_history.push_back(final_part.sse);
  cb.assignment = std::move(final_part.labels);
  cb.cluster_sizes.assign(r, 0);
  for (auto l : cb.assignment) ++cb.cluster_sizes[l];
  return cb;
}

/// Nearest centroid per row, lowest index on ties.
inline std::vector<std::int32_t> assign(const FeatureDataset& centroids, const FeatureDataset& ds) {
  require(ds.dim() == centroids.dim(), "dimension mismatch: data " + std::to_string(ds.dim()) +
                                           " vs centroids " + std::to_string(centroids.dim()));
  require(centroids.size() >= 1, "codebook has no centroids");
  return detail::nearest_centroids(ds, centroids.data(), centroids.size()).labels;
}

inline std::vector<std::int32_t> assign(const Codebook& codebook, const FeatureDataset& ds) {
  return assign(codebook.centroid_set(), ds);
}

}  // namespace ecos
