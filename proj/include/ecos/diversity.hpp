#pragma once

#include <cstdint>
#include <limits>
#include <numeric>
#include <optional>
#include <span>
#include <vector>

#include "ecos/dataset.hpp"
#include "ecos/error.hpp"
#include "ecos/random.hpp"

namespace ecos {

struct DiverseSample {
  std::vector<std::size_t> indices;  // pool row indices in pick order
  std::vector<double> radii;         // covering radius (squared) after each pick
};

/// Farthest-first traversal over `candidates` (pool row indices) starting from
/// `candidates[first]`. Ties go to the lowest pool index.
inline DiverseSample kcenter_select_from(const FeatureDataset& pool,
                                         std::span<const std::size_t> candidates,
                                         std::size_t budget, std::size_t first) {
  require(!candidates.empty(), "k-center pool is empty");
  require(budget >= 1, "k-center budget must be >= 1");
  require(first < candidates.size(), "first pick out of range");
  const std::size_t m = candidates.size();
  const std::size_t take = std::min(budget, m);

  DiverseSample out;
  out.indices.reserve(take);
  out.radii.reserve(take);
  std::vector<double> mind(m, std::numeric_limits<double>::infinity());
  std::vector<bool> chosen(m, false);

  std::size_t pick = first;
  for (std::size_t step = 0; step < take; ++step) {
    chosen[pick] = true;
    out.indices.push_back(candidates[pick]);
    auto anchor = pool.row(candidates[pick]);
    double radius = 0.0;
    std::size_t next = m;
    double next_d = -1.0;
    for (std::size_t i = 0; i < m; ++i) {
      mind[i] = std::min(mind[i], squared_distance(pool.row(candidates[i]), anchor));
      radius = std::max(radius, mind[i]);
      if (chosen[i]) continue;
      if (mind[i] > next_d || (mind[i] == next_d && candidates[i] < candidates[next])) {
        next_d = mind[i];
        next = i;
      }
    }
    out.radii.push_back(radius);
    pick = next;
  }
  return out;
}

/// Greedy K-Center selection. The first pick is uniform over the candidate set
/// (the whole pool when `subset` is empty); every later pick is the candidate
/// farthest from the already-selected set.
inline DiverseSample kcenter_select(const FeatureDataset& pool,
                                    std::optional<std::span<const std::size_t>> subset,
                                    std::size_t budget, std::uint64_t seed) {
  std::vector<std::size_t> all;
  std::span<const std::size_t> candidates;
  if (subset) {
    candidates = *subset;
  } else {
    all.resize(pool.size());
    std::iota(all.begin(), all.end(), std::size_t{0});
    candidates = all;
  }
  for (auto idx : candidates) require(idx < pool.size(), "k-center subset index out of range");
  require(!candidates.empty(), "k-center pool is empty");
  require(budget >= 1, "k-center budget must be >= 1");
  Rng rng(seed);
  const auto first = static_cast<std::size_t>(rng.below(candidates.size()));
  return kcenter_select_from(pool, candidates, budget, first);
}

/// Uniform sample without replacement, returned in draw order.
inline std::vector<std::size_t> random_select(std::size_t pool_size, std::size_t budget,
                                              std::uint64_t seed) {
  require(budget <= pool_size, "budget exceeds pool size");
  std::vector<std::size_t> perm(pool_size);
  std::iota(perm.begin(), perm.end(), std::size_t{0});
  Rng rng(seed);
  for (std::size_t i = 0; i < budget; ++i) {
    const auto j = i + static_cast<std::size_t>(rng.below(pool_size - i));
    std::swap(perm[i], perm[j]);
  }
  perm.resize(budget);
  return perm;
}

}  // namespace ecos
