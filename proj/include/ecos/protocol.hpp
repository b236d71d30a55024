#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <string>
#include <utility>
#include <vector>

#include "ecos/accountant.hpp"
#include "ecos/clustering.hpp"
#include "ecos/dataset.hpp"
#include "ecos/diversity.hpp"
#include "ecos/error.hpp"
#include "ecos/random.hpp"
#include "ecos/scoring.hpp"

namespace ecos {

/// Per-cluster sampling budgets.
struct BudgetPlan {
  std::vector<std::size_t> budgets;
  std::vector<double> pre_round;  // min{size ratio, score ratio} * B
  std::size_t total = 0;
  bool fallback_used = false;  // all scores were zero; size ratios used
  bool saturated = false;      // B covered the whole cloud set
};

/// b_r = min{|C_r| / sum |C_j|, v'_r / sum v'_j} * B, made integral by floor plus
/// largest-remainder distribution of the rounded total, then capped at cluster
/// capacity with any excess handed to uncapped clusters by descending score.
/// A budget that covers the whole cloud set selects every row.
inline BudgetPlan allocate_budgets(const std::vector<std::size_t>& sizes,
                                   const std::vector<double>& scores, std::size_t budget) {
  require(sizes.size() == scores.size(), "cluster sizes and scores differ in length");
  for (auto s : sizes) require(s >= 1, "zero-size cluster");
  for (auto v : scores) require(std::isfinite(v) && v >= 0.0, "scores must be finite and >= 0");

  const std::size_t r = sizes.size();
  BudgetPlan plan;
  plan.budgets.assign(r, 0);
  plan.pre_round.assign(r, 0.0);
  if (r == 0) return plan;

  const double total_size = static_cast<double>(std::accumulate(sizes.begin(), sizes.end(), std::size_t{0}));
  const double total_score = std::accumulate(scores.begin(), scores.end(), 0.0);
  plan.fallback_used = total_score == 0.0;
  const double b = static_cast<double>(budget);
  for (std::size_t k = 0; k < r; ++k) {
    const double by_size = static_cast<double>(sizes[k]) * b / total_size;
    const double by_score = plan.fallback_used ? by_size : scores[k] * b / total_score;
    plan.pre_round[k] = std::min(by_size, by_score);
  }

  if (static_cast<double>(budget) >= total_size) {
    plan.saturated = true;
    plan.budgets = sizes;
    plan.total = static_cast<std::size_t>(total_size);
    return plan;
  }

  constexpr double kSlack = 1e-9;
  std::vector<double> frac(r);
  std::size_t floor_sum = 0;
  double pre_sum = 0.0;
  for (std::size_t k = 0; k < r; ++k) {
    double f = std::floor(plan.pre_round[k]);
    if (plan.pre_round[k] - f > 1.0 - kSlack) f += 1.0;
    plan.budgets[k] = static_cast<std::size_t>(f);
    frac[k] = std::max(0.0, plan.pre_round[k] - f);
    floor_sum += plan.budgets[k];
    pre_sum += plan.pre_round[k];
  }
  const auto target = std::min(budget, static_cast<std::size_t>(std::floor(pre_sum + kSlack)));
  std::size_t leftover = target > floor_sum ? target - floor_sum : 0;

  std::vector<std::size_t> order(r);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t c) { return frac[a] > frac[c]; });
  for (std::size_t k : order) {
    if (leftover == 0 || frac[k] <= kSlack) break;
    ++plan.budgets[k];
    --leftover;
  }

  std::size_t excess = 0;
  for (std::size_t k = 0; k < r; ++k) {
    if (plan.budgets[k] > sizes[k]) {
      excess += plan.budgets[k] - sizes[k];
      plan.budgets[k] = sizes[k];
    }
  }
  if (excess > 0) {
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t c) { return scores[a] > scores[c]; });
    for (std::size_t k : order) {
      if (excess == 0) break;
      if (!plan.fallback_used && scores[k] == 0.0) continue;
      const std::size_t room = sizes[k] - plan.budgets[k];
      const std::size_t give = std::min(room, excess);
      plan.budgets[k] += give;
      excess -= give;
    }
  }
  plan.total = std::accumulate(plan.budgets.begin(), plan.budgets.end(), std::size_t{0});
  return plan;
}

struct Selection {
  std::vector<std::size_t> indices;
  std::vector<std::pair<std::size_t, std::vector<std::size_t>>> per_cluster;
};

/// Sub-seed of cluster r for decompression.
inline std::uint64_t cluster_seed(std::uint64_t seed, std::size_t r) { return derive_seed(seed, r); }

/// Cloud rows of each cluster, ascending.
inline std::vector<std::vector<std::size_t>> cluster_members(const std::vector<std::int32_t>& assignment,
                                                             std::size_t r) {
  std::vector<std::vector<std::size_t>> members(r);
  for (std::size_t i = 0; i < assignment.size(); ++i) {
    require(assignment[i] >= 0 && static_cast<std::size_t>(assignment[i]) < r,
            "assignment index out of range");
    members[static_cast<std::size_t>(assignment[i])].push_back(i);
  }
  return members;
}

/// Budgeted K-Center inside each cloud cluster; results are merged in cluster
/// order.
inline Selection decompress(const FeatureDataset& cloud, const Codebook& codebook,
                            const BudgetPlan& plan, std::uint64_t seed) {
  require(plan.budgets.size() == codebook.r, "plan/codebook mismatch: cluster count differs");
  require(codebook.assignment.size() == cloud.size(), "plan/codebook mismatch: assignment length");
  auto members = cluster_members(codebook.assignment, codebook.r);
  Selection sel;
  for (std::size_t k = 0; k < codebook.r; ++k) {
    require(plan.budgets[k] <= members[k].size(), "plan/codebook mismatch: budget exceeds cluster " +
                                                      std::to_string(k) + " size");
    if (plan.budgets[k] == 0) continue;
    auto picked = kcenter_select(cloud, std::span<const std::size_t>(members[k]), plan.budgets[k],
                                 cluster_seed(seed, k));
    sel.indices.insert(sel.indices.end(), picked.indices.begin(), picked.indices.end());
    sel.per_cluster.emplace_back(k, std::move(picked.indices));
  }
  return sel;
}

/// Payload sizes of one protocol round. Headers are counted separately.
struct WireStats {
  std::size_t bytes_down = 0;
  std::size_t bytes_up = 0;
  std::size_t header_down = 0;
  std::size_t header_up = 0;
  int quant_bits = 32;
};

// Fixed message headers: magic, version, r, dim and bit width (16 bytes);
// the uplink adds sigma, gamma, s and sensitivity as f32. Quantized downlinks
// carry a per-dimension (min, scale) pair as f32.
inline constexpr std::size_t kFixedHeaderBytes = 16;
inline constexpr std::size_t kUplinkParamBytes = 16;

inline WireStats wire_stats(std::size_t r, std::size_t d_e, int quant_bits) {
  require(quant_bits == 8 || quant_bits == 32, "quant_bits must be 8 or 32");
  WireStats w;
  w.quant_bits = quant_bits;
  const std::size_t bytes_per_scalar = static_cast<std::size_t>(quant_bits) / 8;
  w.bytes_down = r * d_e * bytes_per_scalar;
  w.bytes_up = r * bytes_per_scalar;
  w.header_down = kFixedHeaderBytes + (quant_bits == 8 ? 8 * d_e : 0);
  w.header_up = kFixedHeaderBytes + kUplinkParamBytes;
  return w;
}

/// Ledger of one scoring query. Depends only on the noise mechanism, never on
/// R, s, B or the confidence flag.
inline PrivacyLedger scoring_ledger(double sigma, double gamma, double sensitivity,
                                    SubsampleMode mode) {
  require(gamma > 0.0 && gamma <= 1.0, "gamma must lie in (0, 1]");
  PrivacyLedger ledger(gamma == 1.0 ? default_orders() : extended_orders());
  if (sigma == 0.0) {
    ledger.non_private = true;
    return ledger;
  }
  LedgerEntry e;
  e.mechanism = gamma == 1.0 ? "gaussian" : "subsampled_gaussian";
  e.sigma = sigma;
  e.gamma = gamma;
  e.sensitivity = sensitivity;
  e.subsample_mode = to_string(mode);
  e.curve = subsampled_gaussian_rdp(sigma, sensitivity, gamma, ledger.orders);
  return compose(std::move(ledger), std::move(e));
}

}  // namespace ecos
