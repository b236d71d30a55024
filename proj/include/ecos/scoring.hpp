#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <numeric>
#include <vector>

#include "ecos/clustering.hpp"
#include "ecos/dataset.hpp"
#include "ecos/error.hpp"
#include "ecos/random.hpp"

namespace ecos {

enum class SubsampleMode { Poisson, WithReplacement };

inline const char* to_string(SubsampleMode m) {
  return m == SubsampleMode::Poisson ? "poisson" : "with_replacement";
}

inline SubsampleMode parse_subsample_mode(const std::string& s) {
  if (s == "poisson") return SubsampleMode::Poisson;
  if (s == "with_replacement") return SubsampleMode::WithReplacement;
  throw InvalidArgument("unknown subsample mode '" + s + "'");
}

/// psi_s(x) = x^s.
struct ScaleFn {
  double s = 1.0;
  double operator()(double x) const { return s == 1.0 ? x : std::pow(x, s); }
};

/// The client's uplink: noisy, scaled coverage scores and the mechanism
/// parameters that produced them. `seed` stays on the client.
struct ScoreReport {
  std::size_t r = 0;
  std::vector<double> scores;
  double sigma = 0.0;
  double gamma = 1.0;
  double scale_s = 1.0;
  double sensitivity = 2.0;
  std::uint64_t seed = 0;
  bool confidence_mode = false;
  SubsampleMode subsample_mode = SubsampleMode::Poisson;
};

/// v[r] = number of client rows whose nearest centroid is r.
inline std::vector<std::int64_t> coverage_scores(const FeatureDataset& client,
                                                 const FeatureDataset& centroids) {
  std::vector<std::int64_t> v(centroids.size(), 0);
  if (client.empty()) return v;
  for (auto k : assign(centroids, client)) ++v[static_cast<std::size_t>(k)];
  return v;
}

inline std::vector<std::int64_t> coverage_scores(const FeatureDataset& client, const Codebook& cb) {
  return coverage_scores(client, cb.centroid_set());
}

namespace detail {

inline void check_mechanism(double sigma, double gamma) {
  require(std::isfinite(sigma) && sigma >= 0.0, "sigma must be >= 0");
  require(gamma > 0.0 && gamma <= 1.0, "gamma must lie in (0, 1]");
}

// Rows kept by the subsampler, as a multiset of row positions in [0, n).
inline std::vector<std::size_t> subsample_rows(std::size_t n, double gamma, SubsampleMode mode,
                                               Rng& rng) {
  std::vector<std::size_t> kept;
  if (gamma == 1.0) {
    kept.resize(n);
    std::iota(kept.begin(), kept.end(), std::size_t{0});
    return kept;
  }
  if (mode == SubsampleMode::Poisson) {
    for (std::size_t i = 0; i < n; ++i) {
      if (rng.bernoulli(gamma)) kept.push_back(i);
    }
  } else if (n > 0) {
    const auto m = static_cast<std::size_t>(std::ceil(gamma * static_cast<double>(n)));
    for (std::size_t i = 0; i < m; ++i) kept.push_back(static_cast<std::size_t>(rng.below(n)));
  }
  return kept;
}

inline std::vector<double> add_noise_and_clamp(std::vector<double> v, double sigma, Rng& rng) {
  if (sigma == 0.0) return v;
  for (double& x : v) x = std::max(0.0, x + sigma * rng.normal());
  return v;
}

}  // namespace detail

/// Subsamples (when gamma < 1), adds N(0, sigma^2) per coordinate and clamps at
/// zero. Works on counts directly: rows are laid out cluster by cluster, which
/// leaves the distribution of the subsampled counts unchanged.
inline std::vector<double> privatize_scores(const std::vector<std::int64_t>& v, double sigma,
                                            double gamma, std::uint64_t seed,
                                            SubsampleMode mode = SubsampleMode::Poisson) {
  detail::check_mechanism(sigma, gamma);
  Rng rng(seed);
  std::vector<double> counts(v.begin(), v.end());
  if (gamma < 1.0) {
    std::vector<std::size_t> owner;
    for (std::size_t k = 0; k < v.size(); ++k) {
      require(v[k] >= 0, "counts must be non-negative");
      owner.insert(owner.end(), static_cast<std::size_t>(v[k]), k);
    }
    std::fill(counts.begin(), counts.end(), 0.0);
    for (auto row : detail::subsample_rows(owner.size(), gamma, mode, rng)) counts[owner[row]] += 1.0;
  }
  return detail::add_noise_and_clamp(std::move(counts), sigma, rng);
}

inline std::vector<double> scale_scores(const std::vector<double>& noisy, double s) {
  require(s > 0.0, "scale exponent s must be > 0");
  ScaleFn psi{s};
  std::vector<double> out;
  out.reserve(noisy.size());
  for (double x : noisy) {
    require(x >= 0.0, "scores must be non-negative before scaling");
    out.push_back(psi(x));
  }
  return out;
}

struct ConfidenceScores {
  std::vector<double> confidence;      // top-1 minus top-2 class count per cluster
  std::vector<std::int64_t> filtered;  // coverage counts over the kept rows
  std::vector<bool> kept;              // per client row
  std::vector<double> combined;        // (confidence + filtered) / 2, before scaling
};

namespace detail {

inline std::vector<double> cluster_confidence(const std::vector<std::int32_t>& cluster,
                                              const std::vector<std::int32_t>& labels,
                                              std::span<const std::size_t> rows, std::size_t r) {
  std::vector<std::map<std::int32_t, std::int64_t>> votes(r);
  for (auto i : rows) ++votes[static_cast<std::size_t>(cluster[i])][labels[i]];
  std::vector<double> conf(r, 0.0);
  for (std::size_t k = 0; k < r; ++k) {
    std::int64_t top1 = 0, top2 = 0;
    for (const auto& [label, count] : votes[k]) {
      if (count > top1) {
        top2 = top1;
        top1 = count;
      } else if (count > top2) {
        top2 = count;
      }
    }
    conf[k] = static_cast<double>(top1 - top2);
  }
  return conf;
}

}  // namespace detail

/// Label-aware scoring. Per cluster the confidence is the vote gap between the
/// two most frequent classes. Per class, only the top keep_fraction of rows
/// (ranked by their cluster's confidence) are kept when recounting coverage.
inline ConfidenceScores confidence_scores(const FeatureDataset& client,
                                          const FeatureDataset& centroids, double keep_fraction,
                                          std::span<const std::size_t> rows) {
  require(client.has_labels(), "confidence scoring needs client labels");
  require(keep_fraction > 0.0 && keep_fraction <= 1.0, "keep_fraction must lie in (0, 1]");
  const std::size_t r = centroids.size();
  const auto& labels = client.labels();
  std::vector<std::int32_t> cluster;
  if (!client.empty()) cluster = assign(centroids, client);

  ConfidenceScores out;
  out.confidence = detail::cluster_confidence(cluster, labels, rows, r);

  std::map<std::int32_t, std::vector<std::size_t>> by_class;
  for (auto i : rows) by_class[labels[i]].push_back(i);
  out.kept.assign(client.size(), false);
  out.filtered.assign(r, 0);
  for (auto& [label, members] : by_class) {
    std::stable_sort(members.begin(), members.end(), [&](std::size_t a, std::size_t b) {
      return out.confidence[cluster[a]] > out.confidence[cluster[b]];
    });
    const auto keep = static_cast<std::size_t>(
        std::ceil(keep_fraction * static_cast<double>(members.size()) - 1e-9));
    for (std::size_t j = 0; j < keep; ++j) {
      out.kept[members[j]] = true;
      ++out.filtered[static_cast<std::size_t>(cluster[members[j]])];
    }
  }
  out.combined.resize(r);
  for (std::size_t k = 0; k < r; ++k) {
    out.combined[k] = (out.confidence[k] + static_cast<double>(out.filtered[k])) / 2.0;
  }
  return out;
}

inline ConfidenceScores confidence_scores(const FeatureDataset& client,
                                          const FeatureDataset& centroids,
                                          double keep_fraction = 0.7) {
  std::vector<std::size_t> rows(client.size());
  std::iota(rows.begin(), rows.end(), std::size_t{0});
  return confidence_scores(client, centroids, keep_fraction, rows);
}

/// MAC count of client-side scoring: c_phi * n + (d_e + 1) * R * n.
inline double client_cost_estimate(double client_n, double r, double d_e, double c_phi) {
  require(client_n >= 0 && r >= 0 && d_e >= 0 && c_phi >= 0, "cost inputs must be >= 0");
  return c_phi * client_n + (d_e + 1.0) * r * client_n;
}

struct ScoringParams {
  double sigma = 25.0;
  double gamma = 1.0;
  double scale_s = 1.0;
  double sensitivity = 2.0;
  bool confidence_mode = false;
  double keep_fraction = 0.7;
  SubsampleMode subsample_mode = SubsampleMode::Poisson;
};

/// Full client step: partition by the downloaded centroids, count, privatize
/// and scale.
inline ScoreReport score_client(const FeatureDataset& client, const FeatureDataset& centroids,
                                const ScoringParams& p, std::uint64_t seed) {
  detail::check_mechanism(p.sigma, p.gamma);
  require(p.scale_s > 0.0, "scale exponent s must be > 0");
  require(p.sensitivity > 0.0, "sensitivity must be > 0");
  require(client.empty() || client.dim() == centroids.dim(), "dimension mismatch: client " +
                                               std::to_string(client.dim()) + " vs centroids " +
                                               std::to_string(centroids.dim()));
  ScoreReport rep;
  rep.r = centroids.size();
  rep.sigma = p.sigma;
  rep.gamma = p.gamma;
  rep.scale_s = p.scale_s;
  rep.sensitivity = p.sensitivity;
  rep.seed = seed;
  rep.confidence_mode = p.confidence_mode;
  rep.subsample_mode = p.subsample_mode;

  std::vector<double> noisy;
  if (!p.confidence_mode) {
    noisy = privatize_scores(coverage_scores(client, centroids), p.sigma, p.gamma, seed,
                             p.subsample_mode);
  } else {
    Rng rng(seed);
    auto rows = detail::subsample_rows(client.size(), p.gamma, p.subsample_mode, rng);
    auto conf = confidence_scores(client, centroids, p.keep_fraction, rows);
    noisy = detail::add_noise_and_clamp(std::move(conf.combined), p.sigma, rng);
  }
  rep.scores = scale_scores(noisy, p.scale_s);
  return rep;
}

}  // namespace ecos
