#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>
#include <vector>

#include "ecos/error.hpp"

namespace ecos {

/// RDP guarantee eps(alpha) at a grid of orders alpha > 1.
struct RdpCurve {
  std::vector<double> orders;
  std::vector<double> eps;

  bool empty() const { return orders.empty(); }
  friend bool operator==(const RdpCurve&, const RdpCurve&) = default;
};

/// Integer orders 2..256 plus 1.25, 1.5 and 1.75.
inline std::vector<double> default_orders() {
  std::vector<double> o = {1.25, 1.5, 1.75};
  for (int a = 2; a <= 256; ++a) o.push_back(a);
  return o;
}

/// Integer orders 2..256.
inline std::vector<double> integer_orders() {
  std::vector<double> o;
  for (int a = 2; a <= 256; ++a) o.push_back(a);
  return o;
}

/// Integer orders 2..256 followed by a geometric tail up to 8192. The tail is
/// needed where the optimal conversion order is large (small gamma, large sigma).
inline std::vector<double> extended_orders() {
  auto o = integer_orders();
  for (double base = 256; base < 8192; base *= 2) {
    for (double f : {1.25, 1.5, 1.75, 2.0}) o.push_back(base * f);
  }
  return o;
}

/// Gaussian mechanism: eps(alpha) = alpha * sensitivity^2 / (2 sigma^2).
/// sigma == 0 has no finite guarantee and is rejected.
inline RdpCurve gaussian_rdp(double sigma, double sensitivity, const std::vector<double>& orders) {
  require(sigma > 0.0, "sigma must be > 0 for a finite privacy guarantee (sigma = 0 is non-private)");
  require(sensitivity > 0.0, "sensitivity must be > 0");
  RdpCurve c{orders, {}};
  c.eps.reserve(orders.size());
  for (double a : orders) {
    require(a > 1.0, "RDP orders must be > 1");
    c.eps.push_back(a * sensitivity * sensitivity / (2.0 * sigma * sigma));
  }
  return c;
}

namespace detail {

inline double log_add(double a, double b) {
  if (a == -std::numeric_limits<double>::infinity()) return b;
  if (b == -std::numeric_limits<double>::infinity()) return a;
  const double hi = std::max(a, b);
  return hi + std::log1p(std::exp(std::min(a, b) - hi));
}

// log A_alpha for the Poisson-sampled Gaussian mechanism at integer alpha:
//   A = sum_k C(alpha,k) (1-q)^(alpha-k) q^k exp((k^2-k) / (2 z^2))
// with z the noise multiplier sigma / sensitivity.
inline double log_a_int(double q, double z, long alpha) {
  double acc = -std::numeric_limits<double>::infinity();
  const double lq = std::log(q);
  const double l1q = std::log1p(-q);
  const double la1 = std::lgamma(static_cast<double>(alpha) + 1.0);
  for (long k = 0; k <= alpha; ++k) {
    const double kd = static_cast<double>(k);
    const double log_binom =
        la1 - std::lgamma(kd + 1.0) - std::lgamma(static_cast<double>(alpha - k) + 1.0);
    const double term = log_binom + kd * lq + static_cast<double>(alpha - k) * l1q +
                        (kd * kd - kd) / (2.0 * z * z);
    acc = log_add(acc, term);
  }
  return acc;
}

}  // namespace detail

/// RDP of the Poisson-subsampled Gaussian mechanism at integer orders, via the
/// binomial expansion of the Renyi moment. gamma == 1 is the plain Gaussian
/// mechanism and accepts any order.
inline RdpCurve subsampled_gaussian_rdp(double sigma, double sensitivity, double gamma,
                                        const std::vector<double>& orders) {
  require(gamma > 0.0 && gamma <= 1.0, "gamma must lie in (0, 1]");
  if (gamma == 1.0) return gaussian_rdp(sigma, sensitivity, orders);
  require(sigma > 0.0, "sigma must be > 0 for a finite privacy guarantee (sigma = 0 is non-private)");
  require(sensitivity > 0.0, "sensitivity must be > 0");
  const double z = sigma / sensitivity;
  RdpCurve c{orders, {}};
  c.eps.reserve(orders.size());
  for (double a : orders) {
    require(a >= 2.0 && a == std::floor(a),
            "exact subsampled accounting needs integer orders >= 2 (got " + std::to_string(a) + ")");
    const auto alpha = static_cast<long>(a);
    c.eps.push_back(std::max(0.0, detail::log_a_int(gamma, z, alpha) / (a - 1.0)));
  }
  return c;
}

/// The asymptotic per-order ceiling 24 gamma^2 alpha / sigma^2 for the
/// subsampled Gaussian mechanism, with sigma the noise multiplier.
inline double asymptotic_rdp_bound(double sigma, double gamma, double alpha) {
  return 24.0 * gamma * gamma * alpha / (sigma * sigma);
}

/// Largest order for which the asymptotic ceiling holds: sigma^2 log(1/gamma) / 2.
inline double asymptotic_bound_max_order(double sigma, double gamma) {
  return sigma * sigma * std::log(1.0 / gamma) / 2.0;
}

struct DpGuarantee {
  double epsilon;
  double best_alpha;
};

/// (epsilon, delta)-DP from an RDP curve: min over orders of
/// eps(alpha) + log(1/delta) / (alpha - 1).
inline DpGuarantee rdp_to_dp(const RdpCurve& curve, double delta) {
  require(!curve.empty(), "RDP curve is empty");
  require(delta > 0.0 && delta < 1.0, "delta must lie in (0, 1)");
  const double log_inv_delta = std::log(1.0 / delta);
  DpGuarantee best{std::numeric_limits<double>::infinity(), 0.0};
  for (std::size_t i = 0; i < curve.orders.size(); ++i) {
    const double a = curve.orders[i];
    const double e = curve.eps[i] + log_inv_delta / (a - 1.0);
    if (e < best.epsilon) best = {e, a};
  }
  return best;
}

/// Validity domain of the closed-form bound: gamma <= min{0.1, sigma sqrt(log(1/delta)/6)}
/// and sigma >= 2 sqrt(5).
inline bool closed_form_valid(double sigma, double gamma, double delta) {
  if (!(sigma > 0.0 && gamma > 0.0 && delta > 0.0 && delta < 1.0)) return false;
  return gamma <= std::min(0.1, sigma * std::sqrt(std::log(1.0 / delta) / 6.0)) &&
         sigma >= 2.0 * std::sqrt(5.0);
}

/// The order at which the closed form is evaluated,
/// 1 + sqrt(log(1/delta)) / sqrt(24 gamma^2 / sigma^2).
inline double closed_form_order(double sigma, double gamma, double delta) {
  return 1.0 + std::sqrt(std::log(1.0 / delta)) * sigma / (std::sqrt(24.0) * gamma);
}

/// Closed-form epsilon for one subsampled scoring query:
/// 24 gamma^2 / sigma^2 + 4 (gamma / sigma) sqrt(6 log(1/delta)).
inline double closed_form_bound(double sigma, double gamma, double delta) {
  require(sigma > 0.0 && gamma > 0.0, "sigma and gamma must be > 0");
  require(delta > 0.0 && delta < 1.0, "delta must lie in (0, 1)");
  require(closed_form_valid(sigma, gamma, delta),
          "closed-form bound out of range: needs gamma <= min{0.1, sigma*sqrt(log(1/delta)/6)} "
          "and sigma >= 2*sqrt(5)");
  return 24.0 * gamma * gamma / (sigma * sigma) +
         4.0 * (gamma / sigma) * std::sqrt(6.0 * std::log(1.0 / delta));
}

struct LedgerEntry {
  std::string mechanism;
  double sigma = 0.0;
  double gamma = 1.0;
  double sensitivity = 0.0;
  std::string subsample_mode;
  RdpCurve curve;

  friend bool operator==(const LedgerEntry&, const LedgerEntry&) = default;
};

/// Accumulated RDP costs; `composed` is the per-order sum of all entries.
struct PrivacyLedger {
  std::vector<double> orders;
  std::vector<LedgerEntry> entries;
  RdpCurve composed;
  // Set when a query ran without noise: no finite guarantee exists.
  bool non_private = false;

  explicit PrivacyLedger(std::vector<double> grid = default_orders())
      : orders(grid), composed{grid, std::vector<double>(grid.size(), 0.0)} {}

  DpGuarantee epsilon(double delta) const {
    if (non_private) return {std::numeric_limits<double>::infinity(), 0.0};
    return rdp_to_dp(composed, delta);
  }

  friend bool operator==(const PrivacyLedger&, const PrivacyLedger&) = default;
};

/// Adds a curve to the ledger. Orders must match the ledger grid exactly.
inline PrivacyLedger compose(PrivacyLedger ledger, LedgerEntry entry) {
  require(entry.curve.orders == ledger.orders, "RDP order grids do not match");
  for (std::size_t i = 0; i < ledger.orders.size(); ++i) {
    ledger.composed.eps[i] += entry.curve.eps[i];
  }
  ledger.entries.push_back(std::move(entry));
  return ledger;
}

inline PrivacyLedger compose(PrivacyLedger ledger, const RdpCurve& curve) {
  return compose(std::move(ledger), LedgerEntry{"external", 0.0, 1.0, 0.0, "none", curve});
}

}  // namespace ecos
