#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <numeric>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "ecos/dataset.hpp"
#include "ecos/diversity.hpp"
#include "ecos/error.hpp"
#include "ecos/random.hpp"
#include "ecos/run.hpp"

namespace ecos {

/// Mean over client rows of the squared distance to the nearest selected row.
inline double proximity_metric(const FeatureDataset& selection, const FeatureDataset& client) {
  require(!selection.empty(), "selection is empty");
  if (client.empty()) return 0.0;
  double sum = 0.0;
  for (const auto& nr : pairwise_min_dist(client, selection)) sum += nr.distance;
  return sum / static_cast<double>(client.size());
}

/// Covering radius: max over pool rows of the squared distance to the nearest
/// selected row. Lower means better coverage.
inline double diversity_metric(const FeatureDataset& selection, const FeatureDataset& pool) {
  require(!selection.empty(), "selection is empty");
  double worst = 0.0;
  for (const auto& nr : pairwise_min_dist(pool, selection)) worst = std::max(worst, nr.distance);
  return worst;
}

/// Fraction of selected rows whose domain tag is one of the client's.
inline double id_tpr(std::span<const std::size_t> selection, const FeatureDataset& cloud,
                     const std::set<std::int32_t>& client_domains) {
  require(cloud.has_domains(), "cloud dataset has no domain tags");
  require(!selection.empty(), "selection is empty");
  const auto& dom = cloud.domains();
  std::size_t hits = 0;
  for (auto i : selection) {
    require(i < cloud.size(), "selection index out of range");
    hits += client_domains.count(dom[i]);
  }
  return static_cast<double>(hits) / static_cast<double>(selection.size());
}

/// Mean over selected centroids (clusters with a nonzero budget) of the squared
/// distance to the nearest selected sample.
inline double centroid_proximity(const Codebook& cb, const Selection& sel,
                                 const FeatureDataset& cloud) {
  if (sel.indices.empty()) return std::numeric_limits<double>::quiet_NaN();
  std::vector<float> rows;
  for (const auto& [k, idx] : sel.per_cluster) {
    auto c = cb.centroid(k);
    rows.insert(rows.end(), c.begin(), c.end());
  }
  FeatureDataset centroids(sel.per_cluster.size(), cb.dim, std::move(rows));
  return proximity_metric(cloud.subset(sel.indices), centroids);
}

// --- synthetic data --------------------------------------------------------

struct SynthSpec {
  std::size_t domains = 5;
  std::size_t dim = 8;
  std::size_t samples_per_domain = 2000;
  std::vector<double> blob_std = {1.0};  // one entry, or one per domain
  double separation = 10.0;              // minimum pairwise distance of domain means
  std::vector<std::int32_t> client_domains = {0};
  std::size_t client_size = 500;
  bool overlap = false;  // client rows are copies of cloud rows
  std::size_t classes = 0;
  double class_offset = 3.0;
  std::uint64_t seed = 1;
};

struct SynthData {
  FeatureDataset cloud;
  FeatureDataset client;
  std::vector<std::vector<double>> means;
};

/// Isotropic Gaussian blob per domain; the client is drawn from its designated
/// domains. With `classes` > 0 each row also gets a class label whose shared
/// offset is added to the domain mean.
inline SynthData generate_synthetic(const SynthSpec& spec) {
  require(spec.domains >= 1, "need at least one domain");
  require(spec.dim >= 1, "dim must be >= 1");
  require(spec.blob_std.size() == 1 || spec.blob_std.size() == spec.domains,
          "blob_std needs one entry or one per domain");
  for (double s : spec.blob_std) require(s >= 0.0, "blob_std must be >= 0");
  require(spec.separation >= 0.0, "separation must be >= 0");
  require(!spec.client_domains.empty(), "need at least one client domain");
  for (auto d : spec.client_domains) {
    require(d >= 0 && static_cast<std::size_t>(d) < spec.domains, "client domain out of range");
  }
  const std::set<std::int32_t> client_set(spec.client_domains.begin(), spec.client_domains.end());
  if (spec.overlap) {
    require(spec.client_size <= client_set.size() * spec.samples_per_domain,
            "client size exceeds the available client-domain samples");
  }

  Rng rng(spec.seed);
  const std::size_t dim = spec.dim;
  std::vector<std::vector<double>> means;
  for (std::size_t d = 0; d < spec.domains; ++d) {
    for (int attempt = 0;; ++attempt) {
      require(attempt < 10000, "cannot place domain means at the requested separation");
      std::vector<double> m(dim);
      for (double& x : m) x = spec.separation * rng.normal();
      bool ok = true;
      for (const auto& other : means) {
        double d2 = 0.0;
        for (std::size_t j = 0; j < dim; ++j) d2 += (m[j] - other[j]) * (m[j] - other[j]);
        ok = ok && std::sqrt(d2) >= spec.separation;
      }
      if (ok) {
        means.push_back(std::move(m));
        break;
      }
    }
  }
  std::vector<std::vector<double>> class_shift(spec.classes, std::vector<double>(dim));
  for (auto& shift : class_shift) {
    double norm = 0.0;
    for (double& x : shift) {
      x = rng.normal();
      norm += x * x;
    }
    norm = std::sqrt(norm);
    for (double& x : shift) x = norm > 0.0 ? x * spec.class_offset / norm : 0.0;
  }
  auto stddev = [&](std::size_t d) { return spec.blob_std.size() == 1 ? spec.blob_std[0] : spec.blob_std[d]; };
  auto draw = [&](std::size_t d, std::int32_t label, std::vector<float>& out) {
    for (std::size_t j = 0; j < dim; ++j) {
      double x = means[d][j] + stddev(d) * rng.normal();
      if (spec.classes > 0) x += class_shift[static_cast<std::size_t>(label)][j];
      out.push_back(static_cast<float>(x));
    }
  };

  const std::size_t n = spec.domains * spec.samples_per_domain;
  std::vector<float> data;
  data.reserve(n * dim);
  std::vector<std::int32_t> labels, domains;
  for (std::size_t d = 0; d < spec.domains; ++d) {
    for (std::size_t i = 0; i < spec.samples_per_domain; ++i) {
      const auto label = spec.classes > 0 ? static_cast<std::int32_t>(rng.below(spec.classes)) : 0;
      draw(d, label, data);
      labels.push_back(label);
      domains.push_back(static_cast<std::int32_t>(d));
    }
  }
  std::optional<std::vector<std::int32_t>> cloud_labels;
  if (spec.classes > 0) cloud_labels = labels;
  SynthData out{FeatureDataset(n, dim, data, cloud_labels, domains), {}, means};

  if (spec.overlap) {
    std::vector<std::size_t> pool;
    for (std::size_t i = 0; i < n; ++i) {
      if (client_set.count(domains[i])) pool.push_back(i);
    }
    auto pick = random_select(pool.size(), spec.client_size, rng.next());
    std::vector<std::size_t> rows;
    for (auto p : pick) rows.push_back(pool[p]);
    out.client = out.cloud.subset(rows);
  } else {
    std::vector<float> cdata;
    std::vector<std::int32_t> clabels, cdomains;
    const std::vector<std::int32_t> cds(client_set.begin(), client_set.end());
    for (std::size_t i = 0; i < spec.client_size; ++i) {
      const auto d = cds[i % cds.size()];
      const auto label = spec.classes > 0 ? static_cast<std::int32_t>(rng.below(spec.classes)) : 0;
      draw(static_cast<std::size_t>(d), label, cdata);
      clabels.push_back(label);
      cdomains.push_back(d);
    }
    std::optional<std::vector<std::int32_t>> lab;
    if (spec.classes > 0) lab = std::move(clabels);
    out.client = FeatureDataset(spec.client_size, dim, std::move(cdata), std::move(lab), std::move(cdomains));
  }
  return out;
}

/// Fraction of rows whose cluster's majority domain equals their own domain.
inline double assignment_purity(const std::vector<std::int32_t>& assignment,
                                const std::vector<std::int32_t>& domains, std::size_t r) {
  require(assignment.size() == domains.size(), "assignment/domains length mismatch");
  std::vector<std::map<std::int32_t, std::size_t>> votes(r);
  for (std::size_t i = 0; i < assignment.size(); ++i) ++votes[assignment[i]][domains[i]];
  std::size_t agree = 0;
  for (const auto& v : votes) {
    std::size_t best = 0;
    for (const auto& [d, c] : v) best = std::max(best, c);
    agree += best;
  }
  return assignment.empty() ? 1.0 : static_cast<double>(agree) / static_cast<double>(assignment.size());
}

// --- method comparison -----------------------------------------------------

struct EvalReport {
  std::string method;
  std::uint64_t seed = 0;
  std::size_t budget = 0;
  double proximity = 0.0;
  double diversity = 0.0;
  double centroid_proximity = std::numeric_limits<double>::quiet_NaN();
  double id_tpr = std::numeric_limits<double>::quiet_NaN();
  std::size_t effective_samples = 0;
  double epsilon = 0.0;
  std::size_t bytes_down = 0;
  std::size_t bytes_up = 0;
  std::vector<std::size_t> indices;
};

struct MethodSummary {
  std::string method;
  std::size_t budget = 0;
  double proximity_mean = 0, proximity_std = 0;
  double diversity_mean = 0, diversity_std = 0;
  double id_tpr_mean = 0, id_tpr_std = 0;
  double effective_mean = 0;
};

inline constexpr std::uint64_t kRandomStream = 4;
inline constexpr std::uint64_t kKCenterStream = 5;

/// Evaluates one method on one seed. `base` carries the protocol parameters
/// used by the "ecos" method.
inline EvalReport evaluate_method(const std::string& method, const FeatureDataset& cloud,
                                  const FeatureDataset& client, std::size_t budget,
                                  std::uint64_t seed, const RunConfig& base,
                                  const std::set<std::int32_t>& client_domains) {
  require(budget >= 1, "budget must be >= 1");
  require(budget <= cloud.size(), "budget exceeds cloud size");
  EvalReport rep;
  rep.method = method;
  rep.seed = seed;
  rep.budget = budget;
  if (method == "ecos") {
    RunConfig cfg = base;
    cfg.seed = seed;
    cfg.budget = budget;
    auto res = run_protocol(cloud, client, cfg);
    rep.indices = res.cloud.selection.indices;
    rep.epsilon = res.cloud.ledger.epsilon(cfg.delta).epsilon;
    rep.bytes_down = res.cloud.wire.bytes_down;
    rep.bytes_up = res.cloud.wire.bytes_up;
    rep.centroid_proximity = centroid_proximity(res.codebook, res.cloud.selection, cloud);
  } else if (method == "random") {
    rep.indices = random_select(cloud.size(), budget, derive_seed(seed, kRandomStream));
  } else if (method == "kcenter") {
    rep.indices = kcenter_select(cloud, std::nullopt, budget, derive_seed(seed, kKCenterStream)).indices;
  } else {
    throw InvalidArgument("unknown method '" + method + "' (expected ecos, random or kcenter)");
  }
  rep.effective_samples = rep.indices.size();
  if (rep.indices.empty()) {
    rep.proximity = rep.diversity = std::numeric_limits<double>::quiet_NaN();
    return rep;
  }
  auto sel = cloud.subset(rep.indices);
  rep.proximity = proximity_metric(sel, client);
  rep.diversity = diversity_metric(sel, cloud);
  if (cloud.has_domains() && !client_domains.empty()) {
    rep.id_tpr = id_tpr(rep.indices, cloud, client_domains);
  }
  return rep;
}

inline std::vector<EvalReport> compare_methods(const FeatureDataset& cloud,
                                               const FeatureDataset& client,
                                               const std::vector<std::size_t>& budgets,
                                               const std::vector<std::uint64_t>& seeds,
                                               const std::vector<std::string>& methods,
                                               const RunConfig& base,
                                               const std::set<std::int32_t>& client_domains) {
  std::vector<EvalReport> out;
  for (auto b : budgets) {
    for (const auto& m : methods) {
      for (auto s : seeds) out.push_back(evaluate_method(m, cloud, client, b, s, base, client_domains));
    }
  }
  return out;
}

inline std::vector<MethodSummary> summarize(const std::vector<EvalReport>& reports) {
  std::map<std::pair<std::size_t, std::string>, std::vector<const EvalReport*>> groups;
  std::vector<std::pair<std::size_t, std::string>> order;
  for (const auto& r : reports) {
    auto key = std::make_pair(r.budget, r.method);
    if (!groups.count(key)) order.push_back(key);
    groups[key].push_back(&r);
  }
  auto stats = [](const std::vector<double>& xs) {
    double mean = 0.0;
    for (double x : xs) mean += x;
    mean /= static_cast<double>(xs.size());
    double var = 0.0;
    for (double x : xs) var += (x - mean) * (x - mean);
    return std::make_pair(mean, xs.size() > 1 ? std::sqrt(var / static_cast<double>(xs.size() - 1)) : 0.0);
  };
  std::vector<MethodSummary> out;
  for (const auto& key : order) {
    const auto& g = groups[key];
    std::vector<double> prox, div, tpr, eff;
    for (const auto* r : g) {
      prox.push_back(r->proximity);
      div.push_back(r->diversity);
      tpr.push_back(r->id_tpr);
      eff.push_back(static_cast<double>(r->effective_samples));
    }
    MethodSummary s;
    s.method = key.second;
    s.budget = key.first;
    std::tie(s.proximity_mean, s.proximity_std) = stats(prox);
    std::tie(s.diversity_mean, s.diversity_std) = stats(div);
    std::tie(s.id_tpr_mean, s.id_tpr_std) = stats(tpr);
    s.effective_mean = stats(eff).first;
    out.push_back(s);
  }
  return out;
}

inline std::string format_number(double x) {
  if (std::isnan(x)) return "nan";
  if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
  std::ostringstream os;
  os.precision(17);
  os << x;
  return os.str();
}

inline std::string reports_to_csv(const std::vector<EvalReport>& reports) {
  std::ostringstream os;
  os << "method,seed,budget,proximity,diversity,id_tpr,effective_samples,epsilon,bytes_down,bytes_up\n";
  for (const auto& r : reports) {
    os << r.method << ',' << r.seed << ',' << r.budget << ',' << format_number(r.proximity) << ','
       << format_number(r.diversity) << ',' << format_number(r.id_tpr) << ',' << r.effective_samples
       << ',' << format_number(r.epsilon) << ',' << r.bytes_down << ',' << r.bytes_up << '\n';
  }
  return os.str();
}

inline Json number_or_null(double x) { return std::isfinite(x) ? Json(x) : Json(nullptr); }

inline Json reports_to_json(const std::vector<EvalReport>& reports) {
  Json runs = Json::array();
  for (const auto& r : reports) {
    Json j;
    j["method"] = r.method;
    j["seed"] = r.seed;
    j["budget"] = r.budget;
    j["proximity"] = number_or_null(r.proximity);
    j["diversity"] = number_or_null(r.diversity);
    j["centroid_proximity"] = number_or_null(r.centroid_proximity);
    j["id_tpr"] = number_or_null(r.id_tpr);
    j["effective_samples"] = r.effective_samples;
    j["epsilon"] = number_or_null(r.epsilon);
    j["bytes_down"] = r.bytes_down;
    j["bytes_up"] = r.bytes_up;
    runs.push_back(std::move(j));
  }
  Json summary = Json::array();
  for (const auto& s : summarize(reports)) {
    Json j;
    j["method"] = s.method;
    j["budget"] = s.budget;
    j["proximity_mean"] = number_or_null(s.proximity_mean);
    j["proximity_std"] = number_or_null(s.proximity_std);
    j["diversity_mean"] = number_or_null(s.diversity_mean);
    j["diversity_std"] = number_or_null(s.diversity_std);
    j["id_tpr_mean"] = number_or_null(s.id_tpr_mean);
    j["id_tpr_std"] = number_or_null(s.id_tpr_std);
    j["effective_mean"] = s.effective_mean;
    summary.push_back(std::move(j));
  }
  Json out;
  out["runs"] = std::move(runs);
  out["summary"] = std::move(summary);
  return out;
}

}  // namespace ecos
