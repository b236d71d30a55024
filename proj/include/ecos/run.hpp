#pragma once

#include <cstdint>
#include <string>
#include <utility>

#include "ecos/accountant.hpp"
#include "ecos/clustering.hpp"
#include "ecos/dataset.hpp"
#include "ecos/error.hpp"
#include "ecos/messages.hpp"
#include "ecos/protocol.hpp"
#include "ecos/random.hpp"
#include "ecos/scoring.hpp"

namespace ecos {

/// Every parameter of one protocol run.
struct RunConfig {
  std::size_t r = 100;
  std::size_t budget = 1000;
  std::uint64_t seed = 0;
  std::size_t max_iters = 100;
  double tol = 1e-6;
  int quant_bits = 32;  // downlink transcript encoding and primary wire accounting
  double delta = 1e-5;
  ScoringParams scoring;

  void validate() const {
    require(r >= 1, "r must be ≥ 1");
    require(max_iters >= 1, "max_iters must be >= 1");
    require(tol >= 0.0, "tol must be >= 0");
    require(quant_bits == 8 || quant_bits == 32, "quant_bits must be 8 or 32");
    require(delta > 0.0 && delta < 1.0, "delta must lie in (0, 1)");
    require(std::isfinite(scoring.sigma) && scoring.sigma >= 0.0, "sigma must be >= 0");
    require(scoring.gamma > 0.0 && scoring.gamma <= 1.0, "gamma must lie in (0, 1]");
    require(scoring.scale_s > 0.0, "scale_s must be > 0");
    require(scoring.sensitivity > 0.0, "sensitivity must be > 0");
    require(scoring.keep_fraction > 0.0 && scoring.keep_fraction <= 1.0,
            "keep_fraction must lie in (0, 1]");
  }
};

// Stage streams derived from the run seed.
inline constexpr std::uint64_t kCompressStream = 1;
inline constexpr std::uint64_t kClientStream = 2;
inline constexpr std::uint64_t kSampleStream = 3;

inline std::uint64_t compress_seed(std::uint64_t seed) { return derive_seed(seed, kCompressStream); }
inline std::uint64_t client_seed(std::uint64_t seed) { return derive_seed(seed, kClientStream); }
inline std::uint64_t sample_seed(std::uint64_t seed) { return derive_seed(seed, kSampleStream); }

/// Runs `f`, prefixing any error with the protocol stage it came from.
template <class F>
auto with_stage(const char* stage, F&& f) {
  try {
    return f();
  } catch (const InvalidArgument& e) {
    throw InvalidArgument(std::string(stage) + ": " + e.what());
  } catch (const FormatError& e) {
    throw FormatError(std::string(stage) + ": " + e.what());
  }
}

struct CloudResult {
  BudgetPlan plan;
  Selection selection;
  PrivacyLedger ledger;
  WireStats wire;
  Json message;
};

inline Json cloud_config_json(const RunConfig& cfg) {
  Json j;
  j["r"] = cfg.r;
  j["budget"] = cfg.budget;
  j["seed"] = cfg.seed;
  j["max_iters"] = cfg.max_iters;
  j["tol"] = cfg.tol;
  j["quant_bits"] = cfg.quant_bits;
  j["delta"] = cfg.delta;
  return j;
}

/// Cloud end after the uplink arrives: budgets, per-cluster decompression,
/// accounting and the selection message. Consumes the uplink message only.
inline CloudResult cloud_select(const FeatureDataset& cloud, const Codebook& codebook,
                                const Json& uplink, const RunConfig& cfg) {
  CloudResult out;
  const ScoreReport rep = with_stage("uplink", [&] { return parse_uplink(uplink); });
  require(rep.r == codebook.r, "uplink: score count " + std::to_string(rep.r) +
                                   " does not match codebook r " + std::to_string(codebook.r));
  out.plan = with_stage("allocate", [&] {
    return allocate_budgets(codebook.cluster_sizes, rep.scores, cfg.budget);
  });
  out.selection = with_stage("decompress", [&] {
    return decompress(cloud, codebook, out.plan, sample_seed(cfg.seed));
  });
  out.ledger = with_stage("account", [&] {
    return scoring_ledger(rep.sigma, rep.gamma, rep.sensitivity, rep.subsample_mode);
  });
  out.wire = wire_stats(codebook.r, codebook.dim, cfg.quant_bits);

  Json& m = out.message;
  m["protocol"] = kProtocolTag;
  m["stage"] = "selection";
  m["budget"] = cfg.budget;
  m["indices"] = out.selection.indices;
  Json per_cluster = Json::object();
  for (const auto& [k, idx] : out.selection.per_cluster) per_cluster[std::to_string(k)] = idx;
  m["per_cluster"] = std::move(per_cluster);
  m["bytes_down"] = out.wire.bytes_down;
  m["bytes_up"] = out.wire.bytes_up;
  m["ledger"] = ledger_to_json(out.ledger, cfg.delta);
  m["plan"] = plan_to_json(out.plan);
  m["wire"] = wire_to_json(out.wire);
  m["wire_8bit"] = wire_to_json(wire_stats(codebook.r, codebook.dim, 8));
  Json config = cloud_config_json(cfg);
  Json scoring;
  scoring["sigma"] = rep.sigma;
  scoring["gamma"] = rep.gamma;
  scoring["scale_s"] = rep.scale_s;
  scoring["sensitivity"] = rep.sensitivity;
  scoring["confidence_mode"] = rep.confidence_mode;
  scoring["subsample_mode"] = to_string(rep.subsample_mode);
  config["scoring"] = std::move(scoring);
  m["config"] = std::move(config);
  return out;
}

struct ProtocolResult {
  Codebook codebook;
  Json downlink;
  ScoreReport report;
  Json uplink;
  CloudResult cloud;
  Json transcript;  // [downlink, uplink, selection]
};

/// Client end: consumes the downlink message only.
inline ScoreReport client_score(const FeatureDataset& client, const Json& downlink,
                                const RunConfig& cfg) {
  auto centroids = with_stage("downlink", [&] { return parse_downlink(downlink); });
  return with_stage("score", [&] {
    return score_client(client, centroids, cfg.scoring, client_seed(cfg.seed));
  });
}

/// compress -> downlink -> score -> uplink -> allocate -> decompress, with
/// each party seeing only the other's messages.
inline ProtocolResult run_protocol(const FeatureDataset& cloud, const FeatureDataset& client,
                                   const RunConfig& cfg) {
  with_stage("config", [&] {
    cfg.validate();
    require(client.empty() || client.dim() == cloud.dim(),
            "dimension mismatch: cloud " + std::to_string(cloud.dim()) + " vs client " +
                std::to_string(client.dim()));
    return 0;
  });
  ProtocolResult res;
  res.codebook = with_stage("compress", [&] {
    return kmeans_compress(cloud, cfg.r, compress_seed(cfg.seed), {cfg.max_iters, cfg.tol});
  });
  res.downlink = downlink_message(res.codebook, cfg.quant_bits);
  res.report = client_score(client, res.downlink, cfg);
  res.uplink = uplink_message(res.report);
  res.cloud = cloud_select(cloud, res.codebook, res.uplink, cfg);
  res.transcript = Json::array({res.downlink, res.uplink, res.cloud.message});
  return res;
}

}  // namespace ecos
