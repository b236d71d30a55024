#pragma once

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"

#include "ecos/accountant.hpp"
#include "ecos/clustering.hpp"
#include "ecos/dataset.hpp"
#include "ecos/error.hpp"
#include "ecos/protocol.hpp"
#include "ecos/scoring.hpp"

namespace ecos {

// Field order is preserved so that replays are byte-identical.
using Json = nlohmann::ordered_json;

inline constexpr const char* kProtocolTag = "ecos/1";

namespace detail {

inline Json float_matrix(const std::vector<float>& data, std::size_t rows, std::size_t cols) {
  Json m = Json::array();
  for (std::size_t i = 0; i < rows; ++i) {
    Json row = Json::array();
    for (std::size_t j = 0; j < cols; ++j) row.push_back(static_cast<double>(data[i * cols + j]));
    m.push_back(std::move(row));
  }
  return m;
}

inline void expect_stage(const Json& j, const char* stage) {
  if (!j.is_object() || j.value("protocol", "") != kProtocolTag) {
    throw FormatError(std::string("not an ") + kProtocolTag + " message");
  }
  if (j.value("stage", "") != stage) {
    throw FormatError(std::string("expected stage '") + stage + "', found '" +
                      j.value("stage", "") + "'");
  }
}

template <class F>
auto parse_field(const char* what, F&& f) {
  try {
    return f();
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("malformed ") + what + ": " + e.what());
  }
}

}  // namespace detail

inline Json read_json(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw FormatError("cannot open " + path.string());
  try {
    return Json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw FormatError(path.string() + ": " + e.what());
  }
}

inline void write_json(const std::filesystem::path& path, const Json& j) {
  const std::string text = j.dump(2) + "\n";
  detail::write_file(path, text);
}

// --- codebook --------------------------------------------------------------

inline Json codebook_to_json(const Codebook& cb) {
  Json j;
  j["r"] = cb.r;
  j["dim"] = cb.dim;
  j["seed"] = cb.seed;
  j["iters_run"] = cb.iters_run;
  j["max_iters"] = cb.max_iters;
  j["tol"] = cb.tol;
  j["centroids"] = detail::float_matrix(cb.centroids, cb.r, cb.dim);
  j["cluster_sizes"] = cb.cluster_sizes;
  j["sse"] = cb.sse();
  return j;
}

/// Restores a codebook from JSON plus its assignment vector.
inline Codebook codebook_from_json(const Json& j, std::vector<std::int32_t> assignment) {
  return detail::parse_field("codebook", [&] {
    Codebook cb;
    cb.r = j.at("r").get<std::size_t>();
    cb.dim = j.at("dim").get<std::size_t>();
    cb.seed = j.at("seed").get<std::uint64_t>();
    cb.iters_run = j.at("iters_run").get<std::size_t>();
    cb.max_iters = j.at("max_iters").get<std::size_t>();
    cb.tol = j.at("tol").get<double>();
    const auto& rows = j.at("centroids");
    if (rows.size() != cb.r) throw FormatError("codebook: centroid count does not match r");
    for (const auto& row : rows) {
      if (row.size() != cb.dim) throw FormatError("codebook: centroid width does not match dim");
      for (const auto& v : row) cb.centroids.push_back(static_cast<float>(v.get<double>()));
    }
    cb.cluster_sizes = j.at("cluster_sizes").get<std::vector<std::size_t>>();
    if (j.contains("sse")) cb.sse_history.push_back(j.at("sse").get<double>());
    cb.assignment = std::move(assignment);
    std::vector<std::size_t> sizes(cb.r, 0);
    for (auto a : cb.assignment) {
      if (a < 0 || static_cast<std::size_t>(a) >= cb.r) {
        throw FormatError("codebook: assignment index out of range");
      }
      ++sizes[static_cast<std::size_t>(a)];
    }
    if (sizes != cb.cluster_sizes) throw FormatError("codebook: assignment disagrees with cluster_sizes");
    return cb;
  });
}

/// Assignment vector as raw little-endian i32.
inline void save_assignment(const std::vector<std::int32_t>& a, const std::filesystem::path& path) {
  std::vector<char> out;
  out.reserve(a.size() * 4);
  for (auto v : a) detail::put_le<std::int32_t>(out, v);
  detail::write_file(path, {out.data(), out.size()});
}

inline std::vector<std::int32_t> load_assignment(const std::filesystem::path& path) {
  auto bytes = detail::read_file(path);
  if (bytes.size() % 4 != 0) {
    throw FormatError("assignment file length not a multiple of 4 at byte offset " +
                      std::to_string(bytes.size() - bytes.size() % 4));
  }
  std::vector<std::int32_t> a(bytes.size() / 4);
  for (std::size_t i = 0; i < a.size(); ++i) a[i] = detail::get_le<std::int32_t>(bytes, 4 * i);
  return a;
}

// --- downlink --------------------------------------------------------------

/// Centroids as sent to the client, optionally with per-dimension affine
/// min-max quantization to 8 bits.
inline Json downlink_message(const Codebook& cb, int quant_bits) {
  require(quant_bits == 8 || quant_bits == 32, "quant_bits must be 8 or 32");
  Json j;
  j["protocol"] = kProtocolTag;
  j["stage"] = "centroids";
  j["r"] = cb.r;
  j["dim"] = cb.dim;
  j["quant_bits"] = quant_bits;
  if (quant_bits == 32) {
    j["centroids"] = detail::float_matrix(cb.centroids, cb.r, cb.dim);
    return j;
  }
  std::vector<float> lo(cb.dim), scale(cb.dim);
  for (std::size_t d = 0; d < cb.dim; ++d) {
    float mn = cb.centroids[d], mx = cb.centroids[d];
    for (std::size_t k = 0; k < cb.r; ++k) {
      mn = std::min(mn, cb.centroids[k * cb.dim + d]);
      mx = std::max(mx, cb.centroids[k * cb.dim + d]);
    }
    lo[d] = mn;
    scale[d] = (mx - mn) / 255.0f;
  }
  Json params;
  params["min"] = Json::array();
  params["scale"] = Json::array();
  for (std::size_t d = 0; d < cb.dim; ++d) {
    params["min"].push_back(static_cast<double>(lo[d]));
    params["scale"].push_back(static_cast<double>(scale[d]));
  }
  j["quant_params"] = std::move(params);
  Json rows = Json::array();
  for (std::size_t k = 0; k < cb.r; ++k) {
    Json row = Json::array();
    for (std::size_t d = 0; d < cb.dim; ++d) {
      const float x = cb.centroids[k * cb.dim + d];
      const int q = scale[d] > 0.0f ? static_cast<int>(std::lround((x - lo[d]) / scale[d])) : 0;
      row.push_back(std::clamp(q, 0, 255));
    }
    rows.push_back(std::move(row));
  }
  j["centroids"] = std::move(rows);
  return j;
}

/// Client view of the downlink: the (dequantized) centroid set.
inline FeatureDataset parse_downlink(const Json& j) {
  detail::expect_stage(j, "centroids");
  return detail::parse_field("downlink", [&] {
    const auto r = j.at("r").get<std::size_t>();
    const auto dim = j.at("dim").get<std::size_t>();
    const int bits = j.at("quant_bits").get<int>();
    const auto& rows = j.at("centroids");
    if (rows.size() != r) throw FormatError("downlink: centroid count does not match r");
    std::vector<float> lo, scale;
    if (bits == 8) {
      lo = j.at("quant_params").at("min").get<std::vector<float>>();
      scale = j.at("quant_params").at("scale").get<std::vector<float>>();
      if (lo.size() != dim || scale.size() != dim) throw FormatError("downlink: bad quant_params");
    } else if (bits != 32) {
      throw FormatError("downlink: quant_bits must be 8 or 32");
    }
    std::vector<float> data;
    data.reserve(r * dim);
    for (const auto& row : rows) {
      if (row.size() != dim) throw FormatError("downlink: centroid width does not match dim");
      for (std::size_t d = 0; d < dim; ++d) {
        if (bits == 32) {
          data.push_back(static_cast<float>(row[d].get<double>()));
        } else {
          data.push_back(lo[d] + static_cast<float>(row[d].get<int>()) * scale[d]);
        }
      }
    }
    return FeatureDataset(r, dim, std::move(data));
  });
}

// --- uplink ----------------------------------------------------------------

/// The only client-originated message: R noised scores and mechanism
/// parameters. The client seed is deliberately absent.
inline Json uplink_message(const ScoreReport& rep) {
  Json j;
  j["protocol"] = kProtocolTag;
  j["stage"] = "scores";
  j["r"] = rep.r;
  j["scores"] = rep.scores;
  j["sigma"] = rep.sigma;
  j["gamma"] = rep.gamma;
  j["scale_s"] = rep.scale_s;
  j["sensitivity"] = rep.sensitivity;
  j["confidence_mode"] = rep.confidence_mode;
  j["subsample_mode"] = to_string(rep.subsample_mode);
  return j;
}

inline ScoreReport parse_uplink(const Json& j) {
  detail::expect_stage(j, "scores");
  return detail::parse_field("uplink", [&] {
    ScoreReport rep;
    rep.r = j.at("r").get<std::size_t>();
    rep.scores = j.at("scores").get<std::vector<double>>();
    rep.sigma = j.at("sigma").get<double>();
    rep.gamma = j.at("gamma").get<double>();
    rep.scale_s = j.at("scale_s").get<double>();
    rep.sensitivity = j.at("sensitivity").get<double>();
    rep.confidence_mode = j.at("confidence_mode").get<bool>();
    rep.subsample_mode = parse_subsample_mode(j.value("subsample_mode", "poisson"));
    if (rep.scores.size() != rep.r) throw FormatError("uplink: scores length does not match r");
    for (double s : rep.scores) {
      if (!std::isfinite(s) || s < 0.0) throw FormatError("uplink: scores must be finite and >= 0");
    }
    return rep;
  });
}

// --- ledger / selection ----------------------------------------------------

inline Json ledger_to_json(const PrivacyLedger& ledger, double delta) {
  Json j;
  j["non_private"] = ledger.non_private;
  j["delta"] = delta;
  if (ledger.non_private) {
    j["epsilon"] = nullptr;
    j["best_alpha"] = nullptr;
  } else {
    const auto g = ledger.epsilon(delta);
    j["epsilon"] = g.epsilon;
    j["best_alpha"] = g.best_alpha;
  }
  j["orders"] = ledger.orders;
  j["entries"] = Json::array();
  for (const auto& e : ledger.entries) {
    Json je;
    je["mechanism"] = e.mechanism;
    je["sigma"] = e.sigma;
    je["gamma"] = e.gamma;
    je["sensitivity"] = e.sensitivity;
    je["subsample_mode"] = e.subsample_mode;
    je["eps"] = e.curve.eps;
    j["entries"].push_back(std::move(je));
  }
  j["composed"] = ledger.composed.eps;
  return j;
}

inline Json wire_to_json(const WireStats& w) {
  Json j;
  j["quant_bits"] = w.quant_bits;
  j["bytes_down"] = w.bytes_down;
  j["bytes_up"] = w.bytes_up;
  j["header_down"] = w.header_down;
  j["header_up"] = w.header_up;
  return j;
}

inline Json plan_to_json(const BudgetPlan& plan) {
  Json j;
  j["budgets"] = plan.budgets;
  j["pre_round"] = plan.pre_round;
  j["total"] = plan.total;
  j["fallback_used"] = plan.fallback_used;
  j["saturated"] = plan.saturated;
  return j;
}

inline std::vector<std::size_t> selection_indices(const Json& j) {
  detail::expect_stage(j, "selection");
  return detail::parse_field("selection", [&] { return j.at("indices").get<std::vector<std::size_t>>(); });
}

}  // namespace ecos
