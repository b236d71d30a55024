#include "ecos/run.hpp"

#include <algorithm>
#include <numeric>
#include <set>

#include <gtest/gtest.h>

#include "ecos/eval.hpp"

namespace ecos {
namespace {

FeatureDataset line(std::initializer_list<float> xs) {
  return FeatureDataset(xs.size(), 1, std::vector<float>(xs));
}

Codebook single_cluster(const FeatureDataset& cloud) {
  return kmeans_compress(cloud, 1, 0);
}

SynthData small_bench(std::uint64_t seed = 1) {
  SynthSpec spec;
  spec.domains = 3;
  spec.dim = 4;
  spec.samples_per_domain = 200;
  spec.client_size = 80;
  spec.seed = seed;
  return generate_synthetic(spec);
}

RunConfig small_config() {
  RunConfig cfg;
  cfg.r = 12;
  cfg.budget = 60;
  cfg.seed = 5;
  return cfg;
}

TEST(Allocate, HandEvaluatedMinFormula) {
  auto plan = allocate_budgets({10, 30, 60}, {5, 5, 0}, 20);
  EXPECT_EQ(plan.pre_round, (std::vector<double>{2, 6, 0}));
  EXPECT_EQ(plan.budgets, (std::vector<std::size_t>{2, 6, 0}));
  EXPECT_EQ(plan.total, 8u);
  EXPECT_FALSE(plan.fallback_used);
  EXPECT_FALSE(plan.saturated);
}

TEST(Allocate, SymmetricInputs) {
  for (std::size_t r : {1u, 3u, 7u}) {
    for (std::size_t k : {1u, 4u, 9u}) {
      auto plan = allocate_budgets(std::vector<std::size_t>(r, 50), std::vector<double>(r, 2.5), r * k);
      EXPECT_EQ(plan.budgets, std::vector<std::size_t>(r, k));
    }
  }
}

TEST(Allocate, AllZeroScoresFallBackToSizes) {
  auto plan = allocate_budgets({10, 30, 60}, {0, 0, 0}, 20);
  EXPECT_TRUE(plan.fallback_used);
  EXPECT_EQ(plan.budgets, (std::vector<std::size_t>{2, 6, 12}));
}

TEST(Allocate, LargestRemainderRounding) {
  // Size ratios 1/3 each, scores uniform: pre_round 10/3 each, floor 3, target 10.
  auto plan = allocate_budgets({30, 30, 30}, {1, 1, 1}, 10);
  EXPECT_EQ(plan.total, 10u);
  EXPECT_EQ(plan.budgets, (std::vector<std::size_t>{4, 3, 3}));
}

TEST(Allocate, BudgetCoveringCloudSelectsEverything) {
  auto plan = allocate_budgets({3, 4}, {0, 1}, 7);
  EXPECT_TRUE(plan.saturated);
  EXPECT_EQ(plan.budgets, (std::vector<std::size_t>{3, 4}));
}

TEST(Allocate, ZeroBudget) {
  auto plan = allocate_budgets({3, 4}, {1, 1}, 0);
  EXPECT_EQ(plan.budgets, (std::vector<std::size_t>{0, 0}));
}

TEST(Allocate, NeverExceedsCapacityOrBudget) {
  Rng rng(31);
  for (int trial = 0; trial < 300; ++trial) {
    const std::size_t r = 1 + rng.below(12);
    std::vector<std::size_t> sizes(r);
    std::vector<double> scores(r);
    std::size_t total = 0;
    for (std::size_t k = 0; k < r; ++k) {
      sizes[k] = 1 + rng.below(40);
      total += sizes[k];
      scores[k] = rng.bernoulli(0.3) ? 0.0 : std::pow(rng.uniform() * 10, 3);
    }
    const std::size_t budget = rng.below(total + 5);
    auto plan = allocate_budgets(sizes, scores, budget);
    EXPECT_EQ(plan.total, std::accumulate(plan.budgets.begin(), plan.budgets.end(), std::size_t{0}));
    if (!plan.saturated) {
      EXPECT_LE(plan.total, budget);
    }
    for (std::size_t k = 0; k < r; ++k) EXPECT_LE(plan.budgets[k], sizes[k]);
  }
}

TEST(Allocate, Errors) {
  EXPECT_THROW(allocate_budgets({1, 2}, {1}, 1), InvalidArgument);
  EXPECT_THROW(allocate_budgets({0, 2}, {1, 1}, 1), InvalidArgument);
  EXPECT_THROW(allocate_budgets({1, 2}, {-1, 1}, 1), InvalidArgument);
}

TEST(Decompress, SingleClusterFarthestFirst) {
  auto cloud = line({0, 1, 10});
  auto cb = single_cluster(cloud);
  std::uint64_t seed = 0;
  while (Rng(cluster_seed(seed, 0)).below(3) != 0) ++seed;
  BudgetPlan plan;
  plan.budgets = {2};
  auto sel = decompress(cloud, cb, plan, seed);
  EXPECT_EQ(sel.indices, (std::vector<std::size_t>{0, 2}));
}

TEST(Decompress, SaturationAndEmpty) {
  auto cloud = line({0, 1, 2, 10, 11, 12});
  auto cb = kmeans_compress(cloud, 2, 0);
  BudgetPlan full;
  full.budgets = cb.cluster_sizes;
  auto sel = decompress(cloud, cb, full, 3);
  std::set<std::size_t> got(sel.indices.begin(), sel.indices.end());
  EXPECT_EQ(got.size(), 6u);

  BudgetPlan none;
  none.budgets = {0, 0};
  EXPECT_TRUE(decompress(cloud, cb, none, 3).indices.empty());
}

TEST(Decompress, RespectsPlanExactly) {
  auto data = small_bench();
  auto cb = kmeans_compress(data.cloud, 10, 2);
  std::vector<double> scores(10);
  for (std::size_t k = 0; k < 10; ++k) scores[k] = static_cast<double>(k % 4);
  auto plan = allocate_budgets(cb.cluster_sizes, scores, 100);
  auto sel = decompress(data.cloud, cb, plan, 8);
  std::set<std::size_t> unique(sel.indices.begin(), sel.indices.end());
  EXPECT_EQ(unique.size(), sel.indices.size());
  EXPECT_EQ(sel.indices.size(), plan.total);
  for (const auto& [k, idx] : sel.per_cluster) {
    EXPECT_EQ(idx.size(), plan.budgets[k]);
    for (auto i : idx) {
      EXPECT_LT(i, data.cloud.size());
      EXPECT_EQ(static_cast<std::size_t>(cb.assignment[i]), k);
    }
  }
}

TEST(Wire, PayloadSizes) {
  auto w8 = wire_stats(100, 512, 8);
  EXPECT_EQ(w8.bytes_down, 51200u);
  EXPECT_EQ(w8.bytes_up, 100u);
  EXPECT_EQ(wire_stats(100, 72, 32).bytes_down, 28800u);
  auto w0 = wire_stats(0, 72, 32);
  EXPECT_EQ(w0.bytes_down, 0u);
  EXPECT_EQ(w0.bytes_up, 0u);
  EXPECT_THROW(wire_stats(1, 1, 16), InvalidArgument);
}

TEST(Run, SingleCentroidIsGlobalKCenter) {
  auto data = small_bench();
  RunConfig cfg = small_config();
  cfg.r = 1;
  cfg.budget = 25;
  auto res = run_protocol(data.cloud, data.client, cfg);
  auto global = kcenter_select(data.cloud, std::nullopt, 25, cluster_seed(sample_seed(cfg.seed), 0));
  EXPECT_EQ(res.cloud.selection.indices, global.indices);
  EXPECT_EQ(res.cloud.plan.budgets, std::vector<std::size_t>{25});
}

TEST(Run, DeterministicTranscript) {
  auto data = small_bench();
  auto a = run_protocol(data.cloud, data.client, small_config());
  auto b = run_protocol(data.cloud, data.client, small_config());
  EXPECT_EQ(a.transcript.dump(), b.transcript.dump());
  auto cfg = small_config();
  cfg.seed = 6;
  EXPECT_NE(run_protocol(data.cloud, data.client, cfg).transcript.dump(), a.transcript.dump());
}

TEST(Run, CloudReplayFromRecordedUplink) {
  auto data = small_bench();
  auto cfg = small_config();
  auto res = run_protocol(data.cloud, data.client, cfg);
  auto recorded = Json::parse(res.uplink.dump());
  auto codebook = codebook_from_json(codebook_to_json(res.codebook), res.codebook.assignment);
  auto replay = cloud_select(data.cloud, codebook, recorded, cfg);
  EXPECT_EQ(replay.message.dump(), res.cloud.message.dump());
}

TEST(Run, LedgerIgnoresPostProcessingAndSizes) {
  auto data = small_bench();
  auto base = small_config();
  base.scoring.gamma = 0.5;
  auto ref = run_protocol(data.cloud, data.client, base).cloud.message["ledger"].dump();
  for (double s : {1.0, 3.0, 5.0}) {
    for (std::size_t r : {4u, 12u}) {
      for (std::size_t b : {20u, 90u}) {
        auto cfg = base;
        cfg.scoring.scale_s = s;
        cfg.r = r;
        cfg.budget = b;
        EXPECT_EQ(run_protocol(data.cloud, data.client, cfg).cloud.message["ledger"].dump(), ref);
      }
    }
  }
  SynthSpec spec;
  spec.domains = 3;
  spec.dim = 4;
  spec.samples_per_domain = 200;
  spec.client_size = 80;
  spec.classes = 3;
  auto labelled = generate_synthetic(spec);
  auto cfg = base;
  cfg.scoring.confidence_mode = true;
  EXPECT_EQ(run_protocol(labelled.cloud, labelled.client, cfg).cloud.message["ledger"].dump(), ref);
}

TEST(Run, OneLedgerEntryPerPrivateRun) {
  auto data = small_bench();
  auto res = run_protocol(data.cloud, data.client, small_config());
  EXPECT_EQ(res.cloud.ledger.entries.size(), 1u);
  auto cfg = small_config();
  cfg.scoring.sigma = 0.0;
  auto np = run_protocol(data.cloud, data.client, cfg);
  EXPECT_TRUE(np.cloud.ledger.non_private);
  EXPECT_TRUE(np.cloud.message["ledger"]["epsilon"].is_null());
}

TEST(Run, UplinkCarriesOnlyNoisedScores) {
  auto data = small_bench();
  auto res = run_protocol(data.cloud, data.client, small_config());
  const std::set<std::string> allowed = {"protocol", "stage",       "r",           "scores",
                                         "sigma",    "gamma",       "scale_s",     "sensitivity",
                                         "confidence_mode", "subsample_mode"};
  for (const auto& [key, value] : res.uplink.items()) EXPECT_TRUE(allowed.count(key)) << key;
  EXPECT_EQ(res.uplink["scores"].size(), small_config().r);
  // The client seed never leaves the client.
  EXPECT_FALSE(res.uplink.contains("seed"));
  // No client feature value appears anywhere in the transcript.
  const std::string text = res.transcript.dump();
  for (std::size_t i = 0; i < 10; ++i) {
    const std::string v = Json(static_cast<double>(data.client.row(i)[0])).dump();
    EXPECT_EQ(text.find(v), std::string::npos) << v;
  }
}

TEST(Run, ConcentratesOnClientClustersWhenNoiseless) {
  auto data = small_bench();
  auto cfg = small_config();
  cfg.scoring.sigma = 0.0;
  cfg.scoring.scale_s = 8.0;
  cfg.r = 3;
  auto res = run_protocol(data.cloud, data.client, cfg);
  const auto& scores = res.report.scores;
  const auto top = static_cast<std::size_t>(std::max_element(scores.begin(), scores.end()) - scores.begin());
  const auto& plan = res.cloud.plan;
  const double size_cap = static_cast<double>(res.codebook.cluster_sizes[top]) * static_cast<double>(cfg.budget) /
                          static_cast<double>(data.cloud.size());
  EXPECT_EQ(plan.budgets[top], static_cast<std::size_t>(std::floor(size_cap + 1e-9)));
  const std::set<std::int32_t> client_domains = {0};
  EXPECT_EQ(id_tpr(res.cloud.selection.indices, data.cloud, client_domains), 1.0);
}

TEST(Run, QuantizedDownlink) {
  auto data = small_bench();
  auto cfg = small_config();
  cfg.quant_bits = 8;
  auto res = run_protocol(data.cloud, data.client, cfg);
  EXPECT_EQ(res.downlink["quant_bits"], 8);
  auto centroids = parse_downlink(res.downlink);
  for (std::size_t i = 0; i < res.codebook.centroids.size(); ++i) {
    const std::size_t d = i % res.codebook.dim;
    const double step = res.downlink["quant_params"]["scale"][d].get<double>();
    EXPECT_NEAR(centroids.data()[i], res.codebook.centroids[i], step / 2 + 1e-4);
  }
  EXPECT_EQ(res.cloud.message["bytes_down"], cfg.r * 4 * 1);
}

TEST(Run, StageNamedInErrors) {
  auto data = small_bench();
  auto cfg = small_config();
  cfg.r = 0;
  try {
    run_protocol(data.cloud, data.client, cfg);
    FAIL();
  } catch (const InvalidArgument& e) {
    EXPECT_NE(std::string(e.what()).find("r must be"), std::string::npos);
  }
  FeatureDataset bad(2, 3, {0, 0, 0, 1, 1, 1});
  EXPECT_THROW(run_protocol(data.cloud, bad, small_config()), InvalidArgument);
}

}  // namespace
}  // namespace ecos
