// ecos: command-line driver for the collaborative sampling protocol.

#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"

#include "ecos/ecos.hpp"

namespace fs = std::filesystem;
using ecos::Json;

namespace {

struct Common {
  std::optional<std::uint64_t> seed;
  bool json = false;

  std::uint64_t resolved_seed() const {
    if (seed) return *seed;
    if (const char* env = std::getenv("ECOS_SEED")) {
      try {
        return std::stoull(env);
      } catch (const std::exception&) {
        throw ecos::InvalidArgument(std::string("ECOS_SEED is not an unsigned integer: ") + env);
      }
    }
    return 0;
  }
};

struct Args {
  Common common;
  ecos::RunConfig cfg;
  std::string cloud, client, codebook, assignment, downlink, uplink, out, transcript, csv;
  std::string subsample_mode = "poisson";
  bool csv_label = false;
  // account
  std::string account_mode = "closed-form";
  std::string orders = "extended";
  // eval
  std::vector<std::size_t> budgets;
  std::vector<std::uint64_t> seeds = {1, 2, 3};
  std::vector<std::string> methods = {"ecos", "random", "kcenter"};
  std::vector<std::int32_t> client_domains = {0};
  // synth
  ecos::SynthSpec synth;
  std::string cloud_out = "cloud.ecf", client_out = "client.ecf";
};

ecos::FeatureDataset load(const std::string& path, bool csv_label) {
  return ecos::load_dataset(path, ecos::format_for(path), csv_label);
}

void emit(const Common& c, const Json& j, const std::string& human) {
  if (c.json) {
    std::cout << j.dump() << "\n";
  } else {
    std::cout << human << "\n";
  }
}

Json scoring_json(const ecos::ScoringParams& p) {
  Json j;
  j["sigma"] = p.sigma;
  j["gamma"] = p.gamma;
  j["scale_s"] = p.scale_s;
  j["sensitivity"] = p.sensitivity;
  j["confidence_mode"] = p.confidence_mode;
  j["keep_fraction"] = p.keep_fraction;
  j["subsample_mode"] = ecos::to_string(p.subsample_mode);
  return j;
}

std::string assignment_path(const Args& a) {
  return a.assignment.empty() ? a.codebook + ".assign" : a.assignment;
}

int cmd_compress(Args& a) {
  a.cfg.seed = a.common.resolved_seed();
  ecos::require(a.cfg.r >= 1, "r must be ≥ 1");
  auto cloud = load(a.cloud, false);
  auto cb = ecos::with_stage("compress", [&] {
    return ecos::kmeans_compress(cloud, a.cfg.r, ecos::compress_seed(a.cfg.seed),
                                 {a.cfg.max_iters, a.cfg.tol});
  });
  Json j = ecos::codebook_to_json(cb);
  j["config"] = ecos::cloud_config_json(a.cfg);
  ecos::write_json(a.codebook, j);
  ecos::save_assignment(cb.assignment, assignment_path(a));
  if (!a.downlink.empty()) ecos::write_json(a.downlink, ecos::downlink_message(cb, a.cfg.quant_bits));
  Json summary;
  summary["codebook"] = a.codebook;
  summary["r"] = cb.r;
  summary["iters_run"] = cb.iters_run;
  summary["sse"] = cb.sse();
  summary["config"] = ecos::cloud_config_json(a.cfg);
  emit(a.common, summary,
       "compressed " + std::to_string(cloud.size()) + " rows into " + std::to_string(cb.r) +
           " centroids (" + std::to_string(cb.iters_run) + " iterations) -> " + a.codebook);
  return 0;
}

int cmd_score(Args& a) {
  a.cfg.seed = a.common.resolved_seed();
  a.cfg.scoring.subsample_mode = ecos::parse_subsample_mode(a.subsample_mode);
  a.cfg.validate();
  auto client = load(a.client, a.csv_label);
  auto downlink = ecos::read_json(a.downlink);
  auto rep = ecos::client_score(client, downlink, a.cfg);
  auto msg = ecos::uplink_message(rep);
  ecos::write_json(a.uplink, msg);
  Json summary;
  summary["uplink"] = a.uplink;
  summary["r"] = rep.r;
  summary["scoring"] = scoring_json(a.cfg.scoring);
  emit(a.common, summary, "scored " + std::to_string(client.size()) + " client rows over " +
                              std::to_string(rep.r) + " centroids -> " + a.uplink);
  return 0;
}

void write_selection(const Args& a, const ecos::CloudResult& res) {
  ecos::write_json(a.out, res.message);
  const auto eps = res.ledger.epsilon(a.cfg.delta).epsilon;
  Json summary;
  summary["selection"] = a.out;
  summary["selected"] = res.selection.indices.size();
  summary["epsilon"] = ecos::number_or_null(eps);
  summary["bytes_down"] = res.wire.bytes_down;
  summary["bytes_up"] = res.wire.bytes_up;
  std::ostringstream os;
  os << "selected " << res.selection.indices.size() << " of budget " << a.cfg.budget
     << " (epsilon=" << ecos::format_number(eps) << ", delta=" << a.cfg.delta << ") -> " << a.out;
  emit(a.common, summary, os.str());
}

int cmd_sample(Args& a) {
  a.cfg.seed = a.common.resolved_seed();
  auto cloud = load(a.cloud, false);
  auto cbj = ecos::read_json(a.codebook);
  auto cb = ecos::codebook_from_json(cbj, ecos::load_assignment(assignment_path(a)));
  ecos::require(cb.assignment.size() == cloud.size(), "assignment length does not match cloud rows");
  a.cfg.r = cb.r;
  a.cfg.max_iters = cb.max_iters;
  a.cfg.tol = cb.tol;
  a.cfg.validate();
  auto res = ecos::cloud_select(cloud, cb, ecos::read_json(a.uplink), a.cfg);
  write_selection(a, res);
  return 0;
}

int cmd_run(Args& a) {
  a.cfg.seed = a.common.resolved_seed();
  a.cfg.scoring.subsample_mode = ecos::parse_subsample_mode(a.subsample_mode);
  auto cloud = load(a.cloud, false);
  auto client = load(a.client, a.csv_label);
  auto res = ecos::run_protocol(cloud, client, a.cfg);
  if (!a.transcript.empty()) ecos::write_json(a.transcript, res.transcript);
  write_selection(a, res.cloud);
  return 0;
}

int cmd_account(Args& a) {
  const auto& p = a.cfg.scoring;
  Json j;
  j["mode"] = a.account_mode;
  j["sigma"] = p.sigma;
  j["gamma"] = p.gamma;
  j["delta"] = a.cfg.delta;
  double eps = 0.0;
  if (a.account_mode == "closed-form") {
    eps = ecos::closed_form_bound(p.sigma, p.gamma, a.cfg.delta);
    j["epsilon"] = eps;
    j["alpha"] = ecos::closed_form_order(p.sigma, p.gamma, a.cfg.delta);
  } else if (a.account_mode == "exact") {
    std::vector<double> grid;
    if (a.orders == "default") {
      grid = p.gamma == 1.0 ? ecos::default_orders() : ecos::integer_orders();
    } else if (a.orders == "extended") {
      grid = ecos::extended_orders();
    } else {
      throw ecos::InvalidArgument("--orders must be default or extended");
    }
    auto curve = ecos::subsampled_gaussian_rdp(p.sigma, p.sensitivity, p.gamma, grid);
    auto g = ecos::rdp_to_dp(curve, a.cfg.delta);
    eps = g.epsilon;
    j["sensitivity"] = p.sensitivity;
    j["orders"] = a.orders;
    j["epsilon"] = eps;
    j["alpha"] = g.best_alpha;
  } else {
    throw ecos::InvalidArgument("--mode must be closed-form or exact");
  }
  std::ostringstream os;
  os.precision(10);
  os << "epsilon = " << eps << " (delta = " << a.cfg.delta << ", " << a.account_mode << ")";
  emit(a.common, j, os.str());
  return 0;
}

int cmd_eval(Args& a) {
  a.cfg.scoring.subsample_mode = ecos::parse_subsample_mode(a.subsample_mode);
  a.cfg.validate();
  auto cloud = load(a.cloud, false);
  auto client = load(a.client, a.csv_label);
  if (a.budgets.empty()) a.budgets = {a.cfg.budget};
  std::set<std::int32_t> domains(a.client_domains.begin(), a.client_domains.end());
  auto reports = ecos::compare_methods(cloud, client, a.budgets, a.seeds, a.methods, a.cfg, domains);
  Json j = ecos::reports_to_json(reports);
  Json config = ecos::cloud_config_json(a.cfg);
  config["scoring"] = scoring_json(a.cfg.scoring);
  config["seeds"] = a.seeds;
  config["methods"] = a.methods;
  config["budgets"] = a.budgets;
  config["client_domains"] = a.client_domains;
  j["config"] = std::move(config);
  if (!a.out.empty()) ecos::write_json(a.out, j);
  if (!a.csv.empty()) ecos::detail::write_file(a.csv, ecos::reports_to_csv(reports));
  std::ostringstream os;
  os << "method,budget,proximity,diversity,id_tpr,effective\n";
  for (const auto& s : ecos::summarize(reports)) {
    os << s.method << ',' << s.budget << ',' << ecos::format_number(s.proximity_mean) << ','
       << ecos::format_number(s.diversity_mean) << ',' << ecos::format_number(s.id_tpr_mean) << ','
       << s.effective_mean << '\n';
  }
  std::string text = os.str();
  text.pop_back();
  emit(a.common, j, text);
  return 0;
}

int cmd_synth(Args& a) {
  a.synth.seed = a.common.resolved_seed();
  auto data = ecos::generate_synthetic(a.synth);
  ecos::save_dataset(data.cloud, a.cloud_out);
  ecos::save_dataset(data.client, a.client_out);
  Json j;
  j["cloud"] = a.cloud_out;
  j["client"] = a.client_out;
  j["domains"] = a.synth.domains;
  j["dim"] = a.synth.dim;
  j["samples_per_domain"] = a.synth.samples_per_domain;
  j["blob_std"] = a.synth.blob_std;
  j["separation"] = a.synth.separation;
  j["client_domains"] = a.synth.client_domains;
  j["client_size"] = a.synth.client_size;
  j["overlap"] = a.synth.overlap;
  j["classes"] = a.synth.classes;
  j["seed"] = a.synth.seed;
  emit(a.common, j, "wrote " + std::to_string(data.cloud.size()) + " cloud rows to " + a.cloud_out +
                        " and " + std::to_string(data.client.size()) + " client rows to " +
                        a.client_out);
  return 0;
}

void add_common(CLI::App* sub, Args& a) {
  sub->add_option("--seed", a.common.seed, "RNG seed (falls back to $ECOS_SEED, then 0)");
  sub->add_flag("--json", a.common.json, "Machine-readable output on stdout");
}

void add_cloud_params(CLI::App* sub, Args& a) {
  sub->add_option("--r", a.cfg.r, "Compression size R (number of centroids)")->capture_default_str();
  sub->add_option("--max-iters", a.cfg.max_iters, "Lloyd iteration cap")->capture_default_str();
  sub->add_option("--tol", a.cfg.tol, "Relative centroid-shift tolerance")->capture_default_str();
  sub->add_option("--quant-bits", a.cfg.quant_bits, "Downlink encoding and wire accounting: 8 or 32")
      ->capture_default_str();
}

void add_scoring_params(CLI::App* sub, Args& a) {
  auto& p = a.cfg.scoring;
  sub->add_option("--sigma", p.sigma, "Gaussian noise std on coverage counts")->capture_default_str();
  sub->add_option("--gamma", p.gamma, "Client subsampling rate in (0, 1]")->capture_default_str();
  sub->add_option("--scale-s", p.scale_s, "Score scale exponent s")->capture_default_str();
  sub->add_option("--sensitivity", p.sensitivity, "L2 sensitivity of the count vector")->capture_default_str();
  sub->add_flag("--confidence", p.confidence_mode, "Label-aware confidence scoring");
  sub->add_option("--keep-fraction", p.keep_fraction, "Per-class keep fraction in confidence mode")
      ->capture_default_str();
  sub->add_option("--subsample-mode", a.subsample_mode, "poisson or with_replacement")->capture_default_str();
  sub->add_flag("--csv-label", a.csv_label, "Client CSV has a trailing integer label column");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"ecos: collaborative cloud/client sampling"};
  app.require_subcommand(1);
  Args a;
  bool json_errors = false;
  for (int i = 1; i < argc; ++i) json_errors = json_errors || std::string(argv[i]) == "--json";

  auto* compress = app.add_subcommand("compress", "Cluster the cloud set into R centroids");
  add_common(compress, a);
  add_cloud_params(compress, a);
  compress->add_option("--cloud", a.cloud, "Cloud dataset (.ecf or .csv)")->required();
  compress->add_option("--codebook", a.codebook, "Output codebook JSON")->required();
  compress->add_option("--assignment", a.assignment, "Output assignment file (default <codebook>.assign)");
  compress->add_option("--downlink", a.downlink, "Also write the downlink message");

  auto* score = app.add_subcommand("score", "Client end: coverage scores to an uplink message");
  add_common(score, a);
  add_scoring_params(score, a);
  score->add_option("--client", a.client, "Client dataset (.ecf or .csv)")->required();
  score->add_option("--downlink", a.downlink, "Downlink message from the cloud")->required();
  score->add_option("--uplink", a.uplink, "Output uplink message")->required();

  auto* sample = app.add_subcommand("sample", "Cloud end: budgets and decompression");
  add_common(sample, a);
  sample->add_option("--cloud", a.cloud, "Cloud dataset")->required();
  sample->add_option("--codebook", a.codebook, "Codebook JSON from compress")->required();
  sample->add_option("--assignment", a.assignment, "Assignment file (default <codebook>.assign)");
  sample->add_option("--uplink", a.uplink, "Uplink message from the client")->required();
  sample->add_option("--budget", a.cfg.budget, "Sampling budget B")->capture_default_str();
  sample->add_option("--quant-bits", a.cfg.quant_bits, "Wire accounting bits: 8 or 32")->capture_default_str();
  sample->add_option("--delta", a.cfg.delta, "delta for the (epsilon, delta) report")->capture_default_str();
  sample->add_option("--out", a.out, "Output selection JSON")->required();

  auto* run = app.add_subcommand("run", "Run both parties in one process");
  add_common(run, a);
  add_cloud_params(run, a);
  add_scoring_params(run, a);
  run->add_option("--cloud", a.cloud, "Cloud dataset")->required();
  run->add_option("--client", a.client, "Client dataset")->required();
  run->add_option("--budget", a.cfg.budget, "Sampling budget B")->capture_default_str();
  run->add_option("--delta", a.cfg.delta, "delta for the (epsilon, delta) report")->capture_default_str();
  run->add_option("--out", a.out, "Output selection JSON")->required();
  run->add_option("--transcript", a.transcript, "Output protocol transcript");

  auto* account = app.add_subcommand("account", "Privacy cost of one scoring query");
  add_common(account, a);
  account->add_option("--mode", a.account_mode, "closed-form or exact")->capture_default_str();
  account->add_option("--sigma", a.cfg.scoring.sigma, "Noise std")->capture_default_str();
  account->add_option("--gamma", a.cfg.scoring.gamma, "Subsampling rate")->capture_default_str();
  account->add_option("--delta", a.cfg.delta, "delta")->capture_default_str();
  account->add_option("--sensitivity", a.cfg.scoring.sensitivity, "L2 sensitivity (exact mode)")
      ->capture_default_str();
  account->add_option("--orders", a.orders, "Order grid for exact mode: default or extended")
      ->capture_default_str();

  auto* eval = app.add_subcommand("eval", "Compare ECOS against random and K-Center baselines");
  add_common(eval, a);
  add_cloud_params(eval, a);
  add_scoring_params(eval, a);
  eval->add_option("--cloud", a.cloud, "Cloud dataset with domain tags")->required();
  eval->add_option("--client", a.client, "Client dataset")->required();
  eval->add_option("--budget", a.budgets, "Budget(s); several values produce a sweep")->delimiter(',');
  eval->add_option("--seeds", a.seeds, "Seeds")->delimiter(',')->capture_default_str();
  eval->add_option("--methods", a.methods, "ecos,random,kcenter")->delimiter(',')->capture_default_str();
  eval->add_option("--client-domains", a.client_domains, "Client domain ids")->delimiter(',')
      ->capture_default_str();
  eval->add_option("--out", a.out, "Output EvalReport JSON");
  eval->add_option("--csv", a.csv, "Output sweep CSV");

  auto* synth = app.add_subcommand("synth", "Generate a synthetic multi-domain benchmark");
  add_common(synth, a);
  synth->add_option("--domains", a.synth.domains)->capture_default_str();
  synth->add_option("--dim", a.synth.dim)->capture_default_str();
  synth->add_option("--per-domain", a.synth.samples_per_domain)->capture_default_str();
  synth->add_option("--blob-std", a.synth.blob_std, "One value or one per domain")->delimiter(',');
  synth->add_option("--separation", a.synth.separation)->capture_default_str();
  synth->add_option("--client-domains", a.synth.client_domains)->delimiter(',');
  synth->add_option("--client-size", a.synth.client_size)->capture_default_str();
  synth->add_flag("--overlap", a.synth.overlap, "Client rows are copies of cloud rows");
  synth->add_option("--classes", a.synth.classes, "Number of class labels (0 = none)")->capture_default_str();
  synth->add_option("--cloud-out", a.cloud_out)->capture_default_str();
  synth->add_option("--client-out", a.client_out)->capture_default_str();

  auto fail = [&](int code, const std::string& msg) {
    if (json_errors) {
      Json j;
      j["error"] = msg;
      j["exit_code"] = code;
      std::cout << j.dump() << "\n";
    }
    std::string line = msg;
    for (char& c : line) {
      if (c == '\n') c = ' ';
    }
    std::cerr << "ecos: error: " << line << "\n";
    return code;
  };

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    return fail(2, e.what());
  }

  try {
    if (*compress) return cmd_compress(a);
    if (*score) return cmd_score(a);
    if (*sample) return cmd_sample(a);
    if (*run) return cmd_run(a);
    if (*account) return cmd_account(a);
    if (*eval) return cmd_eval(a);
    if (*synth) return cmd_synth(a);
  } catch (const ecos::InvalidArgument& e) {
    return fail(2, e.what());
  } catch (const std::exception& e) {
    return fail(1, e.what());
  }
  return 0;
}
