// dilgp: generate data, fit and evaluate models, run BO, replay manifests.

#include "dilgp/experiments.hpp"

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

namespace {

using nlohmann::json;

json load_config(const std::string& path) {
  if (path.empty()) return json::object();
  std::ifstream is(path);
  if (!is) throw std::runtime_error("cannot open config " + path);
  return json::parse(is);
}

// Flags that were actually given override the config file.
template <typename T>
void set_if(const CLI::Option* opt, json& node, const char* key, const T& value) {
  if (opt->count() > 0) node[key] = value;
}

void print_outputs(const dilgp::RunOutcome& r) {
  std::cout << "wrote " << r.out_dir.string() << '\n';
  for (const auto& [name, sum] : r.manifest.at("outputs").items())
    std::cout << "  " << name << "  sha256:" << sum.get<std::string>() << '\n';
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"DIL-GP: Gaussian processes with domain-invariant learning"};
  app.set_version_flag("--version", dilgp::tool_version());
  app.require_subcommand(1);

  // generate
  auto* gen = app.add_subcommand("generate", "Write a synthetic train/test split as CSV");
  std::string gen_config, gen_out, gen_name = "synthetic_1d";
  std::uint64_t gen_seed = 0;
  bool gen_noise_std = false;
  gen->add_option("--config", gen_config, "JSON config file");
  auto* o_gen_name = gen->add_option("--generator", gen_name, "synthetic_1d or synthetic_2d");
  auto* o_gen_seed = gen->add_option("--seed", gen_seed, "Dataset seed");
  auto* o_gen_std = gen->add_flag("--noise-as-std", gen_noise_std, "Read N(0, v) noise as a std");
  gen->add_option("--out", gen_out, "Output directory")->required();

  // fit-eval
  auto* fit = app.add_subcommand("fit-eval", "Train a model and report test RMSE and coverage");
  std::string fit_config, fit_out, f_gen, f_train_csv, f_test_csv, f_target, f_domain, f_model,
      f_kernel;
  std::vector<std::string> f_features;
  std::uint64_t f_seed = 0, f_train_seed = 0;
  double f_lambda = 0, f_eta1 = 0, f_eta2 = 0, f_sigma2 = 0;
  int f_t1 = 0, f_t2 = 0, f_sweep = 1;
  bool f_learn_noise = false, f_raw = false, f_select = false, f_line_search = false;
  std::string f_grad_mode;
  fit->add_option("--config", fit_config, "JSON config file");
  auto* o_f_gen = fit->add_option("--generator", f_gen, "synthetic_1d, synthetic_2d or csv");
  auto* o_f_seed = fit->add_option("--seed", f_seed, "Dataset seed (first seed of a sweep)");
  auto* o_f_train = fit->add_option("--train-csv", f_train_csv, "Training CSV (implies --generator csv)");
  auto* o_f_test = fit->add_option("--test-csv", f_test_csv, "Test CSV");
  auto* o_f_target = fit->add_option("--target", f_target, "Target column");
  auto* o_f_feat = fit->add_option("--features", f_features, "Feature columns")->delimiter(',');
  auto* o_f_dom = fit->add_option("--domain-column", f_domain,
                                  "Report per-domain RMSE; for CSV input, the column holding domains");
  auto* o_f_model = fit->add_option("--model", f_model, "dil_gp, gp_gaussian, gp_rq or gp_dp");
  auto* o_f_kernel = fit->add_option("--kernel", f_kernel, "Kernel for dil_gp: gaussian, rq or dp");
  auto* o_f_lambda = fit->add_option("--lambda", f_lambda, "Penalty weight");
  auto* o_f_eta1 = fit->add_option("--eta1", f_eta1, "Inner (partition) learning rate");
  auto* o_f_eta2 = fit->add_option("--eta2", f_eta2, "Outer (hyperparameter) learning rate");
  auto* o_f_t1 = fit->add_option("--t1", f_t1, "Outer iterations");
  auto* o_f_t2 = fit->add_option("--t2", f_t2, "Inner steps per outer iteration");
  auto* o_f_sigma2 = fit->add_option("--sigma2", f_sigma2, "Noise variance (standardized units)");
  auto* o_f_tseed = fit->add_option("--train-seed", f_train_seed, "Seed for the partition initializer");
  auto* o_f_gm = fit->add_option("--grad-mode", f_grad_mode, "analytic_fd_hybrid or full_fd");
  auto* o_f_ln = fit->add_flag("--learn-noise", f_learn_noise, "Optimize log sigma2 as well");
  auto* o_f_ls = fit->add_flag("--line-search", f_line_search, "Reject steps that increase the objective");
  auto* o_f_raw = fit->add_flag("--raw", f_raw, "Skip standardization");
  auto* o_f_sweep = fit->add_option("--sweep", f_sweep, "Run this many consecutive seeds and summarize");
  auto* o_f_select = fit->add_flag("--select", f_select,
                                   "Choose lambda and learning rate on dev seeds first");
  fit->add_option("--out", fit_out, "Output directory")->required();

  // bo
  auto* bo = app.add_subcommand("bo", "Bayesian optimization with a DIL-GP or GP surrogate");
  std::string bo_config, bo_out, b_obj, b_sur, b_acq, b_traj, b_kernel;
  int b_tbo = 0, b_ninit = 0, b_t1 = 0, b_t2 = 0;
  std::uint64_t b_seed = 0;
  double b_beta = 0, b_lambda = 0;
  bo->add_option("--config", bo_config, "JSON config file");
  auto* o_b_obj = bo->add_option("--objective", b_obj, "quadratic, forrester or quad_pid");
  auto* o_b_sur = bo->add_option("--surrogate", b_sur, "dil_gp, gp or fixed_gp");
  auto* o_b_acq = bo->add_option("--acquisition", b_acq, "ucb or ei");
  auto* o_b_beta = bo->add_option("--ucb-beta", b_beta, "UCB exploration weight");
  auto* o_b_tbo = bo->add_option("--t-bo", b_tbo, "Number of proposals");
  auto* o_b_ninit = bo->add_option("--n-init", b_ninit, "Random initial points");
  auto* o_b_seed = bo->add_option("--seed", b_seed, "Run seed");
  auto* o_b_traj = bo->add_option("--trajectory", b_traj, "hover, fig8, sin_forward or spiral_up");
  auto* o_b_kernel = bo->add_option("--kernel", b_kernel, "Surrogate kernel");
  auto* o_b_lambda = bo->add_option("--lambda", b_lambda, "Surrogate penalty weight");
  auto* o_b_t1 = bo->add_option("--t1", b_t1, "Surrogate outer iterations per refit");
  auto* o_b_t2 = bo->add_option("--t2", b_t2, "Surrogate inner steps");
  bo->add_option("--out", bo_out, "Output directory")->required();

  // replay
  auto* rep = app.add_subcommand("replay", "Re-run a manifest and compare output checksums");
  std::string rep_manifest, rep_out;
  rep->add_option("manifest", rep_manifest, "manifest.json of an earlier run")->required();
  rep->add_option("--out", rep_out, "Output directory for the re-run")->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (*gen) {
      json c = load_config(gen_config);
      set_if(o_gen_name, c, "generator", gen_name);
      set_if(o_gen_seed, c, "seed", gen_seed);
      set_if(o_gen_std, c, "noise_as_std", gen_noise_std);
      print_outputs(dilgp::run_command("generate", c, gen_out));
    } else if (*fit) {
      json c = load_config(fit_config);
      json& d = c["data"];
      if (d.is_null()) d = json::object();
      set_if(o_f_gen, d, "generator", f_gen);
      if (o_f_train->count() > 0) d["generator"] = "csv";
      set_if(o_f_seed, d, "seed", f_seed);
      set_if(o_f_train, d, "train_csv", f_train_csv);
      set_if(o_f_test, d, "test_csv", f_test_csv);
      set_if(o_f_target, d, "target", f_target);
      set_if(o_f_feat, d, "features", f_features);
      if (o_f_dom->count() > 0) {
        c["per_domain"] = true;
        if (d.value("generator", std::string()) == "csv") d["domain_column"] = f_domain;
      }
      set_if(o_f_model, c, "model", f_model);
      set_if(o_f_kernel, c, "kernel", f_kernel);
      set_if(o_f_sigma2, c, "sigma2", f_sigma2);
      set_if(o_f_sweep, c, "sweep", f_sweep);
      if (o_f_raw->count() > 0) c["standardize"] = !f_raw;
      if (o_f_select->count() > 0 && f_select && !c.contains("selection")) c["selection"] = json::object();
      json& t = c["train"];
      if (t.is_null()) t = json::object();
      set_if(o_f_lambda, t, "lambda", f_lambda);
      set_if(o_f_eta1, t, "eta1", f_eta1);
      set_if(o_f_eta2, t, "eta2", f_eta2);
      set_if(o_f_t1, t, "t1_outer", f_t1);
      set_if(o_f_t2, t, "t2_inner", f_t2);
      set_if(o_f_tseed, t, "seed", f_train_seed);
      set_if(o_f_gm, t, "grad_mode", f_grad_mode);
      set_if(o_f_ln, t, "learn_noise", f_learn_noise);
      set_if(o_f_ls, t, "line_search", f_line_search);
      const auto r = dilgp::run_command("fit-eval", c, fit_out);
      print_outputs(r);
    } else if (*bo) {
      json c = load_config(bo_config);
      set_if(o_b_obj, c, "objective", b_obj);
      set_if(o_b_traj, c, "trajectory", b_traj);
      json& b = c["bo"];
      if (b.is_null()) b = json::object();
      set_if(o_b_tbo, b, "t_bo", b_tbo);
      set_if(o_b_ninit, b, "n_init", b_ninit);
      set_if(o_b_seed, b, "seed", b_seed);
      set_if(o_b_acq, b, "acquisition", b_acq);
      set_if(o_b_beta, b, "ucb_beta", b_beta);
      json& s = b["surrogate"];
      if (s.is_null()) s = json::object();
      set_if(o_b_sur, s, "kind", b_sur);
      set_if(o_b_kernel, s, "kernel", b_kernel);
      json& t = s["train"];
      if (t.is_null()) t = json::object();
      set_if(o_b_lambda, t, "lambda", b_lambda);
      set_if(o_b_t1, t, "t1_outer", b_t1);
      set_if(o_b_t2, t, "t2_inner", b_t2);
      print_outputs(dilgp::run_command("bo", c, bo_out));
    } else if (*rep) {
      const dilgp::ReplayReport r = dilgp::replay(rep_manifest, rep_out);
      if (r.identical) {
        std::cout << "replay identical: " << r.manifest.at("outputs").size() << " outputs\n";
        return 0;
      }
      std::cerr << "replay mismatch:";
      for (const auto& m : r.mismatched) std::cerr << ' ' << m;
      std::cerr << '\n';
      return 3;
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }
  return 0;
}
