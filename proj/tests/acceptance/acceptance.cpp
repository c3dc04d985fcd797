// Acceptance suite: one PASS/FAIL line per criterion.
//
// Usage: dilgp_acceptance [--only N[,N...]] [--expect-fail N[,N...]] [--json PATH]
// The exit status counts failures that were not listed in --expect-fail, so
// a criterion with a documented shortfall still prints FAIL without breaking
// the build; one that unexpectedly passes is reported as such.

#include "../support.hpp"
#include "dilgp/bayes_opt.hpp"
#include "dilgp/dil.hpp"
#include "dilgp/experiments.hpp"
#include "dilgp/gp.hpp"
#include "dilgp/quad_sim.hpp"

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <set>
#include <sstream>
#include <string>
#include <vector>

using namespace dilgp;
using namespace dilgp::testing;
using nlohmann::json;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

// 1 -------------------------------------------------------------------------
Outcome gp_oracle() {
  const auto t0 = Clock::now();
  double worst = 0.0;
  const KernelKind kinds[] = {KernelKind::Gaussian, KernelKind::RationalQuadratic, KernelKind::DotProduct};
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const int n = 2 + static_cast<int>(seed % 5);  // 2..6
    const auto in = random_instance(seed, n, kinds[seed % 3]);
    const DenseGp ref = dense_gp(in);
    const auto pred = GPPosterior::fit(in.kind, in.params, in.noise, in.X, in.y).predict(in.Xs);
    worst = std::max(worst, (pred.mean - ref.mean).cwiseAbs().maxCoeff());
    worst = std::max(worst, (pred.var - ref.var.cwiseMax(0.0)).cwiseAbs().maxCoeff());
    worst = std::max(worst, std::abs(log_marginal_likelihood(in.kind, in.params, in.noise, in.X, in.y) - ref.lml));
  }
  const double secs = seconds_since(t0);
  return {worst <= 1e-8 && secs < 1.0,
          "max abs diff " + fmt("%.2e", worst) + " (tol 1e-8), " + fmt("%.3f", secs) + " s (< 1 s)"};
}

// 2 -------------------------------------------------------------------------
Outcome mask_reduction() {
  double worst = 0.0;
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const auto in = random_instance(seed, 3 + static_cast<int>(seed % 6), KernelKind::Gaussian);
    const Eigen::VectorXd ones = Eigen::VectorXd::Ones(in.y.size());
    const double a = env_log_likelihood(in.kind, in.params, in.noise, in.X, in.y, ones);
    const double b = log_marginal_likelihood(in.kind, in.params, in.noise, in.X, in.y);
    worst = std::max(worst, std::abs(a - b) / std::max(1.0, std::abs(b)));
  }
  const double tol = 4.0 * std::numeric_limits<double>::epsilon();
  return {worst <= tol, "max rel diff " + fmt("%.2e", worst) + " (tol 4 eps)"};
}

// 3 -------------------------------------------------------------------------
Outcome gradient_suite() {
  const auto t0 = Clock::now();
  constexpr double kTol = 1e-3;
  double worst = 0.0;
  auto track = [&](double analytic, double fd) {
    const double rel = std::abs(analytic - fd) / std::max({std::abs(analytic), std::abs(fd), 1e-6});
    worst = std::max(worst, rel);
  };
  const KernelKind kinds[] = {KernelKind::Gaussian, KernelKind::RationalQuadratic, KernelKind::DotProduct};
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const int n = 4 + static_cast<int>(seed % 5);  // 4..8
    const auto in = random_instance(seed + 1000, n, kinds[seed % 3]);
    const DilProblem p(in.kind, in.X, in.y, true);
    const DomainLogits q{in.q};
    const double lambda = 0.5 + 0.25 * static_cast<double>(seed % 4);

    // d objective / d log-hyperparameters
    const auto vg = p.objective_gradient(in.params, in.noise, q, lambda);
    const Eigen::VectorXd v0 = p.layout().pack(in.params, in.noise);
    for (Eigen::Index i = 0; i < v0.size(); ++i) {
      Eigen::VectorXd up = v0, dn = v0;
      up(i) += 1e-5;
      dn(i) -= 1e-5;
      const auto [pu, nu] = p.layout().unpack(up, in.params, in.noise);
      const auto [pd, nd] = p.layout().unpack(dn, in.params, in.noise);
      track(vg.grad(i), (p.objective(pu, nu, q, lambda) - p.objective(pd, nd, q, lambda)) / 2e-5);
    }

    // d penalty / d q
    const Eigen::VectorXd gq = p.penalty_q_gradient(in.params, in.noise, q);
    for (Eigen::Index i = 0; i < n; ++i) {
      DomainLogits up = q, dn = q;
      up.q_tilde(i) += 1e-5;
      dn.q_tilde(i) -= 1e-5;
      track(gq(i), (p.penalty(in.params, in.noise, up).penalty - p.penalty(in.params, in.noise, dn).penalty) / 2e-5);
    }

    // d/dw log p_e, differencing the masked likelihood directly
    const auto rep = p.penalty(in.params, in.noise, q);
    const EnvMasks m = env_masks(q);
    const Eigen::VectorXd* masks[2] = {&m.m0, &m.m1};
    for (int e = 0; e < 2; ++e) {
      auto at = [&](double w) {
        KernelParams s = in.params;
        for (Hyper h : active_hypers(in.kind)) s.at(h) += std::log(w);
        return env_log_likelihood(in.kind, s, in.noise, in.X, in.y, *masks[e]);
      };
      track(rep.per_env_grad[e], (at(1.0 + 1e-5) - at(1.0 - 1e-5)) / 2e-5);
    }
  }
  const double secs = seconds_since(t0);
  return {worst <= kTol && secs < 10.0,
          "max rel err " + fmt("%.2e", worst) + " (tol 1e-3), " + fmt("%.2f", secs) + " s (< 10 s)"};
}

// 4, 5 ----------------------------------------------------------------------
struct SyntheticComparison {
  SweepSummary dil;
  SweepSummary gp;
  SelectionOutcome dil_sel;
  SelectionOutcome gp_sel;
  double seconds = 0.0;
};

SyntheticComparison compare_on(const std::string& generator) {
  const auto t0 = Clock::now();
  FitEvalConfig base;
  base.data.generator = generator;
  base.sigma2 = 0.01;
  base.train.t1_outer = 100;
  base.train.t2_inner = 10;
  GridSelection grid;
  grid.dev_seeds = {100, 101, 102};
  grid.lambdas = {0.1, 0.5, 1.0, 3.0};
  grid.learning_rates = {0.01, 0.05, 0.1};

  FitEvalConfig dil = base;
  dil.model = "dil_gp";
  FitEvalConfig gp = base;
  gp.model = "gp_gaussian";

  SyntheticComparison out;
  out.dil_sel = select_hyperparameters(dil, grid);
  out.gp_sel = select_hyperparameters(gp, grid);
  dil = with_selection(dil, out.dil_sel);
  gp = with_selection(gp, out.gp_sel);
  std::vector<FitEvalRun> dr, gr;
  for (std::uint64_t s = 0; s < 5; ++s) {
    dr.push_back(fit_eval_once(dil, s));
    gr.push_back(fit_eval_once(gp, s));
  }
  out.dil = summarize(dr);
  out.gp = summarize(gr);
  out.seconds = seconds_since(t0);
  return out;
}

std::string describe(const SyntheticComparison& c) {
  std::ostringstream os;
  os << "DIL-GP " << fmt("%.4f", c.dil.rmse_mean) << " +- " << fmt("%.4f", c.dil.rmse_max_dev)
     << " (cov " << fmt("%.3f", c.dil.coverage_mean.value_or(NAN)) << ", lambda "
     << c.dil_sel.lambda << ", lr " << c.dil_sel.learning_rate << "), GP "
     << fmt("%.4f", c.gp.rmse_mean) << " +- " << fmt("%.4f", c.gp.rmse_max_dev) << " (cov "
     << fmt("%.3f", c.gp.coverage_mean.value_or(NAN)) << ", lr " << c.gp_sel.learning_rate
     << "), " << fmt("%.1f", c.seconds) << " s";
  return os.str();
}

std::optional<SyntheticComparison> g_one_d, g_two_d;

Outcome synthetic_1d() {
  g_one_d = compare_on("synthetic_1d");
  const auto& c = *g_one_d;
  const double cov = c.dil.coverage_mean.value_or(0.0);
  const bool ok = c.dil.rmse_mean < c.gp.rmse_mean && c.dil.rmse_mean >= 0.25 &&
                  c.dil.rmse_mean <= 0.45 && cov >= 0.85 && c.seconds < 300.0;
  return {ok, describe(c) + "; need DIL < GP, DIL in [0.25, 0.45], cov >= 0.85, < 300 s"};
}

Outcome synthetic_2d() {
  g_two_d = compare_on("synthetic_2d");
  const auto& c = *g_two_d;
  const bool ok = c.dil.rmse_mean <= 0.9 * c.gp.rmse_mean && c.seconds < 300.0;
  return {ok, describe(c) + "; need DIL <= 0.9 GP, < 300 s"};
}

// 6 -------------------------------------------------------------------------
Outcome information_gain_identity() {
  double worst = 0.0;
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    BOConfig cfg;
    cfg.seed = seed;
    cfg.t_bo = 6;
    cfg.n_init = 2;
    cfg.surrogate.kind = SurrogateKind::FixedGp;
    cfg.surrogate.init_params = KernelParams::from_natural(1.0, 0.3);
    cfg.surrogate.noise.sigma2 = 0.05;
    const SearchSpace space{Eigen::VectorXd::Zero(2), Eigen::VectorXd::Ones(2)};
    const auto f = [](const Eigen::VectorXd& x) { return std::sin(5.0 * x(0)) + x(1) * x(1); };
    const BORun run = bo_run(f, space, cfg);

    // Batch form on the queried points in the surrogate's input space.
    const Eigen::Index total = run.state.queried_x.rows();
    Eigen::MatrixXd U(total, 2);
    for (Eigen::Index i = 0; i < total; ++i) U.row(i) = space.to_unit(run.state.queried_x.row(i).transpose()).transpose();
    auto half_logdet = [&](Eigen::Index rows) {
      const Eigen::MatrixXd Ui = U.topRows(rows);
      const Eigen::MatrixXd K = kernel_matrix(KernelKind::Gaussian, cfg.surrogate.init_params, Ui, Ui);
      const Eigen::MatrixXd M = Eigen::MatrixXd::Identity(rows, rows) + K / cfg.surrogate.noise.sigma2;
      return 0.5 * std::log(M.determinant());
    };
    const double batch = half_logdet(total) - half_logdet(cfg.n_init);
    worst = std::max(worst, std::abs(batch - run.diagnostics.info_gain.back()));
  }
  return {worst <= 1e-6, "max |streaming - batch| " + fmt("%.2e", worst) + " (tol 1e-6), T = 6 after 2 initial points"};
}

// 7 -------------------------------------------------------------------------
Outcome bo_convergence() {
  const auto t0 = Clock::now();
  int hits = 0;
  bool diagnostics_ok = true;
  bool regret_ok = true;
  std::ostringstream xs;
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    BoExperimentConfig cfg;
    cfg.objective = "quadratic";
    cfg.bo.t_bo = 30;
    cfg.bo.seed = seed;
    const auto res = run_bo_experiment(cfg);
    const double x = res.run.state.incumbent_x(0);
    xs << (seed ? ", " : "") << fmt("%.3f", x);
    const bool hit = std::abs(x - 0.3) <= 0.05;
    hits += hit;
    diagnostics_ok = diagnostics_ok && res.run.records.size() == 30;
    for (const auto& r : res.run.records)
      diagnostics_ok = diagnostics_ok && std::isfinite(r.beta) && std::isfinite(r.bound);
    if (hit) {
      const auto& cr = *res.run.diagnostics.cum_regret;
      for (std::size_t t = 0; t < cr.size(); ++t) regret_ok = regret_ok && cr[t] <= res.run.diagnostics.regret_bound[t];
    }
  }
  const double secs = seconds_since(t0);
  return {hits >= 4 && diagnostics_ok && regret_ok && secs < 120.0,
          std::to_string(hits) + "/5 incumbents within 0.05 of 0.3 [" + xs.str() +
              "], diagnostics every step: " + (diagnostics_ok ? "yes" : "no") +
              ", regret below bound: " + (regret_ok ? "yes" : "no") + ", " + fmt("%.1f", secs) + " s"};
}

// 8 -------------------------------------------------------------------------
Outcome pid_transfer() {
  const auto t0 = Clock::now();
  std::ostringstream os;
  int fig8_wins = 0;
  int other_trajectories_ok = 0;
  for (TrajectoryKind kind : all_trajectories()) {
    int wins = 0;
    double dil_sum = 0.0, gp_sum = 0.0;
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
      BoExperimentConfig cfg;
      cfg.objective = "quad_pid";
      cfg.trajectory = kind;
      cfg.bo.t_bo = 100;
      cfg.bo.seed = seed;
      cfg.bo.surrogate.kind = SurrogateKind::DilGp;
      const double dil = *run_bo_experiment(cfg).heldout_ace;
      cfg.bo.surrogate.kind = SurrogateKind::VanillaGp;
      const double gp = *run_bo_experiment(cfg).heldout_ace;
      wins += dil <= gp;
      dil_sum += dil / 5.0;
      gp_sum += gp / 5.0;
    }
    os << to_string(kind) << " " << wins << "/5 (" << fmt("%.4f", dil_sum) << " vs " << fmt("%.4f", gp_sum) << ")  ";
    if (kind == TrajectoryKind::Fig8) {
      fig8_wins = wins;
    } else if (wins >= 4) {
      ++other_trajectories_ok;
    }
  }
  const double secs = seconds_since(t0);
  return {fig8_wins >= 4 && other_trajectories_ok >= 2 && secs < 900.0,
          os.str() + "; need fig8 >= 4/5 and >= 2 other trajectories at >= 4/5, " + fmt("%.1f", secs) + " s"};
}

// 9 -------------------------------------------------------------------------
Outcome determinism() {
  const auto root = std::filesystem::temp_directory_path() / "dilgp_acceptance_replay";
  std::filesystem::remove_all(root);
  const std::vector<std::pair<std::string, json>> checks{
      {"generate", {{"generator", "synthetic_2d"}, {"seed", 11}}},
      {"fit-eval", {{"data", {{"generator", "synthetic_1d"}, {"seed", 2}}}, {"train", {{"t1_outer", 10}, {"t2_inner", 3}}}}},
      {"bo", {{"objective", "quad_pid"}, {"trajectory", "hover"}, {"bo", {{"t_bo", 5}, {"seed", 3}}}}},
  };
  int identical = 0;
  for (std::size_t i = 0; i < checks.size(); ++i) {
    const auto dir = root / std::to_string(i);
    run_command(checks[i].first, checks[i].second, dir / "first");
    identical += replay(dir / "first" / "manifest.json", dir / "second").identical;
  }
  std::filesystem::remove_all(root);
  return {identical == 3, std::to_string(identical) + "/3 manifests replayed byte-identically (generate, fit-eval, bo)"};
}

// 10 ------------------------------------------------------------------------
Outcome theorem_shadow() {
  if (!g_one_d) g_one_d = compare_on("synthetic_1d");
  if (!g_two_d) g_two_d = compare_on("synthetic_2d");
  const bool a = g_one_d->dil.rmse_mean < g_one_d->gp.rmse_mean;
  const bool b = g_two_d->dil.rmse_mean < g_two_d->gp.rmse_mean;
  return {a && b, std::string("no direct test; shifted-test risk DIL-GP < GP on 1-D: ") + (a ? "yes" : "no") +
                      ", on 2-D: " + (b ? "yes" : "no")};
}

std::set<int> parse_list(const std::string& s) {
  std::set<int> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ','))
    if (!item.empty()) out.insert(std::stoi(item));
  return out;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"DIL-GP acceptance suite"};
  std::string only, expect_fail, json_path;
  app.add_option("--only", only, "Comma-separated criteria to run");
  app.add_option("--expect-fail", expect_fail, "Criteria with a documented shortfall");
  app.add_option("--json", json_path, "Also write results as JSON");
  CLI11_PARSE(app, argc, argv);
  const std::set<int> selected = parse_list(only);
  const std::set<int> expected = parse_list(expect_fail);

  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria{
      {"GP oracle equivalence", gp_oracle},
      {"masked likelihood reduction", mask_reduction},
      {"gradient suite", gradient_suite},
      {"1-D synthetic shift", synthetic_1d},
      {"2-D synthetic shift", synthetic_2d},
      {"information gain identity", information_gain_identity},
      {"BO convergence and regret diagnostics", bo_convergence},
      {"PID transfer to held-out wind", pid_transfer},
      {"determinism via manifest replay", determinism},
      {"OOD risk shadow of criteria 4-5", theorem_shadow},
  };

  int unexpected = 0;
  json results = json::array();
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    const int id = static_cast<int>(i) + 1;
    if (!selected.empty() && !selected.count(id)) continue;
    Outcome o;
    try {
      o = criteria[i].second();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    const bool known = expected.count(id) > 0;
    std::string tag;
    if (!o.pass && known) tag = " [expected failure, analysis in decisions ledger]";
    if (o.pass && known) tag = " [passed although listed as expected failure]";
    if (!o.pass && !known) ++unexpected;
    std::cout << (o.pass ? "PASS" : "FAIL") << "  criterion " << id << ": " << criteria[i].first
              << " -- " << o.detail << tag << std::endl;
    results.push_back({{"criterion", id}, {"name", criteria[i].first}, {"pass", o.pass},
                       {"expected_failure", known}, {"detail", o.detail}});
  }
  if (!json_path.empty()) std::ofstream(json_path) << results.dump(2) << '\n';
  return unexpected;
}
