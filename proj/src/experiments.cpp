#include "dilgp/experiments.hpp"

#include "dilgp/errors.hpp"
#include "dilgp/rng.hpp"

#include <openssl/evp.h>

#include <algorithm>
#include <array>
#include <chrono>
#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>
#include <stdexcept>

namespace dilgp {

namespace {

constexpr double kForresterMin = -6.020740055767083;

std::vector<double> to_vec(const Eigen::VectorXd& v) { return {v.data(), v.data() + v.size()}; }

std::string dump_file(const nlohmann::json& j) { return j.dump(2) + "\n"; }

std::string csv_bytes(const Dataset& d) {
  std::ostringstream os;
  write_csv(os, d);
  return os.str();
}

std::string trace_bytes(const std::vector<TraceRecord>& trace) {
  std::ostringstream os;
  write_trace_jsonl(os, trace);
  return os.str();
}

StandardizedSplit identity_split(const Dataset& train, const Dataset& test) {
  StandardizedSplit sp{train, test, {}};
  sp.scaler.x_mean = Eigen::VectorXd::Zero(train.dims());
  sp.scaler.x_std = Eigen::VectorXd::Ones(train.dims());
  return sp;
}

std::string canonical_command(const std::string& command) {
  if (command == "generate") return "generate";
  if (command == "fit-eval" || command == "fit_eval") return "fit-eval";
  if (command == "bo") return "bo";
  throw std::invalid_argument("unknown command '" + command + "' (expected generate, fit-eval or bo)");
}

}  // namespace

std::string tool_version() { return DILGP_VERSION; }

std::string sha256_hex(const std::string& bytes) {
  std::array<unsigned char, EVP_MAX_MD_SIZE> md{};
  unsigned int len = 0;
  if (EVP_Digest(bytes.data(), bytes.size(), md.data(), &len, EVP_sha256(), nullptr) != 1)
    throw std::runtime_error("SHA-256 digest failed");
  static constexpr char kHex[] = "0123456789abcdef";
  std::string out;
  out.reserve(2 * len);
  for (unsigned int i = 0; i < len; ++i) {
    out.push_back(kHex[md[i] >> 4]);
    out.push_back(kHex[md[i] & 0xf]);
  }
  return out;
}

// ---------------------------------------------------------------- datasets

void to_json(nlohmann::json& j, const DatasetSource& d) {
  if (d.generator == "csv") {
    j = nlohmann::json{{"generator", "csv"},         {"train_csv", d.train_csv},
                       {"test_csv", d.test_csv},     {"target", d.target},
                       {"features", d.features},     {"seed", d.seed}};
    j["domain_column"] = d.domain_column ? nlohmann::json(*d.domain_column) : nlohmann::json(nullptr);
  } else {
    j = nlohmann::json{{"generator", d.generator}, {"seed", d.seed}, {"noise_as_std", d.noise_as_std}};
  }
}

void from_json(const nlohmann::json& j, DatasetSource& d) {
  d = DatasetSource{};
  d.generator = j.value("generator", d.generator);
  d.seed = j.value("seed", d.seed);
  d.noise_as_std = j.value("noise_as_std", false);
  if (d.generator == "csv") {
    d.train_csv = j.at("train_csv").get<std::string>();
    d.test_csv = j.at("test_csv").get<std::string>();
    d.target = j.at("target").get<std::string>();
    d.features = j.at("features").get<std::vector<std::string>>();
    if (j.contains("domain_column") && !j.at("domain_column").is_null())
      d.domain_column = j.at("domain_column").get<std::string>();
  } else if (d.generator != "synthetic_1d" && d.generator != "synthetic_2d") {
    throw std::invalid_argument("unknown generator '" + d.generator +
                                "' (expected synthetic_1d, synthetic_2d or csv)");
  }
}

std::pair<Dataset, Dataset> resolve_dataset(const DatasetSource& d, std::uint64_t seed) {
  const SyntheticOptions opt{.noise_as_std = d.noise_as_std};
  if (d.generator == "synthetic_1d") return gen_synthetic_1d(seed, opt);
  if (d.generator == "synthetic_2d") return gen_synthetic_2d(seed, opt);
  if (d.generator == "csv")
    return {load_csv(d.train_csv, d.target, d.features, d.domain_column),
            load_csv(d.test_csv, d.target, d.features, d.domain_column)};
  throw std::invalid_argument("unknown generator '" + d.generator + "'");
}

// ---------------------------------------------------------------- fit/eval

void to_json(nlohmann::json& j, const GridSelection& g) {
  j = nlohmann::json{{"dev_seeds", g.dev_seeds},
                     {"lambdas", g.lambdas},
                     {"learning_rates", g.learning_rates}};
}

void from_json(const nlohmann::json& j, GridSelection& g) {
  GridSelection d;
  g.dev_seeds = j.value("dev_seeds", d.dev_seeds);
  g.lambdas = j.value("lambdas", d.lambdas);
  g.learning_rates = j.value("learning_rates", d.learning_rates);
  if (g.dev_seeds.empty() || g.lambdas.empty() || g.learning_rates.empty())
    throw std::invalid_argument("selection grids and dev_seeds must be nonempty");
}

KernelKind FitEvalConfig::model_kernel() const {
  if (model == "dil_gp") return kernel;
  if (model == "gp_gaussian") return KernelKind::Gaussian;
  if (model == "gp_rq") return KernelKind::RationalQuadratic;
  if (model == "gp_dp") return KernelKind::DotProduct;
  throw std::invalid_argument("unknown model '" + model +
                              "' (expected dil_gp, gp_gaussian, gp_rq or gp_dp)");
}

void FitEvalConfig::validate() const {
  (void)model_kernel();
  init_params.validate();
  train.validate();
  if (!(sigma2 > 0.0) || !std::isfinite(sigma2)) throw std::invalid_argument("sigma2 must be > 0");
  if (sweep < 1) throw std::invalid_argument("sweep must be >= 1");
  if (selection && data.generator == "csv")
    throw std::invalid_argument("hyperparameter selection needs a generator with dev seeds");
}

void to_json(nlohmann::json& j, const FitEvalConfig& c) {
  nlohmann::json train = c.train;
  if (!c.is_dil()) {
    for (const char* k : {"lambda", "t2_inner", "eta1", "q_init_scale", "grad_mode", "seed"})
      train.erase(k);
  }
  j = nlohmann::json{{"data", c.data},
                     {"model", c.model},
                     {"init_params", c.init_params},
                     {"sigma2", c.sigma2},
                     {"train", train},
                     {"standardize", c.standardize},
                     {"sweep", c.sweep},
                     {"per_domain", c.per_domain}};
  if (c.is_dil()) j["kernel"] = std::string(to_string(c.kernel));
  if (c.selection) {
    nlohmann::json s = *c.selection;
    if (!c.is_dil()) s.erase("lambdas");
    j["selection"] = s;
  } else {
    j["selection"] = nullptr;
  }
}

void from_json(const nlohmann::json& j, FitEvalConfig& c) {
  const FitEvalConfig d;
  c = FitEvalConfig{};
  c.data = j.contains("data") ? j.at("data").get<DatasetSource>() : d.data;
  c.model = j.value("model", d.model);
  c.kernel = kernel_kind_from_string(j.value("kernel", std::string(to_string(d.kernel))));
  c.init_params = j.contains("init_params") ? j.at("init_params").get<KernelParams>() : d.init_params;
  c.sigma2 = j.value("sigma2", d.sigma2);
  c.train = j.contains("train") ? j.at("train").get<TrainConfig>() : d.train;
  c.standardize = j.value("standardize", d.standardize);
  c.sweep = j.value("sweep", d.sweep);
  c.per_domain = j.value("per_domain", d.per_domain);
  if (j.contains("selection") && !j.at("selection").is_null())
    c.selection = j.at("selection").get<GridSelection>();
  c.validate();
}

FitEvalRun fit_eval_once(const FitEvalConfig& cfg, std::uint64_t seed) {
  cfg.validate();
  const auto [train, test] = resolve_dataset(cfg.data, seed);
  const StandardizedSplit sp =
      cfg.standardize ? standardize_fit_transform(train, test) : identity_split(train, test);
  const KernelKind kind = cfg.model_kernel();
  const NoiseSpec noise{cfg.sigma2};

  FitEvalRun run;
  run.seed = seed;
  if (cfg.is_dil()) {
    TrainConfig tc = cfg.train;
    tc.seed = derive_seed(cfg.train.seed, seed);
    TrainResult r = train_dil_gp(kind, cfg.init_params, noise, sp.train.x, sp.train.y, tc);
    run.params = r.params;
    run.noise = r.noise;
    run.trace = std::move(r.trace);
    run.aborted = r.aborted;
    run.error = std::move(r.error);
  } else {
    const TrainConfig& tc = cfg.train;
    VanillaResult r = train_vanilla_gp(kind, cfg.init_params, noise, sp.train.x, sp.train.y,
                                       tc.t1_outer, tc.eta2, tc.learn_noise, tc.line_search,
                                       tc.mean_const, tc.normalize);
    run.params = r.params;
    run.noise = r.noise;
    run.trace = std::move(r.trace);
    run.aborted = r.aborted;
    run.error = std::move(r.error);
  }

  const GPPosterior post = GPPosterior::fit(kind, run.params, run.noise, sp.train.x, sp.train.y,
                                            cfg.train.mean_const);
  const Prediction pred = post.predict(sp.test.x);
  const Eigen::VectorXd mean = sp.scaler.inverse_y(pred.mean);
  const Eigen::VectorXd std =
      ((pred.var.array() + run.noise.sigma2).sqrt() * sp.scaler.y_std).matrix();

  run.report.rmse = rmse(mean, test.y);
  run.report.coverage_rate = coverage_rate(mean, std, test.y);
  run.report.n_test = test.size();
  if (cfg.per_domain && test.domain_tag) {
    const std::vector<int>& tags = *test.domain_tag;
    std::map<int, std::vector<Eigen::Index>> groups;
    for (std::size_t i = 0; i < tags.size(); ++i)
      groups[tags[i]].push_back(static_cast<Eigen::Index>(i));
    for (const auto& [tag, rows] : groups) {
      Eigen::VectorXd p(static_cast<Eigen::Index>(rows.size()));
      Eigen::VectorXd t(p.size());
      for (std::size_t i = 0; i < rows.size(); ++i) {
        p(static_cast<Eigen::Index>(i)) = mean(rows[i]);
        t(static_cast<Eigen::Index>(i)) = test.y(rows[i]);
      }
      const auto label = static_cast<std::size_t>(tag) < test.domain_labels.size() && tag >= 0
                             ? test.domain_labels[static_cast<std::size_t>(tag)]
                             : std::to_string(tag);
      run.report.per_domain_rmse[label] = rmse(p, t);
    }
  }
  return run;
}

SweepSummary summarize(const std::vector<FitEvalRun>& runs) {
  if (runs.empty()) throw std::invalid_argument("summarize needs at least one run");
  SweepSummary s;
  const auto n = static_cast<double>(runs.size());
  for (const auto& r : runs) s.rmse_mean += r.report.rmse / n;
  for (const auto& r : runs) s.rmse_max_dev = std::max(s.rmse_max_dev, std::abs(r.report.rmse - s.rmse_mean));
  const bool all_cov = std::all_of(runs.begin(), runs.end(),
                                   [](const FitEvalRun& r) { return r.report.coverage_rate.has_value(); });
  if (all_cov) {
    double m = 0.0;
    for (const auto& r : runs) m += *r.report.coverage_rate / n;
    double dev = 0.0;
    for (const auto& r : runs) dev = std::max(dev, std::abs(*r.report.coverage_rate - m));
    s.coverage_mean = m;
    s.coverage_max_dev = dev;
  }
  return s;
}

void to_json(nlohmann::json& j, const SweepSummary& s) {
  j = nlohmann::json{{"rmse_mean", s.rmse_mean}, {"rmse_max_dev", s.rmse_max_dev}};
  if (s.coverage_mean) {
    j["coverage_mean"] = *s.coverage_mean;
    j["coverage_max_dev"] = *s.coverage_max_dev;
  }
}

FitEvalConfig with_selection(FitEvalConfig cfg, const SelectionOutcome& s) {
  cfg.train.eta2 = s.learning_rate;
  if (cfg.is_dil()) {
    cfg.train.eta1 = s.learning_rate;
    cfg.train.lambda = s.lambda;
  }
  return cfg;
}

SelectionOutcome select_hyperparameters(const FitEvalConfig& cfg, const GridSelection& grid) {
  if (cfg.data.generator == "csv")
    throw std::invalid_argument("hyperparameter selection needs a generator with dev seeds");
  const std::vector<double> lambdas = cfg.is_dil() ? grid.lambdas : std::vector<double>{0.0};
  SelectionOutcome best;
  best.table = nlohmann::json::array();
  double best_rmse = std::numeric_limits<double>::infinity();
  for (double lr : grid.learning_rates) {
    for (double lam : lambdas) {
      const SelectionOutcome cand{lam, lr, {}};
      const FitEvalConfig c = with_selection(cfg, cand);
      double sum = 0.0;
      for (std::uint64_t s : grid.dev_seeds) sum += fit_eval_once(c, s).report.rmse;
      const double mean = sum / static_cast<double>(grid.dev_seeds.size());
      nlohmann::json row{{"learning_rate", lr}, {"dev_rmse", mean}};
      if (cfg.is_dil()) row["lambda"] = lam;
      best.table.push_back(row);
      if (mean < best_rmse) {
        best_rmse = mean;
        best.lambda = lam;
        best.learning_rate = lr;
      }
    }
  }
  return best;
}

// ---------------------------------------------------------------- BO

void BoExperimentConfig::validate() const {
  if (objective != "quadratic" && objective != "forrester" && objective != "quad_pid")
    throw std::invalid_argument("unknown objective '" + objective +
                                "' (expected quadratic, forrester or quad_pid)");
  if (bo.t_bo < 1 || bo.n_init < 1) throw std::invalid_argument("t_bo and n_init must be >= 1");
  if (objective == "quad_pid") {
    train_wind.validate();
    heldout_wind.validate();
    if (train_wind_seeds.empty() || heldout_wind_seeds.empty())
      throw std::invalid_argument("wind seed lists must be nonempty");
    if (!(gain_upper > 0.0)) throw std::invalid_argument("gain_upper must be > 0");
  }
}

void to_json(nlohmann::json& j, const BoExperimentConfig& c) {
  j = nlohmann::json{{"objective", c.objective}, {"bo", c.bo}};
  if (c.objective == "quad_pid") {
    j["trajectory"] = std::string(to_string(c.trajectory));
    j["train_wind"] = c.train_wind;
    j["heldout_wind"] = c.heldout_wind;
    j["train_wind_seeds"] = c.train_wind_seeds;
    j["heldout_wind_seeds"] = c.heldout_wind_seeds;
    j["gain_upper"] = c.gain_upper;
  }
}

void from_json(const nlohmann::json& j, BoExperimentConfig& c) {
  const BoExperimentConfig d;
  c = BoExperimentConfig{};
  c.objective = j.value("objective", d.objective);
  c.bo = j.contains("bo") ? j.at("bo").get<BOConfig>() : d.bo;
  c.trajectory = trajectory_kind_from_string(j.value("trajectory", std::string(to_string(d.trajectory))));
  if (j.contains("train_wind")) c.train_wind = j.at("train_wind").get<WindDomainSpec>();
  if (j.contains("heldout_wind")) c.heldout_wind = j.at("heldout_wind").get<WindDomainSpec>();
  c.train_wind_seeds = j.value("train_wind_seeds", d.train_wind_seeds);
  c.heldout_wind_seeds = j.value("heldout_wind_seeds", d.heldout_wind_seeds);
  c.gain_upper = j.value("gain_upper", d.gain_upper);
  c.validate();
}

BoExperimentResult run_bo_experiment(const BoExperimentConfig& cfg) {
  cfg.validate();
  BOConfig bo = cfg.bo;
  SearchSpace space;
  Objective f;
  const std::array kinds{cfg.trajectory};
  if (cfg.objective == "quadratic") {
    space = {Eigen::VectorXd::Zero(1), Eigen::VectorXd::Ones(1)};
    f = [](const Eigen::VectorXd& x) { return (x(0) - 0.3) * (x(0) - 0.3); };
    if (!bo.f_star) bo.f_star = 0.0;
  } else if (cfg.objective == "forrester") {
    space = {Eigen::VectorXd::Zero(1), Eigen::VectorXd::Ones(1)};
    f = [](const Eigen::VectorXd& x) {
      const double a = 6.0 * x(0) - 2.0;
      return a * a * std::sin(12.0 * x(0) - 4.0);
    };
    if (!bo.f_star) bo.f_star = kForresterMin;
  } else {
    space = {Eigen::VectorXd::Zero(3), Eigen::VectorXd::Constant(3, cfg.gain_upper)};
    f = [&](const Eigen::VectorXd& x) {
      return pid_objective(PIDGains::from_vector(x), cfg.train_wind, kinds, cfg.train_wind_seeds);
    };
  }

  BoExperimentResult res;
  res.run = bo_run(f, space, bo);
  const BOState& st = res.run.state;
  nlohmann::json& s = res.summary;
  s["objective"] = cfg.objective;
  s["surrogate"] = std::string(to_string(bo.surrogate.kind));
  s["n_evaluations"] = st.queried_f.size();
  s["proposals"] = res.run.records.size();
  s["failures"] = st.failures;
  s["aborted"] = st.aborted;
  if (st.incumbent_x.size() > 0) {
    s["incumbent_x"] = to_vec(st.incumbent_x);
    s["incumbent_f"] = st.incumbent_f;
  } else {
    s["incumbent_x"] = nullptr;
    s["incumbent_f"] = nullptr;
  }
  if (!res.run.records.empty()) {
    const BOStepRecord& last = res.run.records.back();
    s["final_beta"] = last.beta;
    s["final_info_gain"] = last.info_gain;
    s["final_bound"] = last.bound;
  }
  if (res.run.diagnostics.cum_regret) {
    const auto& cr = *res.run.diagnostics.cum_regret;
    bool below = true;
    for (std::size_t i = 0; i < cr.size(); ++i) below = below && cr[i] <= res.run.diagnostics.regret_bound[i];
    s["cum_regret"] = cr.empty() ? 0.0 : cr.back();
    s["regret_below_bound"] = below;
  }
  if (cfg.objective == "quad_pid" && st.incumbent_x.size() > 0) {
    const PIDGains g = PIDGains::from_vector(st.incumbent_x);
    res.train_ace = st.incumbent_f;
    res.heldout_ace = pid_objective(g, cfg.heldout_wind, kinds, cfg.heldout_wind_seeds);
    s["gains"] = {{"kp", g.kp}, {"ki", g.ki}, {"kd", g.kd}};
    s["train_ace"] = *res.train_ace;
    s["heldout_ace"] = *res.heldout_ace;
  }
  return res;
}

// ---------------------------------------------------------------- commands

nlohmann::json resolve_config(const std::string& command, const nlohmann::json& config) {
  const std::string cmd = canonical_command(command);
  if (cmd == "generate") {
    const std::string gen = config.value("generator", std::string("synthetic_1d"));
    if (gen != "synthetic_1d" && gen != "synthetic_2d")
      throw std::invalid_argument("unknown generator '" + gen +
                                  "' (expected synthetic_1d or synthetic_2d)");
    return nlohmann::json{{"generator", gen},
                          {"seed", config.value("seed", std::uint64_t{0})},
                          {"noise_as_std", config.value("noise_as_std", false)}};
  }
  if (cmd == "fit-eval") return nlohmann::json(config.get<FitEvalConfig>());
  return nlohmann::json(config.get<BoExperimentConfig>());
}

OutputFiles cmd_generate(const nlohmann::json& config) {
  const nlohmann::json r = resolve_config("generate", config);
  DatasetSource src;
  src.generator = r.at("generator").get<std::string>();
  src.noise_as_std = r.at("noise_as_std").get<bool>();
  const auto [train, test] = resolve_dataset(src, r.at("seed").get<std::uint64_t>());
  return {{"train.csv", csv_bytes(train)}, {"test.csv", csv_bytes(test)}};
}

OutputFiles cmd_fit_eval(const nlohmann::json& config) {
  FitEvalConfig cfg = config.get<FitEvalConfig>();
  OutputFiles out;
  if (cfg.selection) {
    const SelectionOutcome sel = select_hyperparameters(cfg, *cfg.selection);
    nlohmann::json j{{"learning_rate", sel.learning_rate}, {"candidates", sel.table}};
    if (cfg.is_dil()) j["lambda"] = sel.lambda;
    out["selection.json"] = dump_file(j);
    cfg = with_selection(cfg, sel);
  }

  std::vector<FitEvalRun> runs;
  for (int i = 0; i < cfg.sweep; ++i) runs.push_back(fit_eval_once(cfg, cfg.data.seed + i));

  auto run_json = [&](const FitEvalRun& r) {
    nlohmann::json j = r.report;
    j["seed"] = r.seed;
    j["params"] = r.params;
    j["sigma2"] = r.noise.sigma2;
    j["aborted"] = r.aborted;
    if (r.aborted) j["error"] = r.error;
    return j;
  };
  nlohmann::json report = run_json(runs.front());
  report["model"] = cfg.model;
  if (cfg.is_dil()) {
    report["lambda"] = cfg.train.lambda;
    report["eta1"] = cfg.train.eta1;
  }
  report["eta2"] = cfg.train.eta2;
  out["trace.jsonl"] = trace_bytes(runs.front().trace);
  if (runs.size() > 1) {
    report["runs"] = nlohmann::json::array();
    for (const FitEvalRun& r : runs) {
      report["runs"].push_back(run_json(r));
      out["trace_seed" + std::to_string(r.seed) + ".jsonl"] = trace_bytes(r.trace);
    }
    report["summary"] = summarize(runs);
  }
  out["report.json"] = dump_file(report);
  return out;
}

OutputFiles cmd_bo(const nlohmann::json& config) {
  const BoExperimentConfig cfg = config.get<BoExperimentConfig>();
  const BoExperimentResult res = run_bo_experiment(cfg);
  OutputFiles out;
  std::ostringstream trace;
  write_bo_trace_jsonl(trace, res.run);
  out["trace.jsonl"] = trace.str();
  out["summary.json"] = dump_file(res.summary);
  if (cfg.objective == "quad_pid" && res.run.state.incumbent_x.size() > 0) {
    const PIDGains g = PIDGains::from_vector(res.run.state.incumbent_x);
    std::ostringstream tr;
    write_trajectory_csv(tr, simulate(g, cfg.trajectory, cfg.train_wind, cfg.train_wind_seeds.front()));
    out["trajectory_train.csv"] = tr.str();
    std::ostringstream ho;
    write_trajectory_csv(ho, simulate(g, cfg.trajectory, cfg.heldout_wind, cfg.heldout_wind_seeds.front()));
    out["trajectory_heldout.csv"] = ho.str();
  }
  return out;
}

RunOutcome run_command(const std::string& command, const nlohmann::json& config,
                       const std::filesystem::path& out_dir) {
  const std::string cmd = canonical_command(command);
  const auto t0 = std::chrono::steady_clock::now();
  const nlohmann::json resolved = resolve_config(cmd, config);
  OutputFiles files = cmd == "generate" ? cmd_generate(resolved)
                      : cmd == "fit-eval" ? cmd_fit_eval(resolved)
                                          : cmd_bo(resolved);
  files["resolved_config.json"] = dump_file(resolved);
  const double wall = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();

  std::uint64_t seed = 0;
  if (cmd == "generate") seed = resolved.at("seed").get<std::uint64_t>();
  if (cmd == "fit-eval") seed = resolved.at("data").at("seed").get<std::uint64_t>();
  if (cmd == "bo") seed = resolved.at("bo").at("seed").get<std::uint64_t>();

  nlohmann::json manifest{{"command", cmd},
                          {"config_hash", sha256_hex(resolved.dump())},
                          {"seed", seed},
                          {"tool_version", tool_version()},
                          {"wall_clock_seconds", wall},
                          {"config", resolved}};
  nlohmann::json sums = nlohmann::json::object();
  for (const auto& [name, bytes] : files) sums[name] = sha256_hex(bytes);
  manifest["outputs"] = sums;

  std::filesystem::create_directories(out_dir);
  files["manifest.json"] = dump_file(manifest);
  for (const auto& [name, bytes] : files) {
    std::ofstream os(out_dir / name, std::ios::binary);
    os.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!os) throw std::runtime_error("could not write " + (out_dir / name).string());
  }
  return {out_dir, manifest};
}

ReplayReport replay(const std::filesystem::path& manifest_path,
                    const std::filesystem::path& out_dir) {
  std::ifstream is(manifest_path);
  if (!is) throw std::runtime_error("cannot open manifest " + manifest_path.string());
  const nlohmann::json recorded = nlohmann::json::parse(is);
  const RunOutcome again = run_command(recorded.at("command").get<std::string>(),
                                       recorded.at("config"), out_dir);
  ReplayReport rep;
  rep.manifest = again.manifest;
  const auto& want = recorded.at("outputs");
  const auto& got = again.manifest.at("outputs");
  for (const auto& [name, sum] : want.items()) {
    if (!got.contains(name) || got.at(name) != sum) rep.mismatched.push_back(name);
  }
  for (const auto& [name, sum] : got.items()) {
    if (!want.contains(name)) rep.mismatched.push_back(name);
  }
  rep.identical = rep.mismatched.empty();
  return rep;
}

}  // namespace dilgp
