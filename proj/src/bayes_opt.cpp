#include "dilgp/bayes_opt.hpp"

#include "dilgp/errors.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <ostream>
#include <random>
#include <stdexcept>

namespace dilgp {

namespace {

constexpr int kGlobalCandidates = 1024;
constexpr int kLocalCandidates = 64;
constexpr double kLocalStdFraction = 0.05;

std::vector<double> to_vec(const Eigen::VectorXd& v) { return {v.data(), v.data() + v.size()}; }

Eigen::VectorXd from_vec(const std::vector<double>& v) {
  return Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size()));
}

double normal_cdf(double z) { return 0.5 * std::erfc(-z / std::numbers::sqrt2); }
double normal_pdf(double z) { return std::exp(-0.5 * z * z) / std::sqrt(2.0 * std::numbers::pi); }

Eigen::VectorXd uniform_point(const SearchSpace& space, Rng& rng) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  Eigen::VectorXd unit(space.dims());
  for (Eigen::Index i = 0; i < unit.size(); ++i) unit(i) = u(rng);
  return space.from_unit(unit);
}

}  // namespace

void SearchSpace::validate() const {
  if (lower.size() == 0 || lower.size() != upper.size())
    throw DimensionError("search space bounds must be nonempty and of equal length");
  require_finite(lower, "search space lower bound");
  require_finite(upper, "search space upper bound");
  for (Eigen::Index i = 0; i < lower.size(); ++i)
    if (!(lower(i) < upper(i)))
      throw std::invalid_argument("search space needs lower < upper in every dimension");
}

Eigen::VectorXd SearchSpace::to_unit(const Eigen::VectorXd& x) const {
  return ((x - lower).array() / (upper - lower).array()).matrix();
}

Eigen::VectorXd SearchSpace::from_unit(const Eigen::VectorXd& u) const {
  return (lower.array() + u.array() * (upper - lower).array()).matrix();
}

double acquisition_ucb(double mean, double std, double beta_t) {
  return mean - std::sqrt(beta_t) * std;
}

double acquisition_ei(double mean, double std, double best_f) {
  const double diff = best_f - mean;
  if (std <= 0.0) return -std::max(diff, 0.0);
  const double z = diff / std;
  return -(diff * normal_cdf(z) + std * normal_pdf(z));
}

double beta_schedule(int /*t*/, double B, double sigma, double gamma_prev, double delta) {
  if (!(delta > 0.0 && delta < 1.0)) throw std::invalid_argument("delta must lie in (0, 1)");
  if (gamma_prev < 0.0) throw std::invalid_argument("gamma_prev must be >= 0");
  return B + sigma * std::sqrt(2.0 * (gamma_prev + 1.0 + std::log(4.0 / delta)));
}

double information_gain_step(double sigma2_noise, double sigma_pred) {
  if (!(sigma2_noise > 0.0)) throw std::invalid_argument("sigma2_noise must be > 0");
  return 0.5 * std::log1p(sigma_pred * sigma_pred / sigma2_noise);
}

double regret_bound(double beta_T, double gamma_T, int T, double sigma2_noise) {
  if (T < 1) throw std::invalid_argument("T must be >= 1");
  const double c1 = 8.0 / std::log1p(1.0 / sigma2_noise);
  return beta_T * std::sqrt(c1 * T * gamma_T);
}

std::string_view to_string(SurrogateKind kind) {
  switch (kind) {
    case SurrogateKind::DilGp:
      return "dil_gp";
    case SurrogateKind::VanillaGp:
      return "gp";
    case SurrogateKind::FixedGp:
      return "fixed_gp";
  }
  return "dil_gp";
}

SurrogateKind surrogate_kind_from_string(std::string_view name) {
  if (name == "dil_gp") return SurrogateKind::DilGp;
  if (name == "gp") return SurrogateKind::VanillaGp;
  if (name == "fixed_gp") return SurrogateKind::FixedGp;
  throw std::invalid_argument("unknown surrogate '" + std::string(name) +
                              "' (expected dil_gp, gp or fixed_gp)");
}

void to_json(nlohmann::json& j, const SurrogateConfig& c) {
  j = nlohmann::json{{"kind", std::string(to_string(c.kind))},
                     {"kernel", std::string(to_string(c.kernel))},
                     {"init_params", c.init_params},
                     {"sigma2", c.noise.sigma2},
                     {"train", c.train}};
}

void from_json(const nlohmann::json& j, SurrogateConfig& c) {
  SurrogateConfig d;
  c.kind = surrogate_kind_from_string(j.value("kind", std::string(to_string(d.kind))));
  c.kernel = kernel_kind_from_string(j.value("kernel", std::string(to_string(d.kernel))));
  c.init_params = j.contains("init_params") ? j.at("init_params").get<KernelParams>() : d.init_params;
  c.noise.sigma2 = j.value("sigma2", d.noise.sigma2);
  // Missing train fields keep the reduced per-refit budgets, not TrainConfig's.
  nlohmann::json train = d.train;
  if (j.contains("train")) train.merge_patch(j.at("train"));
  c.train = train.get<TrainConfig>();
}

std::pair<Eigen::VectorXd, Eigen::VectorXd> Surrogate::predict(const Eigen::MatrixXd& X) const {
  Eigen::MatrixXd U(X.rows(), X.cols());
  for (Eigen::Index i = 0; i < X.rows(); ++i) U.row(i) = space->to_unit(X.row(i).transpose());
  Prediction p = posterior.predict(U);
  return {std::move(p.mean), p.var.cwiseSqrt()};
}

Surrogate fit_surrogate(const SurrogateConfig& cfg, const SearchSpace& space,
                        const Eigen::MatrixXd& X, const Eigen::VectorXd& f, std::uint64_t seed) {
  if (X.rows() < 1 || X.rows() != f.size())
    throw DimensionError("surrogate needs at least one point and matching f, got X " +
                         shape_string(X) + " and f of length " + std::to_string(f.size()));
  Eigen::MatrixXd U(X.rows(), X.cols());
  for (Eigen::Index i = 0; i < X.rows(); ++i) U.row(i) = space.to_unit(X.row(i).transpose());

  const double mean = f.mean();
  double std = std::sqrt((f.array() - mean).square().mean());
  if (!(std > 0.0)) std = 1.0;
  const Eigen::VectorXd z = ((f.array() - mean) / std).matrix();

  KernelParams params = cfg.init_params;
  NoiseSpec noise = cfg.noise;
  bool aborted = false;
  switch (cfg.kind) {
    case SurrogateKind::DilGp: {
      TrainConfig tc = cfg.train;
      tc.seed = seed;
      TrainResult r = train_dil_gp(cfg.kernel, params, noise, U, z, tc);
      params = r.params;
      noise = r.noise;
      aborted = r.aborted;
      break;
    }
    case SurrogateKind::VanillaGp: {
      const TrainConfig& tc = cfg.train;
      VanillaResult r = train_vanilla_gp(cfg.kernel, params, noise, U, z, tc.t1_outer, tc.eta2,
                                         tc.learn_noise, tc.line_search, tc.mean_const,
                                         tc.normalize);
      params = r.params;
      noise = r.noise;
      aborted = r.aborted;
      break;
    }
    case SurrogateKind::FixedGp:
      break;
  }
  return Surrogate{GPPosterior::fit(cfg.kernel, params, noise, U, z, cfg.train.mean_const), mean,
                   std, &space, aborted};
}

Eigen::MatrixXd candidate_batch(const SearchSpace& space, Rng& rng,
                                const Eigen::VectorXd& incumbent_x) {
  const Eigen::Index k = space.dims();
  Eigen::MatrixXd C(kGlobalCandidates + kLocalCandidates, k);
  for (int i = 0; i < kGlobalCandidates; ++i) C.row(i) = uniform_point(space, rng).transpose();
  std::normal_distribution<double> gauss(0.0, 1.0);
  const Eigen::VectorXd width = space.upper - space.lower;
  for (int i = 0; i < kLocalCandidates; ++i) {
    Eigen::VectorXd x(k);
    for (Eigen::Index d = 0; d < k; ++d) {
      const double v = incumbent_x(d) + kLocalStdFraction * width(d) * gauss(rng);
      x(d) = std::clamp(v, space.lower(d), space.upper(d));
    }
    C.row(kGlobalCandidates + i) = x.transpose();
  }
  return C;
}

Eigen::Index first_argmin(const Eigen::VectorXd& scores) {
  Eigen::Index best = 0;
  for (Eigen::Index i = 1; i < scores.size(); ++i)
    if (scores(i) < scores(best)) best = i;
  return best;
}

Eigen::VectorXd propose_next(const Surrogate& surrogate, const SearchSpace& space,
                             const AcquisitionConfig& acq, Rng& rng,
                             const Eigen::VectorXd& incumbent_x) {
  const Eigen::MatrixXd C = candidate_batch(space, rng, incumbent_x);
  const auto [mean, std] = surrogate.predict(C);
  Eigen::VectorXd scores(C.rows());
  if (acq.kind == AcquisitionKind::Ucb) {
    for (Eigen::Index i = 0; i < C.rows(); ++i)
      scores(i) = acquisition_ucb(mean(i), std(i), acq.ucb_beta);
  } else {
    const Eigen::VectorXd u = space.to_unit(incumbent_x);
    const double best = surrogate.posterior.predict(u.transpose()).mean(0);
    for (Eigen::Index i = 0; i < C.rows(); ++i)
      scores(i) = acquisition_ei(mean(i), std(i), best);
  }
  return C.row(first_argmin(scores)).transpose();
}

void to_json(nlohmann::json& j, const BOConfig& c) {
  j = nlohmann::json{{"t_bo", c.t_bo},
                     {"n_init", c.n_init},
                     {"seed", c.seed},
                     {"surrogate", c.surrogate},
                     {"acquisition", c.acquisition.kind == AcquisitionKind::Ucb ? "ucb" : "ei"},
                     {"ucb_beta", c.acquisition.ucb_beta},
                     {"delta", c.delta}};
  j["f_star"] = c.f_star ? nlohmann::json(*c.f_star) : nlohmann::json(nullptr);
}

void from_json(const nlohmann::json& j, BOConfig& c) {
  BOConfig d;
  c.t_bo = j.value("t_bo", d.t_bo);
  c.n_init = j.value("n_init", d.n_init);
  c.seed = j.value("seed", d.seed);
  c.surrogate = j.contains("surrogate") ? j.at("surrogate").get<SurrogateConfig>() : d.surrogate;
  const std::string acq = j.value("acquisition", std::string("ucb"));
  if (acq == "ucb") {
    c.acquisition.kind = AcquisitionKind::Ucb;
  } else if (acq == "ei") {
    c.acquisition.kind = AcquisitionKind::Ei;
  } else {
    throw std::invalid_argument("unknown acquisition '" + acq + "' (expected ucb or ei)");
  }
  c.acquisition.ucb_beta = j.value("ucb_beta", d.acquisition.ucb_beta);
  c.delta = j.value("delta", d.delta);
  if (j.contains("f_star") && !j.at("f_star").is_null()) c.f_star = j.at("f_star").get<double>();
}

void to_json(nlohmann::json& j, const BOStepRecord& r) {
  j = nlohmann::json{{"step", r.step},
                     {"x", to_vec(r.x)},
                     {"f", r.f},
                     {"incumbent", r.incumbent_f},
                     {"sigma_prev", r.sigma_prev},
                     {"beta", r.beta},
                     {"info_gain", r.info_gain},
                     {"bound", r.bound},
                     {"surrogate_aborted", r.surrogate_aborted}};
  j["cum_regret"] = r.cum_regret ? nlohmann::json(*r.cum_regret) : nlohmann::json(nullptr);
}

BORun bo_run(const Objective& objective, const SearchSpace& space, const BOConfig& cfg) {
  space.validate();
  if (cfg.t_bo < 1) throw std::invalid_argument("t_bo must be >= 1");
  if (cfg.n_init < 1) throw std::invalid_argument("n_init must be >= 1");

  BORun run;
  BOState& st = run.state;
  st.rng_seed = cfg.seed;
  st.n_init = cfg.n_init;
  Rng rng = make_rng(cfg.seed, "bo_run");

  std::vector<Eigen::VectorXd> xs;
  std::vector<double> fs;
  auto push = [&](const Eigen::VectorXd& x, double f) {
    xs.push_back(x);
    fs.push_back(f);
    if (fs.size() == 1 || f < st.incumbent_f) {
      st.incumbent_f = f;
      st.incumbent_x = x;
    }
  };
  auto finish = [&] {
    st.queried_x.resize(static_cast<Eigen::Index>(xs.size()), space.dims());
    for (std::size_t i = 0; i < xs.size(); ++i)
      st.queried_x.row(static_cast<Eigen::Index>(i)) = xs[i].transpose();
    st.queried_f = from_vec(fs);
    return run;
  };

  for (int i = 0; i < cfg.n_init; ++i) {
    Eigen::VectorXd x = uniform_point(space, rng);
    double f = objective(x);
    if (!std::isfinite(f)) {
      ++st.failures;
      x = uniform_point(space, rng);
      f = objective(x);
      if (!std::isfinite(f)) {
        ++st.failures;
        st.aborted = true;
        return finish();
      }
    }
    push(x, f);
  }

  const double sigma2 = cfg.surrogate.noise.sigma2;
  double gamma = 0.0;
  double cum_regret = 0.0;
  for (int t = 1; t <= cfg.t_bo; ++t) {
    Eigen::MatrixXd X(static_cast<Eigen::Index>(xs.size()), space.dims());
    for (std::size_t i = 0; i < xs.size(); ++i)
      X.row(static_cast<Eigen::Index>(i)) = xs[i].transpose();
    const Surrogate sur = fit_surrogate(cfg.surrogate, space, X, from_vec(fs),
                                        derive_seed(cfg.seed, static_cast<std::uint64_t>(t)));

    Eigen::VectorXd x = propose_next(sur, space, cfg.acquisition, rng, st.incumbent_x);
    double sigma_prev = sur.predict(x.transpose()).second(0);
    double f = objective(x);
    if (!std::isfinite(f)) {
      ++st.failures;
      x = propose_next(sur, space, cfg.acquisition, rng, st.incumbent_x);
      sigma_prev = sur.predict(x.transpose()).second(0);
      f = objective(x);
      if (!std::isfinite(f)) {
        ++st.failures;
        st.aborted = true;
        break;
      }
    }

    BOStepRecord rec;
    rec.step = t;
    rec.x = x;
    rec.f = f;
    rec.sigma_prev = sigma_prev;
    rec.surrogate_aborted = sur.train_aborted;

    const double gamma_prev = gamma;
    gamma += information_gain_step(sigma2, sigma_prev);
    push(x, f);
    double B = 0.0;
    for (double v : fs) B = std::max(B, std::abs(v));
    rec.beta = beta_schedule(t, B, std::sqrt(sigma2), gamma_prev, cfg.delta);
    rec.info_gain = gamma;
    rec.bound = regret_bound(rec.beta, gamma, t, sigma2);
    rec.incumbent_f = st.incumbent_f;
    if (cfg.f_star) {
      cum_regret += f - *cfg.f_star;
      rec.cum_regret = cum_regret;
    }

    st.sigma_history.push_back(sigma_prev);
    st.incumbent_history.push_back(st.incumbent_f);
    run.diagnostics.beta.push_back(rec.beta);
    run.diagnostics.info_gain.push_back(gamma);
    run.diagnostics.regret_bound.push_back(rec.bound);
    if (cfg.f_star) {
      if (!run.diagnostics.cum_regret) run.diagnostics.cum_regret.emplace();
      run.diagnostics.cum_regret->push_back(cum_regret);
    }
    run.records.push_back(std::move(rec));
  }
  return finish();
}

void write_bo_trace_jsonl(std::ostream& os, const BORun& run) {
  for (const BOStepRecord& r : run.records) os << nlohmann::json(r).dump() << '\n';
}

}  // namespace dilgp
