#include "dilgp/dil.hpp"

#include "dilgp/errors.hpp"
#include "dilgp/rng.hpp"

#include <nlohmann/json.hpp>

#include <cmath>
#include <ostream>
#include <random>

namespace dilgp {

namespace {

constexpr double kThetaFdStep = 1e-5;      // hybrid mode, penalty theta-derivatives
constexpr double kFullFdStep = 1e-4;       // full_fd mode, every derivative
constexpr int kMaxHalvings = 8;

// Quantities shared by both environments at a fixed theta.
struct PenaltyPieces {
  RegularizedCholesky factor;
  Eigen::MatrixXd D;       // dK/dw at w = 1
  Eigen::VectorXd r;       // y - mean
  double trace_term = 0.0; // 0.5 tr(A^-1 D)
};

PenaltyPieces make_pieces(const DilProblem& p, const KernelParams& params,
                          const NoiseSpec& noise) {
  params.validate();
  PenaltyPieces out;
  out.factor = factorize(kernel_matrix(p.kind(), params, p.X(), p.X()), noise, params);
  out.D = kernel_scale_derivative(p.kind(), params, p.X());
  out.r = (p.y().array() - p.mean_const()).matrix();
  out.trace_term = 0.5 * out.factor.inverse().cwiseProduct(out.D).sum();
  return out;
}

// d/dw log p_e at w = 1 for residual weights u = r .* mask.
double scale_gradient(const PenaltyPieces& pc, const Eigen::VectorXd& mask,
                      Eigen::VectorXd* beta_out = nullptr) {
  const Eigen::VectorXd beta = pc.factor.solve(pc.r.cwiseProduct(mask).eval());
  const double g = 0.5 * beta.dot(pc.D * beta) - pc.trace_term;
  if (beta_out) *beta_out = beta;
  return g;
}

KernelParams scale_active(KernelKind kind, KernelParams p, double w) {
  const double lw = std::log(w);
  for (Hyper h : active_hypers(kind)) p.at(h) += lw;
  return p;
}

double sigmoid(double v) {
  return v >= 0.0 ? 1.0 / (1.0 + std::exp(-v)) : std::exp(v) / (1.0 + std::exp(v));
}

}  // namespace

EnvMasks env_masks(const DomainLogits& q) {
  EnvMasks m;
  m.m0 = q.q_tilde.unaryExpr([](double v) { return sigmoid(v); });
  // sigmoid(-q) rather than 1 - m0, so negating q swaps the masks bit for bit.
  m.m1 = q.q_tilde.unaryExpr([](double v) { return sigmoid(-v); });
  return m;
}

std::string_view to_string(GradMode mode) {
  return mode == GradMode::FullFd ? "full_fd" : "analytic_fd_hybrid";
}

GradMode grad_mode_from_string(std::string_view name) {
  if (name == "analytic_fd_hybrid") return GradMode::AnalyticFdHybrid;
  if (name == "full_fd") return GradMode::FullFd;
  throw std::invalid_argument("unknown grad_mode '" + std::string(name) +
                              "' (expected analytic_fd_hybrid or full_fd)");
}

void TrainConfig::validate() const {
  if (t1_outer < 1) throw std::invalid_argument("t1_outer must be >= 1");
  if (t2_inner < 0) throw std::invalid_argument("t2_inner must be >= 0");
  if (!std::isfinite(eta1) || eta1 < 0.0) throw std::invalid_argument("eta1 must be finite, >= 0");
  if (!std::isfinite(eta2) || eta2 < 0.0) throw std::invalid_argument("eta2 must be finite, >= 0");
  if (!std::isfinite(lambda) || lambda < 0.0) {
    throw std::invalid_argument("lambda must be finite, >= 0");
  }
  if (!std::isfinite(q_init_scale) || q_init_scale < 0.0) {
    throw std::invalid_argument("q_init_scale must be finite, >= 0");
  }
}

void to_json(nlohmann::json& j, const TrainConfig& c) {
  j = nlohmann::json{{"t1_outer", c.t1_outer},
                     {"t2_inner", c.t2_inner},
                     {"eta1", c.eta1},
                     {"eta2", c.eta2},
                     {"lambda", c.lambda},
                     {"seed", c.seed},
                     {"grad_mode", std::string(to_string(c.grad_mode))},
                     {"learn_noise", c.learn_noise},
                     {"line_search", c.line_search},
                     {"q_init_scale", c.q_init_scale},
                     {"mean_const", c.mean_const},
                     {"normalize", c.normalize}};
}

void from_json(const nlohmann::json& j, TrainConfig& c) {
  TrainConfig d;
  c.t1_outer = j.value("t1_outer", d.t1_outer);
  c.t2_inner = j.value("t2_inner", d.t2_inner);
  c.eta1 = j.value("eta1", d.eta1);
  c.eta2 = j.value("eta2", d.eta2);
  c.lambda = j.value("lambda", d.lambda);
  c.seed = j.value("seed", d.seed);
  c.grad_mode = grad_mode_from_string(j.value("grad_mode", std::string(to_string(d.grad_mode))));
  c.learn_noise = j.value("learn_noise", d.learn_noise);
  c.line_search = j.value("line_search", d.line_search);
  c.q_init_scale = j.value("q_init_scale", d.q_init_scale);
  c.mean_const = j.value("mean_const", d.mean_const);
  c.normalize = j.value("normalize", d.normalize);
}

DilProblem::DilProblem(KernelKind kind, Eigen::MatrixXd X, Eigen::VectorXd y, bool learn_noise,
                       double mean_const, bool normalize)
    : layout_(kind, learn_noise),
      X_(std::move(X)),
      y_(std::move(y)),
      mean_const_(mean_const),
      scale_(normalize && y_.size() > 0 ? 1.0 / static_cast<double>(y_.size()) : 1.0) {
  if (X_.rows() != y_.size() || X_.rows() < 1) {
    throw DimensionError("X is " + shape_string(X_) + " but y has " + std::to_string(y_.size()) +
                         " entries");
  }
  require_finite(X_, "X");
  require_finite(y_, "y");
}

PenaltyReport DilProblem::penalty(const KernelParams& params, const NoiseSpec& noise,
                                  const DomainLogits& q, GradMode mode) const {
  if (q.q_tilde.size() != n()) {
    throw DimensionError("q_tilde has " + std::to_string(q.q_tilde.size()) +
                         " entries but the training set has " + std::to_string(n()));
  }
  const EnvMasks m = env_masks(q);
  PenaltyReport rep;
  if (mode == GradMode::FullFd) {
    const KernelParams up = scale_active(kind(), params, 1.0 + kFullFdStep);
    const KernelParams dn = scale_active(kind(), params, 1.0 - kFullFdStep);
    const Eigen::VectorXd* masks[2] = {&m.m0, &m.m1};
    for (int e = 0; e < 2; ++e) {
      const double lp = env_log_likelihood(kind(), up, noise, X_, y_, *masks[e], mean_const_);
      const double lm = env_log_likelihood(kind(), dn, noise, X_, y_, *masks[e], mean_const_);
      rep.per_env_grad[e] = scale_ * (lp - lm) / (2.0 * kFullFdStep);
    }
  } else {
    const PenaltyPieces pc = make_pieces(*this, params, noise);
    rep.per_env_grad[0] = scale_ * scale_gradient(pc, m.m0);
    rep.per_env_grad[1] = scale_ * scale_gradient(pc, m.m1);
  }
  rep.penalty = rep.per_env_grad[0] * rep.per_env_grad[0] + rep.per_env_grad[1] * rep.per_env_grad[1];
  return rep;
}

Eigen::VectorXd DilProblem::penalty_q_gradient(const KernelParams& params, const NoiseSpec& noise,
                                               const DomainLogits& q, GradMode mode) const {
  if (mode == GradMode::FullFd) {
    Eigen::VectorXd g(n());
    DomainLogits probe = q;
    for (Eigen::Index i = 0; i < n(); ++i) {
      const double q0 = probe.q_tilde[i];
      probe.q_tilde[i] = q0 + kFullFdStep;
      const double up = penalty(params, noise, probe, mode).penalty;
      probe.q_tilde[i] = q0 - kFullFdStep;
      const double dn = penalty(params, noise, probe, mode).penalty;
      probe.q_tilde[i] = q0;
      g[i] = (up - dn) / (2.0 * kFullFdStep);
    }
    return g;
  }

  const PenaltyPieces pc = make_pieces(*this, params, noise);
  const EnvMasks m = env_masks(q);
  const Eigen::VectorXd dm0 = m.m0.cwiseProduct(m.m1);  // d sigmoid / dq
  Eigen::VectorXd grad = Eigen::VectorXd::Zero(n());
  const Eigen::VectorXd* masks[2] = {&m.m0, &m.m1};
  const double sign[2] = {1.0, -1.0};
  for (int e = 0; e < 2; ++e) {
    Eigen::VectorXd beta;
    const double g = scale_gradient(pc, *masks[e], &beta);
    // d g_e / d mask = (A^-1 D beta) .* r
    const Eigen::VectorXd dg_dm = pc.factor.solve((pc.D * beta).eval()).cwiseProduct(pc.r);
    grad += (2.0 * g * sign[e]) * dg_dm.cwiseProduct(dm0);
  }
  return (scale_ * scale_) * grad;
}

double DilProblem::objective(const KernelParams& params, const NoiseSpec& noise,
                             const DomainLogits& q, double lambda, GradMode mode) const {
  const double nll = -scale_ * log_marginal_likelihood(kind(), params, noise, X_, y_, mean_const_);
  if (lambda == 0.0) return nll;
  return nll + lambda * penalty(params, noise, q, mode).penalty;
}

ValueAndGradient DilProblem::objective_gradient(const KernelParams& params,
                                                const NoiseSpec& noise, const DomainLogits& q,
                                                double lambda, GradMode mode) const {
  const Eigen::VectorXd v0 = layout_.pack(params, noise);
  ValueAndGradient out;
  if (mode == GradMode::FullFd) {
    out.value = objective(params, noise, q, lambda, mode);
    out.grad.resize(v0.size());
    for (Eigen::Index j = 0; j < v0.size(); ++j) {
      Eigen::VectorXd v = v0;
      v[j] = v0[j] + kFullFdStep;
      auto [pu, nu] = layout_.unpack(v, params, noise);
      v[j] = v0[j] - kFullFdStep;
      auto [pd, nd] = layout_.unpack(v, params, noise);
      out.grad[j] = (objective(pu, nu, q, lambda, mode) - objective(pd, nd, q, lambda, mode)) /
                    (2.0 * kFullFdStep);
    }
    return out;
  }

  const ValueAndGradient lml =
      log_marginal_likelihood_gradient(layout_, params, noise, X_, y_, mean_const_);
  out.value = -scale_ * lml.value;
  out.grad = -scale_ * lml.grad;
  if (lambda == 0.0) return out;

  out.value += lambda * penalty(params, noise, q, mode).penalty;
  for (Eigen::Index j = 0; j < v0.size(); ++j) {
    Eigen::VectorXd v = v0;
    v[j] = v0[j] + kThetaFdStep;
    auto [pu, nu] = layout_.unpack(v, params, noise);
    v[j] = v0[j] - kThetaFdStep;
    auto [pd, nd] = layout_.unpack(v, params, noise);
    const double up = penalty(pu, nu, q, mode).penalty;
    const double dn = penalty(pd, nd, q, mode).penalty;
    out.grad[j] += lambda * (up - dn) / (2.0 * kThetaFdStep);
  }
  return out;
}

PenaltyReport irm_penalty(KernelKind kind, const KernelParams& params, const NoiseSpec& noise,
                          const Eigen::MatrixXd& X, const Eigen::VectorXd& y,
                          const DomainLogits& q) {
  return DilProblem(kind, X, y).penalty(params, noise, q);
}

DomainLogits inner_ascent_step(const DomainLogits& q, const DilProblem& problem,
                               const KernelParams& params, const NoiseSpec& noise, double eta1,
                               GradMode mode) {
  const Eigen::VectorXd g = problem.penalty_q_gradient(params, noise, q, mode);
  for (Eigen::Index i = 0; i < g.size(); ++i) {
    if (!std::isfinite(g[i])) {
      throw TrainingAborted("non-finite penalty gradient at q_tilde[" + std::to_string(i) + "]");
    }
  }
  return DomainLogits{q.q_tilde + eta1 * g};
}

OuterStep outer_descent_step(const KernelParams& params, const NoiseSpec& noise,
                             const DomainLogits& q, const DilProblem& problem, double eta2,
                             double lambda, GradMode mode, bool line_search) {
  const ValueAndGradient vg = problem.objective_gradient(params, noise, q, lambda, mode);
  if (!std::isfinite(vg.value) || !vg.grad.allFinite()) {
    throw TrainingAborted("non-finite objective or gradient at the current parameters");
  }
  const Eigen::VectorXd v0 = problem.layout().pack(params, noise);

  OuterStep step;
  step.objective_before = vg.value;
  double eta = eta2;
  for (int halvings = 0; halvings <= kMaxHalvings; ++halvings) {
    const Eigen::VectorXd v1 = v0 - eta * vg.grad;
    auto [p1, n1] = problem.layout().unpack(v1, params, noise);
    double obj = std::numeric_limits<double>::quiet_NaN();
    try {
      obj = problem.objective(p1, n1, q, lambda, mode);
    } catch (const NotPositiveDefinite&) {
    } catch (const NonFiniteInput&) {
    }
    if (std::isfinite(obj) && (!line_search || obj <= vg.value)) {
      step.params = p1;
      step.noise = n1;
      step.objective_after = obj;
      step.eta_used = eta;
      step.halvings = halvings;
      return step;
    }
    eta *= 0.5;
  }
  throw TrainingAborted("outer step rejected after " + std::to_string(kMaxHalvings) +
                        " halvings of eta2");
}

void to_json(nlohmann::json& j, const TraceRecord& r) {
  j = nlohmann::json{{"step", r.step},
                     {"objective", r.objective},
                     {"penalty", r.penalty},
                     {"per_env_grad", {r.per_env_grad[0], r.per_env_grad[1]}},
                     {"params", r.params},
                     {"sigma2", r.sigma2}};
}

void write_trace_jsonl(std::ostream& os, const std::vector<TraceRecord>& trace) {
  for (const TraceRecord& r : trace) os << nlohmann::json(r).dump() << '\n';
}

TrainResult train_dil_gp(KernelKind kind, const KernelParams& init_params, const NoiseSpec& noise,
                         const Eigen::MatrixXd& X, const Eigen::VectorXd& y,
                         const TrainConfig& cfg) {
  cfg.validate();
  if (X.rows() < 4) {
    throw std::invalid_argument("DIL-GP training needs at least 4 samples, got " +
                                std::to_string(X.rows()));
  }
  const DilProblem problem(kind, X, y, cfg.learn_noise, cfg.mean_const, cfg.normalize);

  TrainResult res;
  res.params = init_params;
  res.noise = noise;
  res.q.q_tilde.resize(problem.n());
  Rng rng = make_rng(cfg.seed, "q_init");
  std::normal_distribution<double> normal(0.0, 1.0);
  for (Eigen::Index i = 0; i < problem.n(); ++i) res.q.q_tilde[i] = cfg.q_init_scale * normal(rng);

  try {
    for (int t = 0; t < cfg.t1_outer; ++t) {
      for (int k = 0; k < cfg.t2_inner; ++k) {
        res.q = inner_ascent_step(res.q, problem, res.params, res.noise, cfg.eta1, cfg.grad_mode);
      }
      const PenaltyReport rep = problem.penalty(res.params, res.noise, res.q, cfg.grad_mode);
      const OuterStep step = outer_descent_step(res.params, res.noise, res.q, problem, cfg.eta2,
                                                cfg.lambda, cfg.grad_mode, cfg.line_search);
      res.params = step.params;
      res.noise = step.noise;
      res.trace.push_back(TraceRecord{t, step.objective_before, rep.penalty, rep.per_env_grad,
                                      res.params, res.noise.sigma2});
    }
  } catch (const TrainingAborted& e) {
    res.aborted = true;
    res.error = e.what();
  } catch (const NotPositiveDefinite& e) {
    res.aborted = true;
    res.error = e.what();
  } catch (const NonFiniteInput& e) {
    res.aborted = true;
    res.error = e.what();
  }
  return res;
}

VanillaResult train_vanilla_gp(KernelKind kind, const KernelParams& init_params,
                               const NoiseSpec& noise, const Eigen::MatrixXd& X,
                               const Eigen::VectorXd& y, int steps, double eta, bool learn_noise,
                               bool line_search, double mean_const, bool normalize) {
  if (steps < 0) throw std::invalid_argument("steps must be >= 0");
  const DilProblem problem(kind, X, y, learn_noise, mean_const, normalize);
  const DomainLogits no_partition;

  VanillaResult res;
  res.params = init_params;
  res.noise = noise;
  res.initial_log_likelihood = log_marginal_likelihood(kind, init_params, noise, X, y, mean_const);
  res.final_log_likelihood = res.initial_log_likelihood;
  try {
    for (int t = 0; t < steps; ++t) {
      const OuterStep step = outer_descent_step(res.params, res.noise, no_partition, problem, eta,
                                                0.0, GradMode::AnalyticFdHybrid, line_search);
      res.params = step.params;
      res.noise = step.noise;
      res.final_log_likelihood = -step.objective_after / problem.scale();
      res.path.push_back(res.params);
      res.trace.push_back(TraceRecord{t, step.objective_before, 0.0, {0.0, 0.0}, res.params,
                                      res.noise.sigma2});
    }
  } catch (const TrainingAborted& e) {
    res.aborted = true;
    res.error = e.what();
  } catch (const NotPositiveDefinite& e) {
    res.aborted = true;
    res.error = e.what();
  } catch (const NonFiniteInput& e) {
    res.aborted = true;
    res.error = e.what();
  }
  return res;
}

}  // namespace dilgp
