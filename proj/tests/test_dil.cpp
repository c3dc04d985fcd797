#include "dilgp/dil.hpp"
#include "dilgp/errors.hpp"
#include "support.hpp"

#include <doctest.h>
#include <nlohmann/json.hpp>

#include <limits>
#include <sstream>

using namespace dilgp;
using namespace dilgp::testing;

TEST_SUITE("dil") {

// Per-environment scale gradients from high-precision numerical
// differentiation of the masked likelihood.
TEST_CASE("penalty matches high-precision reference") {
  Eigen::MatrixXd X(4, 1);
  X << 0.0, 0.5, 1.3, 2.0;
  Eigen::VectorXd y(4);
  y << 0.1, -0.4, 0.8, 0.3;
  Eigen::VectorXd q(4);
  q << 0.3, -1.0, 2.0, 0.0;
  const auto rep = irm_penalty(KernelKind::Gaussian, KernelParams::from_natural(1.5, 0.8), {0.1},
                               X, y, {q});
  const double g0 = -0.69360861854807929;
  const double g1 = -0.027416805627276924;
  CHECK(rep.per_env_grad[0] == doctest::Approx(g0).epsilon(1e-11));
  CHECK(rep.per_env_grad[1] == doctest::Approx(g1).epsilon(1e-9));
  CHECK(rep.penalty == doctest::Approx(g0 * g0 + g1 * g1).epsilon(1e-11));
}

TEST_CASE("sigmoid masks are complementary and stable") {
  Eigen::VectorXd q(3);
  q << -800.0, 0.0, 800.0;
  const auto m = env_masks({q});
  CHECK(m.m0(0) == 0.0);
  CHECK(m.m0(1) == 0.5);
  CHECK(m.m0(2) == 1.0);
  CHECK((m.m0 + m.m1 - Eigen::VectorXd::Ones(3)).cwiseAbs().maxCoeff() < 1e-15);
  CHECK(env_masks({-q}).m1 == m.m0);
}

TEST_CASE("property: label swap leaves penalty and outer gradient unchanged") {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const auto in = random_instance(seed, 8, KernelKind::Gaussian);
    const DilProblem p(in.kind, in.X, in.y);
    const DomainLogits q{in.q}, swapped{-in.q};
    CHECK(p.penalty(in.params, in.noise, q).penalty == p.penalty(in.params, in.noise, swapped).penalty);
    const auto a = p.objective_gradient(in.params, in.noise, q, 1.0);
    const auto b = p.objective_gradient(in.params, in.noise, swapped, 1.0);
    CHECK((a.grad - b.grad).cwiseAbs().maxCoeff() < 1e-10);
  }
}

TEST_CASE("property: penalty is non-negative") {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    for (KernelKind kind : {KernelKind::Gaussian, KernelKind::RationalQuadratic, KernelKind::DotProduct}) {
      const auto in = random_instance(seed, 6, kind);
      CHECK(irm_penalty(kind, in.params, in.noise, in.X, in.y, {in.q}).penalty >= 0.0);
    }
  }
}

TEST_CASE("property: q gradient matches central differences") {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const auto in = random_instance(seed, 8, KernelKind::Gaussian);
    const DilProblem p(in.kind, in.X, in.y, false, 0.0, seed % 2 == 0);
    const Eigen::VectorXd g = p.penalty_q_gradient(in.params, in.noise, {in.q});
    for (Eigen::Index i = 0; i < in.q.size(); ++i) {
      DomainLogits up{in.q}, dn{in.q};
      up.q_tilde(i) += 1e-5;
      dn.q_tilde(i) -= 1e-5;
      const double fd = (p.penalty(in.params, in.noise, up).penalty -
                         p.penalty(in.params, in.noise, dn).penalty) / 2e-5;
      CHECK(close_rel(g(i), fd, 1e-3));
    }
  }
}

TEST_CASE("property: analytic and finite-difference modes agree") {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const auto in = random_instance(seed, 7, KernelKind::RationalQuadratic);
    const DilProblem p(in.kind, in.X, in.y, true);
    const auto a = p.penalty(in.params, in.noise, {in.q}, GradMode::AnalyticFdHybrid);
    const auto f = p.penalty(in.params, in.noise, {in.q}, GradMode::FullFd);
    CHECK(close_rel(a.per_env_grad[0], f.per_env_grad[0], 1e-5));
    CHECK(close_rel(a.per_env_grad[1], f.per_env_grad[1], 1e-5));
    const auto ga = p.objective_gradient(in.params, in.noise, {in.q}, 0.7, GradMode::AnalyticFdHybrid);
    const auto gf = p.objective_gradient(in.params, in.noise, {in.q}, 0.7, GradMode::FullFd);
    for (Eigen::Index i = 0; i < ga.grad.size(); ++i) CHECK(close_rel(ga.grad(i), gf.grad(i), 1e-4));
  }
}

TEST_CASE("lambda 0 and no inner steps reproduce vanilla training bit for bit") {
  const auto in = random_instance(5, 12, KernelKind::Gaussian, 1);
  TrainConfig cfg;
  cfg.t1_outer = 15;
  cfg.t2_inner = 0;
  cfg.lambda = 0.0;
  cfg.eta2 = 0.05;
  const auto d = train_dil_gp(in.kind, in.params, in.noise, in.X, in.y, cfg);
  const auto v = train_vanilla_gp(in.kind, in.params, in.noise, in.X, in.y, 15, 0.05);
  REQUIRE(d.trace.size() == v.path.size());
  for (std::size_t t = 0; t < v.path.size(); ++t) CHECK(d.trace[t].params == v.path[t]);
  CHECK(d.params == v.params);
}

TEST_CASE("training is deterministic and the trace serializes") {
  const auto in = random_instance(9, 10, KernelKind::Gaussian, 1);
  TrainConfig cfg;
  cfg.t1_outer = 6;
  cfg.t2_inner = 3;
  cfg.seed = 42;
  const auto a = train_dil_gp(in.kind, in.params, in.noise, in.X, in.y, cfg);
  const auto b = train_dil_gp(in.kind, in.params, in.noise, in.X, in.y, cfg);
  CHECK(a.params == b.params);
  CHECK(a.q.q_tilde == b.q.q_tilde);
  CHECK_FALSE(a.aborted);
  std::ostringstream os;
  write_trace_jsonl(os, a.trace);
  std::istringstream is(os.str());
  std::string line;
  int lines = 0;
  while (std::getline(is, line)) {
    const auto j = nlohmann::json::parse(line);
    for (const char* k : {"step", "objective", "penalty", "per_env_grad", "params"}) CHECK(j.contains(k));
    ++lines;
  }
  CHECK(lines == 6);
}

TEST_CASE("a bad step size aborts with the trace kept") {
  const auto in = random_instance(2, 10, KernelKind::Gaussian, 1);
  TrainConfig cfg;
  cfg.t1_outer = 5;
  cfg.t2_inner = 1;
  cfg.eta2 = 1e8;  // every trial step overflows the exponentiated params
  const auto r = train_dil_gp(in.kind, in.params, in.noise, in.X, in.y, cfg);
  CHECK(r.aborted);
  CHECK_FALSE(r.error.empty());
}

TEST_CASE("config validation and round-trip") {
  TrainConfig c;
  c.lambda = 2.5;
  c.grad_mode = GradMode::FullFd;
  const auto back = nlohmann::json(c).get<TrainConfig>();
  CHECK(back.lambda == 2.5);
  CHECK(back.grad_mode == GradMode::FullFd);
  c.t1_outer = 0;
  CHECK_THROWS(c.validate());
  CHECK_THROWS(grad_mode_from_string("adam"));
  const auto in = random_instance(1, 3, KernelKind::Gaussian);
  CHECK_THROWS_AS(train_dil_gp(in.kind, in.params, in.noise, in.X, in.y, TrainConfig{}),
                  std::invalid_argument);
}

}  // TEST_SUITE
