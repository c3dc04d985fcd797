#include "dilgp/quad_sim.hpp"

#include "dilgp/errors.hpp"
#include "dilgp/rng.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <numbers>
#include <ostream>
#include <random>
#include <stdexcept>
#include <string>

namespace dilgp {

namespace {

constexpr double kAccelLimit = 10.0;
constexpr double kIntegralLimit = 5.0;
constexpr double kAmplitude = 1.0;
constexpr double kOmega = 2.0 * std::numbers::pi / 10.0;
constexpr double kForwardSpeed = 0.2;
constexpr double kClimbRate = 0.05;

constexpr std::array kAllTrajectories{TrajectoryKind::Hover, TrajectoryKind::Fig8,
                                      TrajectoryKind::SinForward, TrajectoryKind::SpiralUp};

}  // namespace

Eigen::VectorXd PIDGains::as_vector() const { return Eigen::Vector3d(kp, ki, kd); }

PIDGains PIDGains::from_vector(const Eigen::VectorXd& v) {
  if (v.size() != 3) throw DimensionError("PID gains need 3 entries, got " + std::to_string(v.size()));
  return {v(0), v(1), v(2)};
}

void WindDomainSpec::validate() const {
  if (!(var_h >= 0.0 && var_v >= 0.0)) throw std::invalid_argument("wind variances must be >= 0");
  if (!(correlation_time > 0.0)) throw std::invalid_argument("correlation_time must be > 0");
  if (!std::isfinite(mean_h) || !std::isfinite(mean_v) || !std::isfinite(var_h) ||
      !std::isfinite(var_v) || !std::isfinite(correlation_time))
    throw NonFiniteInput("wind spec has non-finite fields");
}

WindDomainSpec WindDomainSpec::domain1() { return {0.0, 0.0, 5.0, 2.5, 0.5}; }
WindDomainSpec WindDomainSpec::domain2() { return {3.0, 1.0, 2.0, 1.0, 2.0}; }

void to_json(nlohmann::json& j, const WindDomainSpec& w) {
  j = nlohmann::json{{"mean_h", w.mean_h},
                     {"mean_v", w.mean_v},
                     {"var_h", w.var_h},
                     {"var_v", w.var_v},
                     {"correlation_time", w.correlation_time}};
}

void from_json(const nlohmann::json& j, WindDomainSpec& w) {
  w.mean_h = j.at("mean_h").get<double>();
  w.mean_v = j.at("mean_v").get<double>();
  w.var_h = j.at("var_h").get<double>();
  w.var_v = j.at("var_v").get<double>();
  w.correlation_time = j.at("correlation_time").get<double>();
  w.validate();
}

std::string_view to_string(TrajectoryKind kind) {
  switch (kind) {
    case TrajectoryKind::Hover:
      return "hover";
    case TrajectoryKind::Fig8:
      return "fig8";
    case TrajectoryKind::SinForward:
      return "sin_forward";
    case TrajectoryKind::SpiralUp:
      return "spiral_up";
  }
  return "hover";
}

TrajectoryKind trajectory_kind_from_string(std::string_view name) {
  for (TrajectoryKind k : kAllTrajectories)
    if (to_string(k) == name) return k;
  throw std::invalid_argument("unknown trajectory '" + std::string(name) +
                              "' (expected hover, fig8, sin_forward or spiral_up)");
}

std::span<const TrajectoryKind> all_trajectories() { return kAllTrajectories; }

Eigen::Vector3d reference_trajectory(TrajectoryKind kind, double t) {
  if (!(t >= 0.0 && t <= kSimDuration + 1e-9))
    throw std::invalid_argument("trajectory time " + std::to_string(t) + " outside [0, 20]");
  const double s = std::sin(kOmega * t);
  const double c = std::cos(kOmega * t);
  switch (kind) {
    case TrajectoryKind::Hover:
      return {0.0, 0.0, 1.0};
    case TrajectoryKind::Fig8:
      return {kAmplitude * s, kAmplitude * s * c, 1.0};
    case TrajectoryKind::SinForward:
      return {kForwardSpeed * t, kAmplitude * s, 1.0};
    case TrajectoryKind::SpiralUp:
      return {kAmplitude * c, kAmplitude * s, 0.5 + kClimbRate * t};
  }
  return {0.0, 0.0, 1.0};
}

std::vector<WindSample> dryden_wind(const WindDomainSpec& spec, std::uint64_t seed, double dt,
                                    int n_steps) {
  spec.validate();
  if (!(dt > 0.0)) throw std::invalid_argument("dt must be > 0");
  Rng rng = make_rng(seed, "dryden_wind");
  const double r3 = std::sqrt(3.0);
  std::uniform_real_distribution<double> u(-r3, r3);
  const double a = dt / spec.correlation_time;
  const double gh = std::sqrt(2.0 * spec.var_h * a);
  const double gv = std::sqrt(2.0 * spec.var_v * a);

  std::vector<WindSample> out;
  out.reserve(static_cast<std::size_t>(std::max(n_steps, 0)));
  WindSample w{{spec.mean_h, spec.mean_h}, spec.mean_v};
  for (int i = 0; i < n_steps; ++i) {
    out.push_back(w);
    // Draw order is fixed: h0, h1, v.
    const double u0 = u(rng);
    const double u1 = u(rng);
    const double u2 = u(rng);
    w.h(0) += (spec.mean_h - w.h(0)) * a + gh * u0;
    w.h(1) += (spec.mean_h - w.h(1)) * a + gh * u1;
    w.v += (spec.mean_v - w.v) * a + gv * u2;
  }
  return out;
}

SimResult simulate(const PIDGains& gains, TrajectoryKind kind, const WindDomainSpec& wind,
                   std::uint64_t seed) {
  if (!std::isfinite(gains.kp) || !std::isfinite(gains.ki) || !std::isfinite(gains.kd))
    throw NonFiniteInput("PID gains must be finite");
  const std::vector<WindSample> gusts = dryden_wind(wind, seed, kSimDt, kSimSteps);

  SimResult res;
  res.positions.reserve(kSimSteps);
  res.reference.reserve(kSimSteps);
  Eigen::Vector3d p = reference_trajectory(kind, 0.0);
  Eigen::Vector3d v = Eigen::Vector3d::Zero();
  Eigen::Vector3d integral = Eigen::Vector3d::Zero();
  Eigen::Vector3d e_prev = reference_trajectory(kind, 0.0) - p;
  double sum_sq = 0.0;

  for (int k = 0; k < kSimSteps; ++k) {
    const double t = k * kSimDt;
    const Eigen::Vector3d e = reference_trajectory(kind, t) - p;
    integral = (integral + e * kSimDt).cwiseMax(-kIntegralLimit).cwiseMin(kIntegralLimit);
    const Eigen::Vector3d de = (e - e_prev) / kSimDt;
    e_prev = e;
    const Eigen::Vector3d a_cmd = (gains.kp * e + gains.ki * integral + gains.kd * de)
                                      .cwiseMax(-kAccelLimit)
                                      .cwiseMin(kAccelLimit);
    // Unit mass, gravity already cancelled by the thrust trim.
    const WindSample& w = gusts[static_cast<std::size_t>(k)];
    const Eigen::Vector3d force(w.h(0), w.h(1), w.v);
    v += (a_cmd + force) * kSimDt;
    p += v * kSimDt;

    const Eigen::Vector3d ref = reference_trajectory(kind, t + kSimDt);
    if (!p.allFinite() || !v.allFinite()) {
      res.diverged = true;
      res.ace = std::numeric_limits<double>::infinity();
      return res;
    }
    res.positions.push_back(p);
    res.reference.push_back(ref);
    sum_sq += (p - ref).squaredNorm();
  }
  res.ace = sum_sq / kSimSteps;
  return res;
}

double pid_objective(const PIDGains& gains, const WindDomainSpec& wind,
                     std::span<const TrajectoryKind> kinds, std::span<const std::uint64_t> seeds) {
  if (kinds.empty() || seeds.empty())
    throw std::invalid_argument("pid_objective needs at least one trajectory and one seed");
  double sum = 0.0;
  for (TrajectoryKind k : kinds) {
    for (std::uint64_t s : seeds) {
      const SimResult r = simulate(gains, k, wind, s);
      if (r.diverged) return std::numeric_limits<double>::infinity();
      sum += r.ace;
    }
  }
  return sum / static_cast<double>(kinds.size() * seeds.size());
}

void write_trajectory_csv(std::ostream& os, const SimResult& r) {
  os << "t,x,y,z,ref_x,ref_y,ref_z\n";
  const auto old_prec = os.precision(17);
  for (std::size_t i = 0; i < r.positions.size(); ++i) {
    const auto& p = r.positions[i];
    const auto& q = r.reference[i];
    os << (static_cast<double>(i) + 1.0) * kSimDt << ',' << p(0) << ',' << p(1) << ',' << p(2)
       << ',' << q(0) << ',' << q(1) << ',' << q(2) << '\n';
  }
  os.precision(old_prec);
}

}  // namespace dilgp
