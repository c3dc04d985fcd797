#pragma once

#include <Eigen/Dense>
#include <nlohmann/json_fwd.hpp>

#include <cstdint>
#include <iosfwd>
#include <span>
#include <string_view>
#include <vector>

namespace dilgp {

// Point-mass stand-in for a quadrotor: per-axis PID on position error, with
// a colored-noise wind force. Everything is deterministic given the seed.

struct PIDGains {
  double kp = 0.0;
  double ki = 0.0;
  double kd = 0.0;

  Eigen::VectorXd as_vector() const;
  static PIDGains from_vector(const Eigen::VectorXd& v);
};

struct WindDomainSpec {
  double mean_h = 0.0;
  double mean_v = 0.0;
  double var_h = 0.0;
  double var_v = 0.0;
  double correlation_time = 1.0;

  void validate() const;
  /// Fast-changing training domain.
  static WindDomainSpec domain1();
  /// Stable, biased held-out domain.
  static WindDomainSpec domain2();
};

void to_json(nlohmann::json& j, const WindDomainSpec& w);
void from_json(const nlohmann::json& j, WindDomainSpec& w);

enum class TrajectoryKind { Hover, Fig8, SinForward, SpiralUp };

std::string_view to_string(TrajectoryKind kind);
TrajectoryKind trajectory_kind_from_string(std::string_view name);
std::span<const TrajectoryKind> all_trajectories();

inline constexpr double kSimDt = 0.01;
inline constexpr int kSimSteps = 2000;
inline constexpr double kSimDuration = kSimDt * kSimSteps;

/// Desired position at time t in [0, 20] s.
Eigen::Vector3d reference_trajectory(TrajectoryKind kind, double t);

struct WindSample {
  Eigen::Vector2d h;
  double v = 0.0;
};

/// Per-axis Gauss-Markov process started at the mean:
/// w <- w + (mu - w) dt / tau + sqrt(2 var dt / tau) u, u uniform with unit variance.
std::vector<WindSample> dryden_wind(const WindDomainSpec& spec, std::uint64_t seed, double dt,
                                   int n_steps);

struct SimResult {
  double ace = 0.0;  ///< +inf when the state went non-finite
  bool diverged = false;
  std::vector<Eigen::Vector3d> positions;
  std::vector<Eigen::Vector3d> reference;
};

SimResult simulate(const PIDGains& gains, TrajectoryKind kind, const WindDomainSpec& wind,
                   std::uint64_t seed);

/// Mean ACE over kinds x seeds, summed in that order. +inf if any run diverged.
double pid_objective(const PIDGains& gains, const WindDomainSpec& wind,
                     std::span<const TrajectoryKind> kinds, std::span<const std::uint64_t> seeds);

/// Columns t,x,y,z,ref_x,ref_y,ref_z.
void write_trajectory_csv(std::ostream& os, const SimResult& r);

}  // namespace dilgp
