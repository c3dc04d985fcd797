#pragma once

#include "dilgp/dil.hpp"
#include "dilgp/gp.hpp"
#include "dilgp/rng.hpp"

#include <Eigen/Dense>
#include <nlohmann/json_fwd.hpp>

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace dilgp {

/// Axis-aligned box.
struct SearchSpace {
  Eigen::VectorXd lower;
  Eigen::VectorXd upper;

  Eigen::Index dims() const { return lower.size(); }
  void validate() const;
  Eigen::VectorXd to_unit(const Eigen::VectorXd& x) const;
  Eigen::VectorXd from_unit(const Eigen::VectorXd& u) const;
};

/// Lower-confidence form of UCB for minimization: mean - sqrt(beta) * std.
double acquisition_ucb(double mean, double std, double beta_t);

/// Negative expected improvement below best_f, so that smaller is better.
double acquisition_ei(double mean, double std, double best_f);

enum class AcquisitionKind { Ucb, Ei };

struct AcquisitionConfig {
  AcquisitionKind kind = AcquisitionKind::Ucb;
  /// Exploration weight for UCB. Used as-is at every step.
  double ucb_beta = 4.0;
};

/// beta_t = B + sigma * sqrt(2 (gamma_{t-1} + 1 + log(4 / delta))).
double beta_schedule(int t, double B, double sigma, double gamma_prev, double delta);

/// 0.5 * log(1 + sigma_pred^2 / sigma2_noise).
double information_gain_step(double sigma2_noise, double sigma_pred);

/// beta_T * sqrt(C1 * T * gamma_T) with C1 = 8 / log(1 + 1 / sigma2_noise).
double regret_bound(double beta_T, double gamma_T, int T, double sigma2_noise);

/// Which model Algorithm-style BO refits each step.
enum class SurrogateKind {
  DilGp,      ///< train_dil_gp
  VanillaGp,  ///< train_vanilla_gp with the same step budget and eta2
  FixedGp,    ///< no training, init_params used as-is
};

std::string_view to_string(SurrogateKind kind);
SurrogateKind surrogate_kind_from_string(std::string_view name);

struct SurrogateConfig {
  SurrogateKind kind = SurrogateKind::DilGp;
  KernelKind kernel = KernelKind::Gaussian;
  KernelParams init_params = KernelParams::from_natural(1.0, 0.2);
  NoiseSpec noise{};
  TrainConfig train{.t1_outer = 30, .t2_inner = 5};
};

void to_json(nlohmann::json& j, const SurrogateConfig& c);
void from_json(const nlohmann::json& j, SurrogateConfig& c);

/// A posterior fitted on unit-box inputs and standardized outputs, predicting
/// in those standardized units.
struct Surrogate {
  GPPosterior posterior;
  double y_mean = 0.0;
  double y_std = 1.0;
  const SearchSpace* space = nullptr;
  bool train_aborted = false;

  /// Standardized mean and latent std at original-space points (one per row).
  std::pair<Eigen::VectorXd, Eigen::VectorXd> predict(const Eigen::MatrixXd& X) const;
};

/// Fits the configured model to (X, f). seed feeds the partition initializer.
Surrogate fit_surrogate(const SurrogateConfig& cfg, const SearchSpace& space,
                        const Eigen::MatrixXd& X, const Eigen::VectorXd& f, std::uint64_t seed);

/// Scores 1024 uniform candidates plus 64 clipped Gaussian perturbations of
/// the incumbent (std 5% of each box width) and returns the first minimizer.
Eigen::VectorXd propose_next(const Surrogate& surrogate, const SearchSpace& space,
                             const AcquisitionConfig& acq, Rng& rng,
                             const Eigen::VectorXd& incumbent_x);

/// Lower-level form over an arbitrary batch scorer; candidates are rows.
Eigen::MatrixXd candidate_batch(const SearchSpace& space, Rng& rng,
                                const Eigen::VectorXd& incumbent_x);
Eigen::Index first_argmin(const Eigen::VectorXd& scores);

struct BOState {
  Eigen::MatrixXd queried_x;  ///< initial points first, then proposals
  Eigen::VectorXd queried_f;
  Eigen::VectorXd incumbent_x;
  double incumbent_f = 0.0;
  std::vector<double> sigma_history;  ///< sigma_{t-1}(x_t), proposals only
  std::vector<double> incumbent_history;
  int n_init = 0;
  int failures = 0;
  bool aborted = false;
  std::uint64_t rng_seed = 0;
};

struct RegretDiagnostics {
  std::vector<double> beta;
  std::vector<double> info_gain;  ///< cumulative
  std::vector<double> regret_bound;
  std::optional<std::vector<double>> cum_regret;
};

struct BOConfig {
  int t_bo = 100;
  int n_init = 5;
  std::uint64_t seed = 0;
  SurrogateConfig surrogate{};
  AcquisitionConfig acquisition{};
  double delta = 0.1;
  /// Known optimum value; enables cumulative regret.
  std::optional<double> f_star;
};

void to_json(nlohmann::json& j, const BOConfig& c);
void from_json(const nlohmann::json& j, BOConfig& c);

struct BOStepRecord {
  int step = 0;
  Eigen::VectorXd x;
  double f = 0.0;
  double incumbent_f = 0.0;
  double sigma_prev = 0.0;
  double beta = 0.0;
  double info_gain = 0.0;
  double bound = 0.0;
  std::optional<double> cum_regret;
  bool surrogate_aborted = false;
};

void to_json(nlohmann::json& j, const BOStepRecord& r);

struct BORun {
  BOState state;
  RegretDiagnostics diagnostics;
  std::vector<BOStepRecord> records;
};

using Objective = std::function<double(const Eigen::VectorXd&)>;

/// Sequential model-based minimization. Every surrogate kind shares this
/// loop; only fit_surrogate differs. A non-finite objective value is retried
/// once with a fresh candidate batch; two in a row abort the run.
BORun bo_run(const Objective& objective, const SearchSpace& space, const BOConfig& cfg);

void write_bo_trace_jsonl(std::ostream& os, const BORun& run);

}  // namespace dilgp
