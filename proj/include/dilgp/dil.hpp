#pragma once

#include "dilgp/gp.hpp"

#include <Eigen/Dense>
#include <nlohmann/json_fwd.hpp>

#include <array>
#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

namespace dilgp {

/// Real-valued logits of the soft two-environment partition. sigmoid(q_tilde)
/// is the membership weight of each sample in environment 0.
struct DomainLogits {
  Eigen::VectorXd q_tilde;
};

struct EnvMasks {
  Eigen::VectorXd m0;
  Eigen::VectorXd m1;
};

/// m0 = sigmoid(q), m1 = sigmoid(-q) = 1 - m0.
EnvMasks env_masks(const DomainLogits& q);

enum class GradMode {
  AnalyticFdHybrid,  ///< analytic likelihood gradients, central differences for penalty theta-derivatives
  FullFd,            ///< central differences everywhere; slow, used as a cross-check
};

std::string_view to_string(GradMode mode);
GradMode grad_mode_from_string(std::string_view name);

struct TrainConfig {
  int t1_outer = 100;
  int t2_inner = 10;
  double eta1 = 0.01;
  double eta2 = 0.01;
  double lambda = 1.0;
  std::uint64_t seed = 0;
  GradMode grad_mode = GradMode::AnalyticFdHybrid;
  bool learn_noise = false;
  /// Halve eta2 until the outer objective does not increase (max 8 halvings).
  bool line_search = false;
  double q_init_scale = 0.1;
  double mean_const = 0.0;
  /// Divide every log-likelihood in the training objective by n so that step
  /// sizes do not depend on the sample count.
  bool normalize = true;

  void validate() const;
};

void to_json(nlohmann::json& j, const TrainConfig& c);
void from_json(const nlohmann::json& j, TrainConfig& c);

struct PenaltyReport {
  std::array<double, 2> per_env_grad{0.0, 0.0};
  double penalty = 0.0;
};

/// Fixed training data plus the pieces of configuration every objective
/// evaluation needs. Copies X and y so results never alias caller storage.
class DilProblem {
 public:
  DilProblem(KernelKind kind, Eigen::MatrixXd X, Eigen::VectorXd y, bool learn_noise = false,
             double mean_const = 0.0, bool normalize = false);

  KernelKind kind() const { return layout_.kind(); }
  const HyperLayout& layout() const { return layout_; }
  const Eigen::MatrixXd& X() const { return X_; }
  const Eigen::VectorXd& y() const { return y_; }
  double mean_const() const { return mean_const_; }
  Eigen::Index n() const { return y_.size(); }
  /// 1/n when normalized, else 1. Multiplies every log-likelihood below.
  double scale() const { return scale_; }

  /// Penalty and scale() * d/dw log p_e at w = 1, w scaling all active natural
  /// kernel hyperparameters. Analytic unless mode is FullFd.
  PenaltyReport penalty(const KernelParams& params, const NoiseSpec& noise,
                        const DomainLogits& q, GradMode mode = GradMode::AnalyticFdHybrid) const;

  /// Gradient of the penalty with respect to q_tilde.
  Eigen::VectorXd penalty_q_gradient(const KernelParams& params, const NoiseSpec& noise,
                                     const DomainLogits& q,
                                     GradMode mode = GradMode::AnalyticFdHybrid) const;

  /// -scale() * log p(y | X, theta) + lambda * penalty. lambda == 0 skips the penalty.
  double objective(const KernelParams& params, const NoiseSpec& noise, const DomainLogits& q,
                   double lambda, GradMode mode = GradMode::AnalyticFdHybrid) const;

  /// Objective and its gradient over layout() coordinates.
  ValueAndGradient objective_gradient(const KernelParams& params, const NoiseSpec& noise,
                                      const DomainLogits& q, double lambda,
                                      GradMode mode = GradMode::AnalyticFdHybrid) const;

 private:
  HyperLayout layout_;
  Eigen::MatrixXd X_;
  Eigen::VectorXd y_;
  double mean_const_;
  double scale_;
};

/// Unnormalized penalty: per_env_grad[e] = d/dw env_log_likelihood at w = 1.
PenaltyReport irm_penalty(KernelKind kind, const KernelParams& params, const NoiseSpec& noise,
                          const Eigen::MatrixXd& X, const Eigen::VectorXd& y,
                          const DomainLogits& q);

/// One gradient-ascent step on the penalty over q_tilde. Throws TrainingAborted
/// naming the first non-finite gradient coordinate.
DomainLogits inner_ascent_step(const DomainLogits& q, const DilProblem& problem,
                               const KernelParams& params, const NoiseSpec& noise, double eta1,
                               GradMode mode = GradMode::AnalyticFdHybrid);

struct OuterStep {
  KernelParams params;
  NoiseSpec noise;
  double objective_before = 0.0;
  double objective_after = 0.0;
  double eta_used = 0.0;
  int halvings = 0;
};

/// One gradient-descent step on -log p + lambda * penalty in log-hyperparameter
/// space. A non-finite trial objective (or, with line_search, an increase)
/// halves eta2, at most 8 times; after that TrainingAborted is thrown.
OuterStep outer_descent_step(const KernelParams& params, const NoiseSpec& noise,
                             const DomainLogits& q, const DilProblem& problem, double eta2,
                             double lambda, GradMode mode = GradMode::AnalyticFdHybrid,
                             bool line_search = false);

struct TraceRecord {
  int step = 0;
  double objective = 0.0;
  double penalty = 0.0;
  std::array<double, 2> per_env_grad{0.0, 0.0};
  KernelParams params;
  double sigma2 = 0.0;
};

void to_json(nlohmann::json& j, const TraceRecord& r);

/// Writes one JSON object per line.
void write_trace_jsonl(std::ostream& os, const std::vector<TraceRecord>& trace);

struct TrainResult {
  KernelParams params;
  NoiseSpec noise;
  DomainLogits q;
  std::vector<TraceRecord> trace;
  bool aborted = false;
  std::string error;
};

/// Alternating min-max training: t1_outer iterations, each running t2_inner
/// ascent steps on q_tilde (warm-started across iterations) followed by one
/// descent step on the kernel hyperparameters. q_tilde starts from seeded
/// N(0, q_init_scale^2) draws. On abort the result keeps the last accepted
/// parameters and the trace so far.
TrainResult train_dil_gp(KernelKind kind, const KernelParams& init_params, const NoiseSpec& noise,
                         const Eigen::MatrixXd& X, const Eigen::VectorXd& y,
                         const TrainConfig& cfg);

struct VanillaResult {
  KernelParams params;
  NoiseSpec noise;
  double initial_log_likelihood = 0.0;
  double final_log_likelihood = 0.0;
  std::vector<KernelParams> path;  ///< parameters after each step
  std::vector<TraceRecord> trace;  ///< penalty fields are zero
  bool aborted = false;
  std::string error;
};

/// Plain gradient ascent on the log marginal likelihood. Shares the descent
/// step with train_dil_gp, so lambda = 0 and t2_inner = 0 there reproduce
/// this trajectory bit for bit.
VanillaResult train_vanilla_gp(KernelKind kind, const KernelParams& init_params,
                               const NoiseSpec& noise, const Eigen::MatrixXd& X,
                               const Eigen::VectorXd& y, int steps, double eta,
                               bool learn_noise = false, bool line_search = false,
                               double mean_const = 0.0, bool normalize = true);

}  // namespace dilgp
