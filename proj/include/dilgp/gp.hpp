#pragma once

#include "dilgp/kernel.hpp"

#include <Eigen/Dense>

#include <cstddef>
#include <stdexcept>
#include <string>

namespace dilgp {

/// Observation noise variance, in the units of the (standardized) targets.
struct NoiseSpec {
  double sigma2 = 0.01;
};

/// Cholesky factorization failed even at the largest jitter.
class NotPositiveDefinite : public std::runtime_error {
 public:
  NotPositiveDefinite(const std::string& what, KernelParams params, double sigma2)
      : std::runtime_error(what), params_(params), sigma2_(sigma2) {}

  const KernelParams& params() const { return params_; }
  double sigma2() const { return sigma2_; }

 private:
  KernelParams params_;
  double sigma2_;
};

/// Lower Cholesky factor of K + (sigma2 + jitter) I.
struct RegularizedCholesky {
  Eigen::MatrixXd lower;
  double jitter = 0.0;

  Eigen::VectorXd solve(const Eigen::VectorXd& b) const;
  Eigen::MatrixXd solve(const Eigen::MatrixXd& B) const;
  Eigen::MatrixXd inverse() const;
  double log_det() const;
};

/// Factorizes K + sigma2 I. On failure retries with jitter starting at
/// 1e-10 * trace/n and growing tenfold up to 1e-4 * trace/n.
RegularizedCholesky factorize(const Eigen::MatrixXd& K, const NoiseSpec& noise,
                              const KernelParams& params_for_error);

struct Prediction {
  Eigen::VectorXd mean;
  Eigen::VectorXd var;        ///< latent-function variance, clamped at 0
  std::size_t clamped = 0;    ///< entries that came out negative before clamping
};

/// Immutable fitted state for posterior prediction.
class GPPosterior {
 public:
  static GPPosterior fit(KernelKind kind, const KernelParams& params, const NoiseSpec& noise,
                         const Eigen::MatrixXd& X, const Eigen::VectorXd& y,
                         double mean_const = 0.0);

  /// Posterior mean and latent variance at the rows of Xs.
  Prediction predict(const Eigen::MatrixXd& Xs) const;

  const Eigen::MatrixXd& train_x() const { return train_x_; }
  const Eigen::MatrixXd& chol() const { return factor_.lower; }
  const Eigen::VectorXd& alpha_vec() const { return alpha_; }
  double mean_const() const { return mean_const_; }
  double jitter() const { return factor_.jitter; }
  KernelKind kind() const { return kind_; }
  const KernelParams& params() const { return params_; }
  const NoiseSpec& noise() const { return noise_; }

 private:
  GPPosterior() = default;

  Eigen::MatrixXd train_x_;
  RegularizedCholesky factor_;
  Eigen::VectorXd alpha_;
  double mean_const_ = 0.0;
  KernelKind kind_ = KernelKind::Gaussian;
  KernelParams params_;
  NoiseSpec noise_;
};

inline GPPosterior fit_posterior(KernelKind kind, const KernelParams& params,
                                 const NoiseSpec& noise, const Eigen::MatrixXd& X,
                                 const Eigen::VectorXd& y, double mean_const = 0.0) {
  return GPPosterior::fit(kind, params, noise, X, y, mean_const);
}

/// log p(y | X, theta) with a constant prior mean.
double log_marginal_likelihood(KernelKind kind, const KernelParams& params,
                               const NoiseSpec& noise, const Eigen::MatrixXd& X,
                               const Eigen::VectorXd& y, double mean_const = 0.0);

/// Per-environment likelihood: the residual is multiplied elementwise by mask
/// in both factors of the quadratic form; log-determinant and normalizer use
/// the full unmasked covariance.
double env_log_likelihood(KernelKind kind, const KernelParams& params, const NoiseSpec& noise,
                          const Eigen::MatrixXd& X, const Eigen::VectorXd& y,
                          const Eigen::VectorXd& mask, double mean_const = 0.0);

/// Maps between (KernelParams, NoiseSpec) and a flat vector of the log
/// hyperparameters an optimizer moves: the active kernel logs, then log sigma2
/// when the noise is learned.
class HyperLayout {
 public:
  HyperLayout(KernelKind kind, bool learn_noise) : kind_(kind), learn_noise_(learn_noise) {}

  Eigen::Index size() const;
  Eigen::VectorXd pack(const KernelParams& params, const NoiseSpec& noise) const;
  /// Writes the vector back over copies of the given base values.
  std::pair<KernelParams, NoiseSpec> unpack(const Eigen::VectorXd& v, KernelParams base,
                                            NoiseSpec noise) const;
  Eigen::Index kernel_size() const;

  KernelKind kind() const { return kind_; }
  bool learn_noise() const { return learn_noise_; }

 private:
  KernelKind kind_;
  bool learn_noise_;
};

struct ValueAndGradient {
  double value = 0.0;
  Eigen::VectorXd grad;
};

/// log marginal likelihood and its gradient with respect to layout's log
/// hyperparameters, using 0.5 tr((a a^T - A^-1) dA).
ValueAndGradient log_marginal_likelihood_gradient(const HyperLayout& layout,
                                                  const KernelParams& params,
                                                  const NoiseSpec& noise,
                                                  const Eigen::MatrixXd& X,
                                                  const Eigen::VectorXd& y,
                                                  double mean_const = 0.0);

}  // namespace dilgp
