#pragma once

#include <Eigen/Dense>
#include <nlohmann/json_fwd.hpp>

#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace dilgp {

enum class KernelKind { Gaussian, RationalQuadratic, DotProduct };

std::string_view to_string(KernelKind kind);
KernelKind kernel_kind_from_string(std::string_view name);

/// Index of a kernel hyperparameter inside KernelParams.
enum class Hyper { LogS, LogL, LogAlpha, LogSigmaDp };

/// Kernel hyperparameters, stored as logs so that unconstrained gradient steps
/// keep every natural value positive. Fields a kernel kind does not read are
/// carried along untouched.
struct KernelParams {
  double log_s = 0.0;         ///< amplitude s
  double log_l = 0.0;         ///< lengthscale l (Gaussian, RQ)
  double log_alpha = 0.0;     ///< RQ shape alpha
  double log_sigma_dp = 0.0;  ///< dot-product offset sigma_dp; the kernel adds sigma_dp^2

  double s() const;
  double l() const;
  double alpha() const;
  double sigma_dp() const;

  double& at(Hyper h);
  double at(Hyper h) const;

  static KernelParams from_natural(double s, double l, double alpha = 1.0,
                                   double sigma_dp = 1.0);

  /// Throws NonFiniteInput unless every exponentiated value is finite and > 0.
  void validate() const;

  friend bool operator==(const KernelParams&, const KernelParams&) = default;
};

void to_json(nlohmann::json& j, const KernelParams& p);
void from_json(const nlohmann::json& j, KernelParams& p);

/// Hyperparameters that kind actually reads, in a fixed order.
std::span<const Hyper> active_hypers(KernelKind kind);

/// Gram/cross-covariance matrix between the rows of X and the rows of Y.
///
/// Gaussian:          s * exp(-|x - y|^2 / (2 l^2))
/// RationalQuadratic: s * (1 + |x - y|^2 / (2 alpha l^2))^(-alpha)
/// DotProduct:        s * (x . y + sigma_dp^2)
///
/// Throws DimensionError on column mismatch and NonFiniteInput on NaN/inf.
Eigen::MatrixXd kernel_matrix(KernelKind kind, const KernelParams& params,
                              const Eigen::MatrixXd& X, const Eigen::MatrixXd& Y);

/// k(x, x) for every row of X.
Eigen::VectorXd kernel_diagonal(KernelKind kind, const KernelParams& params,
                                const Eigen::MatrixXd& X);

/// dK(X, X)/d(log p) for every p in active_hypers(kind), same order.
std::vector<Eigen::MatrixXd> kernel_log_gradients(KernelKind kind, const KernelParams& params,
                                                  const Eigen::MatrixXd& X);

/// d/dw K(X, X; w * theta) at w = 1, where w scales every active natural
/// hyperparameter. Equals the sum of kernel_log_gradients.
Eigen::MatrixXd kernel_scale_derivative(KernelKind kind, const KernelParams& params,
                                        const Eigen::MatrixXd& X);

/// Throws NonFiniteInput naming `what` if any entry is NaN or infinite.
void require_finite(const Eigen::Ref<const Eigen::MatrixXd>& m, std::string_view what);

std::string shape_string(const Eigen::Ref<const Eigen::MatrixXd>& m);

}  // namespace dilgp
