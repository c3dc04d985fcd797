#include "dilgp/gp.hpp"

#include "dilgp/errors.hpp"

#include <cmath>
#include <numbers>
#include <sstream>

namespace dilgp {

namespace {

constexpr double kLog2Pi = 1.8378770664093454835606594728112;  // log(2 pi)

void check_training_inputs(const Eigen::MatrixXd& X, const Eigen::VectorXd& y,
                           const NoiseSpec& noise) {
  if (X.rows() < 1) throw DimensionError("training set is empty (X is " + shape_string(X) + ")");
  if (X.rows() != y.size()) {
    throw DimensionError("X is " + shape_string(X) + " but y has " + std::to_string(y.size()) +
                         " entries");
  }
  require_finite(X, "X");
  require_finite(y, "y");
  if (!std::isfinite(noise.sigma2) || noise.sigma2 < 0.0) {
    throw NonFiniteInput("noise variance must be finite and >= 0, got " +
                         std::to_string(noise.sigma2));
  }
}

}  // namespace

Eigen::VectorXd RegularizedCholesky::solve(const Eigen::VectorXd& b) const {
  Eigen::VectorXd x = lower.triangularView<Eigen::Lower>().solve(b);
  lower.triangularView<Eigen::Lower>().transpose().solveInPlace(x);
  return x;
}

Eigen::MatrixXd RegularizedCholesky::solve(const Eigen::MatrixXd& B) const {
  Eigen::MatrixXd x = lower.triangularView<Eigen::Lower>().solve(B);
  lower.triangularView<Eigen::Lower>().transpose().solveInPlace(x);
  return x;
}

Eigen::MatrixXd RegularizedCholesky::inverse() const {
  return solve(Eigen::MatrixXd::Identity(lower.rows(), lower.rows()).eval());
}

double RegularizedCholesky::log_det() const {
  return 2.0 * lower.diagonal().array().log().sum();
}

RegularizedCholesky factorize(const Eigen::MatrixXd& K, const NoiseSpec& noise,
                              const KernelParams& params_for_error) {
  const Eigen::Index n = K.rows();
  Eigen::MatrixXd A = K;
  A.diagonal().array() += noise.sigma2;

  auto attempt = [&](double jitter, RegularizedCholesky& out) {
    Eigen::MatrixXd B = A;
    B.diagonal().array() += jitter;
    Eigen::LLT<Eigen::MatrixXd> llt(B);
    if (llt.info() != Eigen::Success) return false;
    out.lower = llt.matrixL();
    out.jitter = jitter;
    return out.lower.allFinite() && (out.lower.diagonal().array() > 0.0).all();
  };

  RegularizedCholesky out;
  if (A.allFinite() && attempt(0.0, out)) return out;

  const double scale = std::abs(A.trace()) / static_cast<double>(n);
  if (A.allFinite() && scale > 0.0) {
    for (double rel = 1e-10; rel <= 1e-4 * (1.0 + 1e-9); rel *= 10.0) {
      if (attempt(rel * scale, out)) return out;
    }
  }
  std::ostringstream os;
  os << "kernel matrix not positive definite (log_s=" << params_for_error.log_s
     << ", log_l=" << params_for_error.log_l << ", log_alpha=" << params_for_error.log_alpha
     << ", log_sigma_dp=" << params_for_error.log_sigma_dp << ", sigma2=" << noise.sigma2 << ")";
  throw NotPositiveDefinite(os.str(), params_for_error, noise.sigma2);
}

GPPosterior GPPosterior::fit(KernelKind kind, const KernelParams& params, const NoiseSpec& noise,
                             const Eigen::MatrixXd& X, const Eigen::VectorXd& y,
                             double mean_const) {
  check_training_inputs(X, y, noise);
  params.validate();
  GPPosterior post;
  post.train_x_ = X;
  post.factor_ = factorize(kernel_matrix(kind, params, X, X), noise, params);
  post.alpha_ = post.factor_.solve((y.array() - mean_const).matrix().eval());
  post.mean_const_ = mean_const;
  post.kind_ = kind;
  post.params_ = params;
  post.noise_ = noise;
  return post;
}

Prediction GPPosterior::predict(const Eigen::MatrixXd& Xs) const {
  if (Xs.cols() != train_x_.cols()) {
    throw DimensionError("query points are " + shape_string(Xs) + " but training inputs are " +
                         shape_string(train_x_));
  }
  const Eigen::MatrixXd Ks = kernel_matrix(kind_, params_, Xs, train_x_);
  Prediction p;
  p.mean = (Ks * alpha_).array() + mean_const_;
  const Eigen::MatrixXd v = factor_.lower.triangularView<Eigen::Lower>().solve(Ks.transpose());
  p.var = kernel_diagonal(kind_, params_, Xs) - v.colwise().squaredNorm().transpose();
  for (Eigen::Index i = 0; i < p.var.size(); ++i) {
    if (p.var[i] < 0.0) {
      p.var[i] = 0.0;
      ++p.clamped;
    }
  }
  return p;
}

double log_marginal_likelihood(KernelKind kind, const KernelParams& params,
                               const NoiseSpec& noise, const Eigen::MatrixXd& X,
                               const Eigen::VectorXd& y, double mean_const) {
  return env_log_likelihood(kind, params, noise, X, y, Eigen::VectorXd::Ones(y.size()),
                            mean_const);
}

double env_log_likelihood(KernelKind kind, const KernelParams& params, const NoiseSpec& noise,
                          const Eigen::MatrixXd& X, const Eigen::VectorXd& y,
                          const Eigen::VectorXd& mask, double mean_const) {
  check_training_inputs(X, y, noise);
  params.validate();
  if (mask.size() != y.size()) {
    throw DimensionError("mask has " + std::to_string(mask.size()) + " entries but y has " +
                         std::to_string(y.size()));
  }
  if (!mask.allFinite() || (mask.array() < 0.0).any() || (mask.array() > 1.0).any()) {
    throw std::invalid_argument("mask entries must lie in [0, 1]");
  }
  const RegularizedCholesky f = factorize(kernel_matrix(kind, params, X, X), noise, params);
  const Eigen::VectorXd r = ((y.array() - mean_const) * mask.array()).matrix();
  const Eigen::VectorXd half = f.lower.triangularView<Eigen::Lower>().solve(r);
  const double n = static_cast<double>(y.size());
  return -0.5 * half.squaredNorm() - 0.5 * f.log_det() - 0.5 * n * kLog2Pi;
}

Eigen::Index HyperLayout::kernel_size() const {
  return static_cast<Eigen::Index>(active_hypers(kind_).size());
}

Eigen::Index HyperLayout::size() const { return kernel_size() + (learn_noise_ ? 1 : 0); }

Eigen::VectorXd HyperLayout::pack(const KernelParams& params, const NoiseSpec& noise) const {
  Eigen::VectorXd v(size());
  Eigen::Index i = 0;
  for (Hyper h : active_hypers(kind_)) v[i++] = params.at(h);
  if (learn_noise_) v[i] = std::log(noise.sigma2);
  return v;
}

std::pair<KernelParams, NoiseSpec> HyperLayout::unpack(const Eigen::VectorXd& v,
                                                       KernelParams base,
                                                       NoiseSpec noise) const {
  if (v.size() != size()) {
    throw DimensionError("hyperparameter vector has " + std::to_string(v.size()) +
                         " entries, layout expects " + std::to_string(size()));
  }
  Eigen::Index i = 0;
  for (Hyper h : active_hypers(kind_)) base.at(h) = v[i++];
  if (learn_noise_) noise.sigma2 = std::exp(v[i]);
  return {base, noise};
}

ValueAndGradient log_marginal_likelihood_gradient(const HyperLayout& layout,
                                                  const KernelParams& params,
                                                  const NoiseSpec& noise,
                                                  const Eigen::MatrixXd& X,
                                                  const Eigen::VectorXd& y, double mean_const) {
  check_training_inputs(X, y, noise);
  params.validate();
  const auto dK = kernel_log_gradients(layout.kind(), params, X);
  const RegularizedCholesky f =
      factorize(kernel_matrix(layout.kind(), params, X, X), noise, params);
  const Eigen::VectorXd r = (y.array() - mean_const).matrix();
  const Eigen::VectorXd a = f.solve(r);
  const Eigen::MatrixXd Ainv = f.inverse();
  // W = a a^T - A^-1; dL/dp = 0.5 tr(W dA/dp)
  const Eigen::MatrixXd W = a * a.transpose() - Ainv;

  ValueAndGradient out;
  out.value = -0.5 * r.dot(a) - 0.5 * f.log_det() - 0.5 * static_cast<double>(y.size()) * kLog2Pi;
  out.grad.resize(layout.size());
  for (std::size_t j = 0; j < dK.size(); ++j) {
    out.grad[static_cast<Eigen::Index>(j)] = 0.5 * W.cwiseProduct(dK[j]).sum();
  }
  if (layout.learn_noise()) {
    out.grad[layout.kernel_size()] = 0.5 * noise.sigma2 * W.trace();
  }
  return out;
}

}  // namespace dilgp
