#pragma once

// Shared helpers for the unit and acceptance suites: seeded small instances
// and a dense-inverse GP written independently of the library's Cholesky path.

#include "dilgp/gp.hpp"
#include "dilgp/rng.hpp"

#include <Eigen/Dense>

#include <cmath>
#include <numbers>
#include <random>

namespace dilgp::testing {

struct Instance {
  KernelKind kind;
  KernelParams params;
  NoiseSpec noise;
  Eigen::MatrixXd X;
  Eigen::VectorXd y;
  Eigen::MatrixXd Xs;
  Eigen::VectorXd q;
};

inline Instance random_instance(std::uint64_t seed, int n, KernelKind kind, int d = 2) {
  Rng rng = make_rng(seed, "test_instance");
  std::normal_distribution<double> g(0.0, 1.0);
  std::uniform_real_distribution<double> u(-0.5, 0.5);
  Instance in;
  in.kind = kind;
  in.params = KernelParams::from_natural(std::exp(u(rng)), std::exp(0.3 + u(rng)),
                                         std::exp(u(rng)), std::exp(u(rng)));
  in.noise.sigma2 = 0.05 + 0.1 * (u(rng) + 0.5);
  in.X.resize(n, d);
  in.y.resize(n);
  in.Xs.resize(3, d);
  in.q.resize(n);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < d; ++j) in.X(i, j) = g(rng);
    in.y(i) = g(rng);
    in.q(i) = g(rng);
  }
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < d; ++j) in.Xs(i, j) = g(rng);
  return in;
}

/// Elementwise kernel written from the closed forms, independent of kernel.cpp.
inline double k_ref(KernelKind kind, const KernelParams& p, const Eigen::VectorXd& a,
                    const Eigen::VectorXd& b) {
  const double s = std::exp(p.log_s);
  const double l = std::exp(p.log_l);
  const double r2 = (a - b).squaredNorm();
  switch (kind) {
    case KernelKind::Gaussian:
      return s * std::exp(-r2 / (2.0 * l * l));
    case KernelKind::RationalQuadratic: {
      const double al = std::exp(p.log_alpha);
      return s * std::pow(1.0 + r2 / (2.0 * al * l * l), -al);
    }
    case KernelKind::DotProduct: {
      const double sd = std::exp(p.log_sigma_dp);
      return s * (a.dot(b) + sd * sd);
    }
  }
  return 0.0;
}

inline Eigen::MatrixXd gram_ref(const Instance& in, const Eigen::MatrixXd& A,
                                const Eigen::MatrixXd& B) {
  Eigen::MatrixXd K(A.rows(), B.rows());
  for (Eigen::Index i = 0; i < A.rows(); ++i)
    for (Eigen::Index j = 0; j < B.rows(); ++j)
      K(i, j) = k_ref(in.kind, in.params, A.row(i).transpose(), B.row(j).transpose());
  return K;
}

struct DenseGp {
  Eigen::VectorXd mean;
  Eigen::VectorXd var;
  double lml = 0.0;
};

/// Explicit-inverse posterior and log marginal likelihood (zero prior mean).
inline DenseGp dense_gp(const Instance& in) {
  const Eigen::Index n = in.X.rows();
  const Eigen::MatrixXd A =
      gram_ref(in, in.X, in.X) + in.noise.sigma2 * Eigen::MatrixXd::Identity(n, n);
  const Eigen::MatrixXd Ainv = A.inverse();
  const Eigen::MatrixXd Ks = gram_ref(in, in.Xs, in.X);
  DenseGp out;
  out.mean = Ks * Ainv * in.y;
  out.var.resize(in.Xs.rows());
  for (Eigen::Index i = 0; i < in.Xs.rows(); ++i) {
    const Eigen::VectorXd xs = in.Xs.row(i).transpose();
    out.var(i) = k_ref(in.kind, in.params, xs, xs) - Ks.row(i) * Ainv * Ks.row(i).transpose();
  }
  out.lml = -0.5 * in.y.dot(Ainv * in.y) - 0.5 * std::log(A.determinant()) -
            0.5 * static_cast<double>(n) * std::log(2.0 * std::numbers::pi);
  return out;
}

/// Relative agreement with an absolute floor for values near zero.
inline bool close_rel(double a, double b, double rel, double floor = 1e-6) {
  return std::abs(a - b) <= rel * std::max({std::abs(a), std::abs(b), floor});
}

}  // namespace dilgp::testing
