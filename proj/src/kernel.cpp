#include "dilgp/kernel.hpp"

#include "dilgp/errors.hpp"

#include <nlohmann/json.hpp>

#include <array>
#include <cmath>
#include <sstream>

namespace dilgp {

namespace {

constexpr std::array<Hyper, 2> kGaussianHypers{Hyper::LogS, Hyper::LogL};
constexpr std::array<Hyper, 3> kRqHypers{Hyper::LogS, Hyper::LogL, Hyper::LogAlpha};
constexpr std::array<Hyper, 2> kDpHypers{Hyper::LogS, Hyper::LogSigmaDp};

void require_same_cols(const Eigen::MatrixXd& X, const Eigen::MatrixXd& Y) {
  if (X.cols() != Y.cols() || X.cols() < 1) {
    throw DimensionError("kernel inputs disagree: X is " + shape_string(X) + ", Y is " +
                         shape_string(Y));
  }
}

// Fills out(i, j) = f(i, j) and mirrors across the diagonal when both operands
// are the same object, so that symmetric Gram matrices are exactly symmetric.
template <typename F>
Eigen::MatrixXd pairwise(const Eigen::MatrixXd& X, const Eigen::MatrixXd& Y, F&& f) {
  const Eigen::Index n = X.rows();
  const Eigen::Index m = Y.rows();
  Eigen::MatrixXd out(n, m);
  if (&X == &Y) {
    for (Eigen::Index j = 0; j < n; ++j) {
      for (Eigen::Index i = j; i < n; ++i) {
        const double v = f(i, j);
        out(i, j) = v;
        out(j, i) = v;
      }
    }
  } else {
    for (Eigen::Index j = 0; j < m; ++j) {
      for (Eigen::Index i = 0; i < n; ++i) out(i, j) = f(i, j);
    }
  }
  return out;
}

double sqdist(const Eigen::MatrixXd& X, Eigen::Index i, const Eigen::MatrixXd& Y,
              Eigen::Index j) {
  return (X.row(i) - Y.row(j)).squaredNorm();
}

}  // namespace

std::string_view to_string(KernelKind kind) {
  switch (kind) {
    case KernelKind::Gaussian:
      return "gaussian";
    case KernelKind::RationalQuadratic:
      return "rq";
    case KernelKind::DotProduct:
      return "dp";
  }
  return "?";
}

KernelKind kernel_kind_from_string(std::string_view name) {
  if (name == "gaussian") return KernelKind::Gaussian;
  if (name == "rq") return KernelKind::RationalQuadratic;
  if (name == "dp") return KernelKind::DotProduct;
  throw std::invalid_argument("unknown kernel '" + std::string(name) +
                              "' (expected gaussian, rq or dp)");
}

double KernelParams::s() const { return std::exp(log_s); }
double KernelParams::l() const { return std::exp(log_l); }
double KernelParams::alpha() const { return std::exp(log_alpha); }
double KernelParams::sigma_dp() const { return std::exp(log_sigma_dp); }

double& KernelParams::at(Hyper h) {
  switch (h) {
    case Hyper::LogS:
      return log_s;
    case Hyper::LogL:
      return log_l;
    case Hyper::LogAlpha:
      return log_alpha;
    case Hyper::LogSigmaDp:
      return log_sigma_dp;
  }
  throw std::logic_error("bad Hyper");
}

double KernelParams::at(Hyper h) const { return const_cast<KernelParams*>(this)->at(h); }

KernelParams KernelParams::from_natural(double s, double l, double alpha, double sigma_dp) {
  return {std::log(s), std::log(l), std::log(alpha), std::log(sigma_dp)};
}

void KernelParams::validate() const {
  for (double v : {s(), l(), alpha(), sigma_dp()}) {
    if (!std::isfinite(v) || v <= 0.0) {
      std::ostringstream os;
      os << "kernel parameters out of range: log_s=" << log_s << " log_l=" << log_l
         << " log_alpha=" << log_alpha << " log_sigma_dp=" << log_sigma_dp;
      throw NonFiniteInput(os.str());
    }
  }
}

void to_json(nlohmann::json& j, const KernelParams& p) {
  j = nlohmann::json{{"log_s", p.log_s},
                     {"log_l", p.log_l},
                     {"log_alpha", p.log_alpha},
                     {"log_sigma_dp", p.log_sigma_dp}};
}

void from_json(const nlohmann::json& j, KernelParams& p) {
  p.log_s = j.value("log_s", 0.0);
  p.log_l = j.value("log_l", 0.0);
  p.log_alpha = j.value("log_alpha", 0.0);
  p.log_sigma_dp = j.value("log_sigma_dp", 0.0);
}

std::span<const Hyper> active_hypers(KernelKind kind) {
  switch (kind) {
    case KernelKind::Gaussian:
      return kGaussianHypers;
    case KernelKind::RationalQuadratic:
      return kRqHypers;
    case KernelKind::DotProduct:
      return kDpHypers;
  }
  return {};
}

std::string shape_string(const Eigen::Ref<const Eigen::MatrixXd>& m) {
  return std::to_string(m.rows()) + "x" + std::to_string(m.cols());
}

void require_finite(const Eigen::Ref<const Eigen::MatrixXd>& m, std::string_view what) {
  if (!m.allFinite()) {
    throw NonFiniteInput(std::string(what) + " contains non-finite entries");
  }
}

Eigen::MatrixXd kernel_matrix(KernelKind kind, const KernelParams& params,
                              const Eigen::MatrixXd& X, const Eigen::MatrixXd& Y) {
  require_same_cols(X, Y);
  require_finite(X, "X");
  require_finite(Y, "Y");
  const double s = params.s();
  switch (kind) {
    case KernelKind::Gaussian: {
      const double inv = 1.0 / (2.0 * params.l() * params.l());
      return pairwise(X, Y, [&](Eigen::Index i, Eigen::Index j) {
        return s * std::exp(-sqdist(X, i, Y, j) * inv);
      });
    }
    case KernelKind::RationalQuadratic: {
      const double a = params.alpha();
      const double inv = 1.0 / (2.0 * a * params.l() * params.l());
      return pairwise(X, Y, [&](Eigen::Index i, Eigen::Index j) {
        return s * std::pow(1.0 + sqdist(X, i, Y, j) * inv, -a);
      });
    }
    case KernelKind::DotProduct: {
      const double off = params.sigma_dp() * params.sigma_dp();
      return pairwise(X, Y, [&](Eigen::Index i, Eigen::Index j) {
        return s * (X.row(i).dot(Y.row(j)) + off);
      });
    }
  }
  throw std::logic_error("bad KernelKind");
}

Eigen::VectorXd kernel_diagonal(KernelKind kind, const KernelParams& params,
                                const Eigen::MatrixXd& X) {
  require_finite(X, "X");
  const double s = params.s();
  if (kind == KernelKind::DotProduct) {
    const double off = params.sigma_dp() * params.sigma_dp();
    return (s * (X.rowwise().squaredNorm().array() + off)).matrix();
  }
  return Eigen::VectorXd::Constant(X.rows(), s);
}

std::vector<Eigen::MatrixXd> kernel_log_gradients(KernelKind kind, const KernelParams& params,
                                                  const Eigen::MatrixXd& X) {
  const Eigen::MatrixXd K = kernel_matrix(kind, params, X, X);
  std::vector<Eigen::MatrixXd> grads;
  switch (kind) {
    case KernelKind::Gaussian: {
      const double inv_l2 = 1.0 / (params.l() * params.l());
      grads.push_back(K);
      grads.push_back(pairwise(X, X, [&](Eigen::Index i, Eigen::Index j) {
        return K(i, j) * sqdist(X, i, X, j) * inv_l2;
      }));
      break;
    }
    case KernelKind::RationalQuadratic: {
      const double a = params.alpha();
      const double inv_l2 = 1.0 / (params.l() * params.l());
      grads.push_back(K);
      grads.push_back(pairwise(X, X, [&](Eigen::Index i, Eigen::Index j) {
        const double r2 = sqdist(X, i, X, j) * inv_l2;
        return K(i, j) * r2 / (1.0 + r2 / (2.0 * a));
      }));
      grads.push_back(pairwise(X, X, [&](Eigen::Index i, Eigen::Index j) {
        const double u = sqdist(X, i, X, j) * inv_l2 / (2.0 * a);
        return K(i, j) * a * (u / (1.0 + u) - std::log1p(u));
      }));
      break;
    }
    case KernelKind::DotProduct: {
      const double off2 = 2.0 * params.s() * params.sigma_dp() * params.sigma_dp();
      grads.push_back(K);
      grads.push_back(Eigen::MatrixXd::Constant(X.rows(), X.rows(), off2));
      break;
    }
  }
  return grads;
}

Eigen::MatrixXd kernel_scale_derivative(KernelKind kind, const KernelParams& params,
                                        const Eigen::MatrixXd& X) {
  auto grads = kernel_log_gradients(kind, params, X);
  Eigen::MatrixXd sum = std::move(grads.front());
  for (std::size_t i = 1; i < grads.size(); ++i) sum += grads[i];
  return sum;
}

}  // namespace dilgp
