#pragma once

#include <Eigen/Dense>
#include <nlohmann/json_fwd.hpp>

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace dilgp {

/// Regression data. domain_tag is ground truth for evaluation only; nothing in
/// the training API accepts it.
struct Dataset {
  Eigen::MatrixXd x;
  Eigen::VectorXd y;
  std::optional<std::vector<int>> domain_tag;
  /// Names for domain ids when the source column was categorical.
  std::vector<std::string> domain_labels;
  std::size_t dropped_rows = 0;

  Eigen::Index size() const { return y.size(); }
  Eigen::Index dims() const { return x.cols(); }
  void validate() const;
};

struct SyntheticOptions {
  /// Read the second argument of N(0, v) as a standard deviation instead of a variance.
  bool noise_as_std = false;
  /// Multiplies every noise draw; 0 yields the noise-free labels.
  double noise_scale = 1.0;
};

/// Noise-free 1-D labels. cluster is 1 or 2.
double synthetic_1d_target(int cluster, double x);
/// Noise-free 2-D labels.
double synthetic_2d_target(int cluster, double x1, double x2);

/// 100 cluster-1 + 15 cluster-2 training points, 80 cluster-2 test points.
/// Cluster 1: x ~ N(0, 1), y = 3 sin(x / 2pi) + 3 eps.
/// Cluster 2: x ~ N(6.5, 1), y = -sin((x - 6.5) / 32pi) + 0.5 + eps.
std::pair<Dataset, Dataset> gen_synthetic_1d(std::uint64_t seed,
                                             const SyntheticOptions& opt = {});

/// Same split sizes on two Gaussian clusters around (0.3, 0.3) and (0.7, 0.7)
/// with covariance 0.01 I. Per-coordinate noise (variance 0.1 for cluster 1,
/// 0.05 for cluster 2) is summed into the scalar label.
std::pair<Dataset, Dataset> gen_synthetic_2d(std::uint64_t seed,
                                             const SyntheticOptions& opt = {});

/// Reads a comma-separated file with a header row. Rows whose selected cells
/// do not parse as numbers are dropped and counted in dropped_rows. A domain
/// column holding non-integers is mapped to ids in order of first appearance.
Dataset load_csv(const std::filesystem::path& path, const std::string& target_column,
                 const std::vector<std::string>& feature_columns,
                 const std::optional<std::string>& domain_column = std::nullopt);

/// Writes x0..x{d-1}, y and (if tagged) domain columns.
void write_csv(std::ostream& os, const Dataset& data);

struct Standardizer {
  Eigen::VectorXd x_mean;
  Eigen::VectorXd x_std;
  double y_mean = 0.0;
  double y_std = 1.0;
  /// Columns whose spread was zero and got std = 1.
  std::vector<Eigen::Index> constant_columns;

  static Standardizer fit(const Dataset& train);

  Eigen::MatrixXd transform_x(const Eigen::MatrixXd& x) const;
  Eigen::VectorXd transform_y(const Eigen::VectorXd& y) const;
  Eigen::MatrixXd inverse_x(const Eigen::MatrixXd& x) const;
  Eigen::VectorXd inverse_y(const Eigen::VectorXd& y) const;
  Dataset transform(const Dataset& d) const;
};

struct StandardizedSplit {
  Dataset train;
  Dataset test;
  Standardizer scaler;
};

/// Statistics come from train only; both sets are transformed.
StandardizedSplit standardize_fit_transform(const Dataset& train, const Dataset& test);

double rmse(const Eigen::VectorXd& pred, const Eigen::VectorXd& truth);

/// Fraction of points with |truth - mean| <= std.
double coverage_rate(const Eigen::VectorXd& pred_mean, const Eigen::VectorXd& pred_std,
                     const Eigen::VectorXd& truth);

struct EvalReport {
  double rmse = 0.0;
  std::optional<double> coverage_rate;
  Eigen::Index n_test = 0;
  std::map<std::string, double> per_domain_rmse;
};

void to_json(nlohmann::json& j, const EvalReport& r);

}  // namespace dilgp
