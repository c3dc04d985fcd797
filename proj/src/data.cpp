#include "dilgp/data.hpp"

#include "dilgp/errors.hpp"
#include "dilgp/kernel.hpp"
#include "dilgp/rng.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <numbers>
#include <ostream>
#include <random>
#include <sstream>

namespace dilgp {

namespace {

constexpr double kPi = std::numbers::pi;

double noise_std(double variance, const SyntheticOptions& opt) {
  return opt.noise_scale * (opt.noise_as_std ? variance : std::sqrt(variance));
}

Dataset make_dataset(Eigen::Index n, Eigen::Index d) {
  Dataset out;
  out.x.resize(n, d);
  out.y.resize(n);
  out.domain_tag = std::vector<int>(static_cast<std::size_t>(n), 0);
  return out;
}

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> cells;
  std::string cur;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (quoted) {
      if (c == '"' && i + 1 < line.size() && line[i + 1] == '"') {
        cur += '"';
        ++i;
      } else if (c == '"') {
        quoted = false;
      } else {
        cur += c;
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      cells.push_back(std::move(cur));
      cur.clear();
    } else if (c != '\r') {
      cur += c;
    }
  }
  cells.push_back(std::move(cur));
  for (auto& s : cells) {
    const auto b = s.find_first_not_of(" \t");
    const auto e = s.find_last_not_of(" \t");
    s = b == std::string::npos ? std::string{} : s.substr(b, e - b + 1);
  }
  return cells;
}

std::optional<double> parse_number(const std::string& s) {
  if (s.empty()) return std::nullopt;
  const char* first = s.data();
  if (*first == '+') ++first;
  double v = 0.0;
  auto [ptr, ec] = std::from_chars(first, s.data() + s.size(), v);
  if (ec != std::errc{} || ptr != s.data() + s.size() || !std::isfinite(v)) return std::nullopt;
  return v;
}

std::optional<int> parse_int(const std::string& s) {
  int v = 0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc{} || ptr != s.data() + s.size() || s.empty()) return std::nullopt;
  return v;
}

}  // namespace

void Dataset::validate() const {
  if (x.rows() != y.size()) {
    throw DimensionError("dataset x is " + shape_string(x) + " but y has " +
                         std::to_string(y.size()) + " entries");
  }
  if (domain_tag && static_cast<Eigen::Index>(domain_tag->size()) != y.size()) {
    throw DimensionError("domain_tag has " + std::to_string(domain_tag->size()) +
                         " entries but y has " + std::to_string(y.size()));
  }
  require_finite(x, "dataset x");
  require_finite(y, "dataset y");
}

double synthetic_1d_target(int cluster, double x) {
  if (cluster == 1) return 3.0 * std::sin(x / (2.0 * kPi));
  return -std::sin((x - 6.5) / (32.0 * kPi)) + 0.5;
}

double synthetic_2d_target(int cluster, double x1, double x2) {
  if (cluster == 1) return 1.5 * std::sin(30.0 * x1 + 20.0) + 1.5 * std::sin(30.0 * x2 + 20.0);
  return 0.5 * std::sin(50.0 * x1 + 20.0) + 0.5 * std::sin(50.0 * x2 + 20.0) + 1.1;
}

std::pair<Dataset, Dataset> gen_synthetic_1d(std::uint64_t seed, const SyntheticOptions& opt) {
  Rng rng = make_rng(seed, "synthetic_1d");
  std::normal_distribution<double> normal(0.0, 1.0);
  const double eps_std = noise_std(0.1, opt);

  auto draw = [&](Dataset& d, Eigen::Index row, int cluster) {
    const double center = cluster == 1 ? 0.0 : 6.5;
    const double x = center + normal(rng);
    const double eps = eps_std * normal(rng);
    d.x(row, 0) = x;
    d.y[row] = synthetic_1d_target(cluster, x) + (cluster == 1 ? 3.0 * eps : eps);
    (*d.domain_tag)[static_cast<std::size_t>(row)] = cluster;
  };

  Dataset train = make_dataset(115, 1);
  Dataset test = make_dataset(80, 1);
  for (Eigen::Index i = 0; i < 100; ++i) draw(train, i, 1);
  for (Eigen::Index i = 100; i < 115; ++i) draw(train, i, 2);
  for (Eigen::Index i = 0; i < 80; ++i) draw(test, i, 2);
  return {std::move(train), std::move(test)};
}

std::pair<Dataset, Dataset> gen_synthetic_2d(std::uint64_t seed, const SyntheticOptions& opt) {
  Rng rng = make_rng(seed, "synthetic_2d");
  std::normal_distribution<double> normal(0.0, 1.0);
  const double x_std = 0.1;  // covariance 0.01 I
  const double eps_std[2] = {noise_std(0.1, opt), noise_std(0.05, opt)};

  auto draw = [&](Dataset& d, Eigen::Index row, int cluster) {
    const double center = cluster == 1 ? 0.3 : 0.7;
    const double x1 = center + x_std * normal(rng);
    const double x2 = center + x_std * normal(rng);
    const double e1 = eps_std[cluster - 1] * normal(rng);
    const double e2 = eps_std[cluster - 1] * normal(rng);
    d.x(row, 0) = x1;
    d.x(row, 1) = x2;
    d.y[row] = synthetic_2d_target(cluster, x1, x2) + e1 + e2;
    (*d.domain_tag)[static_cast<std::size_t>(row)] = cluster;
  };

  Dataset train = make_dataset(115, 2);
  Dataset test = make_dataset(80, 2);
  for (Eigen::Index i = 0; i < 100; ++i) draw(train, i, 1);
  for (Eigen::Index i = 100; i < 115; ++i) draw(train, i, 2);
  for (Eigen::Index i = 0; i < 80; ++i) draw(test, i, 2);
  return {std::move(train), std::move(test)};
}

Dataset load_csv(const std::filesystem::path& path, const std::string& target_column,
                 const std::vector<std::string>& feature_columns,
                 const std::optional<std::string>& domain_column) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  std::string line;
  if (!std::getline(in, line)) throw std::runtime_error(path.string() + " is empty");
  const std::vector<std::string> header = split_csv_line(line);

  auto column_index = [&](const std::string& name) -> std::size_t {
    for (std::size_t i = 0; i < header.size(); ++i) {
      if (header[i] == name) return i;
    }
    std::string avail;
    for (const auto& h : header) avail += (avail.empty() ? "" : ", ") + h;
    throw std::invalid_argument("column '" + name + "' not found in " + path.string() +
                                "; available: " + avail);
  };

  const std::size_t target = column_index(target_column);
  std::vector<std::size_t> features;
  for (const auto& f : feature_columns) features.push_back(column_index(f));
  const std::optional<std::size_t> domain =
      domain_column ? std::optional<std::size_t>(column_index(*domain_column)) : std::nullopt;

  std::vector<std::vector<double>> rows;
  std::vector<double> targets;
  std::vector<std::string> raw_domains;
  std::size_t dropped = 0;
  while (std::getline(in, line)) {
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    const auto cells = split_csv_line(line);
    auto cell = [&](std::size_t i) -> const std::string& {
      static const std::string empty;
      return i < cells.size() ? cells[i] : empty;
    };
    std::vector<double> row;
    bool ok = true;
    for (std::size_t f : features) {
      auto v = parse_number(cell(f));
      if (!v) {
        ok = false;
        break;
      }
      row.push_back(*v);
    }
    const auto t = parse_number(cell(target));
    if (!t || (domain && cell(*domain).empty())) ok = false;
    if (!ok) {
      ++dropped;
      continue;
    }
    rows.push_back(std::move(row));
    targets.push_back(*t);
    if (domain) raw_domains.push_back(cell(*domain));
  }
  if (rows.empty()) {
    throw std::runtime_error("no usable rows in " + path.string() + " (" +
                             std::to_string(dropped) + " dropped)");
  }

  Dataset out;
  const auto n = static_cast<Eigen::Index>(rows.size());
  out.x.resize(n, static_cast<Eigen::Index>(features.size()));
  out.y.resize(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < features.size(); ++j) {
      out.x(i, static_cast<Eigen::Index>(j)) = rows[static_cast<std::size_t>(i)][j];
    }
    out.y[i] = targets[static_cast<std::size_t>(i)];
  }
  out.dropped_rows = dropped;
  if (domain) {
    std::vector<int> tags;
    bool all_int = true;
    for (const auto& s : raw_domains) all_int = all_int && parse_int(s).has_value();
    for (const auto& s : raw_domains) {
      if (all_int) {
        tags.push_back(*parse_int(s));
        continue;
      }
      auto it = std::find(out.domain_labels.begin(), out.domain_labels.end(), s);
      if (it == out.domain_labels.end()) {
        out.domain_labels.push_back(s);
        it = out.domain_labels.end() - 1;
      }
      tags.push_back(static_cast<int>(it - out.domain_labels.begin()));
    }
    out.domain_tag = std::move(tags);
  }
  return out;
}

void write_csv(std::ostream& os, const Dataset& data) {
  data.validate();
  std::ostringstream buf;
  buf.precision(17);
  for (Eigen::Index j = 0; j < data.dims(); ++j) buf << 'x' << j << ',';
  buf << 'y';
  if (data.domain_tag) buf << ",domain";
  buf << '\n';
  for (Eigen::Index i = 0; i < data.size(); ++i) {
    for (Eigen::Index j = 0; j < data.dims(); ++j) buf << data.x(i, j) << ',';
    buf << data.y[i];
    if (data.domain_tag) buf << ',' << (*data.domain_tag)[static_cast<std::size_t>(i)];
    buf << '\n';
  }
  os << buf.str();
}

Standardizer Standardizer::fit(const Dataset& train) {
  train.validate();
  if (train.size() < 1) throw std::invalid_argument("cannot standardize an empty training set");
  Standardizer s;
  const double n = static_cast<double>(train.size());
  s.x_mean = train.x.colwise().mean().transpose();
  s.x_std.resize(train.dims());
  for (Eigen::Index j = 0; j < train.dims(); ++j) {
    const double var = (train.x.col(j).array() - s.x_mean[j]).square().sum() / n;
    if (var > 0.0) {
      s.x_std[j] = std::sqrt(var);
    } else {
      s.x_std[j] = 1.0;
      s.constant_columns.push_back(j);
    }
  }
  s.y_mean = train.y.mean();
  const double yvar = (train.y.array() - s.y_mean).square().sum() / n;
  s.y_std = yvar > 0.0 ? std::sqrt(yvar) : 1.0;
  return s;
}

Eigen::MatrixXd Standardizer::transform_x(const Eigen::MatrixXd& x) const {
  if (x.cols() != x_mean.size()) {
    throw DimensionError("standardizer fitted on " + std::to_string(x_mean.size()) +
                         " columns, got " + shape_string(x));
  }
  return ((x.rowwise() - x_mean.transpose()).array().rowwise() / x_std.transpose().array())
      .matrix();
}

Eigen::VectorXd Standardizer::transform_y(const Eigen::VectorXd& y) const {
  return ((y.array() - y_mean) / y_std).matrix();
}

Eigen::MatrixXd Standardizer::inverse_x(const Eigen::MatrixXd& x) const {
  return ((x.array().rowwise() * x_std.transpose().array()).rowwise() + x_mean.transpose().array())
      .matrix();
}

Eigen::VectorXd Standardizer::inverse_y(const Eigen::VectorXd& y) const {
  return (y.array() * y_std + y_mean).matrix();
}

Dataset Standardizer::transform(const Dataset& d) const {
  Dataset out = d;
  out.x = transform_x(d.x);
  out.y = transform_y(d.y);
  return out;
}

StandardizedSplit standardize_fit_transform(const Dataset& train, const Dataset& test) {
  StandardizedSplit out;
  out.scaler = Standardizer::fit(train);
  test.validate();
  out.train = out.scaler.transform(train);
  out.test = out.scaler.transform(test);
  return out;
}

double rmse(const Eigen::VectorXd& pred, const Eigen::VectorXd& truth) {
  if (pred.size() != truth.size() || pred.size() < 1) {
    throw DimensionError("rmse needs equal non-empty vectors, got " + std::to_string(pred.size()) +
                         " and " + std::to_string(truth.size()));
  }
  return std::sqrt((pred - truth).squaredNorm() / static_cast<double>(pred.size()));
}

double coverage_rate(const Eigen::VectorXd& pred_mean, const Eigen::VectorXd& pred_std,
                     const Eigen::VectorXd& truth) {
  if (pred_mean.size() != truth.size() || pred_std.size() != truth.size() || truth.size() < 1) {
    throw DimensionError("coverage_rate needs three equal non-empty vectors");
  }
  if ((pred_std.array() < 0.0).any()) throw std::invalid_argument("pred_std must be >= 0");
  const auto covered = ((truth - pred_mean).array().abs() <= pred_std.array()).count();
  return static_cast<double>(covered) / static_cast<double>(truth.size());
}

void to_json(nlohmann::json& j, const EvalReport& r) {
  j = nlohmann::json{{"rmse", r.rmse}, {"n_test", r.n_test}};
  if (r.coverage_rate) j["coverage"] = *r.coverage_rate;
  if (!r.per_domain_rmse.empty()) j["per_domain_rmse"] = r.per_domain_rmse;
}

}  // namespace dilgp
