#pragma once

#include "dilgp/bayes_opt.hpp"
#include "dilgp/data.hpp"
#include "dilgp/dil.hpp"
#include "dilgp/quad_sim.hpp"

#include <nlohmann/json.hpp>

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace dilgp {

/// Version string written into manifests.
std::string tool_version();

/// Lowercase hex SHA-256 of bytes.
std::string sha256_hex(const std::string& bytes);

// ---------------------------------------------------------------- datasets

struct DatasetSource {
  /// synthetic_1d, synthetic_2d or csv.
  std::string generator = "synthetic_1d";
  std::uint64_t seed = 0;
  bool noise_as_std = false;
  std::string train_csv;
  std::string test_csv;
  std::string target;
  std::vector<std::string> features;
  std::optional<std::string> domain_column;
};

void to_json(nlohmann::json& j, const DatasetSource& d);
void from_json(const nlohmann::json& j, DatasetSource& d);

/// Generated or loaded (train, test). seed overrides d.seed for generators.
std::pair<Dataset, Dataset> resolve_dataset(const DatasetSource& d, std::uint64_t seed);

// ---------------------------------------------------------------- fit/eval

struct GridSelection {
  std::vector<std::uint64_t> dev_seeds{100, 101, 102};
  std::vector<double> lambdas{0.1, 1.0, 3.0};
  std::vector<double> learning_rates{0.01, 0.1};
};

void to_json(nlohmann::json& j, const GridSelection& g);
void from_json(const nlohmann::json& j, GridSelection& g);

struct FitEvalConfig {
  DatasetSource data{};
  /// dil_gp, gp_gaussian, gp_rq or gp_dp.
  std::string model = "dil_gp";
  /// Kernel used by dil_gp; the gp_* models fix their own.
  KernelKind kernel = KernelKind::Gaussian;
  KernelParams init_params = KernelParams::from_natural(1.0, 1.0);
  double sigma2 = 0.01;
  TrainConfig train{};
  bool standardize = true;
  /// Number of consecutive dataset seeds to run, starting at data.seed.
  int sweep = 1;
  bool per_domain = false;
  /// Pick lambda and learning rate on dev_seeds before evaluating.
  std::optional<GridSelection> selection;

  bool is_dil() const { return model == "dil_gp"; }
  KernelKind model_kernel() const;
  void validate() const;
};

/// gp_* configs omit every DIL-only training field.
void to_json(nlohmann::json& j, const FitEvalConfig& c);
void from_json(const nlohmann::json& j, FitEvalConfig& c);

struct FitEvalRun {
  std::uint64_t seed = 0;
  EvalReport report;
  KernelParams params;
  NoiseSpec noise;
  std::vector<TraceRecord> trace;
  bool aborted = false;
  std::string error;
};

/// Trains on one dataset seed and evaluates on its test split in original units.
FitEvalRun fit_eval_once(const FitEvalConfig& cfg, std::uint64_t seed);

struct SweepSummary {
  double rmse_mean = 0.0;
  double rmse_max_dev = 0.0;
  std::optional<double> coverage_mean;
  std::optional<double> coverage_max_dev;
};

SweepSummary summarize(const std::vector<FitEvalRun>& runs);
void to_json(nlohmann::json& j, const SweepSummary& s);

struct SelectionOutcome {
  double lambda = 0.0;
  double learning_rate = 0.0;
  nlohmann::json table;  ///< one entry per candidate with its mean dev RMSE
};

/// Grid search on the dev seeds by mean test RMSE. The evaluation seeds are
/// never touched. Only generator-backed sources have dev seeds.
SelectionOutcome select_hyperparameters(const FitEvalConfig& cfg, const GridSelection& grid);

/// Applies a selection to a config (lambda only for dil_gp).
FitEvalConfig with_selection(FitEvalConfig cfg, const SelectionOutcome& s);

// ---------------------------------------------------------------- BO

struct BoExperimentConfig {
  /// quadratic, forrester or quad_pid.
  std::string objective = "quadratic";
  BOConfig bo{};
  TrajectoryKind trajectory = TrajectoryKind::Fig8;
  WindDomainSpec train_wind = WindDomainSpec::domain1();
  WindDomainSpec heldout_wind = WindDomainSpec::domain2();
  std::vector<std::uint64_t> train_wind_seeds{0, 1, 2};
  std::vector<std::uint64_t> heldout_wind_seeds{1000, 1001, 1002, 1003, 1004};
  double gain_upper = 5.0;

  void validate() const;
};

void to_json(nlohmann::json& j, const BoExperimentConfig& c);
void from_json(const nlohmann::json& j, BoExperimentConfig& c);

struct BoExperimentResult {
  BORun run;
  std::optional<double> heldout_ace;  ///< quad_pid only
  std::optional<double> train_ace;
  nlohmann::json summary;
};

BoExperimentResult run_bo_experiment(const BoExperimentConfig& cfg);

// ---------------------------------------------------------------- commands

/// Output file name -> exact bytes.
using OutputFiles = std::map<std::string, std::string>;

OutputFiles cmd_generate(const nlohmann::json& config);
OutputFiles cmd_fit_eval(const nlohmann::json& config);
OutputFiles cmd_bo(const nlohmann::json& config);

/// Fills defaults for a command's config; throws on unknown commands or bad values.
nlohmann::json resolve_config(const std::string& command, const nlohmann::json& config);

struct RunOutcome {
  std::filesystem::path out_dir;
  nlohmann::json manifest;
};

/// Resolves the config, runs the command, writes every output plus
/// resolved_config.json and manifest.json into out_dir. Outputs are staged in
/// memory, so a failing command writes nothing.
RunOutcome run_command(const std::string& command, const nlohmann::json& config,
                       const std::filesystem::path& out_dir);

struct ReplayReport {
  bool identical = true;
  std::vector<std::string> mismatched;
  nlohmann::json manifest;
};

/// Re-runs the command recorded in a manifest into out_dir and compares checksums.
ReplayReport replay(const std::filesystem::path& manifest_path, const std::filesystem::path& out_dir);

}  // namespace dilgp
