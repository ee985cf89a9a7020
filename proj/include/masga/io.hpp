#pragma once

#include <cstdint>
#include <iosfwd>
#include <limits>
#include <string>
#include <vector>

#include "masga/adaptive.hpp"
#include "masga/dataset.hpp"

namespace masga {

struct LoadOptions {
  /// Last column holds a binary target.
  bool labelled = true;
  /// Scale every feature column to zero mean and unit variance.
  bool standardize = true;
};

/// Reads a comma-separated file. A first row that does not parse as numbers
/// is taken as a header. Two-valued targets map to -1 (smaller) and +1.
/// Throws ParseError (1-based row and column) or TargetError.
Dataset load_dataset(const std::string& path, const LoadOptions& options = {});
Dataset parse_dataset(std::istream& is, const LoadOptions& options = {});
void write_dataset_csv(std::ostream& os, const Dataset& data);

enum class SyntheticKind { kLogistic, kMixture, kOu };

SyntheticKind synthetic_kind_from_string(const std::string& name);

struct SyntheticSpec {
  SyntheticKind kind = SyntheticKind::kLogistic;
  std::size_t m = 1000;
  std::size_t d = 5;
  std::uint64_t seed = 1;
  double mixture_variance = 5.0;
};

/// logistic: standardized N(0, I) features, targets drawn from the logistic
/// likelihood at a random true parameter. mixture: d = 2 columns, each entry
/// 1/2 N(0, var) + 1/2 N(1, var). ou: N(1, 1) entries.
Dataset gen_synthetic(const SyntheticSpec& spec);

struct ExperimentConfig {
  std::string model = "logistic_gaussian";
  std::string dataset;  // CSV path; synthetic data when empty
  std::size_t m = 1000;
  std::size_t d = 5;
  std::uint64_t data_seed = 1;
  std::size_t s0 = 4;
  double h0 = 0.005;
  double t = 0.5;
  std::string f = "norm_sq";
  std::string estimator = "masga";
  std::vector<double> epsilons{0.1};
  std::uint64_t seed = 1;
  std::string x0 = "sgd_mode";
  ReplacementMode mode = ReplacementMode::kWithout;
  std::uint64_t n_pilot = 100;
  std::uint32_t L_init = 2;
  std::uint32_t L_max = 8;
  double alpha_assumed = 1.0;
  unsigned threads = 0;
  double beta = std::numeric_limits<double>::quiet_NaN();  // NaN: model default
  double mixture_variance = 5.0;
  double ou_alpha = 1.0;
  int mode_iterations = 500;
  double mode_step = 1.0;  // gradient ascent step is mode_step / m
  std::uint32_t mc_level = 2;

  /// n0 = t / h0; throws ConfigError unless it is a positive integer.
  std::uint64_t n0() const;
  void validate() const;
};

/// Applies one key=value setting. Throws ConfigError on an unknown key or
/// a bad value.
void apply_setting(ExperimentConfig& config, const std::string& key, const std::string& value);

/// Flat key=value lines, '#' starts a comment. A `preset = name` line loads
/// the preset before the following keys apply.
ExperimentConfig parse_config(std::istream& is);
ExperimentConfig load_config(const std::string& path);

/// logistic-small, amlmc-logistic, mixture, sgld-cv.
ExperimentConfig preset(const std::string& name);
std::vector<std::string> preset_names();

std::string report_to_json(const EstimatorReport& report);
/// Reads the report.json keys back (stats are not stored there).
EstimatorReport report_from_json(const std::string& text);
/// Human-readable summary, a function of the report.json fields only.
std::string format_summary(const EstimatorReport& report);

struct ConvergenceRow {
  double eps = 0.0;
  double estimate = 0.0;
  double total_cost = 0.0;
  std::uint32_t L = 0;
};

/// `eps,estimate,total_cost,cost_times_eps2,L`.
void write_convergence_csv(std::ostream& os, const std::vector<ConvergenceRow>& rows);

struct ExperimentResult {
  std::vector<ConvergenceRow> convergence;
  EstimatorReport final_report;
  int exit_code = 0;  // 0 converged, 2 stopped at L_max
};

/// Runs the configured estimator once per epsilon and writes levels.csv
/// (final epsilon), convergence.csv and report.json (final epsilon) into
/// out_dir.
ExperimentResult run_experiment(const ExperimentConfig& config, const std::string& out_dir);

/// Builds the data set the config describes (file or synthetic).
Dataset experiment_dataset(const ExperimentConfig& config);

}  // namespace masga
