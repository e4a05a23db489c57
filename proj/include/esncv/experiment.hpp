#pragma once

#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "esncv/data.hpp"
#include "esncv/report.hpp"

namespace esncv {

enum class DatasetFormat { univariate_csv, paired_csv, japanese_vowels };

struct DatasetConfig {
  DatasetFormat format = DatasetFormat::univariate_csv;
  std::filesystem::path path;        // csv formats
  std::filesystem::path train_path;  // japanese_vowels
  std::filesystem::path test_path;
  NormMethod normalization = NormMethod::none;
  Index test_len = 0;
  Index washout = 0;
  /// paired_csv: "values" takes column 2 as the target, "events" marks nonzero
  /// entries of column 2 as events and builds ramped annotation targets.
  std::string target = "values";
  Index fade = 5;
};

struct ExperimentConfig {
  std::string name = "experiment";
  DatasetConfig dataset;
  TaskKind task = TaskKind::generative;
  AggregateMode aggregate = AggregateMode::last_state;
  std::vector<SchemeSpec> schemes;
  GridSpec grid;
  Backend backend = Backend::large_k;
  std::vector<FinalMethod> final_methods = {FinalMethod::averaged, FinalMethod::best, FinalMethod::retrained,
                                            FinalMethod::ireg_retrained};
  EvalOptions::Memory memory = EvalOptions::Memory::retain_states;
  double divergence_factor = 1e6;
  bool shuffle_sequences = true;
  std::filesystem::path output_dir = "results";
};

/// Parses and validates a JSON config. Relative paths resolve against `base_dir`.
/// Throws config_error (or load_error for missing files) with a pointed message.
ExperimentConfig parse_experiment(const json& j, const std::filesystem::path& base_dir);
ExperimentConfig load_experiment(const std::filesystem::path& config_path);

/// Every field with its effective value, defaults included.
json resolved_config(const ExperimentConfig& config);

/// Loads the dataset and builds the task described by `config`.
TaskData build_task(const ExperimentConfig& config);

struct SchemeOutcome {
  SchemeSpec spec;
  std::optional<SearchResult> result;
  std::string failure;
  std::filesystem::path report_path;
};

struct RunOptions {
  unsigned jobs = 0;
  bool force = false;
};

/// Grid search per scheme; writes NN_<label>.json, NN_<label>.csv, NN_<label>_scatter.csv,
/// summary.csv and resolved_config.json into the output directory, and a summary table to `log`.
std::vector<SchemeOutcome> run_experiment(const ExperimentConfig& config, const RunOptions& options, std::ostream& log);

std::string scheme_file_stem(std::size_t index, const SchemeSpec& spec);

DatasetFormat parse_dataset_format(std::string_view s);
std::string_view to_string(DatasetFormat f);

}  // namespace esncv
