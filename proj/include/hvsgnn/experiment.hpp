// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "hvsgnn/dataset.hpp"
#include "hvsgnn/network.hpp"
#include "hvsgnn/training.hpp"

namespace hvsgnn {

struct ExperimentConfig {
  // Exactly one of preset / spec_path.
  std::string preset;
  std::filesystem::path spec_path;
  // Exactly one of dataset_path / task.
  std::filesystem::path dataset_path;
  std::optional<SyntheticTask> task;

  std::size_t n_train = 200;
  std::size_t n_val = 30;
  std::size_t n_test = 30;
  NodeRange node_range;

  double alpha_l = 1.0;
  /// Defaults to 0.1 for networks with spiking layers and 0 otherwise.
  std::optional<double> beta_l;
  OptimConfig optim;
  std::size_t sts = 4;
  std::size_t blocks = 14;  // ex3 presets
  NeuronConfig neuron;

  std::uint64_t seed = 0;
  /// Seed for synthetic data; defaults to seed.
  std::optional<std::uint64_t> data_seed;

  std::filesystem::path out_dir;
  bool include_timing = false;
  std::string label;  // defaults to the preset name or spec file stem
};

/// Applies keys of a JSON object onto cfg. Keys use the long flag names with
/// underscores (e.g. "beta_l", "n_train"). Throws ConfigError on unknown keys.
void apply_config_json(ExperimentConfig& cfg, const std::string& json_text);

/// Resolved experiment, checked before any training starts.
struct PreparedExperiment {
  ExperimentConfig config;
  NetworkSpec spec;
  DatasetSplits splits;
  LossConfig loss;
  std::string label;
  std::uint64_t dataset_fingerprint = 0;
};

/// Throws ConfigError / SchemaError for invalid configurations.
PreparedExperiment prepare_experiment(const ExperimentConfig& cfg);

struct ExperimentResult {
  std::string label;
  std::uint64_t seed = 0;
  double beta_l = 0.0;
  std::uint64_t dataset_fingerprint = 0;
  TrainReport report;
};

/// Trains and writes report.json, epochs.csv, predictions.csv, spiking.csv
/// and network.txt into cfg.out_dir.
ExperimentResult run_experiment(const ExperimentConfig& cfg);
ExperimentResult run_prepared(const PreparedExperiment& prepared);

struct ComparisonRow {
  std::string label;
  std::uint64_t seed = 0;
  double beta_l = 0.0;
  double test_mse = 0.0;
  std::optional<double> mean_spiking;
};

struct ComparisonSummary {
  std::string label;
  double beta_l = 0.0;
  std::size_t runs = 0;
  double test_mse = 0.0;
  std::optional<double> mean_spiking;
};

struct Comparison {
  std::vector<ComparisonRow> rows;          // sorted by label, beta_l, seed
  std::vector<ComparisonSummary> summary;   // seed-averaged, same order
};

/// Builds the table from finished runs. Refuses runs on different datasets
/// or variants run over different seed sets.
Comparison compare_models(const std::vector<ExperimentResult>& results);

/// Runs each config in a subdirectory of out_dir, then writes
/// comparison.csv and comparison.md.
Comparison run_comparison(const std::vector<ExperimentConfig>& configs,
                          const std::filesystem::path& out_dir);

/// Header: label,beta_l,seed,test_mse,mean_S
std::string comparison_csv(const Comparison& c);
std::string comparison_markdown(const Comparison& c);

struct DatasetSummary {
  std::size_t graphs = 0;
  std::size_t min_nodes = 0;
  std::size_t max_nodes = 0;
  double min_target = 0.0;
  double max_target = 0.0;
};

DatasetSummary summarize_dataset(std::span<const Graph> graphs);
std::string format_summary(const DatasetSummary& s);

/// Generates and writes a synthetic dataset file.
DatasetSummary gen_data(SyntheticTask task, std::size_t n_graphs, NodeRange node_range,
                        std::uint64_t seed, const std::filesystem::path& out);

/// FNV-1a over the canonical serialization.
std::uint64_t dataset_fingerprint(std::span<const Graph> graphs);

/// Minimal CSV reader for the files written here (no quoting).
struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;
};
CsvTable parse_csv(const std::string& text);

}  // namespace hvsgnn
