// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "hvsgnn/graph.hpp"
#include "hvsgnn/network.hpp"
#include "hvsgnn/tensor.hpp"

namespace hvsgnn {

/// alpha_l weighs the vanilla loss, beta_l the spiking activity term.
/// beta_l = 0 gives the plain loss.
struct LossConfig {
  double alpha_l = 1.0;
  double beta_l = 0.1;
};

void validate_loss_config(const LossConfig& cfg);

struct OptimConfig {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  std::size_t epochs = 100;
  std::size_t batch_size = 16;
  std::uint64_t seed = 0;
};

void validate_optim_config(const OptimConfig& cfg);

/// Mean of squared elementwise differences.
Tensor mse_loss(const Tensor& pred, const Tensor& target);

struct SpikingActivity {
  std::vector<std::string> names;
  std::vector<double> per_layer;  // spike_count / opportunity_count
  double mean = 0.0;              // unweighted mean over layers
};

/// Throws ConfigError when telemetry is empty.
SpikingActivity spiking_activity(std::span<const LayerTelemetry> telemetry);

/// alpha_l * lv + beta_l * mean(soft_rates).
Tensor slf_loss(const Tensor& lv, std::span<const Tensor> soft_rates, const LossConfig& cfg);

struct AdamState {
  std::vector<std::vector<double>> m;
  std::vector<std::vector<double>> v;
  std::uint64_t step = 0;
};

AdamState make_adam_state(std::span<const Parameter> params);

/// One bias-corrected ADAM update over the trainable parameters; leakage
/// parameters are clamped to [0, 1] afterwards.
void adam_step(std::span<Parameter> params, std::span<const std::vector<double>> grads,
               AdamState& state, const OptimConfig& cfg);

struct DatasetSplits {
  std::vector<Graph> train;
  std::vector<Graph> val;
  std::vector<Graph> test;
};

struct Prediction {
  std::size_t sample = 0;
  std::size_t node = 0;  // 0 for graph-level outputs
  std::size_t output = 0;
  double truth = 0.0;
  double predicted = 0.0;
};

struct EvalResult {
  double mse = 0.0;
  std::size_t count = 0;  // number of target elements
  std::optional<SpikingActivity> spiking;
  std::vector<Prediction> predictions;
};

/// Eval-mode pass over graphs in order; no parameter updates.
EvalResult evaluate(Network& net, std::span<const Graph> graphs, std::size_t sts,
                    std::size_t batch_size = 64);

struct EpochRecord {
  std::size_t epoch = 0;
  double train_loss = 0.0;  // MSE over the epoch's training batches
  double val_loss = 0.0;
  std::vector<double> spiking;  // per spiking layer, measured on validation
};

struct TrainReport {
  LossConfig loss;
  OptimConfig optim;
  std::size_t sts = 1;
  std::string network;
  std::vector<std::string> spiking_layers;
  std::vector<EpochRecord> epochs;
  std::size_t best_epoch = 0;
  double best_val_loss = 0.0;
  std::optional<EvalResult> test;
  double seconds = 0.0;
};

/// Mini-batch training with seeded shuffling. The parameters with the lowest
/// validation loss are restored before the test evaluation. Throws
/// DivergenceError on a non-finite loss.
TrainReport train(Network& net, const DatasetSplits& splits, const LossConfig& loss,
                  const OptimConfig& optim, std::size_t sts);

/// Structured text document; wall-clock only when include_timing.
std::string report_to_json(const TrainReport& report, bool include_timing = false);
/// Header: epoch,train_loss,val_loss,S_<layer>...
std::string epochs_csv(const TrainReport& report);
/// Header: sample,node,output,truth,prediction
std::string predictions_csv(const EvalResult& result);
/// Header: epoch,layer,S with a final "test" row per layer when available.
std::string spiking_csv(const TrainReport& report);

/// Shortest round-trip decimal form.
std::string format_number(double v);

}  // namespace hvsgnn
