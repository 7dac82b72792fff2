// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <span>
#include <string_view>
#include <vector>

#include "hvsgnn/tensor.hpp"

namespace hvsgnn {

enum class Activation { kRelu, kSigmoid, kTanh, kIdentity };

Activation parse_activation(std::string_view id);
std::string_view activation_name(Activation a);
/// True when the activation maps 0 to 0 (required inside a VSN).
bool activation_preserves_zero(Activation a);

/// y = act(z), fully differentiable.
Tensor artificial_activate(const Tensor& z, Activation kind);

enum class NeuronKind { kLif, kVsn };

struct NeuronConfig {
  double beta = 0.9;       // leakage, kept in [0, 1]
  double threshold = 1.0;  // firing threshold
  Activation inner_activation = Activation::kRelu;  // VSN only
  bool trainable_beta = true;
  bool trainable_threshold = true;
  double surrogate_slope = 25.0;
};

/// Throws ConfigError on beta outside [0, 1], a non-positive slope, or a VSN
/// inner activation with act(0) != 0.
void validate_neuron_config(const NeuronConfig& cfg, NeuronKind kind);

/// Per-layer scalar leakage and threshold. Shared by every neuron of a layer.
struct NeuronParams {
  Tensor beta;
  Tensor threshold;
};

/// Leaves initialized from cfg; requires_grad follows the trainable flags.
NeuronParams make_neuron_params(const NeuronConfig& cfg);

struct NeuronState {
  Tensor membrane;  // empty until the first step
  std::size_t step = 0;
  bool fresh() const { return step == 0; }
};

/// Counts over all neurons and steps of one spiking layer.
struct SpikeTelemetry {
  std::uint64_t spike_count = 0;
  std::uint64_t opportunity_count = 0;
  /// Sum over steps of the mean gate value; carries surrogate gradient.
  Tensor gate_rate_sum = Tensor::scalar(0.0);
  std::size_t steps = 0;

  /// Mean gate value over neurons and steps, differentiable.
  Tensor soft_rate() const;
  /// spike_count / opportunity_count.
  double rate() const;
  void merge(const SpikeTelemetry& other);
};

/// Leaky integrate-and-fire: M = beta*M + z, y = [M >= T], reset where y = 1.
Tensor lif_step(NeuronState& state, const Tensor& z, const NeuronConfig& cfg,
                const NeuronParams& params, SpikeTelemetry& telemetry);
Tensor lif_step(NeuronState& state, const Tensor& z, const NeuronConfig& cfg,
                SpikeTelemetry& telemetry);

/// Variable spiking neuron: same membrane and gate as LIF, graded output
/// y = act(z * gate).
Tensor vsn_step(NeuronState& state, const Tensor& z, const NeuronConfig& cfg,
                const NeuronParams& params, SpikeTelemetry& telemetry);
Tensor vsn_step(NeuronState& state, const Tensor& z, const NeuronConfig& cfg,
                SpikeTelemetry& telemetry);

struct SpikeStream {
  std::vector<Tensor> outputs;
  SpikeTelemetry telemetry;
};

/// Runs a fresh neuron over every element of z_stream in order.
SpikeStream run_over_sts(NeuronKind kind, std::span<const Tensor> z_stream,
                         const NeuronConfig& cfg);

}  // namespace hvsgnn
