// SPDX-License-Identifier: Apache-2.0
#include "hvsgnn/neurons.hpp"

#include <string>

#include "hvsgnn/error.hpp"

namespace hvsgnn {

Activation parse_activation(std::string_view id) {
  if (id == "relu") return Activation::kRelu;
  if (id == "sigmoid") return Activation::kSigmoid;
  if (id == "tanh") return Activation::kTanh;
  if (id == "identity") return Activation::kIdentity;
  throw ConfigError("unknown activation \"" + std::string(id) + "\"");
}

std::string_view activation_name(Activation a) {
  switch (a) {
    case Activation::kRelu: return "relu";
    case Activation::kSigmoid: return "sigmoid";
    case Activation::kTanh: return "tanh";
    case Activation::kIdentity: return "identity";
  }
  return "unknown";
}

bool activation_preserves_zero(Activation a) { return a != Activation::kSigmoid; }

Tensor artificial_activate(const Tensor& z, Activation kind) {
  switch (kind) {
    case Activation::kRelu: return relu(z);
    case Activation::kSigmoid: return sigmoid(z);
    case Activation::kTanh: return tanh(z);
    case Activation::kIdentity: return identity(z);
  }
  throw ConfigError("unknown activation kind");
}

void validate_neuron_config(const NeuronConfig& cfg, NeuronKind kind) {
  if (!(cfg.beta >= 0.0 && cfg.beta <= 1.0)) {
    throw ConfigError("neuron leakage beta must lie in [0, 1], got " + std::to_string(cfg.beta));
  }
  if (!(cfg.surrogate_slope > 0.0)) throw ConfigError("surrogate slope must be positive");
  if (kind == NeuronKind::kVsn && !activation_preserves_zero(cfg.inner_activation)) {
    throw ConfigError("VSN inner activation must satisfy act(0) = 0; " +
                      std::string(activation_name(cfg.inner_activation)) + " does not");
  }
}

NeuronParams make_neuron_params(const NeuronConfig& cfg) {
  return {Tensor::scalar(cfg.beta, cfg.trainable_beta),
          Tensor::scalar(cfg.threshold, cfg.trainable_threshold)};
}

Tensor SpikeTelemetry::soft_rate() const {
  if (steps == 0) return Tensor::scalar(0.0);
  return scalar_mul(gate_rate_sum, 1.0 / static_cast<double>(steps));
}

double SpikeTelemetry::rate() const {
  if (opportunity_count == 0) return 0.0;
  return static_cast<double>(spike_count) / static_cast<double>(opportunity_count);
}

void SpikeTelemetry::merge(const SpikeTelemetry& other) {
  spike_count += other.spike_count;
  opportunity_count += other.opportunity_count;
  gate_rate_sum = add(gate_rate_sum, other.gate_rate_sum);
  steps += other.steps;
}

namespace {

/// Shared membrane update; returns the gate and advances the state.
Tensor integrate_and_gate(NeuronState& state, const Tensor& z, const NeuronConfig& cfg,
                          const NeuronParams& params, SpikeTelemetry& telemetry) {
  Tensor m;
  if (state.fresh()) {
    m = z;
  } else {
    if (state.membrane.shape() != z.shape()) {
      throw ShapeError("neuron input shape differs from its membrane shape");
    }
    m = add(scale_by(state.membrane, params.beta), z);
  }
  const Tensor gate = spike_gate(m, params.threshold, cfg.surrogate_slope);

  // Reset is a stop-gradient event: the mask is a constant.
  std::vector<double> keep(gate.size());
  std::uint64_t spikes = 0;
  auto gv = gate.values();
  for (std::size_t i = 0; i < gv.size(); ++i) {
    keep[i] = 1.0 - gv[i];
    spikes += gv[i] != 0.0 ? 1 : 0;
  }
  state.membrane = mul(m, Tensor(m.shape(), std::move(keep)));
  ++state.step;

  telemetry.spike_count += spikes;
  telemetry.opportunity_count += gate.size();
  telemetry.gate_rate_sum = add(telemetry.gate_rate_sum, reduce_mean(gate));
  ++telemetry.steps;
  return gate;
}

}  // namespace

Tensor lif_step(NeuronState& state, const Tensor& z, const NeuronConfig& cfg,
                const NeuronParams& params, SpikeTelemetry& telemetry) {
  return integrate_and_gate(state, z, cfg, params, telemetry);
}

Tensor lif_step(NeuronState& state, const Tensor& z, const NeuronConfig& cfg,
                SpikeTelemetry& telemetry) {
  const NeuronParams fixed{Tensor::scalar(cfg.beta), Tensor::scalar(cfg.threshold)};
  return lif_step(state, z, cfg, fixed, telemetry);
}

Tensor vsn_step(NeuronState& state, const Tensor& z, const NeuronConfig& cfg,
                const NeuronParams& params, SpikeTelemetry& telemetry) {
  if (!activation_preserves_zero(cfg.inner_activation)) {
    throw ConfigError("VSN inner activation must satisfy act(0) = 0");
  }
  const Tensor gate = integrate_and_gate(state, z, cfg, params, telemetry);
  // Equal to act(z * gate) for binary gates since act(0) = 0, but a closed
  // gate still receives gradient act(z).
  return mul(artificial_activate(z, cfg.inner_activation), gate);
}

Tensor vsn_step(NeuronState& state, const Tensor& z, const NeuronConfig& cfg,
                SpikeTelemetry& telemetry) {
  const NeuronParams fixed{Tensor::scalar(cfg.beta), Tensor::scalar(cfg.threshold)};
  return vsn_step(state, z, cfg, fixed, telemetry);
}

SpikeStream run_over_sts(NeuronKind kind, std::span<const Tensor> z_stream,
                         const NeuronConfig& cfg) {
  if (z_stream.empty()) throw ConfigError("spike stream must contain at least one step");
  validate_neuron_config(cfg, kind);
  SpikeStream result;
  NeuronState state;
  const NeuronParams params = make_neuron_params(cfg);
  for (const Tensor& z : z_stream) {
    result.outputs.push_back(kind == NeuronKind::kLif
                                 ? lif_step(state, z, cfg, params, result.telemetry)
                                 : vsn_step(state, z, cfg, params, result.telemetry));
  }
  return result;
}

}  // namespace hvsgnn
