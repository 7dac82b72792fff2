// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "hvsgnn/graph.hpp"
#include "hvsgnn/layers.hpp"
#include "hvsgnn/neurons.hpp"

namespace hvsgnn {

enum class LayerKind {
  kLinear,
  kGcn,
  kSage,
  kPna,
  kGru,
  kBatchNorm,
  kGlobalMeanPool,
  kFlattenConcat,
  kActivation,
};

std::string_view layer_kind_name(LayerKind kind);

/// What follows a layer: nothing, a continuous activation, or a spiking
/// neuron layer run across spike time steps.
struct ActivationMode {
  enum class Type { kNone, kArtificial, kLif, kVsn };
  Type type = Type::kNone;
  /// Artificial activation, or the VSN inner activation.
  Activation activation = Activation::kIdentity;
  NeuronConfig neuron;

  bool spiking() const { return type == Type::kLif || type == Type::kVsn; }

  static ActivationMode none() { return {}; }
  static ActivationMode artificial(Activation a) { return {Type::kArtificial, a, {}}; }
  static ActivationMode lif(NeuronConfig cfg = {}) { return {Type::kLif, Activation::kIdentity, cfg}; }
  static ActivationMode vsn(Activation inner, NeuronConfig cfg = {}) {
    cfg.inner_activation = inner;
    return {Type::kVsn, inner, cfg};
  }
};

struct LayerSpec {
  LayerKind kind = LayerKind::kLinear;
  std::size_t width = 1;
  ActivationMode mode;
  std::string name;  // optional label, e.g. "A1"
  Aggregator aggregator = Aggregator::kMean;  // sage
  std::vector<Aggregator> aggregators{Aggregator::kMean, Aggregator::kMax, Aggregator::kMin,
                                      Aggregator::kStd};  // pna
  std::vector<double> scaler_alphas{0.0, 1.0, -1.0};  // pna
  std::size_t n_max = 0;        // flatten-concat
  std::size_t field_arity = 0;  // flatten-concat
};

/// Ordered layer list plus the input arities the first layer sees.
struct NetworkSpec {
  std::size_t in_features = 1;
  std::size_t edge_features = 0;
  std::size_t field_arity = 0;
  std::vector<LayerSpec> layers;
};

/// Text form, one layer per line:
///   input(5) [edge_dim=N] [field=K]
///   kind(width) [mode=none|artificial:ACT|lif|vsn:ACT] [name=LABEL] [attrs]
/// Attributes: agg= (sage), aggs=a,b,.. and scalers=0,1,-1 (pna),
/// n_max= and field= (flatten-concat), beta=, threshold=, slope=,
/// trainable=beta,threshold|beta|threshold|none (spiking modes).
/// '#' starts a comment. Throws SchemaError naming the offending line.
NetworkSpec parse_network_spec(std::string_view text);
std::string format_network_spec(const NetworkSpec& spec);

struct PresetOptions {
  std::size_t in_features = 5;
  std::size_t edge_features = 0;
  /// Padding size for the flatten-concat boundary (ex2 family).
  std::size_t n_max = 40;
  std::size_t field_arity = 1;
  /// Repeated blocks in the ex3 family.
  std::size_t blocks = 14;
  NeuronConfig neuron;
};

/// Names: ex1|ex2|ex3 followed by -agnn (continuous baseline), -v1 / -v2
/// (VSN variants) or -v1-lif / -v2-lif (LIF variants).
NetworkSpec preset_spec(std::string_view name, const PresetOptions& options = {});
std::vector<std::string> preset_names();

/// Throws SchemaError on width mismatches, misplaced layers or invalid
/// neuron configurations.
void validate_network_spec(const NetworkSpec& spec);

enum class ParamRole { kWeight, kBias, kScale, kShift, kLeakage, kThreshold };

struct Parameter {
  std::string name;
  Tensor value;
  ParamRole role = ParamRole::kWeight;
  bool trainable() const { return value.requires_grad(); }
};

struct LayerTelemetry {
  std::string name;
  std::size_t layer_index = 0;
  SpikeTelemetry telemetry;
};

struct ForwardResult {
  Tensor output;
  /// One entry per spiking layer, in layer order.
  std::vector<LayerTelemetry> telemetry;
};

class Network {
 public:
  const NetworkSpec& spec() const { return spec_; }
  std::vector<Parameter>& parameters() { return parameters_; }
  const std::vector<Parameter>& parameters() const { return parameters_; }

  bool has_spiking_layers() const;
  std::vector<std::string> spiking_layer_names() const;
  /// True when the output has one row per node, false for one row per sample.
  bool node_level_output() const { return node_level_output_; }
  std::size_t output_width() const { return spec_.layers.back().width; }

  bool uses_degree_scalers() const;
  bool degree_normalization_set() const { return delta_.has_value(); }
  double degree_normalization() const;
  void set_degree_normalization(double delta);

  /// Runs the network. With spiking layers, the batch is presented sts times
  /// with persistent neuron state and the output is the mean of the step
  /// outputs; otherwise it runs once.
  ForwardResult forward(const GraphBatch& batch, std::size_t sts, Mode mode);

  /// Parameter values plus batch-norm running statistics.
  struct State {
    std::vector<std::vector<double>> values;
    bool operator==(const State&) const = default;
  };
  State state() const;
  void load_state(const State& s);

 private:
  friend Network assemble_network(const NetworkSpec& spec, std::uint64_t seed);

  struct Layer {
    std::variant<std::monostate, LinearParams, GcnParams, SageParams, PnaParams, GruParams,
                 BatchNormParams>
        params;
    std::optional<NeuronParams> neuron;
  };

  NetworkSpec spec_;
  std::vector<Layer> layers_;
  std::vector<Parameter> parameters_;
  std::optional<double> delta_;
  bool node_level_output_ = true;
};

/// Instantiates parameters with U(-1/sqrt(fan_in), 1/sqrt(fan_in)) weights;
/// deterministic in seed.
Network assemble_network(const NetworkSpec& spec, std::uint64_t seed);

inline ForwardResult network_forward(Network& net, const GraphBatch& batch, std::size_t sts,
                                     Mode mode = Mode::kEval) {
  return net.forward(batch, sts, mode);
}

}  // namespace hvsgnn
