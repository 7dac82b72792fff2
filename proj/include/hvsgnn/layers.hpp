// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <span>
#include <string_view>
#include <vector>

#include "hvsgnn/graph.hpp"
#include "hvsgnn/neurons.hpp"
#include "hvsgnn/tensor.hpp"

namespace hvsgnn {

// Layer kernels. Each takes its parameters explicitly and records onto the
// active tape; activations inside a layer are continuous. Neighborhoods are
// reduced in ascending neighbor order, so outputs are bit-for-bit
// permutation-equivariant.

enum class Aggregator { kMean, kSum, kMax, kMin, kStd };

Aggregator parse_aggregator(std::string_view id);
std::string_view aggregator_name(Aggregator a);

enum class Mode { kTrain, kEval };

struct LinearParams {
  Tensor weight;  // in x out
  Tensor bias;    // out
};

/// x W + b.
Tensor linear_forward(const Tensor& x, const LinearParams& p);

struct GcnParams {
  Tensor weight;  // in x out
};

/// act(D^-1/2 (A + I) D^-1/2 H W), evaluated edgewise.
Tensor gcn_forward(const Graph& g, const Tensor& h, const GcnParams& p,
                   Activation act = Activation::kIdentity);

struct SageParams {
  Tensor self_weight;      // in x out
  Tensor neighbor_weight;  // in x out
};

/// act(H W_self + agg_j(h_j) W_neighbor); isolated nodes aggregate to zero.
Tensor sage_forward(const Graph& g, const Tensor& h, const SageParams& p, Aggregator agg,
                    Activation act = Activation::kIdentity);

/// Logarithmic degree scaler (log(d + 1) / delta)^alpha. alpha = 0 is the
/// identity. For d = 0 and alpha < 0 the value is undefined; 1 is returned and
/// *flagged (when given) is set.
double scaler_value(double degree, double alpha, double delta, bool* flagged = nullptr);

/// Mean of log(d + 1) over every node of the given graphs.
double degree_normalization(std::span<const Graph> graphs);

struct ScalerConfig {
  double delta = 1.0;
  std::vector<double> alphas{0.0, 1.0, -1.0};
};

struct PnaConfig {
  std::vector<Aggregator> aggregators{Aggregator::kMean, Aggregator::kMax, Aggregator::kMin,
                                      Aggregator::kStd};
  ScalerConfig scalers;
};

struct PnaParams {
  /// Message net: relu([h_i, h_j, e_ij] W + b), (2 in + edge_dim) x out.
  LinearParams message;
  /// Update net: [h_i, scaled aggregates] W + b, (in + |scalers| |aggs| out) x out.
  LinearParams update;
};

/// Principal neighbourhood aggregation. The aggregate stack is ordered
/// scaler-major: for each scaler, every aggregator.
Tensor pna_forward(const Graph& g, const Tensor& h, const PnaParams& p, const PnaConfig& cfg,
                   Activation act = Activation::kIdentity);

struct GruParams {
  Tensor w_update, u_update, b_update;
  Tensor w_reset, u_reset, b_reset;
  Tensor w_candidate, u_candidate, b_candidate;
};

/// u = sig(x Wu + h Uu + bu), r = sig(x Wr + h Ur + br),
/// c = tanh(x Wc + (r * h) Uc + bc), out = (1 - u) * h + u * c.
Tensor gru_cell_forward(const Tensor& h_prev, const Tensor& x, const GruParams& p);

struct BatchNormParams {
  Tensor gamma;
  Tensor beta;
  std::vector<double> running_mean;
  std::vector<double> running_var;
  double momentum = 0.1;
  double eps = 1e-5;
};

/// Train mode normalizes with batch statistics and updates the running
/// statistics; eval mode uses the running statistics.
Tensor batch_norm_forward(const Tensor& x, BatchNormParams& p, Mode mode);

/// Per-sample mean of node rows; offsets delimit samples.
Tensor global_mean_pool(std::span<const std::size_t> offsets, const Tensor& h);
Tensor global_mean_pool(const GraphBatch& batch, const Tensor& h);

/// Per sample: node rows zero-padded to n_max, flattened row-major, then
/// followed by that sample's row of field (samples x k, k may be 0).
Tensor flatten_concat(std::span<const std::size_t> offsets, const Tensor& h,
                      std::size_t n_max, const Tensor& field);

}  // namespace hvsgnn
