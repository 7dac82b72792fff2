// SPDX-License-Identifier: Apache-2.0
#include "hvsgnn/layers.hpp"

#include <cmath>
#include <string>

#include "hvsgnn/error.hpp"

namespace hvsgnn {
namespace {

std::vector<std::int64_t> neighbor_index(const Graph& g) {
  const auto& cols = g.csr_neighbors();
  return {cols.begin(), cols.end()};
}

/// Row index of the receiving node for every CSR slot.
std::vector<std::int64_t> receiver_index(const Graph& g) {
  std::vector<std::int64_t> out;
  out.reserve(g.csr_neighbors().size());
  for (std::size_t i = 0; i < g.num_nodes(); ++i) {
    out.insert(out.end(), g.degree(i), static_cast<std::int64_t>(i));
  }
  return out;
}

Tensor aggregate(const Tensor& messages, std::span<const std::size_t> offsets, Aggregator agg) {
  switch (agg) {
    case Aggregator::kMean: return segment_reduce(messages, offsets, SegmentReduce::kMean);
    case Aggregator::kSum: return segment_reduce(messages, offsets, SegmentReduce::kSum);
    case Aggregator::kMax: return segment_reduce(messages, offsets, SegmentReduce::kMax);
    case Aggregator::kMin: return segment_reduce(messages, offsets, SegmentReduce::kMin);
    case Aggregator::kStd: return segment_std(messages, offsets, 1e-5);
  }
  throw ConfigError("unknown aggregator");
}

void require_rows(std::string_view layer, const Tensor& h, std::size_t n) {
  if (h.rank() != 2 || h.rows() != n) {
    throw ShapeError(std::string(layer) + ": feature matrix must have one row per node (" +
                     std::to_string(n) + ")");
  }
}

}  // namespace

Aggregator parse_aggregator(std::string_view id) {
  if (id == "mean") return Aggregator::kMean;
  if (id == "sum") return Aggregator::kSum;
  if (id == "max") return Aggregator::kMax;
  if (id == "min") return Aggregator::kMin;
  if (id == "std") return Aggregator::kStd;
  throw ConfigError("unknown aggregator \"" + std::string(id) + "\"");
}

std::string_view aggregator_name(Aggregator a) {
  switch (a) {
    case Aggregator::kMean: return "mean";
    case Aggregator::kSum: return "sum";
    case Aggregator::kMax: return "max";
    case Aggregator::kMin: return "min";
    case Aggregator::kStd: return "std";
  }
  return "unknown";
}

Tensor linear_forward(const Tensor& x, const LinearParams& p) {
  return add_row_vector(matmul(x, p.weight), p.bias);
}

Tensor gcn_forward(const Graph& g, const Tensor& h, const GcnParams& p, Activation act) {
  const std::size_t n = g.num_nodes();
  require_rows("gcn", h, n);
  // Self loop merged into each sorted neighbor list.
  std::vector<double> deg(n);
  for (std::size_t i = 0; i < n; ++i) deg[i] = static_cast<double>(g.degree(i)) + 1.0;
  std::vector<std::size_t> offsets{0};
  std::vector<std::int64_t> source;
  std::vector<double> weight;
  source.reserve(g.num_edges() + n);
  weight.reserve(g.num_edges() + n);
  for (std::size_t i = 0; i < n; ++i) {
    bool self_done = false;
    const auto emit = [&](std::size_t j) {
      source.push_back(static_cast<std::int64_t>(j));
      weight.push_back(1.0 / std::sqrt(deg[i] * deg[j]));
    };
    for (std::size_t j : g.neighbors(i)) {
      if (!self_done && j >= i) {
        emit(i);
        self_done = true;
      }
      emit(j);
    }
    if (!self_done) emit(i);
    offsets.push_back(source.size());
  }
  const Tensor propagated =
      segment_reduce(scale_rows(gather_rows(h, source), weight), offsets, SegmentReduce::kSum);
  return artificial_activate(matmul(propagated, p.weight), act);
}

Tensor sage_forward(const Graph& g, const Tensor& h, const SageParams& p, Aggregator agg,
                    Activation act) {
  require_rows("sage", h, g.num_nodes());
  const Tensor neighbors = gather_rows(h, neighbor_index(g));
  const Tensor pooled = aggregate(neighbors, g.csr_offsets(), agg);
  return artificial_activate(
      add(matmul(h, p.self_weight), matmul(pooled, p.neighbor_weight)), act);
}

double scaler_value(double degree, double alpha, double delta, bool* flagged) {
  if (flagged) *flagged = false;
  if (!(delta > 0.0)) throw ConfigError("scaler normalization delta must be positive");
  if (alpha == 0.0) return 1.0;
  const double base = std::log(degree + 1.0) / delta;
  if (base == 0.0 && alpha < 0.0) {
    if (flagged) *flagged = true;
    return 1.0;
  }
  if (alpha == 1.0) return base;
  if (alpha == -1.0) return 1.0 / base;
  return std::pow(base, alpha);
}

double degree_normalization(std::span<const Graph> graphs) {
  double total = 0.0;
  std::size_t count = 0;
  for (const Graph& g : graphs) {
    for (std::size_t i = 0; i < g.num_nodes(); ++i) {
      total += std::log(static_cast<double>(g.degree(i)) + 1.0);
      ++count;
    }
  }
  if (count == 0) throw ConfigError("degree normalization needs at least one node");
  return total / static_cast<double>(count);
}

Tensor pna_forward(const Graph& g, const Tensor& h, const PnaParams& p, const PnaConfig& cfg,
                   Activation act) {
  const std::size_t n = g.num_nodes();
  require_rows("pna", h, n);
  if (cfg.aggregators.empty()) throw ConfigError("pna needs at least one aggregator");
  if (cfg.scalers.alphas.empty()) throw ConfigError("pna needs at least one scaler");
  const std::size_t f_in = h.cols();
  const std::size_t f_edge = g.edge_feature_dim();
  const Tensor& wm = p.message.weight;
  if (wm.rank() != 2 || wm.rows() != 2 * f_in + f_edge) {
    throw ShapeError("pna: message weight needs " + std::to_string(2 * f_in + f_edge) +
                     " rows");
  }

  // [h_i, h_j, e_ij] W splits into per-node projections gathered per slot.
  const Tensor self_proj = matmul(h, slice(wm, 0, 0, f_in));
  const Tensor nb_proj = matmul(h, slice(wm, 0, f_in, 2 * f_in));
  Tensor messages = add(gather_rows(self_proj, receiver_index(g)),
                        gather_rows(nb_proj, neighbor_index(g)));
  if (f_edge > 0) {
    const auto& ids = g.csr_edge_ids();
    const std::vector<std::int64_t> edge_rows(ids.begin(), ids.end());
    const Tensor edge_features = Tensor::from_matrix(*g.edge_features());
    messages = add(messages, matmul(gather_rows(edge_features, edge_rows),
                                    slice(wm, 0, 2 * f_in, 2 * f_in + f_edge)));
  }
  messages = relu(add_row_vector(messages, p.message.bias));

  std::vector<Tensor> aggregates;
  for (Aggregator a : cfg.aggregators) aggregates.push_back(aggregate(messages, g.csr_offsets(), a));

  std::vector<Tensor> parts{h};
  for (double alpha : cfg.scalers.alphas) {
    if (alpha < -1.0 || alpha > 1.0) throw ConfigError("scaler alpha must lie in [-1, 1]");
    std::vector<double> scale(n);
    for (std::size_t i = 0; i < n; ++i) {
      scale[i] = scaler_value(static_cast<double>(g.degree(i)), alpha, cfg.scalers.delta);
    }
    for (const Tensor& a : aggregates) {
      parts.push_back(alpha == 0.0 ? a : scale_rows(a, scale));
    }
  }
  return artificial_activate(linear_forward(concat(parts, 1), p.update), act);
}

Tensor gru_cell_forward(const Tensor& h_prev, const Tensor& x, const GruParams& p) {
  if (h_prev.rank() != 2 || x.rank() != 2 || h_prev.rows() != x.rows()) {
    throw ShapeError("gru: state and input must be matrices with the same row count");
  }
  const auto gate = [&](const Tensor& w, const Tensor& u, const Tensor& b, const Tensor& hh) {
    return add_row_vector(add(matmul(x, w), matmul(hh, u)), b);
  };
  const Tensor update = sigmoid(gate(p.w_update, p.u_update, p.b_update, h_prev));
  const Tensor reset = sigmoid(gate(p.w_reset, p.u_reset, p.b_reset, h_prev));
  const Tensor candidate =
      tanh(gate(p.w_candidate, p.u_candidate, p.b_candidate, mul(reset, h_prev)));
  const Tensor keep = add_scalar(scalar_mul(update, -1.0), 1.0);
  return add(mul(keep, h_prev), mul(update, candidate));
}

Tensor batch_norm_forward(const Tensor& x, BatchNormParams& p, Mode mode) {
  if (x.rank() != 2) throw ShapeError("batchnorm: expected a matrix");
  const std::size_t n = x.rows(), f = x.cols();
  if (p.running_mean.size() != f || p.running_var.size() != f) {
    throw ShapeError("batchnorm: running statistics do not match " + std::to_string(f) +
                     " features");
  }
  if (mode == Mode::kTrain) {
    if (n < 2) throw ShapeError("batchnorm: training mode needs at least 2 rows");
    BatchStats stats;
    Tensor out = batch_norm(x, p.gamma, p.beta, p.eps, &stats);
    const double unbias = static_cast<double>(n) / static_cast<double>(n - 1);
    for (std::size_t c = 0; c < f; ++c) {
      p.running_mean[c] = (1.0 - p.momentum) * p.running_mean[c] + p.momentum * stats.mean[c];
      p.running_var[c] =
          (1.0 - p.momentum) * p.running_var[c] + p.momentum * stats.var[c] * unbias;
    }
    return out;
  }
  std::vector<double> shift(f), inv_std(f);
  for (std::size_t c = 0; c < f; ++c) {
    shift[c] = -p.running_mean[c];
    inv_std[c] = 1.0 / std::sqrt(p.running_var[c] + p.eps);
  }
  const Tensor normalized = mul_row_vector(add_row_vector(x, Tensor({f}, std::move(shift))),
                                           Tensor({f}, std::move(inv_std)));
  return add_row_vector(mul_row_vector(normalized, p.gamma), p.beta);
}

Tensor global_mean_pool(std::span<const std::size_t> offsets, const Tensor& h) {
  return segment_reduce(h, offsets, SegmentReduce::kMean);
}

Tensor global_mean_pool(const GraphBatch& batch, const Tensor& h) {
  require_rows("global-mean-pool", h, batch.graph.num_nodes());
  return global_mean_pool(batch.offsets, h);
}

Tensor flatten_concat(std::span<const std::size_t> offsets, const Tensor& h, std::size_t n_max,
                      const Tensor& field) {
  if (offsets.size() < 2) throw ShapeError("flatten-concat: need at least one sample");
  const std::size_t samples = offsets.size() - 1;
  require_rows("flatten-concat", h, offsets.back());
  std::vector<std::int64_t> index(samples * n_max, -1);
  for (std::size_t s = 0; s < samples; ++s) {
    const std::size_t count = offsets[s + 1] - offsets[s];
    if (count > n_max) {
      throw ShapeError("flatten-concat: sample " + std::to_string(s) + " has " +
                       std::to_string(count) + " nodes, more than n_max = " +
                       std::to_string(n_max));
    }
    for (std::size_t i = 0; i < count; ++i) {
      index[s * n_max + i] = static_cast<std::int64_t>(offsets[s] + i);
    }
  }
  Tensor flat = reshape(gather_rows(h, index), {samples, n_max * h.cols()});
  if (field.size() == 0) return flat;
  if (field.rank() != 2 || field.rows() != samples) {
    throw ShapeError("flatten-concat: field must have one row per sample");
  }
  const Tensor parts[] = {flat, field};
  return concat(parts, 1);
}

}  // namespace hvsgnn
