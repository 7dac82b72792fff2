// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <vector>

namespace hvsgnn {

/// Dense row-major matrix of doubles. Plain data, no autodiff.
struct Matrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> data;

  Matrix() = default;
  Matrix(std::size_t r, std::size_t c, double fill = 0.0);
  Matrix(std::size_t r, std::size_t c, std::vector<double> values);

  static Matrix from_rows(const std::vector<std::vector<double>>& rows);

  double& operator()(std::size_t r, std::size_t c) { return data[r * cols + c]; }
  double operator()(std::size_t r, std::size_t c) const { return data[r * cols + c]; }
  std::span<const double> row(std::size_t r) const {
    return {data.data() + r * cols, cols};
  }
  std::span<double> row(std::size_t r) { return {data.data() + r * cols, cols}; }

  bool operator==(const Matrix&) const = default;
};

/// Edge (u, v) sets A(u, v) = 1, making v a neighbor of u.
struct Edge {
  std::size_t u = 0;
  std::size_t v = 0;
  bool operator==(const Edge&) const = default;
};

/// Unvalidated graph description handed to build_graph().
struct GraphInput {
  Matrix node_features;
  std::vector<Edge> edges;
  std::optional<Matrix> edge_features;
  /// Each listed edge is added in both directions.
  bool undirected = false;
  std::optional<Matrix> node_target;
  std::optional<std::vector<double>> graph_target;
  /// Per-sample external conditioning vector (may be empty).
  std::vector<double> field;
};

/// Validated, immutable graph with a neighbor-sorted CSR view.
class Graph {
 public:
  std::size_t num_nodes() const { return node_features_.rows; }
  std::size_t num_edges() const { return edges_.size(); }
  std::size_t feature_dim() const { return node_features_.cols; }
  std::size_t edge_feature_dim() const {
    return edge_features_ ? edge_features_->cols : 0;
  }

  const Matrix& node_features() const { return node_features_; }
  std::span<const Edge> edges() const { return edges_; }
  const std::optional<Matrix>& edge_features() const { return edge_features_; }
  const std::optional<Matrix>& node_target() const { return node_target_; }
  const std::optional<std::vector<double>>& graph_target() const {
    return graph_target_;
  }
  std::span<const double> field() const { return field_; }

  /// Neighbors of node i in ascending index order.
  std::span<const std::size_t> neighbors(std::size_t i) const {
    return {csr_neighbors_.data() + csr_offsets_[i],
            csr_offsets_[i + 1] - csr_offsets_[i]};
  }
  /// Edge ids parallel to neighbors(i), indexing edges() / edge_features().
  std::span<const std::size_t> neighbor_edge_ids(std::size_t i) const {
    return {csr_edge_ids_.data() + csr_offsets_[i],
            csr_offsets_[i + 1] - csr_offsets_[i]};
  }
  std::size_t degree(std::size_t i) const {
    return csr_offsets_[i + 1] - csr_offsets_[i];
  }

  /// Flat CSR arrays; offsets has num_nodes() + 1 entries.
  const std::vector<std::size_t>& csr_offsets() const { return csr_offsets_; }
  const std::vector<std::size_t>& csr_neighbors() const { return csr_neighbors_; }
  const std::vector<std::size_t>& csr_edge_ids() const { return csr_edge_ids_; }

  bool operator==(const Graph& other) const;

 private:
  friend Graph build_graph(GraphInput input);

  Matrix node_features_;
  std::vector<Edge> edges_;
  std::optional<Matrix> edge_features_;
  std::optional<Matrix> node_target_;
  std::optional<std::vector<double>> graph_target_;
  std::vector<double> field_;

  std::vector<std::size_t> csr_offsets_;
  std::vector<std::size_t> csr_neighbors_;
  std::vector<std::size_t> csr_edge_ids_;
};

/// Validates and (for undirected input) symmetrizes. Throws SchemaError on
/// out-of-range endpoints, duplicate edges or inconsistent row counts.
Graph build_graph(GraphInput input);

/// Dense adjacency; with self_loops returns A + I.
Matrix adjacency_matrix(const Graph& g, bool self_loops);

/// Row sums of the (optionally self-looped) adjacency matrix.
std::vector<double> degree_vector(const Graph& g, bool self_loops);

/// Disjoint union of several graphs.
struct GraphBatch {
  Graph graph;
  /// Node range of sample s is [offsets[s], offsets[s + 1]).
  std::vector<std::size_t> offsets;
  /// samples x t, present when every member carries a graph target.
  std::optional<Matrix> graph_targets;
  /// samples x k external field inputs (k may be 0).
  Matrix fields;

  std::size_t sample_count() const { return offsets.size() - 1; }
  std::size_t nodes_in(std::size_t s) const { return offsets[s + 1] - offsets[s]; }
};

GraphBatch batch_graphs(std::span<const Graph> graphs);

}  // namespace hvsgnn
