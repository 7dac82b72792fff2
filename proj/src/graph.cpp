// SPDX-License-Identifier: Apache-2.0
#include "hvsgnn/graph.hpp"

#include <algorithm>
#include <numeric>
#include <string>

#include "hvsgnn/error.hpp"

namespace hvsgnn {

Matrix::Matrix(std::size_t r, std::size_t c, double fill)
    : rows(r), cols(c), data(r * c, fill) {}

Matrix::Matrix(std::size_t r, std::size_t c, std::vector<double> values)
    : rows(r), cols(c), data(std::move(values)) {
  if (data.size() != r * c) {
    throw ShapeError("matrix " + std::to_string(r) + "x" + std::to_string(c) +
                     " given " + std::to_string(data.size()) + " values");
  }
}

Matrix Matrix::from_rows(const std::vector<std::vector<double>>& rows) {
  if (rows.empty()) return {};
  Matrix m(rows.size(), rows.front().size());
  for (std::size_t r = 0; r < rows.size(); ++r) {
    if (rows[r].size() != m.cols) {
      throw ShapeError("ragged rows: row " + std::to_string(r) + " has " +
                       std::to_string(rows[r].size()) + " entries, expected " +
                       std::to_string(m.cols));
    }
    std::copy(rows[r].begin(), rows[r].end(), m.row(r).begin());
  }
  return m;
}

bool Graph::operator==(const Graph& other) const {
  return node_features_ == other.node_features_ && edges_ == other.edges_ &&
         edge_features_ == other.edge_features_ &&
         node_target_ == other.node_target_ &&
         graph_target_ == other.graph_target_ && field_ == other.field_;
}

Graph build_graph(GraphInput input) {
  const std::size_t n = input.node_features.rows;
  if (n == 0) throw SchemaError("graph must have at least one node");
  if (input.node_features.data.size() != n * input.node_features.cols) {
    throw SchemaError("node_features value count does not match its shape");
  }
  if (input.edge_features && input.edge_features->rows != input.edges.size()) {
    throw SchemaError("edge_features has " +
                      std::to_string(input.edge_features->rows) +
                      " rows but there are " + std::to_string(input.edges.size()) +
                      " edges");
  }
  if (input.node_target && input.node_target->rows != n) {
    throw SchemaError("node target has " + std::to_string(input.node_target->rows) +
                      " rows but the graph has " + std::to_string(n) + " nodes");
  }
  for (const Edge& e : input.edges) {
    if (e.u >= n || e.v >= n) {
      throw SchemaError("edge (" + std::to_string(e.u) + ", " + std::to_string(e.v) +
                        ") out of range for " + std::to_string(n) + " nodes");
    }
  }

  Graph g;
  if (input.undirected) {
    const std::size_t f2 = input.edge_features ? input.edge_features->cols : 0;
    std::vector<double> ef;
    for (std::size_t k = 0; k < input.edges.size(); ++k) {
      const Edge e = input.edges[k];
      const std::size_t copies = e.u == e.v ? 1 : 2;
      g.edges_.push_back(e);
      if (copies == 2) g.edges_.push_back({e.v, e.u});
      if (input.edge_features) {
        auto row = input.edge_features->row(k);
        for (std::size_t c = 0; c < copies; ++c) ef.insert(ef.end(), row.begin(), row.end());
      }
    }
    if (input.edge_features) g.edge_features_ = Matrix(g.edges_.size(), f2, std::move(ef));
  } else {
    g.edges_ = std::move(input.edges);
    g.edge_features_ = std::move(input.edge_features);
  }

  // CSR grouped by u, neighbors ascending.
  std::vector<std::size_t> order(g.edges_.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    const Edge& ea = g.edges_[a];
    const Edge& eb = g.edges_[b];
    return ea.u != eb.u ? ea.u < eb.u : ea.v < eb.v;
  });
  g.csr_offsets_.assign(n + 1, 0);
  g.csr_neighbors_.reserve(order.size());
  g.csr_edge_ids_.reserve(order.size());
  for (std::size_t k = 0; k < order.size(); ++k) {
    const Edge& e = g.edges_[order[k]];
    if (k > 0 && g.edges_[order[k - 1]] == e) {
      throw SchemaError("duplicate edge (" + std::to_string(e.u) + ", " +
                        std::to_string(e.v) + ")");
    }
    ++g.csr_offsets_[e.u + 1];
    g.csr_neighbors_.push_back(e.v);
    g.csr_edge_ids_.push_back(order[k]);
  }
  std::partial_sum(g.csr_offsets_.begin(), g.csr_offsets_.end(), g.csr_offsets_.begin());

  g.node_features_ = std::move(input.node_features);
  g.node_target_ = std::move(input.node_target);
  g.graph_target_ = std::move(input.graph_target);
  g.field_ = std::move(input.field);
  return g;
}

Matrix adjacency_matrix(const Graph& g, bool self_loops) {
  const std::size_t n = g.num_nodes();
  Matrix a(n, n);
  for (const Edge& e : g.edges()) a(e.u, e.v) = 1.0;
  if (self_loops) {
    for (std::size_t i = 0; i < n; ++i) a(i, i) += 1.0;
  }
  return a;
}

std::vector<double> degree_vector(const Graph& g, bool self_loops) {
  const Matrix a = adjacency_matrix(g, self_loops);
  std::vector<double> d(a.rows, 0.0);
  for (std::size_t i = 0; i < a.rows; ++i) {
    for (double v : a.row(i)) d[i] += v;
  }
  return d;
}

GraphBatch batch_graphs(std::span<const Graph> graphs) {
  if (graphs.empty()) throw SchemaError("cannot batch an empty graph sequence");
  const Graph& first = graphs.front();
  const std::size_t f1 = first.feature_dim();
  const std::size_t f2 = first.edge_feature_dim();
  const bool has_edge_features = first.edge_features().has_value();
  const bool has_node_target = first.node_target().has_value();
  const bool has_graph_target = first.graph_target().has_value();
  const std::size_t t_node = has_node_target ? first.node_target()->cols : 0;
  const std::size_t t_graph = has_graph_target ? first.graph_target()->size() : 0;
  const std::size_t k_field = first.field().size();

  std::size_t total_nodes = 0;
  std::size_t total_edges = 0;
  for (std::size_t s = 0; s < graphs.size(); ++s) {
    const Graph& g = graphs[s];
    const auto mismatch = [&](const char* what) {
      return SchemaError(std::string("batch member ") + std::to_string(s) + ": " + what +
                         " differs from the first graph");
    };
    if (g.feature_dim() != f1) throw mismatch("node feature arity");
    if (g.edge_features().has_value() != has_edge_features || g.edge_feature_dim() != f2)
      throw mismatch("edge feature arity");
    if (g.node_target().has_value() != has_node_target ||
        (has_node_target && g.node_target()->cols != t_node))
      throw mismatch("node target arity");
    if (g.graph_target().has_value() != has_graph_target ||
        (has_graph_target && g.graph_target()->size() != t_graph))
      throw mismatch("graph target arity");
    if (g.field().size() != k_field) throw mismatch("field arity");
    total_nodes += g.num_nodes();
    total_edges += g.num_edges();
  }

  GraphInput merged;
  merged.node_features = Matrix(total_nodes, f1);
  merged.edges.reserve(total_edges);
  if (has_edge_features) merged.edge_features = Matrix(total_edges, f2);
  if (has_node_target) merged.node_target = Matrix(total_nodes, t_node);

  GraphBatch batch;
  batch.offsets.reserve(graphs.size() + 1);
  batch.offsets.push_back(0);
  if (has_graph_target) batch.graph_targets = Matrix(graphs.size(), t_graph);
  batch.fields = Matrix(graphs.size(), k_field);

  std::size_t node_base = 0;
  std::size_t edge_base = 0;
  for (std::size_t s = 0; s < graphs.size(); ++s) {
    const Graph& g = graphs[s];
    std::copy(g.node_features().data.begin(), g.node_features().data.end(),
              merged.node_features.data.begin() + node_base * f1);
    for (const Edge& e : g.edges()) merged.edges.push_back({e.u + node_base, e.v + node_base});
    if (has_edge_features) {
      std::copy(g.edge_features()->data.begin(), g.edge_features()->data.end(),
                merged.edge_features->data.begin() + edge_base * f2);
    }
    if (has_node_target) {
      std::copy(g.node_target()->data.begin(), g.node_target()->data.end(),
                merged.node_target->data.begin() + node_base * t_node);
    }
    if (has_graph_target) {
      std::copy(g.graph_target()->begin(), g.graph_target()->end(),
                batch.graph_targets->row(s).begin());
    }
    std::copy(g.field().begin(), g.field().end(), batch.fields.row(s).begin());
    node_base += g.num_nodes();
    edge_base += g.num_edges();
    batch.offsets.push_back(node_base);
  }
  batch.graph = build_graph(std::move(merged));
  return batch;
}

}  // namespace hvsgnn
