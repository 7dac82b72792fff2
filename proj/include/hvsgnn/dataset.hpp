// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "hvsgnn/graph.hpp"

namespace hvsgnn {

// Line-delimited dataset files: one JSON object per graph with keys
// num_nodes, node_features, edges and the optional undirected, edge_features,
// y_graph, y_node, field. Node indices are 0-based.

std::vector<Graph> read_dataset(std::istream& in);
void write_dataset(std::span<const Graph> graphs, std::ostream& out);

/// Errors are SchemaError with a "line N:" prefix.
std::vector<Graph> load_dataset(const std::filesystem::path& path);
void save_dataset(std::span<const Graph> graphs, const std::filesystem::path& path);

/// Serializes one graph in canonical form (symmetrized edges, sorted keys).
std::string graph_to_json_line(const Graph& g);

enum class SyntheticTask {
  kGraphScalar,      // graph-level scalar from mean features and mean degree
  kGraphScalarCond,  // the same, modulated by a per-sample scalar field
  kNodeField,        // per-node scalar from own and mean-neighbor features
};

SyntheticTask parse_task(std::string_view id);
std::string_view task_name(SyntheticTask task);

struct NodeRange {
  std::size_t min = 10;
  std::size_t max = 40;
};

inline constexpr std::size_t kSyntheticFeatureDim = 5;

/// Random geometric graphs with per-graph "texture" features. Deterministic
/// for a given seed. Feature 4 is the node degree divided by 10.
std::vector<Graph> gen_synthetic(SyntheticTask task, std::size_t n_graphs,
                                 NodeRange node_range, std::uint64_t seed);

// Closed-form targets used by the generator.
double graph_scalar_target(std::span<const double> mean_features, double mean_degree);
double graph_scalar_cond_target(std::span<const double> mean_features,
                                double mean_degree, double field);
/// neighbor_mean is the zero vector for isolated nodes.
double node_field_target(std::span<const double> own,
                         std::span<const double> neighbor_mean);
/// node_field_target for every node of g, as an n x 1 matrix.
Matrix node_field_targets(const Graph& g);

}  // namespace hvsgnn
