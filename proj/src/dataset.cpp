// SPDX-License-Identifier: Apache-2.0
#include "hvsgnn/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <json.hpp>
#include <numbers>
#include <sstream>

#include "hvsgnn/error.hpp"
#include "hvsgnn/random.hpp"

namespace hvsgnn {
namespace {

using nlohmann::json;

std::vector<double> to_vector(const json& j, const char* key) {
  if (!j.is_array()) throw SchemaError(std::string("\"") + key + "\" must be an array");
  std::vector<double> out;
  out.reserve(j.size());
  for (const json& v : j) {
    if (!v.is_number()) {
      throw SchemaError(std::string("\"") + key + "\" must contain only numbers");
    }
    out.push_back(v.get<double>());
  }
  return out;
}

Matrix to_matrix(const json& j, const char* key) {
  if (!j.is_array()) throw SchemaError(std::string("\"") + key + "\" must be an array of arrays");
  std::vector<std::vector<double>> rows;
  rows.reserve(j.size());
  for (const json& r : j) rows.push_back(to_vector(r, key));
  try {
    return Matrix::from_rows(rows);
  } catch (const ShapeError& e) {
    throw SchemaError(std::string("\"") + key + "\": " + e.what());
  }
}

json from_matrix(const Matrix& m) {
  json out = json::array();
  for (std::size_t r = 0; r < m.rows; ++r) {
    auto row = m.row(r);
    out.push_back(json(std::vector<double>(row.begin(), row.end())));
  }
  return out;
}

const json& require(const json& record, const char* key) {
  auto it = record.find(key);
  if (it == record.end()) throw SchemaError(std::string("missing key \"") + key + "\"");
  return *it;
}

Graph graph_from_json(const json& record) {
  if (!record.is_object()) throw SchemaError("record is not an object");
  static constexpr const char* kKnown[] = {"num_nodes", "node_features", "edges",
                                           "undirected", "edge_features", "y_graph",
                                           "y_node", "field"};
  for (const auto& item : record.items()) {
    if (std::find_if(std::begin(kKnown), std::end(kKnown), [&](const char* k) {
          return item.key() == k;
        }) == std::end(kKnown)) {
      throw SchemaError("unknown key \"" + item.key() + "\"");
    }
  }
  const json& num_nodes = require(record, "num_nodes");
  if (!num_nodes.is_number_unsigned()) {
    throw SchemaError("\"num_nodes\" must be a non-negative integer");
  }
  GraphInput in;
  in.node_features = to_matrix(require(record, "node_features"), "node_features");
  const json& edges = require(record, "edges");
  if (!edges.is_array()) throw SchemaError("\"edges\" must be an array");
  for (const json& e : edges) {
    if (!e.is_array() || e.size() != 2 || !e[0].is_number_unsigned() ||
        !e[1].is_number_unsigned()) {
      throw SchemaError("each edge must be a pair of non-negative integers");
    }
    in.edges.push_back({e[0].get<std::size_t>(), e[1].get<std::size_t>()});
  }
  if (in.node_features.rows != num_nodes.get<std::size_t>()) {
    throw SchemaError("\"num_nodes\" is " + std::to_string(num_nodes.get<std::size_t>()) +
                      " but node_features has " + std::to_string(in.node_features.rows) +
                      " rows");
  }
  if (auto it = record.find("undirected"); it != record.end()) {
    if (!it->is_boolean()) throw SchemaError("\"undirected\" must be a boolean");
    in.undirected = it->get<bool>();
  }
  if (auto it = record.find("edge_features"); it != record.end()) {
    in.edge_features = to_matrix(*it, "edge_features");
    // An empty array means "no edges", not "no edge features".
    if (in.edge_features->rows == 0) in.edge_features = Matrix(0, 0);
  }
  if (auto it = record.find("y_graph"); it != record.end()) {
    in.graph_target = to_vector(*it, "y_graph");
  }
  if (auto it = record.find("y_node"); it != record.end()) {
    in.node_target = to_matrix(*it, "y_node");
  }
  if (auto it = record.find("field"); it != record.end()) {
    in.field = to_vector(*it, "field");
  }
  return build_graph(std::move(in));
}

}  // namespace

std::string graph_to_json_line(const Graph& g) {
  json record;
  record["num_nodes"] = g.num_nodes();
  record["node_features"] = from_matrix(g.node_features());
  json edges = json::array();
  for (const Edge& e : g.edges()) edges.push_back({e.u, e.v});
  record["edges"] = std::move(edges);
  if (g.edge_features()) record["edge_features"] = from_matrix(*g.edge_features());
  if (g.graph_target()) record["y_graph"] = *g.graph_target();
  if (g.node_target()) record["y_node"] = from_matrix(*g.node_target());
  if (!g.field().empty()) {
    record["field"] = std::vector<double>(g.field().begin(), g.field().end());
  }
  return record.dump();
}

std::vector<Graph> read_dataset(std::istream& in) {
  std::vector<Graph> graphs;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      graphs.push_back(graph_from_json(json::parse(line)));
    } catch (const json::exception& e) {
      throw SchemaError("line " + std::to_string(line_no) + ": malformed record: " + e.what());
    } catch (const SchemaError& e) {
      throw SchemaError("line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  return graphs;
}

void write_dataset(std::span<const Graph> graphs, std::ostream& out) {
  for (const Graph& g : graphs) out << graph_to_json_line(g) << '\n';
}

std::vector<Graph> load_dataset(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open dataset " + path.string());
  return read_dataset(in);
}

void save_dataset(std::span<const Graph> graphs, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw ConfigError("cannot write dataset " + path.string());
  write_dataset(graphs, out);
  if (!out) throw ConfigError("failed while writing " + path.string());
}

SyntheticTask parse_task(std::string_view id) {
  if (id == "graph-scalar") return SyntheticTask::kGraphScalar;
  if (id == "graph-scalar-cond") return SyntheticTask::kGraphScalarCond;
  if (id == "node-field") return SyntheticTask::kNodeField;
  throw ConfigError("unknown task id \"" + std::string(id) +
                    "\" (expected graph-scalar, graph-scalar-cond or node-field)");
}

std::string_view task_name(SyntheticTask task) {
  switch (task) {
    case SyntheticTask::kGraphScalar: return "graph-scalar";
    case SyntheticTask::kGraphScalarCond: return "graph-scalar-cond";
    case SyntheticTask::kNodeField: return "node-field";
  }
  return "unknown";
}

double graph_scalar_target(std::span<const double> m, double mean_degree) {
  return std::sin(std::numbers::pi * m[0]) + m[1] * m[2] - 0.5 * m[3] * m[3] +
         0.1 * mean_degree;
}

double graph_scalar_cond_target(std::span<const double> m, double mean_degree,
                                double field) {
  return graph_scalar_target(m, mean_degree) * (1.0 + 0.5 * field) + 0.25 * field * field;
}

double node_field_target(std::span<const double> own, std::span<const double> nb) {
  return std::sin(std::numbers::pi * own[0]) + nb[1] - 0.5 * own[2] * nb[2];
}

Matrix node_field_targets(const Graph& g) {
  const std::size_t f = g.feature_dim();
  Matrix out(g.num_nodes(), 1);
  std::vector<double> nb(f);
  for (std::size_t i = 0; i < g.num_nodes(); ++i) {
    std::fill(nb.begin(), nb.end(), 0.0);
    const auto neighbors = g.neighbors(i);
    for (std::size_t j : neighbors) {
      for (std::size_t k = 0; k < f; ++k) nb[k] += g.node_features()(j, k);
    }
    if (!neighbors.empty()) {
      for (double& v : nb) v /= static_cast<double>(neighbors.size());
    }
    out(i, 0) = node_field_target(g.node_features().row(i), nb);
  }
  return out;
}

std::vector<Graph> gen_synthetic(SyntheticTask task, std::size_t n_graphs,
                                 NodeRange node_range, std::uint64_t seed) {
  if (n_graphs < 1) throw ConfigError("n_graphs must be at least 1");
  if (node_range.min < 1) throw ConfigError("node_range minimum must be at least 1");
  if (node_range.max < node_range.min) {
    throw ConfigError("node_range maximum is below its minimum");
  }
  constexpr std::size_t f = kSyntheticFeatureDim;
  Rng rng(seed);
  std::vector<Graph> graphs;
  graphs.reserve(n_graphs);
  for (std::size_t s = 0; s < n_graphs; ++s) {
    const std::size_t n = rng.uniform_int(node_range.min, node_range.max);
    // Expected degree in the bulk is roughly target_degree.
    const double target_degree = rng.uniform(2.0, 7.0);
    const double radius = std::sqrt(target_degree / (std::numbers::pi * static_cast<double>(n)));
    std::vector<double> px(n), py(n);
    for (std::size_t i = 0; i < n; ++i) {
      px[i] = rng.uniform();
      py[i] = rng.uniform();
    }
    double texture[4];
    for (double& c : texture) c = rng.uniform(0.1, 0.9);

    GraphInput in;
    in.undirected = true;
    std::vector<std::size_t> degree(n, 0);
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = i + 1; j < n; ++j) {
        const double dx = px[i] - px[j];
        const double dy = py[i] - py[j];
        if (dx * dx + dy * dy < radius * radius) {
          in.edges.push_back({i, j});
          ++degree[i];
          ++degree[j];
        }
      }
    }
    in.node_features = Matrix(n, f);
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t k = 0; k < 4; ++k) {
        in.node_features(i, k) = std::clamp(texture[k] + 0.1 * rng.normal(), 0.0, 1.0);
      }
      in.node_features(i, 4) = static_cast<double>(degree[i]) / 10.0;
    }

    std::vector<double> mean(f, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t k = 0; k < f; ++k) mean[k] += in.node_features(i, k);
    }
    for (double& m : mean) m /= static_cast<double>(n);
    const double mean_degree = 10.0 * mean[4];

    switch (task) {
      case SyntheticTask::kGraphScalar:
        in.graph_target = std::vector<double>{graph_scalar_target(mean, mean_degree)};
        break;
      case SyntheticTask::kGraphScalarCond: {
        const double field = rng.uniform(-1.0, 1.0);
        in.field = {field};
        in.graph_target =
            std::vector<double>{graph_scalar_cond_target(mean, mean_degree, field)};
        break;
      }
      case SyntheticTask::kNodeField: {
        in.node_target = Matrix(n, 1);
        std::vector<std::vector<double>> nb_mean(n, std::vector<double>(f, 0.0));
        for (const Edge& e : in.edges) {
          for (std::size_t k = 0; k < f; ++k) {
            nb_mean[e.u][k] += in.node_features(e.v, k);
            nb_mean[e.v][k] += in.node_features(e.u, k);
          }
        }
        for (std::size_t i = 0; i < n; ++i) {
          if (degree[i] > 0) {
            for (double& v : nb_mean[i]) v /= static_cast<double>(degree[i]);
          }
          (*in.node_target)(i, 0) = node_field_target(in.node_features.row(i), nb_mean[i]);
        }
        break;
      }
    }
    graphs.push_back(build_graph(std::move(in)));
  }
  return graphs;
}

}  // namespace hvsgnn
