// SPDX-License-Identifier: Apache-2.0
#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include "hvsgnn/dataset.hpp"
#include "hvsgnn/error.hpp"
#include "hvsgnn/experiment.hpp"
#include "hvsgnn/network.hpp"
#include "hvsgnn/neurons.hpp"
#include "hvsgnn/runtime.hpp"
#include "hvsgnn/training.hpp"

namespace py = pybind11;
using namespace hvsgnn;

namespace {

using Array = py::array_t<double, py::array::c_style | py::array::forcecast>;

Matrix to_matrix(const Array& a) {
  if (a.ndim() == 1) return Matrix(a.shape(0), 1, std::vector<double>(a.data(), a.data() + a.size()));
  if (a.ndim() != 2) throw ShapeError("expected a 1-d or 2-d array");
  return Matrix(a.shape(0), a.shape(1), std::vector<double>(a.data(), a.data() + a.size()));
}

Array to_array(const Matrix& m) {
  Array out({m.rows, m.cols});
  std::copy(m.data.begin(), m.data.end(), out.mutable_data());
  return out;
}

Array to_array(const Tensor& t) { return to_array(t.to_matrix()); }

Graph make_graph(const Array& features, const std::vector<std::pair<std::size_t, std::size_t>>& edges,
                 bool undirected, std::optional<Array> edge_features,
                 std::optional<Array> node_target, std::optional<std::vector<double>> graph_target,
                 std::vector<double> field) {
  GraphInput in;
  in.node_features = to_matrix(features);
  for (const auto& [u, v] : edges) in.edges.push_back({u, v});
  in.undirected = undirected;
  if (edge_features) in.edge_features = to_matrix(*edge_features);
  if (node_target) in.node_target = to_matrix(*node_target);
  in.graph_target = std::move(graph_target);
  in.field = std::move(field);
  return build_graph(std::move(in));
}

// Runs one neuron layer over a (steps x width) stream.
py::dict run_neuron(const std::string& kind, const Array& stream, double beta, double threshold,
                    const std::string& activation, double slope) {
  if (stream.ndim() != 2) throw ShapeError("stream must be steps x width");
  NeuronConfig cfg;
  cfg.beta = beta;
  cfg.threshold = threshold;
  cfg.inner_activation = parse_activation(activation);
  cfg.surrogate_slope = slope;
  const NeuronKind nk = kind == "lif" ? NeuronKind::kLif : NeuronKind::kVsn;
  if (kind != "lif" && kind != "vsn") throw ConfigError("neuron kind must be lif or vsn");
  const std::size_t steps = stream.shape(0), width = stream.shape(1);
  std::vector<Tensor> zs;
  for (std::size_t t = 0; t < steps; ++t) {
    zs.emplace_back(Shape{width}, std::vector<double>(stream.data() + t * width,
                                                      stream.data() + (t + 1) * width));
  }
  const SpikeStream s = run_over_sts(nk, zs, cfg);
  Array out({steps, width});
  for (std::size_t t = 0; t < steps; ++t)
    std::copy(s.outputs[t].values().begin(), s.outputs[t].values().end(),
              out.mutable_data() + t * width);
  py::dict d;
  d["outputs"] = out;
  d["spike_count"] = s.telemetry.spike_count;
  d["opportunity_count"] = s.telemetry.opportunity_count;
  d["rate"] = s.telemetry.rate();
  return d;
}

}  // namespace

PYBIND11_MODULE(_hvsgnn, m) {
  m.doc() = "Hybrid spiking graph neural network engine";
  configure_allocator();

  auto base = py::register_exception<Error>(m, "Error", PyExc_RuntimeError);
  py::register_exception<ShapeError>(m, "ShapeError", base.ptr());
  py::register_exception<SchemaError>(m, "SchemaError", base.ptr());
  py::register_exception<ConfigError>(m, "ConfigError", base.ptr());
  py::register_exception<DivergenceError>(m, "DivergenceError", base.ptr());

  py::class_<Graph>(m, "Graph")
      .def(py::init(&make_graph), py::arg("features"), py::arg("edges"),
           py::arg("undirected") = true, py::arg("edge_features") = std::nullopt,
           py::arg("node_target") = std::nullopt, py::arg("graph_target") = std::nullopt,
           py::arg("field") = std::vector<double>{})
      .def_property_readonly("num_nodes", &Graph::num_nodes)
      .def_property_readonly("num_edges", &Graph::num_edges)
      .def_property_readonly("features", [](const Graph& g) { return to_array(g.node_features()); })
      .def_property_readonly("field", [](const Graph& g) {
        return std::vector<double>(g.field().begin(), g.field().end());
      })
      .def_property_readonly("graph_target", [](const Graph& g) { return g.graph_target(); })
      .def_property_readonly("node_target", [](const Graph& g) -> std::optional<Array> {
        if (!g.node_target()) return std::nullopt;
        return to_array(*g.node_target());
      })
      .def("neighbors", [](const Graph& g, std::size_t i) {
        const auto n = g.neighbors(i);
        return std::vector<std::size_t>(n.begin(), n.end());
      })
      .def("adjacency", [](const Graph& g, bool self_loops) {
        return to_array(adjacency_matrix(g, self_loops));
      }, py::arg("self_loops") = false);

  m.def("gen_synthetic", [](const std::string& task, std::size_t n, std::size_t min_nodes,
                            std::size_t max_nodes, std::uint64_t seed) {
    return gen_synthetic(parse_task(task), n, {min_nodes, max_nodes}, seed);
  }, py::arg("task"), py::arg("n"), py::arg("min_nodes") = 10, py::arg("max_nodes") = 40,
        py::arg("seed") = 0);
  m.def("load_dataset", &load_dataset, py::arg("path"));
  m.def("save_dataset", [](const std::vector<Graph>& graphs, const std::filesystem::path& p) {
    save_dataset(graphs, p);
  }, py::arg("graphs"), py::arg("path"));

  m.def("preset_names", &preset_names);
  m.def("preset_spec", [](const std::string& name, std::size_t in_features,
                          std::size_t edge_features, std::size_t n_max, std::size_t field_arity,
                          std::size_t blocks) {
    PresetOptions o;
    o.in_features = in_features;
    o.edge_features = edge_features;
    o.n_max = n_max;
    o.field_arity = field_arity;
    o.blocks = blocks;
    return format_network_spec(preset_spec(name, o));
  }, py::arg("name"), py::arg("in_features") = 5, py::arg("edge_features") = 0,
        py::arg("n_max") = 40, py::arg("field_arity") = 1, py::arg("blocks") = 14,
        "Network spec text of a preset.");
  m.def("validate_spec", [](const std::string& text) {
    return format_network_spec(parse_network_spec(text));
  }, py::arg("text"), "Parses and validates spec text; returns its canonical form.");

  py::class_<Network>(m, "Network")
      .def(py::init([](const std::string& spec, std::uint64_t seed) {
        return assemble_network(parse_network_spec(spec), seed);
      }), py::arg("spec"), py::arg("seed") = 0)
      .def_property_readonly("spiking_layers", &Network::spiking_layer_names)
      .def_property_readonly("parameter_names", [](const Network& n) {
        std::vector<std::string> out;
        for (const Parameter& p : n.parameters()) out.push_back(p.name);
        return out;
      })
      .def("set_degree_normalization", &Network::set_degree_normalization)
      .def("fit_degree_normalization", [](Network& n, const std::vector<Graph>& graphs) {
        n.set_degree_normalization(degree_normalization(graphs));
      })
      .def("forward", [](Network& n, const std::vector<Graph>& graphs, std::size_t sts) {
        const ForwardResult r = n.forward(batch_graphs(graphs), sts, Mode::kEval);
        py::dict rates;
        for (const LayerTelemetry& t : r.telemetry) rates[py::str(t.name)] = t.telemetry.rate();
        return py::make_tuple(to_array(r.output), rates);
      }, py::arg("graphs"), py::arg("sts") = 4,
           "Eval-mode forward; returns (output array, {layer: spiking activity}).");

  m.def("run_neuron", &run_neuron, py::arg("kind"), py::arg("stream"), py::arg("beta") = 0.9,
        py::arg("threshold") = 1.0, py::arg("activation") = "relu", py::arg("slope") = 25.0);
  m.def("fast_sigmoid_grad", &fast_sigmoid_grad, py::arg("u"), py::arg("slope"));

  m.def("run_experiment", [](const std::string& config_json, const std::filesystem::path& out) {
    ExperimentConfig cfg;
    apply_config_json(cfg, config_json);
    if (!out.empty()) cfg.out_dir = out;
    const ExperimentResult r = [&] {
      py::gil_scoped_release release;
      return run_experiment(cfg);
    }();
    return report_to_json(r.report, cfg.include_timing);
  }, py::arg("config_json"), py::arg("out") = std::filesystem::path{},
        "Runs one experiment from a JSON config; returns the report as JSON text.");
}
