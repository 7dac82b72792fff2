// SPDX-License-Identifier: Apache-2.0
#include <doctest.h>

#include <cmath>

#include "hvsgnn/dataset.hpp"
#include "hvsgnn/error.hpp"
#include "hvsgnn/network.hpp"
#include "oracles.hpp"

using namespace hvsgnn;

namespace {

std::vector<std::string> mode_layout(const NetworkSpec& spec) {
  std::vector<std::string> out;
  for (const LayerSpec& l : spec.layers) {
    if (l.kind != LayerKind::kActivation && !l.mode.spiking()) continue;
    const char* m = l.mode.type == ActivationMode::Type::kLif   ? "lif"
                    : l.mode.type == ActivationMode::Type::kVsn ? "vsn"
                                                                : "art";
    out.push_back(l.name + ":" + m);
  }
  return out;
}

PresetOptions small_options(std::size_t blocks = 2) {
  PresetOptions o;
  o.blocks = blocks;
  o.n_max = 12;
  return o;
}

std::vector<Graph> small_data(SyntheticTask task, std::size_t n, std::uint64_t seed) {
  return gen_synthetic(task, n, {4, 12}, seed);
}

double max_diff(const Tensor& a, const Tensor& b) {
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a.values()[i] - b.values()[i]));
  return m;
}

}  // namespace

TEST_CASE("ex1 preset layout") {
  const NetworkSpec s = preset_spec("ex1-agnn");
  REQUIRE(s.layers.size() == 12);
  CHECK(s.layers.front().kind == LayerKind::kLinear);
  CHECK(s.layers.front().width == 32);
  CHECK(s.layers[2].kind == LayerKind::kSage);
  CHECK(s.layers[6].kind == LayerKind::kGlobalMeanPool);
  CHECK(s.layers.back().kind == LayerKind::kLinear);
  CHECK(s.layers.back().width == 1);

  CHECK(mode_layout(preset_spec("ex1-v1")) ==
        std::vector<std::string>{"A1:vsn", "A2:vsn", "A3:vsn", "A4:art", "A5:art"});
  CHECK(mode_layout(preset_spec("ex1-v2")) ==
        std::vector<std::string>{"A1:vsn", "A2:vsn", "A3:vsn", "A4:vsn", "A5:vsn"});
  CHECK(mode_layout(preset_spec("ex1-v1-lif")) ==
        std::vector<std::string>{"A1:lif", "A2:lif", "A3:lif", "A4:art", "A5:art"});
}

TEST_CASE("ex2 preset layout") {
  const NetworkSpec s = preset_spec("ex2-agnn");
  REQUIRE(s.layers.size() == 12);
  CHECK(s.layers[0].kind == LayerKind::kGcn);
  CHECK(s.layers[6].kind == LayerKind::kFlattenConcat);
  CHECK(s.layers[6].width == 40 * 3 + 1);
  CHECK(s.layers[2].mode.activation == Activation::kSigmoid);
  CHECK(s.layers[8].mode.activation == Activation::kRelu);
  CHECK(mode_layout(preset_spec("ex2-v1")) ==
        std::vector<std::string>{"A1:art", "A2:art", "A3:vsn", "A4:vsn"});
  CHECK(mode_layout(preset_spec("ex2-v2-lif")) ==
        std::vector<std::string>{"A1:lif", "A2:lif", "A3:lif", "A4:lif"});
}

TEST_CASE("ex3 preset layout") {
  const NetworkSpec s = preset_spec("ex3-agnn");
  REQUIRE(s.layers.size() == 14 * 4 + 1);
  for (std::size_t b = 0; b < 14; ++b) {
    CHECK(s.layers[4 * b].kind == LayerKind::kPna);
    CHECK(s.layers[4 * b].width == 50);
    CHECK(s.layers[4 * b + 1].kind == LayerKind::kGru);
    CHECK(s.layers[4 * b + 2].kind == LayerKind::kBatchNorm);
    CHECK(s.layers[4 * b + 3].kind == LayerKind::kActivation);
  }
  CHECK(s.layers.back().kind == LayerKind::kPna);
  CHECK(s.layers.back().width == 1);

  const NetworkSpec v1 = preset_spec("ex3-v1", small_options(2));
  CHECK(mode_layout(v1) ==
        std::vector<std::string>{"PNA1.1:vsn", "A1.1:vsn", "PNA1.2:vsn", "A1.2:vsn"});
  CHECK(v1.layers[0].mode.activation == Activation::kIdentity);
  CHECK(mode_layout(preset_spec("ex3-v2", small_options(2))) ==
        std::vector<std::string>{"A1.1:vsn", "A1.2:vsn"});
  CHECK_THROWS_AS(preset_spec("ex4-v1"), ConfigError);
  CHECK_THROWS_AS(preset_spec("ex1-v3"), ConfigError);
}

TEST_CASE("spec text round trip") {
  for (const std::string& name : preset_names()) {
    CAPTURE(name);
    const NetworkSpec s = preset_spec(name, small_options());
    const std::string text = format_network_spec(s);
    const NetworkSpec back = parse_network_spec(text);
    CHECK(format_network_spec(back) == text);
  }
}

TEST_CASE("spec parse errors") {
  const auto line_error = [](const std::string& text, const std::string& fragment) {
    try {
      parse_network_spec(text);
      return false;
    } catch (const SchemaError& e) {
      return std::string(e.what()).find(fragment) != std::string::npos;
    }
  };
  CHECK(line_error("input(3)\nlinear(4)\nconv(2)\n", "line 3"));
  CHECK(line_error("input(3)\nlinear(4) colour=red\n", "line 2"));
  CHECK(line_error("linear(4)\n", "input"));
  CHECK(line_error("input(3)\nlinear(4)\nbatchnorm(5)\nlinear(1)\n", "width"));
  CHECK(line_error("input(3)\nlinear(4)\nactivation(4) mode=vsn:sigmoid\nlinear(1)\n", "act(0)"));
  CHECK(line_error("input(3)\nlinear(4) mode=lif\n", "output"));
  CHECK(line_error("input(3)\nglobal-mean-pool(3)\nsage(4)\n", "pooled"));
  CHECK(line_error("input(3)\npna(4) aggs=\n", "aggregator"));
}

TEST_CASE("spec comments and attributes") {
  const NetworkSpec s = parse_network_spec(
      "# demo\ninput(2)\nsage(4) agg=max name=S\nactivation(4) mode=lif beta=0.5 threshold=0.2 "
      "trainable=threshold\nglobal-mean-pool(4)\nlinear(1)  # readout\n");
  REQUIRE(s.layers.size() == 4);
  CHECK(s.layers[0].aggregator == Aggregator::kMax);
  CHECK(s.layers[1].mode.neuron.beta == 0.5);
  CHECK_FALSE(s.layers[1].mode.neuron.trainable_beta);
  CHECK(s.layers[1].mode.neuron.trainable_threshold);
  const Network net = assemble_network(s, 0);
  std::size_t trainable = 0;
  for (const Parameter& p : net.parameters()) trainable += p.trainable() ? 1 : 0;
  CHECK(trainable == net.parameters().size() - 1);
}

TEST_CASE("assembly is deterministic in the seed") {
  const NetworkSpec s = preset_spec("ex1-v1");
  const Network a = assemble_network(s, 3);
  const Network b = assemble_network(s, 3);
  const Network c = assemble_network(s, 4);
  CHECK(a.state() == b.state());
  CHECK_FALSE(a.state() == c.state());
}

TEST_CASE("weights lie within the fan-in bound") {
  const Network net = assemble_network(preset_spec("ex1-agnn"), 1);
  for (const Parameter& p : net.parameters()) {
    if (p.role != ParamRole::kWeight) continue;
    const double bound = 1.0 / std::sqrt(static_cast<double>(p.value.rows()));
    for (double v : p.value.values()) CHECK(std::abs(v) <= bound);
  }
}

TEST_CASE("networks without spiking layers ignore the step count") {
  const auto data = small_data(SyntheticTask::kGraphScalar, 4, 1);
  const GraphBatch batch = batch_graphs(data);
  Network net = assemble_network(preset_spec("ex1-agnn"), 2);
  const Tensor a = net.forward(batch, 1, Mode::kEval).output;
  const Tensor b = net.forward(batch, 7, Mode::kEval).output;
  CHECK(a.to_matrix() == b.to_matrix());
  CHECK(net.forward(batch, 3, Mode::kEval).telemetry.empty());
}

TEST_CASE("always-open VSN networks reproduce the continuous network") {
  PresetOptions open = small_options();
  open.neuron.threshold = -1e9;
  for (const char* family : {"ex1", "ex3"}) {
    const auto task = std::string(family) == "ex3" ? SyntheticTask::kNodeField
                                                   : SyntheticTask::kGraphScalar;
    const auto data = small_data(task, 5, 4);
    const GraphBatch batch = batch_graphs(data);
    Network base = assemble_network(preset_spec(std::string(family) + "-agnn", open), 9);
    const std::vector<Graph> train(data.begin(), data.end());
    if (base.uses_degree_scalers()) base.set_degree_normalization(degree_normalization(train));
    const Tensor want = base.forward(batch, 1, Mode::kEval).output;
    for (const char* v : {"-v1", "-v2"}) {
      Network net = assemble_network(preset_spec(std::string(family) + v, open), 9);
      if (net.uses_degree_scalers()) net.set_degree_normalization(degree_normalization(train));
      for (std::size_t sts : {1, 4}) {
        const ForwardResult r = net.forward(batch, sts, Mode::kEval);
        CHECK(max_diff(r.output, want) <= 1e-12);
        for (const auto& t : r.telemetry) CHECK(t.telemetry.rate() == 1.0);
      }
    }
  }
}

TEST_CASE("telemetry rates lie in [0, 1]") {
  const auto data = small_data(SyntheticTask::kGraphScalar, 6, 5);
  const GraphBatch batch = batch_graphs(data);
  for (const char* name : {"ex1-v1", "ex1-v2", "ex1-v2-lif"}) {
    Network net = assemble_network(preset_spec(name), 1);
    const ForwardResult r = net.forward(batch, 4, Mode::kEval);
    CHECK(r.telemetry.size() == net.spiking_layer_names().size());
    for (const auto& t : r.telemetry) {
      CHECK(t.telemetry.rate() >= 0.0);
      CHECK(t.telemetry.rate() <= 1.0);
      CHECK(t.telemetry.opportunity_count > 0);
    }
  }
}

TEST_CASE("batching locality in eval mode") {
  for (const char* name : {"ex1-v2", "ex2-v2", "ex3-v1"}) {
    CAPTURE(name);
    const std::string preset = name;
    const auto task = preset.starts_with("ex3")   ? SyntheticTask::kNodeField
                      : preset.starts_with("ex2") ? SyntheticTask::kGraphScalarCond
                                                  : SyntheticTask::kGraphScalar;
    const auto data = small_data(task, 4, 6);
    Network net = assemble_network(preset_spec(name, small_options()), 5);
    if (net.uses_degree_scalers()) net.set_degree_normalization(degree_normalization(data));
    const Tensor joint = net.forward(batch_graphs(data), 3, Mode::kEval).output;
    std::vector<double> parts;
    for (const Graph& g : data) {
      const Tensor one = net.forward(batch_graphs(std::span(&g, 1)), 3, Mode::kEval).output;
      parts.insert(parts.end(), one.values().begin(), one.values().end());
    }
    REQUIRE(parts.size() == joint.size());
    for (std::size_t i = 0; i < parts.size(); ++i) CHECK(std::abs(parts[i] - joint.values()[i]) <= 1e-12);
  }
}

TEST_CASE("graph-level outputs are invariant under node relabeling") {
  std::mt19937_64 rng(44);
  const auto data = small_data(SyntheticTask::kGraphScalar, 3, 8);
  Network net = assemble_network(preset_spec("ex1-agnn"), 2);
  for (const Graph& g : data) {
    std::vector<std::size_t> perm(g.num_nodes());
    std::iota(perm.begin(), perm.end(), 0);
    std::shuffle(perm.begin(), perm.end(), rng);
    const Graph pg = oracle::permute_graph(g, perm);
    const double a = net.forward(batch_graphs(std::span(&g, 1)), 1, Mode::kEval).output.item();
    const double b = net.forward(batch_graphs(std::span(&pg, 1)), 1, Mode::kEval).output.item();
    CHECK(std::abs(a - b) <= 1e-12);
  }
}

TEST_CASE("every parameter receives gradient") {
  for (const char* name : {"ex1-agnn", "ex2-agnn", "ex3-agnn"}) {
    CAPTURE(name);
    const std::string preset = name;
    const auto task = preset.starts_with("ex3")   ? SyntheticTask::kNodeField
                      : preset.starts_with("ex2") ? SyntheticTask::kGraphScalarCond
                                                  : SyntheticTask::kGraphScalar;
    const auto data = small_data(task, 4, 10);
    Network net = assemble_network(preset_spec(name, small_options()), 1);
    if (net.uses_degree_scalers()) net.set_degree_normalization(degree_normalization(data));
    Tape tape;
    Tape::Scope scope(tape);
    const Tensor out = net.forward(batch_graphs(data), 1, Mode::kTrain).output;
    const GradientMap g = backward(tape, reduce_sum(mul(out, out)));
    for (const Parameter& p : net.parameters()) {
      CAPTURE(p.name);
      // The first cell starts from a zero state, so its recurrent and reset
      // parameters cannot influence the output.
      if (p.name.starts_with("layer1.gru.") &&
          (p.name.find(".u_") != std::string::npos || p.name.find("reset") != std::string::npos)) {
        continue;
      }
      double norm = 0.0;
      for (double v : g.at(p.value)) norm += v * v;
      CHECK(norm > 0.0);
    }
  }
}

TEST_CASE("forward input checks") {
  Network net = assemble_network(preset_spec("ex1-agnn"), 0);
  GraphInput in;
  in.node_features = Matrix(3, 4);
  const Graph g = build_graph(in);
  CHECK_THROWS_AS(net.forward(batch_graphs(std::span(&g, 1)), 1, Mode::kEval), ShapeError);

  Network pna = assemble_network(preset_spec("ex3-agnn", small_options(1)), 0);
  const auto data = small_data(SyntheticTask::kNodeField, 2, 1);
  CHECK_THROWS_AS(pna.forward(batch_graphs(data), 1, Mode::kEval), ConfigError);
}

TEST_CASE("state round trip") {
  Network a = assemble_network(preset_spec("ex3-v2", small_options(1)), 1);
  const Network b = assemble_network(preset_spec("ex3-v2", small_options(1)), 2);
  a.load_state(b.state());
  CHECK(a.state() == b.state());
  Network::State bad = b.state();
  bad.values.pop_back();
  CHECK_THROWS_AS(a.load_state(bad), ShapeError);
}
