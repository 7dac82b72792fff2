// SPDX-License-Identifier: Apache-2.0
#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <numbers>
#include <sstream>

#include "hvsgnn/dataset.hpp"
#include "hvsgnn/error.hpp"
#include "hvsgnn/graph.hpp"
#include "oracles.hpp"

using namespace hvsgnn;

namespace {

Graph pair_graph() {
  GraphInput in;
  in.node_features = Matrix(2, 1, 1.0);
  in.edges = {{0, 1}};
  in.undirected = true;
  return build_graph(std::move(in));
}

Graph path3() {
  GraphInput in;
  in.node_features = Matrix(3, 1);
  in.edges = {{0, 1}, {1, 2}};
  in.undirected = true;
  return build_graph(std::move(in));
}

}  // namespace

TEST_CASE("build_graph: minimal and symmetrized graphs") {
  GraphInput one;
  one.node_features = Matrix::from_rows({{1.0}});
  const Graph g = build_graph(one);
  CHECK(g.num_nodes() == 1);
  CHECK(g.num_edges() == 0);

  const Graph p = pair_graph();
  REQUIRE(p.num_edges() == 2);
  CHECK(p.edges()[0] == Edge{0, 1});
  CHECK(p.edges()[1] == Edge{1, 0});
}

TEST_CASE("build_graph: validation errors") {
  GraphInput in;
  in.node_features = Matrix(3, 2);
  in.edges = {{0, 5}};
  CHECK_THROWS_AS(build_graph(in), SchemaError);

  in.edges = {{0, 1}, {0, 1}};
  CHECK_THROWS_AS(build_graph(in), SchemaError);

  in.edges = {{0, 1}};
  in.edge_features = Matrix(2, 1);
  CHECK_THROWS_AS(build_graph(in), SchemaError);

  in.edge_features.reset();
  in.node_target = Matrix(2, 1);
  CHECK_THROWS_AS(build_graph(in), SchemaError);

  GraphInput empty;
  CHECK_THROWS_AS(build_graph(empty), SchemaError);
}

TEST_CASE("build_graph: undirected self loop is stored once") {
  GraphInput in;
  in.node_features = Matrix(2, 1);
  in.edges = {{0, 0}, {0, 1}};
  in.undirected = true;
  const Graph g = build_graph(in);
  CHECK(g.num_edges() == 3);
  CHECK(adjacency_matrix(g, false)(0, 0) == 1.0);
}

TEST_CASE("adjacency_matrix examples") {
  const Graph p = pair_graph();
  CHECK(adjacency_matrix(p, false) == Matrix::from_rows({{0, 1}, {1, 0}}));
  CHECK(adjacency_matrix(p, true) == Matrix::from_rows({{1, 1}, {1, 1}}));
  GraphInput one;
  one.node_features = Matrix(1, 1);
  CHECK(adjacency_matrix(build_graph(one), true) == Matrix::from_rows({{1}}));
}

TEST_CASE("adjacency of undirected input is symmetric") {
  std::mt19937_64 rng(3);
  for (int trial = 0; trial < 20; ++trial) {
    const Graph g = oracle::random_graph(rng, 2 + trial % 7, 2);
    const Matrix a = adjacency_matrix(g, false);
    for (std::size_t i = 0; i < a.rows; ++i)
      for (std::size_t j = 0; j < a.cols; ++j) CHECK(a(i, j) == a(j, i));
  }
}

TEST_CASE("degree_vector examples") {
  const Graph g = path3();
  CHECK(degree_vector(g, false) == std::vector<double>{1, 2, 1});
  CHECK(degree_vector(g, true) == std::vector<double>{2, 3, 2});
  GraphInput one;
  one.node_features = Matrix(1, 1);
  CHECK(degree_vector(build_graph(one), false) == std::vector<double>{0});
}

TEST_CASE("neighbors are sorted ascending") {
  GraphInput in;
  in.node_features = Matrix(4, 1);
  in.edges = {{0, 3}, {0, 1}, {0, 2}};
  const Graph g = build_graph(in);
  const auto nb = g.neighbors(0);
  CHECK(std::vector<std::size_t>(nb.begin(), nb.end()) == std::vector<std::size_t>{1, 2, 3});
  CHECK(g.degree(0) == 3);
  CHECK(g.degree(3) == 0);
}

TEST_CASE("batch_graphs: disjoint union") {
  const Graph a = pair_graph();
  const Graph b = pair_graph();
  const std::vector<Graph> gs{a, b};
  const GraphBatch batch = batch_graphs(gs);
  CHECK(batch.graph.num_nodes() == 4);
  CHECK(batch.sample_count() == 2);
  CHECK(batch.offsets == std::vector<std::size_t>{0, 2, 4});
  REQUIRE(batch.graph.num_edges() == 4);
  CHECK(batch.graph.edges()[2] == Edge{2, 3});
  CHECK(batch.graph.edges()[3] == Edge{3, 2});
  for (const Edge& e : batch.graph.edges()) {
    CHECK((e.u < 2) == (e.v < 2));
  }
}

TEST_CASE("batch_graphs: single graph is identity") {
  const Graph g = path3();
  const std::vector<Graph> gs{g};
  const GraphBatch batch = batch_graphs(gs);
  CHECK(batch.graph == g);
  CHECK(batch.offsets == std::vector<std::size_t>{0, 3});
}

TEST_CASE("batch_graphs: errors") {
  CHECK_THROWS_AS(batch_graphs(std::span<const Graph>{}), SchemaError);
  GraphInput a;
  a.node_features = Matrix(1, 5);
  GraphInput b;
  b.node_features = Matrix(1, 3);
  const std::vector<Graph> gs{build_graph(a), build_graph(b)};
  CHECK_THROWS_AS(batch_graphs(gs), SchemaError);
}

TEST_CASE("batch_graphs: targets and fields carried along") {
  GraphInput a;
  a.node_features = Matrix(2, 1);
  a.graph_target = std::vector<double>{1.5};
  a.field = {0.25};
  GraphInput b = a;
  b.node_features = Matrix(3, 1);
  b.graph_target = std::vector<double>{-2.0};
  b.field = {0.75};
  const std::vector<Graph> gs{build_graph(a), build_graph(b)};
  const GraphBatch batch = batch_graphs(gs);
  REQUIRE(batch.graph_targets);
  CHECK(*batch.graph_targets == Matrix::from_rows({{1.5}, {-2.0}}));
  CHECK(batch.fields == Matrix::from_rows({{0.25}, {0.75}}));
}

TEST_CASE("dataset: empty input and blank lines") {
  std::istringstream empty("");
  CHECK(read_dataset(empty).empty());
  std::istringstream blank("\n  \n");
  CHECK(read_dataset(blank).empty());
}

TEST_CASE("dataset: missing key names the key and line") {
  std::istringstream in(
      "{\"num_nodes\":1,\"node_features\":[[1.0]],\"edges\":[]}\n"
      "{\"num_nodes\":1,\"node_features\":[[1.0]]}\n");
  try {
    read_dataset(in);
    FAIL("expected a schema error");
  } catch (const SchemaError& e) {
    const std::string msg = e.what();
    CHECK(msg.find("line 2") != std::string::npos);
    CHECK(msg.find("edges") != std::string::npos);
  }
}

TEST_CASE("dataset: malformed records are rejected") {
  for (const char* text : {
           "{not json}",
           "{\"num_nodes\":2,\"node_features\":[[1.0]],\"edges\":[]}",
           "{\"num_nodes\":1,\"node_features\":[[1.0]],\"edges\":[[0,3]]}",
           "{\"num_nodes\":1,\"node_features\":[[1.0]],\"edges\":[],\"colour\":1}",
           "[1,2]",
       }) {
    std::istringstream in(text);
    CHECK_THROWS_AS(read_dataset(in), SchemaError);
  }
}

TEST_CASE("dataset: undirected flag symmetrizes") {
  std::istringstream in(
      "{\"num_nodes\":2,\"node_features\":[[1.0],[2.0]],\"edges\":[[0,1]],\"undirected\":true}");
  const auto gs = read_dataset(in);
  REQUIRE(gs.size() == 1);
  CHECK(gs[0].num_edges() == 2);
}

TEST_CASE("dataset: save/load round trip is bit exact") {
  const auto tmp = std::filesystem::temp_directory_path() / "hvsgnn_roundtrip";
  std::filesystem::create_directories(tmp);
  for (SyntheticTask task :
       {SyntheticTask::kGraphScalar, SyntheticTask::kGraphScalarCond, SyntheticTask::kNodeField}) {
    const auto gs = gen_synthetic(task, 12, {3, 15}, 11);
    const auto p1 = tmp / "a.jsonl";
    const auto p2 = tmp / "b.jsonl";
    save_dataset(gs, p1);
    const auto loaded = load_dataset(p1);
    REQUIRE(loaded.size() == gs.size());
    for (std::size_t i = 0; i < gs.size(); ++i) CHECK(loaded[i] == gs[i]);
    save_dataset(loaded, p2);
    std::ifstream f1(p1, std::ios::binary), f2(p2, std::ios::binary);
    std::stringstream s1, s2;
    s1 << f1.rdbuf();
    s2 << f2.rdbuf();
    CHECK(s1.str() == s2.str());
  }
  std::filesystem::remove_all(tmp);
}

TEST_CASE("gen_synthetic: determinism, sizes and errors") {
  const auto a = gen_synthetic(SyntheticTask::kGraphScalar, 20, {10, 30}, 5);
  const auto b = gen_synthetic(SyntheticTask::kGraphScalar, 20, {10, 30}, 5);
  CHECK(a == b);
  const auto c = gen_synthetic(SyntheticTask::kGraphScalar, 20, {10, 30}, 6);
  CHECK(a != c);
  for (const Graph& g : gen_synthetic(SyntheticTask::kNodeField, 10, {3, 3}, 1)) {
    CHECK(g.num_nodes() == 3);
  }
  CHECK_THROWS_AS(gen_synthetic(SyntheticTask::kGraphScalar, 5, {0, 5}, 1), ConfigError);
  CHECK_THROWS_AS(gen_synthetic(SyntheticTask::kGraphScalar, 0, {1, 5}, 1), ConfigError);
  CHECK_THROWS_AS(parse_task("graph-vector"), ConfigError);
}

TEST_CASE("node-field targets on a hand-evaluated star") {
  // Center 0 with leaves 1, 2, 3. Target: sin(pi own0) + nb1 - 0.5 own2 nb2.
  GraphInput in;
  in.node_features = Matrix::from_rows({
      {0.5, 0.2, 0.4, 0, 0},
      {0.0, 0.3, 0.2, 0, 0},
      {1.0 / 6.0, 0.6, 0.4, 0, 0},
      {0.5, 0.9, 0.6, 0, 0},
  });
  in.edges = {{0, 1}, {0, 2}, {0, 3}};
  in.undirected = true;
  const Matrix t = node_field_targets(build_graph(in));
  // center: 1 + 0.6 - 0.5 * 0.4 * 0.4; leaves see the center.
  CHECK(t(0, 0) == doctest::Approx(1.52).epsilon(1e-14));
  CHECK(t(1, 0) == doctest::Approx(0.16).epsilon(1e-14));
  CHECK(t(2, 0) == doctest::Approx(0.62).epsilon(1e-14));
  CHECK(t(3, 0) == doctest::Approx(1.08).epsilon(1e-14));
}

TEST_CASE("generated targets follow the closed forms") {
  for (const Graph& g : gen_synthetic(SyntheticTask::kNodeField, 8, {4, 20}, 2)) {
    const Matrix t = node_field_targets(g);
    for (std::size_t i = 0; i < g.num_nodes(); ++i) {
      CHECK((*g.node_target())(i, 0) == doctest::Approx(t(i, 0)).epsilon(1e-12));
    }
  }
  for (const Graph& g : gen_synthetic(SyntheticTask::kGraphScalarCond, 8, {4, 20}, 2)) {
    std::vector<double> mean(5, 0.0);
    for (std::size_t i = 0; i < g.num_nodes(); ++i)
      for (std::size_t k = 0; k < 5; ++k) mean[k] += g.node_features()(i, k) / g.num_nodes();
    double deg = 0.0;
    for (std::size_t i = 0; i < g.num_nodes(); ++i) deg += g.degree(i);
    deg /= g.num_nodes();
    const double h = g.field()[0];
    const double base = std::sin(std::numbers::pi * mean[0]) + mean[1] * mean[2] -
                        0.5 * mean[3] * mean[3] + 0.1 * deg;
    CHECK(g.graph_target()->at(0) ==
          doctest::Approx(base * (1 + 0.5 * h) + 0.25 * h * h).epsilon(1e-12));
  }
}
