// SPDX-License-Identifier: Apache-2.0
// Acceptance checks. Prints one PASS/FAIL line per criterion and exits
// nonzero if any fails. Tolerances and run configurations are pinned below.

#include <algorithm>
#include <array>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iterator>
#include <map>
#include <numeric>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "hvsgnn/dataset.hpp"
#include "hvsgnn/experiment.hpp"
#include "hvsgnn/layers.hpp"
#include "hvsgnn/network.hpp"
#include "hvsgnn/neurons.hpp"
#include "hvsgnn/runtime.hpp"
#include "hvsgnn/training.hpp"
#include "oracles.hpp"

using namespace hvsgnn;
namespace fs = std::filesystem;

namespace {

constexpr double kFdStep = 1e-5;
constexpr double kFdTol = 1e-4;
constexpr int kFdSeeds = 100;
constexpr double kSurrogateTol = 1e-12;
constexpr double kDegenerateTol = 1e-12;
constexpr double kDenseGcnTol = 1e-10;
constexpr double kEquivarianceTol = 1e-12;
constexpr double kTrendMseFactor = 2.0;
constexpr double kSlfMseIncrease = 0.5;
constexpr double kGradientBudgetSeconds = 60.0;
constexpr double kTrendBudgetSeconds = 900.0;

struct Outcome {
  bool pass = true;
  std::string detail;
};

struct Clock {
  std::chrono::steady_clock::time_point start = std::chrono::steady_clock::now();
  double seconds() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  }
};

std::string fmt(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.3g", v);
  return buf;
}

// ---- 1: finite differences -------------------------------------------------

using LayerFn = std::function<Tensor(const std::vector<Tensor>&)>;

// Checks d(sum(out * r))/d(input k) for every k, r a fixed random weighting.
double worst_fd(std::mt19937_64& rng, const std::vector<Tensor>& inputs, const LayerFn& f) {
  const Tensor probe = f(inputs);
  const Tensor r(probe.shape(), [&] {
    std::vector<double> v(probe.size());
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    for (double& x : v) x = u(rng);
    return v;
  }());
  double worst = 0.0;
  for (std::size_t k = 0; k < inputs.size(); ++k) {
    const auto loss = [&](const Tensor& x) {
      std::vector<Tensor> in = inputs;
      in[k] = x;
      return reduce_sum(mul(f(in), r));
    };
    worst = std::max(worst, grad_check(loss, inputs[k], kFdStep, kFdTol).max_discrepancy);
  }
  return worst;
}

Tensor vec(std::mt19937_64& rng, std::size_t n) { return oracle::random_vector(rng, n); }
Tensor mat(std::mt19937_64& rng, std::size_t r, std::size_t c) {
  return oracle::random_tensor(rng, r, c);
}

Outcome gradient_correctness() {
  std::map<std::string, double> worst;
  for (int seed = 0; seed < kFdSeeds; ++seed) {
    std::mt19937_64 rng(1000 + seed);
    const std::size_t n = 2 + seed % 6, in = 1 + seed % 4, out = 1 + (seed / 4) % 3;
    const Graph g = oracle::random_graph(rng, n, in, 0.5, seed % 2 ? 2 : 0);

    worst["linear"] = std::max(worst["linear"],
        worst_fd(rng, {mat(rng, n, in), mat(rng, in, out), vec(rng, out)},
                 [](const std::vector<Tensor>& t) { return linear_forward(t[0], {t[1], t[2]}); }));

    worst["gcn"] = std::max(worst["gcn"],
        worst_fd(rng, {mat(rng, n, in), mat(rng, in, out)},
                 [&](const std::vector<Tensor>& t) { return gcn_forward(g, t[0], {t[1]}); }));

    const Aggregator sage_agg = std::array{Aggregator::kMean, Aggregator::kSum, Aggregator::kMax,
                                           Aggregator::kMin}[seed % 4];
    worst["sage"] = std::max(worst["sage"],
        worst_fd(rng, {mat(rng, n, in), mat(rng, in, out), mat(rng, in, out)},
                 [&](const std::vector<Tensor>& t) {
                   return sage_forward(g, t[0], {t[1], t[2]}, sage_agg);
                 }));

    PnaConfig cfg;
    cfg.scalers.delta = degree_normalization(std::span(&g, 1)) + 0.5;
    const std::size_t ed = g.edge_feature_dim();
    const std::size_t upd = in + cfg.scalers.alphas.size() * cfg.aggregators.size() * out;
    worst["pna"] = std::max(worst["pna"],
        worst_fd(rng, {mat(rng, n, in), mat(rng, 2 * in + ed, out), vec(rng, out),
                       mat(rng, upd, out), vec(rng, out)},
                 [&](const std::vector<Tensor>& t) {
                   return pna_forward(g, t[0], {{t[1], t[2]}, {t[3], t[4]}}, cfg);
                 }));

    std::vector<Tensor> gru{mat(rng, n, out), mat(rng, n, in)};
    for (int gate = 0; gate < 3; ++gate) {
      gru.push_back(mat(rng, in, out));
      gru.push_back(mat(rng, out, out));
      gru.push_back(vec(rng, out));
    }
    worst["gru"] = std::max(worst["gru"], worst_fd(rng, gru, [](const std::vector<Tensor>& t) {
      const GruParams p{t[2], t[3], t[4], t[5], t[6], t[7], t[8], t[9], t[10]};
      return gru_cell_forward(t[0], t[1], p);
    }));

    std::vector<double> rm(in), rv(in);
    std::uniform_real_distribution<double> pos(0.2, 2.0), u(-1.0, 1.0);
    for (std::size_t c = 0; c < in; ++c) {
      rm[c] = u(rng);
      rv[c] = pos(rng);
    }
    worst["batchnorm-eval"] = std::max(worst["batchnorm-eval"],
        worst_fd(rng, {mat(rng, n, in), vec(rng, in), vec(rng, in)},
                 [&](const std::vector<Tensor>& t) {
                   BatchNormParams p{t[1], t[2], rm, rv};
                   return batch_norm_forward(t[0], p, Mode::kEval);
                 }));

    const std::vector<std::size_t> offsets{0, n / 2, n};
    worst["global-mean-pool"] = std::max(worst["global-mean-pool"],
        worst_fd(rng, {mat(rng, n, in)},
                 [&](const std::vector<Tensor>& t) { return global_mean_pool(offsets, t[0]); }));
  }
  Outcome o;
  for (const auto& [name, w] : worst) {
    if (w > kFdTol) o.pass = false;
    o.detail += name + "=" + fmt(w) + " ";
  }
  o.detail += "over " + std::to_string(kFdSeeds) + " seeds";
  return o;
}

// ---- 2: surrogate ------------------------------------------------------------

Outcome surrogate_exactness() {
  double worst = 0.0;
  std::mt19937_64 rng(2);
  std::uniform_real_distribution<double> u(-3.0, 3.0);
  for (double k : {5.0, 25.0, 100.0}) {
    std::vector<double> m(1000);
    for (double& x : m) x = u(rng);
    const double threshold = 0.25;
    const Tensor mt({m.size()}, m, true);
    const Tensor th = Tensor::scalar(threshold, true);
    Tape tape;
    Tape::Scope scope(tape);
    const Tensor loss = reduce_sum(spike_gate(mt, th, k));
    const GradientMap grads = backward(tape, loss);
    const std::vector<double> gm = grads.at(mt);
    double th_expected = 0.0;
    for (std::size_t i = 0; i < m.size(); ++i) {
      const double d = m[i] - threshold;
      const double want = k / ((k * std::abs(d) + 1.0) * (k * std::abs(d) + 1.0));
      th_expected -= want;
      worst = std::max(worst, std::abs(gm[i] - want));
    }
    worst = std::max(worst, std::abs(grads.at(th)[0] - th_expected) / m.size());
  }
  return {worst <= kSurrogateTol, "max error " + fmt(worst) + " at k in {5,25,100}, 1000 u each"};
}

// ---- 3: neuron traces ----------------------------------------------------------

Outcome neuron_traces() {
  Outcome o;
  NeuronConfig hand;
  hand.beta = 1.0;
  hand.threshold = 0.5;
  hand.inner_activation = Activation::kIdentity;
  const std::vector<Tensor> z{Tensor({1}, {0.3}), Tensor({1}, {0.3})};
  const SpikeStream lif = run_over_sts(NeuronKind::kLif, z, hand);
  const SpikeStream vsn = run_over_sts(NeuronKind::kVsn, z, hand);
  if (lif.outputs[0].item() != 0.0 || lif.outputs[1].item() != 1.0) o.pass = false;
  if (vsn.outputs[0].item() != 0.0 || vsn.outputs[1].item() != 0.3) o.pass = false;
  if (vsn.telemetry.spike_count != 1 || vsn.telemetry.rate() != 0.5) o.pass = false;

  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(-1.0, 2.0), b(0.0, 1.0);
  std::size_t compared = 0;
  for (int trial = 0; trial < 200; ++trial) {
    NeuronConfig cfg;
    cfg.beta = b(rng);
    cfg.threshold = u(rng);
    cfg.inner_activation = Activation::kRelu;
    const std::size_t steps = 1 + trial % 8, width = 6;
    std::vector<std::vector<double>> per(width);
    std::vector<Tensor> zs;
    for (std::size_t t = 0; t < steps; ++t) {
      std::vector<double> v(width);
      for (std::size_t i = 0; i < width; ++i) per[i].push_back(v[i] = u(rng));
      zs.push_back(Tensor({width}, v));
    }
    const SpikeStream sl = run_over_sts(NeuronKind::kLif, zs, cfg);
    const SpikeStream sv = run_over_sts(NeuronKind::kVsn, zs, cfg);
    for (std::size_t i = 0; i < width; ++i) {
      const oracle::Trace tl = oracle::lif_trace(per[i], cfg.beta, cfg.threshold);
      const oracle::Trace tv = oracle::vsn_trace(per[i], cfg.beta, cfg.threshold,
                                                 [](double x) { return x > 0 ? x : 0.0; });
      for (std::size_t t = 0; t < steps; ++t) {
        const double yl = sl.outputs[t].values()[i], yv = sv.outputs[t].values()[i];
        if (yl != tl.outputs[t] || (yl != 0.0 && yl != 1.0)) o.pass = false;
        if (yv != tv.outputs[t]) o.pass = false;
        // The LIF gate is the VSN gate for the same stream.
        if (yl == 0.0 && yv != 0.0) o.pass = false;
        ++compared;
      }
    }
  }
  o.detail = "hand traces plus " + std::to_string(compared) + " random neuron-steps, exact";
  return o;
}

// ---- 4: degenerate thresholds ----------------------------------------------------

SyntheticTask task_for(const std::string& family) {
  if (family == "ex2") return SyntheticTask::kGraphScalarCond;
  if (family == "ex3") return SyntheticTask::kNodeField;
  return SyntheticTask::kGraphScalar;
}

PresetOptions options_for(const std::vector<Graph>& data, std::size_t blocks) {
  PresetOptions o;
  o.in_features = data.front().feature_dim();
  o.edge_features = data.front().edge_feature_dim();
  o.field_arity = data.front().field().size();
  o.n_max = 0;
  for (const Graph& g : data) o.n_max = std::max(o.n_max, g.num_nodes());
  o.blocks = blocks;
  return o;
}

double max_diff(const Tensor& a, const Tensor& b) {
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a.values()[i] - b.values()[i]));
  return m;
}

Outcome degenerate_equivalence() {
  double worst = 0.0;
  std::size_t graphs = 0;
  for (const std::string family : {"ex1", "ex2", "ex3"}) {
    const auto data = gen_synthetic(task_for(family), 50, {4, 12}, 4);
    graphs = data.size();
    PresetOptions open = options_for(data, 3);
    open.neuron.threshold = -1e9;
    for (const std::string variant : {"-v1", "-v2"}) {
      const NetworkSpec hvs = preset_spec(family + variant, open);
      // The matching A-GNN: the baseline with every replaced activation set
      // to the VSN inner activation (relu; identity for the ex3 PNA wrap).
      NetworkSpec ref = preset_spec(family + "-agnn", open);
      for (LayerSpec& l : ref.layers)
        for (const LayerSpec& h : hvs.layers)
          if (!l.name.empty() && h.name == l.name && h.mode.spiking())
            l.mode = ActivationMode::artificial(h.mode.activation);
      Network a = assemble_network(ref, 11);
      Network s = assemble_network(hvs, 11);
      if (a.uses_degree_scalers()) a.set_degree_normalization(degree_normalization(data));
      if (s.uses_degree_scalers()) s.set_degree_normalization(degree_normalization(data));
      const GraphBatch batch = batch_graphs(data);
      const Tensor want = a.forward(batch, 1, Mode::kEval).output;
      for (std::size_t sts : {1, 2, 4, 7}) {
        worst = std::max(worst, max_diff(s.forward(batch, sts, Mode::kEval).output, want));
      }
    }
  }
  return {worst <= kDegenerateTol, "max |HVS - A-GNN| " + fmt(worst) + " on " +
                                       std::to_string(graphs) + " graphs x ex1/ex2/ex3 v1,v2, T in {1,2,4,7}"};
}

// ---- 5: dense oracle and equivariance ----------------------------------------------

Outcome dense_and_equivariance() {
  double dense = 0.0, equi = 0.0;
  std::mt19937_64 rng(5);
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t n = 1 + trial % 8, f = 1 + trial % 3, out = 2;
    const Graph g = oracle::random_graph(rng, n, f, 0.45, 2);
    const Tensor h = Tensor::from_matrix(g.node_features());
    const Tensor w = mat(rng, f, out);
    const Matrix a = adjacency_matrix(g, false);
    oracle::Dense adj = oracle::zeros(n, n);
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < n; ++j) adj[i][j] = a(i, j);
    const auto want = oracle::dense_gcn(adj, oracle::to_dense(h), oracle::to_dense(w));
    dense = std::max(dense, oracle::max_abs_diff(oracle::to_dense(gcn_forward(g, h, {w})), want));

    std::vector<std::size_t> perm(n);
    std::iota(perm.begin(), perm.end(), 0);
    std::shuffle(perm.begin(), perm.end(), rng);
    const Graph pg = oracle::permute_graph(g, perm);
    const Tensor ph = Tensor::from_matrix(pg.node_features());
    PnaConfig cfg;
    cfg.scalers.delta = 1.3;
    const PnaParams pna{{mat(rng, 2 * f + 2, out), vec(rng, out)},
                        {mat(rng, f + 12 * out, out), vec(rng, out)}};
    const SageParams sage{mat(rng, f, out), mat(rng, f, out)};
    const std::vector<std::function<Tensor(const Graph&, const Tensor&)>> layers{
        [&](const Graph& gg, const Tensor& x) { return gcn_forward(gg, x, {w}); },
        [&](const Graph& gg, const Tensor& x) { return sage_forward(gg, x, sage, Aggregator::kMean); },
        [&](const Graph& gg, const Tensor& x) { return sage_forward(gg, x, sage, Aggregator::kSum); },
        [&](const Graph& gg, const Tensor& x) { return sage_forward(gg, x, sage, Aggregator::kMax); },
        [&](const Graph& gg, const Tensor& x) { return pna_forward(gg, x, pna, cfg); },
    };
    for (const auto& layer : layers) {
      const Tensor y = layer(g, h), py = layer(pg, ph);
      for (std::size_t i = 0; i < n; ++i)
        for (std::size_t c = 0; c < out; ++c)
          equi = std::max(equi, std::abs(y.at(i, c) - py.at(perm[i], c)));
    }
  }
  return {dense <= kDenseGcnTol && equi <= kEquivarianceTol,
          "gcn vs dense " + fmt(dense) + ", permutation " + fmt(equi) + " (gcn, sage x3, pna), 100 graphs n<=8"};
}

// ---- 6, 7: training trends ---------------------------------------------------------

fs::path scratch() {
  const fs::path p = fs::temp_directory_path() / "hvsgnn_acceptance";
  fs::create_directories(p);
  return p;
}

// Desk-scale configuration per task family.
ExperimentConfig trend_config(const std::string& family) {
  ExperimentConfig c;
  c.task = task_for(family);
  c.n_train = 100;
  c.n_val = 30;
  c.n_test = 30;
  c.optim.epochs = 60;
  c.neuron.threshold = 0.5;
  c.beta_l = 0.0;
  c.data_seed = 0;
  if (family == "ex3") {
    c.optim.epochs = 30;
    c.blocks = 3;
    c.node_range = {8, 16};
  }
  return c;
}

struct Averages {
  double mse = 0.0;
  double mean_s = 0.0;
  double max_layer_s = 0.0;
};

Averages run_seeds(ExperimentConfig c, const std::string& preset, const std::string& tag) {
  Averages avg;
  const std::vector<std::uint64_t> seeds{0, 1, 2};
  for (std::uint64_t seed : seeds) {
    c.preset = preset;
    c.seed = seed;
    c.out_dir = scratch() / (tag + "_" + preset + "_seed" + std::to_string(seed));
    const ExperimentResult r = run_experiment(c);
    avg.mse += r.report.test->mse / seeds.size();
    if (const auto& s = r.report.test->spiking) {
      avg.mean_s += s->mean / seeds.size();
      for (double v : s->per_layer) avg.max_layer_s = std::max(avg.max_layer_s, v);
    }
  }
  return avg;
}

Outcome trend_replication() {
  Outcome o;
  // Variant per family: ex1 and ex2 use variant 1, ex3 variant 2.
  const std::vector<std::pair<std::string, std::string>> families{
      {"ex1", "-v1"}, {"ex2", "-v1"}, {"ex3", "-v2"}};
  for (const auto& [family, variant] : families) {
    const ExperimentConfig c = trend_config(family);
    const Averages agnn = run_seeds(c, family + "-agnn", "trend");
    const Averages hvs = run_seeds(c, family + variant, "trend");
    const Averages hlif = run_seeds(c, family + variant + "-lif", "trend");
    const bool a = hvs.mse <= kTrendMseFactor * agnn.mse;
    const bool b = hvs.mse <= hlif.mse;
    const bool s = hvs.max_layer_s < 1.0;
    if (!(a && b && s)) o.pass = false;
    o.detail += family + variant + ": HVS " + fmt(hvs.mse) + " A " + fmt(agnn.mse) + " HLIF " +
                fmt(hlif.mse) + " maxS " + fmt(hvs.max_layer_s) + "; ";
  }
  return o;
}

// Task loss weight for the penalty comparison. With alpha_L = 1 the rate
// penalty outweighs the task loss on these targets (MSE ~1e-2) and training
// settles on a constant prediction; see README.
constexpr double kSlfAlpha = 1000.0;

Outcome slf_trend() {
  ExperimentConfig c = trend_config("ex1");
  c.alpha_l = kSlfAlpha;
  c.beta_l = 0.0;
  const Averages off = run_seeds(c, "ex1-v1", "slf0");
  c.beta_l = 0.1;
  const Averages on = run_seeds(c, "ex1-v1", "slf1");
  const double increase = on.mse / off.mse - 1.0;
  return {on.mean_s < off.mean_s && increase <= kSlfMseIncrease,
          "ex1-v1 S " + fmt(off.mean_s) + " -> " + fmt(on.mean_s) + ", MSE " + fmt(off.mse) +
              " -> " + fmt(on.mse) + " (" + fmt(100.0 * increase) + "%)"};
}

// ---- 8: determinism ---------------------------------------------------------------

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), {}};
}

Outcome determinism() {
  Outcome o;
  std::size_t files = 0;
  for (const std::string& preset : preset_names()) {
    ExperimentConfig c;
    c.preset = preset;
    c.task = task_for(preset.substr(0, 3));
    c.n_train = 8;
    c.n_val = 4;
    c.n_test = 4;
    c.node_range = {4, 10};
    c.optim.epochs = 2;
    c.optim.batch_size = 4;
    c.blocks = 2;
    c.seed = 3;
    std::vector<fs::path> dirs;
    for (int rep = 0; rep < 2; ++rep) {
      c.out_dir = scratch() / ("det_" + preset + "_" + std::to_string(rep));
      fs::remove_all(c.out_dir);
      run_experiment(c);
      dirs.push_back(c.out_dir);
    }
    for (const auto& entry : fs::directory_iterator(dirs[0])) {
      const fs::path other = dirs[1] / entry.path().filename();
      if (!fs::exists(other) || slurp(entry.path()) != slurp(other)) {
        o.pass = false;
        o.detail += preset + "/" + entry.path().filename().string() + " differs; ";
      }
      ++files;
    }
  }
  o.detail += std::to_string(preset_names().size()) + " presets, " + std::to_string(files) +
              " files compared byte for byte";
  return o;
}

// ---- 9: unit identities -------------------------------------------------------------

Outcome unit_identities() {
  bool ok = true;
  const std::vector<std::size_t> one{0, 2};
  ok &= global_mean_pool(one, Tensor::matrix(2, 1, {1, 3})).item() == 2.0;
  const std::vector<std::size_t> three{0, 3};
  ok &= global_mean_pool(three, Tensor::matrix(3, 2, {0.5, -1, 0.5, -1, 0.5, -1})).to_matrix() ==
        Matrix::from_rows({{0.5, -1}});
  const std::vector<std::size_t> two{0, 2, 5};
  ok &= global_mean_pool(two, Tensor::matrix(5, 1, {1, 3, 2, 4, 9})).to_matrix() ==
        Matrix::from_rows({{2}, {5}});

  LayerTelemetry t;
  t.name = "A1";
  t.telemetry.spike_count = 12;
  t.telemetry.opportunity_count = 10 * 4;
  const SpikingActivity act = spiking_activity(std::span(&t, 1));
  ok &= act.per_layer[0] == 0.3 && act.mean == 0.3;

  std::mt19937_64 rng(9);
  std::uniform_real_distribution<double> u(0.0, 5.0);
  for (int i = 0; i < 100; ++i) {
    LossConfig cfg;
    cfg.alpha_l = u(rng);
    cfg.beta_l = 0.0;
    const double lv = u(rng);
    const std::vector<Tensor> rates{Tensor::scalar(u(rng))};
    ok &= slf_loss(Tensor::scalar(lv), rates, cfg).item() == cfg.alpha_l * lv;
  }
  return {ok, "mean-pool examples, 12 spikes / (10 x 4) = 0.3, beta_L = 0 gives alpha_L * L_v"};
}

}  // namespace

int main() {
  configure_allocator();
  struct Criterion {
    int id;
    const char* name;
    std::function<Outcome()> run;
    double budget_seconds = 0.0;  // 0: unbounded
  };
  const std::vector<Criterion> criteria{
      {1, "gradient correctness", gradient_correctness, kGradientBudgetSeconds},
      {2, "surrogate exactness", surrogate_exactness},
      {3, "neuron hand traces", neuron_traces},
      {4, "degenerate-threshold equivalence", degenerate_equivalence},
      {5, "dense oracle and equivariance", dense_and_equivariance},
      {6, "trend replication", trend_replication, kTrendBudgetSeconds},
      {7, "spiking loss trend", slf_trend},
      {8, "determinism", determinism},
      {9, "pooling and loss identities", unit_identities},
  };
  int failed = 0;
  for (const Criterion& c : criteria) {
    const Clock clock;
    Outcome o;
    try {
      o = c.run();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    if (c.budget_seconds > 0.0 && clock.seconds() > c.budget_seconds) {
      o.pass = false;
      o.detail += " over the " + fmt(c.budget_seconds) + "s budget";
    }
    if (!o.pass) ++failed;
    std::printf("[%s] %d %s: %s (%.1fs)\n", o.pass ? "PASS" : "FAIL", c.id, c.name,
                o.detail.c_str(), clock.seconds());
    std::fflush(stdout);
  }
  std::printf("%d of %zu criteria passed\n", static_cast<int>(criteria.size()) - failed,
              criteria.size());
  return failed == 0 ? 0 : 1;
}
