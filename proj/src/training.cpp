// SPDX-License-Identifier: Apache-2.0
#include "hvsgnn/training.hpp"

#include <algorithm>
#include <charconv>
#include <chrono>
#include <cmath>
#include <numeric>
#include <sstream>

#include <json.hpp>

#include "hvsgnn/error.hpp"
#include "hvsgnn/random.hpp"

namespace hvsgnn {
namespace {

// Targets matching the network output for one batch.
Tensor batch_targets(const Network& net, const GraphBatch& batch) {
  if (net.node_level_output()) {
    const auto& t = batch.graph.node_target();
    if (!t) throw SchemaError("node-level network needs node targets (y_node)");
    if (t->cols != net.output_width()) {
      throw ShapeError("node targets have " + std::to_string(t->cols) +
                       " columns, network outputs " + std::to_string(net.output_width()));
    }
    return Tensor::from_matrix(*t);
  }
  if (!batch.graph_targets) throw SchemaError("graph-level network needs graph targets (y_graph)");
  if (batch.graph_targets->cols != net.output_width()) {
    throw ShapeError("graph targets have " + std::to_string(batch.graph_targets->cols) +
                     " columns, network outputs " + std::to_string(net.output_width()));
  }
  return Tensor::from_matrix(*batch.graph_targets);
}


void ensure_degree_normalization(Network& net, std::span<const Graph> train) {
  if (net.uses_degree_scalers() && !net.degree_normalization_set()) {
    net.set_degree_normalization(degree_normalization(train));
  }
}

}  // namespace

void validate_loss_config(const LossConfig& cfg) {
  if (!(cfg.alpha_l > 0.0) || !std::isfinite(cfg.alpha_l)) {
    throw ConfigError("alpha_l must be positive");
  }
  if (!(cfg.beta_l >= 0.0) || !std::isfinite(cfg.beta_l)) {
    throw ConfigError("beta_l must be non-negative");
  }
}

void validate_optim_config(const OptimConfig& cfg) {
  if (!(cfg.lr >= 0.0) || !std::isfinite(cfg.lr)) throw ConfigError("learning rate must be non-negative");
  if (cfg.epochs < 1) throw ConfigError("epochs must be at least 1");
  if (cfg.batch_size < 1) throw ConfigError("batch size must be at least 1");
  if (!(cfg.beta1 >= 0.0 && cfg.beta1 < 1.0) || !(cfg.beta2 >= 0.0 && cfg.beta2 < 1.0)) {
    throw ConfigError("ADAM moment decay rates must lie in [0, 1)");
  }
  if (!(cfg.eps > 0.0)) throw ConfigError("ADAM epsilon must be positive");
}

Tensor mse_loss(const Tensor& pred, const Tensor& target) {
  if (pred.shape() != target.shape()) {
    throw ShapeError("mse_loss: prediction and target shapes differ");
  }
  const Tensor diff = sub(pred, target);
  return reduce_mean(mul(diff, diff));
}

SpikingActivity spiking_activity(std::span<const LayerTelemetry> telemetry) {
  if (telemetry.empty()) throw ConfigError("spiking activity needs at least one spiking layer");
  SpikingActivity out;
  double sum = 0.0;
  for (const LayerTelemetry& t : telemetry) {
    out.names.push_back(t.name);
    out.per_layer.push_back(t.telemetry.rate());
    sum += out.per_layer.back();
  }
  out.mean = sum / static_cast<double>(telemetry.size());
  return out;
}

Tensor slf_loss(const Tensor& lv, std::span<const Tensor> soft_rates, const LossConfig& cfg) {
  validate_loss_config(cfg);
  if (cfg.beta_l == 0.0) return scalar_mul(lv, cfg.alpha_l);
  if (soft_rates.empty()) throw ConfigError("beta_l > 0 needs at least one spiking layer");
  Tensor total = soft_rates[0];
  for (std::size_t i = 1; i < soft_rates.size(); ++i) total = add(total, soft_rates[i]);
  const Tensor mean_rate = scalar_mul(total, 1.0 / static_cast<double>(soft_rates.size()));
  return add(scalar_mul(lv, cfg.alpha_l), scalar_mul(mean_rate, cfg.beta_l));
}

AdamState make_adam_state(std::span<const Parameter> params) {
  AdamState s;
  for (const Parameter& p : params) {
    s.m.emplace_back(p.value.size(), 0.0);
    s.v.emplace_back(p.value.size(), 0.0);
  }
  return s;
}

void adam_step(std::span<Parameter> params, std::span<const std::vector<double>> grads,
               AdamState& state, const OptimConfig& cfg) {
  if (grads.size() != params.size() || state.m.size() != params.size() ||
      state.v.size() != params.size()) {
    throw ShapeError("adam_step: parameter, gradient and state counts differ");
  }
  ++state.step;
  const double t = static_cast<double>(state.step);
  const double c1 = 1.0 - std::pow(cfg.beta1, t);
  const double c2 = 1.0 - std::pow(cfg.beta2, t);
  for (std::size_t i = 0; i < params.size(); ++i) {
    Parameter& p = params[i];
    auto values = p.value.mutable_values();
    if (grads[i].size() != values.size() || state.m[i].size() != values.size() ||
        state.v[i].size() != values.size()) {
      throw ShapeError("adam_step: size mismatch for " + p.name);
    }
    if (!p.trainable()) continue;
    auto& m = state.m[i];
    auto& v = state.v[i];
    for (std::size_t k = 0; k < values.size(); ++k) {
      const double g = grads[i][k];
      m[k] = cfg.beta1 * m[k] + (1.0 - cfg.beta1) * g;
      v[k] = cfg.beta2 * v[k] + (1.0 - cfg.beta2) * g * g;
      const double m_hat = m[k] / c1;
      const double v_hat = v[k] / c2;
      values[k] -= cfg.lr * m_hat / (std::sqrt(v_hat) + cfg.eps);
    }
    if (p.role == ParamRole::kLeakage) {
      for (double& x : values) x = std::clamp(x, 0.0, 1.0);
    }
  }
}

EvalResult evaluate(Network& net, std::span<const Graph> graphs, std::size_t sts,
                    std::size_t batch_size) {
  if (graphs.empty()) throw ConfigError("cannot evaluate an empty dataset");
  if (batch_size < 1) throw ConfigError("batch size must be at least 1");
  EvalResult result;
  std::vector<LayerTelemetry> telemetry;
  double sq_sum = 0.0;
  for (std::size_t start = 0; start < graphs.size(); start += batch_size) {
    const std::size_t end = std::min(graphs.size(), start + batch_size);
    const GraphBatch batch = batch_graphs(graphs.subspan(start, end - start));
    const Tensor target = batch_targets(net, batch);
    const ForwardResult fr = net.forward(batch, sts, Mode::kEval);
    const auto pred = fr.output.values();
    const auto truth = target.values();
    const std::size_t width = target.cols();
    for (std::size_t k = 0; k < pred.size(); ++k) {
      const double d = pred[k] - truth[k];
      sq_sum += d * d;
      Prediction p;
      const std::size_t row = k / width;
      p.output = k % width;
      if (net.node_level_output()) {
        const auto it = std::upper_bound(batch.offsets.begin(), batch.offsets.end(), row);
        const std::size_t s = static_cast<std::size_t>(it - batch.offsets.begin()) - 1;
        p.sample = start + s;
        p.node = row - batch.offsets[s];
      } else {
        p.sample = start + row;
      }
      p.truth = truth[k];
      p.predicted = pred[k];
      result.predictions.push_back(p);
    }
    result.count += pred.size();
    if (telemetry.empty()) {
      telemetry = fr.telemetry;
    } else {
      for (std::size_t i = 0; i < telemetry.size(); ++i) {
        telemetry[i].telemetry.merge(fr.telemetry[i].telemetry);
      }
    }
  }
  result.mse = sq_sum / static_cast<double>(result.count);
  if (!telemetry.empty()) result.spiking = spiking_activity(telemetry);
  return result;
}

TrainReport train(Network& net, const DatasetSplits& splits, const LossConfig& loss,
                  const OptimConfig& optim, std::size_t sts) {
  validate_loss_config(loss);
  validate_optim_config(optim);
  if (splits.train.empty()) throw ConfigError("training split is empty");
  if (splits.val.empty()) throw ConfigError("validation split is empty");
  if (sts < 1) throw ConfigError("spike time step count must be at least 1");
  if (loss.beta_l > 0.0 && !net.has_spiking_layers()) {
    throw ConfigError("beta_l > 0 needs at least one spiking layer");
  }
  const auto t0 = std::chrono::steady_clock::now();
  ensure_degree_normalization(net, splits.train);

  TrainReport report;
  report.loss = loss;
  report.optim = optim;
  report.sts = net.has_spiking_layers() ? sts : 1;
  report.network = format_network_spec(net.spec());
  report.spiking_layers = net.spiking_layer_names();

  auto& params = net.parameters();
  AdamState adam = make_adam_state(params);
  Rng rng(optim.seed);
  std::vector<std::size_t> order(splits.train.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::vector<Graph> members;
  std::optional<Network::State> best;

  for (std::size_t epoch = 1; epoch <= optim.epochs; ++epoch) {
    for (std::size_t i = order.size(); i > 1; --i) {
      std::swap(order[i - 1], order[rng.uniform_int(0, i - 1)]);
    }
    double sq_sum = 0.0;
    std::size_t count = 0;
    for (std::size_t start = 0; start < order.size(); start += optim.batch_size) {
      const std::size_t end = std::min(order.size(), start + optim.batch_size);
      members.clear();
      for (std::size_t k = start; k < end; ++k) members.push_back(splits.train[order[k]]);
      const GraphBatch batch = batch_graphs(members);
      const Tensor target = batch_targets(net, batch);

      Tape tape;
      Tape::Scope scope(tape);
      const ForwardResult fr = net.forward(batch, sts, Mode::kTrain);
      const Tensor lv = mse_loss(fr.output, target);
      std::vector<Tensor> soft;
      for (const LayerTelemetry& t : fr.telemetry) soft.push_back(t.telemetry.soft_rate());
      const Tensor objective = slf_loss(lv, soft, loss);
      if (!std::isfinite(objective.item())) {
        throw DivergenceError("non-finite loss at epoch " + std::to_string(epoch) +
                              ", batch starting at " + std::to_string(start));
      }
      const GradientMap grads = backward(tape, objective);
      std::vector<std::vector<double>> g;
      g.reserve(params.size());
      for (const Parameter& p : params) g.push_back(grads.at(p.value));
      adam_step(params, g, adam, optim);

      sq_sum += lv.item() * static_cast<double>(target.size());
      count += target.size();
    }

    EpochRecord rec;
    rec.epoch = epoch;
    rec.train_loss = sq_sum / static_cast<double>(count);
    const EvalResult val = evaluate(net, splits.val, sts);
    if (!std::isfinite(val.mse)) {
      throw DivergenceError("non-finite validation loss at epoch " + std::to_string(epoch));
    }
    rec.val_loss = val.mse;
    if (val.spiking) rec.spiking = val.spiking->per_layer;
    if (!best || val.mse < report.best_val_loss) {
      best = net.state();
      report.best_epoch = epoch;
      report.best_val_loss = val.mse;
    }
    report.epochs.push_back(std::move(rec));
  }

  net.load_state(*best);
  if (!splits.test.empty()) report.test = evaluate(net, splits.test, sts);
  report.seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return report;
}

std::string format_number(double v) {
  if (std::isnan(v)) return "nan";
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, ptr);
}

std::string report_to_json(const TrainReport& r, bool include_timing) {
  using nlohmann::ordered_json;
  ordered_json j;
  j["config"] = {
      {"alpha_l", r.loss.alpha_l}, {"beta_l", r.loss.beta_l},   {"lr", r.optim.lr},
      {"adam_beta1", r.optim.beta1}, {"adam_beta2", r.optim.beta2}, {"adam_eps", r.optim.eps},
      {"epochs", r.optim.epochs},    {"batch_size", r.optim.batch_size},
      {"seed", r.optim.seed},        {"sts", r.sts},
  };
  j["network"] = r.network;
  j["spiking_layers"] = r.spiking_layers;
  ordered_json epochs = ordered_json::array();
  for (const EpochRecord& e : r.epochs) {
    epochs.push_back({{"epoch", e.epoch},
                      {"train_loss", e.train_loss},
                      {"val_loss", e.val_loss},
                      {"spiking", e.spiking}});
  }
  j["epochs"] = std::move(epochs);
  j["best_epoch"] = r.best_epoch;
  j["best_val_loss"] = r.best_val_loss;
  if (r.test) {
    ordered_json t = {{"mse", r.test->mse}, {"count", r.test->count}};
    if (r.test->spiking) {
      t["spiking"] = r.test->spiking->per_layer;
      t["spiking_mean"] = r.test->spiking->mean;
    }
    j["test"] = std::move(t);
  } else {
    j["test"] = nullptr;
  }
  if (include_timing) j["seconds"] = r.seconds;
  return j.dump(2) + "\n";
}

std::string epochs_csv(const TrainReport& r) {
  std::ostringstream out;
  out << "epoch,train_loss,val_loss";
  for (const std::string& name : r.spiking_layers) out << ",S_" << name;
  out << '\n';
  for (const EpochRecord& e : r.epochs) {
    out << e.epoch << ',' << format_number(e.train_loss) << ',' << format_number(e.val_loss);
    for (double s : e.spiking) out << ',' << format_number(s);
    out << '\n';
  }
  return out.str();
}

std::string predictions_csv(const EvalResult& result) {
  std::ostringstream out;
  out << "sample,node,output,truth,prediction\n";
  for (const Prediction& p : result.predictions) {
    out << p.sample << ',' << p.node << ',' << p.output << ',' << format_number(p.truth) << ','
        << format_number(p.predicted) << '\n';
  }
  return out.str();
}

std::string spiking_csv(const TrainReport& r) {
  std::ostringstream out;
  out << "epoch,layer,S\n";
  for (const EpochRecord& e : r.epochs) {
    for (std::size_t i = 0; i < e.spiking.size(); ++i) {
      out << e.epoch << ',' << r.spiking_layers[i] << ',' << format_number(e.spiking[i]) << '\n';
    }
  }
  if (r.test && r.test->spiking) {
    for (std::size_t i = 0; i < r.test->spiking->per_layer.size(); ++i) {
      out << "test," << r.spiking_layers[i] << ','
          << format_number(r.test->spiking->per_layer[i]) << '\n';
    }
  }
  return out.str();
}

}  // namespace hvsgnn
