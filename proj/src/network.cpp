// SPDX-License-Identifier: Apache-2.0
#include "hvsgnn/network.hpp"

#include <charconv>
#include <cmath>
#include <sstream>

#include "hvsgnn/error.hpp"
#include "hvsgnn/random.hpp"

namespace hvsgnn {
namespace {

constexpr LayerKind kAllKinds[] = {
    LayerKind::kLinear,    LayerKind::kGcn,          LayerKind::kSage,
    LayerKind::kPna,       LayerKind::kGru,          LayerKind::kBatchNorm,
    LayerKind::kGlobalMeanPool, LayerKind::kFlattenConcat, LayerKind::kActivation,
};

std::vector<std::string_view> split(std::string_view s, char sep) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const std::size_t pos = s.find(sep, start);
    out.push_back(s.substr(start, pos == std::string_view::npos ? pos : pos - start));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return out;
}

double parse_double(std::string_view s, std::string_view what) {
  double v = 0.0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size()) {
    throw SchemaError("invalid number \"" + std::string(s) + "\" for " + std::string(what));
  }
  return v;
}

std::size_t parse_count(std::string_view s, std::string_view what) {
  std::size_t v = 0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size()) {
    throw SchemaError("invalid count \"" + std::string(s) + "\" for " + std::string(what));
  }
  return v;
}

std::string format_double(double v) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, ptr);
}

ActivationMode parse_mode(std::string_view s) {
  if (s == "none") return ActivationMode::none();
  if (s == "lif") return ActivationMode::lif();
  const std::size_t colon = s.find(':');
  if (colon != std::string_view::npos) {
    const std::string_view type = s.substr(0, colon);
    const Activation act = parse_activation(s.substr(colon + 1));
    if (type == "artificial") return ActivationMode::artificial(act);
    if (type == "vsn") return ActivationMode::vsn(act);
  }
  throw SchemaError("unknown mode \"" + std::string(s) + "\"");
}

std::string format_mode(const ActivationMode& m) {
  switch (m.type) {
    case ActivationMode::Type::kNone: return "none";
    case ActivationMode::Type::kArtificial:
      return "artificial:" + std::string(activation_name(m.activation));
    case ActivationMode::Type::kLif: return "lif";
    case ActivationMode::Type::kVsn: return "vsn:" + std::string(activation_name(m.activation));
  }
  return "none";
}

}  // namespace

std::string_view layer_kind_name(LayerKind kind) {
  switch (kind) {
    case LayerKind::kLinear: return "linear";
    case LayerKind::kGcn: return "gcn";
    case LayerKind::kSage: return "sage";
    case LayerKind::kPna: return "pna";
    case LayerKind::kGru: return "gru";
    case LayerKind::kBatchNorm: return "batchnorm";
    case LayerKind::kGlobalMeanPool: return "global-mean-pool";
    case LayerKind::kFlattenConcat: return "flatten-concat";
    case LayerKind::kActivation: return "activation";
  }
  return "unknown";
}

// ---- Text format -----------------------------------------------------------------

NetworkSpec parse_network_spec(std::string_view text) {
  NetworkSpec spec;
  bool have_input = false;
  std::size_t line_no = 0;
  for (std::string_view raw : split(text, '\n')) {
    ++line_no;
    if (const auto hash = raw.find('#'); hash != std::string_view::npos) raw = raw.substr(0, hash);
    std::vector<std::string_view> tokens;
    for (std::string_view t : split(raw, ' ')) {
      while (!t.empty() && (t.back() == '\r' || t.back() == '\t')) t.remove_suffix(1);
      while (!t.empty() && t.front() == '\t') t.remove_prefix(1);
      if (!t.empty()) tokens.push_back(t);
    }
    if (tokens.empty()) continue;
    try {
      const std::string_view head = tokens[0];
      const std::size_t open = head.find('(');
      if (open == std::string_view::npos || head.back() != ')') {
        throw SchemaError("expected kind(width), got \"" + std::string(head) + "\"");
      }
      const std::string_view kind_name = head.substr(0, open);
      const std::size_t width =
          parse_count(head.substr(open + 1, head.size() - open - 2), "width");

      std::vector<std::pair<std::string_view, std::string_view>> attrs;
      for (std::size_t k = 1; k < tokens.size(); ++k) {
        const std::size_t eq = tokens[k].find('=');
        if (eq == std::string_view::npos) {
          throw SchemaError("expected key=value, got \"" + std::string(tokens[k]) + "\"");
        }
        attrs.emplace_back(tokens[k].substr(0, eq), tokens[k].substr(eq + 1));
      }

      if (kind_name == "input") {
        if (have_input || !spec.layers.empty()) {
          throw SchemaError("input(...) must appear once, before any layer");
        }
        have_input = true;
        spec.in_features = width;
        for (auto [key, value] : attrs) {
          if (key == "edge_dim") spec.edge_features = parse_count(value, key);
          else if (key == "field") spec.field_arity = parse_count(value, key);
          else throw SchemaError("unknown input attribute \"" + std::string(key) + "\"");
        }
        continue;
      }

      LayerSpec layer;
      bool known = false;
      for (LayerKind k : kAllKinds) {
        if (layer_kind_name(k) == kind_name) {
          layer.kind = k;
          known = true;
        }
      }
      if (!known) throw SchemaError("unknown layer kind \"" + std::string(kind_name) + "\"");
      layer.width = width;
      NeuronConfig neuron;
      bool neuron_touched = false;
      for (auto [key, value] : attrs) {
        if (key == "mode") {
          layer.mode = parse_mode(value);
        } else if (key == "name") {
          layer.name = std::string(value);
        } else if (key == "agg") {
          layer.aggregator = parse_aggregator(value);
        } else if (key == "aggs") {
          layer.aggregators.clear();
          for (auto a : split(value, ',')) layer.aggregators.push_back(parse_aggregator(a));
        } else if (key == "scalers") {
          layer.scaler_alphas.clear();
          for (auto a : split(value, ',')) layer.scaler_alphas.push_back(parse_double(a, key));
        } else if (key == "n_max") {
          layer.n_max = parse_count(value, key);
        } else if (key == "field") {
          layer.field_arity = parse_count(value, key);
        } else if (key == "beta") {
          neuron.beta = parse_double(value, key);
          neuron_touched = true;
        } else if (key == "threshold") {
          neuron.threshold = parse_double(value, key);
          neuron_touched = true;
        } else if (key == "slope") {
          neuron.surrogate_slope = parse_double(value, key);
          neuron_touched = true;
        } else if (key == "trainable") {
          neuron.trainable_beta = false;
          neuron.trainable_threshold = false;
          for (auto t : split(value, ',')) {
            if (t == "beta") neuron.trainable_beta = true;
            else if (t == "threshold") neuron.trainable_threshold = true;
            else if (t != "none") throw SchemaError("unknown trainable flag \"" + std::string(t) + "\"");
          }
          neuron_touched = true;
        } else {
          throw SchemaError("unknown attribute \"" + std::string(key) + "\"");
        }
      }
      if (neuron_touched && !layer.mode.spiking()) {
        throw SchemaError("neuron attributes need mode=lif or mode=vsn:ACT");
      }
      if (layer.mode.spiking()) {
        neuron.inner_activation = layer.mode.activation;
        layer.mode.neuron = neuron;
      }
      spec.layers.push_back(std::move(layer));
    } catch (const Error& e) {
      throw SchemaError("network spec line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  if (!have_input) throw SchemaError("network spec is missing its input(...) line");
  validate_network_spec(spec);
  return spec;
}

std::string format_network_spec(const NetworkSpec& spec) {
  std::ostringstream out;
  out << "input(" << spec.in_features << ")";
  if (spec.edge_features) out << " edge_dim=" << spec.edge_features;
  if (spec.field_arity) out << " field=" << spec.field_arity;
  out << '\n';
  const LayerSpec defaults;
  for (const LayerSpec& l : spec.layers) {
    out << layer_kind_name(l.kind) << '(' << l.width << ')';
    if (l.mode.type != ActivationMode::Type::kNone) out << " mode=" << format_mode(l.mode);
    if (!l.name.empty()) out << " name=" << l.name;
    if (l.kind == LayerKind::kSage) out << " agg=" << aggregator_name(l.aggregator);
    if (l.kind == LayerKind::kPna) {
      out << " aggs=";
      for (std::size_t k = 0; k < l.aggregators.size(); ++k) {
        out << (k ? "," : "") << aggregator_name(l.aggregators[k]);
      }
      out << " scalers=";
      for (std::size_t k = 0; k < l.scaler_alphas.size(); ++k) {
        out << (k ? "," : "") << format_double(l.scaler_alphas[k]);
      }
    }
    if (l.kind == LayerKind::kFlattenConcat) {
      out << " n_max=" << l.n_max << " field=" << l.field_arity;
    }
    if (l.mode.spiking()) {
      const NeuronConfig& n = l.mode.neuron;
      out << " beta=" << format_double(n.beta) << " threshold=" << format_double(n.threshold)
          << " slope=" << format_double(n.surrogate_slope) << " trainable=";
      if (n.trainable_beta && n.trainable_threshold) out << "beta,threshold";
      else if (n.trainable_beta) out << "beta";
      else if (n.trainable_threshold) out << "threshold";
      else out << "none";
    }
    out << '\n';
  }
  return out.str();
}

// ---- Validation --------------------------------------------------------------------

void validate_network_spec(const NetworkSpec& spec) {
  if (spec.in_features < 1) throw SchemaError("input width must be at least 1");
  if (spec.layers.empty()) throw SchemaError("network has no layers");
  std::size_t width = spec.in_features;
  bool node_level = true;
  std::optional<std::size_t> gru_width;
  for (std::size_t i = 0; i < spec.layers.size(); ++i) {
    const LayerSpec& l = spec.layers[i];
    const std::string where = "layer " + std::to_string(i) + " (" +
                              std::string(layer_kind_name(l.kind)) + "): ";
    const auto fail = [&](const std::string& msg) { throw SchemaError(where + msg); };
    if (l.width < 1) fail("width must be at least 1");
    const auto need_nodes = [&] {
      if (!node_level) fail("needs node-level input but the graph was already pooled");
    };
    const auto same_width = [&] {
      if (l.width != width) {
        fail("width " + std::to_string(l.width) + " differs from input width " +
             std::to_string(width));
      }
    };
    switch (l.kind) {
      case LayerKind::kLinear: break;
      case LayerKind::kGcn:
      case LayerKind::kSage: need_nodes(); break;
      case LayerKind::kPna:
        need_nodes();
        if (l.aggregators.empty()) fail("pna requires a nonempty aggregator list");
        if (l.scaler_alphas.empty()) fail("pna requires at least one scaler");
        for (double a : l.scaler_alphas) {
          if (a < -1.0 || a > 1.0) fail("scaler alpha must lie in [-1, 1]");
        }
        break;
      case LayerKind::kGru:
        need_nodes();
        if (gru_width && *gru_width != l.width) fail("all gru layers share one recurrent state width");
        gru_width = l.width;
        break;
      case LayerKind::kBatchNorm: same_width(); break;
      case LayerKind::kActivation:
        same_width();
        if (l.mode.type == ActivationMode::Type::kNone) fail("activation layer needs a mode");
        break;
      case LayerKind::kGlobalMeanPool:
        need_nodes();
        same_width();
        node_level = false;
        break;
      case LayerKind::kFlattenConcat:
        need_nodes();
        if (l.n_max < 1) fail("n_max must be at least 1");
        if (l.field_arity != spec.field_arity) {
          fail("field arity " + std::to_string(l.field_arity) + " differs from input field " +
               std::to_string(spec.field_arity));
        }
        if (l.width != l.n_max * width + l.field_arity) {
          fail("width must equal n_max * " + std::to_string(width) + " + field = " +
               std::to_string(l.n_max * width + l.field_arity));
        }
        node_level = false;
        break;
    }
    if (l.mode.spiking()) {
      if (i + 1 == spec.layers.size()) fail("spiking neurons must sit between layers, not at the output");
      try {
        validate_neuron_config(l.mode.neuron, l.mode.type == ActivationMode::Type::kLif
                                                  ? NeuronKind::kLif
                                                  : NeuronKind::kVsn);
      } catch (const ConfigError& e) {
        fail(e.what());
      }
    }
    width = l.width;
  }
}

// ---- Presets -------------------------------------------------------------------------

std::vector<std::string> preset_names() {
  std::vector<std::string> out;
  for (const char* ex : {"ex1", "ex2", "ex3"}) {
    for (const char* v : {"-agnn", "-v1", "-v2", "-v1-lif", "-v2-lif"}) {
      out.push_back(std::string(ex) + v);
    }
  }
  return out;
}

NetworkSpec preset_spec(std::string_view name, const PresetOptions& o) {
  const std::string full(name);
  const std::size_t dash = full.find('-');
  if (dash == std::string::npos) throw ConfigError("unknown preset \"" + full + "\"");
  const std::string family = full.substr(0, dash);
  const std::string variant = full.substr(dash + 1);
  int version = 0;
  bool lif = false;
  if (variant == "agnn") version = 0;
  else if (variant == "v1") version = 1;
  else if (variant == "v2") version = 2;
  else if (variant == "v1-lif") version = 1, lif = true;
  else if (variant == "v2-lif") version = 2, lif = true;
  else throw ConfigError("unknown preset \"" + full + "\"");

  // Spiking replacement for an activation slot; inner is the VSN activation.
  const auto spiking = [&](Activation inner) {
    return lif ? ActivationMode::lif(o.neuron) : ActivationMode::vsn(inner, o.neuron);
  };
  const auto slot = [&](bool spike, Activation baseline) {
    return spike ? spiking(Activation::kRelu) : ActivationMode::artificial(baseline);
  };
  const auto layer = [](LayerKind kind, std::size_t width, ActivationMode mode = {},
                        std::string label = {}) {
    LayerSpec l;
    l.kind = kind;
    l.width = width;
    l.mode = mode;
    l.name = std::move(label);
    return l;
  };

  NetworkSpec spec;
  spec.in_features = o.in_features;
  spec.edge_features = o.edge_features;
  auto& L = spec.layers;
  if (family == "ex1") {
    // L(32) A1 SC(64) A2 SC(64) A3 GMP L(64) A4 L(16) A5 L(1)
    const auto a = [&](int k) {
      const bool spike = version == 1 ? k <= 3 : version == 2;
      return slot(spike, Activation::kRelu);
    };
    L.push_back(layer(LayerKind::kLinear, 32));
    L.push_back(layer(LayerKind::kActivation, 32, a(1), "A1"));
    L.push_back(layer(LayerKind::kSage, 64, {}, "SC1"));
    L.push_back(layer(LayerKind::kActivation, 64, a(2), "A2"));
    L.push_back(layer(LayerKind::kSage, 64, {}, "SC2"));
    L.push_back(layer(LayerKind::kActivation, 64, a(3), "A3"));
    L.push_back(layer(LayerKind::kGlobalMeanPool, 64));
    L.push_back(layer(LayerKind::kLinear, 64));
    L.push_back(layer(LayerKind::kActivation, 64, a(4), "A4"));
    L.push_back(layer(LayerKind::kLinear, 16));
    L.push_back(layer(LayerKind::kActivation, 16, a(5), "A5"));
    L.push_back(layer(LayerKind::kLinear, 1));
  } else if (family == "ex2") {
    // MP1 L(40) A1 MP2 L(3) A2 [F+C] L(1024) A3 L(128) A4 L(1)
    spec.field_arity = o.field_arity;
    const auto a = [&](int k, Activation baseline) {
      const bool spike = version == 1 ? k >= 3 : version == 2;
      return slot(spike, baseline);
    };
    L.push_back(layer(LayerKind::kGcn, o.in_features, {}, "MP1"));
    L.push_back(layer(LayerKind::kLinear, 40));
    L.push_back(layer(LayerKind::kActivation, 40, a(1, Activation::kSigmoid), "A1"));
    L.push_back(layer(LayerKind::kGcn, 40, {}, "MP2"));
    L.push_back(layer(LayerKind::kLinear, 3));
    L.push_back(layer(LayerKind::kActivation, 3, a(2, Activation::kSigmoid), "A2"));
    LayerSpec fc = layer(LayerKind::kFlattenConcat, o.n_max * 3 + o.field_arity);
    fc.n_max = o.n_max;
    fc.field_arity = o.field_arity;
    L.push_back(fc);
    L.push_back(layer(LayerKind::kLinear, 1024));
    L.push_back(layer(LayerKind::kActivation, 1024, a(3, Activation::kRelu), "A3"));
    L.push_back(layer(LayerKind::kLinear, 128));
    L.push_back(layer(LayerKind::kActivation, 128, a(4, Activation::kRelu), "A4"));
    L.push_back(layer(LayerKind::kLinear, 1));
  } else if (family == "ex3") {
    // [PNA1(50) GRU(50) BatchNorm A1] x blocks, PNA2(1)
    if (o.blocks < 1) throw ConfigError("ex3 presets need at least one block");
    for (std::size_t b = 1; b <= o.blocks; ++b) {
      const std::string tag = std::to_string(b);
      const ActivationMode wrap =
          version == 1 ? spiking(Activation::kIdentity) : ActivationMode::none();
      L.push_back(layer(LayerKind::kPna, 50, wrap, "PNA1." + tag));
      L.push_back(layer(LayerKind::kGru, 50, {}, "GRU." + tag));
      L.push_back(layer(LayerKind::kBatchNorm, 50, {}, "BN." + tag));
      L.push_back(layer(LayerKind::kActivation, 50, slot(version != 0, Activation::kRelu),
                        "A1." + tag));
    }
    L.push_back(layer(LayerKind::kPna, 1, {}, "PNA2"));
  } else {
    throw ConfigError("unknown preset \"" + full + "\"");
  }
  validate_network_spec(spec);
  return spec;
}

// ---- Network -------------------------------------------------------------------------

bool Network::has_spiking_layers() const {
  for (const LayerSpec& l : spec_.layers) {
    if (l.mode.spiking()) return true;
  }
  return false;
}

std::vector<std::string> Network::spiking_layer_names() const {
  std::vector<std::string> out;
  for (std::size_t i = 0; i < spec_.layers.size(); ++i) {
    const LayerSpec& l = spec_.layers[i];
    if (l.mode.spiking()) out.push_back(l.name.empty() ? "layer" + std::to_string(i) : l.name);
  }
  return out;
}

bool Network::uses_degree_scalers() const {
  for (const LayerSpec& l : spec_.layers) {
    if (l.kind != LayerKind::kPna) continue;
    for (double a : l.scaler_alphas) {
      if (a != 0.0) return true;
    }
  }
  return false;
}

double Network::degree_normalization() const {
  if (!delta_) {
    if (uses_degree_scalers()) throw ConfigError("degree normalization has not been set");
    return 1.0;
  }
  return *delta_;
}

void Network::set_degree_normalization(double delta) {
  if (!(delta > 0.0) || !std::isfinite(delta)) {
    throw ConfigError("degree normalization must be positive and finite");
  }
  delta_ = delta;
}

ForwardResult Network::forward(const GraphBatch& batch, std::size_t sts, Mode mode) {
  const Graph& g = batch.graph;
  if (g.feature_dim() != spec_.in_features) {
    throw ShapeError("batch has " + std::to_string(g.feature_dim()) +
                     " node features, network expects " + std::to_string(spec_.in_features));
  }
  if (g.edge_feature_dim() != spec_.edge_features) {
    throw ShapeError("batch has " + std::to_string(g.edge_feature_dim()) +
                     " edge features, network expects " + std::to_string(spec_.edge_features));
  }
  if (batch.fields.cols != spec_.field_arity) {
    throw ShapeError("batch has field arity " + std::to_string(batch.fields.cols) +
                     ", network expects " + std::to_string(spec_.field_arity));
  }
  const bool spiking = has_spiking_layers();
  const std::size_t steps = spiking ? sts : 1;
  if (steps < 1) throw ConfigError("spike time step count must be at least 1");

  const Tensor input = Tensor::from_matrix(g.node_features());
  const Tensor field = Tensor::from_matrix(batch.fields);
  const double delta = uses_degree_scalers() ? degree_normalization() : 1.0;

  std::vector<NeuronState> states(layers_.size());
  std::vector<SpikeTelemetry> telemetry(layers_.size());
  Tensor sum;
  for (std::size_t t = 0; t < steps; ++t) {
    Tensor h = input;
    std::optional<Tensor> recurrent;
    for (std::size_t i = 0; i < layers_.size(); ++i) {
      const LayerSpec& ls = spec_.layers[i];
      Layer& layer = layers_[i];
      switch (ls.kind) {
        case LayerKind::kLinear:
          h = linear_forward(h, std::get<LinearParams>(layer.params));
          break;
        case LayerKind::kGcn:
          h = gcn_forward(g, h, std::get<GcnParams>(layer.params));
          break;
        case LayerKind::kSage:
          h = sage_forward(g, h, std::get<SageParams>(layer.params), ls.aggregator);
          break;
        case LayerKind::kPna: {
          PnaConfig cfg{ls.aggregators, ScalerConfig{delta, ls.scaler_alphas}};
          h = pna_forward(g, h, std::get<PnaParams>(layer.params), cfg);
          break;
        }
        case LayerKind::kGru: {
          if (!recurrent) recurrent = Tensor::zeros({h.rows(), ls.width});
          h = gru_cell_forward(*recurrent, h, std::get<GruParams>(layer.params));
          recurrent = h;
          break;
        }
        case LayerKind::kBatchNorm:
          h = batch_norm_forward(h, std::get<BatchNormParams>(layer.params), mode);
          break;
        case LayerKind::kGlobalMeanPool:
          h = global_mean_pool(batch.offsets, h);
          break;
        case LayerKind::kFlattenConcat:
          h = flatten_concat(batch.offsets, h, ls.n_max, field);
          break;
        case LayerKind::kActivation:
          break;
      }
      switch (ls.mode.type) {
        case ActivationMode::Type::kNone: break;
        case ActivationMode::Type::kArtificial:
          h = artificial_activate(h, ls.mode.activation);
          break;
        case ActivationMode::Type::kLif:
          h = lif_step(states[i], h, ls.mode.neuron, *layer.neuron, telemetry[i]);
          break;
        case ActivationMode::Type::kVsn:
          h = vsn_step(states[i], h, ls.mode.neuron, *layer.neuron, telemetry[i]);
          break;
      }
    }
    sum = t == 0 ? h : add(sum, h);
  }

  ForwardResult result;
  result.output = steps == 1 ? sum : scalar_mul(sum, 1.0 / static_cast<double>(steps));
  const auto names = spiking_layer_names();
  std::size_t k = 0;
  for (std::size_t i = 0; i < layers_.size(); ++i) {
    if (!spec_.layers[i].mode.spiking()) continue;
    result.telemetry.push_back({names[k++], i, std::move(telemetry[i])});
  }
  return result;
}

Network::State Network::state() const {
  State s;
  for (const Parameter& p : parameters_) {
    s.values.emplace_back(p.value.values().begin(), p.value.values().end());
  }
  for (const Layer& l : layers_) {
    if (const auto* bn = std::get_if<BatchNormParams>(&l.params)) {
      s.values.push_back(bn->running_mean);
      s.values.push_back(bn->running_var);
    }
  }
  return s;
}

void Network::load_state(const State& s) {
  std::size_t k = 0;
  const auto next = [&]() -> const std::vector<double>& {
    if (k >= s.values.size()) throw ShapeError("network state has too few entries");
    return s.values[k++];
  };
  for (Parameter& p : parameters_) {
    const auto& v = next();
    auto dst = p.value.mutable_values();
    if (v.size() != dst.size()) throw ShapeError("network state entry size mismatch for " + p.name);
    std::copy(v.begin(), v.end(), dst.begin());
  }
  for (Layer& l : layers_) {
    if (auto* bn = std::get_if<BatchNormParams>(&l.params)) {
      bn->running_mean = next();
      bn->running_var = next();
    }
  }
  if (k != s.values.size()) throw ShapeError("network state has too many entries");
}

Network assemble_network(const NetworkSpec& spec, std::uint64_t seed) {
  validate_network_spec(spec);
  Network net;
  net.spec_ = spec;
  Rng rng(seed);

  const auto uniform = [&](const std::string& name, ParamRole role, Shape shape,
                           std::size_t fan_in) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
    std::vector<double> v(shape_size(shape));
    for (double& x : v) x = rng.uniform(-bound, bound);
    Tensor t(std::move(shape), std::move(v), true);
    net.parameters_.push_back({name, t, role});
    return t;
  };
  const auto constant = [&](const std::string& name, ParamRole role, std::size_t n, double v) {
    Tensor t({n}, std::vector<double>(n, v), true);
    net.parameters_.push_back({name, t, role});
    return t;
  };

  std::size_t width = spec.in_features;
  for (std::size_t i = 0; i < spec.layers.size(); ++i) {
    const LayerSpec& l = spec.layers[i];
    const std::string prefix = "layer" + std::to_string(i) + "." +
                               std::string(layer_kind_name(l.kind)) + ".";
    Network::Layer layer;
    const std::size_t out = l.width;
    switch (l.kind) {
      case LayerKind::kLinear:
        layer.params = LinearParams{uniform(prefix + "weight", ParamRole::kWeight, {width, out}, width),
                                    uniform(prefix + "bias", ParamRole::kBias, {out}, width)};
        break;
      case LayerKind::kGcn:
        layer.params = GcnParams{uniform(prefix + "weight", ParamRole::kWeight, {width, out}, width)};
        break;
      case LayerKind::kSage:
        layer.params = SageParams{
            uniform(prefix + "self_weight", ParamRole::kWeight, {width, out}, width),
            uniform(prefix + "neighbor_weight", ParamRole::kWeight, {width, out}, width)};
        break;
      case LayerKind::kPna: {
        const std::size_t msg_in = 2 * width + spec.edge_features;
        const std::size_t upd_in = width + l.scaler_alphas.size() * l.aggregators.size() * out;
        PnaParams p;
        p.message = {uniform(prefix + "message.weight", ParamRole::kWeight, {msg_in, out}, msg_in),
                     uniform(prefix + "message.bias", ParamRole::kBias, {out}, msg_in)};
        p.update = {uniform(prefix + "update.weight", ParamRole::kWeight, {upd_in, out}, upd_in),
                    uniform(prefix + "update.bias", ParamRole::kBias, {out}, upd_in)};
        layer.params = std::move(p);
        break;
      }
      case LayerKind::kGru: {
        GruParams p;
        const auto gate = [&](const char* g, Tensor& w, Tensor& u, Tensor& b) {
          w = uniform(prefix + "w_" + g, ParamRole::kWeight, {width, out}, width);
          u = uniform(prefix + "u_" + g, ParamRole::kWeight, {out, out}, out);
          b = uniform(prefix + "b_" + g, ParamRole::kBias, {out}, out);
        };
        gate("update", p.w_update, p.u_update, p.b_update);
        gate("reset", p.w_reset, p.u_reset, p.b_reset);
        gate("candidate", p.w_candidate, p.u_candidate, p.b_candidate);
        layer.params = std::move(p);
        break;
      }
      case LayerKind::kBatchNorm: {
        BatchNormParams p;
        p.gamma = constant(prefix + "scale", ParamRole::kScale, out, 1.0);
        p.beta = constant(prefix + "shift", ParamRole::kShift, out, 0.0);
        p.running_mean.assign(out, 0.0);
        p.running_var.assign(out, 1.0);
        layer.params = std::move(p);
        break;
      }
      case LayerKind::kGlobalMeanPool:
      case LayerKind::kFlattenConcat:
      case LayerKind::kActivation:
        break;
    }
    if (l.mode.spiking()) {
      NeuronParams np = make_neuron_params(l.mode.neuron);
      net.parameters_.push_back({prefix + "neuron.beta", np.beta, ParamRole::kLeakage});
      net.parameters_.push_back({prefix + "neuron.threshold", np.threshold, ParamRole::kThreshold});
      layer.neuron = np;
    }
    net.layers_.push_back(std::move(layer));
    width = out;
    if (l.kind == LayerKind::kGlobalMeanPool || l.kind == LayerKind::kFlattenConcat) {
      net.node_level_output_ = false;
    }
  }
  return net;
}

}  // namespace hvsgnn
