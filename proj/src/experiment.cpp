// SPDX-License-Identifier: Apache-2.0
#include "hvsgnn/experiment.hpp"

#include <algorithm>
#include <fstream>
#include <limits>
#include <map>
#include <set>
#include <sstream>

#include <json.hpp>

#include "hvsgnn/error.hpp"

namespace hvsgnn {
namespace {

namespace fs = std::filesystem;
using nlohmann::json;

std::string read_text(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot read " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ConfigError("cannot write " + path.string());
  out << text;
  if (!out) throw ConfigError("failed writing " + path.string());
}

template <typename T>
T get_as(const json& v, const std::string& key) {
  try {
    return v.get<T>();
  } catch (const json::exception&) {
    throw ConfigError("config key \"" + key + "\" has the wrong type");
  }
}

std::string fingerprint_hex(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

}  // namespace

void apply_config_json(ExperimentConfig& cfg, const std::string& json_text) {
  json j;
  try {
    j = json::parse(json_text);
  } catch (const json::parse_error& e) {
    throw ConfigError(std::string("config file is not valid JSON: ") + e.what());
  }
  if (!j.is_object()) throw ConfigError("config file must hold a JSON object");
  for (auto it = j.begin(); it != j.end(); ++it) {
    const std::string& k = it.key();
    const json& v = it.value();
    if (k == "preset") cfg.preset = get_as<std::string>(v, k);
    else if (k == "spec") cfg.spec_path = get_as<std::string>(v, k);
    else if (k == "data") cfg.dataset_path = get_as<std::string>(v, k);
    else if (k == "task") cfg.task = parse_task(get_as<std::string>(v, k));
    else if (k == "n_train") cfg.n_train = get_as<std::size_t>(v, k);
    else if (k == "n_val") cfg.n_val = get_as<std::size_t>(v, k);
    else if (k == "n_test") cfg.n_test = get_as<std::size_t>(v, k);
    else if (k == "min_nodes") cfg.node_range.min = get_as<std::size_t>(v, k);
    else if (k == "max_nodes") cfg.node_range.max = get_as<std::size_t>(v, k);
    else if (k == "alpha_l") cfg.alpha_l = get_as<double>(v, k);
    else if (k == "beta_l") cfg.beta_l = get_as<double>(v, k);
    else if (k == "lr") cfg.optim.lr = get_as<double>(v, k);
    else if (k == "epochs") cfg.optim.epochs = get_as<std::size_t>(v, k);
    else if (k == "batch_size") cfg.optim.batch_size = get_as<std::size_t>(v, k);
    else if (k == "sts") cfg.sts = get_as<std::size_t>(v, k);
    else if (k == "blocks") cfg.blocks = get_as<std::size_t>(v, k);
    else if (k == "leakage") cfg.neuron.beta = get_as<double>(v, k);
    else if (k == "threshold") cfg.neuron.threshold = get_as<double>(v, k);
    else if (k == "slope") cfg.neuron.surrogate_slope = get_as<double>(v, k);
    else if (k == "seed") cfg.seed = get_as<std::uint64_t>(v, k);
    else if (k == "data_seed") cfg.data_seed = get_as<std::uint64_t>(v, k);
    else if (k == "out") cfg.out_dir = get_as<std::string>(v, k);
    else if (k == "timing") cfg.include_timing = get_as<bool>(v, k);
    else if (k == "label") cfg.label = get_as<std::string>(v, k);
    else throw ConfigError("unknown config key \"" + k + "\"");
  }
}

PreparedExperiment prepare_experiment(const ExperimentConfig& cfg) {
  PreparedExperiment p;
  p.config = cfg;
  if (cfg.preset.empty() == cfg.spec_path.empty()) {
    throw ConfigError("give exactly one of a preset or a network spec file");
  }
  if (cfg.dataset_path.empty() == !cfg.task.has_value()) {
    throw ConfigError("give exactly one of a dataset file or a synthetic task");
  }
  if (cfg.n_train < 1 || cfg.n_val < 1) {
    throw ConfigError("train and validation splits need at least one graph each");
  }
  if (cfg.sts < 1) throw ConfigError("spike time step count must be at least 1");
  if (cfg.out_dir.empty()) throw ConfigError("an output directory is required");

  const std::size_t total = cfg.n_train + cfg.n_val + cfg.n_test;
  std::vector<Graph> graphs;
  if (cfg.task) {
    graphs = gen_synthetic(*cfg.task, total, cfg.node_range, cfg.data_seed.value_or(cfg.seed));
  } else {
    if (!fs::exists(cfg.dataset_path)) {
      throw ConfigError("dataset file " + cfg.dataset_path.string() + " does not exist");
    }
    graphs = load_dataset(cfg.dataset_path);
    if (graphs.size() < total) {
      throw ConfigError("dataset has " + std::to_string(graphs.size()) + " graphs, splits need " +
                        std::to_string(total));
    }
    graphs.resize(total);
  }
  p.dataset_fingerprint = dataset_fingerprint(graphs);
  std::size_t max_nodes = 0;
  for (const Graph& g : graphs) max_nodes = std::max(max_nodes, g.num_nodes());
  const Graph& first = graphs.front();
  p.splits.train.assign(graphs.begin(), graphs.begin() + cfg.n_train);
  p.splits.val.assign(graphs.begin() + cfg.n_train, graphs.begin() + cfg.n_train + cfg.n_val);
  p.splits.test.assign(graphs.begin() + cfg.n_train + cfg.n_val, graphs.end());

  if (!cfg.preset.empty()) {
    PresetOptions o;
    o.in_features = first.feature_dim();
    o.edge_features = first.edge_feature_dim();
    o.n_max = max_nodes;
    o.field_arity = first.field().size();
    o.blocks = cfg.blocks;
    o.neuron = cfg.neuron;
    p.spec = preset_spec(cfg.preset, o);
    p.label = cfg.label.empty() ? cfg.preset : cfg.label;
  } else {
    p.spec = parse_network_spec(read_text(cfg.spec_path));
    p.label = cfg.label.empty() ? cfg.spec_path.stem().string() : cfg.label;
  }
  if (p.spec.in_features != first.feature_dim() ||
      p.spec.edge_features != first.edge_feature_dim() ||
      p.spec.field_arity != first.field().size()) {
    throw ConfigError("network input arities (" + std::to_string(p.spec.in_features) + ", " +
                      std::to_string(p.spec.edge_features) + ", " +
                      std::to_string(p.spec.field_arity) + ") do not match the dataset (" +
                      std::to_string(first.feature_dim()) + ", " +
                      std::to_string(first.edge_feature_dim()) + ", " +
                      std::to_string(first.field().size()) + ")");
  }
  bool spiking = false;
  bool pooled = false;
  for (const LayerSpec& l : p.spec.layers) {
    spiking = spiking || l.mode.spiking();
    pooled = pooled || l.kind == LayerKind::kGlobalMeanPool || l.kind == LayerKind::kFlattenConcat;
  }
  if (pooled ? !first.graph_target() : !first.node_target()) {
    throw ConfigError(std::string("dataset lacks the ") + (pooled ? "graph" : "node") +
                      " targets this network predicts");
  }
  p.loss.alpha_l = cfg.alpha_l;
  p.loss.beta_l = cfg.beta_l.value_or(spiking ? 0.1 : 0.0);
  validate_loss_config(p.loss);
  if (p.loss.beta_l > 0.0 && !spiking) {
    throw ConfigError("beta_l > 0 needs a network with spiking layers");
  }
  p.config.optim.seed = cfg.seed;
  validate_optim_config(p.config.optim);

  std::error_code ec;
  fs::create_directories(cfg.out_dir, ec);
  if (ec || !fs::is_directory(cfg.out_dir)) {
    throw ConfigError("cannot create output directory " + cfg.out_dir.string());
  }
  return p;
}

ExperimentResult run_prepared(const PreparedExperiment& p) {
  Network net = assemble_network(p.spec, p.config.seed);
  ExperimentResult r;
  r.label = p.label;
  r.seed = p.config.seed;
  r.beta_l = p.loss.beta_l;
  r.dataset_fingerprint = p.dataset_fingerprint;
  r.report = train(net, p.splits, p.loss, p.config.optim, p.config.sts);

  const fs::path& dir = p.config.out_dir;
  write_text(dir / "report.json", report_to_json(r.report, p.config.include_timing));
  write_text(dir / "epochs.csv", epochs_csv(r.report));
  const EvalResult held_out = r.report.test ? *r.report.test
                                            : evaluate(net, p.splits.val, p.config.sts);
  write_text(dir / "predictions.csv", predictions_csv(held_out));
  write_text(dir / "spiking.csv", spiking_csv(r.report));
  write_text(dir / "network.txt", r.report.network);
  return r;
}

ExperimentResult run_experiment(const ExperimentConfig& cfg) {
  return run_prepared(prepare_experiment(cfg));
}

Comparison compare_models(const std::vector<ExperimentResult>& results) {
  if (results.empty()) throw ConfigError("nothing to compare");
  const std::uint64_t fp = results.front().dataset_fingerprint;
  std::map<std::pair<std::string, double>, std::set<std::uint64_t>> seeds;
  Comparison c;
  for (const ExperimentResult& r : results) {
    if (r.dataset_fingerprint != fp) {
      throw ConfigError("runs use different datasets (" + fingerprint_hex(fp) + " vs " +
                        fingerprint_hex(r.dataset_fingerprint) + ")");
    }
    if (!r.report.test) throw ConfigError("run " + r.label + " has no test split");
    if (!seeds[{r.label, r.beta_l}].insert(r.seed).second) {
      throw ConfigError("duplicate run " + r.label + " seed " + std::to_string(r.seed));
    }
    ComparisonRow row;
    row.label = r.label;
    row.seed = r.seed;
    row.beta_l = r.beta_l;
    row.test_mse = r.report.test->mse;
    if (r.report.test->spiking) row.mean_spiking = r.report.test->spiking->mean;
    c.rows.push_back(row);
  }
  const auto& reference = seeds.begin()->second;
  for (const auto& [key, set] : seeds) {
    if (set != reference) throw ConfigError("variant " + key.first + " ran over a different seed set");
  }
  std::sort(c.rows.begin(), c.rows.end(), [](const ComparisonRow& a, const ComparisonRow& b) {
    return std::tie(a.label, a.beta_l, a.seed) < std::tie(b.label, b.beta_l, b.seed);
  });
  for (const ComparisonRow& row : c.rows) {
    if (c.summary.empty() || c.summary.back().label != row.label ||
        c.summary.back().beta_l != row.beta_l) {
      c.summary.push_back({row.label, row.beta_l, 0, 0.0, std::nullopt});
    }
    ComparisonSummary& s = c.summary.back();
    ++s.runs;
    s.test_mse += row.test_mse;
    if (row.mean_spiking) s.mean_spiking = s.mean_spiking.value_or(0.0) + *row.mean_spiking;
  }
  for (ComparisonSummary& s : c.summary) {
    s.test_mse /= static_cast<double>(s.runs);
    if (s.mean_spiking) *s.mean_spiking /= static_cast<double>(s.runs);
  }
  return c;
}

Comparison run_comparison(const std::vector<ExperimentConfig>& configs,
                          const fs::path& out_dir) {
  if (configs.empty()) throw ConfigError("nothing to compare");
  std::vector<PreparedExperiment> prepared;
  for (ExperimentConfig cfg : configs) {
    const std::string tag = (cfg.label.empty() ? cfg.preset : cfg.label);
    std::ostringstream sub;
    sub << (tag.empty() ? cfg.spec_path.stem().string() : tag);
    if (cfg.beta_l) sub << "_beta" << format_number(*cfg.beta_l);
    sub << "_seed" << cfg.seed;
    cfg.out_dir = out_dir / sub.str();
    prepared.push_back(prepare_experiment(cfg));
  }
  const std::uint64_t fp = prepared.front().dataset_fingerprint;
  for (const PreparedExperiment& p : prepared) {
    if (p.dataset_fingerprint != fp) throw ConfigError("configs use different datasets");
  }
  std::vector<ExperimentResult> results;
  for (const PreparedExperiment& p : prepared) results.push_back(run_prepared(p));
  Comparison c = compare_models(results);
  write_text(out_dir / "comparison.csv", comparison_csv(c));
  write_text(out_dir / "comparison.md", comparison_markdown(c));
  return c;
}

std::string comparison_csv(const Comparison& c) {
  std::ostringstream out;
  out << "label,beta_l,seed,test_mse,mean_S\n";
  for (const ComparisonRow& r : c.rows) {
    out << r.label << ',' << format_number(r.beta_l) << ',' << r.seed << ','
        << format_number(r.test_mse) << ','
        << (r.mean_spiking ? format_number(*r.mean_spiking) : "n/a") << '\n';
  }
  return out.str();
}

std::string comparison_markdown(const Comparison& c) {
  std::ostringstream out;
  out << "| model | beta_l | runs | test MSE | mean S |\n";
  out << "|---|---|---|---|---|\n";
  for (const ComparisonSummary& s : c.summary) {
    out << "| " << s.label << " | " << format_number(s.beta_l) << " | " << s.runs << " | "
        << format_number(s.test_mse) << " | "
        << (s.mean_spiking ? format_number(*s.mean_spiking) : "n/a") << " |\n";
  }
  return out.str();
}

DatasetSummary summarize_dataset(std::span<const Graph> graphs) {
  if (graphs.empty()) throw ConfigError("empty dataset");
  DatasetSummary s;
  s.graphs = graphs.size();
  s.min_nodes = std::numeric_limits<std::size_t>::max();
  s.min_target = std::numeric_limits<double>::infinity();
  s.max_target = -std::numeric_limits<double>::infinity();
  const auto see = [&](double v) {
    s.min_target = std::min(s.min_target, v);
    s.max_target = std::max(s.max_target, v);
  };
  for (const Graph& g : graphs) {
    s.min_nodes = std::min(s.min_nodes, g.num_nodes());
    s.max_nodes = std::max(s.max_nodes, g.num_nodes());
    if (g.graph_target()) for (double v : *g.graph_target()) see(v);
    if (g.node_target()) for (double v : g.node_target()->data) see(v);
  }
  return s;
}

std::string format_summary(const DatasetSummary& s) {
  std::ostringstream out;
  out << "graphs: " << s.graphs << "\n"
      << "nodes: " << s.min_nodes << " to " << s.max_nodes << "\n"
      << "targets: " << format_number(s.min_target) << " to " << format_number(s.max_target)
      << "\n";
  return out.str();
}

DatasetSummary gen_data(SyntheticTask task, std::size_t n_graphs, NodeRange node_range,
                        std::uint64_t seed, const fs::path& out) {
  const std::vector<Graph> graphs = gen_synthetic(task, n_graphs, node_range, seed);
  try {
    save_dataset(graphs, out);
  } catch (const Error& e) {
    throw ConfigError(e.what());
  }
  return summarize_dataset(graphs);
}

std::uint64_t dataset_fingerprint(std::span<const Graph> graphs) {
  std::uint64_t h = 14695981039346656037ull;
  for (const Graph& g : graphs) {
    for (unsigned char ch : graph_to_json_line(g) + "\n") {
      h ^= ch;
      h *= 1099511628211ull;
    }
  }
  return h;
}

CsvTable parse_csv(const std::string& text) {
  CsvTable t;
  std::istringstream in(text);
  std::string line;
  bool header = true;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::vector<std::string> cells;
    std::size_t start = 0;
    while (true) {
      const std::size_t comma = line.find(',', start);
      cells.push_back(line.substr(start, comma == std::string::npos ? comma : comma - start));
      if (comma == std::string::npos) break;
      start = comma + 1;
    }
    if (header) {
      t.header = std::move(cells);
      header = false;
    } else {
      if (cells.size() != t.header.size()) {
        throw SchemaError("csv row has " + std::to_string(cells.size()) + " cells, header has " +
                          std::to_string(t.header.size()));
      }
      t.rows.push_back(std::move(cells));
    }
  }
  return t;
}

}  // namespace hvsgnn
