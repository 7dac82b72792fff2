// SPDX-License-Identifier: Apache-2.0
// Command-line runner: gen-data, run, compare.
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>

#include "hvsgnn/error.hpp"
#include "hvsgnn/experiment.hpp"
#include "hvsgnn/runtime.hpp"

namespace {

using namespace hvsgnn;

constexpr int kExitConfig = 2;
constexpr int kExitDivergence = 3;

constexpr const char* kOutputs = R"(Outputs written by run (and per run by compare):
  report.json      config echo, per-epoch losses, best epoch, test MSE and S
  epochs.csv       epoch,train_loss,val_loss,S_<layer>... (S measured on validation)
  predictions.csv  sample,node,output,truth,prediction (test split)
  spiking.csv      epoch,layer,S plus rows with epoch "test"
  network.txt      the network in text spec form
compare also writes comparison.csv (label,beta_l,seed,test_mse,mean_S; n/a
for networks without spiking layers) and comparison.md (seed averages).
Exit codes: 0 success, 2 configuration error, 3 numerical divergence.)";

struct Flags {
  ExperimentConfig cfg;
  std::string task;
  std::string config_path;
  double beta_l = 0.0;
  std::uint64_t data_seed = 0;
};

void add_experiment_flags(CLI::App* app, Flags& f) {
  ExperimentConfig& c = f.cfg;
  app->add_option("--data", c.dataset_path, "Dataset file (JSON lines)");
  app->add_option("--task", f.task, "Synthetic task: graph-scalar, graph-scalar-cond, node-field");
  app->add_option("--n-train", c.n_train, "Training graphs")->capture_default_str();
  app->add_option("--n-val", c.n_val, "Validation graphs")->capture_default_str();
  app->add_option("--n-test", c.n_test, "Test graphs")->capture_default_str();
  app->add_option("--min-nodes", c.node_range.min, "Synthetic graph size lower bound")
      ->capture_default_str();
  app->add_option("--max-nodes", c.node_range.max, "Synthetic graph size upper bound")
      ->capture_default_str();
  app->add_option("--alpha-l", c.alpha_l, "Weight of the MSE term")->capture_default_str();
  app->add_option("--lr", c.optim.lr, "ADAM learning rate")->capture_default_str();
  app->add_option("--epochs", c.optim.epochs, "Training epochs")->capture_default_str();
  app->add_option("--batch-size", c.optim.batch_size, "Graphs per batch")->capture_default_str();
  app->add_option("--sts", c.sts, "Spike time steps")->capture_default_str();
  app->add_option("--blocks", c.blocks, "Repeated blocks in ex3 presets")->capture_default_str();
  app->add_option("--leakage", c.neuron.beta, "Initial neuron leakage")->capture_default_str();
  app->add_option("--threshold", c.neuron.threshold, "Initial firing threshold")
      ->capture_default_str();
  app->add_option("--slope", c.neuron.surrogate_slope, "Surrogate gradient slope")
      ->capture_default_str();
  app->add_option("--data-seed", f.data_seed, "Synthetic data seed (default: --seed)");
  app->add_flag("--timing", c.include_timing, "Include wall-clock seconds in report.json");
  app->add_option("--config", f.config_path, "JSON file whose keys override flags");
}

void finish_flags(CLI::App* app, Flags& f) {
  if (!f.task.empty()) f.cfg.task = parse_task(f.task);
  if (app->count("--data-seed")) f.cfg.data_seed = f.data_seed;
  if (!f.config_path.empty()) {
    std::ifstream in(f.config_path);
    if (!in) throw ConfigError("cannot read config file " + f.config_path);
    std::ostringstream ss;
    ss << in.rdbuf();
    apply_config_json(f.cfg, ss.str());
  }
}

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

}  // namespace

int main(int argc, char** argv) {
  configure_allocator();
  CLI::App app{"Hybrid spiking graph neural network experiments"};
  app.footer(kOutputs);
  app.require_subcommand(1);

  std::string gen_task;
  std::size_t gen_n = 100;
  NodeRange gen_range;
  std::uint64_t gen_seed = 0;
  std::string gen_out;
  CLI::App* gen = app.add_subcommand("gen-data", "Write a synthetic dataset file");
  gen->add_option("--task", gen_task, "graph-scalar, graph-scalar-cond or node-field")->required();
  gen->add_option("--n", gen_n, "Number of graphs")->capture_default_str();
  gen->add_option("--min-nodes", gen_range.min, "Smallest graph")->capture_default_str();
  gen->add_option("--max-nodes", gen_range.max, "Largest graph")->capture_default_str();
  gen->add_option("--seed", gen_seed, "Random seed")->capture_default_str();
  gen->add_option("--out", gen_out, "Output file")->required();

  Flags run_flags;
  std::string run_spec;
  CLI::App* run = app.add_subcommand("run", "Train and evaluate one network");
  run->add_option("--preset", run_flags.cfg.preset,
                  "ex1|ex2|ex3 with -agnn, -v1, -v2, -v1-lif or -v2-lif");
  run->add_option("--spec", run_spec, "Network spec file");
  run->add_option("--beta-l", run_flags.beta_l,
                  "Weight of the spiking activity term (default 0.1 with spiking layers, else 0)");
  run->add_option("--seed", run_flags.cfg.seed, "Seed for weights and shuffling")
      ->capture_default_str();
  run->add_option("--out", run_flags.cfg.out_dir, "Output directory");
  add_experiment_flags(run, run_flags);

  Flags cmp_flags;
  std::string cmp_presets = "ex1-agnn,ex1-v1-lif,ex1-v1";
  std::string cmp_seeds = "0,1,2";
  std::string cmp_betas;
  std::string cmp_out;
  CLI::App* cmp = app.add_subcommand("compare", "Train several presets over a seed set");
  cmp->add_option("--presets", cmp_presets, "Comma-separated presets")->capture_default_str();
  cmp->add_option("--seeds", cmp_seeds, "Comma-separated seeds")->capture_default_str();
  cmp->add_option("--beta-l", cmp_betas,
                  "Comma-separated beta_l values for spiking presets (default 0.1)");
  cmp->add_option("--seed", cmp_flags.data_seed, "Dataset seed")->capture_default_str();
  cmp->add_option("--out", cmp_out, "Output directory")->required();
  add_experiment_flags(cmp, cmp_flags);

  CLI11_PARSE(app, argc, argv);

  try {
    if (gen->parsed()) {
      const DatasetSummary s = gen_data(parse_task(gen_task), gen_n, gen_range, gen_seed, gen_out);
      std::cout << format_summary(s);
      return 0;
    }
    if (run->parsed()) {
      run_flags.cfg.spec_path = run_spec;
      if (run->count("--beta-l")) run_flags.cfg.beta_l = run_flags.beta_l;
      finish_flags(run, run_flags);
      const ExperimentResult r = run_experiment(run_flags.cfg);
      std::cout << "best epoch " << r.report.best_epoch << ", val MSE "
                << format_number(r.report.best_val_loss);
      if (r.report.test) {
        std::cout << ", test MSE " << format_number(r.report.test->mse);
        if (r.report.test->spiking) {
          std::cout << ", mean S " << format_number(r.report.test->spiking->mean);
        }
      }
      std::cout << "\n";
      return 0;
    }
    if (cmp->parsed()) {
      finish_flags(cmp, cmp_flags);
      cmp_flags.cfg.data_seed = cmp_flags.data_seed;
      std::vector<double> betas;
      for (const auto& b : split_list(cmp_betas)) betas.push_back(std::stod(b));
      std::vector<ExperimentConfig> configs;
      for (const auto& preset : split_list(cmp_presets)) {
        bool spiking = false;
        for (const LayerSpec& l : preset_spec(preset).layers) spiking = spiking || l.mode.spiking();
        std::vector<std::optional<double>> variants;
        if (!spiking) variants.push_back(0.0);
        else if (betas.empty()) variants.push_back(std::nullopt);
        else for (double b : betas) variants.push_back(b);
        for (const auto& beta : variants) {
          for (const auto& seed : split_list(cmp_seeds)) {
            ExperimentConfig c = cmp_flags.cfg;
            c.preset = preset;
            c.beta_l = beta;
            c.seed = std::stoull(seed);
            c.out_dir = cmp_out;
            configs.push_back(c);
          }
        }
      }
      const Comparison c = run_comparison(configs, cmp_out);
      std::cout << comparison_markdown(c);
      return 0;
    }
  } catch (const DivergenceError& e) {
    std::cerr << "divergence: " << e.what() << "\n";
    return kExitDivergence;
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const SchemaError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const std::invalid_argument& e) {
    std::cerr << "config error: bad number in list\n";
    return kExitConfig;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
