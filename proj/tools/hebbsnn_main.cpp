// Command-line surface: reproducible training, evaluation and baseline runs.
//
//   hebbsnn train --task assoc --preset desk --seed 7 --out runs/assoc7
//   hebbsnn eval  --task ood --checkpoint runs/assoc7/checkpoint.bin --lengths 1..10
//   hebbsnn baselines --n-pairs 2 --games 10000
//
// Every run writes a run.json manifest with the fully resolved configuration,
// seed and code version; repeating a command with the same seed and
// configuration reproduces its outputs bit for bit (wall-clock columns can be
// disabled with --override train.wall_clock=false).

#include <CLI11.hpp>
#include <json.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>

#include "hebbsnn/csv.hpp"
#include "hebbsnn/conversion.hpp"
#include "hebbsnn/gradcheck_suite.hpp"
#include "hebbsnn/presets.hpp"

namespace fs = std::filesystem;
using namespace hebbsnn;

namespace {

struct CommonArgs {
  std::string task = "assoc";
  std::string preset = "desk";
  std::uint64_t seed = 1;
  std::string out_dir;
  std::string config_path;
  std::vector<std::string> overrides;
};

void add_common(CLI::App* cmd, CommonArgs& args, bool with_task = true) {
  if (with_task) {
    cmd->add_option("--task", args.task, "Experiment task")
        ->check(CLI::IsMember({"assoc", "ood", "rl", "convert-demo", "gradcheck"}));
  }
  cmd->add_option("--preset", args.preset, "Hyperparameter preset")
      ->check(CLI::IsMember({"desk", "paper"}));
  cmd->add_option("--seed", args.seed, "Root random seed");
  cmd->add_option("--out", args.out_dir, "Output directory");
  cmd->add_option("--config", args.config_path, "key = value configuration file");
  cmd->add_option("--override", args.overrides, "Config override key=value (repeatable)");
}

ExperimentConfig resolve(const CommonArgs& args) {
  ExperimentConfig config;
  config.task = args.task;
  config.preset = args.preset;
  config.seed = args.seed;
  config.apply_preset();
  if (!args.config_path.empty()) {
    for (const auto& [k, v] : parse_config_file(args.config_path)) {
      set_config_key(config, k, v);
    }
  }
  for (const std::string& ov : args.overrides) {
    const auto eq = ov.find('=');
    if (eq == std::string::npos) fail_argument("--override expects key=value, got '" + ov + "'");
    set_config_key(config, ov.substr(0, eq), ov.substr(eq + 1));
  }
  config.finalize();
  return config;
}

void write_manifest(const std::string& out_dir, const std::string& command,
                    const ExperimentConfig& config) {
  if (out_dir.empty()) return;
  nlohmann::json j;
  j["command"] = command;
  j["seed"] = config.seed;
  j["code_version"] = code_version();
  j["config"] = config.resolved();
  std::ofstream out(fs::path(out_dir) / "run.json");
  out << j.dump(2) << "\n";
}

std::string out_file(const std::string& out_dir, const std::string& name) {
  return (fs::path(out_dir) / name).string();
}

void ensure_out(std::string& out_dir, const std::string& fallback) {
  if (out_dir.empty()) out_dir = fallback;
  fs::create_directories(out_dir);
}

int train_supervised(const CommonArgs& args, ExperimentConfig config) {
  Rng init_rng(derive_seed(config.seed, 0x696e6974ull, 0));
  AssocParams params(config.model);
  assoc_init_params(params, init_rng);

  CsvWriter metrics(out_file(args.out_dir, "metrics.csv"),
                    "iteration,loss,reg_loss,accuracy,lr,wall_ms");
  TrainCallbacks callbacks;
  callbacks.on_iteration = [&](std::int64_t it, double loss, double reg, double acc, double lr,
                               std::int64_t wall_ms) {
    metrics.row(std::to_string(it) + "," + CsvWriter::num(loss) + "," + CsvWriter::num(reg) +
                "," + CsvWriter::num(acc) + "," + CsvWriter::num(lr) + "," +
                std::to_string(wall_ms));
  };
  callbacks.on_checkpoint = [&](std::int64_t it, const AssocParams& p) {
    char name[64];
    std::snprintf(name, sizeof(name), "checkpoint_%06lld.bin", static_cast<long long>(it));
    save_assoc_checkpoint(out_file(args.out_dir, name), p, config.model,
                          {{"task", config.task}});
  };

  train_association(config.train, config.model, config.assoc, params, callbacks);
  save_assoc_checkpoint(out_file(args.out_dir, "checkpoint.bin"), params, config.model,
                        {{"task", config.task}});

  const double accuracy = evaluate_accuracy(params, config.model, config.assoc,
                                            config.assoc.n_test, config.eval_episodes,
                                            config.train.parallel());
  std::printf("task=%s accuracy=%.4f\n", config.task.c_str(), accuracy);
  return 0;
}

int train_rl(const CommonArgs& args, ExperimentConfig config) {
  const RlModelConfig model = config.rl_model();
  RlParams params(model);
  Rng init_rng(derive_seed(config.seed, 0x696e6974ull, 0));
  rl_init_params(params, init_rng);

  CsvWriter flips(out_file(args.out_dir, "flips.csv"), "game_index,n_flips,total_reward");
  CsvWriter metrics(out_file(args.out_dir, "ppo_metrics.csv"),
                    "iteration,policy_loss,value_loss,entropy,mean_flips,lr,wall_ms");
  PpoCallbacks callbacks;
  callbacks.on_game = [&](std::int64_t index, std::int64_t n, double reward) {
    flips.row(std::to_string(index) + "," + std::to_string(n) + "," + CsvWriter::num(reward));
  };
  callbacks.on_iteration = [&](std::int64_t it, double mean_flips, double pl, double vl, double h,
                               double lr, std::int64_t wall_ms) {
    metrics.row(std::to_string(it) + "," + CsvWriter::num(pl) + "," + CsvWriter::num(vl) + "," +
                CsvWriter::num(h) + "," + CsvWriter::num(mean_flips) + "," + CsvWriter::num(lr) +
                "," + std::to_string(wall_ms));
  };
  callbacks.checkpoint_interval = config.train.checkpoint_interval;
  callbacks.on_checkpoint = [&](std::int64_t it, const RlParams& p) {
    char name[64];
    std::snprintf(name, sizeof(name), "checkpoint_%06lld.bin", static_cast<long long>(it));
    save_rl_checkpoint(out_file(args.out_dir, name), p, model, {{"task", config.task}});
  };

  ppo_train(config.ppo, model, config.env, params, callbacks);
  save_rl_checkpoint(out_file(args.out_dir, "checkpoint.bin"), params, model,
                     {{"task", config.task}});

  const AgentEvalResult eval = evaluate_rl_agent(params, model, config.env, config.eval_episodes,
                                                 derive_seed(config.seed, 0x6576616cull, 0), 1000,
                                                 config.ppo.parallel());
  std::printf("task=rl mean_flips=%.4f\n", eval.mean_flips);
  return 0;
}

int cmd_train(const CommonArgs& args_in) {
  CommonArgs args = args_in;
  ensure_out(args.out_dir, "runs/" + args.task + "_seed" + std::to_string(args.seed));
  ExperimentConfig config = resolve(args);
  write_manifest(args.out_dir, "train", config);
  if (config.task == "assoc" || config.task == "ood") return train_supervised(args, config);
  if (config.task == "rl") return train_rl(args, config);
  fail_argument("train supports tasks assoc, ood and rl");
}

int eval_supervised(const CommonArgs& args, ExperimentConfig config,
                    const std::string& checkpoint) {
  ModelConfig model;
  AssocParams params = load_assoc_checkpoint(checkpoint, &model);
  config.model = model;
  config.assoc.vec_dim = model.vec_dim;
  config.assoc.label_range = model.label_range;

  if (config.task == "assoc") {
    const double accuracy = evaluate_accuracy(params, model, config.assoc, config.assoc.n_test,
                                              config.eval_episodes, config.train.parallel());
    std::printf("task=assoc accuracy=%.4f\n", accuracy);
    return 0;
  }
  const auto curve = ood_protocol(params, model, config.assoc, config.ood_lengths,
                                  config.eval_episodes, config.train.parallel());
  std::unique_ptr<CsvWriter> csv;
  if (!args.out_dir.empty()) {
    csv = std::make_unique<CsvWriter>(out_file(args.out_dir, "ood_curve.csv"),
                                      "n_test,accuracy");
  }
  for (const OodPoint& p : curve) {
    std::printf("n_test=%d accuracy=%.4f\n", p.n_test, p.accuracy);
    if (csv) csv->row(std::to_string(p.n_test) + "," + CsvWriter::num(p.accuracy));
  }
  std::printf("task=ood n_lengths=%zu\n", curve.size());
  return 0;
}

int eval_rl(const CommonArgs& args, ExperimentConfig config, const std::string& checkpoint) {
  RlModelConfig model;
  RlParams params = load_rl_checkpoint(checkpoint, &model);
  HSNN_CHECK_ARG(model.n_actions == config.env.n_pairs * 2,
                 "eval: checkpoint deck size differs from env.n_pairs");
  const AgentEvalResult eval = evaluate_rl_agent(params, model, config.env, config.eval_episodes,
                                                 derive_seed(config.seed, 0x6576616cull, 0), 1000,
                                                 config.ppo.parallel());
  if (!args.out_dir.empty()) {
    CsvWriter csv(out_file(args.out_dir, "flip_hist.csv"), "game_index,n_flips,total_reward");
    for (std::size_t i = 0; i < eval.flips_per_game.size(); ++i) {
      csv.row(std::to_string(i) + "," + std::to_string(eval.flips_per_game[i]) + "," +
              CsvWriter::num(eval.reward_per_game[i]));
    }
  }
  std::printf("task=rl mean_flips=%.4f\n", eval.mean_flips);
  return 0;
}

int eval_convert_demo(const CommonArgs& args, ExperimentConfig config) {
  HSNN_CHECK_ARG(config.convert_layers.size() >= 2, "convert-demo: need at least two layer sizes");
  Rng rng(derive_seed(config.seed, 0x636f6e76ull, 0));
  DenseReluNet net;
  for (std::size_t i = 0; i + 1 < config.convert_layers.size(); ++i) {
    net.weights.emplace_back(config.convert_layers[i], config.convert_layers[i + 1]);
    glorot_init(net.weights.back(), rng);
  }
  auto draw_inputs = [&](std::int32_t n, std::uint64_t stream) {
    std::vector<std::vector<double>> xs(n, std::vector<double>(net.input_dim()));
    for (std::int32_t i = 0; i < n; ++i) {
      Rng r(derive_seed(config.seed, stream, i));
      for (double& v : xs[i]) v = r.uniform();
    }
    return xs;
  };
  const auto calib = draw_inputs(config.convert_calibration, 0x63616cull);
  const auto held = draw_inputs(config.convert_heldout, 0x68656cull);

  const LifParams front_end = config.model.lif;
  const auto thresholds =
      balance_thresholds(net, calib, config.convert_duration, front_end, true);
  for (std::size_t layer = 0; layer < thresholds.size(); ++layer) {
    std::printf("layer=%zu threshold=%.6f\n", layer, thresholds[layer]);
  }

  // Per-layer fidelity: spike counts against ReLU activations over held-out
  // samples and neurons.
  std::vector<std::vector<double>> counts_flat(net.depth()), acts_flat(net.depth());
  for (const auto& x : held) {
    const auto counts = run_converted(net, thresholds, x, config.convert_duration, front_end);
    const auto acts = net.relu_activations(x);
    for (std::int32_t layer = 0; layer < net.depth(); ++layer) {
      counts_flat[layer].insert(counts_flat[layer].end(), counts[layer + 1].begin(),
                                counts[layer + 1].end());
      acts_flat[layer].insert(acts_flat[layer].end(), acts[layer].begin(), acts[layer].end());
    }
  }
  double min_r = 1.0;
  for (std::int32_t layer = 0; layer < net.depth(); ++layer) {
    const double r = pearson_correlation(counts_flat[layer], acts_flat[layer]);
    min_r = std::min(min_r, r);
    std::printf("layer=%d pearson_r=%.4f\n", layer, r);
  }
  if (!args.out_dir.empty()) {
    Checkpoint ck;
    for (std::size_t i = 0; i < net.weights.size(); ++i) {
      ck.add("layer" + std::to_string(i), net.weights[i]);
    }
    ck.add("conversion.thresholds", thresholds);
    ck.meta["kind"] = "converted";
    ck.save(out_file(args.out_dir, "converted.bin"));
  }
  std::printf("task=convert-demo min_pearson_r=%.4f\n", min_r);
  return 0;
}

int eval_gradcheck() {
  double worst = 0.0;
  for (const GradCheckCase& c : run_gradcheck_suite()) {
    std::printf("op=%s max_rel_err=%.3e\n", c.name.c_str(), c.max_rel_err);
    worst = std::max(worst, c.max_rel_err);
  }
  std::printf("task=gradcheck max_rel_err=%.3e pass=%s\n", worst,
              worst <= 1e-4 ? "true" : "false");
  return worst <= 1e-4 ? 0 : 1;
}

int cmd_eval(const CommonArgs& args_in, const std::string& checkpoint,
             const std::string& lengths) {
  CommonArgs args = args_in;
  if (!args.out_dir.empty()) fs::create_directories(args.out_dir);
  ExperimentConfig config = resolve(args);
  if (!lengths.empty()) config.ood_lengths = parse_length_list(lengths);
  if (!args.out_dir.empty()) write_manifest(args.out_dir, "eval", config);
  if (config.task == "gradcheck") return eval_gradcheck();
  if (config.task == "convert-demo") return eval_convert_demo(args, config);
  HSNN_CHECK_ARG(!checkpoint.empty(), "eval: --checkpoint is required for this task");
  if (config.task == "rl") return eval_rl(args, config, checkpoint);
  return eval_supervised(args, config, checkpoint);
}

int cmd_baselines(const CommonArgs& args_in, std::int32_t n_pairs, std::int32_t games) {
  CommonArgs args = args_in;
  if (!args.out_dir.empty()) fs::create_directories(args.out_dir);
  ExperimentConfig config;
  config.task = "rl";
  config.seed = args.seed;
  config.apply_preset();
  config.env.n_pairs = n_pairs;
  config.finalize();
  if (!args.out_dir.empty()) write_manifest(args.out_dir, "baselines", config);

  const AgentEvalResult random_eval =
      random_agent_eval(n_pairs, games, derive_seed(args.seed, 0x62617365ull, 0));
  const AgentEvalResult optimal_eval =
      optimal_agent_eval(n_pairs, games, derive_seed(args.seed, 0x62617365ull, 1));
  std::printf("agent=random n_pairs=%d games=%d mean_flips=%.4f\n", n_pairs, games,
              random_eval.mean_flips);
  std::printf("agent=optimal n_pairs=%d games=%d mean_flips=%.4f\n", n_pairs, games,
              optimal_eval.mean_flips);
  if (n_pairs <= 3) {
    std::printf("agent=optimal exact_expected_flips=%.6f\n",
                optimal_agent_expected_flips(n_pairs));
  }
  if (!args.out_dir.empty()) {
    CsvWriter rnd(out_file(args.out_dir, "random_hist.csv"), "game_index,n_flips,total_reward");
    for (std::size_t i = 0; i < random_eval.flips_per_game.size(); ++i) {
      rnd.row(std::to_string(i) + "," + std::to_string(random_eval.flips_per_game[i]) + "," +
              CsvWriter::num(random_eval.reward_per_game[i]));
    }
    CsvWriter opt(out_file(args.out_dir, "optimal_hist.csv"), "game_index,n_flips,total_reward");
    for (std::size_t i = 0; i < optimal_eval.flips_per_game.size(); ++i) {
      opt.row(std::to_string(i) + "," + std::to_string(optimal_eval.flips_per_game[i]) + "," +
              CsvWriter::num(optimal_eval.reward_per_game[i]));
    }
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Spiking network with Hebbian key-value memory: experiments"};
  app.require_subcommand(1);

  CommonArgs train_args;
  CLI::App* train = app.add_subcommand("train", "Train a model and write metrics/checkpoints");
  add_common(train, train_args);

  CommonArgs eval_args;
  std::string checkpoint, lengths;
  CLI::App* eval = app.add_subcommand("eval", "Evaluate a checkpoint or run a demo task");
  add_common(eval, eval_args);
  eval->add_option("--checkpoint", checkpoint, "Path to a saved checkpoint");
  eval->add_option("--lengths", lengths, "Test sequence lengths, e.g. 1..10 or 2,4,8");

  CommonArgs base_args;
  std::int32_t n_pairs = 2;
  std::int32_t games = 10000;
  CLI::App* baselines =
      app.add_subcommand("baselines", "Random and perfect-memory Concentration agents");
  add_common(baselines, base_args, false);
  baselines->add_option("--n-pairs", n_pairs, "Pairs in the deck");
  baselines->add_option("--games", games, "Monte Carlo games");

  CLI11_PARSE(app, argc, argv);

  try {
    if (train->parsed()) return cmd_train(train_args);
    if (eval->parsed()) return cmd_eval(eval_args, checkpoint, lengths);
    if (baselines->parsed()) return cmd_baselines(base_args, n_pairs, games);
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 0;
}
