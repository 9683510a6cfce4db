#include "hebbsnn/presets.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>

namespace hebbsnn {

namespace {

std::string fmt_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

bool parse_bool(const std::string& v) {
  if (v == "1" || v == "true" || v == "on") return true;
  if (v == "0" || v == "false" || v == "off") return false;
  fail_argument("config: expected boolean, got '" + v + "'");
}

std::string join_lengths(const std::vector<std::int32_t>& xs) {
  std::string out;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    if (i) out += ',';
    out += std::to_string(xs[i]);
  }
  return out;
}

// Field table shared by the setter and the resolved dump.
struct Entry {
  std::function<void(ExperimentConfig&, const std::string&)> set;
  std::function<std::string(const ExperimentConfig&)> get;
};

#define INT_FIELD(expr)                                                                       \
  Entry{[](ExperimentConfig& c, const std::string& v) {                                       \
          c.expr = static_cast<std::int32_t>(std::strtol(v.c_str(), nullptr, 10));            \
        },                                                                                    \
        [](const ExperimentConfig& c) { return std::to_string(c.expr); }}
#define U64_FIELD(expr)                                                                \
  Entry{[](ExperimentConfig& c, const std::string& v) {                                \
          c.expr = std::strtoull(v.c_str(), nullptr, 10);                              \
        },                                                                             \
        [](const ExperimentConfig& c) { return std::to_string(c.expr); }}
#define DBL_FIELD(expr)                                                               \
  Entry{[](ExperimentConfig& c, const std::string& v) {                               \
          c.expr = std::strtod(v.c_str(), nullptr);                                   \
        },                                                                            \
        [](const ExperimentConfig& c) { return fmt_double(c.expr); }}
#define BOOL_FIELD(expr)                                                                 \
  Entry{[](ExperimentConfig& c, const std::string& v) { c.expr = parse_bool(v); },       \
        [](const ExperimentConfig& c) { return std::string(c.expr ? "true" : "false"); }}

const std::map<std::string, Entry>& field_table() {
  static const std::map<std::string, Entry> table = {
      {"train.lr", DBL_FIELD(train.lr)},
      {"train.lr_decay", DBL_FIELD(train.lr_decay)},
      {"train.decay_interval", INT_FIELD(train.decay_interval)},
      {"train.batch_size", INT_FIELD(train.batch_size)},
      {"train.iterations", INT_FIELD(train.iterations)},
      {"train.lambda_rho", DBL_FIELD(train.lambda_rho)},
      {"train.rho_0", DBL_FIELD(train.rho_0)},
      {"train.reg_warmup", INT_FIELD(train.reg_warmup)},
      {"train.clip_norm", DBL_FIELD(train.clip_norm)},
      {"train.checkpoint_interval", INT_FIELD(train.checkpoint_interval)},
      {"train.threads", INT_FIELD(train.threads)},
      {"train.wall_clock", BOOL_FIELD(train.wall_clock)},
      {"model.tau_sim_steps", INT_FIELD(model.tau_sim_steps)},
      {"model.tau_read_steps", INT_FIELD(model.tau_read_steps)},
      {"model.d_feedback_steps", INT_FIELD(model.d_feedback_steps)},
      {"model.l", INT_FIELD(model.l)},
      {"model.encoder_size", INT_FIELD(model.encoder_size)},
      {"model.vec_dim", INT_FIELD(model.vec_dim)},
      {"model.lif.theta", DBL_FIELD(model.lif.theta)},
      {"model.lif.tau_m", DBL_FIELD(model.lif.tau_m)},
      {"model.lif.delta_abs", DBL_FIELD(model.lif.delta_abs)},
      {"model.lif.dt", DBL_FIELD(model.lif.dt)},
      {"model.hebbian.gamma_plus", DBL_FIELD(model.hebbian.gamma_plus)},
      {"model.hebbian.gamma_minus", DBL_FIELD(model.hebbian.gamma_minus)},
      {"model.hebbian.w_max", DBL_FIELD(model.hebbian.w_max)},
      {"model.hebbian.tau_trace", DBL_FIELD(model.hebbian.tau_trace)},
      {"model.hebbian.c", DBL_FIELD(model.hebbian.c)},
      {"model.surrogate_beta", DBL_FIELD(model.surrogate_beta)},
      {"model.plasticity_on_recall", BOOL_FIELD(model.plasticity_on_recall)},
      {"task.n_train", INT_FIELD(assoc.n_train)},
      {"task.n_test", INT_FIELD(assoc.n_test)},
      {"task.vec_dim", INT_FIELD(assoc.vec_dim)},
      {"task.label_range", INT_FIELD(assoc.label_range)},
      {"eval.episodes", INT_FIELD(eval_episodes)},
      {"eval.lengths", Entry{[](ExperimentConfig& c, const std::string& v) {
                               c.ood_lengths = parse_length_list(v);
                             },
                             [](const ExperimentConfig& c) {
                               return join_lengths(c.ood_lengths);
                             }}},
      {"ppo.n_envs", INT_FIELD(ppo.n_envs)},
      {"ppo.rollout_steps", INT_FIELD(ppo.rollout_steps)},
      {"ppo.iterations", INT_FIELD(ppo.iterations)},
      {"ppo.epochs", INT_FIELD(ppo.epochs)},
      {"ppo.minibatches", INT_FIELD(ppo.minibatches)},
      {"ppo.lr", DBL_FIELD(ppo.lr)},
      {"ppo.value_coef", DBL_FIELD(ppo.value_coef)},
      {"ppo.entropy_coef", DBL_FIELD(ppo.entropy_coef)},
      {"ppo.gamma", DBL_FIELD(ppo.gamma)},
      {"ppo.clip", DBL_FIELD(ppo.clip)},
      {"ppo.grad_clip", DBL_FIELD(ppo.grad_clip)},
      {"ppo.normalize_advantages", BOOL_FIELD(ppo.normalize_advantages)},
      {"ppo.threads", INT_FIELD(ppo.threads)},
      {"ppo.wall_clock", BOOL_FIELD(ppo.wall_clock)},
      {"env.n_pairs", INT_FIELD(env.n_pairs)},
      {"env.new_deck", BOOL_FIELD(env.new_deck)},
      {"env.reward_pair", DBL_FIELD(env.reward_pair)},
      {"env.penalty_flip", DBL_FIELD(env.penalty_flip)},
      {"rl.actor_hidden", INT_FIELD(actor_hidden)},
      {"rl.critic_hidden", INT_FIELD(critic_hidden)},
      {"convert.layers", Entry{[](ExperimentConfig& c, const std::string& v) {
                                 c.convert_layers = parse_length_list(v);
                               },
                               [](const ExperimentConfig& c) {
                                 return join_lengths(c.convert_layers);
                               }}},
      {"convert.calibration", INT_FIELD(convert_calibration)},
      {"convert.heldout", INT_FIELD(convert_heldout)},
      {"convert.duration", INT_FIELD(convert_duration)},
      {"seed", U64_FIELD(seed)},
  };
  return table;
}

#undef INT_FIELD
#undef U64_FIELD
#undef DBL_FIELD
#undef BOOL_FIELD

}  // namespace

void set_config_key(ExperimentConfig& config, const std::string& key, const std::string& value) {
  const auto& table = field_table();
  auto it = table.find(key);
  if (it == table.end()) fail_argument("config: unknown key '" + key + "'");
  it->second.set(config, value);
}

std::map<std::string, std::string> ExperimentConfig::resolved() const {
  std::map<std::string, std::string> out;
  out["task"] = task;
  out["preset"] = preset;
  for (const auto& [key, entry] : field_table()) out[key] = entry.get(*this);
  return out;
}

void ExperimentConfig::apply_preset() {
  const bool desk = preset == "desk";
  if (!desk && preset != "paper") fail_argument("config: unknown preset '" + preset + "'");

  train = TrainConfig{};
  model = ModelConfig{};
  assoc = AssociationTaskConfig{};
  ppo = PpoConfig{};
  env = ConcentrationConfig{};

  if (task == "assoc") {
    if (desk) {
      assoc.n_train = assoc.n_test = 3;
      assoc.label_range = 3;
      train.batch_size = 64;
      train.iterations = 1500;
    } else {
      assoc.n_train = assoc.n_test = 5;
      assoc.label_range = 5;
      train.batch_size = 512;
      train.iterations = 4250;
    }
  } else if (task == "ood") {
    assoc.label_range = 30;
    if (desk) {
      assoc.n_train = assoc.n_test = 3;
      train.batch_size = 64;
      train.iterations = 1500;
    } else {
      assoc.n_train = assoc.n_test = 5;
      train.batch_size = 512;
      train.iterations = 4250;
    }
  } else if (task == "rl") {
    env.n_pairs = 2;
    env.new_deck = false;
    if (desk) {
      ppo.n_envs = 16;
      ppo.minibatches = 4;
      ppo.iterations = 900;
    } else {
      ppo.n_envs = 64;
      ppo.minibatches = 16;
      ppo.iterations = 4000;
    }
    ppo.rollout_steps = env.n_pairs <= 2 ? 10 : 100;
    eval_episodes = 1000;
  } else if (task == "convert-demo" || task == "gradcheck") {
    // Defaults already match the demo scale.
  } else {
    fail_argument("config: unknown task '" + task + "'");
  }
  finalize();
}

void ExperimentConfig::finalize() {
  train.seed = seed;
  assoc.seed = seed;
  ppo.seed = seed;
  model.label_range = assoc.label_range;
  model.vec_dim = assoc.vec_dim;
}

RlModelConfig ExperimentConfig::rl_model() const {
  RlModelConfig rl;
  rl.core = model;
  rl.core.label_range = 1;  // unused by the RL pathway
  ConcentrationEnv probe(env);
  rl.obs_dim = probe.observation_dim();
  rl.n_actions = env.n_pairs * 2;
  rl.actor_hidden = actor_hidden;
  rl.critic_hidden = critic_hidden;
  return rl;
}

std::vector<std::pair<std::string, std::string>> parse_config_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) fail_argument("config: cannot open '" + path + "'");
  std::vector<std::pair<std::string, std::string>> entries;
  std::string line;
  std::size_t line_no = 0;
  auto trim = [](std::string s) {
    const auto a = s.find_first_not_of(" \t\r");
    const auto b = s.find_last_not_of(" \t\r");
    return a == std::string::npos ? std::string() : s.substr(a, b - a + 1);
  };
  while (std::getline(in, line)) {
    ++line_no;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      fail_argument("config: line " + std::to_string(line_no) + " of '" + path +
                    "' is not key = value");
    }
    entries.emplace_back(trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
  }
  return entries;
}

std::vector<std::int32_t> parse_length_list(const std::string& text) {
  std::vector<std::int32_t> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    const auto dots = item.find("..");
    if (dots != std::string::npos) {
      const long lo = std::strtol(item.substr(0, dots).c_str(), nullptr, 10);
      const long hi = std::strtol(item.substr(dots + 2).c_str(), nullptr, 10);
      HSNN_CHECK_ARG(lo >= 1 && hi >= lo, "config: bad range '" + item + "'");
      for (long v = lo; v <= hi; ++v) out.push_back(static_cast<std::int32_t>(v));
    } else if (!item.empty()) {
      out.push_back(static_cast<std::int32_t>(std::strtol(item.c_str(), nullptr, 10)));
    }
  }
  HSNN_CHECK_ARG(!out.empty(), "config: empty length list");
  return out;
}

std::string code_version() {
#ifdef HEBBSNN_GIT_REV
  return HEBBSNN_GIT_REV;
#else
  return "unknown";
#endif
}

}  // namespace hebbsnn
