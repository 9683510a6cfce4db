#include "hebbsnn/ppo.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstring>
#include <deque>
#include <numeric>

#include "hebbsnn/parallel.hpp"
#include "hebbsnn/training.hpp"

namespace hebbsnn {

void PpoConfig::validate() const {
  HSNN_CHECK_ARG(n_envs >= 1 && rollout_steps >= 1, "ppo: need envs and steps");
  HSNN_CHECK_ARG(iterations >= 0 && epochs >= 1, "ppo: bad schedule");
  HSNN_CHECK_ARG(minibatches >= 1 && minibatches <= n_envs, "ppo: minibatches out of range");
  HSNN_CHECK_ARG(lr > 0.0 && grad_clip > 0.0, "ppo: bad optimizer settings");
  HSNN_CHECK_ARG(clip > 0.0 && clip < 1.0, "ppo: clip must be in (0,1)");
  HSNN_CHECK_ARG(gamma > 0.0 && gamma <= 1.0, "ppo: gamma must be in (0,1]");
  HSNN_CHECK_ARG(gae_lambda == 1.0, "ppo: only plain discounted returns are implemented");
}

std::vector<double> compute_returns(std::span<const double> rewards,
                                    std::span<const std::uint8_t> dones, double gamma,
                                    double bootstrap_value) {
  HSNN_CHECK_ARG(rewards.size() == dones.size(), "compute_returns: size mismatch");
  std::vector<double> returns(rewards.size());
  double running = bootstrap_value;
  for (std::int64_t t = static_cast<std::int64_t>(rewards.size()) - 1; t >= 0; --t) {
    if (dones[t]) running = 0.0;
    running = rewards[t] + gamma * running;
    returns[t] = running;
  }
  return returns;
}

void rl_init_params(RlParams& params, Rng& rng) {
  const double gain = std::sqrt(2.0);
  glorot_init(params.w_enc_obs, rng, gain);
  glorot_init(params.mem.w_s_key, rng, gain);
  glorot_init(params.mem.w_s_value, rng, gain);
  glorot_init(params.mem.w_r_key, rng, gain);
  for (std::size_t i = 0; i < params.actor.w.size(); ++i) {
    const bool last = i + 1 == params.actor.w.size();
    orthogonal_init(params.actor.w[i], rng, last ? 0.01 : gain);
    std::fill(params.actor.b[i].begin(), params.actor.b[i].end(), 0.0);
  }
  for (std::size_t i = 0; i < params.critic.w.size(); ++i) {
    const bool last = i + 1 == params.critic.w.size();
    orthogonal_init(params.critic.w[i], rng, last ? 1.0 : gain);
    std::fill(params.critic.b[i].begin(), params.critic.b[i].end(), 0.0);
  }
}

namespace {

std::vector<double> softmax(std::span<const double> logits) {
  double mx = logits[0];
  for (double v : logits) mx = std::max(mx, v);
  std::vector<double> p(logits.size());
  double z = 0.0;
  for (std::size_t i = 0; i < logits.size(); ++i) {
    p[i] = std::exp(logits[i] - mx);
    z += p[i];
  }
  for (double& v : p) v /= z;
  return p;
}

double log_softmax_at(std::span<const double> logits, std::int32_t index) {
  double mx = logits[0];
  for (double v : logits) mx = std::max(mx, v);
  double z = 0.0;
  for (double v : logits) z += std::exp(v - mx);
  return logits[index] - mx - std::log(z);
}

std::int32_t sample_categorical(std::span<const double> probs, Rng& rng) {
  const double u = rng.uniform();
  double acc = 0.0;
  for (std::size_t i = 0; i < probs.size(); ++i) {
    acc += probs[i];
    if (u < acc) return static_cast<std::int32_t>(i);
  }
  return static_cast<std::int32_t>(probs.size()) - 1;
}

struct EnvRollout {
  std::vector<std::vector<double>> observations;  // pre-action obs per step
  std::vector<std::int32_t> actions;
  std::vector<double> logp_old;
  std::vector<double> values_old;
  std::vector<double> rewards;
  std::vector<std::uint8_t> dones;
  std::vector<std::uint8_t> resets;  // carry reset happened before this step
  double bootstrap = 0.0;
  std::vector<std::pair<std::int64_t, double>> finished_games;  // (flips, reward)
};

}  // namespace

PpoResult ppo_train(const PpoConfig& ppo, const RlModelConfig& model,
                    const ConcentrationConfig& env_config, RlParams& params,
                    const PpoCallbacks& callbacks) {
  ppo.validate();
  model.validate();
  HSNN_CHECK_ARG(model.n_actions == env_config.n_pairs * 2,
                 "ppo_train: action head does not match the deck size");
#ifdef _OPENMP
  if (ppo.threads > 0) omp_set_num_threads(ppo.threads);
#endif
  const std::int32_t E = ppo.n_envs;
  const std::int32_t T = ppo.rollout_steps;
  const bool parallel = ppo.parallel();

  std::vector<ParamView> views = param_views(params);
  AdamState adam = AdamState::init(views);

  std::vector<ConcentrationEnv> envs(E, ConcentrationEnv(env_config));
  std::vector<Rng> env_rngs;
  for (std::int32_t i = 0; i < E; ++i) env_rngs.emplace_back(derive_seed(ppo.seed, 0x656e76ull, i));
  std::vector<RlCarry> carries(E, RlCarry(model));
  std::vector<std::vector<double>> obs(E);
  std::vector<double> episode_reward(E, 0.0);
  for (std::int32_t i = 0; i < E; ++i) obs[i] = envs[i].reset(env_rngs[i]);

  Rng update_rng(derive_seed(ppo.seed, 0x75706474ull, 0));
  std::vector<std::unique_ptr<Graph>> graphs(hardware_threads());
  for (auto& g : graphs) g = std::make_unique<Graph>();

  std::deque<std::int64_t> recent_flips;
  std::int64_t game_counter = 0;
  PpoResult result;

  std::vector<EnvRollout> rollouts(E);
  std::vector<RlCarry> snapshots(E, RlCarry(model));
  std::vector<std::vector<std::vector<double>>> env_grads(
      E, std::vector<std::vector<double>>(views.size()));
  for (auto& per_env : env_grads) {
    for (std::size_t t = 0; t < views.size(); ++t) per_env[t].resize(views[t].size);
  }
  std::vector<std::vector<double>> total_grads(views.size());
  for (std::size_t t = 0; t < views.size(); ++t) total_grads[t].resize(views[t].size);

  for (std::int64_t it = 0; it < ppo.iterations; ++it) {
    const auto t_start = std::chrono::steady_clock::now();

    // Rollout with the current policy; carries persist across iterations and
    // reset only at episode boundaries.
    parallel_for(static_cast<std::size_t>(E), parallel, [&](std::size_t i) {
      EnvRollout& ro = rollouts[i];
      ro = EnvRollout{};
      snapshots[i] = carries[i];
      for (std::int32_t t = 0; t < T; ++t) {
        ro.resets.push_back(0);
        ro.observations.push_back(obs[i]);
        const std::vector<double> features = run_rl_step(params, model, obs[i], carries[i]);
        const std::vector<double> logits = params.actor.forward(features);
        std::vector<double> critic_in(features);
        critic_in.insert(critic_in.end(), obs[i].begin(), obs[i].end());
        const double value = params.critic.forward(critic_in)[0];
        const std::vector<double> probs = softmax(logits);
        const std::int32_t action = sample_categorical(probs, env_rngs[i]);
        ro.actions.push_back(action);
        ro.logp_old.push_back(log_softmax_at(logits, action));
        ro.values_old.push_back(value);
        auto sr = envs[i].step(action + 1);
        episode_reward[i] += sr.reward;
        ro.rewards.push_back(sr.reward);
        ro.dones.push_back(sr.done ? 1 : 0);
        if (sr.done) {
          ro.finished_games.emplace_back(envs[i].flips_so_far(), episode_reward[i]);
          episode_reward[i] = 0.0;
          obs[i] = envs[i].reset(env_rngs[i]);
          carries[i].reset();
        } else {
          obs[i] = sr.observation;
        }
      }
      // A done at step t resets the carry before step t+1.
      for (std::int32_t t = 1; t < T; ++t) ro.resets[t] = ro.dones[t - 1];
      // Bootstrap with the value of the next state unless the segment ended
      // an episode; the probe carry copy keeps the live carry untouched.
      if (ro.dones.back()) {
        ro.bootstrap = 0.0;
      } else {
        RlCarry probe = carries[i];
        const std::vector<double> features = run_rl_step(params, model, obs[i], probe);
        std::vector<double> critic_in(features);
        critic_in.insert(critic_in.end(), obs[i].begin(), obs[i].end());
        ro.bootstrap = params.critic.forward(critic_in)[0];
      }
    });

    // Deterministic game log, env-major.
    for (std::int32_t i = 0; i < E; ++i) {
      for (const auto& [flips, reward] : rollouts[i].finished_games) {
        if (callbacks.on_game) callbacks.on_game(game_counter, flips, reward);
        ++game_counter;
        recent_flips.push_back(flips);
        while (recent_flips.size() > 100) recent_flips.pop_front();
      }
    }

    // Returns and advantages.
    std::vector<std::vector<double>> returns(E), advantages(E);
    for (std::int32_t i = 0; i < E; ++i) {
      returns[i] =
          compute_returns(rollouts[i].rewards, rollouts[i].dones, ppo.gamma, rollouts[i].bootstrap);
      advantages[i].resize(T);
      for (std::int32_t t = 0; t < T; ++t) {
        advantages[i][t] = returns[i][t] - rollouts[i].values_old[t];
      }
    }
    if (ppo.normalize_advantages) {
      double mean = 0.0;
      for (const auto& a : advantages) {
        mean = std::accumulate(a.begin(), a.end(), mean);
      }
      mean /= static_cast<double>(E) * T;
      double var = 0.0;
      for (const auto& a : advantages) {
        for (double v : a) var += (v - mean) * (v - mean);
      }
      var /= static_cast<double>(E) * T;
      const double scale = 1.0 / (std::sqrt(var) + 1e-8);
      for (auto& a : advantages) {
        for (double& v : a) v = (v - mean) * scale;
      }
    }

    // Clipped-surrogate updates over env minibatches; each epoch replays
    // every env segment once from its detached snapshot.
    double sum_policy_loss = 0.0, sum_value_loss = 0.0, sum_entropy = 0.0;
    std::int64_t loss_samples = 0;
    std::vector<std::int32_t> order(E);
    std::iota(order.begin(), order.end(), 0);
    for (std::int32_t epoch = 0; epoch < ppo.epochs; ++epoch) {
      for (std::int32_t i = E - 1; i > 0; --i) {
        const auto j = static_cast<std::int32_t>(update_rng.uniform_int(i + 1));
        std::swap(order[i], order[j]);
      }
      for (std::int32_t mb = 0; mb < ppo.minibatches; ++mb) {
        const std::int32_t lo = static_cast<std::int32_t>(
            static_cast<std::int64_t>(mb) * E / ppo.minibatches);
        const std::int32_t hi = static_cast<std::int32_t>(
            static_cast<std::int64_t>(mb + 1) * E / ppo.minibatches);
        if (lo == hi) continue;
        std::vector<std::int32_t> group(order.begin() + lo, order.begin() + hi);
        std::sort(group.begin(), group.end());  // fixed reduction order
        const std::int64_t M = static_cast<std::int64_t>(group.size()) * T;

        std::vector<double> mb_policy(group.size(), 0.0), mb_value(group.size(), 0.0),
            mb_entropy(group.size(), 0.0);
        parallel_for(group.size(), parallel, [&](std::size_t gi) {
          const std::int32_t env = group[gi];
#ifdef _OPENMP
          Graph& g = *graphs[omp_get_thread_num()];
#else
          Graph& g = *graphs[0];
#endif
          g.clear();
          const EnvRollout& ro = rollouts[env];
          const RlSegmentGraph seg = build_rl_segment_graph(
              g, params, model, snapshots[env], ro.observations, ro.resets);
          std::vector<GradSeed> seeds;
          for (std::int32_t t = 0; t < T; ++t) {
            NodeId logp = g.log_softmax_pick(seg.logits[t], ro.actions[t]);
            NodeId pl =
                g.ppo_policy_loss(logp, ro.logp_old[t], advantages[env][t], ppo.clip);
            NodeId ent = g.softmax_entropy(seg.logits[t]);
            NodeId vl = g.squared_error(seg.values[t], returns[env][t]);
            seeds.push_back({pl, 1.0 / static_cast<double>(M), nullptr});
            seeds.push_back({ent, -ppo.entropy_coef / static_cast<double>(M), nullptr});
            seeds.push_back({vl, ppo.value_coef / static_cast<double>(M), nullptr});
            mb_policy[gi] += g.value_scalar(pl);
            mb_value[gi] += g.value_scalar(vl);
            mb_entropy[gi] += g.value_scalar(ent);
          }
          g.backward(seeds);
          auto collect = [&](NodeId leaf, std::size_t slot) {
            const double* grad = g.grad(leaf);
            auto& dst = env_grads[env][slot];
            if (grad) {
              std::memcpy(dst.data(), grad, dst.size() * sizeof(double));
            } else {
              std::fill(dst.begin(), dst.end(), 0.0);
            }
          };
          std::size_t slot = 0;
          collect(seg.w_enc_obs, slot++);
          collect(seg.w_s_key, slot++);
          collect(seg.w_s_value, slot++);
          collect(seg.w_r_key, slot++);
          for (std::size_t k = 0; k < seg.actor.w.size(); ++k) {
            collect(seg.actor.w[k], slot++);
            collect(seg.actor.b[k], slot++);
          }
          for (std::size_t k = 0; k < seg.critic.w.size(); ++k) {
            collect(seg.critic.w[k], slot++);
            collect(seg.critic.b[k], slot++);
          }
        });

        for (std::size_t t = 0; t < views.size(); ++t) {
          std::fill(total_grads[t].begin(), total_grads[t].end(), 0.0);
          for (std::int32_t env : group) {
            const auto& src = env_grads[env][t];
            for (std::size_t k = 0; k < src.size(); ++k) total_grads[t][k] += src[k];
          }
        }
        clip_gradients(total_grads, ppo.grad_clip);
        adam_step(views, total_grads, adam, ppo.lr);

        for (std::size_t gi = 0; gi < group.size(); ++gi) {
          sum_policy_loss += mb_policy[gi];
          sum_value_loss += mb_value[gi];
          sum_entropy += mb_entropy[gi];
        }
        loss_samples += M;
      }
    }

    const auto t_end = std::chrono::steady_clock::now();
    const std::int64_t wall_ms =
        ppo.wall_clock
            ? std::chrono::duration_cast<std::chrono::milliseconds>(t_end - t_start).count()
            : 0;
    double mean_flips = 0.0;
    if (!recent_flips.empty()) {
      mean_flips = std::accumulate(recent_flips.begin(), recent_flips.end(), 0.0) /
                   static_cast<double>(recent_flips.size());
    }
    if (callbacks.on_iteration) {
      const double denom = loss_samples > 0 ? static_cast<double>(loss_samples) : 1.0;
      callbacks.on_iteration(it, mean_flips, sum_policy_loss / denom, sum_value_loss / denom,
                             sum_entropy / denom, ppo.lr, wall_ms);
    }
    if (callbacks.on_checkpoint && callbacks.checkpoint_interval > 0 &&
        (it + 1) % callbacks.checkpoint_interval == 0) {
      callbacks.on_checkpoint(it + 1, params);
    }
    result.games_played = game_counter;
    result.recent_mean_flips = mean_flips;
  }
  return result;
}

AgentEvalResult evaluate_rl_agent(const RlParams& params, const RlModelConfig& model,
                                  const ConcentrationConfig& env_config, std::int32_t n_games,
                                  std::uint64_t seed, std::int32_t max_flips, bool parallel) {
  HSNN_CHECK_ARG(n_games > 0, "evaluate_rl_agent: need games");
  AgentEvalResult out;
  out.flips_per_game.resize(n_games);
  out.reward_per_game.resize(n_games);
  parallel_for(static_cast<std::size_t>(n_games), parallel, [&](std::size_t i) {
    Rng rng(derive_seed(seed, 0x65766c67ull, i));
    ConcentrationEnv env(env_config);
    std::vector<double> obs = env.reset(rng);
    RlCarry carry(model);
    double reward = 0.0;
    std::int32_t flips = 0;
    while (!env.done() && flips < max_flips) {
      const std::vector<double> features = run_rl_step(params, model, obs, carry);
      const std::vector<double> logits = params.actor.forward(features);
      const auto best = std::max_element(logits.begin(), logits.end());
      const auto action = static_cast<std::int32_t>(best - logits.begin());
      auto sr = env.step(action + 1);
      reward += sr.reward;
      obs = sr.observation;
      ++flips;
      if (sr.done) break;
    }
    out.flips_per_game[i] = flips;
    out.reward_per_game[i] = reward;
  });
  double sum = 0.0;
  for (std::int32_t f : out.flips_per_game) sum += f;
  out.mean_flips = sum / n_games;
  return out;
}

}  // namespace hebbsnn
