#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include "hebbsnn/concentration.hpp"
#include "hebbsnn/model.hpp"

namespace hebbsnn {

struct PpoConfig {
  std::int32_t n_envs = 64;
  std::int32_t rollout_steps = 10;  // 100 for the 6-card game
  std::int32_t iterations = 4000;
  std::int32_t epochs = 4;
  std::int32_t minibatches = 16;  // env groups per epoch
  double lr = 3e-4;
  double value_coef = 0.1;
  double entropy_coef = 0.01;
  double gamma = 0.9;
  double clip = 0.2;
  double grad_clip = 0.5;
  double gae_lambda = 1.0;  // plain discounted returns minus value baseline
  bool normalize_advantages = true;
  std::uint64_t seed = 1;
  std::int32_t threads = 0;
  bool wall_clock = true;

  void validate() const;
  bool parallel() const { return threads != 1; }
};

// Discounted returns with bootstrapping at a non-terminal segment end:
// R_t = r_t + gamma * (done_t ? 0 : R_{t+1}), R_T = bootstrap_value.
std::vector<double> compute_returns(std::span<const double> rewards,
                                    std::span<const std::uint8_t> dones, double gamma,
                                    double bootstrap_value);

// Orthogonal init (gain sqrt(2) on hidden layers), zero biases. Output heads
// use small gains (0.01 policy, 1.0 value) so the initial policy is close to
// uniform.
void rl_init_params(RlParams& params, Rng& rng);

struct PpoCallbacks {
  std::function<void(std::int64_t iteration, double mean_flips, double policy_loss,
                     double value_loss, double entropy, double lr, std::int64_t wall_ms)>
      on_iteration;
  // Completed games in deterministic order (env-major within an iteration).
  std::function<void(std::int64_t game_index, std::int64_t n_flips, double total_reward)> on_game;
  std::function<void(std::int64_t iteration, const RlParams& params)> on_checkpoint;
  std::int32_t checkpoint_interval = 0;  // 0 disables periodic checkpoints
};

struct PpoResult {
  std::int64_t games_played = 0;
  double recent_mean_flips = 0.0;  // over the trailing 100 completed games
};

// Clipped-surrogate PPO in actor-critic style over vectorized Concentration
// environments. The SNN carry persists across env steps within an episode;
// updates re-run the unrolled network from a detached carry snapshot per
// rollout, truncating BPTT at the rollout boundary.
PpoResult ppo_train(const PpoConfig& ppo, const RlModelConfig& model,
                    const ConcentrationConfig& env_config, RlParams& params,
                    const PpoCallbacks& callbacks = {});

// Greedy (argmax) evaluation over fresh games with a fresh carry per game.
// Games are capped at max_flips to keep a defective policy from hanging.
AgentEvalResult evaluate_rl_agent(const RlParams& params, const RlModelConfig& model,
                                  const ConcentrationConfig& env_config, std::int32_t n_games,
                                  std::uint64_t seed, std::int32_t max_flips = 1000,
                                  bool parallel = true);

}  // namespace hebbsnn
