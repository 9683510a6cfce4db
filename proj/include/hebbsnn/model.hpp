#pragma once

#include <array>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "hebbsnn/checkpoint.hpp"
#include "hebbsnn/graph.hpp"
#include "hebbsnn/hebbian.hpp"
#include "hebbsnn/lif.hpp"

namespace hebbsnn {

struct ModelConfig {
  std::int32_t tau_sim_steps = 100;   // per-input simulation window
  std::int32_t tau_read_steps = 30;   // readout window at the end of the query
  std::int32_t d_feedback_steps = 1;  // value->key feedback delay
  std::int32_t l = 100;               // key/value layer size
  std::int32_t encoder_size = 80;     // neurons per encoder stream
  std::int32_t vec_dim = 10;
  std::int32_t label_range = 3;  // L_max; also the output dimension
  LifParams lif;
  HebbianParams hebbian;
  double surrogate_beta = 1.0;
  bool plasticity_on_recall = true;

  SurrogateParams surrogate() const { return {surrogate_beta, lif.theta}; }
  // Facts are encoded by both streams; the query by the vector stream only.
  MemoryLayout assoc_layout() const { return {l, 2 * encoder_size, encoder_size}; }
  MemoryLayout rl_layout() const { return {l, encoder_size, encoder_size}; }
  void validate() const;

  std::map<std::string, std::string> to_meta(const std::string& prefix) const;
  static ModelConfig from_meta(const std::map<std::string, std::string>& meta,
                               const std::string& prefix);
};

struct Fact {
  std::vector<double> vec;
  std::int32_t label = 0;  // in [1, label_range]
};

struct EpisodeInput {
  std::vector<Fact> facts;
  std::vector<double> query;
  std::int32_t target_label = 0;
};

struct AssocParams {
  Mat w_enc_vec;  // vec_dim x encoder_size
  Mat w_enc_lab;  // label_range x encoder_size
  MemoryWeights mem;
  Mat w_out;  // l x label_range

  explicit AssocParams(const ModelConfig& config);
};

struct ParamView {
  std::string name;
  double* data = nullptr;
  std::size_t size = 0;
};
std::vector<ParamView> param_views(AssocParams& p);

// Regularized layers in fixed order.
enum AssocLayer : std::int32_t { kVecEncoder = 0, kLabEncoder = 1, kKeyLayer = 2, kValueLayer = 3 };
inline constexpr std::array<const char*, 4> kAssocLayerNames = {"enc_vec", "enc_lab", "key",
                                                                "value"};

// Per-neuron spike totals plus simulated step counts, one entry per layer.
struct SpikeStats {
  std::vector<std::vector<double>> counts;
  std::vector<std::int64_t> steps;
};

struct RunCapture {
  SpikeRaster key;
  SpikeRaster value;
};

struct AssocRunResult {
  std::vector<double> logits;
  std::int32_t predicted_label = 0;  // argmax(logits) + 1, lowest index wins ties
  SpikeStats stats;
};

// Runs one episode: every fact drives the store pathway for tau_sim steps
// (vector and label encoders concatenated), the query drives the recall
// pathway, and the logits are read from the value-layer spike counts over the
// final tau_read steps. All state except the parameters starts at zero.
AssocRunResult run_sequence(const AssocParams& params, const ModelConfig& config,
                            const EpisodeInput& episode, RunCapture* capture = nullptr);

struct AssocParamLeaves {
  NodeId w_enc_vec = kNoNode, w_enc_lab = kNoNode;
  NodeId w_s_key = kNoNode, w_s_value = kNoNode, w_r_key = kNoNode;
  NodeId w_out = kNoNode;
  std::array<NodeId, 6> all() const {
    return {w_enc_vec, w_enc_lab, w_s_key, w_s_value, w_r_key, w_out};
  }
};

struct AssocGraphResult {
  AssocParamLeaves params;
  NodeId logits = kNoNode;
  NodeId loss_ce = kNoNode;
  std::array<NodeId, 4> layer_spike_sums{kNoNode, kNoNode, kNoNode, kNoNode};
};

// Differentiable unrolling of run_sequence. Forward trajectories match the
// plain runner bit for bit; gradients flow through the membrane recurrences,
// traces, Hebbian weight updates and the feedback ring.
AssocGraphResult build_sequence_graph(Graph& g, const AssocParams& params,
                                      const ModelConfig& config, const EpisodeInput& episode);

// --- Reinforcement-learning variant -----------------------------------------

// Fully-connected head with tanh hidden activations and a linear output.
struct Mlp {
  std::vector<Mat> w;  // [in][out] per layer
  std::vector<std::vector<double>> b;

  static Mlp make(std::span<const std::int32_t> sizes);
  std::vector<double> forward(std::span<const double> x) const;

  struct GraphLeaves {
    std::vector<NodeId> w, b;
  };
  GraphLeaves make_leaves(Graph& g) const;
  NodeId build(Graph& g, const GraphLeaves& leaves, NodeId x) const;
};

struct RlModelConfig {
  ModelConfig core;
  std::int32_t obs_dim = 26;
  std::int32_t n_actions = 4;
  std::int32_t actor_hidden = 100;
  std::int32_t critic_hidden = 100;
  void validate() const;
};

struct RlParams {
  Mat w_enc_obs;  // obs_dim x encoder_size
  MemoryWeights mem;
  Mlp actor;   // l -> hidden -> hidden -> n_actions
  Mlp critic;  // (l + obs_dim) -> hidden -> hidden -> 1

  explicit RlParams(const RlModelConfig& config);
};
std::vector<ParamView> param_views(RlParams& p);

// Persistent network state within an RL episode. The encoder is re-encoded
// from scratch for each observation; everything else carries across steps.
struct RlCarry {
  HebbianMemoryState mem;

  RlCarry() = default;
  explicit RlCarry(const RlModelConfig& config)
      : mem(config.core.rl_layout(), config.core.d_feedback_steps) {}
  void reset() { mem.reset(); }
};

// Encodes the observation once and drives both memory pathways with it for
// tau_sim steps; returns the value-layer spike counts over the last tau_read
// steps and advances the carry.
std::vector<double> run_rl_step(const RlParams& params, const RlModelConfig& config,
                                std::span<const double> obs, RlCarry& carry,
                                SpikeStats* stats = nullptr);

struct RlSegmentGraph {
  NodeId w_enc_obs = kNoNode;
  NodeId w_s_key = kNoNode, w_s_value = kNoNode, w_r_key = kNoNode;
  Mlp::GraphLeaves actor, critic;
  std::vector<NodeId> logits;  // one per step
  std::vector<NodeId> values;  // one scalar per step
};

// Differentiable re-run of a rollout segment from a detached carry snapshot.
// resets[t] = 1 restores a fresh zero carry before step t (episode boundary).
RlSegmentGraph build_rl_segment_graph(Graph& g, const RlParams& params,
                                      const RlModelConfig& config, const RlCarry& carry_start,
                                      std::span<const std::vector<double>> observations,
                                      std::span<const std::uint8_t> resets);

// --- Checkpoints -------------------------------------------------------------

void save_assoc_checkpoint(const std::string& path, const AssocParams& params,
                           const ModelConfig& config,
                           const std::map<std::string, std::string>& extra_meta = {});
AssocParams load_assoc_checkpoint(const std::string& path, ModelConfig* config_out,
                                  std::map<std::string, std::string>* meta_out = nullptr);

void save_rl_checkpoint(const std::string& path, const RlParams& params,
                        const RlModelConfig& config,
                        const std::map<std::string, std::string>& extra_meta = {});
RlParams load_rl_checkpoint(const std::string& path, RlModelConfig* config_out,
                            std::map<std::string, std::string>* meta_out = nullptr);

}  // namespace hebbsnn
