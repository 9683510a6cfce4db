#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "hebbsnn/graph.hpp"
#include "hebbsnn/lif.hpp"

namespace hebbsnn {

struct HebbianParams {
  double gamma_plus = 0.3;   // write factor
  double gamma_minus = 0.3;  // forget factor
  double w_max = 1.0;        // soft weight maximum
  double tau_trace = 20.0;   // trace time constant [ms]
  double c = 0.2;            // mixing constant on the associative current while storing

  double trace_decay(double dt) const { return std::exp(-dt / tau_trace); }
  HebbianRule rule() const { return {gamma_plus, gamma_minus, w_max}; }
};

struct MemoryLayout {
  std::int32_t l = 100;        // key/value layer size
  std::int32_t d_store = 80;   // encoder width feeding the store pathway
  std::int32_t d_recall = 80;  // encoder width feeding the recall pathway
};

// Learned projections around the plastic association matrix.
// Layout convention: rows index the presynaptic (input) side.
struct MemoryWeights {
  Mat w_s_key;    // d_store x l
  Mat w_s_value;  // d_store x l
  Mat w_r_key;    // (d_recall + l) x l; the trailing l rows receive the delayed
                  // value-layer feedback

  explicit MemoryWeights(const MemoryLayout& layout = {})
      : w_s_key(layout.d_store, layout.l),
        w_s_value(layout.d_store, layout.l),
        w_r_key(layout.d_recall + layout.l, layout.l) {}
};

// Trace update shared with the graph builder: decay first, then increment by
// (1 - decay) per spike, so a single spike leaves exactly (1 - decay).
inline double trace_step_value(double kappa, double z, double decay) {
  return decay * kappa + (1.0 - decay) * z;
}

void trace_update(std::span<double> kappa, std::span<const std::uint8_t> spikes, double decay);

// Weight change of the soft-bounded Hebbian rule for the whole matrix;
// delta[j][k] depends only on w[j][k] and the traces at j (key) and k (value).
void hebbian_update(const Mat& w, std::span<const double> kappa_key,
                    std::span<const double> kappa_value, const HebbianParams& params, Mat& delta);

// Applies w[j][k] += hebbian_delta(...) in place (same arithmetic as the
// graph op, so forward trajectories agree bit for bit).
void hebbian_apply(Mat& w, std::span<const double> kappa_key, std::span<const double> kappa_value,
                   const HebbianRule& rule);

// Dynamic state of the associative memory: plastic weights, activity traces,
// the key/value LIF layers and the delayed value->key feedback ring.
struct HebbianMemoryState {
  Mat w_assoc;  // l x l, rows = key (presynaptic), cols = value
  std::vector<double> kappa_key;
  std::vector<double> kappa_value;
  LifLayerState key_state;
  LifLayerState value_state;
  std::vector<std::uint8_t> feedback_ring;  // fb_depth frames of value spikes
  std::int32_t fb_depth = 1;
  std::int64_t step = 0;  // ring cursor

  HebbianMemoryState() = default;
  HebbianMemoryState(const MemoryLayout& layout, std::int32_t feedback_steps);
  std::int32_t l() const { return static_cast<std::int32_t>(kappa_key.size()); }
  void reset();

  std::span<const std::uint8_t> delayed_value_spikes() const;
  void push_value_spikes(std::span<const std::uint8_t> z_value);
};

// One simulation step of the store pathway:
//   I_key = W_s_key^T z_enc
//   I_value = W_s_value^T z_enc + c * W_assoc^T z_key
// followed by trace updates from both layers' spikes and the Hebbian update.
// Currents use the pre-update W_assoc; the weight change lands afterwards.
void store_step(HebbianMemoryState& state, const MemoryWeights& weights,
                std::span<const std::uint8_t> z_enc, const LifParams& lif,
                const HebbianParams& hebb, std::span<std::uint8_t> z_key_out,
                std::span<std::uint8_t> z_value_out, bool plasticity = true);

// One simulation step of the recall pathway:
//   I_key = W_r_key^T [z_enc ; z_value(t - d_feedback)]
//   I_value = W_assoc^T z_key
// The feedback ring is pushed every recall step. Plasticity runs here too
// unless disabled (the rule is an autonomous network dynamic).
void recall_step(HebbianMemoryState& state, const MemoryWeights& weights,
                 std::span<const std::uint8_t> z_enc, const LifParams& lif,
                 const HebbianParams& hebb, std::span<std::uint8_t> z_key_out,
                 std::span<std::uint8_t> z_value_out, bool plasticity = true);

// Combined pathway used when the network must decide on its own when to store
// and recall: one encoding drives both projections every step,
//   I_key = W_s_key^T z_enc + W_r_key^T [z_enc ; z_value(t - d_feedback)]
//   I_value = W_s_value^T z_enc + c * W_assoc^T z_key
void combined_step(HebbianMemoryState& state, const MemoryWeights& weights,
                   std::span<const std::uint8_t> z_enc, const LifParams& lif,
                   const HebbianParams& hebb, std::span<std::uint8_t> z_key_out,
                   std::span<std::uint8_t> z_value_out, bool plasticity = true);

// Zeroes the association matrix, traces, feedback ring and layer states.
void reset_memory(HebbianMemoryState& state);

}  // namespace hebbsnn
