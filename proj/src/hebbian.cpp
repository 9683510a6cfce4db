#include "hebbsnn/hebbian.hpp"

#include <cstring>

namespace hebbsnn {

void trace_update(std::span<double> kappa, std::span<const std::uint8_t> spikes, double decay) {
  HSNN_CHECK_ARG(kappa.size() == spikes.size(), "trace_update: size mismatch");
  for (std::size_t i = 0; i < kappa.size(); ++i) {
    kappa[i] = trace_step_value(kappa[i], spikes[i] ? 1.0 : 0.0, decay);
  }
}

void hebbian_update(const Mat& w, std::span<const double> kappa_key,
                    std::span<const double> kappa_value, const HebbianParams& params, Mat& delta) {
  HSNN_CHECK_ARG(w.rows == static_cast<std::int32_t>(kappa_key.size()) &&
                     w.cols == static_cast<std::int32_t>(kappa_value.size()),
                 "hebbian_update: dimension mismatch");
  if (delta.rows != w.rows || delta.cols != w.cols) delta = Mat(w.rows, w.cols);
  const HebbianRule rule = params.rule();
  for (std::int32_t j = 0; j < w.rows; ++j) {
    const double kkj = kappa_key[j];
    const double* wrow = w[j];
    double* drow = delta[j];
    if (kkj == 0.0) {
      std::memset(drow, 0, sizeof(double) * static_cast<std::size_t>(w.cols));
      continue;
    }
    for (std::int32_t k = 0; k < w.cols; ++k) {
      drow[k] = hebbian_delta(wrow[k], kkj, kappa_value[k], rule);
    }
  }
}

void hebbian_apply(Mat& w, std::span<const double> kappa_key, std::span<const double> kappa_value,
                   const HebbianRule& rule) {
  for (std::int32_t j = 0; j < w.rows; ++j) {
    const double kkj = kappa_key[j];
    if (kkj == 0.0) continue;
    double* wrow = w[j];
    for (std::int32_t k = 0; k < w.cols; ++k) {
      wrow[k] = wrow[k] + hebbian_delta(wrow[k], kkj, kappa_value[k], rule);
    }
  }
}

HebbianMemoryState::HebbianMemoryState(const MemoryLayout& layout, std::int32_t feedback_steps)
    : w_assoc(layout.l, layout.l),
      kappa_key(layout.l, 0.0),
      kappa_value(layout.l, 0.0),
      key_state(layout.l),
      value_state(layout.l),
      feedback_ring(static_cast<std::size_t>(std::max(feedback_steps, 1)) * layout.l, 0),
      fb_depth(std::max(feedback_steps, 1)) {
  HSNN_CHECK_ARG(feedback_steps >= 1, "HebbianMemoryState: feedback delay must be >= 1 step");
}

void HebbianMemoryState::reset() {
  w_assoc.zero();
  std::fill(kappa_key.begin(), kappa_key.end(), 0.0);
  std::fill(kappa_value.begin(), kappa_value.end(), 0.0);
  key_state.reset();
  value_state.reset();
  std::fill(feedback_ring.begin(), feedback_ring.end(), 0);
  step = 0;
}

std::span<const std::uint8_t> HebbianMemoryState::delayed_value_spikes() const {
  // Slot `step % fb_depth` holds the spikes pushed fb_depth steps ago (zeros
  // until the ring has wrapped once).
  const std::size_t slot = static_cast<std::size_t>(step % fb_depth);
  return {feedback_ring.data() + slot * l(), static_cast<std::size_t>(l())};
}

void HebbianMemoryState::push_value_spikes(std::span<const std::uint8_t> z_value) {
  const std::size_t slot = static_cast<std::size_t>(step % fb_depth);
  std::memcpy(feedback_ring.data() + slot * l(), z_value.data(), static_cast<std::size_t>(l()));
  ++step;
}

namespace {

void run_plasticity(HebbianMemoryState& state, std::span<const std::uint8_t> z_key,
                    std::span<const std::uint8_t> z_value, const LifParams& lif,
                    const HebbianParams& hebb) {
  const double decay = hebb.trace_decay(lif.dt);
  trace_update(state.kappa_key, z_key, decay);
  trace_update(state.kappa_value, z_value, decay);
  hebbian_apply(state.w_assoc, state.kappa_key, state.kappa_value, hebb.rule());
}

}  // namespace

void store_step(HebbianMemoryState& state, const MemoryWeights& weights,
                std::span<const std::uint8_t> z_enc, const LifParams& lif,
                const HebbianParams& hebb, std::span<std::uint8_t> z_key_out,
                std::span<std::uint8_t> z_value_out, bool plasticity) {
  const std::int32_t l = state.l();
  HSNN_CHECK_ARG(static_cast<std::int32_t>(z_enc.size()) == weights.w_s_key.rows,
                 "store_step: encoder dimension mismatch");
  std::vector<double> i_key(l, 0.0);
  add_vecmat(z_enc, weights.w_s_key, i_key);
  lif_step(state.key_state, i_key, lif, z_key_out);

  std::vector<double> i_store(l, 0.0);
  std::vector<double> i_assoc(l, 0.0);
  add_vecmat(z_enc, weights.w_s_value, i_store);
  add_vecmat(std::span<const std::uint8_t>(z_key_out.data(), z_key_out.size()), state.w_assoc,
             i_assoc);
  std::vector<double> i_value(l);
  for (std::int32_t k = 0; k < l; ++k) i_value[k] = 1.0 * i_store[k] + hebb.c * i_assoc[k];
  lif_step(state.value_state, i_value, lif, z_value_out);

  if (plasticity) {
    run_plasticity(state, {z_key_out.data(), z_key_out.size()},
                   {z_value_out.data(), z_value_out.size()}, lif, hebb);
  }
}

void recall_step(HebbianMemoryState& state, const MemoryWeights& weights,
                 std::span<const std::uint8_t> z_enc, const LifParams& lif,
                 const HebbianParams& hebb, std::span<std::uint8_t> z_key_out,
                 std::span<std::uint8_t> z_value_out, bool plasticity) {
  const std::int32_t l = state.l();
  HSNN_CHECK_ARG(static_cast<std::int32_t>(z_enc.size()) + l == weights.w_r_key.rows,
                 "recall_step: encoder dimension mismatch");
  std::vector<std::uint8_t> combined(z_enc.size() + static_cast<std::size_t>(l));
  std::memcpy(combined.data(), z_enc.data(), z_enc.size());
  const auto fb = state.delayed_value_spikes();
  std::memcpy(combined.data() + z_enc.size(), fb.data(), fb.size());

  std::vector<double> i_key(l, 0.0);
  add_vecmat(std::span<const std::uint8_t>(combined.data(), combined.size()), weights.w_r_key,
             i_key);
  lif_step(state.key_state, i_key, lif, z_key_out);

  std::vector<double> i_value(l, 0.0);
  add_vecmat(std::span<const std::uint8_t>(z_key_out.data(), z_key_out.size()), state.w_assoc,
             i_value);
  lif_step(state.value_state, i_value, lif, z_value_out);

  state.push_value_spikes({z_value_out.data(), z_value_out.size()});
  if (plasticity) {
    run_plasticity(state, {z_key_out.data(), z_key_out.size()},
                   {z_value_out.data(), z_value_out.size()}, lif, hebb);
  }
}

void combined_step(HebbianMemoryState& state, const MemoryWeights& weights,
                   std::span<const std::uint8_t> z_enc, const LifParams& lif,
                   const HebbianParams& hebb, std::span<std::uint8_t> z_key_out,
                   std::span<std::uint8_t> z_value_out, bool plasticity) {
  const std::int32_t l = state.l();
  HSNN_CHECK_ARG(static_cast<std::int32_t>(z_enc.size()) == weights.w_s_key.rows &&
                     static_cast<std::int32_t>(z_enc.size()) + l == weights.w_r_key.rows,
                 "combined_step: encoder dimension mismatch");
  std::vector<std::uint8_t> combined(z_enc.size() + static_cast<std::size_t>(l));
  std::memcpy(combined.data(), z_enc.data(), z_enc.size());
  const auto fb = state.delayed_value_spikes();
  std::memcpy(combined.data() + z_enc.size(), fb.data(), fb.size());

  std::vector<double> i_key_store(l, 0.0);
  std::vector<double> i_key_recall(l, 0.0);
  add_vecmat(z_enc, weights.w_s_key, i_key_store);
  add_vecmat(std::span<const std::uint8_t>(combined.data(), combined.size()), weights.w_r_key,
             i_key_recall);
  std::vector<double> i_key(l);
  for (std::int32_t k = 0; k < l; ++k) i_key[k] = i_key_store[k] + i_key_recall[k];
  lif_step(state.key_state, i_key, lif, z_key_out);

  std::vector<double> i_store(l, 0.0);
  std::vector<double> i_assoc(l, 0.0);
  add_vecmat(z_enc, weights.w_s_value, i_store);
  add_vecmat(std::span<const std::uint8_t>(z_key_out.data(), z_key_out.size()), state.w_assoc,
             i_assoc);
  std::vector<double> i_value(l);
  for (std::int32_t k = 0; k < l; ++k) i_value[k] = 1.0 * i_store[k] + hebb.c * i_assoc[k];
  lif_step(state.value_state, i_value, lif, z_value_out);

  state.push_value_spikes({z_value_out.data(), z_value_out.size()});
  if (plasticity) {
    run_plasticity(state, {z_key_out.data(), z_key_out.size()},
                   {z_value_out.data(), z_value_out.size()}, lif, hebb);
  }
}

void reset_memory(HebbianMemoryState& state) { state.reset(); }

}  // namespace hebbsnn
