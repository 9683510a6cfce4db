#include "hebbsnn/lif.hpp"

namespace hebbsnn {

void lif_step(LifLayerState& state, std::span<const double> input_current, const LifParams& params,
              std::span<std::uint8_t> spikes_out) {
  const std::int32_t n = state.size();
  HSNN_CHECK_ARG(static_cast<std::int32_t>(input_current.size()) == n &&
                     static_cast<std::int32_t>(spikes_out.size()) == n,
                 "lif_step: size mismatch");
  const double alpha = params.alpha();
  const double one_minus_alpha = 1.0 - alpha;
  const double theta = params.theta;
  const double inv_theta = 1.0 / theta;
  const std::int32_t refr = params.refractory_steps();
  for (std::int32_t i = 0; i < n; ++i) {
    const bool eligible = state.refractory_remaining[i] == 0;
    // Strict threshold crossing, evaluated on the normalized potential
    // v = V/theta - 1 so the decision matches the unrolled graph bit for bit.
    const bool z = eligible && inv_theta * state.membrane[i] + (-1.0) > 0.0;
    spikes_out[i] = z ? 1 : 0;
    state.membrane[i] =
        lif_membrane_update(state.membrane[i], input_current[i], alpha, one_minus_alpha, theta, z);
    state.refractory_remaining[i] =
        z ? refr : (state.refractory_remaining[i] > 0 ? state.refractory_remaining[i] - 1 : 0);
  }
}

void if_step(IfLayerState& state, std::span<const double> input_current,
             std::span<std::uint8_t> spikes_out) {
  const std::int32_t n = state.size();
  HSNN_CHECK_ARG(static_cast<std::int32_t>(input_current.size()) == n &&
                     static_cast<std::int32_t>(spikes_out.size()) == n,
                 "if_step: size mismatch");
  HSNN_CHECK_STATE(state.layer_threshold > 0.0, "if_step: layer threshold not set");
  const double theta = state.layer_threshold;
  for (std::int32_t i = 0; i < n; ++i) {
    // Integrate, then fire on the updated potential.
    const double v = state.membrane[i] + input_current[i];
    const bool z = v > theta;
    spikes_out[i] = z ? 1 : 0;
    state.membrane[i] = v - (z ? theta : 0.0);
  }
}

SpikeRaster encode_constant_current(std::span<const double> x, const Mat& weights,
                                    std::int32_t steps, const LifParams& params) {
  HSNN_CHECK_ARG(static_cast<std::int32_t>(x.size()) == weights.rows,
                 "encode_constant_current: input dimension mismatch");
  const std::int32_t n = weights.cols;
  std::vector<double> current(n, 0.0);
  add_vecmat(x, weights, current);
  LifLayerState state(n);
  SpikeRaster raster(n, steps);
  for (std::int32_t t = 0; t < steps; ++t) {
    lif_step(state, current, params, {raster.step(t), static_cast<std::size_t>(n)});
  }
  return raster;
}

std::vector<double> readout_sum(const SpikeRaster& raster, std::int32_t tau_read_steps) {
  HSNN_CHECK_ARG(tau_read_steps >= 0 && tau_read_steps <= raster.steps,
                 "readout_sum: window exceeds raster duration");
  std::vector<double> counts(raster.neurons, 0.0);
  for (std::int32_t t = raster.steps - tau_read_steps; t < raster.steps; ++t) {
    const std::uint8_t* zt = raster.step(t);
    for (std::int32_t i = 0; i < raster.neurons; ++i) counts[i] += zt[i];
  }
  return counts;
}

}  // namespace hebbsnn
