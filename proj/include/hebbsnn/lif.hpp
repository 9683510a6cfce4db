#pragma once

#include <cmath>
#include <cstdint>
#include <span>
#include <vector>

#include "hebbsnn/common.hpp"

namespace hebbsnn {

struct LifParams {
  double theta = 0.1;      // firing threshold
  double tau_m = 20.0;     // membrane time constant [ms]
  double delta_abs = 3.0;  // absolute refractory period [ms]
  double dt = 1.0;         // simulation step [ms]

  double alpha() const { return std::exp(-dt / tau_m); }
  std::int32_t refractory_steps() const {
    const double steps = delta_abs / dt;
    const auto n = static_cast<std::int32_t>(std::lround(steps));
    HSNN_CHECK_ARG(std::abs(steps - n) < 1e-9, "LifParams: delta_abs must be a multiple of dt");
    return n;
  }
};

// Membrane update shared between the plain stepper and the graph builder:
// V' = alpha * V + (1 - alpha) * I - theta * z.
inline double lif_membrane_update(double v, double current, double alpha, double one_minus_alpha,
                                  double theta, bool z) {
  return alpha * v + one_minus_alpha * current - (z ? theta : 0.0);
}

struct LifLayerState {
  std::vector<double> membrane;
  std::vector<std::int32_t> refractory_remaining;

  LifLayerState() = default;
  explicit LifLayerState(std::int32_t size) : membrane(size, 0.0), refractory_remaining(size, 0) {}
  std::int32_t size() const { return static_cast<std::int32_t>(membrane.size()); }
  void reset() {
    std::fill(membrane.begin(), membrane.end(), 0.0);
    std::fill(refractory_remaining.begin(), refractory_remaining.end(), 0);
  }
};

// One step of the leaky integrate-and-fire dynamics. A neuron spikes when its
// membrane strictly exceeds theta and it is not refractory; the membrane is
// then reset by subtracting theta and keeps integrating while the refractory
// counter runs down.
void lif_step(LifLayerState& state, std::span<const double> input_current, const LifParams& params,
              std::span<std::uint8_t> spikes_out);

// Leakless integrate-and-fire used by converted rectified-linear networks:
// V' = V + I - theta_layer * z, with the spike evaluated on the integrated
// potential V + I (strictly above theta_layer).
struct IfLayerState {
  std::vector<double> membrane;
  double layer_threshold = 0.0;  // set by threshold balancing

  IfLayerState() = default;
  explicit IfLayerState(std::int32_t size) : membrane(size, 0.0) {}
  std::int32_t size() const { return static_cast<std::int32_t>(membrane.size()); }
  void reset() { std::fill(membrane.begin(), membrane.end(), 0.0); }
};

void if_step(IfLayerState& state, std::span<const double> input_current,
             std::span<std::uint8_t> spikes_out);

// Spike raster, steps-major: z[t * neurons + i].
struct SpikeRaster {
  std::int32_t neurons = 0;
  std::int32_t steps = 0;
  std::vector<std::uint8_t> z;

  SpikeRaster() = default;
  SpikeRaster(std::int32_t n, std::int32_t t)
      : neurons(n), steps(t), z(static_cast<std::size_t>(n) * t, 0) {}
  std::uint8_t* step(std::int32_t t) { return z.data() + static_cast<std::size_t>(t) * neurons; }
  const std::uint8_t* step(std::int32_t t) const {
    return z.data() + static_cast<std::size_t>(t) * neurons;
  }
};

// Drives a fresh LIF layer with the constant current weights^T x for
// `steps` time steps and returns every spike. Layer state starts at zero, so
// successive encodings are independent.
SpikeRaster encode_constant_current(std::span<const double> x, const Mat& weights,
                                    std::int32_t steps, const LifParams& params);

// Per-neuron spike counts over the final tau_read_steps of the raster.
std::vector<double> readout_sum(const SpikeRaster& raster, std::int32_t tau_read_steps);

}  // namespace hebbsnn
