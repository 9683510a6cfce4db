#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "hebbsnn/lif.hpp"

namespace hebbsnn {

// Dense feedforward rectified-linear network without biases; weights follow
// the project convention [input][output].
struct DenseReluNet {
  std::vector<Mat> weights;

  std::int32_t input_dim() const { return weights.empty() ? 0 : weights.front().rows; }
  std::int32_t depth() const { return static_cast<std::int32_t>(weights.size()); }
  void validate() const;

  // Per-layer ReLU activations for one input.
  std::vector<std::vector<double>> relu_activations(std::span<const double> x) const;
};

// Threshold balancing for converting the rectified-linear net into a spiking
// net of leakless IF neurons. Calibration inputs drive a LIF front end with
// constant current, exactly as at inference. Thresholds start at zero and are
// set layer by layer: with all earlier thresholds fixed, every calibration
// sample is forwarded as spikes and the layer's threshold becomes the maximum
// incoming weighted sum-of-spikes observed over samples, neurons and time
// steps (floored at 1e-6 for degenerate all-zero layers).
std::vector<double> balance_thresholds(const DenseReluNet& net,
                                       std::span<const std::vector<double>> calibration_inputs,
                                       std::int32_t duration_steps, const LifParams& front_end,
                                       bool parallel = true);

// Forward pass of the converted net for one input: LIF front end followed by
// IF layers with the balanced thresholds. Returns per-layer spike counts
// (entry 0 is the front end, entry k the k-th IF layer).
std::vector<std::vector<double>> run_converted(const DenseReluNet& net,
                                               std::span<const double> thresholds,
                                               std::span<const double> input,
                                               std::int32_t duration_steps,
                                               const LifParams& front_end);

// Pearson correlation between two equal-length samples.
double pearson_correlation(std::span<const double> a, std::span<const double> b);

}  // namespace hebbsnn
