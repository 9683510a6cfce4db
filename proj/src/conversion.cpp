#include "hebbsnn/conversion.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "hebbsnn/parallel.hpp"

namespace hebbsnn {

void DenseReluNet::validate() const {
  HSNN_CHECK_ARG(!weights.empty(), "DenseReluNet: empty network");
  for (std::size_t i = 0; i + 1 < weights.size(); ++i) {
    HSNN_CHECK_ARG(weights[i].cols == weights[i + 1].rows, "DenseReluNet: shapes do not compose");
  }
}

std::vector<std::vector<double>> DenseReluNet::relu_activations(std::span<const double> x) const {
  std::vector<std::vector<double>> acts;
  std::vector<double> h(x.begin(), x.end());
  for (const Mat& w : weights) {
    std::vector<double> lin(w.cols, 0.0);
    add_vecmat(h, w, lin);
    for (double& v : lin) v = std::max(v, 0.0);
    acts.push_back(lin);
    h = acts.back();
  }
  return acts;
}

namespace {

// Front-end raster for one calibration input: LIF neurons driven by the raw
// values as constant current.
SpikeRaster front_end_raster(std::span<const double> x, std::int32_t duration_steps,
                             const LifParams& params) {
  const auto n = static_cast<std::int32_t>(x.size());
  LifLayerState state(n);
  SpikeRaster raster(n, duration_steps);
  for (std::int32_t t = 0; t < duration_steps; ++t) {
    lif_step(state, x, params, {raster.step(t), static_cast<std::size_t>(n)});
  }
  return raster;
}

// Forwards one sample through the first `upto` IF layers and returns, per
// time step, the input current arriving at layer `upto` (the layer whose
// threshold is being calibrated).
double max_current_into_layer(const DenseReluNet& net, std::span<const double> thresholds,
                              std::span<const double> x, std::int32_t upto,
                              std::int32_t duration_steps, const LifParams& front_end) {
  const SpikeRaster input = front_end_raster(x, duration_steps, front_end);
  std::vector<IfLayerState> states;
  for (std::int32_t layer = 0; layer < upto; ++layer) {
    states.emplace_back(net.weights[layer].cols);
    states.back().layer_threshold = thresholds[layer];
  }
  std::vector<std::vector<std::uint8_t>> spikes(upto + 1);
  double max_current = -std::numeric_limits<double>::infinity();
  for (std::int32_t t = 0; t < duration_steps; ++t) {
    spikes[0].assign(input.step(t), input.step(t) + input.neurons);
    for (std::int32_t layer = 0; layer < upto; ++layer) {
      std::vector<double> current(net.weights[layer].cols, 0.0);
      add_vecmat(std::span<const std::uint8_t>(spikes[layer]), net.weights[layer], current);
      spikes[layer + 1].resize(net.weights[layer].cols);
      if_step(states[layer], current, spikes[layer + 1]);
    }
    std::vector<double> current(net.weights[upto].cols, 0.0);
    add_vecmat(std::span<const std::uint8_t>(spikes[upto]), net.weights[upto], current);
    for (double c : current) max_current = std::max(max_current, c);
  }
  return max_current;
}

}  // namespace

std::vector<double> balance_thresholds(const DenseReluNet& net,
                                       std::span<const std::vector<double>> calibration_inputs,
                                       std::int32_t duration_steps, const LifParams& front_end,
                                       bool parallel) {
  net.validate();
  HSNN_CHECK_ARG(!calibration_inputs.empty(), "balance_thresholds: empty calibration set");
  HSNN_CHECK_ARG(duration_steps > 0, "balance_thresholds: duration must be positive");
  constexpr double kThresholdFloor = 1e-6;

  std::vector<double> thresholds(net.depth(), 0.0);
  std::vector<double> per_sample(calibration_inputs.size());
  for (std::int32_t layer = 0; layer < net.depth(); ++layer) {
    // Fresh forward pass per layer with the thresholds fixed so far.
    parallel_for(calibration_inputs.size(), parallel, [&](std::size_t s) {
      per_sample[s] = max_current_into_layer(net, thresholds, calibration_inputs[s], layer,
                                             duration_steps, front_end);
    });
    double mx = -std::numeric_limits<double>::infinity();
    for (double v : per_sample) mx = std::max(mx, v);
    thresholds[layer] = std::max(mx, kThresholdFloor);
  }
  return thresholds;
}

std::vector<std::vector<double>> run_converted(const DenseReluNet& net,
                                               std::span<const double> thresholds,
                                               std::span<const double> input,
                                               std::int32_t duration_steps,
                                               const LifParams& front_end) {
  net.validate();
  HSNN_CHECK_ARG(static_cast<std::int32_t>(thresholds.size()) == net.depth(),
                 "run_converted: one threshold per layer required");
  const SpikeRaster raster = front_end_raster(input, duration_steps, front_end);

  std::vector<IfLayerState> states;
  for (std::int32_t layer = 0; layer < net.depth(); ++layer) {
    states.emplace_back(net.weights[layer].cols);
    states.back().layer_threshold = thresholds[layer];
  }
  std::vector<std::vector<double>> counts(net.depth() + 1);
  counts[0].assign(raster.neurons, 0.0);
  for (std::int32_t layer = 0; layer < net.depth(); ++layer) {
    counts[layer + 1].assign(net.weights[layer].cols, 0.0);
  }
  std::vector<std::vector<std::uint8_t>> spikes(net.depth() + 1);
  for (std::int32_t t = 0; t < duration_steps; ++t) {
    spikes[0].assign(raster.step(t), raster.step(t) + raster.neurons);
    for (std::int32_t i = 0; i < raster.neurons; ++i) counts[0][i] += spikes[0][i];
    for (std::int32_t layer = 0; layer < net.depth(); ++layer) {
      std::vector<double> current(net.weights[layer].cols, 0.0);
      add_vecmat(std::span<const std::uint8_t>(spikes[layer]), net.weights[layer], current);
      spikes[layer + 1].resize(net.weights[layer].cols);
      if_step(states[layer], current, spikes[layer + 1]);
      for (std::int32_t i = 0; i < net.weights[layer].cols; ++i) {
        counts[layer + 1][i] += spikes[layer + 1][i];
      }
    }
  }
  return counts;
}

double pearson_correlation(std::span<const double> a, std::span<const double> b) {
  HSNN_CHECK_ARG(a.size() == b.size() && a.size() >= 2, "pearson_correlation: bad samples");
  const double n = static_cast<double>(a.size());
  double ma = 0.0, mb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    ma += a[i];
    mb += b[i];
  }
  ma /= n;
  mb /= n;
  double sab = 0.0, saa = 0.0, sbb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double da = a[i] - ma;
    const double db = b[i] - mb;
    sab += da * db;
    saa += da * da;
    sbb += db * db;
  }
  if (saa == 0.0 || sbb == 0.0) return 0.0;
  return sab / std::sqrt(saa * sbb);
}

}  // namespace hebbsnn
