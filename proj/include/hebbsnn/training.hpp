#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "hebbsnn/model.hpp"
#include "hebbsnn/rng.hpp"
#include "hebbsnn/tasks.hpp"

namespace hebbsnn {

struct TrainConfig {
  double lr = 0.003;
  double lr_decay = 0.85;             // multiplicative, every decay_interval iterations
  std::int32_t decay_interval = 340;
  std::int32_t batch_size = 512;
  std::int32_t iterations = 4250;
  double lambda_rho = 1e-5;           // spike-rate regularization factor
  double rho_0 = 0.0;                 // target rate [spikes per step]
  std::int32_t reg_warmup = 0;        // iterations before the regularizer activates
  double clip_norm = 40.0;
  std::uint64_t seed = 1;
  std::int32_t checkpoint_interval = 500;
  std::int32_t threads = 0;           // 0 = all available, 1 = serial
  bool wall_clock = true;             // false writes 0 in the wall_ms column

  void validate() const;
  double lr_at(std::int64_t iteration) const;  // lr * lr_decay^floor(it / interval)
  bool parallel() const { return threads != 1; }
};

struct AdamParams {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

// First/second moment estimates per parameter tensor, shared step counter.
struct AdamState {
  std::vector<std::vector<double>> m;
  std::vector<std::vector<double>> v;
  std::int64_t step = 0;

  static AdamState init(const std::vector<ParamView>& params);
};

// Bias-corrected Adam update; grads[i] matches params[i] elementwise.
// Non-finite gradients abort the update.
void adam_step(std::vector<ParamView>& params, const std::vector<std::vector<double>>& grads,
               AdamState& state, double lr, const AdamParams& hyper = {});

// Rescales all gradients by max_norm / ||g||_2 when the global norm exceeds
// max_norm; returns the pre-clip norm.
double clip_gradients(std::vector<std::vector<double>>& grads, double max_norm);

// Uniform on +/- gain * sqrt(6 / (fan_in + fan_out)); rows are fan-in.
void glorot_init(Mat& m, Rng& rng, double gain = std::sqrt(2.0));

// Orthogonal rows/columns scaled by gain (QR of a Gaussian matrix).
void orthogonal_init(Mat& m, Rng& rng, double gain = std::sqrt(2.0));

// -log softmax(logits)[target-1]; target is 1-based.
double loss_crossentropy(std::span<const double> logits, std::int32_t target);

// Spike-rate regularization: for each layer, lambda * (1/N) * sum_i
// (rho_0 - rho_i)^2 where rho_i is neuron i's mean spikes per step over the
// layer's simulation duration and the batch. counts[i] are summed spike
// counts over batch and time; denominators are steps * batch.
double rate_regularizer(const std::vector<std::vector<double>>& layer_counts,
                        const std::vector<std::int64_t>& layer_steps, std::int64_t batch,
                        double lambda_rho, double rho_0);

// d(regularizer)/d(count_i) for one layer, used to seed the backward pass.
double rate_regularizer_seed(double count_i, std::int64_t neurons, std::int64_t steps,
                             std::int64_t batch, double lambda_rho, double rho_0);

void assoc_init_params(AssocParams& params, Rng& rng);

struct TrainCallbacks {
  // Called once per iteration after the update.
  std::function<void(std::int64_t iteration, double loss, double reg_loss, double accuracy,
                     double lr, std::int64_t wall_ms)>
      on_iteration;
  // Called when a checkpoint should be written (including iteration 0 state).
  std::function<void(std::int64_t iteration, const AssocParams& params)> on_checkpoint;
};

struct TrainResult {
  double final_loss = 0.0;
  double final_accuracy = 0.0;  // training-batch accuracy of the last iteration
  std::int64_t iterations_run = 0;
};

// Full BPTT training loop for the association task: fresh batch per
// iteration, forward + cross-entropy + rate regularization, backward through
// the unrolled episode, global-norm clipping, Adam, multiplicative lr
// schedule. Batch elements run in parallel; gradients reduce in index order
// so results are independent of the thread count.
TrainResult train_association(const TrainConfig& train, const ModelConfig& model,
                              const AssociationTaskConfig& task, AssocParams& params,
                              const TrainCallbacks& callbacks = {});

}  // namespace hebbsnn
