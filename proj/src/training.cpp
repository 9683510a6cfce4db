#include "hebbsnn/training.hpp"

#include <chrono>
#include <cmath>
#include <cstring>

#include "hebbsnn/parallel.hpp"

namespace hebbsnn {

void TrainConfig::validate() const {
  HSNN_CHECK_ARG(lr > 0.0, "train: lr must be positive");
  HSNN_CHECK_ARG(lr_decay > 0.0 && lr_decay <= 1.0, "train: lr_decay must be in (0, 1]");
  HSNN_CHECK_ARG(decay_interval > 0, "train: decay_interval must be positive");
  HSNN_CHECK_ARG(batch_size > 0, "train: batch_size must be positive");
  HSNN_CHECK_ARG(iterations >= 0, "train: iterations must be non-negative");
  HSNN_CHECK_ARG(clip_norm > 0.0, "train: clip_norm must be positive");
  HSNN_CHECK_ARG(lambda_rho >= 0.0, "train: lambda_rho must be non-negative");
}

double TrainConfig::lr_at(std::int64_t iteration) const {
  return lr * std::pow(lr_decay, static_cast<double>(iteration / decay_interval));
}

AdamState AdamState::init(const std::vector<ParamView>& params) {
  AdamState s;
  for (const ParamView& p : params) {
    s.m.emplace_back(p.size, 0.0);
    s.v.emplace_back(p.size, 0.0);
  }
  return s;
}

void adam_step(std::vector<ParamView>& params, const std::vector<std::vector<double>>& grads,
               AdamState& state, double lr, const AdamParams& hyper) {
  HSNN_CHECK_ARG(params.size() == grads.size() && params.size() == state.m.size(),
                 "adam_step: tensor count mismatch");
  ++state.step;
  const double bc1 = 1.0 - std::pow(hyper.beta1, static_cast<double>(state.step));
  const double bc2 = 1.0 - std::pow(hyper.beta2, static_cast<double>(state.step));
  for (std::size_t t = 0; t < params.size(); ++t) {
    HSNN_CHECK_ARG(grads[t].size() == params[t].size, "adam_step: shape mismatch");
    double* p = params[t].data;
    double* m = state.m[t].data();
    double* v = state.v[t].data();
    const double* g = grads[t].data();
    for (std::size_t i = 0; i < params[t].size; ++i) {
      if (!std::isfinite(g[i])) {
        fail_numeric("adam_step: non-finite gradient in tensor '" + params[t].name + "'");
      }
      m[i] = hyper.beta1 * m[i] + (1.0 - hyper.beta1) * g[i];
      v[i] = hyper.beta2 * v[i] + (1.0 - hyper.beta2) * g[i] * g[i];
      const double mhat = m[i] / bc1;
      const double vhat = v[i] / bc2;
      p[i] -= lr * mhat / (std::sqrt(vhat) + hyper.eps);
    }
  }
}

double clip_gradients(std::vector<std::vector<double>>& grads, double max_norm) {
  HSNN_CHECK_ARG(max_norm > 0.0, "clip_gradients: max_norm must be positive");
  double sq = 0.0;
  for (const auto& g : grads) sq += l2_norm_squared(g);
  const double norm = std::sqrt(sq);
  if (norm > max_norm) {
    const double scale = max_norm / norm;
    for (auto& g : grads) {
      for (double& x : g) x *= scale;
    }
  }
  return norm;
}

void glorot_init(Mat& m, Rng& rng, double gain) {
  const double bound = gain * std::sqrt(6.0 / (m.rows + m.cols));
  for (double& v : m.a) v = rng.uniform(-bound, bound);
}

void orthogonal_init(Mat& m, Rng& rng, double gain) {
  // QR of a Gaussian matrix via twice-iterated modified Gram-Schmidt on the
  // smaller dimension; R's diagonal comes out positive so the result is a
  // deterministic function of the draws.
  const bool transpose = m.rows < m.cols;
  const std::int32_t n = transpose ? m.cols : m.rows;  // n >= k
  const std::int32_t k = transpose ? m.rows : m.cols;
  std::vector<std::vector<double>> q(k, std::vector<double>(n));
  for (std::int32_t j = 0; j < k; ++j) {
    for (std::int32_t i = 0; i < n; ++i) q[j][i] = rng.normal();
    for (int pass = 0; pass < 2; ++pass) {
      for (std::int32_t p = 0; p < j; ++p) {
        double dot = 0.0;
        for (std::int32_t i = 0; i < n; ++i) dot += q[p][i] * q[j][i];
        for (std::int32_t i = 0; i < n; ++i) q[j][i] -= dot * q[p][i];
      }
    }
    const double norm = std::sqrt(l2_norm_squared(q[j]));
    HSNN_CHECK_STATE(norm > 0.0, "orthogonal_init: degenerate draw");
    for (std::int32_t i = 0; i < n; ++i) q[j][i] /= norm;
  }
  for (std::int32_t r = 0; r < m.rows; ++r) {
    for (std::int32_t c = 0; c < m.cols; ++c) {
      m.at(r, c) = gain * (transpose ? q[r][c] : q[c][r]);
    }
  }
}

double loss_crossentropy(std::span<const double> logits, std::int32_t target) {
  const auto k = static_cast<std::int32_t>(logits.size());
  HSNN_CHECK_ARG(k >= 2, "loss_crossentropy: need at least two classes");
  HSNN_CHECK_ARG(target >= 1 && target <= k, "loss_crossentropy: target out of range");
  double mx = logits[0];
  for (std::int32_t i = 1; i < k; ++i) mx = std::max(mx, logits[i]);
  if (!std::isfinite(mx)) fail_numeric("loss_crossentropy: non-finite logits");
  double lse = 0.0;
  for (std::int32_t i = 0; i < k; ++i) lse += std::exp(logits[i] - mx);
  lse = mx + std::log(lse);
  return lse - logits[target - 1];
}

double rate_regularizer(const std::vector<std::vector<double>>& layer_counts,
                        const std::vector<std::int64_t>& layer_steps, std::int64_t batch,
                        double lambda_rho, double rho_0) {
  HSNN_CHECK_ARG(layer_counts.size() == layer_steps.size() && batch > 0,
                 "rate_regularizer: layer mismatch");
  double total = 0.0;
  for (std::size_t layer = 0; layer < layer_counts.size(); ++layer) {
    const auto& counts = layer_counts[layer];
    const double denom = static_cast<double>(layer_steps[layer]) * static_cast<double>(batch);
    double acc = 0.0;
    for (double c : counts) {
      const double rho = c / denom;
      const double d = rho_0 - rho;
      acc += d * d;
    }
    total += lambda_rho * acc / static_cast<double>(counts.size());
  }
  return total;
}

double rate_regularizer_seed(double count_i, std::int64_t neurons, std::int64_t steps,
                             std::int64_t batch, double lambda_rho, double rho_0) {
  const double denom = static_cast<double>(steps) * static_cast<double>(batch);
  const double rho = count_i / denom;
  return lambda_rho * 2.0 * (rho - rho_0) / (static_cast<double>(neurons) * denom);
}

void assoc_init_params(AssocParams& params, Rng& rng) {
  const double gain = std::sqrt(2.0);
  glorot_init(params.w_enc_vec, rng, gain);
  glorot_init(params.w_enc_lab, rng, gain);
  glorot_init(params.mem.w_s_key, rng, gain);
  glorot_init(params.mem.w_s_value, rng, gain);
  glorot_init(params.mem.w_r_key, rng, gain);
  glorot_init(params.w_out, rng, gain);
}

TrainResult train_association(const TrainConfig& train, const ModelConfig& model,
                              const AssociationTaskConfig& task, AssocParams& params,
                              const TrainCallbacks& callbacks) {
  train.validate();
  model.validate();
  task.validate();
  HSNN_CHECK_ARG(model.label_range == task.label_range && model.vec_dim == task.vec_dim,
                 "train_association: model/task dimensions disagree");
#ifdef _OPENMP
  if (train.threads > 0) omp_set_num_threads(train.threads);
#endif
  const std::int32_t B = train.batch_size;
  const bool parallel = train.parallel();

  std::vector<ParamView> views = param_views(params);
  AdamState adam = AdamState::init(views);

  std::vector<std::unique_ptr<Graph>> graphs(hardware_threads());
  for (auto& g : graphs) g = std::make_unique<Graph>();

  std::vector<EpisodeInput> episodes(B);
  std::vector<AssocRunResult> forward(B);
  // Per-episode gradients, reduced in index order after the parallel region.
  std::vector<std::vector<std::vector<double>>> episode_grads(
      B, std::vector<std::vector<double>>(views.size()));
  for (std::int32_t i = 0; i < B; ++i) {
    for (std::size_t t = 0; t < views.size(); ++t) episode_grads[i][t].resize(views[t].size);
  }
  std::vector<std::vector<double>> total_grads(views.size());
  for (std::size_t t = 0; t < views.size(); ++t) total_grads[t].resize(views[t].size);

  TrainResult result;
  for (std::int64_t it = 0; it < train.iterations; ++it) {
    const auto t_start = std::chrono::steady_clock::now();
    const double lr = train.lr_at(it);
    const double lambda = it >= train.reg_warmup ? train.lambda_rho : 0.0;

    for (std::int32_t i = 0; i < B; ++i) {
      episodes[i] = episode_at(task, task.n_train, kTrainStream,
                               static_cast<std::uint64_t>(it) * B + i);
    }

    // Pass 1: plain forward for spike statistics, loss and accuracy. The
    // regularizer couples batch elements through the batch-mean rates, so the
    // backward seeds need these totals before any graph work starts.
    parallel_for(static_cast<std::size_t>(B), parallel,
                 [&](std::size_t i) { forward[i] = run_sequence(params, model, episodes[i]); });

    const std::size_t n_layers = forward[0].stats.counts.size();
    std::vector<std::vector<double>> batch_counts(n_layers);
    for (std::size_t layer = 0; layer < n_layers; ++layer) {
      batch_counts[layer].assign(forward[0].stats.counts[layer].size(), 0.0);
      for (std::int32_t i = 0; i < B; ++i) {
        const auto& c = forward[i].stats.counts[layer];
        for (std::size_t n = 0; n < c.size(); ++n) batch_counts[layer][n] += c[n];
      }
    }
    const std::vector<std::int64_t>& layer_steps = forward[0].stats.steps;

    double ce_sum = 0.0;
    std::int64_t hits = 0;
    for (std::int32_t i = 0; i < B; ++i) {
      ce_sum += loss_crossentropy(forward[i].logits, episodes[i].target_label);
      hits += forward[i].predicted_label == episodes[i].target_label ? 1 : 0;
    }
    const double mean_ce = ce_sum / B;
    const double reg_loss =
        rate_regularizer(batch_counts, layer_steps, B, lambda, train.rho_0);
    const double loss = mean_ce + reg_loss;
    if (!std::isfinite(loss)) {
      fail_numeric("train_association: loss diverged at iteration " + std::to_string(it));
    }
    const double accuracy = static_cast<double>(hits) / B;

    // Per-neuron seeds of d(regularizer)/d(spike count); identical for every
    // batch element because the rate is a batch mean.
    std::vector<std::vector<double>> reg_seeds(n_layers);
    for (std::size_t layer = 0; layer < n_layers; ++layer) {
      const auto& counts = batch_counts[layer];
      reg_seeds[layer].resize(counts.size());
      for (std::size_t n = 0; n < counts.size(); ++n) {
        reg_seeds[layer][n] = rate_regularizer_seed(
            counts[n], static_cast<std::int64_t>(counts.size()), layer_steps[layer], B, lambda,
            train.rho_0);
      }
    }

    // Pass 2: unroll, seed, backpropagate. Episode gradients land in private
    // buffers; the reduction below runs in index order.
    parallel_for(static_cast<std::size_t>(B), parallel, [&](std::size_t i) {
#ifdef _OPENMP
      Graph& g = *graphs[omp_get_thread_num()];
#else
      Graph& g = *graphs[0];
#endif
      g.clear();
      const AssocGraphResult built = build_sequence_graph(g, params, model, episodes[i]);
      std::vector<GradSeed> seeds;
      seeds.push_back({built.loss_ce, 1.0 / B, nullptr});
      for (std::size_t layer = 0; layer < n_layers; ++layer) {
        seeds.push_back({built.layer_spike_sums[layer], 0.0, reg_seeds[layer].data()});
      }
      g.backward(seeds);
      const auto leaves = built.params.all();
      for (std::size_t t = 0; t < views.size(); ++t) {
        const double* grad = g.grad(leaves[t]);
        auto& dst = episode_grads[i][t];
        if (grad) {
          std::memcpy(dst.data(), grad, dst.size() * sizeof(double));
        } else {
          std::fill(dst.begin(), dst.end(), 0.0);
        }
      }
    });

    for (std::size_t t = 0; t < views.size(); ++t) {
      std::fill(total_grads[t].begin(), total_grads[t].end(), 0.0);
      for (std::int32_t i = 0; i < B; ++i) {
        const auto& src = episode_grads[i][t];
        auto& dst = total_grads[t];
        for (std::size_t k = 0; k < dst.size(); ++k) dst[k] += src[k];
      }
    }

    clip_gradients(total_grads, train.clip_norm);
    adam_step(views, total_grads, adam, lr);

    const auto t_end = std::chrono::steady_clock::now();
    const std::int64_t wall_ms =
        train.wall_clock
            ? std::chrono::duration_cast<std::chrono::milliseconds>(t_end - t_start).count()
            : 0;
    if (callbacks.on_iteration) {
      callbacks.on_iteration(it, loss, reg_loss, accuracy, lr, wall_ms);
    }
    if (callbacks.on_checkpoint && train.checkpoint_interval > 0 &&
        (it + 1) % train.checkpoint_interval == 0) {
      callbacks.on_checkpoint(it + 1, params);
    }
    result.final_loss = loss;
    result.final_accuracy = accuracy;
    result.iterations_run = it + 1;
  }
  return result;
}

}  // namespace hebbsnn
