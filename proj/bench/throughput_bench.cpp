// Timing comparison between the serial reference path and the OpenMP batch
// path, plus per-kernel costs. Run after building:
//   ./build/bench/throughput_bench [batch] [threads]

#include <chrono>
#include <cstdio>
#include <cstdlib>

#include "hebbsnn/model.hpp"
#include "hebbsnn/parallel.hpp"
#include "hebbsnn/tasks.hpp"
#include "hebbsnn/training.hpp"

using namespace hebbsnn;
using Clock = std::chrono::steady_clock;

namespace {

double ms_since(Clock::time_point t0) {
  return std::chrono::duration<double, std::milli>(Clock::now() - t0).count();
}

ModelConfig desk_model() {
  ModelConfig m;
  m.label_range = 3;
  return m;
}

}  // namespace

int main(int argc, char** argv) {
  const std::int32_t batch = argc > 1 ? std::atoi(argv[1]) : 64;
  const std::int32_t threads = argc > 2 ? std::atoi(argv[2]) : hardware_threads();
#ifdef _OPENMP
  omp_set_num_threads(threads);
#endif

  ModelConfig model = desk_model();
  AssociationTaskConfig task;
  task.n_train = task.n_test = 3;
  task.label_range = 3;
  AssocParams params(model);
  Rng rng(42);
  assoc_init_params(params, rng);

  std::vector<EpisodeInput> episodes(batch);
  for (std::int32_t i = 0; i < batch; ++i) episodes[i] = episode_at(task, 3, kTrainStream, i);

  // Plain forward.
  {
    const auto t0 = Clock::now();
    double sink = 0.0;
    for (std::int32_t i = 0; i < batch; ++i) {
      sink += run_sequence(params, model, episodes[i]).logits[0];
    }
    const double ms = ms_since(t0);
    std::printf("plain_forward      %8.2f ms / %d episodes  (%.2f ms/episode, sink=%g)\n", ms,
                batch, ms / batch, sink);
  }

  // Graph forward + backward, one thread.
  {
    Graph g;
    const auto t0 = Clock::now();
    for (std::int32_t i = 0; i < batch; ++i) {
      g.clear();
      const auto built = build_sequence_graph(g, params, model, episodes[i]);
      g.backward(built.loss_ce);
    }
    const double ms = ms_since(t0);
    std::printf("graph_fwd_bwd      %8.2f ms / %d episodes  (%.2f ms/episode)\n", ms, batch,
                ms / batch);
  }

  // Batch gradient pass, serial vs parallel.
  for (const bool parallel : {false, true}) {
    std::vector<std::unique_ptr<Graph>> graphs(hardware_threads());
    for (auto& g : graphs) g = std::make_unique<Graph>();
    const auto t0 = Clock::now();
    parallel_for(static_cast<std::size_t>(batch), parallel, [&](std::size_t i) {
#ifdef _OPENMP
      Graph& g = *graphs[omp_get_thread_num()];
#else
      Graph& g = *graphs[0];
#endif
      g.clear();
      const auto built = build_sequence_graph(g, params, model, episodes[i]);
      g.backward(built.loss_ce);
    });
    const double ms = ms_since(t0);
    std::printf("batch_grad (%s) %8.2f ms / %d episodes  [threads=%d]\n",
                parallel ? "omp   " : "serial", ms, batch, parallel ? threads : 1);
  }

  // Hebbian kernel in isolation.
  {
    const std::int32_t l = 100;
    Mat w(l, l);
    std::vector<double> kk(l, 0.2), kv(l, 0.2);
    const HebbianRule rule;
    const auto t0 = Clock::now();
    for (int rep = 0; rep < 100000; ++rep) hebbian_apply(w, kk, kv, rule);
    std::printf("hebbian_apply      %8.3f us/step (l=%d)\n", ms_since(t0) * 1000.0 / 100000, l);
  }
  return 0;
}
