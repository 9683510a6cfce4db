#include "hebbsnn/tasks.hpp"

#include <algorithm>
#include <cstdio>

#include "hebbsnn/parallel.hpp"

namespace hebbsnn {

void AssociationTaskConfig::validate() const {
  HSNN_CHECK_ARG(n_train >= 1 && n_test >= 1, "task: need at least one fact");
  HSNN_CHECK_ARG(vec_dim > 0, "task: vec_dim must be positive");
  HSNN_CHECK_ARG(n_train <= label_range && n_test <= label_range,
                 "task: more facts than distinct labels");
}

EpisodeInput gen_association_episode(std::int32_t n_facts, std::int32_t vec_dim,
                                     std::int32_t label_range, Rng& rng) {
  HSNN_CHECK_ARG(n_facts >= 1 && n_facts <= label_range, "episode: label exhaustion");
  EpisodeInput ep;
  ep.facts.resize(n_facts);
  // Labels without replacement via a partial Fisher-Yates shuffle.
  std::vector<std::int32_t> labels(label_range);
  for (std::int32_t i = 0; i < label_range; ++i) labels[i] = i + 1;
  for (std::int32_t i = 0; i < n_facts; ++i) {
    const auto j = i + static_cast<std::int32_t>(rng.uniform_int(label_range - i));
    std::swap(labels[i], labels[j]);
  }
  for (std::int32_t m = 0; m < n_facts; ++m) {
    ep.facts[m].vec.resize(vec_dim);
    for (auto& v : ep.facts[m].vec) v = rng.uniform();
    ep.facts[m].label = labels[m];
  }
  const auto pick = static_cast<std::int32_t>(rng.uniform_int(n_facts));
  ep.query = ep.facts[pick].vec;
  ep.target_label = ep.facts[pick].label;
  return ep;
}

EpisodeInput episode_at(const AssociationTaskConfig& config, std::int32_t n_facts,
                        std::uint64_t stream, std::uint64_t index) {
  Rng rng(derive_seed(config.seed, stream, index));
  return gen_association_episode(n_facts, config.vec_dim, config.label_range, rng);
}

double evaluate_accuracy(const AssocParams& params, const ModelConfig& model,
                         const AssociationTaskConfig& task, std::int32_t n_facts,
                         std::int32_t n_episodes, bool parallel) {
  HSNN_CHECK_ARG(n_episodes > 0, "evaluate_accuracy: need episodes");
  std::vector<std::uint8_t> correct(n_episodes, 0);
  parallel_for(static_cast<std::size_t>(n_episodes), parallel, [&](std::size_t i) {
    const EpisodeInput ep = episode_at(task, n_facts, kEvalStream, i);
    const AssocRunResult r = run_sequence(params, model, ep);
    correct[i] = r.predicted_label == ep.target_label ? 1 : 0;
  });
  std::int64_t hits = 0;
  for (std::uint8_t c : correct) hits += c;
  return static_cast<double>(hits) / n_episodes;
}

std::vector<OodPoint> ood_protocol(const AssocParams& params, const ModelConfig& model,
                                   const AssociationTaskConfig& task,
                                   const std::vector<std::int32_t>& test_lengths,
                                   std::int32_t n_episodes, bool parallel) {
  std::vector<OodPoint> curve;
  for (std::int32_t n : test_lengths) {
    HSNN_CHECK_ARG(n >= 1 && n <= task.label_range,
                   "ood_protocol: test length exceeds label range");
    curve.push_back({n, evaluate_accuracy(params, model, task, n, n_episodes, parallel)});
  }
  return curve;
}

std::string episode_to_line(const EpisodeInput& episode) {
  std::string line;
  char buf[40];
  auto put_num = [&](double v) {
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    line += buf;
    line += ' ';
  };
  line += std::to_string(episode.facts.size());
  line += ' ';
  line += std::to_string(episode.facts.empty() ? 0 : episode.facts[0].vec.size());
  line += ' ';
  for (const Fact& f : episode.facts) {
    for (double v : f.vec) put_num(v);
    line += std::to_string(f.label);
    line += ' ';
  }
  for (double v : episode.query) put_num(v);
  line += std::to_string(episode.target_label);
  return line;
}

}  // namespace hebbsnn
