#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "hebbsnn/model.hpp"
#include "hebbsnn/rng.hpp"

namespace hebbsnn {

struct AssociationTaskConfig {
  std::int32_t n_train = 5;      // facts per training episode
  std::int32_t n_test = 5;       // facts per test episode
  std::int32_t vec_dim = 10;
  std::int32_t label_range = 5;  // L_max; tie to n for in-distribution training
  std::uint64_t seed = 1;

  void validate() const;
};

// One episode: n i.i.d. uniform [0,1)^vec_dim vectors with distinct labels
// sampled without replacement from [1, label_range]; the query repeats one
// fact's vector and the target is that fact's label.
EpisodeInput gen_association_episode(std::int32_t n_facts, std::int32_t vec_dim,
                                     std::int32_t label_range, Rng& rng);

// Deterministic per-episode stream: episodes are a pure function of
// (seed, stream, index), so parallel evaluation and regeneration agree.
EpisodeInput episode_at(const AssociationTaskConfig& config, std::int32_t n_facts,
                        std::uint64_t stream, std::uint64_t index);

inline constexpr std::uint64_t kTrainStream = 0x7261696eull;  // training batches
inline constexpr std::uint64_t kEvalStream = 0x6576616cull;   // held-out evaluation

// Fraction of episodes with argmax(logits) equal to the target label.
double evaluate_accuracy(const AssocParams& params, const ModelConfig& model,
                         const AssociationTaskConfig& task, std::int32_t n_facts,
                         std::int32_t n_episodes, bool parallel = true);

struct OodPoint {
  std::int32_t n_test = 0;
  double accuracy = 0.0;
};

// Evaluates fixed parameters at each test length without retraining.
// label_range stays fixed across lengths; lengths above it are rejected.
std::vector<OodPoint> ood_protocol(const AssocParams& params, const ModelConfig& model,
                                   const AssociationTaskConfig& task,
                                   const std::vector<std::int32_t>& test_lengths,
                                   std::int32_t n_episodes, bool parallel = true);

// One episode per line, flat arrays in documented column order:
// n_facts vec_dim then per fact (vec..., label), query..., target.
std::string episode_to_line(const EpisodeInput& episode);

}  // namespace hebbsnn
