#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <string>
#include <vector>

#include "hebbsnn/concentration.hpp"
#include "hebbsnn/model.hpp"
#include "hebbsnn/ppo.hpp"
#include "hebbsnn/tasks.hpp"
#include "hebbsnn/training.hpp"

namespace hebbsnn {

// Everything one experiment needs, resolvable from preset defaults, an
// optional key=value config file and command-line overrides (strongest last).
struct ExperimentConfig {
  std::string task = "assoc";   // assoc | ood | rl | convert-demo | gradcheck
  std::string preset = "desk";  // desk | paper
  std::uint64_t seed = 1;

  TrainConfig train;
  ModelConfig model;
  AssociationTaskConfig assoc;
  PpoConfig ppo;
  ConcentrationConfig env;
  std::int32_t actor_hidden = 100;
  std::int32_t critic_hidden = 100;

  std::int32_t eval_episodes = 2000;
  std::vector<std::int32_t> ood_lengths = {1, 2, 3, 4, 5, 6};

  // Conversion demo settings.
  std::vector<std::int32_t> convert_layers = {20, 15, 10};
  std::int32_t convert_calibration = 200;
  std::int32_t convert_heldout = 200;
  std::int32_t convert_duration = 100;

  // Applies preset defaults for (task, preset); rejects unknown names.
  void apply_preset();
  // Propagates the top-level seed and ties dependent fields together
  // (model.label_range <- task.label_range, RL head sizes from the deck).
  void finalize();

  RlModelConfig rl_model() const;
  // Resolved flat key=value view, used for the run manifest.
  std::map<std::string, std::string> resolved() const;
};

// Sets one flat key (as accepted in config files and --override); unknown
// keys are rejected with the offending name.
void set_config_key(ExperimentConfig& config, const std::string& key, const std::string& value);

// `key = value` lines, '#' comments. Returns the keys in file order.
std::vector<std::pair<std::string, std::string>> parse_config_file(const std::string& path);

// Range lists for --override eval.lengths=1..10 or 1,2,4,8.
std::vector<std::int32_t> parse_length_list(const std::string& text);

std::string code_version();

}  // namespace hebbsnn
