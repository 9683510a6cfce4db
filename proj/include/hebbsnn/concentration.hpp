#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "hebbsnn/common.hpp"
#include "hebbsnn/rng.hpp"

namespace hebbsnn {

struct ConcentrationConfig {
  std::int32_t n_pairs = 2;
  bool new_deck = false;  // redraw the card faces at every reset
  double reward_pair = 25.0;
  double penalty_flip = 0.5;
  std::int32_t face_dim = 10;
};

enum class CellStatus : std::uint8_t { kEmpty = 0, kFaceDown = 1, kFaceUp = 2 };

// Solitaire Concentration on a one-dimensional grid of 2n cells. Each card
// face is a random continuous vector; both cards of a pair carry the same
// face. Flipping a face-down card turns it up; two face-up cards are removed
// on a match, otherwise they turn face down again at the start of the next
// step. Flipping the single face-up card turns it back down; flipping an
// empty cell does nothing. Every flip costs the penalty.
class ConcentrationEnv {
 public:
  explicit ConcentrationEnv(const ConcentrationConfig& config);

  // 2n*3 cell one-hots (order: empty, face down, face up), 2n one-hot of the
  // previous action, then the face revealed by the previous flip (zeros when
  // it left the card face down or hit an empty cell).
  std::int32_t observation_dim() const { return config_.n_pairs * 2 * 4 + config_.face_dim; }
  std::int32_t n_cells() const { return config_.n_pairs * 2; }

  std::vector<double> reset(Rng& rng);

  struct StepResult {
    std::vector<double> observation;
    double reward = 0.0;
    bool done = false;
  };
  // action is a 1-based cell index in [1, 2n].
  StepResult step(std::int32_t action);

  CellStatus status(std::int32_t cell) const { return status_[cell]; }
  const std::vector<double>& face(std::int32_t cell) const { return faces_[cell]; }
  std::int32_t pair_of(std::int32_t cell) const { return pair_id_[cell]; }
  std::int64_t flips_so_far() const { return flips_; }
  bool done() const;

 private:
  void resolve_pending();
  std::vector<double> observe() const;

  ConcentrationConfig config_;
  std::vector<std::vector<double>> faces_;  // per cell
  std::vector<std::int32_t> pair_id_;      // per cell
  std::vector<CellStatus> status_;
  bool pending_face_down_ = false;  // two mismatched cards shown face up
  std::int32_t prev_action_ = -1;   // 0-based, -1 before the first flip
  std::vector<double> prev_card_;
  std::int64_t flips_ = 0;
  bool deck_drawn_ = false;
};

// Mean flips over Monte Carlo games of an agent flipping uniformly over all
// 2n cells. Per-game seeds derive from (seed, game index), so results do not
// depend on scheduling.
struct AgentEvalResult {
  double mean_flips = 0.0;
  std::vector<std::int32_t> flips_per_game;
  std::vector<double> reward_per_game;
};
AgentEvalResult random_agent_eval(std::int32_t n_pairs, std::int32_t n_games, std::uint64_t seed,
                                  bool parallel = true);

// Perfect-memory greedy agent: complete a known pair when one exists;
// otherwise flip an unseen card, then its remembered partner if the face was
// seen before, else a second unseen card.
AgentEvalResult optimal_agent_eval(std::int32_t n_pairs, std::int32_t n_games, std::uint64_t seed,
                                   bool parallel = true);

// Exact expected flips of the perfect-memory agent, by enumerating all deck
// arrangements and every equally-likely choice of the agent. Tractable for
// n_pairs <= 3; the Monte Carlo estimate above is cross-checked against it.
double optimal_agent_expected_flips(std::int32_t n_pairs);

}  // namespace hebbsnn
