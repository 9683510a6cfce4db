#include "hebbsnn/concentration.hpp"

#include <algorithm>
#include <map>

#include "hebbsnn/parallel.hpp"

namespace hebbsnn {

ConcentrationEnv::ConcentrationEnv(const ConcentrationConfig& config) : config_(config) {
  HSNN_CHECK_ARG(config.n_pairs >= 1, "concentration: need at least one pair");
  HSNN_CHECK_ARG(config.face_dim >= 1, "concentration: face_dim must be positive");
  const std::int32_t cells = n_cells();
  faces_.assign(cells, std::vector<double>(config.face_dim, 0.0));
  pair_id_.assign(cells, 0);
  status_.assign(cells, CellStatus::kFaceDown);
  prev_card_.assign(config.face_dim, 0.0);
}

std::vector<double> ConcentrationEnv::reset(Rng& rng) {
  const std::int32_t cells = n_cells();
  if (!deck_drawn_ || config_.new_deck) {
    // One fresh face per pair; both cards of a pair are identical.
    std::vector<std::vector<double>> pair_faces(config_.n_pairs,
                                                std::vector<double>(config_.face_dim));
    for (auto& f : pair_faces) {
      for (double& v : f) v = rng.uniform();
    }
    for (std::int32_t c = 0; c < cells; ++c) {
      pair_id_[c] = c / 2;
      faces_[c] = pair_faces[c / 2];
    }
    deck_drawn_ = true;
  }
  // Shuffle card positions every game.
  for (std::int32_t i = cells - 1; i > 0; --i) {
    const auto j = static_cast<std::int32_t>(rng.uniform_int(i + 1));
    std::swap(pair_id_[i], pair_id_[j]);
    std::swap(faces_[i], faces_[j]);
  }
  std::fill(status_.begin(), status_.end(), CellStatus::kFaceDown);
  pending_face_down_ = false;
  prev_action_ = -1;
  std::fill(prev_card_.begin(), prev_card_.end(), 0.0);
  flips_ = 0;
  return observe();
}

bool ConcentrationEnv::done() const {
  return std::all_of(status_.begin(), status_.end(),
                     [](CellStatus s) { return s == CellStatus::kEmpty; });
}

void ConcentrationEnv::resolve_pending() {
  if (!pending_face_down_) return;
  for (CellStatus& s : status_) {
    if (s == CellStatus::kFaceUp) s = CellStatus::kFaceDown;
  }
  pending_face_down_ = false;
}

ConcentrationEnv::StepResult ConcentrationEnv::step(std::int32_t action) {
  HSNN_CHECK_ARG(action >= 1 && action <= n_cells(), "concentration: action out of range");
  const std::int32_t cell = action - 1;
  resolve_pending();

  StepResult out;
  out.reward = -config_.penalty_flip;
  ++flips_;
  prev_action_ = cell;
  std::fill(prev_card_.begin(), prev_card_.end(), 0.0);

  switch (status_[cell]) {
    case CellStatus::kEmpty:
      break;  // wasted flip, nothing revealed
    case CellStatus::kFaceUp:
      // Turning the single face-up card back over; nothing is revealed.
      status_[cell] = CellStatus::kFaceDown;
      break;
    case CellStatus::kFaceDown: {
      status_[cell] = CellStatus::kFaceUp;
      prev_card_ = faces_[cell];
      std::int32_t other = -1;
      for (std::int32_t c = 0; c < n_cells(); ++c) {
        if (c != cell && status_[c] == CellStatus::kFaceUp) other = c;
      }
      if (other >= 0) {
        if (pair_id_[other] == pair_id_[cell]) {
          status_[cell] = CellStatus::kEmpty;
          status_[other] = CellStatus::kEmpty;
          out.reward += config_.reward_pair;
        } else {
          // Both stay visible in this observation and turn face down at the
          // start of the next step.
          pending_face_down_ = true;
        }
      }
      break;
    }
  }
  out.done = done();
  out.observation = observe();
  return out;
}

std::vector<double> ConcentrationEnv::observe() const {
  const std::int32_t cells = n_cells();
  std::vector<double> obs(observation_dim(), 0.0);
  for (std::int32_t c = 0; c < cells; ++c) {
    obs[c * 3 + static_cast<std::int32_t>(status_[c])] = 1.0;
  }
  if (prev_action_ >= 0) obs[cells * 3 + prev_action_] = 1.0;
  std::copy(prev_card_.begin(), prev_card_.end(), obs.begin() + cells * 4);
  return obs;
}

namespace {

std::int32_t play_random_game(std::int32_t n_pairs, Rng& rng, double* total_reward) {
  ConcentrationConfig cfg;
  cfg.n_pairs = n_pairs;
  cfg.new_deck = true;
  ConcentrationEnv env(cfg);
  env.reset(rng);
  double reward = 0.0;
  while (!env.done()) {
    const auto action = static_cast<std::int32_t>(rng.uniform_int(env.n_cells())) + 1;
    reward += env.step(action).reward;
  }
  if (total_reward) *total_reward = reward;
  return static_cast<std::int32_t>(env.flips_so_far());
}

// Perfect-memory policy over revealed faces (cells are remembered by pair id,
// which is equivalent to remembering the face vectors exactly). Decisions are
// taken on the post-resolution view: two mismatched cards still shown face up
// count as face down for the coming turn.
struct PerfectMemory {
  std::vector<std::int8_t> seen;

  explicit PerfectMemory(std::int32_t cells) : seen(cells, 0) {}

  std::int32_t choose(const ConcentrationEnv& env, Rng& rng) const {
    const std::int32_t cells = static_cast<std::int32_t>(seen.size());
    std::vector<CellStatus> st(cells);
    std::int32_t up = -1;
    std::int32_t n_up = 0;
    for (std::int32_t c = 0; c < cells; ++c) {
      st[c] = env.status(c);
      if (st[c] == CellStatus::kFaceUp) {
        up = c;
        ++n_up;
      }
    }
    if (n_up == 2) {  // pending mismatch; both will be face down when we act
      for (CellStatus& s : st) {
        if (s == CellStatus::kFaceUp) s = CellStatus::kFaceDown;
      }
      up = -1;
    }
    if (up >= 0) {
      // Mid-turn: complete the pair if its partner has been seen.
      for (std::int32_t c = 0; c < cells; ++c) {
        if (c != up && seen[c] && st[c] == CellStatus::kFaceDown &&
            env.pair_of(c) == env.pair_of(up)) {
          return c;
        }
      }
      return pick_unseen(env, st, rng);
    }
    // Turn start: flip a known matching pair if one exists.
    std::map<std::int32_t, std::int32_t> by_pair;
    for (std::int32_t c = 0; c < cells; ++c) {
      if (!seen[c] || st[c] != CellStatus::kFaceDown) continue;
      auto [it, inserted] = by_pair.try_emplace(env.pair_of(c), c);
      if (!inserted) return it->second;
    }
    return pick_unseen(env, st, rng);
  }

  std::int32_t pick_unseen(const ConcentrationEnv& env, const std::vector<CellStatus>& st,
                           Rng& rng) const {
    (void)env;
    std::vector<std::int32_t> unseen;
    for (std::int32_t c = 0; c < static_cast<std::int32_t>(seen.size()); ++c) {
      if (!seen[c] && st[c] == CellStatus::kFaceDown) unseen.push_back(c);
    }
    HSNN_CHECK_STATE(!unseen.empty(), "perfect-memory agent: no unseen card available");
    return unseen[rng.uniform_int(unseen.size())];
  }

  void observe_flip(const ConcentrationEnv& env, std::int32_t cell) {
    if (env.status(cell) == CellStatus::kEmpty) {
      // Pair removed; forget both cells.
      for (std::int32_t c = 0; c < static_cast<std::int32_t>(seen.size()); ++c) {
        if (env.status(c) == CellStatus::kEmpty) seen[c] = 0;
      }
    } else {
      seen[cell] = 1;
    }
  }
};

std::int32_t play_optimal_game(std::int32_t n_pairs, Rng& rng, double* total_reward) {
  ConcentrationConfig cfg;
  cfg.n_pairs = n_pairs;
  cfg.new_deck = true;
  ConcentrationEnv env(cfg);
  env.reset(rng);
  PerfectMemory memory(env.n_cells());
  double reward = 0.0;
  while (!env.done()) {
    const std::int32_t cell = memory.choose(env, rng);
    reward += env.step(cell + 1).reward;
    memory.observe_flip(env, cell);
  }
  if (total_reward) *total_reward = reward;
  return static_cast<std::int32_t>(env.flips_so_far());
}

AgentEvalResult run_eval(std::int32_t n_pairs, std::int32_t n_games, std::uint64_t seed,
                         bool parallel, bool optimal) {
  HSNN_CHECK_ARG(n_games > 0, "agent eval: need games");
  AgentEvalResult out;
  out.flips_per_game.resize(n_games);
  out.reward_per_game.resize(n_games);
  parallel_for(static_cast<std::size_t>(n_games), parallel, [&](std::size_t i) {
    Rng rng(derive_seed(seed, optimal ? 0x6f7074ull : 0x726e64ull, i));
    double reward = 0.0;
    out.flips_per_game[i] = optimal ? play_optimal_game(n_pairs, rng, &reward)
                                    : play_random_game(n_pairs, rng, &reward);
    out.reward_per_game[i] = reward;
  });
  double sum = 0.0;
  for (std::int32_t f : out.flips_per_game) sum += f;
  out.mean_flips = sum / n_games;
  return out;
}

}  // namespace

AgentEvalResult random_agent_eval(std::int32_t n_pairs, std::int32_t n_games, std::uint64_t seed,
                                  bool parallel) {
  return run_eval(n_pairs, n_games, seed, parallel, false);
}

AgentEvalResult optimal_agent_eval(std::int32_t n_pairs, std::int32_t n_games, std::uint64_t seed,
                                   bool parallel) {
  return run_eval(n_pairs, n_games, seed, parallel, true);
}

namespace {

// State for the exact expectation: statuses, what the agent has seen and
// which card is up. The deck arrangement is fixed per outer iteration.
struct OracleState {
  std::vector<std::int32_t> pair;  // per cell
  std::vector<std::int8_t> status;  // 0 down, 1 up, 2 removed
  std::vector<std::int8_t> seen;
  std::int32_t up = -1;

  bool finished() const {
    return std::all_of(status.begin(), status.end(), [](std::int8_t s) { return s == 2; });
  }
};

double oracle_expect(OracleState& s) {
  if (s.finished()) return 0.0;
  const auto cells = static_cast<std::int32_t>(s.pair.size());
  std::vector<std::int32_t> choices;
  if (s.up >= 0) {
    for (std::int32_t c = 0; c < cells; ++c) {
      if (c != s.up && s.seen[c] && s.status[c] == 0 && s.pair[c] == s.pair[s.up]) {
        choices.push_back(c);
        break;
      }
    }
  } else {
    std::map<std::int32_t, std::int32_t> by_pair;
    for (std::int32_t c = 0; c < cells && choices.empty(); ++c) {
      if (!s.seen[c] || s.status[c] != 0) continue;
      auto [it, inserted] = by_pair.try_emplace(s.pair[c], c);
      if (!inserted) choices.push_back(it->second);
    }
  }
  if (choices.empty()) {
    for (std::int32_t c = 0; c < cells; ++c) {
      if (!s.seen[c] && s.status[c] == 0) choices.push_back(c);
    }
  }
  HSNN_CHECK_STATE(!choices.empty(), "oracle: stuck state");

  double total = 0.0;
  const double p = 1.0 / choices.size();
  for (std::int32_t c : choices) {
    OracleState next = s;
    next.status[c] = 1;
    next.seen[c] = 1;
    if (next.up >= 0) {
      if (next.pair[next.up] == next.pair[c]) {
        next.status[next.up] = 2;
        next.status[c] = 2;
        next.seen[next.up] = 0;
        next.seen[c] = 0;
      } else {
        next.status[next.up] = 0;
        next.status[c] = 0;
      }
      next.up = -1;
    } else {
      next.up = c;
    }
    total += p * (1.0 + oracle_expect(next));
  }
  return total;
}

}  // namespace

double optimal_agent_expected_flips(std::int32_t n_pairs) {
  HSNN_CHECK_ARG(n_pairs >= 1 && n_pairs <= 3,
                 "optimal_agent_expected_flips: exhaustive oracle only for n <= 3");
  const std::int32_t cells = 2 * n_pairs;
  std::vector<std::int32_t> arrangement(cells);
  for (std::int32_t c = 0; c < cells; ++c) arrangement[c] = c / 2;
  std::sort(arrangement.begin(), arrangement.end());
  double total = 0.0;
  std::int64_t count = 0;
  do {
    OracleState s;
    s.pair = arrangement;
    s.status.assign(cells, 0);
    s.seen.assign(cells, 0);
    total += oracle_expect(s);
    ++count;
  } while (std::next_permutation(arrangement.begin(), arrangement.end()));
  return total / static_cast<double>(count);
}

}  // namespace hebbsnn
