// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <functional>
#include <memory>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "rollmini/vocab.hpp"
#include "rollmini/worker.hpp"

namespace rollmini {

struct Cell {
  int row = 0;
  int col = 0;
  auto operator<=>(const Cell&) const = default;
};

enum class Dir { up, down, left, right };
Cell moved(Cell c, Dir d);

enum class EnvKind { SimpleSokoban, LargerSokoban, SokobanDifferentGridVocab, FrozenLake };
EnvKind env_kind_from_string(const std::string& name);
const char* to_string(EnvKind kind);

enum class VocabProfile { standard, alternate };

struct RewardConstants {
  double step_penalty = -0.01;
  double format_penalty = -0.001;
  double success_reward = 10.0;
  double box_shaping = 1.0;  // per newly placed box (Sokoban)
};

struct StepInfo {
  bool action_valid = false;
  bool action_effective = false;
  bool success = false;
};

struct StepOutcome {
  std::string observation;
  double reward = 0.0;
  bool done = false;
  StepInfo info;
};

struct SokobanState {
  int rows = 0, cols = 0;
  std::set<Cell> walls, boxes, targets;
  Cell player;
  int steps_taken = 0;
  VocabProfile profile = VocabProfile::standard;
};

struct FrozenLakeState {
  int rows = 0, cols = 0;
  Cell start, goal, player;
  std::set<Cell> holes;
  bool slippery = false;
  int steps_taken = 0;
};

/// Multi-turn text environment. Actions arrive as generated text carrying
/// an <answer>DIRECTION</answer> span; unparseable actions consume the turn
/// and incur the format penalty without changing state.
class Environment {
 public:
  virtual ~Environment() = default;
  virtual std::string render() const = 0;
  virtual StepOutcome step(const std::string& action_text) = 0;
  virtual bool terminal() const = 0;
  virtual bool succeeded() const = 0;
  virtual int steps_taken() const = 0;
  virtual int max_steps() const = 0;
};

struct EnvOptions {
  int max_steps = 0;  // 0 = per-kind default (20 for 6x6, 30 for 8x8, 15 for FrozenLake)
  RewardConstants rewards;
  bool slippery = false;          // FrozenLake only
  uint64_t episode_rng_seed = 0;  // slip draws
};

/// Deterministic procedurally generated instance for (kind, seed), solvable
/// by construction (checked against the BFS oracle; bounded retries then a
/// generation error).
std::unique_ptr<Environment> make_env(EnvKind kind, uint64_t seed, const EnvOptions& opts = {});

/// Direct state accessors for oracle tests.
SokobanState generate_sokoban_state(EnvKind kind, uint64_t seed);
FrozenLakeState generate_frozenlake_state(uint64_t seed);
std::unique_ptr<Environment> make_sokoban_env(SokobanState state, const EnvOptions& opts);
std::unique_ptr<Environment> make_frozenlake_env(FrozenLakeState state, const EnvOptions& opts);

/// Case-insensitive direction word inside the first answer span.
std::optional<Dir> parse_action(const std::string& action_text);

std::string render_sokoban(const SokobanState& state);
std::string render_frozenlake(const FrozenLakeState& state);

/// Shortest push solution (BFS over player x boxes states); nullopt when
/// unsolvable within node_limit.
std::optional<std::vector<Dir>> solve_sokoban_bfs(const SokobanState& state, size_t node_limit = 2000000);

/// Shortest hole-free path, ignoring slipperiness.
std::optional<std::vector<Dir>> solve_frozenlake_bfs(const FrozenLakeState& state);

struct EpisodeInfo {
  bool success = false;
  int turns = 0;
  int valid_actions = 0;
  int effective_actions = 0;
  double total_reward = 0.0;
};

/// Owns one episode: accumulates the turn-concatenated token sequence with
/// action masks and per-token reward attribution (each step reward lands on
/// the final token of that turn's action).
class EpisodeDriver {
 public:
  EpisodeDriver(std::unique_ptr<Environment> env, const Vocabulary& vocab, int max_turns);

  const std::vector<int>& prompt_tokens() const { return prompt_; }
  bool done() const { return done_; }
  const EpisodeInfo& info() const { return info_; }

  /// Consumes one generated action (tokens + their sampling log-probs);
  /// returns the observation tokens appended for the next turn (empty once
  /// done). Calling after done is a lifecycle error.
  std::vector<int> on_action(std::span<const int> action_tokens, std::span<const double> logprobs);

  SampleRecord finalize(const std::string& sample_id, const std::string& group_id,
                        const std::string& domain_tag) const;

 private:
  std::vector<int> observation_tokens() const;

  std::unique_ptr<Environment> env_;
  const Vocabulary& vocab_;
  int max_turns_;
  bool done_ = false;
  EpisodeInfo info_;
  std::vector<int> prompt_;
  std::vector<int> response_;
  std::vector<double> logprobs_;
  std::vector<double> rewards_;
  std::vector<uint8_t> mask_;
};

/// Generated action text for a context; returns token ids and their
/// log-probs.
using ActorFn = std::function<std::pair<std::vector<int>, std::vector<double>>(std::span<const int>)>;

/// Synchronous episode loop over the driver; the scheduler replays exactly
/// this protocol event-by-event.
SampleRecord run_episode(EpisodeDriver& driver, const ActorFn& actor, const std::string& sample_id,
                         const std::string& group_id = "", const std::string& domain_tag = "agentic");

struct EnvWorkerConfig {
  EnvKind kind = EnvKind::FrozenLake;
  EnvOptions options;
  int max_turns = 15;
};

/// Environment worker: hosts one episode driver per live request.
/// Methods: env_begin (instance_seed, episode_seed, sample ids -> prompt
/// tokens), env_step (action tokens -> obs tokens / finalized sample),
/// env_abort.
class EnvWorker : public Worker {
 public:
  EnvWorker(EnvWorkerConfig config, const Vocabulary& vocab);
  Message call(const std::string& method, const Message& input) override;

 private:
  struct Episode {
    std::unique_ptr<EpisodeDriver> driver;
    std::string sample_id, group_id, domain_tag;
  };
  EnvWorkerConfig config_;
  const Vocabulary& vocab_;
  std::map<std::string, Episode> episodes_;  // request_id -> episode
};

WorkerFactory env_worker_factory(EnvWorkerConfig config, const Vocabulary& vocab);

}  // namespace rollmini
