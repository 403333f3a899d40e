// SPDX-License-Identifier: Apache-2.0
#include "rollmini/environments.hpp"

#include <algorithm>
#include <cctype>
#include <deque>
#include <map>
#include <unordered_map>

#include "rollmini/errors.hpp"
#include "rollmini/rng.hpp"

namespace rollmini {

Cell moved(Cell c, Dir d) {
  switch (d) {
    case Dir::up: return {c.row - 1, c.col};
    case Dir::down: return {c.row + 1, c.col};
    case Dir::left: return {c.row, c.col - 1};
    case Dir::right: return {c.row, c.col + 1};
  }
  return c;
}

EnvKind env_kind_from_string(const std::string& name) {
  if (name == "SimpleSokoban") return EnvKind::SimpleSokoban;
  if (name == "LargerSokoban") return EnvKind::LargerSokoban;
  if (name == "SokobanDifferentGridVocab") return EnvKind::SokobanDifferentGridVocab;
  if (name == "FrozenLake") return EnvKind::FrozenLake;
  throw ConfigError("unknown environment kind '" + name + "'");
}

const char* to_string(EnvKind kind) {
  switch (kind) {
    case EnvKind::SimpleSokoban: return "SimpleSokoban";
    case EnvKind::LargerSokoban: return "LargerSokoban";
    case EnvKind::SokobanDifferentGridVocab: return "SokobanDifferentGridVocab";
    case EnvKind::FrozenLake: return "FrozenLake";
  }
  return "?";
}

std::optional<Dir> parse_action(const std::string& action_text) {
  // Reuse the answer-span grammar: first <answer>...</answer> span, with a
  // case-insensitive direction word inside (surrounding whitespace ignored).
  static const std::string open = "<answer>", close = "</answer>";
  const size_t a = action_text.find(open);
  if (a == std::string::npos) return std::nullopt;
  const size_t b = action_text.find(close, a + open.size());
  if (b == std::string::npos) return std::nullopt;
  std::string inner = action_text.substr(a + open.size(), b - a - open.size());
  std::string word;
  for (char c : inner) {
    if (std::isspace(static_cast<unsigned char>(c))) continue;
    word += static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  }
  if (word == "up") return Dir::up;
  if (word == "down") return Dir::down;
  if (word == "left") return Dir::left;
  if (word == "right") return Dir::right;
  return std::nullopt;
}

// --------------------------------------------------------------------------
// Rendering

namespace {

// cell categories -> symbols; alternate profile is a bijective remap.
constexpr const char* kStd[] = {"#", "_", "O", "X", "P", "\xE2\x88\x9A", "S"};
constexpr const char* kAlt[] = {"W", ".", "T", "B", "A", "V", "Q"};
enum SymIdx { kWall = 0, kFloor, kTarget, kBox, kPlayer, kBoxOnTarget, kPlayerOnTarget };

}  // namespace

std::string render_sokoban(const SokobanState& s) {
  const char* const* sym = s.profile == VocabProfile::standard ? kStd : kAlt;
  std::string out;
  for (int r = 0; r < s.rows; ++r) {
    for (int c = 0; c < s.cols; ++c) {
      const Cell cell{r, c};
      const bool target = s.targets.count(cell) > 0;
      if (s.walls.count(cell)) {
        out += sym[kWall];
      } else if (cell == s.player) {
        out += sym[target ? kPlayerOnTarget : kPlayer];
      } else if (s.boxes.count(cell)) {
        out += sym[target ? kBoxOnTarget : kBox];
      } else if (target) {
        out += sym[kTarget];
      } else {
        out += sym[kFloor];
      }
    }
    out += '\n';
  }
  return out;
}

std::string render_frozenlake(const FrozenLakeState& s) {
  // _ frozen, O hole, G goal, P player, S player-on-goal, X player-in-hole.
  std::string out;
  for (int r = 0; r < s.rows; ++r) {
    for (int c = 0; c < s.cols; ++c) {
      const Cell cell{r, c};
      if (cell == s.player) {
        if (cell == s.goal)
          out += "S";
        else if (s.holes.count(cell))
          out += "X";
        else
          out += "P";
      } else if (cell == s.goal) {
        out += "G";
      } else if (s.holes.count(cell)) {
        out += "O";
      } else {
        out += "_";
      }
    }
    out += '\n';
  }
  return out;
}

// --------------------------------------------------------------------------
// BFS oracles

namespace {

struct SokoKey {
  uint64_t boxes = 0;  // bitmask over rows*cols (<= 64 cells)
  uint8_t player = 0;
  bool operator==(const SokoKey&) const = default;
};

struct SokoKeyHash {
  size_t operator()(const SokoKey& k) const {
    return std::hash<uint64_t>()(k.boxes * 131 + k.player);
  }
};

int cell_index(const SokobanState& s, Cell c) { return c.row * s.cols + c.col; }

bool in_grid(int rows, int cols, Cell c) {
  return c.row >= 0 && c.row < rows && c.col >= 0 && c.col < cols;
}

}  // namespace

std::optional<std::vector<Dir>> solve_sokoban_bfs(const SokobanState& start, size_t node_limit) {
  if (start.rows * start.cols > 64) throw ConfigError("sokoban solver: grid larger than 64 cells");
  uint64_t target_mask = 0;
  for (const Cell& c : start.targets) target_mask |= 1ULL << cell_index(start, c);

  auto make_key = [&](Cell player, uint64_t boxes) {
    return SokoKey{boxes, static_cast<uint8_t>(cell_index(start, player))};
  };
  uint64_t boxes0 = 0;
  for (const Cell& c : start.boxes) boxes0 |= 1ULL << cell_index(start, c);

  const Dir dirs[] = {Dir::up, Dir::down, Dir::left, Dir::right};
  std::unordered_map<SokoKey, std::pair<SokoKey, Dir>, SokoKeyHash> parent;
  std::deque<SokoKey> frontier;
  const SokoKey root = make_key(start.player, boxes0);
  parent.emplace(root, std::make_pair(root, Dir::up));
  frontier.push_back(root);

  auto reconstruct = [&](SokoKey key) {
    std::vector<Dir> path;
    while (!(parent.at(key).first == key)) {
      path.push_back(parent.at(key).second);
      key = parent.at(key).first;
    }
    std::reverse(path.begin(), path.end());
    return path;
  };

  if ((boxes0 & target_mask) == boxes0 && boxes0 != 0) return std::vector<Dir>{};

  while (!frontier.empty()) {
    if (parent.size() > node_limit) return std::nullopt;
    const SokoKey cur = frontier.front();
    frontier.pop_front();
    const Cell player{cur.player / start.cols, cur.player % start.cols};
    for (Dir d : dirs) {
      const Cell next = moved(player, d);
      if (!in_grid(start.rows, start.cols, next) || start.walls.count(next)) continue;
      uint64_t boxes = cur.boxes;
      const uint64_t next_bit = 1ULL << cell_index(start, next);
      if (boxes & next_bit) {
        const Cell beyond = moved(next, d);
        if (!in_grid(start.rows, start.cols, beyond) || start.walls.count(beyond)) continue;
        const uint64_t beyond_bit = 1ULL << cell_index(start, beyond);
        if (boxes & beyond_bit) continue;
        boxes = (boxes & ~next_bit) | beyond_bit;
      }
      const SokoKey key = make_key(next, boxes);
      if (parent.count(key)) continue;
      parent.emplace(key, std::make_pair(cur, d));
      if ((boxes & target_mask) == boxes) return reconstruct(key);
      frontier.push_back(key);
    }
  }
  return std::nullopt;
}

std::optional<std::vector<Dir>> solve_frozenlake_bfs(const FrozenLakeState& s) {
  const Dir dirs[] = {Dir::up, Dir::down, Dir::left, Dir::right};
  std::map<Cell, std::pair<Cell, Dir>> parent;
  std::deque<Cell> frontier;
  parent.emplace(s.start, std::make_pair(s.start, Dir::up));
  frontier.push_back(s.start);
  while (!frontier.empty()) {
    const Cell cur = frontier.front();
    frontier.pop_front();
    if (cur == s.goal) {
      std::vector<Dir> path;
      Cell c = cur;
      while (!(parent.at(c).first == c)) {
        path.push_back(parent.at(c).second);
        c = parent.at(c).first;
      }
      std::reverse(path.begin(), path.end());
      return path;
    }
    for (Dir d : dirs) {
      const Cell next = moved(cur, d);
      if (!in_grid(s.rows, s.cols, next) || s.holes.count(next) || parent.count(next)) continue;
      parent.emplace(next, std::make_pair(cur, d));
      frontier.push_back(next);
    }
  }
  return std::nullopt;
}

// --------------------------------------------------------------------------
// Instance generation

namespace {

int default_max_steps(EnvKind kind) {
  switch (kind) {
    case EnvKind::SimpleSokoban:
    case EnvKind::SokobanDifferentGridVocab: return 20;
    case EnvKind::LargerSokoban: return 30;
    case EnvKind::FrozenLake: return 15;
  }
  return 20;
}

SokobanState try_generate_sokoban(EnvKind kind, rng::Stream& stream) {
  SokobanState s;
  s.rows = s.cols = kind == EnvKind::LargerSokoban ? 8 : 6;
  s.profile = kind == EnvKind::SokobanDifferentGridVocab ? VocabProfile::alternate : VocabProfile::standard;
  const int boxes = kind == EnvKind::LargerSokoban ? 2 : 1;

  for (int r = 0; r < s.rows; ++r)
    for (int c = 0; c < s.cols; ++c)
      if (r == 0 || c == 0 || r == s.rows - 1 || c == s.cols - 1) s.walls.insert({r, c});

  std::vector<Cell> interior;
  for (int r = 1; r < s.rows - 1; ++r)
    for (int c = 1; c < s.cols - 1; ++c) interior.push_back({r, c});

  // Sprinkle a few interior walls.
  for (const Cell& c : interior)
    if (stream.next_double() < 0.12) s.walls.insert(c);

  std::vector<Cell> free;
  for (const Cell& c : interior)
    if (!s.walls.count(c)) free.push_back(c);
  if (static_cast<int>(free.size()) < 2 * boxes + 1) return s;  // caller retries

  auto pick_free = [&](auto&& taken) {
    for (int tries = 0; tries < 64; ++tries) {
      const Cell c = free[stream.next_below(free.size())];
      if (!taken(c)) return c;
    }
    return Cell{-1, -1};
  };

  for (int b = 0; b < boxes; ++b) {
    const Cell t = pick_free([&](Cell c) { return s.targets.count(c) > 0; });
    if (t.row < 0) return s;
    s.targets.insert(t);
  }
  // Boxes start off-target; dead corners are left to the solver check.
  for (int b = 0; b < boxes; ++b) {
    const Cell c = pick_free([&](Cell x) { return s.targets.count(x) > 0 || s.boxes.count(x) > 0; });
    if (c.row < 0) return s;
    s.boxes.insert(c);
  }
  const Cell p = pick_free([&](Cell x) { return s.boxes.count(x) > 0; });
  if (p.row < 0) return s;
  s.player = p;
  return s;
}

bool sokoban_wellformed(const SokobanState& s, int expected_boxes) {
  if (static_cast<int>(s.boxes.size()) != expected_boxes) return false;
  if (s.boxes.size() != s.targets.size()) return false;
  if (s.walls.count(s.player)) return false;
  if (s.player.row <= 0 || s.player.row >= s.rows - 1) return false;
  for (const Cell& b : s.boxes)
    if (s.walls.count(b)) return false;
  return true;
}

FrozenLakeState try_generate_frozenlake(rng::Stream& stream) {
  FrozenLakeState s;
  s.rows = s.cols = 4;
  s.start = {0, 0};
  s.goal = {s.rows - 1, s.cols - 1};
  s.player = s.start;
  for (int r = 0; r < s.rows; ++r)
    for (int c = 0; c < s.cols; ++c) {
      const Cell cell{r, c};
      if (cell == s.start || cell == s.goal) continue;
      if (stream.next_double() < 0.2) s.holes.insert(cell);
    }
  return s;
}

}  // namespace

SokobanState generate_sokoban_state(EnvKind kind, uint64_t seed) {
  if (kind == EnvKind::FrozenLake) throw ConfigError("generate_sokoban_state: not a sokoban kind");
  rng::Stream stream(rng::mix({static_cast<uint64_t>(kind), seed, 0x736f6b6fULL}));
  const int boxes = kind == EnvKind::LargerSokoban ? 2 : 1;
  for (int attempt = 0; attempt < 200; ++attempt) {
    SokobanState s = try_generate_sokoban(kind, stream);
    if (!sokoban_wellformed(s, boxes)) continue;
    auto solution = solve_sokoban_bfs(s);
    if (solution && !solution->empty()) return s;
  }
  throw Error("sokoban generation: no solvable instance after bounded retries (kind " +
              std::string(to_string(kind)) + ", seed " + std::to_string(seed) + ")");
}

FrozenLakeState generate_frozenlake_state(uint64_t seed) {
  rng::Stream stream(rng::mix({static_cast<uint64_t>(EnvKind::FrozenLake), seed, 0x666c616bULL}));
  for (int attempt = 0; attempt < 200; ++attempt) {
    FrozenLakeState s = try_generate_frozenlake(stream);
    if (s.holes.empty()) continue;  // keep instances non-trivial
    if (solve_frozenlake_bfs(s)) return s;
  }
  throw Error("frozenlake generation: no solvable instance after bounded retries (seed " +
              std::to_string(seed) + ")");
}

// --------------------------------------------------------------------------
// Environment implementations

namespace {

class SokobanEnv final : public Environment {
 public:
  SokobanEnv(SokobanState state, const EnvOptions& opts)
      : state_(std::move(state)), rc_(opts.rewards),
        max_steps_(opts.max_steps > 0 ? opts.max_steps
                                      : default_max_steps(state_.rows == 8 ? EnvKind::LargerSokoban
                                                                           : EnvKind::SimpleSokoban)) {}

  std::string render() const override { return render_sokoban(state_); }
  bool terminal() const override { return done_; }
  bool succeeded() const override { return success_; }
  int steps_taken() const override { return state_.steps_taken; }
  int max_steps() const override { return max_steps_; }

  StepOutcome step(const std::string& action_text) override {
    if (done_) throw LifecycleError("sokoban: step on terminated environment");
    StepOutcome out;
    out.reward = rc_.step_penalty;
    const auto dir = parse_action(action_text);
    if (!dir) {
      out.reward += rc_.format_penalty;
    } else {
      out.info.action_valid = true;
      const size_t on_before = boxes_on_target();
      out.info.action_effective = apply(*dir);
      const size_t on_after = boxes_on_target();
      if (on_after > on_before)
        out.reward += rc_.box_shaping * static_cast<double>(on_after - on_before);
      if (on_after == state_.boxes.size()) {
        out.info.success = true;
        success_ = true;
        done_ = true;
        out.reward += rc_.success_reward;
      }
    }
    ++state_.steps_taken;
    if (state_.steps_taken >= max_steps_) done_ = true;
    out.done = done_;
    out.observation = render();
    return out;
  }

 private:
  size_t boxes_on_target() const {
    size_t n = 0;
    for (const Cell& b : state_.boxes)
      if (state_.targets.count(b)) ++n;
    return n;
  }

  bool apply(Dir d) {
    const Cell next = moved(state_.player, d);
    if (!(next.row >= 0 && next.row < state_.rows && next.col >= 0 && next.col < state_.cols)) return false;
    if (state_.walls.count(next)) return false;
    if (state_.boxes.count(next)) {
      const Cell beyond = moved(next, d);
      if (!(beyond.row >= 0 && beyond.row < state_.rows && beyond.col >= 0 && beyond.col < state_.cols))
        return false;
      if (state_.walls.count(beyond) || state_.boxes.count(beyond)) return false;
      state_.boxes.erase(next);
      state_.boxes.insert(beyond);
    }
    state_.player = next;
    return true;
  }

  SokobanState state_;
  RewardConstants rc_;
  int max_steps_;
  bool done_ = false;
  bool success_ = false;
};

class FrozenLakeEnv final : public Environment {
 public:
  FrozenLakeEnv(FrozenLakeState state, const EnvOptions& opts)
      : state_(std::move(state)), rc_(opts.rewards),
        max_steps_(opts.max_steps > 0 ? opts.max_steps : default_max_steps(EnvKind::FrozenLake)),
        slip_stream_(rng::mix({opts.episode_rng_seed, 0x736c6970ULL})) {
    state_.slippery = opts.slippery;
  }

  std::string render() const override { return render_frozenlake(state_); }
  bool terminal() const override { return done_; }
  bool succeeded() const override { return success_; }
  int steps_taken() const override { return state_.steps_taken; }
  int max_steps() const override { return max_steps_; }

  StepOutcome step(const std::string& action_text) override {
    if (done_) throw LifecycleError("frozenlake: step on terminated environment");
    StepOutcome out;
    out.reward = rc_.step_penalty;
    const auto dir = parse_action(action_text);
    if (!dir) {
      out.reward += rc_.format_penalty;
    } else {
      out.info.action_valid = true;
      Dir actual = *dir;
      if (state_.slippery) {
        // Intended direction w.p. 1/3, each perpendicular w.p. 1/3.
        const double u = slip_stream_.next_double();
        const auto [left, right] = perpendicular(*dir);
        if (u < 1.0 / 3.0)
          actual = *dir;
        else if (u < 2.0 / 3.0)
          actual = left;
        else
          actual = right;
      }
      const Cell next = moved(state_.player, actual);
      if (next.row >= 0 && next.row < state_.rows && next.col >= 0 && next.col < state_.cols) {
        out.info.action_effective = true;
        state_.player = next;
      }
      if (state_.holes.count(state_.player)) {
        done_ = true;
      } else if (state_.player == state_.goal) {
        done_ = true;
        success_ = true;
        out.info.success = true;
        out.reward += rc_.success_reward;
      }
    }
    ++state_.steps_taken;
    if (state_.steps_taken >= max_steps_) done_ = true;
    out.done = done_;
    out.observation = render();
    return out;
  }

 private:
  static std::pair<Dir, Dir> perpendicular(Dir d) {
    if (d == Dir::up || d == Dir::down) return {Dir::left, Dir::right};
    return {Dir::up, Dir::down};
  }

  FrozenLakeState state_;
  RewardConstants rc_;
  int max_steps_;
  rng::Stream slip_stream_;
  bool done_ = false;
  bool success_ = false;
};

}  // namespace

std::unique_ptr<Environment> make_sokoban_env(SokobanState state, const EnvOptions& opts) {
  return std::make_unique<SokobanEnv>(std::move(state), opts);
}

std::unique_ptr<Environment> make_frozenlake_env(FrozenLakeState state, const EnvOptions& opts) {
  return std::make_unique<FrozenLakeEnv>(std::move(state), opts);
}

std::unique_ptr<Environment> make_env(EnvKind kind, uint64_t seed, const EnvOptions& opts) {
  if (kind == EnvKind::FrozenLake) return make_frozenlake_env(generate_frozenlake_state(seed), opts);
  return make_sokoban_env(generate_sokoban_state(kind, seed), opts);
}

// --------------------------------------------------------------------------
// Episode driver

EpisodeDriver::EpisodeDriver(std::unique_ptr<Environment> env, const Vocabulary& vocab, int max_turns)
    : env_(std::move(env)), vocab_(vocab), max_turns_(max_turns) {
  if (max_turns_ <= 0) throw ConfigError("episode driver: max_turns must be positive");
  prompt_ = observation_tokens();
}

std::vector<int> EpisodeDriver::observation_tokens() const {
  std::vector<int> toks;
  toks.push_back(vocab_.id("<obs>"));
  const auto rendered = vocab_.tokenize(env_->render());
  toks.insert(toks.end(), rendered.begin(), rendered.end());
  toks.push_back(vocab_.id("</obs>"));
  return toks;
}

std::vector<int> EpisodeDriver::on_action(std::span<const int> action_tokens,
                                          std::span<const double> logprobs) {
  if (done_) throw LifecycleError("episode driver: action after episode end");
  if (action_tokens.size() != logprobs.size())
    throw InputError("episode driver: action tokens and logprobs misaligned");

  const std::string text = vocab_.detokenize(action_tokens);
  const StepOutcome outcome = env_->step(text);

  for (size_t i = 0; i < action_tokens.size(); ++i) {
    response_.push_back(action_tokens[i]);
    logprobs_.push_back(logprobs[i]);
    mask_.push_back(1);
    rewards_.push_back(0.0);
  }
  if (!action_tokens.empty()) rewards_.back() = outcome.reward;

  ++info_.turns;
  info_.valid_actions += outcome.info.action_valid ? 1 : 0;
  info_.effective_actions += outcome.info.action_valid && outcome.info.action_effective ? 1 : 0;
  info_.success = info_.success || outcome.info.success;
  info_.total_reward += outcome.reward;

  if (outcome.done || info_.turns >= max_turns_) {
    done_ = true;
    return {};
  }
  auto obs = observation_tokens();
  for (int tok : obs) {
    response_.push_back(tok);
    logprobs_.push_back(0.0);
    mask_.push_back(0);
    rewards_.push_back(0.0);
  }
  return obs;
}

SampleRecord EpisodeDriver::finalize(const std::string& sample_id, const std::string& group_id,
                                     const std::string& domain_tag) const {
  SampleRecord rec;
  rec.sample_id = sample_id;
  rec.group_id = group_id;
  rec.domain_tag = domain_tag;
  rec.prompt_tokens = prompt_;
  rec.response_tokens = response_;
  rec.response_logprobs = logprobs_;
  rec.rewards = rewards_;
  rec.action_mask = mask_;
  rec.scalar_reward = info_.total_reward;
  rec.done = done_;
  rec.meta["accuracy"] = info_.success ? "1" : "0";
  rec.meta["success"] = info_.success ? "1" : "0";
  rec.meta["turns"] = std::to_string(info_.turns);
  rec.meta["valid_actions"] = std::to_string(info_.valid_actions);
  rec.meta["effective_actions"] = std::to_string(info_.effective_actions);
  return rec;
}

SampleRecord run_episode(EpisodeDriver& driver, const ActorFn& actor, const std::string& sample_id,
                         const std::string& group_id, const std::string& domain_tag) {
  std::vector<int> ctx = driver.prompt_tokens();
  while (!driver.done()) {
    auto [tokens, lps] = actor(ctx);
    ctx.insert(ctx.end(), tokens.begin(), tokens.end());
    auto obs = driver.on_action(tokens, lps);
    ctx.insert(ctx.end(), obs.begin(), obs.end());
  }
  return driver.finalize(sample_id, group_id, domain_tag);
}

// --------------------------------------------------------------------------
// Environment worker

EnvWorker::EnvWorker(EnvWorkerConfig config, const Vocabulary& vocab)
    : config_(std::move(config)), vocab_(vocab) {}

Message EnvWorker::call(const std::string& method, const Message& input) {
  if (method == "env_begin") {
    const std::string& request_id = input.field("request_id");
    if (episodes_.count(request_id))
      throw LifecycleError("env worker: episode already live for request '" + request_id + "'");
    EnvOptions opts = config_.options;
    opts.episode_rng_seed = std::stoull(input.field("episode_seed"));
    Episode ep;
    ep.driver = std::make_unique<EpisodeDriver>(
        make_env(config_.kind, std::stoull(input.field("instance_seed")), opts), vocab_,
        config_.max_turns);
    ep.sample_id = input.field("sample_id");
    ep.group_id = input.field("group_id");
    ep.domain_tag = input.field("domain_tag");
    Message out;
    out.tensors["prompt_tokens"].assign(ep.driver->prompt_tokens().begin(),
                                        ep.driver->prompt_tokens().end());
    episodes_[request_id] = std::move(ep);
    return out;
  }
  if (method == "env_step") {
    const std::string& request_id = input.field("request_id");
    auto it = episodes_.find(request_id);
    if (it == episodes_.end())
      throw LifecycleError("env worker: no live episode for request '" + request_id + "'");
    const auto& toks_d = input.tensor("action_tokens");
    const auto& lps = input.tensor("action_logprobs");
    std::vector<int> toks(toks_d.size());
    for (size_t i = 0; i < toks_d.size(); ++i) toks[i] = static_cast<int>(toks_d[i]);
    auto obs = it->second.driver->on_action(toks, lps);

    Message out;
    out.tensors["obs_tokens"].assign(obs.begin(), obs.end());
    out.scalars["done"] = it->second.driver->done() ? 1.0 : 0.0;
    if (it->second.driver->done()) {
      SampleRecord rec =
          it->second.driver->finalize(it->second.sample_id, it->second.group_id, it->second.domain_tag);
      out.batch.push_back(std::move(rec));
      episodes_.erase(it);
    }
    return out;
  }
  if (method == "env_abort") {
    episodes_.erase(input.field("request_id"));
    return {};
  }
  throw DispatchError("env worker: unknown method '" + method + "'");
}

WorkerFactory env_worker_factory(EnvWorkerConfig config, const Vocabulary& vocab) {
  return [config, &vocab](int, int, const std::string&) {
    return std::make_unique<EnvWorker>(config, vocab);
  };
}

}  // namespace rollmini
