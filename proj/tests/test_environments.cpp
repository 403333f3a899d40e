// SPDX-License-Identifier: Apache-2.0
#include <doctest.h>

#include <map>
#include <sstream>

#include "rollmini/environments.hpp"
#include "rollmini/errors.hpp"
#include "rollmini/rng.hpp"

using namespace rollmini;

namespace {

std::string action_text(Dir d) {
  switch (d) {
    case Dir::up: return "<answer>Up</answer>";
    case Dir::down: return "<answer>Down</answer>";
    case Dir::left: return "<answer>Left</answer>";
    case Dir::right: return "<answer>Right</answer>";
  }
  return "";
}

// Test-oracle parser: reconstructs a SokobanState from its rendering.
SokobanState parse_sokoban_render(const std::string& text, VocabProfile profile) {
  const std::map<std::string, int> std_map = {{"#", 0}, {"_", 1}, {"O", 2}, {"X", 3},
                                              {"P", 4}, {"\xE2\x88\x9A", 5}, {"S", 6}};
  const std::map<std::string, int> alt_map = {{"W", 0}, {".", 1}, {"T", 2}, {"B", 3},
                                              {"A", 4}, {"V", 5}, {"Q", 6}};
  const auto& symbols = profile == VocabProfile::standard ? std_map : alt_map;

  SokobanState s;
  s.profile = profile;
  std::istringstream is(text);
  std::string line;
  int row = 0;
  int cols = 0;
  while (std::getline(is, line)) {
    int col = 0;
    for (size_t i = 0; i < line.size();) {
      std::string sym = line.substr(i, 1);
      if (profile == VocabProfile::standard && (line[i] & 0x80)) sym = line.substr(i, 3);  // UTF-8 check mark
      i += sym.size();
      const int kind = symbols.at(sym);
      const Cell cell{row, col};
      switch (kind) {
        case 0: s.walls.insert(cell); break;
        case 1: break;
        case 2: s.targets.insert(cell); break;
        case 3: s.boxes.insert(cell); break;
        case 4: s.player = cell; break;
        case 5:
          s.boxes.insert(cell);
          s.targets.insert(cell);
          break;
        case 6:
          s.player = cell;
          s.targets.insert(cell);
          break;
      }
      ++col;
    }
    cols = std::max(cols, col);
    ++row;
  }
  s.rows = row;
  s.cols = cols;
  return s;
}

// Independent hand model of the Sokoban move rule.
struct HandModel {
  Cell player;
  std::set<Cell> boxes;
  bool moved = false;
};

HandModel hand_step(const SokobanState& s, Dir d) {
  HandModel out{s.player, s.boxes, false};
  auto blocked = [&](Cell c) {
    return c.row < 0 || c.row >= s.rows || c.col < 0 || c.col >= s.cols || s.walls.count(c) > 0;
  };
  const Cell next = moved(s.player, d);
  if (blocked(next)) return out;
  if (out.boxes.count(next)) {
    const Cell beyond = moved(next, d);
    if (blocked(beyond) || out.boxes.count(beyond)) return out;
    out.boxes.erase(next);
    out.boxes.insert(beyond);
  }
  out.player = next;
  out.moved = true;
  return out;
}

}  // namespace

TEST_CASE("environment kinds generate the configured shapes") {
  auto simple = generate_sokoban_state(EnvKind::SimpleSokoban, 1);
  CHECK(simple.rows == 6);
  CHECK(simple.cols == 6);
  CHECK(simple.boxes.size() == 1);
  CHECK(simple.targets.size() == 1);
  CHECK(simple.profile == VocabProfile::standard);

  auto larger = generate_sokoban_state(EnvKind::LargerSokoban, 1);
  CHECK(larger.rows == 8);
  CHECK(larger.boxes.size() == 2);

  auto alt = generate_sokoban_state(EnvKind::SokobanDifferentGridVocab, 1);
  CHECK(alt.profile == VocabProfile::alternate);

  CHECK_THROWS_AS(env_kind_from_string("Nope"), ConfigError);
}

TEST_CASE("generated instances are BFS-solvable and seed-deterministic (sampled)") {
  for (uint64_t seed = 0; seed < 40; ++seed) {
    for (EnvKind kind : {EnvKind::SimpleSokoban, EnvKind::LargerSokoban, EnvKind::SokobanDifferentGridVocab}) {
      auto a = generate_sokoban_state(kind, seed);
      auto b = generate_sokoban_state(kind, seed);
      CHECK(a.player == b.player);
      CHECK(a.boxes == b.boxes);
      CHECK(a.walls == b.walls);
      auto solution = solve_sokoban_bfs(a);
      REQUIRE(solution.has_value());
      CHECK(!solution->empty());
    }
    auto lake = generate_frozenlake_state(seed);
    CHECK(solve_frozenlake_bfs(lake).has_value());
    CHECK(!lake.holes.empty());
  }
}

TEST_CASE("push rule: player shifts a box into free space") {
  SokobanState s;
  s.rows = s.cols = 4;
  s.player = {1, 0};
  s.boxes = {{1, 1}};
  s.targets = {{1, 3}};
  auto env = make_sokoban_env(s, {});

  auto out = env->step(action_text(Dir::right));
  CHECK(out.info.action_valid);
  CHECK(out.info.action_effective);
  CHECK(!out.done);
  // player now at (1,1), box at (1,2): next push lands the box on the target
  auto win = env->step(action_text(Dir::right));
  CHECK(win.info.success);
  CHECK(win.done);
  CHECK(win.reward == doctest::Approx(-0.01 + 1.0 + 10.0));
  CHECK(env->succeeded());
  CHECK_THROWS_AS(env->step(action_text(Dir::right)), LifecycleError);
}

TEST_CASE("blocked push leaves the state unchanged") {
  SokobanState s;
  s.rows = s.cols = 4;
  s.walls = {{1, 3}};
  s.player = {1, 1};
  s.boxes = {{1, 2}};
  s.targets = {{0, 0}};
  auto env = make_sokoban_env(s, {});
  const std::string before = env->render();
  auto out = env->step(action_text(Dir::right));
  CHECK(out.info.action_valid);
  CHECK(!out.info.action_effective);
  CHECK(env->render() == before);
}

TEST_CASE("unparseable actions consume the turn with a format penalty") {
  auto env = make_env(EnvKind::SimpleSokoban, 3);
  const std::string before = env->render();
  auto out = env->step("go north please");
  CHECK(!out.info.action_valid);
  CHECK(!out.info.action_effective);
  CHECK(env->render() == before);
  CHECK(out.reward == doctest::Approx(-0.01 - 0.001));
  CHECK(env->steps_taken() == 1);

  CHECK(parse_action("<answer> uP </answer>") == Dir::up);
  CHECK(parse_action("<think>hm</think><answer>LEFT</answer>") == Dir::left);
  CHECK(!parse_action("<answer>north</answer>").has_value());
  CHECK(!parse_action("Up").has_value());
}

TEST_CASE("4x4 transition table equals the hand-model enumeration") {
  // All (player, box, walls) placements on a 4x4 grid for a fixed small set
  // of wall patterns, all four actions.
  const std::vector<std::set<Cell>> wall_patterns = {
      {}, {{0, 0}}, {{1, 2}}, {{2, 1}, {3, 3}}, {{0, 3}, {3, 0}}};
  size_t cases = 0;
  for (const auto& walls : wall_patterns) {
    for (int pr = 0; pr < 4; ++pr)
      for (int pc = 0; pc < 4; ++pc)
        for (int br = 0; br < 4; ++br)
          for (int bc = 0; bc < 4; ++bc) {
            const Cell player{pr, pc}, box{br, bc};
            if (player == box || walls.count(player) || walls.count(box)) continue;
            SokobanState s;
            s.rows = s.cols = 4;
            s.walls = walls;
            s.player = player;
            s.boxes = {box};
            s.targets = {{3, 3}};
            if (walls.count({3, 3})) s.targets = {{2, 2}};
            for (Dir d : {Dir::up, Dir::down, Dir::left, Dir::right}) {
              if (s.targets.count(box)) continue;  // already solved states are terminal
              auto env = make_sokoban_env(s, {});
              auto out = env->step(action_text(d));
              const auto expected = hand_step(s, d);
              const auto got = parse_sokoban_render(env->render(), VocabProfile::standard);
              CHECK(got.player == expected.player);
              CHECK(got.boxes == expected.boxes);
              CHECK(out.info.action_effective == expected.moved);
              ++cases;
            }
          }
  }
  CHECK(cases > 3000);
}

TEST_CASE("box count and walls are conserved under random play") {
  rng::Stream s(5);
  for (uint64_t seed = 0; seed < 5; ++seed) {
    auto state = generate_sokoban_state(EnvKind::LargerSokoban, seed);
    const auto walls = state.walls;
    const size_t n_boxes = state.boxes.size();
    auto env = make_sokoban_env(state, {});
    while (!env->terminal()) {
      const Dir d = static_cast<Dir>(s.next_below(4));
      env->step(action_text(d));
      const auto got = parse_sokoban_render(env->render(), VocabProfile::standard);
      CHECK(got.boxes.size() == n_boxes);
      CHECK(got.walls == walls);
    }
  }
}

TEST_CASE("renderings are profile bijections of the same state") {
  auto state = generate_sokoban_state(EnvKind::SimpleSokoban, 9);
  state.profile = VocabProfile::standard;
  const auto std_render = render_sokoban(state);
  state.profile = VocabProfile::alternate;
  const auto alt_render = render_sokoban(state);
  CHECK(std_render != alt_render);

  const auto from_std = parse_sokoban_render(std_render, VocabProfile::standard);
  const auto from_alt = parse_sokoban_render(alt_render, VocabProfile::alternate);
  CHECK(from_std.player == from_alt.player);
  CHECK(from_std.boxes == from_alt.boxes);
  CHECK(from_std.targets == from_alt.targets);
  CHECK(from_std.walls == from_alt.walls);

  // solved rendering contains no off-target box symbol
  SokobanState solved;
  solved.rows = solved.cols = 4;
  solved.player = {1, 1};
  solved.boxes = {{2, 2}};
  solved.targets = {{2, 2}};
  CHECK(render_sokoban(solved).find('X') == std::string::npos);
}

TEST_CASE("frozenlake slip statistics stay within ±0.02 of 1/3 over 30k steps") {
  FrozenLakeState base;
  base.rows = base.cols = 5;
  base.start = {2, 2};
  base.goal = {4, 4};
  base.player = {2, 2};
  base.slippery = true;

  std::map<Cell, int> outcomes;
  const int n = 30000;
  for (int i = 0; i < n; ++i) {
    EnvOptions opts;
    opts.slippery = true;
    opts.episode_rng_seed = static_cast<uint64_t>(i);
    auto env = make_frozenlake_env(base, opts);
    env->step(action_text(Dir::up));
    // player position after one intended-Up step from the center
    const auto rendered = env->render();
    int row = 0, col = 0, r = 0;
    std::istringstream is(rendered);
    std::string line;
    Cell player{};
    while (std::getline(is, line)) {
      for (int c = 0; c < static_cast<int>(line.size()); ++c)
        if (line[static_cast<size_t>(c)] == 'P') player = {r, c};
      ++r;
    }
    (void)row;
    (void)col;
    ++outcomes[player];
  }
  const double third = 1.0 / 3.0;
  CHECK(std::abs(outcomes[{1, 2}] / double(n) - third) < 0.02);  // intended (up)
  CHECK(std::abs(outcomes[{2, 1}] / double(n) - third) < 0.02);  // left perpendicular
  CHECK(std::abs(outcomes[{2, 3}] / double(n) - third) < 0.02);  // right perpendicular
}

TEST_CASE("frozenlake trajectories are seed-deterministic") {
  auto run = [](uint64_t episode_seed) {
    EnvOptions opts;
    opts.slippery = true;
    opts.episode_rng_seed = episode_seed;
    auto env = make_frozenlake_env(generate_frozenlake_state(4), opts);
    std::string trace;
    rng::Stream s(1);
    while (!env->terminal()) {
      env->step(action_text(static_cast<Dir>(s.next_below(4))));
      trace += env->render();
    }
    return trace;
  };
  CHECK(run(7) == run(7));
  CHECK(run(7) != run(8));
}

TEST_CASE("episode driver replays a BFS solution to success") {
  const auto& vocab = Vocabulary::standard();
  auto state = generate_sokoban_state(EnvKind::SimpleSokoban, 21);
  auto solution = solve_sokoban_bfs(state);
  REQUIRE(solution.has_value());

  EpisodeDriver driver(make_sokoban_env(state, {}), vocab, 20);
  size_t next = 0;
  ActorFn actor = [&](std::span<const int>) {
    const auto toks = vocab.tokenize(action_text((*solution)[next++]));
    return std::make_pair(toks, std::vector<double>(toks.size(), -0.1));
  };
  auto rec = run_episode(driver, actor, "ep0");
  CHECK(rec.meta.at("success") == "1");
  CHECK(rec.meta.at("turns") == std::to_string(solution->size()));
  CHECK(rec.done);
  CHECK(rec.action_mask.size() == rec.response_tokens.size());
  CHECK(rec.rewards.size() == rec.response_tokens.size());
  CHECK(*rec.scalar_reward == doctest::Approx(driver.info().total_reward));

  // masked positions: every <obs> block is excluded from the loss
  for (size_t t = 0; t < rec.response_tokens.size(); ++t) {
    if (rec.response_tokens[t] == vocab.id("<obs>") || rec.response_tokens[t] == vocab.id("</obs>"))
      CHECK(rec.action_mask[t] == 0);
  }
}

TEST_CASE("episode driver attributes step rewards to the turn's final action token") {
  const auto& vocab = Vocabulary::standard();
  auto state = generate_sokoban_state(EnvKind::SimpleSokoban, 22);
  EpisodeDriver driver(make_sokoban_env(state, {}), vocab, 3);
  const auto toks = vocab.tokenize("<answer>Up</answer>");
  driver.on_action(toks, std::vector<double>(toks.size(), 0.0));

  auto rec = driver.finalize("x", "", "agentic");
  // first turn occupies the first 3 response positions
  CHECK(rec.rewards[0] == 0.0);
  CHECK(rec.rewards[1] == 0.0);
  CHECK(rec.rewards[2] != 0.0);
}

TEST_CASE("unparseable actor output accrues format penalties for max_turns") {
  const auto& vocab = Vocabulary::standard();
  const int max_turns = 5;
  EpisodeDriver driver(make_env(EnvKind::SimpleSokoban, 30), vocab, max_turns);
  ActorFn actor = [&](std::span<const int>) {
    const auto toks = vocab.tokenize("Up");  // no answer tags
    return std::make_pair(toks, std::vector<double>(toks.size(), 0.0));
  };
  auto rec = run_episode(driver, actor, "bad");
  CHECK(rec.meta.at("success") == "0");
  CHECK(rec.meta.at("effective_actions") == "0");
  CHECK(rec.meta.at("turns") == std::to_string(max_turns));
  double total = 0.0;
  for (double r : rec.rewards) total += r;
  CHECK(total == doctest::Approx(max_turns * (-0.01 - 0.001)));
}

TEST_CASE("episodes terminate within max_turns under random actors") {
  const auto& vocab = Vocabulary::standard();
  rng::Stream s(3);
  for (int trial = 0; trial < 10; ++trial) {
    EpisodeDriver driver(make_env(EnvKind::FrozenLake, 40 + static_cast<uint64_t>(trial)), vocab, 15);
    ActorFn actor = [&](std::span<const int>) {
      const char* dirs[] = {"Up", "Down", "Left", "Right"};
      const auto toks = vocab.tokenize("<answer>" + std::string(dirs[s.next_below(4)]) + "</answer>");
      return std::make_pair(toks, std::vector<double>(toks.size(), 0.0));
    };
    auto rec = run_episode(driver, actor, "rnd" + std::to_string(trial));
    CHECK(std::stoi(rec.meta.at("turns")) <= 15);
    CHECK(rec.done);
  }
}

TEST_CASE("env worker runs episodes over messages") {
  const auto& vocab = Vocabulary::standard();
  EnvWorkerConfig cfg;
  cfg.kind = EnvKind::SimpleSokoban;
  cfg.max_turns = 20;
  cfg.options.max_steps = 20;
  EnvWorker worker(cfg, vocab);

  Message begin;
  begin.fields = {{"request_id", "r0"}, {"sample_id", "s0"}, {"group_id", "g0"},
                  {"domain_tag", "agentic"}, {"instance_seed", "21"}, {"episode_seed", "1"}};
  auto reply = worker.call("env_begin", begin);
  CHECK(!reply.tensor("prompt_tokens").empty());
  CHECK_THROWS_AS(worker.call("env_begin", begin), LifecycleError);

  auto state = generate_sokoban_state(EnvKind::SimpleSokoban, 21);
  auto solution = solve_sokoban_bfs(state);
  REQUIRE(solution.has_value());
  Message last;
  for (size_t i = 0; i < solution->size(); ++i) {
    Message step;
    step.fields["request_id"] = "r0";
    const auto toks = vocab.tokenize(action_text((*solution)[i]));
    step.tensors["action_tokens"].assign(toks.begin(), toks.end());
    step.tensors["action_logprobs"].assign(toks.size(), 0.0);
    last = worker.call("env_step", step);
  }
  CHECK(last.scalar("done") == 1.0);
  REQUIRE(last.batch.size() == 1);
  CHECK(last.batch.samples[0].meta.at("success") == "1");
  CHECK(last.batch.samples[0].sample_id == "s0");

  Message unknown;
  unknown.fields["request_id"] = "r0";  // episode already finalized
  unknown.tensors["action_tokens"] = {};
  unknown.tensors["action_logprobs"] = {};
  CHECK_THROWS_AS(worker.call("env_step", unknown), LifecycleError);
}
