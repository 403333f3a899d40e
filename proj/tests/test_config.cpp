// SPDX-License-Identifier: Apache-2.0
#include <doctest.h>

#include <cstdio>
#include <fstream>

#include "rollmini/checkpoint.hpp"
#include "rollmini/config.hpp"
#include "rollmini/errors.hpp"
#include "rollmini/tomlmini.hpp"

using namespace rollmini;

namespace {

const char* kAgenticToml = R"(
# desk-scale agentic run
[run]
pipeline = "agentic"
seed = 7
total_steps = 4
rollout_batch_size = 8
output_dir = "runs/test"

[devices]
gpu_count = 2
cpu_count = 2
gpu_memory = 100
cpu_memory = 100

[mapping.actor_train]
devices = ["g0", "g1"]
memory = 30
world_size = 2

[mapping.actor_infer]
devices = ["g0", "g1"]
memory = 30
world_size = 2

[mapping.reference]
devices = ["g0"]
memory = 20
world_size = 1

[mapping.environment]
devices = ["c0", "c1"]
memory = 10
world_size = 2

[policy]
embed_dim = 4
context_window = 8
hidden_dim = 8

[generation]
max_new_tokens = 4
temperature = 1.0

[train]
learning_rate = 0.1

[environment]
kind = "FrozenLake"
max_turns = 6
)";

std::string write_temp(const std::string& text, const std::string& name) {
  const std::string path = "/tmp/" + name;
  std::ofstream os(path, std::ios::trunc);
  os << text;
  return path;
}

}  // namespace

TEST_CASE("toml subset parses sections, scalars, arrays and comments") {
  auto t = toml::Table::parse(R"(
top = 1
[a]
x = "hello"  # trailing comment
y = -3
z = 2.5
flag = true
list = ["p", "q"]
[a.b]
deep = 4
)");
  CHECK(t.get_int("top", 0) == 1);
  CHECK(t.get_string("a.x", "") == "hello");
  CHECK(t.get_int("a.y", 0) == -3);
  CHECK(t.get_double("a.z", 0) == 2.5);
  CHECK(t.get_bool("a.flag", false));
  CHECK(t.get_string_array("a.list") == std::vector<std::string>{"p", "q"});
  CHECK(t.get_int("a.b.deep", 0) == 4);
  CHECK(t.get_int("missing", 42) == 42);
  CHECK(t.subsections("a") == std::vector<std::string>{"b"});

  CHECK_THROWS_AS(toml::Table::parse("x 1"), ConfigError);
  CHECK_THROWS_AS(toml::Table::parse("[unterminated"), ConfigError);
  CHECK_THROWS_AS(toml::Table::parse("x = 1\nx = 2"), ConfigError);
  CHECK_THROWS_AS(t.get_int("a.x", 0), ConfigError);  // type mismatch names the key
}

TEST_CASE("run config loads with defaults and validates") {
  const auto path = write_temp(kAgenticToml, "rollmini_agentic.toml");
  RunConfig cfg = load_run_config(path);
  CHECK(cfg.pipeline == PipelineKind::agentic);
  CHECK(cfg.seed == 7);
  CHECK(cfg.rollout_batch_size == 8);
  CHECK(cfg.clusters.at("actor_train").world_size == 2);
  CHECK(cfg.clusters.at("environment").role == Role::environment);
  CHECK(cfg.env_kind == EnvKind::FrozenLake);
  CHECK(cfg.train.learning_rate == 0.1);
  CHECK(cfg.train.reward_clip == 20.0);     // default
  CHECK(cfg.train.advantage_clip == 10.0);  // default
  CHECK(cfg.stop_tokens == std::vector<std::string>{"</answer>"});
}

TEST_CASE("config validation errors name the offending field") {
  auto base = toml::Table::parse(kAgenticToml);
  {
    RunConfig cfg = run_config_from_table(base);
    cfg.clusters.at("actor_infer").devices = {"g9"};
    try {
      cfg.validate();
      FAIL("expected config error");
    } catch (const ConfigError& e) {
      CHECK(std::string(e.what()).find("actor_infer") != std::string::npos);
      CHECK(std::string(e.what()).find("g9") != std::string::npos);
    }
  }
  {
    RunConfig cfg = run_config_from_table(base);
    cfg.clusters.erase("environment");
    CHECK_THROWS_AS(cfg.validate(), ConfigError);
  }
  {
    RunConfig cfg = run_config_from_table(base);
    cfg.pipeline = PipelineKind::rlvr;  // no routes configured
    CHECK_THROWS_AS(cfg.validate(), ConfigError);
  }
}

TEST_CASE("config hash covers training fields but not the output dir") {
  auto base = toml::Table::parse(kAgenticToml);
  RunConfig a = run_config_from_table(base);
  RunConfig b = a;
  b.output_dir = "elsewhere";
  CHECK(a.config_hash() == b.config_hash());
  b.train.learning_rate = 0.2;
  CHECK(a.config_hash() != b.config_hash());

  RunConfig c = a;
  c.seed += 1;
  CHECK(a.config_hash() != c.config_hash());
}

TEST_CASE("bind_roles accepts the config mapping and reports colocation") {
  RunConfig cfg = run_config_from_table(toml::Table::parse(kAgenticToml));
  ResourcePool pool(cfg.device_specs());
  auto plan = pool.bind_roles(cfg.device_mapping(), cfg.role_worlds());
  auto report = colocation_report(pool, plan);
  CHECK(report.colocated_device_count == 2);  // actor_train + actor_infer share g0, g1

  // memory overflow is an allocation error naming the device
  cfg.clusters.at("actor_train").memory = 80;
  ResourcePool pool2(cfg.device_specs());
  try {
    pool2.bind_roles(cfg.device_mapping(), cfg.role_worlds());
    FAIL("expected allocation error");
  } catch (const AllocationError& e) {
    CHECK(std::string(e.what()).find("g0") != std::string::npos);
  }
}

TEST_CASE("checkpoint save/load round trips and detects corruption") {
  RunCheckpoint ckpt;
  ckpt.config_hash = 0x1234abcd5678ULL;
  ckpt.step = 50;
  ckpt.train_params = PolicyParams::init(PolicyLayout{11, 3, 4, 5}, 9);
  ckpt.train_params.version = 51;
  ckpt.rng_states["data"] = {1, 2, 3, 4};
  ckpt.counters["cumulative_tokens"] = 777;

  const std::string path = "/tmp/rollmini_test.ckpt";
  save_checkpoint(ckpt, path);
  RunCheckpoint loaded = load_checkpoint(path);
  CHECK(loaded.config_hash == ckpt.config_hash);
  CHECK(loaded.step == 50);
  CHECK(loaded.train_params.version == 51);
  CHECK(loaded.train_params.values == ckpt.train_params.values);  // bit-exact doubles
  CHECK(loaded.rng_states.at("data") == std::array<uint64_t, 4>{1, 2, 3, 4});
  CHECK(loaded.counters.at("cumulative_tokens") == 777);

  // truncation -> integrity error
  {
    std::ifstream is(path, std::ios::binary);
    std::string bytes((std::istreambuf_iterator<char>(is)), std::istreambuf_iterator<char>());
    std::ofstream os(path + ".trunc", std::ios::binary | std::ios::trunc);
    os.write(bytes.data(), static_cast<long>(bytes.size() / 2));
  }
  CHECK_THROWS_AS(load_checkpoint(path + ".trunc"), IntegrityError);

  // bit flip -> integrity error
  {
    std::ifstream is(path, std::ios::binary);
    std::string bytes((std::istreambuf_iterator<char>(is)), std::istreambuf_iterator<char>());
    bytes[20] = static_cast<char>(bytes[20] ^ 0x40);
    std::ofstream os(path + ".flip", std::ios::binary | std::ios::trunc);
    os.write(bytes.data(), static_cast<long>(bytes.size()));
  }
  CHECK_THROWS_AS(load_checkpoint(path + ".flip"), IntegrityError);

  CHECK_THROWS_AS(load_checkpoint("/tmp/does_not_exist.ckpt"), ConfigError);
}
