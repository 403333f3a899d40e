// SPDX-License-Identifier: Apache-2.0
#include <doctest.h>

#include <json.hpp>

#include "rollmini/dataset.hpp"
#include "rollmini/errors.hpp"
#include "rollmini/rewards.hpp"
#include "rollmini/rng.hpp"
#include "rollmini/vocab.hpp"

using namespace rollmini;

TEST_CASE("verify_math normalizes before comparing") {
  CHECK(verify_math("<answer>007</answer>", "7").accuracy == 1.0);
  CHECK(verify_math("<answer> 7 </answer>", "7").accuracy == 1.0);
  CHECK(verify_math("<answer>-0</answer>", "0").accuracy == 1.0);
  CHECK(verify_math("<answer>+12</answer>", "12").accuracy == 1.0);
  CHECK(verify_math("<answer>8</answer>", "7").accuracy == 0.0);
  CHECK(verify_math("<answer>02/04</answer>", "2/4").accuracy == 1.0);

  // missing tags: accuracy 0 plus the format component
  auto r = verify_math("the answer is 7", "7");
  CHECK(r.accuracy == 0.0);
  CHECK(r.components.at("format") == -0.001);
  CHECK(r.scalar_reward == doctest::Approx(-0.001));
}

TEST_CASE("verify_math round-trip fuzz over random integers") {
  rng::Stream s(12);
  for (int i = 0; i < 2000; ++i) {
    const int64_t g = static_cast<int64_t>(s.next_below(2000000)) - 1000000;
    const std::string gold = std::to_string(g);
    CHECK(verify_math("<answer>" + gold + "</answer>", gold).accuracy == 1.0);
  }
}

TEST_CASE("component additivity holds for every verifier") {
  for (const auto& r : {verify_math("<answer>1</answer>", "2"), verify_math("junk", "2"),
                        verify_general("<answer>Up</answer>", "up")}) {
    double total = 0.0;
    for (const auto& [name, value] : r.components) total += value;
    CHECK(r.scalar_reward == doctest::Approx(total).epsilon(1e-12));
  }
}

TEST_CASE("verify_general folds case and whitespace") {
  CHECK(verify_general("<answer>UP</answer>", "up").accuracy == 1.0);
  CHECK(verify_general("<answer> L e f t </answer>", "Left").accuracy == 1.0);
  CHECK(verify_general("<answer>Down</answer>", "Up").accuracy == 0.0);
}

TEST_CASE("sandbox evaluates the expression language") {
  SandboxLimits limits;

  SandboxProgram add;
  add.source = "return a+b";
  add.test_cases = {{{{"a", 2}, {"b", 3}}, 5}, {{{"a", 0}, {"b", 0}}, 0}};
  CHECK(run_sandbox(add).accuracy == 1.0);

  SandboxProgram div0;
  div0.source = "return a/b";
  div0.test_cases = {{{{"a", 1}, {"b", 0}}, 0}};
  auto r = run_sandbox(div0);
  CHECK(r.accuracy == 0.0);
  CHECK(r.diagnostic == "division by zero");

  SandboxProgram assign;
  assign.source = "x = a*2; y = x+1; return y%5";
  assign.test_cases = {{{{"a", 7}}, 0}};
  CHECK(run_sandbox(assign).accuracy == 1.0);

  SandboxProgram parse_error;
  parse_error.source = "return ((a";
  parse_error.test_cases = {{{{"a", 1}}, 1}};
  CHECK(run_sandbox(parse_error).accuracy == 0.0);

  SandboxProgram undefined;
  undefined.source = "return q";
  undefined.test_cases = {{{}, 0}};
  CHECK(run_sandbox(undefined).diagnostic == "undefined variable 'q'");

  // spaceless program text (detokenized responses carry no spaces)
  EvalOutcome spaceless = eval_program("returna+b", {{"a", 2}, {"b", 5}}, limits);
  CHECK(spaceless.ok);
  CHECK(spaceless.value == 7);
}

TEST_CASE("sandbox is bounded: step limit and magnitude limit") {
  SandboxLimits limits;
  limits.max_steps = 50;

  // A very long chain of additions exceeds the step budget and terminates.
  std::string big = "return 1";
  for (int i = 0; i < 200; ++i) big += "+1";
  EvalOutcome out = eval_program(big, {}, limits);
  CHECK(!out.ok);
  CHECK(out.diagnostic == "step limit exceeded");

  SandboxLimits tight;
  tight.max_output = 1000;
  EvalOutcome overflow = eval_program("return a*a", {{"a", 2000}}, tight);
  CHECK(!overflow.ok);
  CHECK(overflow.diagnostic == "output limit exceeded");
}

TEST_CASE("interpreter agrees with the generator's direct arithmetic on 10k expressions") {
  // gen_code_dataset computes expected outputs from the expression tree it
  // builds; the interpreter must reproduce every one of them.
  SandboxLimits limits;
  size_t cases = 0;
  for (const auto& rec : gen_code_dataset(3400, 77)) {
    const auto tests = nlohmann::json::parse(rec.tests_json);
    // task prompt is "<expr>="; the gold program is "return <expr>"
    const std::string source = "return " + rec.prompt.substr(0, rec.prompt.size() - 1);
    for (const auto& jc : tests) {
      std::map<std::string, int64_t> inputs;
      for (const auto& [name, value] : jc.at("inputs").items()) inputs[name] = value.get<int64_t>();
      EvalOutcome out = eval_program(source, inputs, limits);
      REQUIRE(out.ok);
      CHECK(out.value == jc.at("expected").get<int64_t>());
      ++cases;
    }
  }
  CHECK(cases >= 10000);
}

TEST_CASE("check_format grammars") {
  CHECK(check_format("<think>x</think><answer>Up</answer>", "think_answer") == 0.0);
  CHECK(check_format("<answer>Up", "answer_tags") == -0.001);
  CHECK(check_format("  <answer> Up </answer>  ", "answer_tags") == 0.0);
  CHECK(check_format("<answer>Up</answer>", "think_answer") == -0.001);
  CHECK(check_format("<answer>ok</answer><think>later</think>", "think_answer") == -0.001);
  CHECK_THROWS_AS(check_format("x", "no_such_grammar"), ConfigError);
}

TEST_CASE("route table validates ratios and routes by domain tag") {
  RouteTable table;
  table.routes = {{"math", "reward_math"}, {"code", "reward_code"}, {"general", "reward_general"}};
  table.ratios = {{"math", 0.4}, {"code", 0.3}, {"general", 0.3}};
  table.validate();

  SampleRecord s;
  s.domain_tag = "math";
  CHECK(route(table, s) == "reward_math");
  s.domain_tag = "unknown";
  CHECK_THROWS_AS(route(table, s), RoutingError);

  RouteTable bad = table;
  bad.ratios["math"] = 0.5;
  CHECK_THROWS_AS(bad.validate(), ConfigError);
}

TEST_CASE("domain sampler hits configured ratios within ±0.02 over 10k draws") {
  std::map<std::string, std::vector<TaskRecord>> data;
  data["math"] = gen_addition_dataset();
  data["code"] = gen_code_dataset(50, 1);
  data["general"] = gen_general_dataset();
  DomainSampler sampler(std::move(data), {{"math", 0.4}, {"code", 0.3}, {"general", 0.3}});

  rng::Stream stream(2024);
  std::map<std::string, int> counts;
  const int n = 10000;
  for (int i = 0; i < n; ++i) ++counts[sampler.draw(stream).domain_tag];
  CHECK(std::abs(counts["math"] / double(n) - 0.4) < 0.02);
  CHECK(std::abs(counts["code"] / double(n) - 0.3) < 0.02);
  CHECK(std::abs(counts["general"] / double(n) - 0.3) < 0.02);
}

TEST_CASE("reward worker scores batches from sample meta and is deterministic") {
  const auto& v = Vocabulary::standard();
  RewardWorker math(RewardKind::math_verify, v, -0.001, {});
  math.rank = 0;
  math.device_id = "c0";

  SampleRecord s;
  s.sample_id = "m0";
  s.response_tokens = v.tokenize("<answer>7</answer>");
  s.meta["gold"] = "7";
  auto r1 = math.score(s);
  auto r2 = math.score(s);
  CHECK(r1.accuracy == 1.0);
  CHECK(r1.accuracy == r2.accuracy);
  CHECK(r1.scalar_reward == r2.scalar_reward);

  Message msg;
  msg.batch.push_back(s);
  auto reply = math.call("compute_reward", msg);
  const auto& scored = reply.batch.samples[0];
  CHECK(scored.scalar_reward == 1.0);
  CHECK(scored.rewards.back() == 1.0);
  CHECK(sample_accuracy(scored) == 1.0);

  RewardWorker sandbox(RewardKind::sandbox, v, -0.001, {});
  SampleRecord c;
  c.sample_id = "c0";
  c.response_tokens = v.tokenize("<answer>return a+b</answer>");
  c.meta["tests"] = R"([{"inputs":{"a":2,"b":3},"expected":5}])";
  CHECK(sandbox.score(c).accuracy == 1.0);
  c.meta["tests"] = R"([{"inputs":{"a":2,"b":3},"expected":6}])";
  CHECK(sandbox.score(c).accuracy == 0.0);
}

TEST_CASE("task jsonl io round trips") {
  const std::string path = "/tmp/rollmini_test_tasks.jsonl";
  auto records = gen_addition_dataset();
  write_task_jsonl(path, records);
  auto loaded = load_task_jsonl(path);
  REQUIRE(loaded.size() == records.size());
  CHECK(loaded[7].prompt == records[7].prompt);
  CHECK(loaded[7].gold_answer == records[7].gold_answer);

  auto code = gen_code_dataset(5, 3);
  write_task_jsonl(path, code);
  auto loaded_code = load_task_jsonl(path);
  CHECK(loaded_code[0].tests_json == code[0].tests_json);
}
