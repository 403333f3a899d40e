// SPDX-License-Identifier: Apache-2.0
#include "rollmini/dataset.hpp"

#include <fstream>
#include <sstream>

#include <json.hpp>

#include "rollmini/errors.hpp"

namespace rollmini {

using nlohmann::json;

std::vector<TaskRecord> load_task_jsonl(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw ConfigError("dataset: cannot open '" + path + "'");
  std::vector<TaskRecord> out;
  std::string line;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    json j = json::parse(line);
    TaskRecord rec;
    rec.prompt = j.at("prompt").get<std::string>();
    rec.domain_tag = j.at("domain_tag").get<std::string>();
    if (j.contains("gold_answer")) rec.gold_answer = j["gold_answer"].get<std::string>();
    if (j.contains("test_cases")) rec.tests_json = j["test_cases"].dump();
    out.push_back(std::move(rec));
  }
  if (out.empty()) throw ConfigError("dataset: '" + path + "' contains no records");
  return out;
}

void write_task_jsonl(const std::string& path, const std::vector<TaskRecord>& records) {
  std::ofstream os(path, std::ios::trunc);
  if (!os) throw ConfigError("dataset: cannot write '" + path + "'");
  for (const auto& rec : records) {
    json j;
    j["prompt"] = rec.prompt;
    j["domain_tag"] = rec.domain_tag;
    if (!rec.gold_answer.empty()) j["gold_answer"] = rec.gold_answer;
    if (!rec.tests_json.empty()) j["test_cases"] = json::parse(rec.tests_json);
    os << j.dump() << '\n';
  }
}

std::vector<TaskRecord> gen_addition_dataset() {
  std::vector<TaskRecord> out;
  for (int a = 0; a <= 9; ++a)
    for (int b = 0; b <= 9; ++b) {
      TaskRecord rec;
      rec.prompt = std::to_string(a) + "+" + std::to_string(b) + "=";
      rec.domain_tag = "math";
      rec.gold_answer = std::to_string(a + b);
      out.push_back(std::move(rec));
    }
  return out;
}

namespace {

// A two-operator expression tree over variables; the generator evaluates
// the tree directly, independent of the sandbox parser it later tests.
struct ExprSpec {
  std::string source;
  char op1 = '+', op2 = '+';
  std::string v1 = "a", v2 = "b", v3 = "c";
};

int64_t apply_op(char op, int64_t lhs, int64_t rhs) {
  switch (op) {
    case '+': return lhs + rhs;
    case '-': return lhs - rhs;
    case '*': return lhs * rhs;
  }
  throw Error("bad op");
}

}  // namespace

std::vector<TaskRecord> gen_code_dataset(size_t count, uint64_t seed) {
  const char ops[] = {'+', '-', '*'};
  const char* vars[] = {"a", "b", "c"};
  rng::Stream stream(rng::mix({seed, 0x636f6465ULL}));
  std::vector<TaskRecord> out;
  for (size_t i = 0; i < count; ++i) {
    ExprSpec e;
    e.op1 = ops[stream.next_below(3)];
    e.op2 = ops[stream.next_below(3)];
    e.v1 = vars[stream.next_below(3)];
    e.v2 = vars[stream.next_below(3)];
    e.v3 = vars[stream.next_below(3)];
    // Left-associative: (v1 op1 v2) op2 v3 — matches the sandbox grammar
    // for + - * since * only appears with equal precedence handling below.
    // To keep generator arithmetic equal to parsed arithmetic regardless of
    // precedence, parenthesize explicitly.
    e.source = "return (" + e.v1 + e.op1 + e.v2 + ")" + e.op2 + e.v3;

    json cases = json::array();
    for (int c = 0; c < 3; ++c) {
      std::map<std::string, int64_t> inputs = {{"a", static_cast<int64_t>(stream.next_below(19)) - 9},
                                               {"b", static_cast<int64_t>(stream.next_below(19)) - 9},
                                               {"c", static_cast<int64_t>(stream.next_below(19)) - 9}};
      const int64_t expected = apply_op(e.op2, apply_op(e.op1, inputs[e.v1], inputs[e.v2]), inputs[e.v3]);
      json jc;
      jc["inputs"] = inputs;
      jc["expected"] = expected;
      cases.push_back(std::move(jc));
    }
    TaskRecord rec;
    rec.prompt = "(" + e.v1 + e.op1 + e.v2 + ")" + e.op2 + e.v3 + "=";
    rec.domain_tag = "code";
    rec.tests_json = cases.dump();
    out.push_back(std::move(rec));
  }
  return out;
}

std::vector<TaskRecord> gen_general_dataset() {
  std::vector<std::string> tokens;
  for (int d = 0; d <= 9; ++d) tokens.push_back(std::to_string(d));
  tokens.insert(tokens.end(), {"Up", "Down", "Left", "Right"});
  std::vector<TaskRecord> out;
  for (const auto& tok : tokens) {
    TaskRecord rec;
    rec.prompt = "(" + tok + ")=";
    rec.domain_tag = "general";
    rec.gold_answer = tok;
    out.push_back(std::move(rec));
  }
  return out;
}

DomainSampler::DomainSampler(std::map<std::string, std::vector<TaskRecord>> by_domain,
                             std::map<std::string, double> ratios)
    : by_domain_(std::move(by_domain)), ratios_(std::move(ratios)) {
  double total = 0.0;
  for (const auto& [domain, ratio] : ratios_) {
    if (!by_domain_.count(domain) || by_domain_.at(domain).empty())
      throw ConfigError("domain sampler: no records for domain '" + domain + "'");
    total += ratio;
    cdf_.emplace_back(domain, total);
  }
  if (cdf_.empty()) throw ConfigError("domain sampler: no domains configured");
  if (std::abs(total - 1.0) > 1e-9)
    throw ConfigError("domain sampler: ratios sum to " + std::to_string(total) + ", expected 1");
}

const TaskRecord& DomainSampler::draw(rng::Stream& stream) const {
  const double u = stream.next_double();
  const std::string* domain = &cdf_.back().first;
  for (const auto& [name, upper] : cdf_) {
    if (u < upper) {
      domain = &name;
      break;
    }
  }
  const auto& records = by_domain_.at(*domain);
  return records[stream.next_below(records.size())];
}

}  // namespace rollmini
