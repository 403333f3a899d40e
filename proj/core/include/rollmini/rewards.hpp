// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "rollmini/worker.hpp"

namespace rollmini {

class Vocabulary;

struct RewardResult {
  std::string sample_id;
  double accuracy = 0.0;       // 0/1 for verifiable domains
  double scalar_reward = 0.0;  // exact sum of components
  std::map<std::string, double> components;  // verify / format / penalty
  std::string worker_id;
  uint64_t latency_ticks = 0;
  std::string diagnostic;
};

struct SandboxLimits {
  uint64_t max_steps = 10000;
  int64_t max_output = 1000000000;  // bound on any intermediate magnitude

  void validate() const;
};

struct SandboxCase {
  std::map<std::string, int64_t> inputs;
  int64_t expected = 0;
};

/// A program in the sandbox expression language: integer arithmetic
/// (+ - * / %), single-letter variables, optional assignments, one return.
struct SandboxProgram {
  std::string source;
  std::vector<SandboxCase> test_cases;
  SandboxLimits limits;
};

/// First well-formed <answer>...</answer> span, if any.
std::optional<std::string> extract_answer_span(const std::string& text);

/// Rule-based verification of a numeric answer: extracts the answer span,
/// normalizes (trim, strip leading zeros, canonical sign, p/q rationals)
/// and compares with the gold string. A missing span scores accuracy 0 and
/// the format component.
RewardResult verify_math(const std::string& response_text, const std::string& gold_answer,
                         double format_weight = -0.001);

/// Relaxed string match (case-fold, whitespace-collapse) for the general
/// domain.
RewardResult verify_general(const std::string& response_text, const std::string& gold_answer,
                            double format_weight = -0.001);

struct EvalOutcome {
  bool ok = false;
  int64_t value = 0;
  uint64_t steps = 0;
  std::string diagnostic;
};

/// Interprets the expression language under the step/magnitude limits. The
/// interpreter has no host access of any kind; every failure mode folds
/// into ok=false with a diagnostic.
EvalOutcome eval_program(const std::string& source, const std::map<std::string, int64_t>& bindings,
                         const SandboxLimits& limits);

/// Runs every test case; accuracy 1 iff all match. Failures (parse error,
/// step limit, division by zero) surface as accuracy 0 plus a diagnostic.
RewardResult run_sandbox(const SandboxProgram& program);

/// 0 when response_text matches the registered span grammar
/// ("answer_tags" or "think_answer"), else the penalty weight. Unknown
/// grammars are a configuration error.
double check_format(const std::string& response_text, const std::string& pattern_spec,
                    double weight = -0.001);

struct RouteTable {
  std::map<std::string, std::string> routes;  // domain_tag -> reward cluster name
  std::map<std::string, double> ratios;       // domain_tag -> sampling ratio

  void validate() const;
};

/// Reward cluster for the sample's domain; unknown tags raise RoutingError.
const std::string& route(const RouteTable& table, const SampleRecord& sample);

enum class RewardKind { math_verify, sandbox, general_match };

RewardKind reward_kind_from_string(const std::string& name);

/// Stateless reward worker. "compute_reward" scores each sample of the
/// batch from its detokenized response and the task data in sample meta
/// ("gold", "tests"), writing scalar_reward, a terminal rewards vector and
/// meta entries (accuracy, reward components).
class RewardWorker : public Worker {
 public:
  RewardWorker(RewardKind kind, const Vocabulary& vocab, double format_weight, SandboxLimits limits);

  Message call(const std::string& method, const Message& input) override;

  /// Scoring for one sample; exposed so the worker and tests share it.
  RewardResult score(const SampleRecord& sample) const;

 private:
  RewardKind kind_;
  const Vocabulary& vocab_;
  double format_weight_;
  SandboxLimits limits_;
};

WorkerFactory reward_worker_factory(RewardKind kind, const Vocabulary& vocab, double format_weight,
                                    SandboxLimits limits = {});

/// Writes a RewardResult into the sample (scalar reward, terminal
/// per-token rewards, meta entries with exact round-trip formatting).
void attach_reward(SampleRecord& sample, const RewardResult& result);

/// Reads accuracy/scalar back from sample meta (set by attach_reward).
double sample_accuracy(const SampleRecord& sample);

}  // namespace rollmini
