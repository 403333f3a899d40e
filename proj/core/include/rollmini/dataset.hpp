// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <map>
#include <string>
#include <vector>

#include "rollmini/rng.hpp"

namespace rollmini {

/// One verifiable task: a prompt plus either a gold answer (math/general)
/// or sandbox test cases (code), serialized as JSON lines.
struct TaskRecord {
  std::string prompt;
  std::string domain_tag;
  std::string gold_answer;  // empty for code tasks
  std::string tests_json;   // empty for gold-answer tasks
};

std::vector<TaskRecord> load_task_jsonl(const std::string& path);
void write_task_jsonl(const std::string& path, const std::vector<TaskRecord>& records);

/// All 100 single-digit additions: "a+b=" -> a+b.
std::vector<TaskRecord> gen_addition_dataset();

/// Random two-operator integer expressions over a, b, c with test cases
/// computed from the expression tree itself.
std::vector<TaskRecord> gen_code_dataset(size_t count, uint64_t seed);

/// Copy-the-token tasks: "(X)=" -> X over digits and direction words.
std::vector<TaskRecord> gen_general_dataset();

/// Draws (domain, record) pairs with configured domain ratios; record
/// choice is uniform within the domain.
class DomainSampler {
 public:
  DomainSampler(std::map<std::string, std::vector<TaskRecord>> by_domain,
                std::map<std::string, double> ratios);

  const TaskRecord& draw(rng::Stream& stream) const;
  const std::map<std::string, double>& ratios() const { return ratios_; }

 private:
  std::map<std::string, std::vector<TaskRecord>> by_domain_;
  std::map<std::string, double> ratios_;
  std::vector<std::pair<std::string, double>> cdf_;  // fixed domain order
};

}  // namespace rollmini
