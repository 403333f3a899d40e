// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace rollmini {

/// One prompt/response record. Per-token arrays, when present, align with
/// response_tokens. action_mask marks loss-participating positions: in
/// multi-turn trajectories environment-emitted tokens are in the sequence
/// but masked out; an empty mask means every response token participates.
struct SampleRecord {
  std::string sample_id;
  std::string group_id;
  std::string domain_tag;
  std::vector<int> prompt_tokens;
  std::vector<int> response_tokens;
  std::vector<double> response_logprobs;
  std::vector<double> ref_logprobs;
  std::vector<double> rewards;
  std::vector<double> advantages;
  std::vector<uint8_t> action_mask;
  std::optional<double> scalar_reward;
  bool done = false;
  std::map<std::string, std::string> meta;

  bool mask_at(size_t t) const { return action_mask.empty() || action_mask[t] != 0; }
  size_t masked_token_count() const;
};

/// Ordered collection of samples; the payload moved between stages.
struct SampleBatch {
  std::vector<SampleRecord> samples;

  size_t size() const { return samples.size(); }
  bool empty() const { return samples.empty(); }
  void push_back(SampleRecord rec) { samples.push_back(std::move(rec)); }

  /// Enforces the batch invariants: unique sample ids, per-token arrays
  /// aligned with response length. Throws InputError.
  void validate() const;

  std::string to_jsonl() const;
  static SampleBatch from_jsonl(const std::string& text);
};

/// Contiguous split of n items into parts chunks, sizes differing by at
/// most one, larger chunks first.
std::vector<size_t> split_sizes(size_t n, size_t parts);

std::vector<SampleBatch> split_batch(const SampleBatch& batch, size_t parts);
SampleBatch concat_batches(const std::vector<SampleBatch>& parts);

/// Re-partition a by-rank concatenation from one data-parallel width to
/// another, preserving total sample order.
std::vector<SampleBatch> reshard(const SampleBatch& batch, int from_partition, int to_partition);

}  // namespace rollmini
