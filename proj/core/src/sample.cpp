// SPDX-License-Identifier: Apache-2.0
#include "rollmini/sample.hpp"

#include <set>
#include <sstream>

#include <json.hpp>

#include "rollmini/errors.hpp"

namespace rollmini {

using nlohmann::json;

size_t SampleRecord::masked_token_count() const {
  if (action_mask.empty()) return response_tokens.size();
  size_t n = 0;
  for (uint8_t m : action_mask)
    if (m) ++n;
  return n;
}

void SampleBatch::validate() const {
  std::set<std::string> ids;
  for (const auto& s : samples) {
    if (!ids.insert(s.sample_id).second)
      throw InputError("sample batch: duplicate sample_id '" + s.sample_id + "'");
    const size_t n = s.response_tokens.size();
    auto check = [&](size_t len, const char* name) {
      if (len != 0 && len != n)
        throw InputError("sample '" + s.sample_id + "': " + name + " length " + std::to_string(len) +
                         " != response length " + std::to_string(n));
    };
    check(s.response_logprobs.size(), "response_logprobs");
    check(s.ref_logprobs.size(), "ref_logprobs");
    check(s.rewards.size(), "rewards");
    check(s.advantages.size(), "advantages");
    check(s.action_mask.size(), "action_mask");
  }
}

namespace {

json record_to_json(const SampleRecord& s) {
  json j;
  j["sample_id"] = s.sample_id;
  j["group_id"] = s.group_id;
  j["domain_tag"] = s.domain_tag;
  j["prompt_tokens"] = s.prompt_tokens;
  j["response_tokens"] = s.response_tokens;
  if (!s.response_logprobs.empty()) j["response_logprobs"] = s.response_logprobs;
  if (!s.ref_logprobs.empty()) j["ref_logprobs"] = s.ref_logprobs;
  if (!s.rewards.empty()) j["rewards"] = s.rewards;
  if (!s.advantages.empty()) j["advantages"] = s.advantages;
  if (!s.action_mask.empty()) j["action_mask"] = s.action_mask;
  if (s.scalar_reward) j["scalar_reward"] = *s.scalar_reward;
  j["done"] = s.done;
  if (!s.meta.empty()) j["meta"] = s.meta;
  return j;
}

SampleRecord record_from_json(const json& j) {
  SampleRecord s;
  s.sample_id = j.value("sample_id", "");
  s.group_id = j.value("group_id", "");
  s.domain_tag = j.value("domain_tag", "");
  s.prompt_tokens = j.value("prompt_tokens", std::vector<int>{});
  s.response_tokens = j.value("response_tokens", std::vector<int>{});
  s.response_logprobs = j.value("response_logprobs", std::vector<double>{});
  s.ref_logprobs = j.value("ref_logprobs", std::vector<double>{});
  s.rewards = j.value("rewards", std::vector<double>{});
  s.advantages = j.value("advantages", std::vector<double>{});
  s.action_mask = j.value("action_mask", std::vector<uint8_t>{});
  if (j.contains("scalar_reward")) s.scalar_reward = j["scalar_reward"].get<double>();
  s.done = j.value("done", false);
  if (j.contains("meta")) s.meta = j["meta"].get<std::map<std::string, std::string>>();
  return s;
}

}  // namespace

std::string SampleBatch::to_jsonl() const {
  std::ostringstream os;
  for (const auto& s : samples) os << record_to_json(s).dump() << '\n';
  return os.str();
}

SampleBatch SampleBatch::from_jsonl(const std::string& text) {
  SampleBatch batch;
  std::istringstream is(text);
  std::string line;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    batch.push_back(record_from_json(json::parse(line)));
  }
  return batch;
}

std::vector<size_t> split_sizes(size_t n, size_t parts) {
  if (parts == 0) throw ConfigError("split: partition count must be positive");
  std::vector<size_t> sizes(parts, n / parts);
  const size_t remainder = n % parts;
  for (size_t i = 0; i < remainder; ++i) ++sizes[i];
  return sizes;
}

std::vector<SampleBatch> split_batch(const SampleBatch& batch, size_t parts) {
  const auto sizes = split_sizes(batch.size(), parts);
  std::vector<SampleBatch> out(parts);
  size_t offset = 0;
  for (size_t p = 0; p < parts; ++p) {
    out[p].samples.assign(batch.samples.begin() + offset, batch.samples.begin() + offset + sizes[p]);
    offset += sizes[p];
  }
  return out;
}

SampleBatch concat_batches(const std::vector<SampleBatch>& parts) {
  SampleBatch out;
  for (const auto& part : parts)
    out.samples.insert(out.samples.end(), part.samples.begin(), part.samples.end());
  return out;
}

std::vector<SampleBatch> reshard(const SampleBatch& batch, int from_partition, int to_partition) {
  if (from_partition <= 0) throw ConfigError("reshard: from_partition must be positive");
  if (to_partition <= 0) throw ConfigError("reshard: to_partition must be positive");
  return split_batch(batch, static_cast<size_t>(to_partition));
}

}  // namespace rollmini
