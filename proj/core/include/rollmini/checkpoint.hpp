// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "rollmini/policy.hpp"

namespace rollmini {

/// Everything needed to resume a run bit-exactly: the training replica's
/// parameters, named RNG stream states, and monotone scheduler counters.
/// Optimizer state is empty by design (plain gradient descent).
struct RunCheckpoint {
  uint64_t config_hash = 0;
  uint64_t step = 0;
  PolicyParams train_params;
  std::map<std::string, std::array<uint64_t, 4>> rng_states;
  std::map<std::string, uint64_t> counters;
};

/// Self-describing little-endian parameter blob:
///   magic "RMPB" | format u32 | V,E,K,H u32 | version u64 | count u64 |
///   count IEEE-754 doubles (bit patterns as u64 LE).
void append_params_blob(std::vector<uint8_t>& buf, const PolicyParams& params);
PolicyParams read_params_blob(const std::vector<uint8_t>& buf, size_t& offset);

/// Checkpoint file: magic "RMCK" | format u32 | config_hash u64 | step u64 |
/// params blob | rng streams | counters | crc32 u32 (zlib) over everything
/// before it. Corrupt or truncated files raise IntegrityError.
void save_checkpoint(const RunCheckpoint& ckpt, const std::string& path);
RunCheckpoint load_checkpoint(const std::string& path);

}  // namespace rollmini
