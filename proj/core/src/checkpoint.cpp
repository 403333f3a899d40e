// SPDX-License-Identifier: Apache-2.0
#include "rollmini/checkpoint.hpp"

#include <zlib.h>

#include <cstdio>
#include <cstring>
#include <fstream>

#include "rollmini/errors.hpp"

namespace rollmini {

namespace {

constexpr uint32_t kParamsMagic = 0x42504d52;  // "RMPB"
constexpr uint32_t kCkptMagic = 0x4b434d52;    // "RMCK"
constexpr uint32_t kFormat = 1;

void put_u32(std::vector<uint8_t>& buf, uint32_t v) {
  for (int i = 0; i < 4; ++i) buf.push_back(static_cast<uint8_t>(v >> (8 * i)));
}

void put_u64(std::vector<uint8_t>& buf, uint64_t v) {
  for (int i = 0; i < 8; ++i) buf.push_back(static_cast<uint8_t>(v >> (8 * i)));
}

void put_string(std::vector<uint8_t>& buf, const std::string& s) {
  put_u32(buf, static_cast<uint32_t>(s.size()));
  buf.insert(buf.end(), s.begin(), s.end());
}

uint32_t get_u32(const std::vector<uint8_t>& buf, size_t& off) {
  if (off + 4 > buf.size()) throw IntegrityError("checkpoint: truncated file");
  uint32_t v = 0;
  for (int i = 0; i < 4; ++i) v |= static_cast<uint32_t>(buf[off + i]) << (8 * i);
  off += 4;
  return v;
}

uint64_t get_u64(const std::vector<uint8_t>& buf, size_t& off) {
  if (off + 8 > buf.size()) throw IntegrityError("checkpoint: truncated file");
  uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= static_cast<uint64_t>(buf[off + i]) << (8 * i);
  off += 8;
  return v;
}

std::string get_string(const std::vector<uint8_t>& buf, size_t& off) {
  const uint32_t len = get_u32(buf, off);
  if (off + len > buf.size()) throw IntegrityError("checkpoint: truncated string");
  std::string s(buf.begin() + static_cast<long>(off), buf.begin() + static_cast<long>(off + len));
  off += len;
  return s;
}

uint64_t double_bits(double d) {
  uint64_t bits;
  std::memcpy(&bits, &d, sizeof(bits));
  return bits;
}

double bits_double(uint64_t bits) {
  double d;
  std::memcpy(&d, &bits, sizeof(d));
  return d;
}

}  // namespace

void append_params_blob(std::vector<uint8_t>& buf, const PolicyParams& params) {
  params.validate();
  put_u32(buf, kParamsMagic);
  put_u32(buf, kFormat);
  put_u32(buf, static_cast<uint32_t>(params.layout.vocab_size));
  put_u32(buf, static_cast<uint32_t>(params.layout.embed_dim));
  put_u32(buf, static_cast<uint32_t>(params.layout.context_window));
  put_u32(buf, static_cast<uint32_t>(params.layout.hidden_dim));
  put_u64(buf, params.version);
  put_u64(buf, params.values.size());
  for (double v : params.values) put_u64(buf, double_bits(v));
}

PolicyParams read_params_blob(const std::vector<uint8_t>& buf, size_t& offset) {
  if (get_u32(buf, offset) != kParamsMagic) throw IntegrityError("params blob: bad magic");
  if (get_u32(buf, offset) != kFormat) throw IntegrityError("params blob: unsupported format");
  PolicyParams p;
  p.layout.vocab_size = static_cast<int>(get_u32(buf, offset));
  p.layout.embed_dim = static_cast<int>(get_u32(buf, offset));
  p.layout.context_window = static_cast<int>(get_u32(buf, offset));
  p.layout.hidden_dim = static_cast<int>(get_u32(buf, offset));
  p.version = get_u64(buf, offset);
  const uint64_t count = get_u64(buf, offset);
  if (count != p.layout.param_count()) throw IntegrityError("params blob: count does not match layout");
  p.values.reserve(count);
  for (uint64_t i = 0; i < count; ++i) p.values.push_back(bits_double(get_u64(buf, offset)));
  p.validate();
  return p;
}

void save_checkpoint(const RunCheckpoint& ckpt, const std::string& path) {
  std::vector<uint8_t> buf;
  put_u32(buf, kCkptMagic);
  put_u32(buf, kFormat);
  put_u64(buf, ckpt.config_hash);
  put_u64(buf, ckpt.step);
  append_params_blob(buf, ckpt.train_params);
  put_u32(buf, static_cast<uint32_t>(ckpt.rng_states.size()));
  for (const auto& [name, state] : ckpt.rng_states) {
    put_string(buf, name);
    for (uint64_t word : state) put_u64(buf, word);
  }
  put_u32(buf, static_cast<uint32_t>(ckpt.counters.size()));
  for (const auto& [name, value] : ckpt.counters) {
    put_string(buf, name);
    put_u64(buf, value);
  }
  const uint32_t crc =
      static_cast<uint32_t>(crc32(0L, reinterpret_cast<const Bytef*>(buf.data()), static_cast<uInt>(buf.size())));
  put_u32(buf, crc);

  const std::string tmp = path + ".tmp";
  {
    std::ofstream os(tmp, std::ios::binary | std::ios::trunc);
    if (!os) throw ConfigError("checkpoint: cannot write '" + tmp + "'");
    os.write(reinterpret_cast<const char*>(buf.data()), static_cast<long>(buf.size()));
    if (!os) throw ConfigError("checkpoint: short write to '" + tmp + "'");
  }
  if (std::rename(tmp.c_str(), path.c_str()) != 0)
    throw ConfigError("checkpoint: cannot rename '" + tmp + "' to '" + path + "'");
}

RunCheckpoint load_checkpoint(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw ConfigError("checkpoint: cannot open '" + path + "'");
  std::vector<uint8_t> buf((std::istreambuf_iterator<char>(is)), std::istreambuf_iterator<char>());
  if (buf.size() < 4) throw IntegrityError("checkpoint: truncated file");

  const size_t body = buf.size() - 4;
  size_t tail = body;
  std::vector<uint8_t> whole = buf;
  const uint32_t stored_crc = get_u32(whole, tail);
  const uint32_t crc =
      static_cast<uint32_t>(crc32(0L, reinterpret_cast<const Bytef*>(buf.data()), static_cast<uInt>(body)));
  if (crc != stored_crc) throw IntegrityError("checkpoint: checksum mismatch (corrupt or truncated file)");

  size_t off = 0;
  if (get_u32(buf, off) != kCkptMagic) throw IntegrityError("checkpoint: bad magic");
  if (get_u32(buf, off) != kFormat) throw IntegrityError("checkpoint: unsupported format");
  RunCheckpoint ckpt;
  ckpt.config_hash = get_u64(buf, off);
  ckpt.step = get_u64(buf, off);
  ckpt.train_params = read_params_blob(buf, off);
  const uint32_t rng_count = get_u32(buf, off);
  for (uint32_t i = 0; i < rng_count; ++i) {
    std::string name = get_string(buf, off);
    std::array<uint64_t, 4> state{};
    for (auto& word : state) word = get_u64(buf, off);
    ckpt.rng_states[name] = state;
  }
  const uint32_t counter_count = get_u32(buf, off);
  for (uint32_t i = 0; i < counter_count; ++i) {
    std::string name = get_string(buf, off);
    ckpt.counters[name] = get_u64(buf, off);
  }
  return ckpt;
}

}  // namespace rollmini
