// SPDX-License-Identifier: Apache-2.0
#include "rollmini/vocab.hpp"

#include <algorithm>

#include "rollmini/errors.hpp"

namespace rollmini {

namespace {

std::vector<std::string> standard_tokens() {
  std::vector<std::string> t;
  // Reserved.
  t.insert(t.end(), {"PAD", "BOS", "EOS", "\n"});
  // Agent actions.
  t.insert(t.end(), {"Up", "Down", "Left", "Right"});
  // Digits.
  for (int d = 0; d <= 9; ++d) t.push_back(std::to_string(d));
  // Expression language.
  t.insert(t.end(), {"+", "-", "*", "/", "%", "=", "(", ")", ";", "a", "b", "c", "return"});
  // Structured-output tags and turn delimiters.
  t.insert(t.end(), {"<answer>", "</answer>", "<think>", "</think>", "<obs>", "</obs>"});
  // Grid symbols, standard profile (walls, floor, target, box, player,
  // box-on-target, player-on-target, goal).
  t.insert(t.end(), {"#", "_", "O", "X", "P", "\xE2\x88\x9A", "S", "G"});
  // Grid symbols, alternate profile (disjoint set).
  t.insert(t.end(), {"W", ".", "T", "B", "A", "V", "Q"});
  return t;
}

}  // namespace

const Vocabulary& Vocabulary::standard() {
  static const Vocabulary vocab(standard_tokens());
  return vocab;
}

Vocabulary::Vocabulary(std::vector<std::string> tokens) : tokens_(std::move(tokens)) {
  index_.reserve(tokens_.size());
  for (size_t i = 0; i < tokens_.size(); ++i) {
    const std::string& tok = tokens_[i];
    if (tok.empty()) throw ConfigError("vocabulary: empty token at index " + std::to_string(i));
    auto [it, inserted] = index_.emplace(tok, static_cast<int>(i));
    if (!inserted) throw ConfigError("vocabulary: duplicate token '" + tok + "'");
    max_token_len_ = std::max(max_token_len_, tok.size());
  }
  auto find = [&](const char* tok) {
    auto it = index_.find(tok);
    return it == index_.end() ? -1 : it->second;
  };
  pad_id_ = find(kPad);
  bos_id_ = find(kBos);
  eos_id_ = find(kEos);
  if (pad_id_ < 0 || bos_id_ < 0 || eos_id_ < 0)
    throw ConfigError("vocabulary: reserved tokens PAD/BOS/EOS must be present");
}

const std::string& Vocabulary::token(int id) const {
  if (id < 0 || id >= size()) throw InputError("vocabulary: token id out of range: " + std::to_string(id));
  return tokens_[static_cast<size_t>(id)];
}

int Vocabulary::id(std::string_view token) const {
  auto it = index_.find(token);
  if (it == index_.end()) throw InputError("vocabulary: unknown token '" + std::string(token) + "'");
  return it->second;
}

bool Vocabulary::contains(std::string_view token) const { return index_.count(token) > 0; }

std::vector<int> Vocabulary::tokenize(std::string_view text) const {
  std::vector<int> out;
  size_t pos = 0;
  while (pos < text.size()) {
    if (text[pos] == ' ' || text[pos] == '\t' || text[pos] == '\r') {
      ++pos;
      continue;
    }
    const size_t longest = std::min(max_token_len_, text.size() - pos);
    int match = -1;
    size_t match_len = 0;
    for (size_t len = longest; len >= 1; --len) {
      auto it = index_.find(text.substr(pos, len));
      if (it != index_.end()) {
        match = it->second;
        match_len = len;
        break;
      }
    }
    if (match < 0)
      throw InputError("vocabulary: cannot tokenize text at '" +
                       std::string(text.substr(pos, std::min<size_t>(12, text.size() - pos))) + "'");
    out.push_back(match);
    pos += match_len;
  }
  return out;
}

std::string Vocabulary::detokenize(std::span<const int> ids) const {
  std::string out;
  for (int id : ids) out += token(id);
  return out;
}

}  // namespace rollmini
