// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace rollmini {

/// Token table shared by every model role. Tokens are whole strings: word
/// tokens ("Up", "return"), tag tokens ("<answer>"), and single symbols.
/// Text is tokenized by greedy longest match; plain spaces separate tokens
/// and are not tokens themselves.
class Vocabulary {
 public:
  static constexpr const char* kPad = "PAD";
  static constexpr const char* kBos = "BOS";
  static constexpr const char* kEos = "EOS";

  /// The built-in token set used by all shipped tasks and environments.
  static const Vocabulary& standard();

  explicit Vocabulary(std::vector<std::string> tokens);

  int size() const { return static_cast<int>(tokens_.size()); }
  const std::string& token(int id) const;
  int id(std::string_view token) const;          // throws InputError if absent
  bool contains(std::string_view token) const;

  int pad_id() const { return pad_id_; }
  int bos_id() const { return bos_id_; }
  int eos_id() const { return eos_id_; }

  /// Greedy longest-match tokenization. Spaces are separators; '\n' is a
  /// token. Throws InputError on text not covered by the token set.
  std::vector<int> tokenize(std::string_view text) const;

  /// Concatenation of token strings (no separators inserted).
  std::string detokenize(std::span<const int> ids) const;

 private:
  std::vector<std::string> tokens_;
  std::unordered_map<std::string_view, int> index_;
  size_t max_token_len_ = 0;
  int pad_id_ = -1, bos_id_ = -1, eos_id_ = -1;
};

}  // namespace rollmini
