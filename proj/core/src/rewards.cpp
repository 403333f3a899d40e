// SPDX-License-Identifier: Apache-2.0
#include "rollmini/rewards.hpp"

#include <algorithm>
#include <cctype>
#include <cstdio>
#include <cstring>

#include <json.hpp>

#include "rollmini/errors.hpp"
#include "rollmini/vocab.hpp"

namespace rollmini {

using nlohmann::json;

void SandboxLimits::validate() const {
  if (max_steps == 0) throw ConfigError("sandbox limits: max_steps must be positive");
  if (max_output <= 0) throw ConfigError("sandbox limits: max_output must be positive");
}

std::optional<std::string> extract_answer_span(const std::string& text) {
  static const std::string open = "<answer>", close = "</answer>";
  const size_t a = text.find(open);
  if (a == std::string::npos) return std::nullopt;
  const size_t b = text.find(close, a + open.size());
  if (b == std::string::npos) return std::nullopt;
  return text.substr(a + open.size(), b - a - open.size());
}

namespace {

std::string trim(const std::string& s) {
  size_t b = 0, e = s.size();
  while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
  while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
  return s.substr(b, e - b);
}

// "+007" -> "7", "-0" -> "0"; non-numeric strings are returned trimmed.
std::string normalize_integer(const std::string& raw) {
  std::string s = trim(raw);
  if (s.empty()) return s;
  bool negative = false;
  size_t i = 0;
  if (s[0] == '+' || s[0] == '-') {
    negative = s[0] == '-';
    i = 1;
  }
  if (i >= s.size()) return s;
  for (size_t k = i; k < s.size(); ++k)
    if (!std::isdigit(static_cast<unsigned char>(s[k]))) return s;  // not an integer
  while (i + 1 < s.size() && s[i] == '0') ++i;
  std::string digits = s.substr(i);
  if (digits == "0") return "0";
  return negative ? "-" + digits : digits;
}

std::string normalize_numeric(const std::string& raw) {
  std::string s = trim(raw);
  const size_t slash = s.find('/');
  if (slash != std::string::npos && slash > 0 && slash + 1 < s.size()) {
    return normalize_integer(s.substr(0, slash)) + "/" + normalize_integer(s.substr(slash + 1));
  }
  return normalize_integer(s);
}

std::string fold_general(const std::string& raw) {
  std::string out;
  for (char c : raw) {
    if (std::isspace(static_cast<unsigned char>(c))) continue;
    out += static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  }
  return out;
}

RewardResult make_verify_result(bool has_span, bool correct, double format_weight) {
  RewardResult r;
  r.accuracy = correct ? 1.0 : 0.0;
  r.components["verify"] = r.accuracy;
  r.components["format"] = has_span ? 0.0 : format_weight;
  r.components["penalty"] = 0.0;
  r.scalar_reward = 0.0;
  for (const auto& [k, v] : r.components) r.scalar_reward += v;
  return r;
}

}  // namespace

RewardResult verify_math(const std::string& response_text, const std::string& gold_answer,
                         double format_weight) {
  auto span = extract_answer_span(response_text);
  bool correct = false;
  if (span) correct = normalize_numeric(*span) == normalize_numeric(gold_answer);
  return make_verify_result(span.has_value(), correct, format_weight);
}

RewardResult verify_general(const std::string& response_text, const std::string& gold_answer,
                            double format_weight) {
  auto span = extract_answer_span(response_text);
  bool correct = false;
  if (span) correct = fold_general(*span) == fold_general(gold_answer);
  return make_verify_result(span.has_value(), correct, format_weight);
}

// ---------------------------------------------------------------------------
// Expression-language interpreter.
//
// program := { ident '=' expr sep }* 'return' expr [sep]
// expr    := term  { ('+'|'-') term }
// term    := unary { ('*'|'/'|'%') unary }
// unary   := '-' unary | INT | ident | '(' expr ')'
//
// The lexer longest-matches "return", so token streams without whitespace
// ("returna+b") parse the same as spaced text.

namespace {

struct Token {
  enum Kind { kInt, kIdent, kReturn, kOp, kEnd } kind = kEnd;
  int64_t value = 0;
  char op = 0;
  std::string ident;
};

class Lexer {
 public:
  explicit Lexer(const std::string& src) : src_(src) {}

  Token next() {
    while (pos_ < src_.size() && std::isspace(static_cast<unsigned char>(src_[pos_]))) {
      if (src_[pos_] == '\n') {
        ++pos_;
        return Token{Token::kOp, 0, ';', {}};  // newline terminates a statement
      }
      ++pos_;
    }
    if (pos_ >= src_.size()) return Token{};
    const char c = src_[pos_];
    if (std::isdigit(static_cast<unsigned char>(c))) {
      int64_t v = 0;
      size_t start = pos_;
      while (pos_ < src_.size() && std::isdigit(static_cast<unsigned char>(src_[pos_]))) {
        if (pos_ - start > 18) throw Error("integer literal too long");
        v = v * 10 + (src_[pos_] - '0');
        ++pos_;
      }
      return Token{Token::kInt, v, 0, {}};
    }
    if (src_.compare(pos_, 6, "return") == 0) {
      pos_ += 6;
      return Token{Token::kReturn, 0, 0, {}};
    }
    if (std::isalpha(static_cast<unsigned char>(c))) {
      ++pos_;
      return Token{Token::kIdent, 0, 0, std::string(1, c)};
    }
    if (std::strchr("+-*/%()=;", c)) {
      ++pos_;
      return Token{Token::kOp, 0, c, {}};
    }
    throw Error(std::string("unexpected character '") + c + "'");
  }

 private:
  const std::string& src_;
  size_t pos_ = 0;
};

class Interpreter {
 public:
  Interpreter(const std::string& src, const std::map<std::string, int64_t>& bindings,
              const SandboxLimits& limits)
      : lexer_(src), env_(bindings), limits_(limits) {
    advance();
  }

  int64_t run() {
    for (;;) {
      while (cur_.kind == Token::kOp && cur_.op == ';') advance();
      if (cur_.kind == Token::kReturn) {
        advance();
        const int64_t v = expr();
        while (cur_.kind == Token::kOp && cur_.op == ';') advance();
        if (cur_.kind != Token::kEnd) throw Error("trailing tokens after return");
        return v;
      }
      if (cur_.kind == Token::kIdent) {
        const std::string name = cur_.ident;
        advance();
        expect_op('=');
        env_[name] = expr();
        if (cur_.kind == Token::kOp && cur_.op == ';') {
          advance();
          continue;
        }
        if (cur_.kind == Token::kEnd) throw Error("missing return statement");
        continue;
      }
      throw Error("expected assignment or return");
    }
  }

  uint64_t steps() const { return steps_; }

 private:
  void advance() { cur_ = lexer_.next(); }

  void expect_op(char op) {
    if (cur_.kind != Token::kOp || cur_.op != op)
      throw Error(std::string("expected '") + op + "'");
    advance();
  }

  void tick() {
    if (++steps_ > limits_.max_steps) throw Error("step limit exceeded");
  }

  int64_t check(long long v) const {
    if (v > limits_.max_output || v < -limits_.max_output) throw Error("output limit exceeded");
    return static_cast<int64_t>(v);
  }

  int64_t expr() {
    int64_t v = term();
    while (cur_.kind == Token::kOp && (cur_.op == '+' || cur_.op == '-')) {
      const char op = cur_.op;
      advance();
      const int64_t rhs = term();
      tick();
      __int128 wide = op == '+' ? static_cast<__int128>(v) + rhs : static_cast<__int128>(v) - rhs;
      if (wide > limits_.max_output || wide < -static_cast<__int128>(limits_.max_output))
        throw Error("output limit exceeded");
      v = static_cast<int64_t>(wide);
    }
    return v;
  }

  int64_t term() {
    int64_t v = unary();
    while (cur_.kind == Token::kOp && (cur_.op == '*' || cur_.op == '/' || cur_.op == '%')) {
      const char op = cur_.op;
      advance();
      const int64_t rhs = unary();
      tick();
      if (op == '*') {
        __int128 wide = static_cast<__int128>(v) * rhs;
        if (wide > limits_.max_output || wide < -static_cast<__int128>(limits_.max_output))
          throw Error("output limit exceeded");
        v = static_cast<int64_t>(wide);
      } else {
        if (rhs == 0) throw Error("division by zero");
        v = op == '/' ? v / rhs : v % rhs;
      }
    }
    return v;
  }

  int64_t unary() {
    tick();
    if (cur_.kind == Token::kOp && cur_.op == '-') {
      advance();
      return check(-static_cast<long long>(unary()));
    }
    if (cur_.kind == Token::kInt) {
      const int64_t v = check(cur_.value);
      advance();
      return v;
    }
    if (cur_.kind == Token::kIdent) {
      auto it = env_.find(cur_.ident);
      if (it == env_.end()) throw Error("undefined variable '" + cur_.ident + "'");
      advance();
      return it->second;
    }
    if (cur_.kind == Token::kOp && cur_.op == '(') {
      advance();
      const int64_t v = expr();
      expect_op(')');
      return v;
    }
    throw Error("expected value");
  }

  Lexer lexer_;
  Token cur_;
  std::map<std::string, int64_t> env_;
  const SandboxLimits& limits_;
  uint64_t steps_ = 0;
};

}  // namespace

EvalOutcome eval_program(const std::string& source, const std::map<std::string, int64_t>& bindings,
                         const SandboxLimits& limits) {
  limits.validate();
  EvalOutcome out;
  if (trim(source).empty()) {
    out.diagnostic = "empty program";
    return out;
  }
  try {
    Interpreter interp(source, bindings, limits);
    out.value = interp.run();
    out.steps = interp.steps();
    out.ok = true;
  } catch (const std::exception& e) {
    out.diagnostic = e.what();
  }
  return out;
}

RewardResult run_sandbox(const SandboxProgram& program) {
  RewardResult r;
  bool all_pass = !program.test_cases.empty();
  for (const auto& tc : program.test_cases) {
    EvalOutcome out = eval_program(program.source, tc.inputs, program.limits);
    if (!out.ok) {
      all_pass = false;
      r.diagnostic = out.diagnostic;
      break;
    }
    if (out.value != tc.expected) {
      all_pass = false;
      r.diagnostic = "wrong output: got " + std::to_string(out.value) + ", expected " +
                     std::to_string(tc.expected);
      break;
    }
  }
  if (program.test_cases.empty()) r.diagnostic = "no test cases";
  r.accuracy = all_pass ? 1.0 : 0.0;
  r.components["verify"] = r.accuracy;
  r.components["format"] = 0.0;
  r.components["penalty"] = 0.0;
  r.scalar_reward = 0.0;
  for (const auto& [k, v] : r.components) r.scalar_reward += v;
  return r;
}

double check_format(const std::string& response_text, const std::string& pattern_spec, double weight) {
  auto find_span = [&](const char* open, const char* close, size_t from,
                       size_t* end_out) -> bool {
    const size_t a = response_text.find(open, from);
    if (a == std::string::npos) return false;
    const size_t b = response_text.find(close, a + std::strlen(open));
    if (b == std::string::npos) return false;
    *end_out = b + std::strlen(close);
    return true;
  };
  size_t end = 0;
  if (pattern_spec == "answer_tags") {
    return find_span("<answer>", "</answer>", 0, &end) ? 0.0 : weight;
  }
  if (pattern_spec == "think_answer") {
    size_t think_end = 0;
    if (!find_span("<think>", "</think>", 0, &think_end)) return weight;
    return find_span("<answer>", "</answer>", think_end, &end) ? 0.0 : weight;
  }
  throw ConfigError("check_format: unknown pattern spec '" + pattern_spec + "'");
}

void RouteTable::validate() const {
  double total = 0.0;
  for (const auto& [domain, ratio] : ratios) {
    if (ratio < 0.0) throw ConfigError("route table: negative ratio for domain '" + domain + "'");
    if (!routes.count(domain)) throw ConfigError("route table: domain '" + domain + "' has a ratio but no route");
    total += ratio;
  }
  if (!ratios.empty() && std::abs(total - 1.0) > 1e-9)
    throw ConfigError("route table: ratios sum to " + std::to_string(total) + ", expected 1");
}

const std::string& route(const RouteTable& table, const SampleRecord& sample) {
  auto it = table.routes.find(sample.domain_tag);
  if (it == table.routes.end())
    throw RoutingError("route: no reward route for domain tag '" + sample.domain_tag + "'");
  return it->second;
}

RewardKind reward_kind_from_string(const std::string& name) {
  if (name == "math_verify") return RewardKind::math_verify;
  if (name == "sandbox") return RewardKind::sandbox;
  if (name == "general_match") return RewardKind::general_match;
  throw ConfigError("unknown reward kind '" + name + "'");
}

RewardWorker::RewardWorker(RewardKind kind, const Vocabulary& vocab, double format_weight,
                           SandboxLimits limits)
    : kind_(kind), vocab_(vocab), format_weight_(format_weight), limits_(limits) {}

RewardResult RewardWorker::score(const SampleRecord& sample) const {
  const std::string text = vocab_.detokenize(sample.response_tokens);
  RewardResult r;
  switch (kind_) {
    case RewardKind::math_verify: {
      auto it = sample.meta.find("gold");
      if (it == sample.meta.end()) throw InputError("reward: sample '" + sample.sample_id + "' lacks meta gold");
      r = verify_math(text, it->second, format_weight_);
      break;
    }
    case RewardKind::general_match: {
      auto it = sample.meta.find("gold");
      if (it == sample.meta.end()) throw InputError("reward: sample '" + sample.sample_id + "' lacks meta gold");
      r = verify_general(text, it->second, format_weight_);
      break;
    }
    case RewardKind::sandbox: {
      auto it = sample.meta.find("tests");
      if (it == sample.meta.end()) throw InputError("reward: sample '" + sample.sample_id + "' lacks meta tests");
      SandboxProgram prog;
      prog.limits = limits_;
      auto span = extract_answer_span(text);
      prog.source = span.value_or("");
      const json tests = json::parse(it->second);
      for (const auto& jc : tests) {
        SandboxCase tc;
        tc.expected = jc.at("expected").get<int64_t>();
        for (const auto& [name, value] : jc.at("inputs").items()) tc.inputs[name] = value.get<int64_t>();
        prog.test_cases.push_back(std::move(tc));
      }
      r = run_sandbox(prog);
      // The format component still applies to missing answer tags.
      r.components["format"] = span ? 0.0 : format_weight_;
      r.scalar_reward = 0.0;
      for (const auto& [k, v] : r.components) r.scalar_reward += v;
      break;
    }
  }
  r.sample_id = sample.sample_id;
  return r;
}

Message RewardWorker::call(const std::string& method, const Message& input) {
  if (method != "compute_reward") throw DispatchError("reward worker: unknown method '" + method + "'");
  Message out;
  out.batch = input.batch;
  for (auto& sample : out.batch.samples) {
    RewardResult r = score(sample);
    r.worker_id = "reward[" + std::to_string(rank) + "]@" + device_id;
    attach_reward(sample, r);
  }
  return out;
}

WorkerFactory reward_worker_factory(RewardKind kind, const Vocabulary& vocab, double format_weight,
                                    SandboxLimits limits) {
  return [kind, &vocab, format_weight, limits](int, int, const std::string&) {
    return std::make_unique<RewardWorker>(kind, vocab, format_weight, limits);
  };
}

namespace {

std::string fmt_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

}  // namespace

void attach_reward(SampleRecord& sample, const RewardResult& result) {
  sample.scalar_reward = result.scalar_reward;
  if (!sample.response_tokens.empty()) {
    sample.rewards.assign(sample.response_tokens.size(), 0.0);
    sample.rewards.back() = result.scalar_reward;
  }
  sample.meta["accuracy"] = fmt_double(result.accuracy);
  sample.meta["reward_worker"] = result.worker_id;
  json comps(result.components);
  sample.meta["reward_components"] = comps.dump();
  if (!result.diagnostic.empty()) sample.meta["reward_diagnostic"] = result.diagnostic;
}

double sample_accuracy(const SampleRecord& sample) {
  auto it = sample.meta.find("accuracy");
  if (it == sample.meta.end()) throw InputError("sample '" + sample.sample_id + "' has no accuracy meta");
  return std::stod(it->second);
}

}  // namespace rollmini
