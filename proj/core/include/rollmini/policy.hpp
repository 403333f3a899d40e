// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "rollmini/sample.hpp"
#include "rollmini/vocab.hpp"

namespace rollmini {

/// Parameter layout of the toy autoregressive policy: a K-token sliding
/// window of embeddings, one tanh hidden layer, a softmax token head and a
/// scalar value head. Segments in order: embed[V][E], w1[K*E][H], b1[H],
/// w2[H][V], b2[V], vw[H], vb.
struct PolicyLayout {
  int vocab_size = 0;      // V
  int embed_dim = 0;       // E
  int context_window = 0;  // K
  int hidden_dim = 0;      // H

  size_t input_dim() const { return static_cast<size_t>(context_window) * embed_dim; }
  size_t off_embed() const { return 0; }
  size_t off_w1() const { return off_embed() + static_cast<size_t>(vocab_size) * embed_dim; }
  size_t off_b1() const { return off_w1() + input_dim() * hidden_dim; }
  size_t off_w2() const { return off_b1() + hidden_dim; }
  size_t off_b2() const { return off_w2() + static_cast<size_t>(hidden_dim) * vocab_size; }
  size_t off_vw() const { return off_b2() + vocab_size; }
  size_t off_vb() const { return off_vw() + hidden_dim; }
  size_t param_count() const { return off_vb() + 1; }

  void validate() const;
  bool operator==(const PolicyLayout&) const = default;
};

/// Flat parameter vector plus layout and a version stamp. Values are
/// treated as immutable once published; training replaces them wholesale.
struct PolicyParams {
  PolicyLayout layout;
  uint64_t version = 0;
  std::vector<double> values;

  static PolicyParams init(const PolicyLayout& layout, uint64_t seed);
  void validate() const;
};

struct GenConfig {
  int max_new_tokens = 16;
  double temperature = 1.0;
  std::vector<int> stop_tokens;  // EOS always stops in addition to these
  uint64_t seed = 0;

  void validate() const;
};

struct TrainConfig {
  double clip_eps = 0.2;
  double kl_coef = 0.0;
  double learning_rate = 0.05;
  double advantage_clip = 10.0;
  double reward_clip = 20.0;
  double gamma = 1.0;
  bool whiten_advantages = false;

  void validate() const;
};

/// Token id used to left-pad context windows shorter than K. The standard
/// vocabulary places PAD at id 0; every forward path uses this constant so
/// sampling-time and teacher-forced scores agree exactly.
inline constexpr int kWindowPadToken = 0;

/// Reusable forward/backward buffers; one per worker.
struct PolicyWorkspace {
  std::vector<double> x, h, logits, logp, probs, dz, dh, dpre, dx;
  void resize(const PolicyLayout& layout);
};

/// Token-head forward pass for the next position after `context` (the last
/// K tokens are used, left-padded with PAD). Fills ws.logits and ws.logp.
void next_token_forward(const PolicyParams& params, std::span<const int> context, int pad_id,
                        PolicyWorkspace& ws);

/// Value-head estimate for the state `context`.
double value_forward(const PolicyParams& params, std::span<const int> context, int pad_id,
                     PolicyWorkspace& ws);

struct DecodeStep {
  int token = 0;
  double logprob = 0.0;  // log-prob under the untempered policy
};

/// One sampled decode step. The draw is a pure function of
/// (params.version, seed, sample_key, position), so stepwise decoding and
/// whole-response generation agree token for token.
DecodeStep decode_next(const PolicyParams& params, std::span<const int> context, double temperature,
                       uint64_t seed, uint64_t sample_key, size_t position, int pad_id,
                       PolicyWorkspace& ws);

/// Samples responses for every prompt in the batch. Each sample gains
/// response_tokens and response_logprobs; sample.done marks stop-token
/// termination. meta["params_version"] records the generating version.
SampleBatch generate(const PolicyParams& params, const SampleBatch& prompts, const GenConfig& config,
                     const Vocabulary& vocab);

/// Teacher-forced log-probs of every response token; no sampling, no
/// mutation.
std::vector<std::vector<double>> forward_logprobs(const PolicyParams& params, const SampleBatch& batch);

/// Value head applied at every response position (critic role).
std::vector<std::vector<double>> critic_forward(const PolicyParams& params, const SampleBatch& batch);

/// REINFORCE returns: rewards clipped to ±reward_clip, discounted
/// reward-to-go, optional batch whitening, then ±advantage_clip. Samples
/// without a rewards vector use scalar_reward on the final token; having
/// neither is an input error.
std::vector<std::vector<double>> compute_advantages(const SampleBatch& batch, const TrainConfig& config);

/// Per-rank gradient accumulator: token sums, merged by the controller.
struct GradAccum {
  std::vector<double> grad;  // d(sum of token losses)/d(params)
  double loss_sum = 0.0;
  double ratio_sum = 0.0;
  double kl_sum = 0.0;
  size_t clipped = 0;
  size_t tokens = 0;
};

struct UpdateStats {
  double loss = 0.0;
  double mean_ratio = 0.0;
  double clip_fraction = 0.0;
  double mean_kl = 0.0;
  size_t tokens = 0;
};

/// Clipped-surrogate PPO gradient over the batch's masked response tokens.
/// Uses batch advantages, response_logprobs as the sampling-time (old)
/// log-probs and ref_logprobs for the KL term when kl_coef > 0.
GradAccum ppo_gradient(const PolicyParams& params, const SampleBatch& batch, const TrainConfig& config);

/// Rank-ordered merge of gradient accumulators into a token-mean gradient.
/// Throws TrainingError on non-finite loss or gradient.
std::pair<std::vector<double>, UpdateStats> merge_gradients(const std::vector<GradAccum>& parts);

/// Applies one plain gradient-descent step and bumps the version.
void apply_update(PolicyParams& params, const std::vector<double>& grad_mean, double learning_rate);

/// Single-process convenience: shards the batch dp_world ways, reduces in
/// rank order, updates params. The cluster-backed path in policy_workers
/// produces identical results.
UpdateStats ppo_update(PolicyParams& params, const SampleBatch& batch, const TrainConfig& config,
                       int dp_world = 1);

/// Gradient of 0.5 * mean((value - target)^2) over masked positions, with
/// per-token targets taken from batch advantages (returns).
GradAccum value_gradient(const PolicyParams& params, const SampleBatch& batch);

/// Contiguous bucket sizes (each <= bucket_size) covering total elements.
std::vector<size_t> bucket_plan(size_t total, size_t bucket_size);

}  // namespace rollmini
