// SPDX-License-Identifier: Apache-2.0
#include "rollmini/policy.hpp"

#include <algorithm>
#include <cmath>

#include "rollmini/errors.hpp"
#include "rollmini/rng.hpp"

namespace rollmini {

void PolicyLayout::validate() const {
  if (vocab_size <= 0 || embed_dim <= 0 || context_window <= 0 || hidden_dim <= 0)
    throw ConfigError("policy layout: all dims (V,E,K,H) must be positive");
}

void PolicyParams::validate() const {
  layout.validate();
  if (values.size() != layout.param_count())
    throw ConfigError("policy params: value count " + std::to_string(values.size()) +
                      " != layout-implied " + std::to_string(layout.param_count()));
}

void GenConfig::validate() const {
  if (max_new_tokens < 1) throw ConfigError("gen config: max_new_tokens must be >= 1");
  if (!(temperature > 0.0)) throw ConfigError("gen config: temperature must be positive");
}

void TrainConfig::validate() const {
  if (!(clip_eps > 0.0 && clip_eps < 1.0)) throw ConfigError("train config: clip_eps must be in (0,1)");
  if (kl_coef < 0.0) throw ConfigError("train config: kl_coef must be non-negative");
  // learning_rate 0 is the no-update identity used by diagnostics.
  if (learning_rate < 0.0) throw ConfigError("train config: learning_rate must be non-negative");
  if (!(advantage_clip > 0.0)) throw ConfigError("train config: advantage_clip must be positive");
  if (!(reward_clip > 0.0)) throw ConfigError("train config: reward_clip must be positive");
  if (!(gamma > 0.0 && gamma <= 1.0)) throw ConfigError("train config: gamma must be in (0,1]");
}

PolicyParams PolicyParams::init(const PolicyLayout& layout, uint64_t seed) {
  layout.validate();
  PolicyParams p;
  p.layout = layout;
  p.version = 1;
  p.values.assign(layout.param_count(), 0.0);
  rng::Stream stream(rng::mix({seed, 0x706f6c69ULL}));
  const double embed_scale = 0.1;
  const double w1_scale = 1.0 / std::sqrt(static_cast<double>(layout.input_dim()));
  const double w2_scale = 1.0 / std::sqrt(static_cast<double>(layout.hidden_dim));
  for (size_t i = layout.off_embed(); i < layout.off_w1(); ++i) p.values[i] = embed_scale * stream.next_gaussian();
  for (size_t i = layout.off_w1(); i < layout.off_b1(); ++i) p.values[i] = w1_scale * stream.next_gaussian();
  for (size_t i = layout.off_w2(); i < layout.off_b2(); ++i) p.values[i] = w2_scale * stream.next_gaussian();
  for (size_t i = layout.off_vw(); i < layout.off_vb(); ++i) p.values[i] = w2_scale * stream.next_gaussian();
  // b1, b2, vb stay zero.
  return p;
}

void PolicyWorkspace::resize(const PolicyLayout& layout) {
  x.assign(layout.input_dim(), 0.0);
  h.assign(static_cast<size_t>(layout.hidden_dim), 0.0);
  logits.assign(static_cast<size_t>(layout.vocab_size), 0.0);
  logp.assign(static_cast<size_t>(layout.vocab_size), 0.0);
  probs.assign(static_cast<size_t>(layout.vocab_size), 0.0);
  dz.assign(static_cast<size_t>(layout.vocab_size), 0.0);
  dh.assign(static_cast<size_t>(layout.hidden_dim), 0.0);
  dpre.assign(static_cast<size_t>(layout.hidden_dim), 0.0);
  dx.assign(layout.input_dim(), 0.0);
}

namespace {

// Gathers the K-token window ending at the prediction position into ws.x
// and runs the shared trunk (tanh hidden layer). Returns the window token
// ids for backprop.
void trunk_forward(const PolicyParams& params, std::span<const int> context, int pad_id,
                   PolicyWorkspace& ws, std::vector<int>* window_out) {
  const PolicyLayout& L = params.layout;
  const int K = L.context_window, E = L.embed_dim, H = L.hidden_dim, V = L.vocab_size;
  if (ws.x.size() != L.input_dim()) ws.resize(L);

  const double* embed = params.values.data() + L.off_embed();
  for (int i = 0; i < K; ++i) {
    const long from_end = static_cast<long>(K) - i;  // window slot i holds context[len - (K-i)]
    const long idx = static_cast<long>(context.size()) - from_end;
    int tok = idx >= 0 ? context[static_cast<size_t>(idx)] : pad_id;
    if (tok < 0 || tok >= V) throw InputError("policy: token id out of range: " + std::to_string(tok));
    if (window_out) (*window_out)[static_cast<size_t>(i)] = tok;
    const double* row = embed + static_cast<size_t>(tok) * E;
    double* xi = ws.x.data() + static_cast<size_t>(i) * E;
    for (int e = 0; e < E; ++e) xi[e] = row[e];
  }

  const double* w1 = params.values.data() + L.off_w1();
  const double* b1 = params.values.data() + L.off_b1();
  const size_t in_dim = L.input_dim();
  for (int j = 0; j < H; ++j) ws.h[static_cast<size_t>(j)] = b1[j];
  for (size_t i = 0; i < in_dim; ++i) {
    const double xi = ws.x[i];
    if (xi == 0.0) continue;
    const double* row = w1 + i * H;
    for (int j = 0; j < H; ++j) ws.h[static_cast<size_t>(j)] += xi * row[j];
  }
  for (int j = 0; j < H; ++j) ws.h[static_cast<size_t>(j)] = std::tanh(ws.h[static_cast<size_t>(j)]);
}

void head_forward(const PolicyParams& params, PolicyWorkspace& ws) {
  const PolicyLayout& L = params.layout;
  const int H = L.hidden_dim, V = L.vocab_size;
  const double* w2 = params.values.data() + L.off_w2();
  const double* b2 = params.values.data() + L.off_b2();
  for (int v = 0; v < V; ++v) ws.logits[static_cast<size_t>(v)] = b2[v];
  for (int j = 0; j < H; ++j) {
    const double hj = ws.h[static_cast<size_t>(j)];
    const double* row = w2 + static_cast<size_t>(j) * V;
    for (int v = 0; v < V; ++v) ws.logits[static_cast<size_t>(v)] += hj * row[v];
  }
  // log-softmax with max subtraction; summation in fixed index order.
  double m = ws.logits[0];
  for (int v = 1; v < V; ++v) m = std::max(m, ws.logits[static_cast<size_t>(v)]);
  double lse = 0.0;
  for (int v = 0; v < V; ++v) lse += std::exp(ws.logits[static_cast<size_t>(v)] - m);
  lse = m + std::log(lse);
  for (int v = 0; v < V; ++v) ws.logp[static_cast<size_t>(v)] = ws.logits[static_cast<size_t>(v)] - lse;
}

}  // namespace

void next_token_forward(const PolicyParams& params, std::span<const int> context, int pad_id,
                        PolicyWorkspace& ws) {
  trunk_forward(params, context, pad_id, ws, nullptr);
  head_forward(params, ws);
}

double value_forward(const PolicyParams& params, std::span<const int> context, int pad_id,
                     PolicyWorkspace& ws) {
  trunk_forward(params, context, pad_id, ws, nullptr);
  const PolicyLayout& L = params.layout;
  const double* vw = params.values.data() + L.off_vw();
  double v = params.values[L.off_vb()];
  for (int j = 0; j < L.hidden_dim; ++j) v += vw[j] * ws.h[static_cast<size_t>(j)];
  return v;
}

DecodeStep decode_next(const PolicyParams& params, std::span<const int> context, double temperature,
                       uint64_t seed, uint64_t sample_key, size_t position, int pad_id,
                       PolicyWorkspace& ws) {
  if (!(temperature > 0.0)) throw ConfigError("decode: temperature must be positive");
  next_token_forward(params, context, pad_id, ws);
  const int V = params.layout.vocab_size;

  // Tempered categorical draw via CDF walk in token-id order.
  double m = ws.logits[0];
  for (int v = 1; v < V; ++v) m = std::max(m, ws.logits[static_cast<size_t>(v)]);
  double total = 0.0;
  for (int v = 0; v < V; ++v) {
    ws.probs[static_cast<size_t>(v)] = std::exp((ws.logits[static_cast<size_t>(v)] - m) / temperature);
    total += ws.probs[static_cast<size_t>(v)];
  }
  const double u = rng::keyed_double({seed, params.version, sample_key, static_cast<uint64_t>(position)});
  double acc = 0.0;
  int chosen = V - 1;
  for (int v = 0; v < V; ++v) {
    acc += ws.probs[static_cast<size_t>(v)] / total;
    if (u < acc) {
      chosen = v;
      break;
    }
  }
  return DecodeStep{chosen, ws.logp[static_cast<size_t>(chosen)]};
}

SampleBatch generate(const PolicyParams& params, const SampleBatch& prompts, const GenConfig& config,
                     const Vocabulary& vocab) {
  params.validate();
  config.validate();
  SampleBatch out = prompts;
  PolicyWorkspace ws;
  ws.resize(params.layout);

  std::vector<int> stops = config.stop_tokens;
  stops.push_back(vocab.eos_id());

  for (auto& sample : out.samples) {
    if (sample.prompt_tokens.empty())
      throw InputError("generate: sample '" + sample.sample_id + "' has empty prompt");
    for (int tok : sample.prompt_tokens)
      if (tok < 0 || tok >= params.layout.vocab_size)
        throw InputError("generate: sample '" + sample.sample_id + "' has out-of-vocabulary token " +
                         std::to_string(tok));
    sample.response_tokens.clear();
    sample.response_logprobs.clear();
    sample.done = false;
    const uint64_t sample_key = rng::hash_str(sample.sample_id);
    std::vector<int> ctx = sample.prompt_tokens;
    for (int step = 0; step < config.max_new_tokens; ++step) {
      DecodeStep ds = decode_next(params, ctx, config.temperature, config.seed, sample_key,
                                  static_cast<size_t>(step), kWindowPadToken, ws);
      sample.response_tokens.push_back(ds.token);
      sample.response_logprobs.push_back(ds.logprob);
      ctx.push_back(ds.token);
      if (std::find(stops.begin(), stops.end(), ds.token) != stops.end()) {
        sample.done = true;
        break;
      }
    }
    sample.meta["params_version"] = std::to_string(params.version);
  }
  return out;
}

std::vector<std::vector<double>> forward_logprobs(const PolicyParams& params, const SampleBatch& batch) {
  params.validate();
  batch.validate();
  PolicyWorkspace ws;
  ws.resize(params.layout);
  const int pad = kWindowPadToken;

  std::vector<std::vector<double>> out;
  out.reserve(batch.size());
  for (const auto& sample : batch.samples) {
    std::vector<double> lps;
    lps.reserve(sample.response_tokens.size());
    std::vector<int> ctx = sample.prompt_tokens;
    for (int tok : sample.response_tokens) {
      if (tok < 0 || tok >= params.layout.vocab_size)
        throw InputError("forward_logprobs: out-of-vocabulary token " + std::to_string(tok));
      next_token_forward(params, ctx, pad, ws);
      lps.push_back(ws.logp[static_cast<size_t>(tok)]);
      ctx.push_back(tok);
    }
    out.push_back(std::move(lps));
  }
  return out;
}

std::vector<std::vector<double>> critic_forward(const PolicyParams& params, const SampleBatch& batch) {
  params.validate();
  batch.validate();
  PolicyWorkspace ws;
  ws.resize(params.layout);
  const int pad = kWindowPadToken;

  std::vector<std::vector<double>> out;
  out.reserve(batch.size());
  for (const auto& sample : batch.samples) {
    std::vector<double> values;
    values.reserve(sample.response_tokens.size());
    std::vector<int> ctx = sample.prompt_tokens;
    for (int tok : sample.response_tokens) {
      values.push_back(value_forward(params, ctx, pad, ws));
      ctx.push_back(tok);
    }
    out.push_back(std::move(values));
  }
  return out;
}

std::vector<std::vector<double>> compute_advantages(const SampleBatch& batch, const TrainConfig& config) {
  config.validate();
  batch.validate();
  std::vector<std::vector<double>> advs;
  advs.reserve(batch.size());

  for (const auto& sample : batch.samples) {
    const size_t n = sample.response_tokens.size();
    std::vector<double> rewards;
    if (!sample.rewards.empty()) {
      rewards = sample.rewards;
    } else if (sample.scalar_reward && n > 0) {
      rewards.assign(n, 0.0);
      rewards.back() = *sample.scalar_reward;
    } else if (n == 0) {
      advs.emplace_back();
      continue;
    } else {
      throw InputError("compute_advantages: sample '" + sample.sample_id + "' has no rewards");
    }
    for (double& r : rewards) r = std::clamp(r, -config.reward_clip, config.reward_clip);
    std::vector<double> g(n, 0.0);
    double acc = 0.0;
    for (size_t t = n; t-- > 0;) {
      acc = rewards[t] + config.gamma * acc;
      g[t] = acc;
    }
    advs.push_back(std::move(g));
  }

  if (config.whiten_advantages) {
    double sum = 0.0, sq = 0.0;
    size_t count = 0;
    for (size_t s = 0; s < batch.size(); ++s) {
      const auto& sample = batch.samples[s];
      for (size_t t = 0; t < advs[s].size(); ++t) {
        if (!sample.mask_at(t)) continue;
        sum += advs[s][t];
        sq += advs[s][t] * advs[s][t];
        ++count;
      }
    }
    if (count > 0) {
      const double mean = sum / static_cast<double>(count);
      const double var = std::max(0.0, sq / static_cast<double>(count) - mean * mean);
      const double inv = 1.0 / (std::sqrt(var) + 1e-8);
      for (auto& g : advs)
        for (double& a : g) a = (a - mean) * inv;
    }
  }

  for (auto& g : advs)
    for (double& a : g) a = std::clamp(a, -config.advantage_clip, config.advantage_clip);
  return advs;
}

GradAccum ppo_gradient(const PolicyParams& params, const SampleBatch& batch, const TrainConfig& config) {
  params.validate();
  config.validate();
  batch.validate();
  const PolicyLayout& L = params.layout;
  const int K = L.context_window, E = L.embed_dim, H = L.hidden_dim, V = L.vocab_size;
  const int pad = kWindowPadToken;

  GradAccum acc;
  acc.grad.assign(L.param_count(), 0.0);
  PolicyWorkspace ws;
  ws.resize(L);
  std::vector<int> window(static_cast<size_t>(K));

  double* g_embed = acc.grad.data() + L.off_embed();
  double* g_w1 = acc.grad.data() + L.off_w1();
  double* g_b1 = acc.grad.data() + L.off_b1();
  double* g_w2 = acc.grad.data() + L.off_w2();
  double* g_b2 = acc.grad.data() + L.off_b2();
  const double* w1 = params.values.data() + L.off_w1();
  const double* w2 = params.values.data() + L.off_w2();

  for (const auto& sample : batch.samples) {
    const size_t n = sample.response_tokens.size();
    if (n == 0) continue;
    if (sample.advantages.size() != n)
      throw InputError("ppo_gradient: sample '" + sample.sample_id + "' missing advantages");
    if (sample.response_logprobs.size() != n)
      throw InputError("ppo_gradient: sample '" + sample.sample_id + "' missing old logprobs");
    if (config.kl_coef > 0.0 && sample.ref_logprobs.size() != n)
      throw InputError("ppo_gradient: sample '" + sample.sample_id + "' missing ref logprobs");

    std::vector<int> ctx = sample.prompt_tokens;
    for (size_t t = 0; t < n; ++t) {
      const int a = sample.response_tokens[t];
      if (!sample.mask_at(t)) {
        ctx.push_back(a);
        continue;
      }
      trunk_forward(params, ctx, pad, ws, &window);
      head_forward(params, ws);

      const double lp = ws.logp[static_cast<size_t>(a)];
      const double old_lp = sample.response_logprobs[t];
      const double adv = sample.advantages[t];
      const double ratio = std::exp(lp - old_lp);
      const double ratio_clipped = std::clamp(ratio, 1.0 - config.clip_eps, 1.0 + config.clip_eps);
      const double unclipped = ratio * adv;
      const double clipped = ratio_clipped * adv;
      const double surrogate = std::min(unclipped, clipped);

      double kl_term = 0.0;
      if (config.kl_coef > 0.0) kl_term = lp - sample.ref_logprobs[t];
      acc.loss_sum += -surrogate + config.kl_coef * kl_term;
      acc.ratio_sum += ratio;
      if (!sample.ref_logprobs.empty()) acc.kl_sum += lp - sample.ref_logprobs[t];
      if (unclipped > clipped) ++acc.clipped;
      ++acc.tokens;

      // d(loss_t)/d(logp[a]); the clipped branch blocks the policy gradient.
      const bool flows = adv >= 0.0 ? ratio <= 1.0 + config.clip_eps : ratio >= 1.0 - config.clip_eps;
      const double dlp = (flows ? -ratio * adv : 0.0) + config.kl_coef;
      if (dlp != 0.0) {
        for (int v = 0; v < V; ++v) {
          const double p = std::exp(ws.logp[static_cast<size_t>(v)]);
          ws.dz[static_cast<size_t>(v)] = dlp * ((v == a ? 1.0 : 0.0) - p);
        }
        for (int j = 0; j < H; ++j) {
          const double hj = ws.h[static_cast<size_t>(j)];
          const double* w2_row = w2 + static_cast<size_t>(j) * V;
          double* g_row = g_w2 + static_cast<size_t>(j) * V;
          double dhj = 0.0;
          for (int v = 0; v < V; ++v) {
            g_row[v] += hj * ws.dz[static_cast<size_t>(v)];
            dhj += w2_row[v] * ws.dz[static_cast<size_t>(v)];
          }
          ws.dh[static_cast<size_t>(j)] = dhj;
        }
        for (int v = 0; v < V; ++v) g_b2[v] += ws.dz[static_cast<size_t>(v)];
        for (int j = 0; j < H; ++j) {
          const double hj = ws.h[static_cast<size_t>(j)];
          ws.dpre[static_cast<size_t>(j)] = ws.dh[static_cast<size_t>(j)] * (1.0 - hj * hj);
          g_b1[j] += ws.dpre[static_cast<size_t>(j)];
        }
        const size_t in_dim = L.input_dim();
        for (size_t i = 0; i < in_dim; ++i) {
          const double xi = ws.x[i];
          const double* w1_row = w1 + i * H;
          double* g_row = g_w1 + i * H;
          double dxi = 0.0;
          for (int j = 0; j < H; ++j) {
            g_row[j] += xi * ws.dpre[static_cast<size_t>(j)];
            dxi += w1_row[j] * ws.dpre[static_cast<size_t>(j)];
          }
          ws.dx[i] = dxi;
        }
        for (int i = 0; i < K; ++i) {
          double* g_row = g_embed + static_cast<size_t>(window[static_cast<size_t>(i)]) * E;
          const double* dxi = ws.dx.data() + static_cast<size_t>(i) * E;
          for (int e = 0; e < E; ++e) g_row[e] += dxi[e];
        }
      }
      ctx.push_back(a);
    }
  }
  return acc;
}

std::pair<std::vector<double>, UpdateStats> merge_gradients(const std::vector<GradAccum>& parts) {
  if (parts.empty()) throw TrainingError("merge_gradients: no gradient parts");
  const size_t dim = parts.front().grad.size();
  std::vector<double> grad(dim, 0.0);
  UpdateStats stats;
  double loss_sum = 0.0, ratio_sum = 0.0, kl_sum = 0.0;
  size_t clipped = 0, tokens = 0;
  for (const auto& part : parts) {
    if (part.grad.size() != dim) throw TrainingError("merge_gradients: mismatched gradient sizes");
    for (size_t i = 0; i < dim; ++i) grad[i] += part.grad[i];
    loss_sum += part.loss_sum;
    ratio_sum += part.ratio_sum;
    kl_sum += part.kl_sum;
    clipped += part.clipped;
    tokens += part.tokens;
  }
  if (tokens == 0) throw TrainingError("merge_gradients: batch contains no loss-participating tokens");
  const double inv = 1.0 / static_cast<double>(tokens);
  for (double& g : grad) {
    g *= inv;
    if (!std::isfinite(g)) throw TrainingError("training step aborted: non-finite gradient");
  }
  stats.loss = loss_sum * inv;
  stats.mean_ratio = ratio_sum * inv;
  stats.clip_fraction = static_cast<double>(clipped) * inv;
  stats.mean_kl = kl_sum * inv;
  stats.tokens = tokens;
  if (!std::isfinite(stats.loss)) throw TrainingError("training step aborted: non-finite loss");
  return {std::move(grad), stats};
}

void apply_update(PolicyParams& params, const std::vector<double>& grad_mean, double learning_rate) {
  if (grad_mean.size() != params.values.size())
    throw TrainingError("apply_update: gradient size mismatch");
  // A zero-rate update is no update at all: values and version both stay
  // put, so a zero-lr run replays the exact same rollouts every step.
  if (learning_rate == 0.0) return;
  for (size_t i = 0; i < grad_mean.size(); ++i) params.values[i] -= learning_rate * grad_mean[i];
  ++params.version;
}

UpdateStats ppo_update(PolicyParams& params, const SampleBatch& batch, const TrainConfig& config,
                       int dp_world) {
  if (dp_world <= 0) throw ConfigError("ppo_update: dp_world must be positive");
  auto shards = split_batch(batch, static_cast<size_t>(dp_world));
  std::vector<GradAccum> parts;
  parts.reserve(shards.size());
  for (const auto& shard : shards) parts.push_back(ppo_gradient(params, shard, config));
  auto [grad, stats] = merge_gradients(parts);
  apply_update(params, grad, config.learning_rate);
  return stats;
}

GradAccum value_gradient(const PolicyParams& params, const SampleBatch& batch) {
  params.validate();
  batch.validate();
  const PolicyLayout& L = params.layout;
  const int K = L.context_window, E = L.embed_dim, H = L.hidden_dim;
  const int pad = kWindowPadToken;

  GradAccum acc;
  acc.grad.assign(L.param_count(), 0.0);
  PolicyWorkspace ws;
  ws.resize(L);
  std::vector<int> window(static_cast<size_t>(K));

  double* g_embed = acc.grad.data() + L.off_embed();
  double* g_w1 = acc.grad.data() + L.off_w1();
  double* g_b1 = acc.grad.data() + L.off_b1();
  double* g_vw = acc.grad.data() + L.off_vw();
  const double* w1 = params.values.data() + L.off_w1();
  const double* vw = params.values.data() + L.off_vw();

  for (const auto& sample : batch.samples) {
    const size_t n = sample.response_tokens.size();
    if (n == 0) continue;
    if (sample.advantages.size() != n)
      throw InputError("value_gradient: sample '" + sample.sample_id + "' missing targets");
    std::vector<int> ctx = sample.prompt_tokens;
    for (size_t t = 0; t < n; ++t) {
      if (!sample.mask_at(t)) {
        ctx.push_back(sample.response_tokens[t]);
        continue;
      }
      trunk_forward(params, ctx, pad, ws, &window);
      double v = params.values[L.off_vb()];
      for (int j = 0; j < H; ++j) v += vw[j] * ws.h[static_cast<size_t>(j)];
      const double err = v - sample.advantages[t];
      acc.loss_sum += 0.5 * err * err;
      ++acc.tokens;

      acc.grad[L.off_vb()] += err;
      for (int j = 0; j < H; ++j) {
        g_vw[j] += err * ws.h[static_cast<size_t>(j)];
        const double hj = ws.h[static_cast<size_t>(j)];
        ws.dpre[static_cast<size_t>(j)] = err * vw[j] * (1.0 - hj * hj);
        g_b1[j] += ws.dpre[static_cast<size_t>(j)];
      }
      const size_t in_dim = L.input_dim();
      for (size_t i = 0; i < in_dim; ++i) {
        const double xi = ws.x[i];
        const double* w1_row = w1 + i * H;
        double* g_row = g_w1 + i * H;
        double dxi = 0.0;
        for (int j = 0; j < H; ++j) {
          g_row[j] += xi * ws.dpre[static_cast<size_t>(j)];
          dxi += w1_row[j] * ws.dpre[static_cast<size_t>(j)];
        }
        ws.dx[i] = dxi;
      }
      for (int i = 0; i < K; ++i) {
        double* g_row = g_embed + static_cast<size_t>(window[static_cast<size_t>(i)]) * E;
        const double* dxi = ws.dx.data() + static_cast<size_t>(i) * E;
        for (int e = 0; e < E; ++e) g_row[e] += dxi[e];
      }
      ctx.push_back(sample.response_tokens[t]);
    }
  }
  return acc;
}

std::vector<size_t> bucket_plan(size_t total, size_t bucket_size) {
  if (bucket_size == 0) throw ConfigError("bucket_plan: bucket_size must be positive");
  std::vector<size_t> plan;
  for (size_t off = 0; off < total; off += bucket_size) plan.push_back(std::min(bucket_size, total - off));
  if (plan.empty()) plan.push_back(0);
  return plan;
}

}  // namespace rollmini
