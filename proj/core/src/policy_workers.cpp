// SPDX-License-Identifier: Apache-2.0
#include "rollmini/policy_workers.hpp"

#include <charconv>

#include "rollmini/errors.hpp"

namespace rollmini {

namespace {

std::string u64_str(uint64_t v) { return std::to_string(v); }

uint64_t parse_u64(const std::string& s, const char* what) {
  uint64_t v = 0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size())
    throw InputError(std::string("message: bad u64 field for ") + what + ": '" + s + "'");
  return v;
}

PolicyLayout layout_from_fields(const Message& m) {
  PolicyLayout layout;
  layout.vocab_size = static_cast<int>(parse_u64(m.field("V"), "V"));
  layout.embed_dim = static_cast<int>(parse_u64(m.field("E"), "E"));
  layout.context_window = static_cast<int>(parse_u64(m.field("K"), "K"));
  layout.hidden_dim = static_cast<int>(parse_u64(m.field("H"), "H"));
  return layout;
}

void layout_to_fields(const PolicyLayout& layout, Message& m) {
  m.fields["V"] = u64_str(static_cast<uint64_t>(layout.vocab_size));
  m.fields["E"] = u64_str(static_cast<uint64_t>(layout.embed_dim));
  m.fields["K"] = u64_str(static_cast<uint64_t>(layout.context_window));
  m.fields["H"] = u64_str(static_cast<uint64_t>(layout.hidden_dim));
}

}  // namespace

PolicyWorker::PolicyWorker(PolicyParams params, const Vocabulary& vocab, TrainConfig train_config)
    : params_(std::move(params)), vocab_(vocab), train_config_(train_config) {
  params_.validate();
  ws_.resize(params_.layout);
}

Message PolicyWorker::call(const std::string& method, const Message& input) {
  if (method == "generate") return do_generate(input);
  if (method == "decode_step") return do_decode_step(input);
  if (method == "forward_logprobs") return do_forward_logprobs(input);
  if (method == "critic_forward") return do_critic_forward(input);
  if (method == "compute_gradient") return do_compute_gradient(input);
  if (method == "apply_update") return do_apply_update(input);
  if (method == "export_params") return do_export_params();
  if (method == "import_params") return do_import_params(input);
  if (method == "sync_begin") return do_sync_begin(input);
  if (method == "sync_bucket") return do_sync_bucket(input);
  if (method == "sync_commit") return do_sync_commit(input);
  if (method == "get_version") {
    Message out;
    out.fields["version"] = u64_str(params_.version);
    return out;
  }
  throw DispatchError("policy worker: unimplemented method '" + method + "'");
}

Message PolicyWorker::do_generate(const Message& input) {
  GenConfig cfg;
  cfg.max_new_tokens = static_cast<int>(input.scalar("max_new_tokens"));
  cfg.temperature = input.scalar("temperature");
  cfg.seed = parse_u64(input.field("seed"), "seed");
  if (auto it = input.tensors.find("stop_tokens"); it != input.tensors.end())
    for (double t : it->second) cfg.stop_tokens.push_back(static_cast<int>(t));
  Message out;
  out.batch = generate(params_, input.batch, cfg, vocab_);
  return out;
}

Message PolicyWorker::do_decode_step(const Message& input) {
  const auto& ctx_d = input.tensor("context");
  std::vector<int> ctx(ctx_d.size());
  for (size_t i = 0; i < ctx_d.size(); ++i) ctx[i] = static_cast<int>(ctx_d[i]);
  DecodeStep ds = decode_next(params_, ctx, input.scalar("temperature"),
                              parse_u64(input.field("seed"), "seed"),
                              parse_u64(input.field("sample_key"), "sample_key"),
                              static_cast<size_t>(input.scalar("position")), kWindowPadToken, ws_);
  Message out;
  out.scalars["token"] = static_cast<double>(ds.token);
  out.scalars["logprob"] = ds.logprob;
  out.fields["version"] = u64_str(params_.version);
  return out;
}

Message PolicyWorker::do_forward_logprobs(const Message& input) {
  auto lps = forward_logprobs(params_, input.batch);
  Message out;
  out.batch = input.batch;
  for (size_t s = 0; s < out.batch.size(); ++s) out.batch.samples[s].ref_logprobs = std::move(lps[s]);
  out.fields["version"] = u64_str(params_.version);
  return out;
}

Message PolicyWorker::do_critic_forward(const Message& input) {
  auto values = critic_forward(params_, input.batch);
  Message out;
  out.batch = input.batch;
  for (size_t s = 0; s < out.batch.size(); ++s)
    out.tensors["values:" + out.batch.samples[s].sample_id] = std::move(values[s]);
  return out;
}

Message PolicyWorker::do_compute_gradient(const Message& input) {
  GradAccum acc = ppo_gradient(params_, input.batch, train_config_);
  Message out;
  out.tensors["grad"] = std::move(acc.grad);
  out.scalars["loss_sum"] = acc.loss_sum;
  out.scalars["ratio_sum"] = acc.ratio_sum;
  out.scalars["kl_sum"] = acc.kl_sum;
  out.scalars["clipped"] = static_cast<double>(acc.clipped);
  out.scalars["tokens"] = static_cast<double>(acc.tokens);
  return out;
}

Message PolicyWorker::do_apply_update(const Message& input) {
  apply_update(params_, input.tensor("grad_mean"), input.scalar("learning_rate"));
  Message out;
  out.fields["version"] = u64_str(params_.version);
  return out;
}

Message PolicyWorker::do_export_params() const {
  Message out;
  out.tensors["values"] = params_.values;
  out.fields["version"] = u64_str(params_.version);
  layout_to_fields(params_.layout, out);
  return out;
}

Message PolicyWorker::do_import_params(const Message& input) {
  PolicyLayout layout = layout_from_fields(input);
  if (!(layout == params_.layout))
    throw SyncError("import_params: layout mismatch between source and replica");
  PolicyParams next;
  next.layout = layout;
  next.version = parse_u64(input.field("version"), "version");
  next.values = input.tensor("values");
  next.validate();
  params_ = std::move(next);
  Message out;
  out.fields["version"] = u64_str(params_.version);
  return out;
}

Message PolicyWorker::do_sync_begin(const Message& input) {
  staging_.reset();
  PolicyLayout layout = layout_from_fields(input);
  if (!(layout == params_.layout))
    throw SyncError("sync_begin: layout mismatch between train and infer replicas");
  const size_t total = parse_u64(input.field("total"), "total");
  if (total != params_.layout.param_count()) throw SyncError("sync_begin: parameter count mismatch");
  SyncStaging st;
  st.layout = layout;
  st.version = parse_u64(input.field("version"), "version");
  st.values.assign(total, 0.0);
  st.filled.assign(total, 0);
  staging_ = std::move(st);
  return {};
}

Message PolicyWorker::do_sync_bucket(const Message& input) {
  if (!staging_) throw SyncError("sync_bucket: no sync in progress");
  const size_t offset = parse_u64(input.field("offset"), "offset");
  const auto& data = input.tensor("data");
  if (offset + data.size() > staging_->values.size()) {
    staging_.reset();
    throw SyncError("sync_bucket: bucket exceeds parameter vector");
  }
  for (size_t i = 0; i < data.size(); ++i) {
    staging_->values[offset + i] = data[i];
    if (!staging_->filled[offset + i]) {
      staging_->filled[offset + i] = 1;
      ++staging_->received;
    }
  }
  return {};
}

Message PolicyWorker::do_sync_commit(const Message&) {
  if (!staging_) throw SyncError("sync_commit: no sync in progress");
  if (staging_->received != staging_->values.size()) {
    staging_.reset();
    throw SyncError("sync_commit: incomplete parameter transfer");
  }
  params_.values = std::move(staging_->values);
  params_.version = staging_->version;
  staging_.reset();
  Message out;
  out.fields["version"] = u64_str(params_.version);
  return out;
}

WorkerFactory policy_worker_factory(const PolicyParams& initial, const Vocabulary& vocab,
                                    const TrainConfig& train_config) {
  return [initial, &vocab, train_config](int, int, const std::string&) {
    return std::make_unique<PolicyWorker>(initial, vocab, train_config);
  };
}

UpdateStats cluster_train_step(Cluster& train, const SampleBatch& batch, const TrainConfig& config) {
  Message msg;
  msg.batch = batch;
  auto replies = collect_messages(train.dispatch("compute_gradient", msg, DispatchMode::shard));

  std::vector<GradAccum> parts;
  parts.reserve(replies.size());
  for (auto& reply : replies) {
    GradAccum part;
    part.grad = reply.tensor("grad");
    part.loss_sum = reply.scalar("loss_sum");
    part.ratio_sum = reply.scalar("ratio_sum");
    part.kl_sum = reply.scalar("kl_sum");
    part.clipped = static_cast<size_t>(reply.scalar("clipped"));
    part.tokens = static_cast<size_t>(reply.scalar("tokens"));
    parts.push_back(std::move(part));
  }
  auto [grad, stats] = merge_gradients(parts);

  Message update;
  update.tensors["grad_mean"] = std::move(grad);
  update.scalars["learning_rate"] = config.learning_rate;
  collect_messages(train.dispatch("apply_update", update, DispatchMode::broadcast));
  return stats;
}

void sync_params(Cluster& train, Cluster& infer, size_t bucket_size) {
  if (bucket_size == 0) throw ConfigError("sync_params: bucket_size must be positive");
  Message src = train.call_rank(0, "export_params", {});
  const auto& values = src.tensor("values");
  const auto plan = bucket_plan(values.size(), bucket_size);

  try {
    Message begin;
    begin.fields = src.fields;  // version + layout
    begin.fields["total"] = std::to_string(values.size());
    collect_messages(infer.dispatch("sync_begin", begin, DispatchMode::broadcast));

    size_t offset = 0;
    for (size_t len : plan) {
      if (len == 0) break;
      Message bucket;
      bucket.fields["offset"] = std::to_string(offset);
      bucket.tensors["data"].assign(values.begin() + static_cast<long>(offset),
                                    values.begin() + static_cast<long>(offset + len));
      collect_messages(infer.dispatch("sync_bucket", bucket, DispatchMode::broadcast));
      offset += len;
    }
    collect_messages(infer.dispatch("sync_commit", Message{}, DispatchMode::broadcast));
  } catch (const CollectError& e) {
    throw SyncError(std::string("sync_params failed: ") + e.what());
  }
}

void copy_params(Cluster& src, Cluster& dst) {
  Message params = src.call_rank(0, "export_params", {});
  try {
    collect_messages(dst.dispatch("import_params", params, DispatchMode::broadcast));
  } catch (const CollectError& e) {
    throw SyncError(std::string("copy_params failed: ") + e.what());
  }
}

uint64_t cluster_version(Cluster& cluster, int rank) {
  Message reply = cluster.call_rank(rank, "get_version", {});
  return parse_u64(reply.field("version"), "version");
}

PolicyParams export_params(Cluster& cluster, int rank) {
  Message reply = cluster.call_rank(rank, "export_params", {});
  PolicyParams p;
  p.layout = layout_from_fields(reply);
  p.version = parse_u64(reply.field("version"), "version");
  p.values = reply.tensor("values");
  p.validate();
  return p;
}

void import_params(Cluster& cluster, const PolicyParams& params) {
  Message msg;
  msg.tensors["values"] = params.values;
  msg.fields["version"] = u64_str(params.version);
  layout_to_fields(params.layout, msg);
  try {
    collect_messages(cluster.dispatch("import_params", msg, DispatchMode::broadcast));
  } catch (const CollectError& e) {
    throw SyncError(std::string("import_params failed: ") + e.what());
  }
}

SampleBatch cluster_forward_logprobs(Cluster& cluster, const SampleBatch& batch) {
  if (batch.empty()) return {};
  Message msg;
  msg.batch = batch;
  return collect(cluster.dispatch("forward_logprobs", msg, DispatchMode::shard), CollectOrder::by_rank);
}

}  // namespace rollmini
