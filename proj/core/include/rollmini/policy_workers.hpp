// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <optional>

#include "rollmini/cluster.hpp"
#include "rollmini/policy.hpp"
#include "rollmini/worker.hpp"

namespace rollmini {

/// Worker replica for every policy-holding role. Which methods a cluster
/// may invoke is governed by the per-role registry, not by this class.
///
/// Methods: generate, decode_step, forward_logprobs (fills ref_logprobs
/// with this replica's scores), critic_forward, compute_gradient,
/// apply_update, export_params, import_params, sync_begin / sync_bucket /
/// sync_commit, get_version.
class PolicyWorker : public Worker {
 public:
  PolicyWorker(PolicyParams params, const Vocabulary& vocab, TrainConfig train_config);

  Message call(const std::string& method, const Message& input) override;

 private:
  Message do_generate(const Message& input);
  Message do_decode_step(const Message& input);
  Message do_forward_logprobs(const Message& input);
  Message do_critic_forward(const Message& input);
  Message do_compute_gradient(const Message& input);
  Message do_apply_update(const Message& input);
  Message do_export_params() const;
  Message do_import_params(const Message& input);
  Message do_sync_begin(const Message& input);
  Message do_sync_bucket(const Message& input);
  Message do_sync_commit(const Message& input);

  PolicyParams params_;
  const Vocabulary& vocab_;
  TrainConfig train_config_;
  PolicyWorkspace ws_;

  struct SyncStaging {
    PolicyLayout layout;
    uint64_t version = 0;
    std::vector<double> values;
    std::vector<uint8_t> filled;  // per-element receipt map
    size_t received = 0;
  };
  std::optional<SyncStaging> staging_;
};

/// Factory for a role cluster whose replicas all start from `initial`.
WorkerFactory policy_worker_factory(const PolicyParams& initial, const Vocabulary& vocab,
                                    const TrainConfig& train_config);

/// One data-parallel PPO step over the cluster: shard, per-rank gradients,
/// rank-ordered reduction, broadcast update. Raises TrainingError (and
/// leaves every replica untouched) on non-finite loss or gradient.
UpdateStats cluster_train_step(Cluster& train, const SampleBatch& batch, const TrainConfig& config);

/// Broadcasts the training replicas' parameters to every worker of the
/// destination cluster in contiguous buckets of at most bucket_size
/// elements. Destination vectors end bit-identical to the source, version
/// included; a failed sync leaves destinations unchanged.
void sync_params(Cluster& train, Cluster& infer, size_t bucket_size);

/// Copies rank-0 parameters of src into every worker of dst (used to pin
/// the reference model to the post-warmup policy).
void copy_params(Cluster& src, Cluster& dst);

uint64_t cluster_version(Cluster& cluster, int rank = 0);

/// Fetches rank-0 parameters as a PolicyParams value (checkpointing).
PolicyParams export_params(Cluster& cluster, int rank = 0);

/// Replaces parameters on every rank of the cluster.
void import_params(Cluster& cluster, const PolicyParams& params);

/// Runs forward_logprobs on the cluster (sharded) and returns the batch
/// with ref_logprobs filled, in the input sample order.
SampleBatch cluster_forward_logprobs(Cluster& cluster, const SampleBatch& batch);

}  // namespace rollmini
