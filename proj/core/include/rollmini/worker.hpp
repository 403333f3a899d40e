// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <functional>
#include <map>
#include <memory>
#include <set>
#include <string>
#include <vector>

#include "rollmini/sample.hpp"

namespace rollmini {

enum class Role { actor_train, actor_infer, reference, critic, reward, environment };

const char* to_string(Role role);
Role role_from_string(const std::string& name);

/// Payload for worker method calls and replies. The batch part carries the
/// data plane (samples between stages); tensors/scalars/fields carry the
/// control plane (gradients, parameter buckets, tokens). Values are copied
/// through the mailbox, never shared.
struct Message {
  SampleBatch batch;
  std::map<std::string, std::vector<double>> tensors;
  std::map<std::string, double> scalars;
  std::map<std::string, std::string> fields;

  const std::vector<double>& tensor(const std::string& name) const;
  double scalar(const std::string& name) const;
  const std::string& field(const std::string& name) const;
};

/// A parallel worker: rank-pinned owner of one role replica. Workers only
/// ever touch their own state; all interaction goes through call().
class Worker {
 public:
  virtual ~Worker() = default;
  virtual Message call(const std::string& method, const Message& input) = 0;

  int rank = -1;
  int world_size = 0;
  std::string device_id;
};

using WorkerFactory =
    std::function<std::unique_ptr<Worker>(int rank, int world_size, const std::string& device_id)>;

/// Methods a role's workers may be asked to run. Dispatch validates against
/// this registry before anything reaches a worker.
const std::set<std::string>& methods_for_role(Role role);

}  // namespace rollmini
