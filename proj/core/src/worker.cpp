// SPDX-License-Identifier: Apache-2.0
#include "rollmini/worker.hpp"

#include "rollmini/errors.hpp"

namespace rollmini {

const char* to_string(Role role) {
  switch (role) {
    case Role::actor_train: return "actor_train";
    case Role::actor_infer: return "actor_infer";
    case Role::reference: return "reference";
    case Role::critic: return "critic";
    case Role::reward: return "reward";
    case Role::environment: return "environment";
  }
  return "?";
}

Role role_from_string(const std::string& name) {
  if (name == "actor_train") return Role::actor_train;
  if (name == "actor_infer") return Role::actor_infer;
  if (name == "reference") return Role::reference;
  if (name == "critic") return Role::critic;
  if (name == "reward") return Role::reward;
  if (name == "environment") return Role::environment;
  throw ConfigError("unknown role '" + name + "'");
}

const std::vector<double>& Message::tensor(const std::string& name) const {
  auto it = tensors.find(name);
  if (it == tensors.end()) throw InputError("message: missing tensor '" + name + "'");
  return it->second;
}

double Message::scalar(const std::string& name) const {
  auto it = scalars.find(name);
  if (it == scalars.end()) throw InputError("message: missing scalar '" + name + "'");
  return it->second;
}

const std::string& Message::field(const std::string& name) const {
  auto it = fields.find(name);
  if (it == fields.end()) throw InputError("message: missing field '" + name + "'");
  return it->second;
}

const std::set<std::string>& methods_for_role(Role role) {
  static const std::set<std::string> actor_train = {"forward_logprobs", "compute_gradient",
                                                    "apply_update",     "export_params",
                                                    "import_params",    "get_version"};
  static const std::set<std::string> actor_infer = {"generate",   "decode_step",   "forward_logprobs",
                                                    "sync_begin", "sync_bucket",   "sync_commit",
                                                    "export_params", "import_params", "get_version"};
  static const std::set<std::string> reference = {"forward_logprobs", "import_params", "export_params",
                                                  "get_version"};
  static const std::set<std::string> critic = {"critic_forward", "import_params", "export_params",
                                               "get_version"};
  static const std::set<std::string> reward = {"compute_reward"};
  static const std::set<std::string> environment = {"env_begin", "env_step", "env_abort"};
  switch (role) {
    case Role::actor_train: return actor_train;
    case Role::actor_infer: return actor_infer;
    case Role::reference: return reference;
    case Role::critic: return critic;
    case Role::reward: return reward;
    case Role::environment: return environment;
  }
  throw ConfigError("unknown role");
}

}  // namespace rollmini
