// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <stdexcept>
#include <string>
#include <vector>

namespace rollmini {

/// Base class for all errors raised by this library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Invalid configuration: duplicate ids, missing roles, malformed config files.
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// Resource allocation cannot be satisfied (capacity exceeded, infeasible mapping).
class AllocationError : public Error {
 public:
  using Error::Error;
};

/// Malformed operation input: out-of-vocabulary tokens, length mismatches.
class InputError : public Error {
 public:
  using Error::Error;
};

/// Cluster dispatch rejected before execution (unknown method, bad mode).
class DispatchError : public Error {
 public:
  using Error::Error;
};

/// Worker creation failed; partial spawns have been torn down.
class SpawnError : public Error {
 public:
  using Error::Error;
};

/// One or more ranks of a dispatch failed.
class CollectError : public Error {
 public:
  CollectError(const std::string& what, std::vector<int> failed)
      : Error(what), failed_ranks(std::move(failed)) {}
  std::vector<int> failed_ranks;
};

/// Illegal rollout request state transition or unknown request.
class LifecycleError : public Error {
 public:
  using Error::Error;
};

/// Training step aborted (non-finite loss or gradient); parameters unchanged.
class TrainingError : public Error {
 public:
  using Error::Error;
};

/// Parameter synchronization failed (layout mismatch); target replica unchanged.
class SyncError : public Error {
 public:
  using Error::Error;
};

/// No route registered for a sample's domain tag.
class RoutingError : public Error {
 public:
  using Error::Error;
};

/// Checkpoint file corrupt or truncated.
class IntegrityError : public Error {
 public:
  using Error::Error;
};

}  // namespace rollmini
