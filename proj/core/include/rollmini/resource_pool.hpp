// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

namespace rollmini {

enum class DeviceKind { gpu, cpu };

const char* to_string(DeviceKind kind);

/// A simulated device slot. Memory is counted in abstract integer units.
struct DeviceSpec {
  std::string device_id;
  DeviceKind kind = DeviceKind::gpu;
  int64_t memory_capacity = 0;
};

struct PlacementSlot {
  std::string device_id;
  int64_t memory_reserved = 0;
};

/// An atomic reservation of device slots.
struct PlacementGroup {
  std::string group_id;
  std::vector<PlacementSlot> slots;
};

struct RoleMapping {
  std::vector<std::string> devices;  // explicit device list, colocation legal
  int64_t memory_demand = 0;         // per worker
};

/// role name -> device list + per-worker memory demand.
struct DeviceMappingConfig {
  std::map<std::string, RoleMapping> roles;
};

struct BindingAssignment {
  int rank = 0;
  std::string device_id;
};

/// Deterministic role -> [(worker_rank, device_id)] assignment plus the
/// placement groups that back it.
struct BindingPlan {
  std::map<std::string, std::vector<BindingAssignment>> assignments;
  std::vector<PlacementGroup> groups;

  const std::vector<BindingAssignment>& for_role(const std::string& role) const;
};

/// Mutable reservation ledger over a fixed device set. All mutations are
/// funneled through the owning thread; reports read a consistent snapshot.
class ResourcePool {
 public:
  /// Builds a pool with zero reservations. Duplicate or invalid specs throw
  /// ConfigError.
  explicit ResourcePool(const std::vector<DeviceSpec>& specs);

  size_t device_count() const { return devices_.size(); }
  std::map<DeviceKind, size_t> kind_counts() const;
  std::vector<std::string> device_ids() const;

  bool has_device(const std::string& id) const;
  const DeviceSpec& device(const std::string& id) const;
  int64_t capacity(const std::string& id) const;
  int64_t reserved(const std::string& id) const;
  int64_t free_memory(const std::string& id) const;

  /// Reserves memory_per_slot on every listed device (one slot per list
  /// entry). All-or-nothing: on error the ledger is untouched.
  PlacementGroup allocate_group(const std::vector<std::string>& device_ids, int64_t memory_per_slot);

  /// Releases a group's reservations. Unknown group ids throw ConfigError.
  void free_group(const std::string& group_id);

  /// Assigns ranks round-robin over each role's device list (in listed
  /// order) and reserves memory_demand per worker. Validates the whole
  /// request against the ledger before committing anything.
  BindingPlan bind_roles(const DeviceMappingConfig& mapping,
                         const std::vector<std::pair<std::string, int>>& roles);

  /// device_id -> reserved units, for ledger cross-checks.
  std::map<std::string, int64_t> reservation_snapshot() const;

 private:
  struct DeviceState {
    DeviceSpec spec;
    int64_t reserved = 0;
  };
  DeviceState& state(const std::string& id);
  const DeviceState& state(const std::string& id) const;

  std::vector<std::string> order_;  // insertion order for deterministic reports
  std::map<std::string, DeviceState> devices_;
  std::map<std::string, PlacementGroup> live_groups_;
  uint64_t next_group_ = 0;
};

struct DeviceResidents {
  std::string device_id;
  DeviceKind kind = DeviceKind::gpu;
  std::vector<std::pair<std::string, int>> residents;  // (role, rank)
  int64_t capacity = 0;
  int64_t reserved = 0;
  int64_t free_memory = 0;
  bool colocated = false;  // >= 2 distinct roles resident
};

struct ColocationReport {
  std::vector<DeviceResidents> devices;
  size_t colocated_device_count = 0;

  std::string to_table() const;
  std::string to_json() const;
};

ColocationReport colocation_report(const ResourcePool& pool, const BindingPlan& plan);

}  // namespace rollmini
