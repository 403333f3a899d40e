// SPDX-License-Identifier: Apache-2.0
#include "rollmini/resource_pool.hpp"

#include <algorithm>
#include <set>
#include <sstream>

#include <json.hpp>

#include "rollmini/errors.hpp"

namespace rollmini {

const char* to_string(DeviceKind kind) { return kind == DeviceKind::gpu ? "gpu" : "cpu"; }

const std::vector<BindingAssignment>& BindingPlan::for_role(const std::string& role) const {
  auto it = assignments.find(role);
  if (it == assignments.end()) throw ConfigError("binding plan: no assignment for role '" + role + "'");
  return it->second;
}

ResourcePool::ResourcePool(const std::vector<DeviceSpec>& specs) {
  if (specs.empty()) throw ConfigError("resource pool: device list is empty");
  for (const auto& spec : specs) {
    if (spec.device_id.empty()) throw ConfigError("resource pool: empty device_id");
    if (spec.memory_capacity < 0)
      throw ConfigError("resource pool: negative memory_capacity on device '" + spec.device_id + "'");
    if (spec.kind == DeviceKind::gpu && spec.memory_capacity == 0)
      throw ConfigError("resource pool: gpu device '" + spec.device_id + "' must have memory_capacity > 0");
    auto [it, inserted] = devices_.emplace(spec.device_id, DeviceState{spec, 0});
    if (!inserted) throw ConfigError("resource pool: duplicate device_id '" + spec.device_id + "'");
    order_.push_back(spec.device_id);
  }
}

std::map<DeviceKind, size_t> ResourcePool::kind_counts() const {
  std::map<DeviceKind, size_t> counts;
  for (const auto& [id, st] : devices_) counts[st.spec.kind]++;
  return counts;
}

std::vector<std::string> ResourcePool::device_ids() const { return order_; }

bool ResourcePool::has_device(const std::string& id) const { return devices_.count(id) > 0; }

ResourcePool::DeviceState& ResourcePool::state(const std::string& id) {
  auto it = devices_.find(id);
  if (it == devices_.end()) throw ConfigError("resource pool: unknown device '" + id + "'");
  return it->second;
}

const ResourcePool::DeviceState& ResourcePool::state(const std::string& id) const {
  auto it = devices_.find(id);
  if (it == devices_.end()) throw ConfigError("resource pool: unknown device '" + id + "'");
  return it->second;
}

const DeviceSpec& ResourcePool::device(const std::string& id) const { return state(id).spec; }
int64_t ResourcePool::capacity(const std::string& id) const { return state(id).spec.memory_capacity; }
int64_t ResourcePool::reserved(const std::string& id) const { return state(id).reserved; }
int64_t ResourcePool::free_memory(const std::string& id) const {
  const auto& st = state(id);
  return st.spec.memory_capacity - st.reserved;
}

PlacementGroup ResourcePool::allocate_group(const std::vector<std::string>& device_ids,
                                            int64_t memory_per_slot) {
  if (device_ids.empty()) throw ConfigError("allocate_group: empty device list");
  if (memory_per_slot < 0) throw ConfigError("allocate_group: negative memory_per_slot");

  // Validate the full request against the ledger before touching it.
  std::map<std::string, int64_t> demand;
  for (const auto& id : device_ids) {
    if (!has_device(id)) throw ConfigError("allocate_group: unknown device '" + id + "'");
    demand[id] += memory_per_slot;
  }
  for (const auto& [id, want] : demand) {
    if (want > free_memory(id))
      throw AllocationError("allocate_group: capacity exceeded on device '" + id + "' (requested " +
                            std::to_string(want) + ", free " + std::to_string(free_memory(id)) + ")");
  }

  PlacementGroup group;
  group.group_id = "pg" + std::to_string(next_group_++);
  for (const auto& id : device_ids) {
    state(id).reserved += memory_per_slot;
    group.slots.push_back(PlacementSlot{id, memory_per_slot});
  }
  live_groups_[group.group_id] = group;
  return group;
}

void ResourcePool::free_group(const std::string& group_id) {
  auto it = live_groups_.find(group_id);
  if (it == live_groups_.end()) throw ConfigError("free_group: unknown group '" + group_id + "'");
  for (const auto& slot : it->second.slots) state(slot.device_id).reserved -= slot.memory_reserved;
  live_groups_.erase(it);
}

BindingPlan ResourcePool::bind_roles(const DeviceMappingConfig& mapping,
                                     const std::vector<std::pair<std::string, int>>& roles) {
  // First pass: build assignments and the hypothetical ledger.
  std::map<std::string, int64_t> extra;  // device -> additional reservation
  BindingPlan plan;
  for (const auto& [role, world_size] : roles) {
    auto it = mapping.roles.find(role);
    if (it == mapping.roles.end())
      throw ConfigError("bind_roles: role '" + role + "' missing from device mapping");
    const RoleMapping& rm = it->second;
    if (rm.devices.empty()) throw ConfigError("bind_roles: role '" + role + "' has an empty device list");
    if (world_size <= 0) throw ConfigError("bind_roles: role '" + role + "' world_size must be positive");
    for (const auto& dev : rm.devices)
      if (!has_device(dev)) throw ConfigError("bind_roles: role '" + role + "' references unknown device '" + dev + "'");

    auto& assignment = plan.assignments[role];
    for (int rank = 0; rank < world_size; ++rank) {
      const std::string& dev = rm.devices[static_cast<size_t>(rank) % rm.devices.size()];
      assignment.push_back(BindingAssignment{rank, dev});
      extra[dev] += rm.memory_demand;
    }
  }
  for (const auto& [dev, want] : extra) {
    if (want > free_memory(dev))
      throw AllocationError("bind_roles: infeasible memory on device '" + dev + "' (needs " +
                            std::to_string(want) + " more, free " + std::to_string(free_memory(dev)) + ")");
  }

  // Commit: one placement group per role, one slot per worker.
  for (const auto& [role, world_size] : roles) {
    const RoleMapping& rm = mapping.roles.at(role);
    std::vector<std::string> slot_devices;
    for (const auto& a : plan.assignments.at(role)) slot_devices.push_back(a.device_id);
    PlacementGroup g = allocate_group(slot_devices, rm.memory_demand);
    plan.groups.push_back(std::move(g));
  }
  return plan;
}

std::map<std::string, int64_t> ResourcePool::reservation_snapshot() const {
  std::map<std::string, int64_t> snap;
  for (const auto& [id, st] : devices_) snap[id] = st.reserved;
  return snap;
}

ColocationReport colocation_report(const ResourcePool& pool, const BindingPlan& plan) {
  std::map<std::string, std::vector<std::pair<std::string, int>>> residents;
  for (const auto& [role, assignment] : plan.assignments)
    for (const auto& a : assignment) residents[a.device_id].emplace_back(role, a.rank);

  ColocationReport report;
  for (const auto& id : pool.device_ids()) {
    DeviceResidents d;
    d.device_id = id;
    d.kind = pool.device(id).kind;
    d.capacity = pool.capacity(id);
    d.reserved = pool.reserved(id);
    d.free_memory = pool.free_memory(id);
    auto it = residents.find(id);
    if (it != residents.end()) {
      std::sort(it->second.begin(), it->second.end());
      d.residents = it->second;
      std::set<std::string> roles;
      for (const auto& [role, rank] : d.residents) roles.insert(role);
      d.colocated = roles.size() >= 2;
    }
    if (d.colocated) ++report.colocated_device_count;
    report.devices.push_back(std::move(d));
  }
  return report;
}

std::string ColocationReport::to_table() const {
  std::ostringstream os;
  os << "device  kind  reserved/capacity  free  residents\n";
  for (const auto& d : devices) {
    os << d.device_id << "  " << to_string(d.kind) << "  " << d.reserved << "/" << d.capacity << "  "
       << d.free_memory << "  ";
    for (size_t i = 0; i < d.residents.size(); ++i) {
      if (i) os << ", ";
      os << d.residents[i].first << ":" << d.residents[i].second;
    }
    if (d.colocated) os << "  [colocated]";
    os << '\n';
  }
  os << "colocated devices: " << colocated_device_count << '\n';
  return os.str();
}

std::string ColocationReport::to_json() const {
  nlohmann::json j;
  j["colocated_device_count"] = colocated_device_count;
  j["devices"] = nlohmann::json::array();
  for (const auto& d : devices) {
    nlohmann::json jd;
    jd["device_id"] = d.device_id;
    jd["kind"] = to_string(d.kind);
    jd["capacity"] = d.capacity;
    jd["reserved"] = d.reserved;
    jd["free"] = d.free_memory;
    jd["colocated"] = d.colocated;
    jd["residents"] = nlohmann::json::array();
    for (const auto& [role, rank] : d.residents) jd["residents"].push_back({{"role", role}, {"rank", rank}});
    j["devices"].push_back(jd);
  }
  return j.dump(2);
}

}  // namespace rollmini
