#pragma once

#include <algorithm>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include "clonesim/core.hpp"
#include "clonesim/engine.hpp"
#include "clonesim/policies/srptms.hpp"
#include "clonesim/rng.hpp"

namespace clonesim {

// Jobs in descending w_i / phi_i order, phi_i being the total effective workload.
inline std::vector<JobId> offline_priority_order(std::span<const JobSpec> jobs, RiskFactor risk) {
  std::vector<PriorityKey> keys;
  keys.reserve(jobs.size());
  for (std::size_t i = 0; i < jobs.size(); ++i)
    keys.push_back({priority(jobs[i].weight, total_effective_workload(jobs[i], risk)), static_cast<JobId>(i)});
  std::sort(keys.begin(), keys.end(), runs_before);
  std::vector<JobId> order;
  order.reserve(keys.size());
  for (const auto& k : keys) order.push_back(k.job);
  return order;
}

/// Fills every free machine with one copy of one task, taking tasks from the
/// highest-priority job that still has unscheduled tasks. Within a job an
/// unscheduled map is chosen uniformly at random; reduces are chosen only once
/// every map has been launched, and may launch blocked. Never clones.
inline std::vector<LaunchDirective> offline_bulk_schedule(const ClusterState& state,
                                                          std::span<const JobId> priority_order,
                                                          RngStream& rng) {
  std::vector<LaunchDirective> out;
  int free = state.free_machines();
  for (JobId id : priority_order) {
    if (free == 0) break;
    const auto& js = state.job(id);
    if (!js.arrived || js.completed) continue;
    for (Phase phase : {Phase::map, Phase::reduce}) {
      const auto tasks = js.unscheduled(phase);
      if (tasks.empty() || free == 0) continue;
      std::vector<std::uint32_t> pool(tasks.begin(), tasks.end());
      const auto n = std::min<std::size_t>(pool.size(), static_cast<std::size_t>(free));
      detail::choose_front(pool, n, rng);
      for (std::size_t i = 0; i < n; ++i) out.push_back({{id, phase, pool[i]}, 1});
      free -= static_cast<int>(n);
    }
  }
  return out;
}

class OfflinePolicy : public Scheduler {
 public:
  explicit OfflinePolicy(RiskFactor risk) : risk_(risk) {}

  std::string name() const override { return "offline"; }

  void reset(std::span<const JobSpec> workload, const SimulationConfig& /*config*/) override {
    for (const auto& j : workload)
      if (j.arrival_slot != 0)
        throw ContractError("offline policy needs bulk arrivals; job " + j.name + " arrives at slot " +
                            std::to_string(j.arrival_slot) + " (use srptms+c)");
    order_ = offline_priority_order(workload, risk_);
  }

  std::vector<LaunchDirective> decide(const ClusterState& state) override {
    RngStream rng = RngStream::derive(state.seed(), "offline-pick", {static_cast<std::uint64_t>(state.slot())});
    return offline_bulk_schedule(state, order_, rng);
  }

  std::span<const JobId> order() const noexcept { return order_; }

 private:
  RiskFactor risk_;
  std::vector<JobId> order_;
};

}  // namespace clonesim
