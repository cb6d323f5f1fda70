#pragma once

#include <algorithm>
#include <cstdint>
#include <string>
#include <vector>

#include "clonesim/core.hpp"
#include "clonesim/engine.hpp"
#include "clonesim/policies/shares.hpp"
#include "clonesim/rng.hpp"

namespace clonesim {

struct CloneAssignment {
  std::vector<LaunchDirective> launches;
  int consumed = 0;  // pi_i(l)
};

namespace detail {

// Phase whose unscheduled tasks may launch now without blocking: maps first,
// reduces only once every map task has completed. Empty span when neither.
inline std::pair<Phase, std::span<const std::uint32_t>> launchable_tasks(const JobState& job) {
  if (job.pending_map() > 0) return {Phase::map, job.unscheduled(Phase::map)};
  if (job.map_phase_done() && job.pending_reduce() > 0) return {Phase::reduce, job.unscheduled(Phase::reduce)};
  return {Phase::map, {}};
}

// Moves k uniformly chosen elements of `pool` to its front (partial Fisher-Yates).
inline void choose_front(std::vector<std::uint32_t>& pool, std::size_t k, RngStream& rng) {
  for (std::size_t i = 0; i < k; ++i) {
    const auto j = i + static_cast<std::size_t>(rng.below(pool.size() - i));
    std::swap(pool[i], pool[j]);
  }
}

}  // namespace detail

/// Spends x newly granted machines on one job.
///
/// With c launchable tasks: x <= c launches x distinct tasks chosen uniformly
/// at random, one copy each; x > c gives every task floor(x/c) copies and
/// x mod c tasks (chosen at random, without repetition) one extra copy. All x
/// machines are consumed whenever a task is launchable. With `allow_clones`
/// false, at most one copy per task is launched and the rest stay free.
inline CloneAssignment task_cloning_assign(const JobState& job, int x, RngStream& rng,
                                           bool allow_clones = true) {
  if (x < 1) throw ContractError("task_cloning_assign: x must be >= 1");
  CloneAssignment out;
  const auto [phase, tasks] = detail::launchable_tasks(job);
  if (tasks.empty()) return out;

  std::vector<std::uint32_t> pool(tasks.begin(), tasks.end());
  const auto c = static_cast<int>(pool.size());
  if (x <= c || !allow_clones) {
    const int n = std::min(x, c);
    detail::choose_front(pool, static_cast<std::size_t>(n), rng);
    std::sort(pool.begin(), pool.begin() + n);
    for (int i = 0; i < n; ++i) out.launches.push_back({{job.id, phase, pool[static_cast<std::size_t>(i)]}, 1});
    out.consumed = n;
    return out;
  }

  const int base = x / c;
  const int extra = x % c;
  detail::choose_front(pool, static_cast<std::size_t>(extra), rng);
  std::vector<int> copies(static_cast<std::size_t>(c), base);
  for (int i = 0; i < extra; ++i) copies[static_cast<std::size_t>(i)] += 1;
  for (int i = 0; i < c; ++i)
    out.launches.push_back({{job.id, phase, pool[static_cast<std::size_t>(i)]}, copies[static_cast<std::size_t>(i)]});
  std::sort(out.launches.begin(), out.launches.end(),
            [](const LaunchDirective& a, const LaunchDirective& b) { return a.task < b.task; });
  out.consumed = x;
  return out;
}

// Remaining effective workload U_i(l) of every alive job that still has unscheduled tasks.
inline std::vector<AliveJob> alive_with_unscheduled(const ClusterState& state, RiskFactor risk) {
  std::vector<AliveJob> out;
  for (JobId id : state.alive_jobs()) {
    const auto& js = state.job(id);
    if (detail::launchable_tasks(js).second.empty()) continue;
    out.push_back({id, js.spec->weight, effective_workload(*js.spec, js.pending_map(), js.pending_reduce(), risk)});
  }
  return out;
}

/// One slot of SRPT-ordered epsilon-fractional machine sharing with cloning.
///
/// Shares are computed over the jobs with unscheduled tasks. In descending
/// priority order each job with deficit xi = round(g_i) - sigma_i > 0 is
/// granted min(xi, free) machines and spends them through
/// task_cloning_assign; a job already above its share keeps its machines
/// (no preemption) and gets nothing new.
inline std::vector<LaunchDirective> srptms_decide(const ClusterState& state, const PolicyParams& params,
                                                  bool allow_clones = true,
                                                  std::string_view stream = "srptms-assign") {
  std::vector<LaunchDirective> out;
  int free = state.free_machines();
  if (free == 0) return out;
  const auto alive = alive_with_unscheduled(state, RiskFactor{params.risk_factor});
  if (alive.empty()) return out;

  ShareVector shares = srptms_shares(alive, params.epsilon, state.machine_count());
  for (auto& e : shares.entries) {
    if (free == 0) break;
    e.occupancy = state.job_occupancy(e.job);
    const int deficit = e.deficit();
    if (deficit <= 0) continue;
    const int x = std::min(deficit, free);
    RngStream rng = RngStream::derive(state.seed(), stream, {static_cast<std::uint64_t>(state.slot()), e.job});
    auto assigned = task_cloning_assign(state.job(e.job), x, rng, allow_clones);
    free -= assigned.consumed;
    out.insert(out.end(), assigned.launches.begin(), assigned.launches.end());
  }
  return out;
}

class SrptmsPolicy : public Scheduler {
 public:
  explicit SrptmsPolicy(PolicyParams params, bool allow_clones = true)
      : params_(params), allow_clones_(allow_clones) {
    params_.validate();
  }

  std::string name() const override { return allow_clones_ ? "srptms+c" : "srptms"; }

  std::vector<LaunchDirective> decide(const ClusterState& state) override {
    return srptms_decide(state, params_, allow_clones_);
  }

  const PolicyParams& params() const noexcept { return params_; }

 private:
  PolicyParams params_;
  bool allow_clones_;
};

// Weighted fair scheduler: epsilon = 1, one copy per task.
class FairPolicy : public Scheduler {
 public:
  FairPolicy() { params_.epsilon = 1.0; }

  std::string name() const override { return "fair"; }

  std::vector<LaunchDirective> decide(const ClusterState& state) override {
    return srptms_decide(state, params_, false, "fair-assign");
  }

 private:
  PolicyParams params_;
};

}  // namespace clonesim
