#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <limits>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "clonesim/core.hpp"
#include "clonesim/engine.hpp"
#include "clonesim/errors.hpp"
#include "clonesim/policies/offline.hpp"

namespace clonesim {

// Exhaustive optimum -----------------------------------------------------------

struct OracleJob {
  double weight = 1.0;
  int map_count = 1;
  int reduce_count = 0;
  int map_duration = 1;
  int reduce_duration = 1;
};

// Small bulk-arrival instance with deterministic integer task durations.
struct OracleInstance {
  std::vector<OracleJob> jobs;
  int machines = 1;

  static constexpr int kMaxJobs = 3;
  static constexpr int kMaxTasks = 6;
  static constexpr int kMaxMachines = 3;
  static constexpr int kMaxDuration = 8;

  int task_count() const noexcept {
    int n = 0;
    for (const auto& j : jobs) n += j.map_count + j.reduce_count;
    return n;
  }

  void validate() const {
    if (jobs.empty()) throw ContractError("oracle instance has no jobs");
    if (static_cast<int>(jobs.size()) > kMaxJobs || task_count() > kMaxTasks || machines > kMaxMachines)
      throw SizeError("oracle instance exceeds " + std::to_string(kMaxJobs) + " jobs / " + std::to_string(kMaxTasks) +
                      " tasks / " + std::to_string(kMaxMachines) + " machines");
    if (machines < 1) throw ContractError("oracle instance needs >= 1 machine");
    for (const auto& j : jobs) {
      if (j.map_count < 1 || j.reduce_count < 0 || !(j.weight > 0.0))
        throw ContractError("oracle job needs >= 1 map, >= 0 reduces and positive weight");
      if (j.map_duration < 1 || j.reduce_duration < 1 || j.map_duration > kMaxDuration ||
          j.reduce_duration > kMaxDuration)
        throw SizeError("oracle task durations must be in 1.." + std::to_string(kMaxDuration));
    }
  }

  std::vector<JobSpec> to_workload() const {
    std::vector<JobSpec> out;
    for (std::size_t i = 0; i < jobs.size(); ++i) {
      JobSpec s;
      s.name = "j" + std::to_string(i);
      s.weight = jobs[i].weight;
      s.map_count = jobs[i].map_count;
      s.reduce_count = jobs[i].reduce_count;
      s.map_dist = Deterministic{static_cast<double>(jobs[i].map_duration)};
      s.reduce_dist = Deterministic{static_cast<double>(jobs[i].reduce_duration)};
      out.push_back(std::move(s));
    }
    return out;
  }
};

namespace detail {

// Depth-first search over slot-by-slot launch decisions. Tasks of one job
// phase are interchangeable, so a state is, per (job, phase): unstarted count,
// done count and the count of running tasks per remaining duration. The cost
// to go from a state does not depend on the clock (each slot adds the weight of
// every unfinished job), which makes the memo exact.
class OptimalSearch {
 public:
  explicit OptimalSearch(const OracleInstance& inst) : inst_(inst) {
    const auto n = inst.jobs.size();
    groups_ = 2 * n;
    width_ = 2 + OracleInstance::kMaxDuration;  // unstarted, done, running[1..D]
  }

  double solve() {
    std::vector<std::uint8_t> state(groups_ * width_, 0);
    for (std::size_t j = 0; j < inst_.jobs.size(); ++j) {
      state[(2 * j) * width_] = static_cast<std::uint8_t>(inst_.jobs[j].map_count);
      state[(2 * j + 1) * width_] = static_cast<std::uint8_t>(inst_.jobs[j].reduce_count);
    }
    return cost_to_go(state);
  }

  std::size_t states_visited() const noexcept { return memo_.size(); }

 private:
  int duration(std::size_t group) const {
    const auto& j = inst_.jobs[group / 2];
    return group % 2 == 0 ? j.map_duration : j.reduce_duration;
  }
  int total(std::size_t group) const {
    const auto& j = inst_.jobs[group / 2];
    return group % 2 == 0 ? j.map_count : j.reduce_count;
  }
  int running(const std::vector<std::uint8_t>& s, std::size_t g) const {
    int n = 0;
    for (std::size_t r = 0; r < static_cast<std::size_t>(OracleInstance::kMaxDuration); ++r) n += s[g * width_ + 2 + r];
    return n;
  }
  bool job_done(const std::vector<std::uint8_t>& s, std::size_t j) const {
    return s[(2 * j) * width_ + 1] == total(2 * j) && s[(2 * j + 1) * width_ + 1] == total(2 * j + 1);
  }

  double cost_to_go(const std::vector<std::uint8_t>& s) {
    bool all_done = true;
    for (std::size_t j = 0; j < inst_.jobs.size(); ++j) all_done = all_done && job_done(s, j);
    if (all_done) return 0.0;
    const std::string key(s.begin(), s.end());
    if (auto it = memo_.find(key); it != memo_.end()) return it->second;

    int busy = 0;
    for (std::size_t g = 0; g < groups_; ++g) busy += running(s, g);
    const int free = inst_.machines - busy;

    double slot_cost = 0.0;
    for (std::size_t j = 0; j < inst_.jobs.size(); ++j)
      if (!job_done(s, j)) slot_cost += inst_.jobs[j].weight;

    // Startable counts: maps any time, reduces once the job's maps are all done.
    std::vector<int> startable(groups_, 0);
    for (std::size_t g = 0; g < groups_; ++g) {
      const bool reduce = g % 2 == 1;
      if (reduce && s[(g - 1) * width_ + 1] != total(g - 1)) continue;
      startable[g] = s[g * width_];
    }

    double best = std::numeric_limits<double>::infinity();
    std::vector<int> launch(groups_, 0);
    std::function<void(std::size_t, int)> choose = [&](std::size_t g, int left) {
      if (g == groups_) {
        const int launched = free - left;
        if (busy == 0 && launched == 0) return;  // idling an empty cluster never helps
        best = std::min(best, slot_cost + cost_to_go(advance(s, launch)));
        return;
      }
      for (int k = 0; k <= std::min(startable[g], left); ++k) {
        launch[g] = k;
        choose(g + 1, left - k);
      }
      launch[g] = 0;
    };
    choose(0, free);
    memo_.emplace(key, best);
    return best;
  }

  std::vector<std::uint8_t> advance(const std::vector<std::uint8_t>& s, const std::vector<int>& launch) const {
    std::vector<std::uint8_t> next = s;
    for (std::size_t g = 0; g < groups_; ++g) {
      auto* row = &next[g * width_];
      row[0] = static_cast<std::uint8_t>(row[0] - launch[g]);
      row[2 + duration(g) - 1] = static_cast<std::uint8_t>(row[2 + duration(g) - 1] + launch[g]);
      // Every running task loses one unit; remaining 1 -> done.
      row[1] = static_cast<std::uint8_t>(row[1] + row[2]);
      for (int r = 0; r + 1 < OracleInstance::kMaxDuration; ++r) row[2 + r] = row[2 + r + 1];
      row[2 + OracleInstance::kMaxDuration - 1] = 0;
    }
    return next;
  }

  const OracleInstance& inst_;
  std::size_t groups_ = 0;
  std::size_t width_ = 0;
  std::unordered_map<std::string, double> memo_;
};

}  // namespace detail

/// Minimum weighted total flowtime over all non-preemptive single-copy
/// schedules that respect capacity and map-before-reduce precedence.
inline double brute_force_optimal(const OracleInstance& instance) {
  instance.validate();
  return detail::OptimalSearch(instance).solve();
}

inline double weighted_total_flowtime(const SimulationResult& r) {
  double s = 0.0;
  for (const auto& j : r.jobs) {
    if (!j.completed()) throw ContractError("weighted_total_flowtime: unfinished job " + j.name);
    s += j.weight * j.flowtime();
  }
  return s;
}

// Every bulk instance with 1..max_jobs jobs and at most max_tasks tasks, job
// shapes taken as a multiset, phase durations from `durations`, each machine count.
inline std::vector<OracleInstance> enumerate_oracle_family(int max_jobs, int max_tasks, const std::vector<int>& durations,
                                                           const std::vector<int>& machine_counts,
                                                           const std::vector<double>& weights = {1.0}) {
  std::vector<OracleJob> shapes;
  for (double w : weights)
    for (int m = 1; m <= max_tasks; ++m)
      for (int r = 0; m + r <= max_tasks; ++r)
        for (int dm : durations)
          for (std::size_t k = 0; k < (r == 0 ? 1 : durations.size()); ++k)
            shapes.push_back({w, m, r, dm, r == 0 ? 1 : durations[k]});

  std::vector<OracleInstance> out;
  std::vector<std::size_t> pick;
  std::function<void(std::size_t, int)> rec = [&](std::size_t from, int tasks) {
    if (!pick.empty()) {
      for (int machines : machine_counts) {
        OracleInstance inst;
        inst.machines = machines;
        for (std::size_t i : pick) inst.jobs.push_back(shapes[i]);
        out.push_back(std::move(inst));
      }
    }
    if (static_cast<int>(pick.size()) == max_jobs) return;
    for (std::size_t i = from; i < shapes.size(); ++i) {
      const int t = shapes[i].map_count + shapes[i].reduce_count;
      if (tasks + t > max_tasks) continue;
      pick.push_back(i);
      rec(i, tasks + t);
      pick.pop_back();
    }
  };
  rec(0, 0);
  return out;
}

struct CompetitiveReport {
  double max_ratio = 0.0;
  std::size_t instances = 0;
  std::size_t within_bound = 0;  // ALG <= 2 OPT + job_count slots
  OracleInstance worst;
  double worst_alg = 0.0;
  double worst_opt = 0.0;

  bool all_within_bound() const noexcept { return within_bound == instances; }
};

/// Worst ratio ALG / OPT over the family, ALG being the worst weighted total
/// flowtime of `policy` over `seeds` runs.
inline CompetitiveReport empirical_competitive_ratio(std::span<const OracleInstance> family, Scheduler& policy,
                                                     int seeds = 20) {
  if (seeds < 1) throw ContractError("empirical_competitive_ratio: seeds must be >= 1");
  CompetitiveReport rep;
  for (const auto& inst : family) {
    const double opt = brute_force_optimal(inst);
    const auto workload = inst.to_workload();
    double alg = 0.0;
    for (int s = 0; s < seeds; ++s) {
      SimulationConfig cfg;
      cfg.machine_count = inst.machines;
      cfg.seed = static_cast<std::uint64_t>(s);
      cfg.record_utilization = false;
      alg = std::max(alg, weighted_total_flowtime(run(workload, policy, cfg)));
    }
    const double ratio = alg / opt;
    ++rep.instances;
    if (alg <= 2.0 * opt + static_cast<double>(inst.jobs.size()) + 1e-9) ++rep.within_bound;
    if (ratio > rep.max_ratio) {
      rep.max_ratio = ratio;
      rep.worst = inst;
      rep.worst_alg = alg;
      rep.worst_opt = opt;
    }
  }
  return rep;
}

// Flowtime bound checks ---------------------------------------------------------

struct WilsonInterval {
  double lo = 0.0;
  double hi = 1.0;
};

inline WilsonInterval wilson_interval(std::int64_t successes, std::int64_t trials, double z = 1.959963984540054) {
  if (trials <= 0) throw ContractError("wilson_interval: trials must be > 0");
  const double n = static_cast<double>(trials);
  const double p = static_cast<double>(successes) / n;
  const double z2 = z * z;
  const double centre = (p + z2 / (2 * n)) / (1 + z2 / n);
  const double half = z * std::sqrt(p * (1 - p) / n + z2 / (4 * n * n)) / (1 + z2 / n);
  return {std::max(0.0, centre - half), std::min(1.0, centre + half)};
}

struct JobBound {
  JobId job = 0;
  std::string name;
  double bound_s = 0.0;
  double claimed_min_probability = 0.0;
  std::int64_t satisfied = 0;
  std::int64_t replications = 0;
  double worst_excess_s = 0.0;  // max over runs of flowtime - bound (may be negative)
  WilsonInterval interval;

  double rate() const noexcept {
    return replications > 0 ? static_cast<double>(satisfied) / static_cast<double>(replications) : 0.0;
  }
  // The empirical rate is consistent with the claim when the claim lies at or
  // below the upper end of the rate's 95% Wilson interval.
  bool pass() const noexcept { return interval.hi >= claimed_min_probability; }
};

struct BoundReport {
  std::vector<JobBound> jobs;
  double risk = 0.0;
  int machines = 0;
  double slack_slots = 0.0;

  bool pass() const noexcept {
    return std::all_of(jobs.begin(), jobs.end(), [](const JobBound& j) { return j.pass(); });
  }
  double min_rate() const noexcept {
    double m = 1.0;
    for (const auto& j : jobs) m = std::min(m, j.rate());
    return m;
  }
};

inline void require_bulk(std::span<const JobSpec> workload, const char* who) {
  if (workload.empty()) throw ContractError(std::string(who) + ": workload is empty");
  for (const auto& j : workload)
    if (j.arrival_slot != 0) throw ContractError(std::string(who) + ": needs a bulk-arrival workload");
}

// Per-job bound E_r + r sd_r + f_s / M for a bulk workload.
inline std::vector<FlowtimeBound> offline_flowtime_bounds(std::span<const JobSpec> workload, int machines,
                                                          RiskFactor risk) {
  std::vector<WeightedWorkload> ww;
  for (const auto& j : workload) ww.push_back({j.weight, total_effective_workload(j, risk)});
  std::vector<FlowtimeBound> out;
  for (std::size_t i = 0; i < workload.size(); ++i) {
    const auto& j = workload[i];
    const double backlog = higher_priority_backlog(ww, i);
    out.push_back(theorem1_bound(j.reduce_dist.mean(), j.reduce_dist.sd(), backlog, machines, risk));
  }
  return out;
}

/// Runs the offline policy under seeds base_seed .. base_seed + runs - 1 and
/// counts, per job, the runs whose flowtime is within bound + slack_slots.
inline BoundReport evaluate_offline_bound(std::span<const JobSpec> workload, int machines, RiskFactor risk, int runs,
                                          double slack_slots = 2.0, std::uint64_t base_seed = 0) {
  require_bulk(workload, "evaluate_offline_bound");
  if (runs < 1) throw ContractError("evaluate_offline_bound: runs must be >= 1");
  const auto bounds = offline_flowtime_bounds(workload, machines, risk);
  BoundReport rep;
  rep.risk = risk.value();
  rep.machines = machines;
  rep.slack_slots = slack_slots;
  for (std::size_t i = 0; i < workload.size(); ++i) {
    JobBound jb;
    jb.job = static_cast<JobId>(i);
    jb.name = workload[i].name;
    jb.bound_s = bounds[i].bound;
    jb.claimed_min_probability = bounds[i].min_probability;
    jb.worst_excess_s = -std::numeric_limits<double>::infinity();
    rep.jobs.push_back(jb);
  }
  OfflinePolicy policy(risk);
  for (int k = 0; k < runs; ++k) {
    SimulationConfig cfg;
    cfg.machine_count = machines;
    cfg.seed = base_seed + static_cast<std::uint64_t>(k);
    cfg.record_utilization = false;
    const auto result = run(workload, policy, cfg);
    for (std::size_t i = 0; i < workload.size(); ++i) {
      auto& jb = rep.jobs[i];
      const double excess = result.jobs[i].flowtime() - jb.bound_s;
      jb.worst_excess_s = std::max(jb.worst_excess_s, excess);
      ++jb.replications;
      if (excess <= slack_slots + 1e-9) ++jb.satisfied;
    }
  }
  for (auto& jb : rep.jobs) jb.interval = wilson_interval(jb.satisfied, jb.replications);
  return rep;
}

/// Empirical check of the probabilistic per-job flowtime bound of the offline
/// policy: needs a bulk workload, r > 1 and at least 100 replications.
inline BoundReport check_theorem1(std::span<const JobSpec> workload, int machines, RiskFactor risk, int replications,
                                  double slack_slots = 2.0, std::uint64_t base_seed = 0) {
  require_bulk(workload, "check_theorem1");
  if (!risk.bound_meaningful()) throw ContractError("check_theorem1: risk factor must exceed 1");
  if (replications < 100) throw ContractError("check_theorem1: need at least 100 replications");
  return evaluate_offline_bound(workload, machines, risk, replications, slack_slots, base_seed);
}

}  // namespace clonesim
