#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "clonesim/errors.hpp"
#include "clonesim/stochastic.hpp"

namespace clonesim {

// Position of a job in its workload. Equal-priority ties break on ascending JobId.
using JobId = std::uint32_t;

enum class Phase : std::uint8_t { map, reduce };

inline const char* to_string(Phase p) { return p == Phase::map ? "map" : "reduce"; }

struct JobSpec {
  std::string name;  // opaque identifier from the trace
  std::int64_t arrival_slot = 0;
  double weight = 1.0;
  int map_count = 1;
  int reduce_count = 0;
  DurationDistribution map_dist = Deterministic{1.0};
  DurationDistribution reduce_dist = Deterministic{1.0};

  int task_count() const noexcept { return map_count + reduce_count; }

  const DurationDistribution& dist(Phase p) const noexcept {
    return p == Phase::map ? map_dist : reduce_dist;
  }

  void validate() const {
    if (arrival_slot < 0) throw ValidationError("job " + name + ": negative arrival slot");
    if (!(weight > 0.0) || !std::isfinite(weight))
      throw ValidationError("job " + name + ": weight must be positive");
    if (map_count < 1) throw ValidationError("job " + name + ": map_count must be >= 1");
    if (reduce_count < 0) throw ValidationError("job " + name + ": negative reduce_count");
    if (!map_dist.has_finite_moments() || !reduce_dist.has_finite_moments())
      throw ValidationError("job " + name + ": task distributions need finite mean and sd");
  }
};

struct TaskRef {
  JobId job = 0;
  Phase phase = Phase::map;
  std::uint32_t index = 0;

  friend bool operator==(const TaskRef&, const TaskRef&) = default;
  friend auto operator<=>(const TaskRef&, const TaskRef&) = default;
};

// Standard-deviation multiplier used in the effective workload.
class RiskFactor {
 public:
  RiskFactor() = default;
  explicit RiskFactor(double r) : r_(r) {
    if (!(r >= 0.0) || !std::isfinite(r)) throw ContractError("risk factor must be finite and >= 0");
  }

  double value() const noexcept { return r_; }

  // The probabilistic flowtime guarantee only says something for r > 1.
  bool bound_meaningful() const noexcept { return r_ > 1.0; }

 private:
  double r_ = 0.0;
};

/// Mean-plus-risk workload of the given numbers of pending tasks:
/// pending_map * (E_m + r sd_m) + pending_reduce * (E_r + r sd_r).
/// With the full task counts this is the job's total effective workload; with
/// the unscheduled counts of a live job it is its remaining effective workload.
inline double effective_workload(double mean_map, double sd_map, long long pending_map,
                                 double mean_reduce, double sd_reduce, long long pending_reduce,
                                 RiskFactor risk) {
  if (mean_map < 0 || sd_map < 0 || mean_reduce < 0 || sd_reduce < 0 || pending_map < 0 ||
      pending_reduce < 0)
    throw ContractError("effective_workload: negative moment or count");
  const double r = risk.value();
  return static_cast<double>(pending_map) * (mean_map + r * sd_map) +
         static_cast<double>(pending_reduce) * (mean_reduce + r * sd_reduce);
}

inline double effective_workload(const JobSpec& job, long long pending_map, long long pending_reduce,
                                 RiskFactor risk) {
  return effective_workload(job.map_dist.mean(), job.map_dist.sd(), pending_map,
                            job.reduce_dist.mean(), job.reduce_dist.sd(), pending_reduce, risk);
}

inline double total_effective_workload(const JobSpec& job, RiskFactor risk) {
  return effective_workload(job, job.map_count, job.reduce_count, risk);
}

inline double priority(double weight, double effective_workload) {
  if (effective_workload == 0.0)
    throw CompletedJobError("priority: job has no remaining effective workload");
  if (!(effective_workload > 0.0) || !(weight > 0.0))
    throw ContractError("priority: weight and workload must be positive");
  return weight / effective_workload;
}

struct PriorityKey {
  double value;
  JobId job;
};

// Strict total order: larger weight/workload first, then ascending job id.
inline bool runs_before(const PriorityKey& a, const PriorityKey& b) noexcept {
  if (a.value != b.value) return a.value > b.value;
  return a.job < b.job;
}

struct WeightedWorkload {
  double weight;
  double workload;
};

/// Sum of effective workloads of every job whose priority is at least the
/// target's, the target included. Exact ties count on both sides.
inline double higher_priority_backlog(std::span<const WeightedWorkload> jobs, std::size_t target) {
  if (target >= jobs.size()) throw std::out_of_range("higher_priority_backlog: target out of range");
  for (const auto& j : jobs)
    if (!(j.workload > 0.0)) throw ContractError("higher_priority_backlog: workloads must be > 0");
  const double p = priority(jobs[target].weight, jobs[target].workload);
  double sum = 0.0;
  for (const auto& j : jobs)
    if (priority(j.weight, j.workload) >= p) sum += j.workload;
  return sum;
}

struct FlowtimeBound {
  double bound = 0.0;
  double min_probability = 0.0;
  bool probability_meaningful = false;  // false when r <= 1; probability is then 0
};

/// Per-job flowtime guarantee of the offline priority schedule:
/// flowtime <= E_r + r sd_r + backlog / M with probability at least
/// 1 + 1/r^4 - 2/r^2 = ((r^2 - 1) / r^2)^2, clamped to [0, 1].
inline FlowtimeBound theorem1_bound(double mean_reduce, double sd_reduce, double backlog,
                                    int machines, RiskFactor risk) {
  if (machines < 1) throw ContractError("theorem1_bound: machines must be >= 1");
  if (mean_reduce < 0 || sd_reduce < 0 || backlog < 0)
    throw ContractError("theorem1_bound: negative input");
  const double r = risk.value();
  FlowtimeBound out;
  out.bound = mean_reduce + r * sd_reduce + backlog / machines;
  out.probability_meaningful = risk.bound_meaningful();
  if (out.probability_meaningful) {
    const double r2 = r * r;
    out.min_probability = std::clamp(1.0 + 1.0 / (r2 * r2) - 2.0 / r2, 0.0, 1.0);
  }
  return out;
}

}  // namespace clonesim
