#pragma once

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <numeric>
#include <queue>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "clonesim/core.hpp"
#include "clonesim/errors.hpp"
#include "clonesim/rng.hpp"

namespace clonesim {

struct SimulationConfig {
  int machine_count = 200;
  double speed = 1.0;  // seconds of work a copy completes per slot
  std::int64_t max_slots = 50'000'000;
  std::uint64_t seed = 0;
  bool cancel_siblings = true;
  bool audit = false;               // per-slot precedence / cancellation audit
  bool record_utilization = true;   // keep the per-slot M(t), R(t) trace

  void validate() const {
    if (machine_count < 1) throw ContractError("machine_count must be >= 1");
    if (!(speed >= 1.0)) throw ContractError("speed must be >= 1");
    if (max_slots < 0) throw ContractError("max_slots must be >= 0");
  }
};

// One running copy of one task on one machine.
struct CopyInstance {
  TaskRef task;
  int machine_id = 0;
  double sampled_workload = 0.0;
  double remaining_work = 0.0;
  std::int64_t started_slot = 0;
  bool blocked = false;  // reduce copy waiting for its job's map phase
  std::uint32_t copy_ordinal = 0;

  double work_done() const noexcept { return sampled_workload - remaining_work; }
};

struct TaskStatus {
  bool scheduled = false;
  bool done = false;
  std::uint32_t live_copies = 0;
  std::uint32_t copies_launched = 0;
};

struct JobState {
  JobId id = 0;
  const JobSpec* spec = nullptr;
  bool arrived = false;
  bool completed = false;
  std::int64_t completion_slot = -1;
  // Ascending task indices not yet launched.
  std::vector<std::uint32_t> unscheduled_maps;
  std::vector<std::uint32_t> unscheduled_reduces;
  std::vector<TaskStatus> maps;
  std::vector<TaskStatus> reduces;
  int maps_done = 0;
  int reduces_done = 0;
  int running_copies = 0;  // includes clones and blocked reduce copies

  bool map_phase_done() const noexcept { return maps_done == spec->map_count; }

  std::span<const std::uint32_t> unscheduled(Phase p) const noexcept {
    return p == Phase::map ? unscheduled_maps : unscheduled_reduces;
  }
  const std::vector<TaskStatus>& tasks(Phase p) const noexcept {
    return p == Phase::map ? maps : reduces;
  }
  int pending_map() const noexcept { return static_cast<int>(unscheduled_maps.size()); }
  int pending_reduce() const noexcept { return static_cast<int>(unscheduled_reduces.size()); }
  bool has_unscheduled() const noexcept { return pending_map() + pending_reduce() > 0; }
};

/// What a scheduler sees at the start of a slot. Only the engine mutates it.
class ClusterState {
 public:
  std::int64_t slot() const noexcept { return slot_; }
  int machine_count() const noexcept { return machine_count_; }
  double speed() const noexcept { return speed_; }
  std::uint64_t seed() const noexcept { return seed_; }

  std::span<const CopyInstance> running() const noexcept { return running_; }
  // Admitted jobs with unfinished tasks, ascending id.
  std::span<const JobId> alive_jobs() const noexcept { return alive_; }
  const JobState& job(JobId id) const { return jobs_.at(id); }
  std::size_t job_count() const noexcept { return jobs_.size(); }

  int free_machines() const noexcept {
    return machine_count_ - static_cast<int>(running_.size());
  }

  // Machines running copies of `id`, clones and blocked reduces included. Unknown job -> 0.
  int job_occupancy(JobId id) const noexcept {
    return id < jobs_.size() ? jobs_[id].running_copies : 0;
  }

 private:
  friend class Engine;

  std::int64_t slot_ = 0;
  int machine_count_ = 1;
  double speed_ = 1.0;
  std::uint64_t seed_ = 0;
  std::vector<CopyInstance> running_;
  std::vector<JobId> alive_;
  std::vector<JobState> jobs_;
};

inline int free_machines(const ClusterState& s) noexcept { return s.free_machines(); }
inline int job_occupancy(const ClusterState& s, JobId id) noexcept { return s.job_occupancy(id); }

struct LaunchDirective {
  TaskRef task;
  int copies = 1;
};

class Scheduler {
 public:
  virtual ~Scheduler() = default;
  virtual std::string name() const = 0;
  // Called once before the first slot of a run.
  virtual void reset(std::span<const JobSpec> /*workload*/, const SimulationConfig& /*config*/) {}
  virtual std::vector<LaunchDirective> decide(const ClusterState& state) = 0;
};

struct JobRecord {
  JobId job = 0;
  std::string name;
  std::int64_t arrival_slot = 0;
  std::int64_t completion_slot = -1;
  double weight = 1.0;

  bool completed() const noexcept { return completion_slot >= 0; }
  double flowtime() const noexcept { return static_cast<double>(completion_slot - arrival_slot); }
};

struct SlotUsage {
  std::int64_t slot = 0;
  int map_machines = 0;     // M(t)
  int reduce_machines = 0;  // R(t), blocked reduce copies included
};

struct AuditReport {
  std::int64_t capacity_violations = 0;
  std::int64_t precedence_violations = 0;
  std::int64_t cancellation_violations = 0;
  std::int64_t slots_audited = 0;

  std::int64_t total() const noexcept {
    return capacity_violations + precedence_violations + cancellation_violations;
  }
};

struct SimulationResult {
  std::vector<JobRecord> jobs;
  std::vector<SlotUsage> utilization;
  std::int64_t total_copies = 0;
  std::int64_t clone_copies = 0;  // copies beyond the first of each task
  std::int64_t slots_simulated = 0;
  bool truncated = false;
  AuditReport audit;
};

class TruncationError : public std::runtime_error {
 public:
  TruncationError(const std::string& what, SimulationResult partial)
      : std::runtime_error(what), partial_(std::move(partial)) {}

  const SimulationResult& partial() const noexcept { return partial_; }

 private:
  SimulationResult partial_;
};

/// Time-slotted cluster simulation.
///
/// Slot l runs: admit arrivals with arrival_slot == l; ask the scheduler for
/// launch directives; launch the copies (one sampled workload per copy);
/// advance every unblocked copy by `speed`; complete each task whose first
/// copy ran out of work and cancel its siblings; unblock reduce copies of jobs
/// whose map phase just ended; complete jobs whose last task ended. A task or
/// job that ends in slot l completes at time l + 1. Machines released in slot
/// l are reusable from slot l + 1.
class Engine {
 public:
  Engine(std::span<const JobSpec> workload, Scheduler& scheduler, SimulationConfig config)
      : workload_(workload), scheduler_(scheduler), config_(config) {
    if (workload_.empty()) throw ContractError("run: workload is empty");
    config_.validate();
    for (const auto& j : workload_) j.validate();
  }

  SimulationResult run() {
    init();
    scheduler_.reset(workload_, config_);

    std::size_t next_arrival = 0;
    std::int64_t slot = workload_[arrival_order_.front()].arrival_slot;
    std::size_t jobs_left = workload_.size();

    while (jobs_left > 0) {
      if (slot >= config_.max_slots) truncate(slot);
      state_.slot_ = slot;

      while (next_arrival < arrival_order_.size() &&
             workload_[arrival_order_[next_arrival]].arrival_slot <= slot) {
        admit(arrival_order_[next_arrival++]);
      }
      if (state_.alive_.empty() && state_.running_.empty()) {
        // Idle cluster: jump to the next arrival.
        slot = workload_[arrival_order_[next_arrival]].arrival_slot;
        continue;
      }

      const std::size_t launched = apply(scheduler_.decide(state_));
      if (state_.running_.empty() && launched == 0)
        throw ContractError("scheduler " + scheduler_.name() + " idled an empty cluster with pending work at slot " +
                            std::to_string(slot));

      jobs_left -= step();
      ++result_.slots_simulated;
      ++slot;
    }
    for (auto& rec : result_.jobs) rec.completion_slot = state_.jobs_[rec.job].completion_slot;
    return std::move(result_);
  }

 private:
  void init() {
    state_ = ClusterState{};
    state_.machine_count_ = config_.machine_count;
    state_.speed_ = config_.speed;
    state_.seed_ = config_.seed;
    state_.jobs_.resize(workload_.size());
    result_ = SimulationResult{};
    result_.jobs.reserve(workload_.size());
    for (std::size_t i = 0; i < workload_.size(); ++i) {
      auto& js = state_.jobs_[i];
      js.id = static_cast<JobId>(i);
      js.spec = &workload_[i];
      js.maps.resize(static_cast<std::size_t>(workload_[i].map_count));
      js.reduces.resize(static_cast<std::size_t>(workload_[i].reduce_count));
      result_.jobs.push_back(JobRecord{js.id, workload_[i].name, workload_[i].arrival_slot, -1,
                                       workload_[i].weight});
    }
    arrival_order_.resize(workload_.size());
    std::iota(arrival_order_.begin(), arrival_order_.end(), JobId{0});
    std::stable_sort(arrival_order_.begin(), arrival_order_.end(), [&](JobId a, JobId b) {
      return workload_[a].arrival_slot < workload_[b].arrival_slot;
    });
    free_ = {};
    for (int m = 0; m < config_.machine_count; ++m) free_.push(m);
  }

  void admit(JobId id) {
    auto& js = state_.jobs_[id];
    js.arrived = true;
    js.unscheduled_maps.resize(js.maps.size());
    std::iota(js.unscheduled_maps.begin(), js.unscheduled_maps.end(), 0U);
    js.unscheduled_reduces.resize(js.reduces.size());
    std::iota(js.unscheduled_reduces.begin(), js.unscheduled_reduces.end(), 0U);
    auto pos = std::lower_bound(state_.alive_.begin(), state_.alive_.end(), id);
    state_.alive_.insert(pos, id);
  }

  std::size_t apply(const std::vector<LaunchDirective>& directives) {
    long long requested = 0;
    for (const auto& d : directives) {
      if (d.copies < 1)
        throw ContractError("slot " + std::to_string(state_.slot_) + ": directive with copies < 1");
      requested += d.copies;
    }
    if (requested > state_.free_machines())
      throw ContractError("slot " + std::to_string(state_.slot_) + ": scheduler " + scheduler_.name() +
                          " requested " + std::to_string(requested) + " copies but only " +
                          std::to_string(state_.free_machines()) + " machines are free");

    for (const auto& d : directives) {
      if (d.task.job >= state_.jobs_.size())
        throw ContractError("directive names unknown job " + std::to_string(d.task.job));
      auto& js = state_.jobs_[d.task.job];
      if (!js.arrived) throw ContractError("directive for job that has not arrived");
      auto& tasks = d.task.phase == Phase::map ? js.maps : js.reduces;
      if (d.task.index >= tasks.size()) throw ContractError("directive task index out of range");
      auto& ts = tasks[d.task.index];
      if (ts.done) throw ContractError("directive for a completed task");
      if (!ts.scheduled) {
        ts.scheduled = true;
        auto& pending = d.task.phase == Phase::map ? js.unscheduled_maps : js.unscheduled_reduces;
        pending.erase(std::lower_bound(pending.begin(), pending.end(), d.task.index));
      }
      for (int c = 0; c < d.copies; ++c) launch(js, d.task, ts);
    }
    return static_cast<std::size_t>(requested);
  }

  void launch(JobState& js, const TaskRef& task, TaskStatus& ts) {
    const std::uint32_t ordinal = ts.copies_launched++;
    if (ordinal > 0) ++result_.clone_copies;
    ++result_.total_copies;
    ++ts.live_copies;
    ++js.running_copies;

    RngStream rng = RngStream::derive(config_.seed, "copy-workload",
                                      {task.job, static_cast<std::uint64_t>(task.phase), task.index,
                                       ordinal});
    const double work = js.spec->dist(task.phase).sample(rng);

    CopyInstance c;
    c.task = task;
    c.machine_id = free_.top();
    free_.pop();
    c.sampled_workload = work;
    c.remaining_work = work;
    c.started_slot = state_.slot_;
    c.blocked = task.phase == Phase::reduce && !js.map_phase_done();
    c.copy_ordinal = ordinal;
    state_.running_.push_back(c);
  }

  // Advances one slot; returns the number of jobs that completed.
  std::size_t step() {
    const double speed = config_.speed;
    auto& running = state_.running_;

    if (config_.record_utilization || config_.audit) {
      SlotUsage u{state_.slot_, 0, 0};
      for (const auto& c : running) (c.task.phase == Phase::map ? u.map_machines : u.reduce_machines)++;
      if (config_.audit) {
        ++result_.audit.slots_audited;
        if (u.map_machines + u.reduce_machines > config_.machine_count) ++result_.audit.capacity_violations;
      }
      if (config_.record_utilization) result_.utilization.push_back(u);
    } else if (static_cast<int>(running.size()) > config_.machine_count) {
      throw std::logic_error("capacity exceeded");
    }

    for (auto& c : running) {
      if (c.blocked) continue;
      if (config_.audit && c.task.phase == Phase::reduce && !state_.jobs_[c.task.job].map_phase_done())
        ++result_.audit.precedence_violations;
      c.remaining_work -= speed;
    }

    // First copy to run out of work completes the task.
    touched_jobs_.clear();
    for (auto& c : running) {
      if (c.remaining_work > kDoneTolerance) continue;
      auto& js = state_.jobs_[c.task.job];
      auto& ts = (c.task.phase == Phase::map ? js.maps : js.reduces)[c.task.index];
      if (ts.done) continue;
      ts.done = true;
      (c.task.phase == Phase::map ? js.maps_done : js.reduces_done)++;
      touched_jobs_.push_back(c.task.job);
    }

    // Release finished copies and, when cancelling, every sibling of a finished task.
    auto gone = [&](const CopyInstance& c) {
      const auto& js = state_.jobs_[c.task.job];
      const auto& ts = js.tasks(c.task.phase)[c.task.index];
      return c.remaining_work <= kDoneTolerance || (config_.cancel_siblings && ts.done);
    };
    for (const auto& c : running) {
      if (!gone(c)) continue;
      free_.push(c.machine_id);
      auto& js = state_.jobs_[c.task.job];
      --js.running_copies;
      --(c.task.phase == Phase::map ? js.maps : js.reduces)[c.task.index].live_copies;
    }
    running.erase(std::remove_if(running.begin(), running.end(), gone), running.end());

    if (config_.audit && config_.cancel_siblings) {
      for (const auto& c : running)
        if (state_.jobs_[c.task.job].tasks(c.task.phase)[c.task.index].done)
          ++result_.audit.cancellation_violations;
    }

    std::sort(touched_jobs_.begin(), touched_jobs_.end());
    touched_jobs_.erase(std::unique(touched_jobs_.begin(), touched_jobs_.end()), touched_jobs_.end());
    std::size_t finished = 0;
    for (JobId id : touched_jobs_) {
      auto& js = state_.jobs_[id];
      if (js.map_phase_done()) {
        for (auto& c : running)
          if (c.task.job == id) c.blocked = false;
      }
      if (js.maps_done + js.reduces_done == js.spec->task_count()) {
        js.completed = true;
        js.completion_slot = state_.slot_ + 1;
        state_.alive_.erase(std::lower_bound(state_.alive_.begin(), state_.alive_.end(), id));
        ++finished;
      }
    }
    return finished;
  }

  [[noreturn]] void truncate(std::int64_t slot) {
    for (auto& rec : result_.jobs) rec.completion_slot = state_.jobs_[rec.job].completion_slot;
    result_.truncated = true;
    throw TruncationError("horizon of " + std::to_string(config_.max_slots) + " slots exhausted at slot " +
                              std::to_string(slot) + " with " + std::to_string(state_.alive_.size()) +
                              " alive jobs",
                          std::move(result_));
  }

  static constexpr double kDoneTolerance = 1e-9;

  std::span<const JobSpec> workload_;
  Scheduler& scheduler_;
  SimulationConfig config_;
  ClusterState state_;
  SimulationResult result_;
  std::vector<JobId> arrival_order_;
  std::vector<JobId> touched_jobs_;
  std::priority_queue<int, std::vector<int>, std::greater<>> free_;
};

inline SimulationResult run(std::span<const JobSpec> workload, Scheduler& scheduler,
                            const SimulationConfig& config) {
  return Engine(workload, scheduler, config).run();
}

}  // namespace clonesim
