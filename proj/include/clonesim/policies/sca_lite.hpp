#pragma once

#include <algorithm>
#include <cstddef>
#include <map>
#include <queue>
#include <string>
#include <vector>

#include "clonesim/core.hpp"
#include "clonesim/engine.hpp"
#include "clonesim/policies/shares.hpp"
#include "clonesim/policies/srptms.hpp"
#include "clonesim/stochastic.hpp"

namespace clonesim {

/// Greedy stand-in for a convex cloning program.
///
/// Jobs with launchable tasks are visited in descending w_i/U_i(l). Free
/// machines first give every launchable task one copy, job by job. Any
/// machines left are handed out one at a time as extra copies to the task
/// whose expected duration drops the most, E/s(k) - E/s(k+1). Because s is
/// concave these marginal gains shrink with k, so the greedy allocation is
/// optimal for the separable relaxation sum_j E_j / s_j(k_j) under a machine
/// budget. Tasks whose speedup is flat (zero variance) never get clones.
/// Ties go to the earlier task in launch order.
class ScaLitePolicy : public Scheduler {
 public:
  explicit ScaLitePolicy(PolicyParams params) : params_(params) { params_.validate(); }

  std::string name() const override { return "sca-lite"; }

  void reset(std::span<const JobSpec> workload, const SimulationConfig& /*config*/) override {
    map_speedup_.clear();
    reduce_speedup_.clear();
    std::map<double, SpeedupFunction> lognormal;
    auto lookup = [&](const DurationDistribution& d) {
      const auto* ln = std::get_if<LogNormal>(&d.variant());
      if (!ln) return speedup_for(d);
      auto it = lognormal.find(ln->log_sd);
      if (it == lognormal.end()) it = lognormal.emplace(ln->log_sd, speedup_for(d)).first;
      return it->second;
    };
    for (const auto& j : workload) {
      map_speedup_.push_back(lookup(j.map_dist));
      reduce_speedup_.push_back(lookup(j.reduce_dist));
    }
  }

  std::vector<LaunchDirective> decide(const ClusterState& state) override {
    return sca_lite_decide(state);
  }

  std::vector<LaunchDirective> sca_lite_decide(const ClusterState& state) const {
    std::vector<LaunchDirective> out;
    int free = state.free_machines();
    if (free == 0) return out;

    auto alive = alive_with_unscheduled(state, RiskFactor{params_.risk_factor});
    std::vector<PriorityKey> order;
    for (const auto& a : alive) order.push_back({a.weight / a.remaining, a.job});
    std::sort(order.begin(), order.end(), runs_before);

    for (const auto& key : order) {
      if (free == 0) break;
      const auto [phase, tasks] = detail::launchable_tasks(state.job(key.job));
      for (std::uint32_t t : tasks) {
        if (free == 0) break;
        out.push_back({{key.job, phase, t}, 1});
        --free;
      }
    }
    if (free == 0 || out.empty()) return out;

    struct Gain {
      double delta;
      std::size_t slot;  // index into out
    };
    auto cmp = [](const Gain& a, const Gain& b) {
      return a.delta != b.delta ? a.delta < b.delta : a.slot > b.slot;
    };
    std::priority_queue<Gain, std::vector<Gain>, decltype(cmp)> heap(cmp);
    auto gain = [&](std::size_t i) {
      const auto& d = out[i];
      const auto& spec = *state.job(d.task.job).spec;
      const double mean = spec.dist(d.task.phase).mean();
      const auto& s = speedup_of(d.task);
      return mean / s(d.copies) - mean / s(d.copies + 1);
    };
    for (std::size_t i = 0; i < out.size(); ++i) heap.push({gain(i), i});
    while (free > 0 && !heap.empty()) {
      const Gain g = heap.top();
      heap.pop();
      if (!(g.delta > kMinGain)) break;
      ++out[g.slot].copies;
      --free;
      heap.push({gain(g.slot), g.slot});
    }
    return out;
  }

 private:
  static constexpr double kMinGain = 1e-12;

  const SpeedupFunction& speedup_of(const TaskRef& t) const {
    return t.phase == Phase::map ? map_speedup_.at(t.job) : reduce_speedup_.at(t.job);
  }

  PolicyParams params_;
  std::vector<SpeedupFunction> map_speedup_;
  std::vector<SpeedupFunction> reduce_speedup_;
};

}  // namespace clonesim
