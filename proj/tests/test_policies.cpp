#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <functional>
#include <map>
#include <numeric>
#include <vector>

#include "clonesim/engine.hpp"
#include "clonesim/policies.hpp"
#include "clonesim/workload.hpp"

using namespace clonesim;

namespace {

class ScriptScheduler : public Scheduler {
 public:
  using Fn = std::function<std::vector<LaunchDirective>(const ClusterState&)>;
  explicit ScriptScheduler(Fn fn, std::function<void(std::span<const JobSpec>)> on_reset = {})
      : fn_(std::move(fn)), on_reset_(std::move(on_reset)) {}
  std::string name() const override { return "script"; }
  void reset(std::span<const JobSpec> w, const SimulationConfig&) override {
    if (on_reset_) on_reset_(w);
  }
  std::vector<LaunchDirective> decide(const ClusterState& s) override { return fn_(s); }

 private:
  Fn fn_;
  std::function<void(std::span<const JobSpec>)> on_reset_;
};

// Records every directive list a wrapped policy returns.
class Recorder : public Scheduler {
 public:
  explicit Recorder(Scheduler& inner) : inner_(inner) {}
  std::string name() const override { return inner_.name(); }
  void reset(std::span<const JobSpec> w, const SimulationConfig& c) override { inner_.reset(w, c); }
  std::vector<LaunchDirective> decide(const ClusterState& s) override {
    auto d = inner_.decide(s);
    slots.push_back(s.slot());
    free_before.push_back(s.free_machines());
    int unscheduled = 0;
    for (JobId id : s.alive_jobs()) unscheduled += s.job(id).pending_map() + s.job(id).pending_reduce();
    unscheduled_tasks.push_back(unscheduled);
    log.push_back(d);
    return d;
  }
  std::vector<std::int64_t> slots;
  std::vector<int> free_before;
  std::vector<int> unscheduled_tasks;
  std::vector<std::vector<LaunchDirective>> log;

 private:
  Scheduler& inner_;
};

JobSpec det_job(double weight, int maps, double map_s, int reduces = 0, double reduce_s = 1.0,
                std::int64_t arrival = 0) {
  JobSpec j;
  j.name = "j";
  j.weight = weight;
  j.arrival_slot = arrival;
  j.map_count = maps;
  j.reduce_count = reduces;
  j.map_dist = Deterministic{map_s};
  j.reduce_dist = Deterministic{reduce_s};
  return j;
}

SimulationConfig config(int machines, std::uint64_t seed = 0) {
  SimulationConfig c;
  c.machine_count = machines;
  c.seed = seed;
  c.audit = true;
  return c;
}

int copies_for(const std::vector<LaunchDirective>& d, JobId job) {
  int n = 0;
  for (const auto& x : d)
    if (x.task.job == job) n += x.copies;
  return n;
}

// Job state with `maps` unscheduled maps and nothing launched.
JobState fresh_job(const JobSpec& spec, JobId id = 0) {
  JobState js;
  js.id = id;
  js.spec = &spec;
  js.arrived = true;
  js.maps.resize(static_cast<std::size_t>(spec.map_count));
  js.reduces.resize(static_cast<std::size_t>(spec.reduce_count));
  js.unscheduled_maps.resize(js.maps.size());
  std::iota(js.unscheduled_maps.begin(), js.unscheduled_maps.end(), 0U);
  js.unscheduled_reduces.resize(js.reduces.size());
  std::iota(js.unscheduled_reduces.begin(), js.unscheduled_reduces.end(), 0U);
  return js;
}

}  // namespace

// Shares ---------------------------------------------------------------------

TEST(Shares, WorkedExample) {
  std::vector<AliveJob> alive{{0, 1, 1}, {1, 1, 2}, {2, 2, 20}};
  const auto s = srptms_shares(alive, 0.5, 10);
  ASSERT_EQ(s.entries.size(), 3u);
  EXPECT_EQ(s.entries[0].job, 0u);
  EXPECT_DOUBLE_EQ(s.total_weight, 4.0);
  EXPECT_DOUBLE_EQ(s.entries[0].entitlement, 5.0);
  EXPECT_DOUBLE_EQ(s.entries[1].entitlement, 5.0);
  EXPECT_DOUBLE_EQ(s.entries[2].entitlement, 0.0);
  EXPECT_EQ(s.rounded_sum(), 10);
}

TEST(Shares, FairSpecialization) {
  std::vector<AliveJob> alive{{0, 3, 5}, {1, 7, 1}, {2, 1, 100}};
  const auto s = srptms_shares(alive, 1.0, 17);
  for (const auto& e : s.entries) EXPECT_EQ(e.entitlement, e.weight * 17 / 11.0);
}

TEST(Shares, SingleJobGetsEverything) {
  for (double eps : {0.1, 0.6, 1.0}) {
    std::vector<AliveJob> alive{{4, 3, 9}};
    const auto s = srptms_shares(alive, eps, 23);
    EXPECT_NEAR(s.entries[0].entitlement, 23.0, 1e-12);
    EXPECT_EQ(s.entries[0].rounded, 23);
  }
}

TEST(Shares, Errors) {
  std::vector<AliveJob> none;
  EXPECT_THROW(srptms_shares(none, 0.5, 10), ContractError);
  std::vector<AliveJob> zero{{0, 1, 0}};
  EXPECT_THROW(srptms_shares(zero, 0.5, 10), ContractError);
  std::vector<AliveJob> ok{{0, 1, 1}};
  EXPECT_THROW(srptms_shares(ok, 0.0, 10), ContractError);
  EXPECT_THROW(srptms_shares(ok, 1.5, 10), ContractError);
}

// Property: entitlements sum to M, are non-negative, vanish below the frontier;
// rounded shares sum to M exactly.
TEST(Shares, ConservationProperty) {
  RngStream rng(2024);
  for (int trial = 0; trial < 500; ++trial) {
    const int n = 1 + static_cast<int>(rng.below(60));
    const int machines = 1 + static_cast<int>(rng.below(400));
    const double eps = 1.0 - rng.uniform();
    std::vector<AliveJob> alive;
    for (int i = 0; i < n; ++i)
      alive.push_back({static_cast<JobId>(i), 1.0 + static_cast<double>(rng.below(12)), 1 + 1000 * rng.uniform()});
    const auto s = srptms_shares(alive, eps, machines);
    EXPECT_NEAR(s.entitlement_sum(), machines, 1e-9 * machines);
    EXPECT_EQ(s.rounded_sum(), machines);
    const double frontier = (1.0 - eps) * s.total_weight;
    for (const auto& e : s.entries) {
      EXPECT_GE(e.entitlement, 0.0);
      EXPECT_GE(e.rounded, 0);
      EXPECT_LE(std::abs(e.rounded - e.entitlement), 1.0 + 1e-9);
      if (e.lower_weight < frontier) { EXPECT_EQ(e.entitlement, 0.0); }
    }
    for (std::size_t i = 1; i < s.entries.size(); ++i)
      EXPECT_TRUE(runs_before({s.entries[i - 1].priority, s.entries[i - 1].job},
                              {s.entries[i].priority, s.entries[i].job}));
  }
}

TEST(Shares, TinyEpsilonIsSrpt) {
  std::vector<AliveJob> alive{{0, 2, 50}, {1, 3, 10}, {2, 1, 40}, {3, 5, 200}};
  const auto s = srptms_shares(alive, 1e-6, 100);
  EXPECT_EQ(s.entries[0].job, 1u);
  EXPECT_NEAR(s.entries[0].entitlement, 100.0, 1e-6);
  for (std::size_t i = 1; i < s.entries.size(); ++i) EXPECT_EQ(s.entries[i].entitlement, 0.0);
}

// Task cloning -----------------------------------------------------------------

TEST(TaskCloning, ExactFit) {
  const auto spec = det_job(1, 4, 5);
  const auto js = fresh_job(spec);
  RngStream rng(1);
  const auto a = task_cloning_assign(js, 4, rng);
  EXPECT_EQ(a.consumed, 4);
  ASSERT_EQ(a.launches.size(), 4u);
  for (const auto& d : a.launches) EXPECT_EQ(d.copies, 1);
}

TEST(TaskCloning, SurplusSplitsEvenly) {
  const auto spec = det_job(1, 2, 5);
  const auto js = fresh_job(spec);
  RngStream rng(2);
  const auto a = task_cloning_assign(js, 5, rng);
  EXPECT_EQ(a.consumed, 5);
  ASSERT_EQ(a.launches.size(), 2u);
  std::vector<int> c{a.launches[0].copies, a.launches[1].copies};
  std::sort(c.begin(), c.end());
  EXPECT_EQ(c, (std::vector<int>{2, 3}));
}

TEST(TaskCloning, FewerMachinesThanTasks) {
  const auto spec = det_job(1, 10, 5);
  const auto js = fresh_job(spec);
  RngStream rng(3);
  const auto a = task_cloning_assign(js, 3, rng);
  EXPECT_EQ(a.consumed, 3);
  ASSERT_EQ(a.launches.size(), 3u);
  for (std::size_t i = 1; i < a.launches.size(); ++i) EXPECT_LT(a.launches[i - 1].task.index, a.launches[i].task.index);
}

TEST(TaskCloning, ReducesOnlyAfterMapPhase) {
  auto spec = det_job(1, 2, 5, 3, 5);
  auto js = fresh_job(spec);
  js.unscheduled_maps.clear();
  js.maps[0].scheduled = js.maps[1].scheduled = true;
  RngStream rng(4);
  EXPECT_TRUE(task_cloning_assign(js, 4, rng).launches.empty());
  js.maps_done = 2;
  const auto a = task_cloning_assign(js, 4, rng);
  EXPECT_EQ(a.consumed, 4);
  for (const auto& d : a.launches) EXPECT_EQ(d.task.phase, Phase::reduce);
}

TEST(TaskCloning, NoClonesWhenDisabled) {
  const auto spec = det_job(1, 2, 5);
  const auto js = fresh_job(spec);
  RngStream rng(5);
  const auto a = task_cloning_assign(js, 7, rng, false);
  EXPECT_EQ(a.consumed, 2);
  EXPECT_THROW(task_cloning_assign(js, 0, rng), ContractError);
}

// Property: copies sum to x and differ by at most one across tasks.
TEST(TaskCloning, BalancedProperty) {
  RngStream rng(77);
  for (int trial = 0; trial < 500; ++trial) {
    const int c = 1 + static_cast<int>(rng.below(30));
    const int x = 1 + static_cast<int>(rng.below(100));
    const auto spec = det_job(1, c, 5);
    const auto js = fresh_job(spec);
    const auto a = task_cloning_assign(js, x, rng);
    int sum = 0, lo = 1 << 30, hi = 0;
    for (const auto& d : a.launches) sum += d.copies, lo = std::min(lo, d.copies), hi = std::max(hi, d.copies);
    EXPECT_EQ(sum, x);
    EXPECT_EQ(a.consumed, x);
    if (x >= c) { EXPECT_LE(hi - lo, 1); }
    std::vector<std::uint32_t> idx;
    for (const auto& d : a.launches) idx.push_back(d.task.index);
    std::sort(idx.begin(), idx.end());
    EXPECT_EQ(std::adjacent_find(idx.begin(), idx.end()), idx.end());
  }
}

// SRPTMS decisions --------------------------------------------------------------

TEST(SrptmsDecide, EntitledJobsGetTheirShares) {
  std::vector<JobSpec> w{det_job(1, 6, 1), det_job(1, 6, 2), det_job(2, 6, 10)};
  PolicyParams p;
  p.epsilon = 0.5;
  p.risk_factor = 0;
  SrptmsPolicy policy(p);
  Recorder rec(policy);
  run(w, rec, config(10));
  ASSERT_FALSE(rec.log.empty());
  const auto& first = rec.log[0];
  EXPECT_EQ(copies_for(first, 0), 5);
  EXPECT_EQ(copies_for(first, 1), 5);
  EXPECT_EQ(copies_for(first, 2), 0);
  for (const auto& d : first) EXPECT_EQ(d.copies, 1);
}

TEST(SrptmsDecide, NoPreemptionAboveShare) {
  // Job 0 holds 6 machines when job 1 arrives; with weights 2 and 3 its share is 4.
  std::vector<JobSpec> w{det_job(2, 10, 100), det_job(3, 10, 100, 0, 1.0, 1)};
  PolicyParams p;
  p.epsilon = 1.0;
  p.risk_factor = 0;
  std::vector<LaunchDirective> at_one;
  int occ_two = -1;
  ScriptScheduler s([&](const ClusterState& st) -> std::vector<LaunchDirective> {
    if (st.slot() == 0) {
      std::vector<LaunchDirective> out;
      for (std::uint32_t t = 0; t < 6; ++t) out.push_back({{0, Phase::map, t}, 1});
      return out;
    }
    if (st.slot() == 1) {
      at_one = srptms_decide(st, p, false);
      return at_one;
    }
    if (st.slot() == 2) occ_two = st.job_occupancy(0);
    return srptms_decide(st, p, false);
  });
  run(w, s, config(10));
  EXPECT_EQ(copies_for(at_one, 0), 0);
  EXPECT_EQ(copies_for(at_one, 1), 4);
  EXPECT_EQ(occ_two, 6);
}

TEST(SrptmsDecide, ClonesSmallJobsWhenMachinesAreSpare) {
  JobSpec j;
  j.map_count = 2;
  j.map_dist = Pareto{2.5, 10.0};
  std::vector<JobSpec> w{j};
  SrptmsPolicy policy(PolicyParams{});
  Recorder rec(policy);
  const auto r = run(w, rec, config(10));
  EXPECT_EQ(copies_for(rec.log[0], 0), 10);
  EXPECT_EQ(r.clone_copies, 8);
}

// Property: non-preemption and capacity hold for every policy on random workloads.
TEST(SrptmsDecide, NeverExceedsFreeMachines) {
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    SyntheticConfig sc;
    sc.job_count = 25;
    sc.seed = seed;
    sc.arrival_rate = 0.02;
    sc.mean_task_duration = 40;
    const auto w = gen_synthetic(sc);
    for (const auto& name : policy_names()) {
      if (name == "offline") continue;
      auto p = make_policy(name, PolicyParams{});
      Recorder rec(*p);
      const auto r = run(w, rec, config(15, seed));
      for (std::size_t i = 0; i < rec.log.size(); ++i) {
        int n = 0;
        for (const auto& d : rec.log[i]) n += d.copies;
        ASSERT_LE(n, rec.free_before[i]) << name;
      }
      EXPECT_EQ(r.audit.total(), 0);
    }
  }
}

TEST(SrptmsDecide, NoAliveJobsNoDirectives) {
  // Probe a slot where every task is already running.
  std::vector<JobSpec> w{det_job(1, 2, 5)};
  std::vector<LaunchDirective> probe{{{0, Phase::map, 0}, 1}};
  ScriptScheduler s([&](const ClusterState& st) -> std::vector<LaunchDirective> {
    if (st.slot() == 0) return {{{0, Phase::map, 0}, 1}, {{0, Phase::map, 1}, 1}};
    if (st.slot() == 1) probe = srptms_decide(st, PolicyParams{});
    return {};
  });
  run(w, s, config(4));
  EXPECT_TRUE(probe.empty());
}

// Offline -------------------------------------------------------------------------

TEST(Offline, SmallerWorkloadRunsFirst) {
  std::vector<JobSpec> w{det_job(1, 20, 1), det_job(1, 10, 1)};
  OfflinePolicy policy(RiskFactor{3});
  Recorder rec(policy);
  run(w, rec, config(1));
  bool seen_big = false;
  for (const auto& d : rec.log)
    for (const auto& x : d) {
      if (x.task.job == 0) seen_big = true;
      if (x.task.job == 1) { EXPECT_FALSE(seen_big); }
    }
  EXPECT_EQ(policy.order()[0], 1u);
}

TEST(Offline, LaunchesBlockedReduces) {
  std::vector<JobSpec> w{det_job(1, 2, 3, 1, 2)};
  OfflinePolicy policy(RiskFactor{3});
  Recorder rec(policy);
  const auto r = run(w, rec, config(3));
  ASSERT_EQ(rec.log[0].size(), 3u);
  EXPECT_EQ(rec.log[0][2].task.phase, Phase::reduce);
  EXPECT_EQ(r.jobs[0].flowtime(), 5.0);
  EXPECT_EQ(r.audit.total(), 0);
}

TEST(Offline, ZeroFreeMachinesEmpty) {
  std::vector<JobSpec> w{det_job(1, 4, 3)};
  std::vector<LaunchDirective> probe{{{0, Phase::map, 0}, 1}};
  OfflinePolicy inner(RiskFactor{3});
  ScriptScheduler s(
      [&](const ClusterState& st) -> std::vector<LaunchDirective> {
        if (st.slot() == 1) {
          RngStream rng(1);
          probe = offline_bulk_schedule(st, inner.order(), rng);
          return {};
        }
        return inner.decide(st);
      },
      [&](std::span<const JobSpec> wl) { inner.reset(wl, SimulationConfig{}); });
  run(w, s, config(2));
  EXPECT_TRUE(probe.empty());
}

TEST(Offline, RejectsOnlineArrivals) {
  std::vector<JobSpec> w{det_job(1, 1, 1), det_job(1, 1, 1, 0, 1, 5)};
  OfflinePolicy policy(RiskFactor{3});
  EXPECT_THROW(run(w, policy, config(2)), ContractError);
}

// Property: an idle machine after a decision means no job has unscheduled tasks.
TEST(Offline, WorkConserving) {
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    SyntheticConfig sc;
    sc.job_count = 20;
    sc.arrivals = ArrivalProcess::bulk;
    sc.mean_task_duration = 30;
    sc.seed = seed;
    const auto w = gen_synthetic(sc);
    OfflinePolicy policy(RiskFactor{3});
    Recorder rec(policy);
    run(w, rec, config(10, seed));
    for (std::size_t i = 0; i < rec.log.size(); ++i) {
      int n = 0;
      for (const auto& d : rec.log[i]) n += d.copies;
      if (n < rec.free_before[i]) { EXPECT_EQ(n, rec.unscheduled_tasks[i]); }
    }
  }
}

// Mantri ---------------------------------------------------------------------------

TEST(Mantri, DeterministicNeverBacksUp) {
  for (double e : {0.0, 1.0, 2.4, 5.0, 9.0}) EXPECT_EQ(backup_win_probability(Deterministic{5.0}, e, 2.0), 0.0);
  std::vector<JobSpec> w{det_job(1, 30, 7, 10, 3), det_job(2, 5, 40)};
  MantriPolicy policy(PolicyParams{});
  const auto r = run(w, policy, config(50));
  EXPECT_EQ(r.clone_copies, 0);
}

TEST(Mantri, HeavyTailStragglerGetsBackup) {
  const DurationDistribution d = Pareto{2.0, 10.0};
  const double p = backup_win_probability(d, 100.0, 2.0);
  // Independent Monte Carlo: T | T > 100 is Pareto(2, 100); the fresh copy is Pareto(2, 10).
  RngStream rng(31337);
  int wins = 0;
  const int n = 100'000;
  for (int i = 0; i < n; ++i) {
    const double total = 100.0 * std::pow(rng.uniform_open0(), -0.5);
    const double fresh = 10.0 * std::pow(rng.uniform_open0(), -0.5);
    if (total - 100.0 > 2.0 * fresh) ++wins;
  }
  EXPECT_NEAR(p, static_cast<double>(wins) / n, 0.01);
  EXPECT_GT(p, 0.25);
}

TEST(Mantri, FreshCopyRarelyWorthBackingUp) {
  EXPECT_LT(backup_win_probability(Pareto{2.5, 10.0}, 0.0, 2.0), 0.25);
}

TEST(Mantri, ThresholdCacheAgreesWithDirectProbability) {
  const double delta = 0.25;
  BackupProbabilityCache cache(2.0, delta);
  for (double alpha : {2.2, 2.5, 3.0}) {
    const DurationDistribution d = Pareto{alpha, 7.0};
    for (double e = 0.0; e < 400.0; e += 1.7) {
      const double direct = backup_win_probability(d, e, 2.0);
      if (std::abs(direct - delta) < 1e-6) continue;
      EXPECT_EQ(cache(d, e) > delta, direct > delta) << "alpha " << alpha << " elapsed " << e;
    }
  }
}

TEST(Mantri, LogNormalProbabilityMatchesMonteCarlo) {
  const DurationDistribution d = LogNormal{2.0, 1.0};
  const double e = 30.0;
  const double p = backup_win_probability(d, e, 2.0, 40'000);
  RngStream rng(8);
  int wins = 0, trials = 0;
  while (trials < 40'000) {
    const double total = d.sample(rng);
    if (total <= e) continue;
    ++trials;
    if (total - e > 2.0 * d.sample(rng)) ++wins;
  }
  EXPECT_NEAR(p, static_cast<double>(wins) / trials, 0.015);
}

TEST(Mantri, NoFreeMachinesNoBackups) {
  JobSpec j;
  j.map_count = 4;
  j.map_dist = Pareto{2.5, 10.0};
  std::vector<JobSpec> w{j};
  BackupProbabilityCache cache(2.0, 0.25);
  bool probed = false;
  ScriptScheduler s([&](const ClusterState& st) -> std::vector<LaunchDirective> {
    if (st.slot() == 0) return {{{0, Phase::map, 0}, 1}, {{0, Phase::map, 1}, 1}, {{0, Phase::map, 2}, 1}, {{0, Phase::map, 3}, 1}};
    if (!probed) {
      EXPECT_TRUE(mantri_backups(st, 0, PolicyParams{}, cache).empty());
      probed = true;
    }
    return {};
  });
  run(w, s, config(4));
  EXPECT_TRUE(probed);
}

TEST(Mantri, AtMostOneBackupPerTask) {
  SyntheticConfig sc;
  sc.job_count = 20;
  sc.arrival_rate = 0.002;
  sc.mean_task_duration = 60;
  const auto w = gen_synthetic(sc);
  MantriPolicy policy(PolicyParams{});
  Recorder rec(policy);
  run(w, rec, config(200, 3));
  std::map<TaskRef, int> launched;
  for (const auto& d : rec.log)
    for (const auto& x : d) launched[x.task] += x.copies;
  int backups = 0;
  for (const auto& [t, n] : launched) {
    EXPECT_LE(n, 2);
    backups += n - 1;
  }
  EXPECT_GT(backups, 0);
}

// SCA-lite --------------------------------------------------------------------------

TEST(ScaLite, SplitsSurplusByMarginalGain) {
  JobSpec j;
  j.map_count = 2;
  j.map_dist = Pareto{2.5, 10.0};
  std::vector<JobSpec> w{j};
  ScaLitePolicy policy(PolicyParams{});
  Recorder rec(policy);
  run(w, rec, config(4));
  ASSERT_EQ(rec.log[0].size(), 2u);
  EXPECT_EQ(rec.log[0][0].copies, 2);
  EXPECT_EQ(rec.log[0][1].copies, 2);
}

TEST(ScaLite, NoSurplusNoClones) {
  JobSpec j;
  j.map_count = 3;
  j.map_dist = Pareto{2.5, 10.0};
  std::vector<JobSpec> w{j};
  ScaLitePolicy policy(PolicyParams{});
  Recorder rec(policy);
  const auto r = run(w, rec, config(3));
  EXPECT_EQ(r.clone_copies, 0);
}

TEST(ScaLite, DeterministicTasksNeverCloned) {
  std::vector<JobSpec> w{det_job(1, 2, 5)};
  ScaLitePolicy policy(PolicyParams{});
  const auto r = run(w, policy, config(10));
  EXPECT_EQ(r.clone_copies, 0);
}

TEST(ScaLite, ZeroFreeMachinesEmpty) {
  JobSpec j;
  j.map_count = 3;
  j.map_dist = Pareto{2.5, 10.0};
  std::vector<JobSpec> w{j, j};
  ScaLitePolicy inner(PolicyParams{});
  bool probed = false;
  ScriptScheduler s(
      [&](const ClusterState& st) -> std::vector<LaunchDirective> {
        if (st.slot() == 0) return inner.decide(st);
        if (!probed && st.free_machines() == 0) {
          EXPECT_TRUE(inner.sca_lite_decide(st).empty());
          probed = true;
        }
        return inner.decide(st);
      },
      [&](std::span<const JobSpec> wl) { inner.reset(wl, SimulationConfig{}); });
  run(w, s, config(3));
  EXPECT_TRUE(probed);
}

TEST(Policies, Factory) {
  for (const auto& name : policy_names()) EXPECT_EQ(make_policy(name, PolicyParams{})->name(), name);
  EXPECT_THROW(make_policy("late", PolicyParams{}), ContractError);
  PolicyParams bad;
  bad.epsilon = 0;
  EXPECT_THROW(make_policy("srptms+c", bad), ContractError);
}
