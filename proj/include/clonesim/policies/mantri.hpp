#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <limits>
#include <map>
#include <string>
#include <vector>

#include <boost/math/distributions/normal.hpp>

#include "clonesim/core.hpp"
#include "clonesim/engine.hpp"
#include "clonesim/policies/srptms.hpp"
#include "clonesim/rng.hpp"
#include "clonesim/stochastic.hpp"

namespace clonesim {

inline constexpr std::size_t kMantriLogNormalSamples = 10'000;

/// P(t_rem > multiplier * t_new) for a copy that has already done `elapsed`
/// seconds of work, where t_rem is its remaining duration conditioned on
/// survival past `elapsed` and t_new is an independent fresh draw.
///
/// Pareto: given T > e, T is Pareto(alpha, max(mu, e)), so
/// P = E[ (m' / (e + k X))^alpha ] over X ~ Pareto(alpha, mu), computed by
/// Simpson quadrature after substituting u = (mu / X)^alpha.
/// LogNormal falls back to Monte Carlo on conditioned samples.
inline double backup_win_probability(const DurationDistribution& dist, double elapsed, double multiplier,
                                     std::size_t mc_samples = kMantriLogNormalSamples) {
  if (elapsed < 0.0 || !(multiplier > 0.0)) throw ContractError("backup_win_probability: bad arguments");
  const auto& v = dist.variant();

  if (const auto* d = std::get_if<Deterministic>(&v)) {
    return d->value - elapsed > multiplier * d->value ? 1.0 : 0.0;
  }

  if (const auto* p = std::get_if<Pareto>(&v)) {
    const double floor = std::max(p->mu, elapsed);
    auto f = [&](double u) {
      if (u <= 0.0) return 0.0;
      const double x = p->mu * std::pow(u, -1.0 / p->alpha);
      return std::min(1.0, std::pow(floor / (elapsed + multiplier * x), p->alpha));
    };
    constexpr int n = 2048;  // even
    const double h = 1.0 / n;
    double s = f(0.0) + f(1.0);
    for (int i = 1; i < n; ++i) s += f(i * h) * (i % 2 == 1 ? 4.0 : 2.0);
    return s * h / 3.0;
  }

  const auto& ln = std::get<LogNormal>(v);
  if (ln.log_sd == 0.0) {
    const double value = std::exp(ln.log_mean);
    return value - elapsed > multiplier * value ? 1.0 : 0.0;
  }
  const boost::math::normal_distribution<double> z;
  const double survived = dist.survival(elapsed);
  const double lo = 1.0 - survived;  // F(e)
  RngStream rng = RngStream::derive(0, "mantri-lognormal",
                                    {static_cast<std::uint64_t>(std::llround(elapsed * 1024.0))});
  std::size_t wins = 0;
  for (std::size_t i = 0; i < mc_samples; ++i) {
    const double u = std::min(lo + (1.0 - lo) * rng.uniform_open0(), std::nextafter(1.0, 0.0));
    const double total = std::exp(ln.log_mean + ln.log_sd * boost::math::quantile(z, std::max(u, 1e-300)));
    const double remaining = std::max(0.0, total - elapsed);
    const double fresh = dist.sample(rng);
    if (remaining > multiplier * fresh) ++wins;
  }
  return static_cast<double>(wins) / static_cast<double>(mc_samples);
}

// Memoizes backup_win_probability per (distribution, elapsed work).
//
// For Pareto the probability depends on elapsed work only through e / mu and
// is unimodal in it: decreasing below mu, increasing above. The set where it
// exceeds delta is therefore [0, lo) u (hi, inf), found once per alpha by
// bisection, so most copies are rejected without quadrature.
class BackupProbabilityCache {
 public:
  BackupProbabilityCache(double multiplier, double delta) : multiplier_(multiplier), delta_(delta) {}

  // Probability when it exceeds delta, otherwise any value <= delta.
  double operator()(const DurationDistribution& dist, double elapsed) {
    if (const auto* p = std::get_if<Pareto>(&dist.variant())) {
      const auto& t = thresholds(p->alpha);
      const double ratio = elapsed / p->mu;
      if (!(ratio < t.lo || ratio > t.hi)) return 0.0;
    }
    std::array<double, 4> key{static_cast<double>(dist.family()), 0.0, 0.0, elapsed};
    std::visit(
        [&key](const auto& d) {
          using T = std::decay_t<decltype(d)>;
          if constexpr (std::is_same_v<T, Pareto>) key[1] = d.alpha, key[2] = d.mu;
          else if constexpr (std::is_same_v<T, Deterministic>) key[1] = d.value;
          else key[1] = d.log_mean, key[2] = d.log_sd;
        },
        dist.variant());
    auto it = cache_.find(key);
    if (it != cache_.end()) return it->second;
    const double p = backup_win_probability(dist, elapsed, multiplier_);
    cache_.emplace(key, p);
    return p;
  }

  std::size_t size() const noexcept { return cache_.size(); }

 private:
  struct Thresholds {
    double lo;  // ratios below lo pass; -1 when none do
    double hi;  // ratios above hi pass; +inf when none do
  };

  const Thresholds& thresholds(double alpha) {
    auto it = thresholds_.find(alpha);
    if (it != thresholds_.end()) return it->second;
    auto prob = [&](double ratio) { return backup_win_probability(Pareto{alpha, 1.0}, ratio, multiplier_); };
    Thresholds t{-1.0, std::numeric_limits<double>::infinity()};
    if (prob(0.0) > delta_) {
      double a = 0.0;
      double b = 1.0;
      if (prob(1.0) > delta_) a = b;
      else
        for (int i = 0; i < 60; ++i) (prob(0.5 * (a + b)) > delta_ ? a : b) = 0.5 * (a + b);
      t.lo = a;
    }
    double b = 1.0;
    while (prob(b) <= delta_ && b < 1e12) b *= 2.0;
    if (prob(b) > delta_) {
      double a = b > 1.0 ? b / 2.0 : 1.0;
      if (prob(a) > delta_) b = a;
      for (int i = 0; i < 60 && b - a > 1e-12 * b; ++i) (prob(0.5 * (a + b)) > delta_ ? b : a) = 0.5 * (a + b);
      t.hi = b;
    }
    return thresholds_.emplace(alpha, t).first->second;
  }

  double multiplier_;
  double delta_;
  std::map<std::array<double, 4>, double> cache_;
  std::map<double, Thresholds> thresholds_;
};

/// Backup copies for running tasks: one per task at most, launched on up to
/// `free` machines when P(t_rem > multiplier * t_new) > delta. The most likely
/// winners go first.
inline std::vector<LaunchDirective> mantri_backups(const ClusterState& state, int free, const PolicyParams& params,
                                                   BackupProbabilityCache& probability) {
  std::vector<LaunchDirective> out;
  if (free <= 0) return out;
  struct Candidate {
    double p;
    TaskRef task;
  };
  std::vector<Candidate> candidates;
  for (const auto& c : state.running()) {
    if (c.blocked) continue;
    const auto& js = state.job(c.task.job);
    const auto& ts = js.tasks(c.task.phase)[c.task.index];
    if (ts.done || ts.copies_launched != 1) continue;
    const double p = probability(js.spec->dist(c.task.phase), c.work_done());
    if (p > params.mantri_delta) candidates.push_back({p, c.task});
  }
  std::sort(candidates.begin(), candidates.end(), [](const Candidate& a, const Candidate& b) {
    return a.p != b.p ? a.p > b.p : a.task < b.task;
  });
  for (const auto& c : candidates) {
    if (free == 0) break;
    out.push_back({c.task, 1});
    --free;
  }
  return out;
}

/// Detection-based speculative execution on top of the weighted fair
/// scheduler: fresh tasks get one copy each (epsilon = 1, no cloning); the
/// machines left over feed backup copies of likely stragglers.
class MantriPolicy : public Scheduler {
 public:
  explicit MantriPolicy(PolicyParams params) : params_(params), probability_(params.mantri_backup_multiplier, params.mantri_delta) {
    params_.validate();
    params_.epsilon = 1.0;
  }

  std::string name() const override { return "mantri"; }

  std::vector<LaunchDirective> decide(const ClusterState& state) override {
    auto out = srptms_decide(state, params_, false, "mantri-assign");
    int free = state.free_machines();
    for (const auto& d : out) free -= d.copies;
    auto backups = mantri_backups(state, free, params_, probability_);
    out.insert(out.end(), backups.begin(), backups.end());
    return out;
  }

 private:
  PolicyParams params_;
  BackupProbabilityCache probability_;
};

}  // namespace clonesim
