#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <numeric>
#include <span>
#include <vector>

#include "clonesim/core.hpp"
#include "clonesim/errors.hpp"

namespace clonesim {

struct PolicyParams {
  double epsilon = 0.6;
  double risk_factor = 3.0;
  double mantri_delta = 0.25;
  double mantri_backup_multiplier = 2.0;  // backup when P(t_rem > multiplier * t_new) > delta

  void validate() const {
    if (!(epsilon > 0.0 && epsilon <= 1.0)) throw ContractError("epsilon must be in (0, 1]");
    RiskFactor{risk_factor};
    if (!(mantri_delta > 0.0 && mantri_delta < 1.0)) throw ContractError("mantri_delta must be in (0, 1)");
    if (!(mantri_backup_multiplier > 0.0)) throw ContractError("mantri_backup_multiplier must be > 0");
  }
};

// One alive job as seen by the share computation: weight and remaining effective workload U_i(l).
struct AliveJob {
  JobId job = 0;
  double weight = 1.0;
  double remaining = 0.0;
};

struct ShareEntry {
  JobId job = 0;
  double weight = 0.0;
  double remaining = 0.0;
  double priority = 0.0;
  double lower_weight = 0.0;   // W_i(l): weight of this job and every job below it
  double entitlement = 0.0;    // g_i(l), before rounding
  int rounded = 0;
  int occupancy = 0;           // sigma_i(l), filled in by the caller
  int deficit() const noexcept { return rounded - occupancy; }  // xi_i(l)
};

/// Machine entitlements of the alive jobs for one slot, in descending priority order.
struct ShareVector {
  std::vector<ShareEntry> entries;
  double total_weight = 0.0;  // W(l)
  double epsilon = 1.0;
  int machines = 0;

  double entitlement_sum() const noexcept {
    double s = 0.0;
    for (const auto& e : entries) s += e.entitlement;
    return s;
  }
  int rounded_sum() const noexcept {
    int s = 0;
    for (const auto& e : entries) s += e.rounded;
    return s;
  }
};

namespace detail {

// Largest-remainder rounding so the integer shares sum to exactly `machines`.
inline void round_shares(std::vector<ShareEntry>& entries, int machines) {
  long long floors = 0;
  for (auto& e : entries) {
    e.rounded = static_cast<int>(std::floor(e.entitlement));
    floors += e.rounded;
  }
  long long leftover = machines - floors;
  if (leftover <= 0) return;
  std::vector<std::size_t> order(entries.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  // Stable on priority order for equal remainders.
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return entries[a].entitlement - entries[a].rounded > entries[b].entitlement - entries[b].rounded;
  });
  for (std::size_t k = 0; leftover > 0; k = (k + 1) % order.size(), --leftover) ++entries[order[k]].rounded;
}

}  // namespace detail

/// Epsilon-fractional sharing. Jobs are ordered by descending weight/U_i(l);
/// the highest-priority jobs holding an epsilon fraction of the alive weight
/// split the M machines in proportion to their weights (the job straddling the
/// frontier gets the part of its weight above it). Entitlements sum to M.
/// epsilon = 1 is the weighted fair scheduler; epsilon -> 0 approaches SRPT.
inline ShareVector srptms_shares(std::span<const AliveJob> alive, double epsilon, int machines) {
  if (alive.empty()) throw ContractError("srptms_shares: no alive jobs");
  if (!(epsilon > 0.0 && epsilon <= 1.0)) throw ContractError("srptms_shares: epsilon must be in (0, 1]");
  if (machines < 1) throw ContractError("srptms_shares: machines must be >= 1");

  ShareVector out;
  out.epsilon = epsilon;
  out.machines = machines;
  out.entries.reserve(alive.size());
  for (const auto& a : alive) {
    if (!(a.remaining > 0.0)) throw ContractError("srptms_shares: remaining workload must be > 0");
    if (!(a.weight > 0.0)) throw ContractError("srptms_shares: weight must be > 0");
    ShareEntry e;
    e.job = a.job;
    e.weight = a.weight;
    e.remaining = a.remaining;
    e.priority = a.weight / a.remaining;
    out.entries.push_back(e);
  }
  std::sort(out.entries.begin(), out.entries.end(), [](const ShareEntry& a, const ShareEntry& b) {
    return runs_before({a.priority, a.job}, {b.priority, b.job});
  });

  double suffix = 0.0;
  for (auto it = out.entries.rbegin(); it != out.entries.rend(); ++it) {
    suffix += it->weight;
    it->lower_weight = suffix;
  }
  const double total = suffix;
  out.total_weight = total;
  const double frontier = (1.0 - epsilon) * total;
  const double shared_weight = epsilon * total;
  for (auto& e : out.entries) {
    if (e.lower_weight - e.weight >= frontier) e.entitlement = e.weight * machines / shared_weight;
    else if (e.lower_weight < frontier) e.entitlement = 0.0;
    else e.entitlement = (e.lower_weight - frontier) * machines / shared_weight;
  }
  detail::round_shares(out.entries, machines);
  return out;
}

}  // namespace clonesim
