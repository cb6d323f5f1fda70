#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <map>
#include <string>
#include <type_traits>
#include <variant>
#include <vector>

#include "clonesim/errors.hpp"
#include "clonesim/rng.hpp"

namespace clonesim {

// Duration distributions ----------------------------------------------------

// Pr(p < t) = 1 - (mu/t)^alpha for t >= mu.
struct Pareto {
  double alpha;
  double mu;
};

struct Deterministic {
  double value;
};

// exp(N(log_mean, log_sd^2)).
struct LogNormal {
  double log_mean;
  double log_sd;
};

enum class DistFamily { pareto, deterministic, lognormal };

inline const char* to_string(DistFamily f) {
  switch (f) {
    case DistFamily::pareto: return "pareto";
    case DistFamily::deterministic: return "deterministic";
    case DistFamily::lognormal: return "lognormal";
  }
  return "?";
}

class DurationDistribution {
 public:
  using Variant = std::variant<Pareto, Deterministic, LogNormal>;

  DurationDistribution(Pareto p) : v_(p) {  // NOLINT(google-explicit-constructor)
    if (!(p.alpha > 1.0) || !(p.mu > 0.0) || !std::isfinite(p.alpha) || !std::isfinite(p.mu))
      throw ValidationError("Pareto requires alpha > 1 and mu > 0");
  }
  DurationDistribution(Deterministic d) : v_(d) {  // NOLINT(google-explicit-constructor)
    if (!(d.value > 0.0) || !std::isfinite(d.value))
      throw ValidationError("Deterministic duration must be positive and finite");
  }
  DurationDistribution(LogNormal l) : v_(l) {  // NOLINT(google-explicit-constructor)
    if (!std::isfinite(l.log_mean) || !(l.log_sd >= 0.0) || !std::isfinite(l.log_sd))
      throw ValidationError("LogNormal requires finite log_mean and log_sd >= 0");
  }

  const Variant& variant() const noexcept { return v_; }

  DistFamily family() const noexcept {
    return static_cast<DistFamily>(v_.index());
  }

  double mean() const noexcept {
    return std::visit(
        [](const auto& d) -> double {
          using T = std::decay_t<decltype(d)>;
          if constexpr (std::is_same_v<T, Pareto>) {
            return d.alpha * d.mu / (d.alpha - 1.0);
          } else if constexpr (std::is_same_v<T, Deterministic>) {
            return d.value;
          } else {
            return std::exp(d.log_mean + 0.5 * d.log_sd * d.log_sd);
          }
        },
        v_);
  }

  // Infinite for Pareto with alpha <= 2.
  double sd() const noexcept {
    return std::visit(
        [](const auto& d) -> double {
          using T = std::decay_t<decltype(d)>;
          if constexpr (std::is_same_v<T, Pareto>) {
            if (d.alpha <= 2.0) return std::numeric_limits<double>::infinity();
            const double a = d.alpha;
            return d.mu * std::sqrt(a / ((a - 1.0) * (a - 1.0) * (a - 2.0)));
          } else if constexpr (std::is_same_v<T, Deterministic>) {
            return 0.0;
          } else {
            const double s2 = d.log_sd * d.log_sd;
            return std::sqrt(std::expm1(s2)) * std::exp(d.log_mean + 0.5 * s2);
          }
        },
        v_);
  }

  bool has_finite_moments() const noexcept { return std::isfinite(mean()) && std::isfinite(sd()); }

  // Pr(T > t).
  double survival(double t) const noexcept {
    return std::visit(
        [t](const auto& d) -> double {
          using T = std::decay_t<decltype(d)>;
          if constexpr (std::is_same_v<T, Pareto>) {
            return t < d.mu ? 1.0 : std::pow(d.mu / t, d.alpha);
          } else if constexpr (std::is_same_v<T, Deterministic>) {
            return t < d.value ? 1.0 : 0.0;
          } else {
            if (t <= 0.0) return 1.0;
            if (d.log_sd == 0.0) return t < std::exp(d.log_mean) ? 1.0 : 0.0;
            return 0.5 * std::erfc((std::log(t) - d.log_mean) / (d.log_sd * std::sqrt(2.0)));
          }
        },
        v_);
  }

  // One i.i.d. draw. Pareto uses the inverse CDF mu * U^(-1/alpha), U on (0,1].
  double sample(RngStream& rng) const noexcept {
    return std::visit(
        [&rng](const auto& d) -> double {
          using T = std::decay_t<decltype(d)>;
          if constexpr (std::is_same_v<T, Pareto>) {
            return d.mu * std::pow(rng.uniform_open0(), -1.0 / d.alpha);
          } else if constexpr (std::is_same_v<T, Deterministic>) {
            return d.value;
          } else {
            return std::exp(d.log_mean + d.log_sd * rng.normal());
          }
        },
        v_);
  }

  friend bool operator==(const DurationDistribution& a, const DurationDistribution& b) {
    if (a.v_.index() != b.v_.index()) return false;
    return std::visit(
        [&b](const auto& x) {
          using T = std::decay_t<decltype(x)>;
          const auto& y = std::get<T>(b.v_);
          if constexpr (std::is_same_v<T, Pareto>) return x.alpha == y.alpha && x.mu == y.mu;
          else if constexpr (std::is_same_v<T, Deterministic>) return x.value == y.value;
          else return x.log_mean == y.log_mean && x.log_sd == y.log_sd;
        },
        a.v_);
  }

 private:
  Variant v_;
};

inline double sample_duration(const DurationDistribution& dist, RngStream& rng) {
  return dist.sample(rng);
}

// A value with its Monte Carlo standard error (zero for closed forms).
struct Estimate {
  double value = 0.0;
  double std_error = 0.0;
  std::size_t samples = 0;
};

inline constexpr std::size_t kDefaultMinSamples = 100'000;

/// Expected duration of the fastest of k independent copies.
///
/// Pareto(alpha, mu): the minimum of k draws is Pareto(k*alpha, mu), so the
/// mean is k*alpha*mu / (k*alpha - 1). Deterministic: the value itself.
/// LogNormal has no closed form and is estimated by Monte Carlo.
inline Estimate expected_min_of(const DurationDistribution& dist, int k,
                                std::size_t mc_samples = kDefaultMinSamples,
                                std::uint64_t mc_seed = 0) {
  if (k < 1) throw ContractError("expected_min_of: k must be >= 1");
  if (const auto* p = std::get_if<Pareto>(&dist.variant())) {
    const double ak = p->alpha * k;
    if (ak <= 1.0) throw UndefinedExpectationError("expected_min_of: alpha*k <= 1");
    return {ak * p->mu / (ak - 1.0), 0.0, 0};
  }
  if (const auto* d = std::get_if<Deterministic>(&dist.variant())) return {d->value, 0.0, 0};
  if (k == 1) return {dist.mean(), 0.0, 0};
  if (mc_samples < 2) throw ContractError("expected_min_of: need at least 2 Monte Carlo samples");

  RngStream rng = RngStream::derive(mc_seed, "expected-min", {static_cast<std::uint64_t>(k)});
  double mean = 0.0;
  double m2 = 0.0;
  for (std::size_t n = 1; n <= mc_samples; ++n) {
    double best = std::numeric_limits<double>::infinity();
    for (int c = 0; c < k; ++c) best = std::min(best, dist.sample(rng));
    const double delta = best - mean;
    mean += delta / static_cast<double>(n);
    m2 += delta * (best - mean);
  }
  const double var = m2 / static_cast<double>(mc_samples - 1);
  return {mean, std::sqrt(var / static_cast<double>(mc_samples)), mc_samples};
}

// Speedup functions ----------------------------------------------------------

// s(k) = (k*alpha - 1) / (k*(alpha - 1)).
struct ParetoClosedForm {
  double alpha;
};

// Tabulated s(1..n); held flat beyond the table.
struct EmpiricalSpeedup {
  std::vector<double> factors;
};

// Cloning never helps (zero-variance tasks).
struct NoSpeedup {};

class SpeedupFunction {
 public:
  using Variant = std::variant<ParetoClosedForm, EmpiricalSpeedup, NoSpeedup>;

  SpeedupFunction(ParetoClosedForm p) : v_(p) {  // NOLINT(google-explicit-constructor)
    if (!(p.alpha > 1.0)) throw ValidationError("ParetoClosedForm requires alpha > 1");
  }
  SpeedupFunction(EmpiricalSpeedup e) : v_(std::move(e)) {  // NOLINT(google-explicit-constructor)
    if (std::get<EmpiricalSpeedup>(v_).factors.empty())
      throw ValidationError("empirical speedup table is empty");
  }
  SpeedupFunction(NoSpeedup n) : v_(n) {}  // NOLINT(google-explicit-constructor)

  // Builds {k -> factor} with keys 1..n; keys must be contiguous from 1.
  static SpeedupFunction from_table(const std::map<int, double>& table) {
    EmpiricalSpeedup e;
    int expect = 1;
    for (const auto& [k, f] : table) {
      if (k != expect++) throw ValidationError("empirical speedup keys must be 1..n");
      e.factors.push_back(f);
    }
    return SpeedupFunction(std::move(e));
  }

  const Variant& variant() const noexcept { return v_; }

  double operator()(int k) const {
    if (k < 1) throw ContractError("speedup: k must be >= 1");
    return std::visit(
        [k](const auto& s) -> double {
          using T = std::decay_t<decltype(s)>;
          if constexpr (std::is_same_v<T, ParetoClosedForm>) {
            return (k * s.alpha - 1.0) / (k * (s.alpha - 1.0));
          } else if constexpr (std::is_same_v<T, EmpiricalSpeedup>) {
            const auto idx = std::min<std::size_t>(static_cast<std::size_t>(k), s.factors.size());
            return s.factors[idx - 1];
          } else {
            return 1.0;
          }
        },
        v_);
  }

 private:
  Variant v_;
};

inline double speedup(const SpeedupFunction& fn, int k) { return fn(k); }

/// Speedup function implied by a task duration distribution: mean / E[min of k].
/// LogNormal is tabulated by Monte Carlo up to `k_max` copies.
inline SpeedupFunction speedup_for(const DurationDistribution& dist, int k_max = 16,
                                   std::size_t mc_samples = 20'000) {
  if (const auto* p = std::get_if<Pareto>(&dist.variant())) return ParetoClosedForm{p->alpha};
  if (std::holds_alternative<Deterministic>(dist.variant()) || dist.sd() == 0.0) return NoSpeedup{};
  // Speedup is scale-free; a LogNormal depends on its log-sd only.
  const auto& ln = std::get<LogNormal>(dist.variant());
  const DurationDistribution unit = LogNormal{0.0, ln.log_sd};
  EmpiricalSpeedup table;
  const double mean = unit.mean();
  double prev = 0.0;
  for (int k = 1; k <= k_max; ++k) {
    double s = k == 1 ? 1.0 : mean / expected_min_of(unit, k, mc_samples).value;
    // Monte Carlo noise must not break monotonicity or s(k) <= k.
    s = std::clamp(s, prev, static_cast<double>(k));
    table.factors.push_back(s);
    prev = s;
  }
  return table;
}

struct SpeedupReport {
  bool unit_at_one = true;       // s(1) == 1
  bool monotone = true;          // s(k+1) >= s(k)
  bool bounded_by_k = true;      // s(k) <= k
  bool concave = true;           // s(k+1) - s(k) <= s(k) - s(k-1)
  bool ratio_decreasing = true;  // s(a)/a >= s(b)/b for a <= b

  bool all_pass() const noexcept {
    return unit_at_one && monotone && bounded_by_k && concave && ratio_decreasing;
  }
};

/// Checks the speedup axioms on 1..k_max. Failures are reported, never thrown.
inline SpeedupReport validate_speedup(const SpeedupFunction& fn, int k_max) {
  if (k_max < 2) throw ContractError("validate_speedup: k_max must be >= 2");
  constexpr double tol = 1e-12;
  std::vector<double> s(static_cast<std::size_t>(k_max) + 1, 0.0);
  for (int k = 1; k <= k_max; ++k) s[static_cast<std::size_t>(k)] = fn(k);

  SpeedupReport rep;
  rep.unit_at_one = std::abs(s[1] - 1.0) <= tol;
  for (int k = 1; k <= k_max; ++k) {
    const auto u = static_cast<std::size_t>(k);
    if (s[u] > k * (1.0 + tol)) rep.bounded_by_k = false;
    if (k >= 2 && s[u] < s[u - 1] - tol) rep.monotone = false;
    if (k >= 3 && (s[u] - s[u - 1]) > (s[u - 1] - s[u - 2]) + tol) rep.concave = false;
  }
  // s(a)/a is non-increasing over consecutive pairs iff it is over all pairs.
  for (int a = 1; a < k_max; ++a) {
    const auto u = static_cast<std::size_t>(a);
    if (s[u + 1] / (a + 1) > s[u] / a + tol) rep.ratio_decreasing = false;
  }
  return rep;
}

}  // namespace clonesim
