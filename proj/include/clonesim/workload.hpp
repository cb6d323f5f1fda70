#pragma once

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <istream>
#include <ostream>
#include <span>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "clonesim/core.hpp"
#include "clonesim/errors.hpp"
#include "clonesim/rng.hpp"
#include "clonesim/stochastic.hpp"

namespace clonesim {

inline constexpr std::string_view kJobSummaryHeader =
    "job_id,arrival_s,priority,map_count,reduce_count,map_mean_s,map_sd_s,reduce_mean_s,reduce_sd_s,dist_family";

inline constexpr int kMaxTracePriority = 11;

// Trace priorities 0..11 become weights 1..12 so no job has zero weight.
inline double weight_from_priority(int priority) { return static_cast<double>(priority) + 1.0; }

struct JobSummaryRecord {
  std::string job_id;
  std::int64_t arrival_s = 0;
  int priority = 0;
  int map_count = 1;
  int reduce_count = 0;
  double map_mean_s = 0.0;
  double map_sd_s = 0.0;
  double reduce_mean_s = 0.0;
  double reduce_sd_s = 0.0;
  DistFamily dist_family = DistFamily::deterministic;
};

struct PhaseStats {
  double mean = 0.0;
  double sd = 0.0;
};

/// Sample mean and (n-1)-denominator standard deviation; sd is 0 for one sample.
inline PhaseStats estimate_phase_stats(std::span<const double> durations) {
  if (durations.empty()) throw ValidationError("estimate_phase_stats: no durations");
  double mean = 0.0;
  double m2 = 0.0;
  std::size_t n = 0;
  for (double d : durations) {
    ++n;
    const double delta = d - mean;
    mean += delta / static_cast<double>(n);
    m2 += delta * (d - mean);
  }
  return {mean, n > 1 ? std::sqrt(m2 / static_cast<double>(n - 1)) : 0.0};
}

/// Distribution with the given first two moments within a family.
///
/// sd == 0 gives Deterministic(mean) for every family. Pareto inverts
/// sd^2 / mean^2 = 1 / (alpha (alpha - 2)): alpha = 1 + sqrt(1 + mean^2 / sd^2),
/// mu = mean (alpha - 1) / alpha. LogNormal: s^2 = ln(1 + sd^2 / mean^2),
/// m = ln(mean) - s^2 / 2.
inline DurationDistribution distribution_from_moments(double mean, double sd, DistFamily family) {
  if (!(mean > 0.0) || !std::isfinite(mean)) throw ValidationError("task mean must be positive and finite");
  if (!(sd >= 0.0) || !std::isfinite(sd)) throw ValidationError("task sd must be finite and >= 0");
  if (sd == 0.0) return Deterministic{mean};
  switch (family) {
    case DistFamily::deterministic:
      throw ValidationError("deterministic family with non-zero sd");
    case DistFamily::pareto: {
      const double alpha = 1.0 + std::sqrt(1.0 + (mean * mean) / (sd * sd));
      if (!(alpha > 2.0)) throw ValidationError("moments imply Pareto alpha <= 2 (infinite variance)");
      return Pareto{alpha, mean * (alpha - 1.0) / alpha};
    }
    case DistFamily::lognormal: {
      const double s2 = std::log1p((sd * sd) / (mean * mean));
      return LogNormal{std::log(mean) - 0.5 * s2, std::sqrt(s2)};
    }
  }
  throw ValidationError("unknown distribution family");
}

inline DistFamily parse_family(std::string_view s) {
  if (s == "pareto") return DistFamily::pareto;
  if (s == "deterministic") return DistFamily::deterministic;
  if (s == "lognormal") return DistFamily::lognormal;
  throw ValidationError("unknown dist_family '" + std::string(s) + "'");
}

inline JobSpec to_job_spec(const JobSummaryRecord& r) {
  if (r.job_id.empty()) throw ValidationError("empty job_id");
  if (r.arrival_s < 0) throw ValidationError("negative arrival_s");
  if (r.priority < 0 || r.priority > kMaxTracePriority) throw ValidationError("priority outside 0..11");
  if (r.map_count < 1) throw ValidationError("map_count must be >= 1");
  if (r.reduce_count < 0) throw ValidationError("reduce_count must be >= 0");
  JobSpec j;
  j.name = r.job_id;
  j.arrival_slot = r.arrival_s;
  j.weight = weight_from_priority(r.priority);
  j.map_count = r.map_count;
  j.reduce_count = r.reduce_count;
  j.map_dist = distribution_from_moments(r.map_mean_s, r.map_sd_s, r.dist_family);
  j.reduce_dist = distribution_from_moments(r.reduce_mean_s, r.reduce_sd_s, r.dist_family);
  j.validate();
  return j;
}

namespace detail {

inline std::vector<std::string_view> split_csv(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const auto pos = line.find(',', start);
    out.push_back(line.substr(start, pos == std::string_view::npos ? std::string_view::npos : pos - start));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return out;
}

inline std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

template <typename T>
T parse_number(std::string_view field, std::size_t line, const char* column) {
  field = trim(field);
  T value{};
  const auto* end = field.data() + field.size();
  const auto [ptr, ec] = std::from_chars(field.data(), end, value);
  if (ec != std::errc{} || ptr != end || field.empty())
    throw ParseError(line, std::string("bad ") + column + " '" + std::string(field) + "'");
  return value;
}

// Shortest fixed-notation text that parses back to the same double.
inline std::string fixed_repr(double v) {
  char buf[512];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v, std::chars_format::fixed);
  if (ec != std::errc{}) throw ValidationError("cannot format value");
  return std::string(buf, ptr);
}

}  // namespace detail

/// Reads the job-summary CSV: a required header row, `#` comment lines and
/// blank lines skipped. Every row is validated into a JobSpec; malformed rows
/// raise ParseError and invalid values ValidationError, both naming the line.
inline std::vector<JobSpec> load_job_summaries(std::istream& in) {
  std::vector<JobSpec> jobs;
  std::string raw;
  std::size_t line = 0;
  bool header = false;
  while (std::getline(in, raw)) {
    ++line;
    const auto text = detail::trim(raw);
    if (text.empty() || text.front() == '#') continue;
    if (!header) {
      if (text != kJobSummaryHeader) throw ParseError(line, "expected header '" + std::string(kJobSummaryHeader) + "'");
      header = true;
      continue;
    }
    const auto f = detail::split_csv(text);
    if (f.size() != 10) throw ParseError(line, "expected 10 fields, got " + std::to_string(f.size()));
    JobSummaryRecord r;
    r.job_id = std::string(detail::trim(f[0]));
    r.arrival_s = detail::parse_number<std::int64_t>(f[1], line, "arrival_s");
    r.priority = detail::parse_number<int>(f[2], line, "priority");
    r.map_count = detail::parse_number<int>(f[3], line, "map_count");
    r.reduce_count = detail::parse_number<int>(f[4], line, "reduce_count");
    r.map_mean_s = detail::parse_number<double>(f[5], line, "map_mean_s");
    r.map_sd_s = detail::parse_number<double>(f[6], line, "map_sd_s");
    r.reduce_mean_s = detail::parse_number<double>(f[7], line, "reduce_mean_s");
    r.reduce_sd_s = detail::parse_number<double>(f[8], line, "reduce_sd_s");
    try {
      r.dist_family = parse_family(detail::trim(f[9]));
      jobs.push_back(to_job_spec(r));
    } catch (const ValidationError& e) {
      throw ValidationError("line " + std::to_string(line) + ": " + e.what());
    }
  }
  if (jobs.empty()) throw ValidationError("workload is empty");
  return jobs;
}

inline std::vector<JobSpec> load_job_summaries(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError(path, "cannot open workload file");
  return load_job_summaries(in);
}

inline JobSummaryRecord to_summary_record(const JobSpec& j) {
  JobSummaryRecord r;
  r.job_id = j.name;
  r.arrival_s = j.arrival_slot;
  const double p = j.weight - 1.0;
  if (p != std::floor(p) || p < 0 || p > kMaxTracePriority)
    throw ValidationError("job " + j.name + ": weight does not map to a trace priority 0..11");
  r.priority = static_cast<int>(p);
  r.map_count = j.map_count;
  r.reduce_count = j.reduce_count;
  r.map_mean_s = j.map_dist.mean();
  r.map_sd_s = j.map_dist.sd();
  r.reduce_mean_s = j.reduce_dist.mean();
  r.reduce_sd_s = j.reduce_dist.sd();
  r.dist_family = r.map_sd_s > 0 ? j.map_dist.family() : j.reduce_dist.family();
  if (j.map_dist.family() != j.reduce_dist.family() && r.map_sd_s > 0 && r.reduce_sd_s > 0)
    throw ValidationError("job " + j.name + ": phases use different distribution families");
  return r;
}

inline void write_job_summaries(std::ostream& out, std::span<const JobSpec> jobs) {
  out << kJobSummaryHeader << '\n';
  for (const auto& j : jobs) {
    const auto r = to_summary_record(j);
    out << r.job_id << ',' << r.arrival_s << ',' << r.priority << ',' << r.map_count << ',' << r.reduce_count
        << ',' << detail::fixed_repr(r.map_mean_s) << ',' << detail::fixed_repr(r.map_sd_s) << ','
        << detail::fixed_repr(r.reduce_mean_s) << ',' << detail::fixed_repr(r.reduce_sd_s) << ','
        << to_string(r.dist_family) << '\n';
  }
}

inline void write_job_summaries(const std::string& path, std::span<const JobSpec> jobs) {
  std::ofstream out(path);
  if (!out) throw IoError(path, "cannot open for writing");
  write_job_summaries(out, jobs);
  if (!out) throw IoError(path, "write failed");
}

// Synthetic workloads ---------------------------------------------------------

enum class ArrivalProcess { bulk, poisson };

/// Defaults reproduce the trace aggregates used for calibration (26.31 tasks
/// per job, 1179.7 s mean task duration, 12.8 s minimum, 22919.3 s maximum)
/// at desk scale. The arrival rate is the trace's 6064 jobs per 35032 s scaled
/// from 12000 to 200 machines, which keeps the offered load near 0.45.
struct SyntheticConfig {
  int job_count = 500;
  ArrivalProcess arrivals = ArrivalProcess::poisson;
  double arrival_rate = 6064.0 / 35032.0 * 200.0 / 12000.0;  // jobs per second
  double mean_tasks_per_job = 26.31;
  double map_fraction = 0.5;
  double mean_task_duration = 1179.7;
  double job_duration_log_sd = 1.0;  // spread of per-job mean durations
  double min_task_duration = 12.8;
  double max_task_duration = 22919.3;
  DistFamily family = DistFamily::pareto;
  double pareto_alpha = 2.5;
  double lognormal_cv = 1.0;
  int max_priority = kMaxTracePriority;
  std::uint64_t seed = 1;

  void validate() const {
    if (job_count < 1) throw ValidationError("job_count must be >= 1");
    if (arrivals == ArrivalProcess::poisson && !(arrival_rate > 0.0))
      throw ValidationError("arrival_rate must be > 0");
    if (!(mean_tasks_per_job >= 1.0)) throw ValidationError("mean_tasks_per_job must be >= 1");
    if (!(map_fraction > 0.0 && map_fraction <= 1.0)) throw ValidationError("map_fraction must be in (0, 1]");
    if (!(mean_task_duration > 0.0) || !(min_task_duration > 0.0) || !(max_task_duration >= min_task_duration))
      throw ValidationError("invalid task duration bounds");
    if (!(job_duration_log_sd >= 0.0)) throw ValidationError("job_duration_log_sd must be >= 0");
    if (family == DistFamily::pareto && !(pareto_alpha > 2.0))
      throw ValidationError("pareto_alpha must be > 2 for a finite task sd");
    if (family == DistFamily::lognormal && !(lognormal_cv > 0.0)) throw ValidationError("lognormal_cv must be > 0");
    if (max_priority < 0 || max_priority > kMaxTracePriority) throw ValidationError("max_priority outside 0..11");
  }
};

/// Seeded synthetic workload. Per job: total task count 1 + Geometric with the
/// configured mean, split into maps and reduces by map_fraction; a job-level
/// mean task duration drawn log-normally around mean_task_duration (clamped to
/// the min/max bounds) shared by both phases; the phase distribution of the
/// configured family with that mean; trace priority uniform in 0..max_priority.
inline std::vector<JobSpec> gen_synthetic(const SyntheticConfig& cfg) {
  cfg.validate();
  RngStream rng = RngStream::derive(cfg.seed, "synthetic-workload");
  std::vector<JobSpec> jobs;
  jobs.reserve(static_cast<std::size_t>(cfg.job_count));

  const double p_stop = 1.0 / cfg.mean_tasks_per_job;
  const double sigma = cfg.job_duration_log_sd;
  const double log_mean = std::log(cfg.mean_task_duration) - 0.5 * sigma * sigma;
  double floor_mean = cfg.min_task_duration;
  if (cfg.family == DistFamily::pareto) floor_mean = cfg.min_task_duration * cfg.pareto_alpha / (cfg.pareto_alpha - 1.0);
  double clock = 0.0;

  for (int i = 0; i < cfg.job_count; ++i) {
    JobSpec j;
    j.name = "job" + std::to_string(i);

    if (cfg.arrivals == ArrivalProcess::poisson && i > 0) clock += rng.exponential(cfg.arrival_rate);
    j.arrival_slot = static_cast<std::int64_t>(std::floor(clock));

    int total = 1;
    if (p_stop < 1.0) total += static_cast<int>(std::floor(std::log(rng.uniform_open0()) / std::log1p(-p_stop)));
    j.map_count = std::max(1, static_cast<int>(std::lround(total * cfg.map_fraction)));
    j.map_count = std::min(j.map_count, total);
    j.reduce_count = total - j.map_count;

    const double mean = std::clamp(std::exp(log_mean + sigma * rng.normal()), floor_mean, cfg.max_task_duration);
    switch (cfg.family) {
      case DistFamily::pareto:
        j.map_dist = Pareto{cfg.pareto_alpha, mean * (cfg.pareto_alpha - 1.0) / cfg.pareto_alpha};
        break;
      case DistFamily::deterministic:
        j.map_dist = Deterministic{mean};
        break;
      case DistFamily::lognormal: {
        const double s2 = std::log1p(cfg.lognormal_cv * cfg.lognormal_cv);
        j.map_dist = LogNormal{std::log(mean) - 0.5 * s2, std::sqrt(s2)};
        break;
      }
    }
    j.reduce_dist = j.map_dist;
    j.weight = weight_from_priority(static_cast<int>(rng.below(static_cast<std::uint64_t>(cfg.max_priority) + 1)));
    jobs.push_back(std::move(j));
  }
  return jobs;
}

}  // namespace clonesim
