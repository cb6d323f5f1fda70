#pragma once

#include <chrono>
#include <ctime>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"

#include "clonesim/engine.hpp"
#include "clonesim/errors.hpp"
#include "clonesim/metrics.hpp"
#include "clonesim/policies.hpp"
#include "clonesim/verify.hpp"
#include "clonesim/workload.hpp"

namespace clonesim {

struct CdfRange {
  double lo;
  double hi;
  double step;
};

// Small-job and big-job windows of the flowtime CDF.
inline constexpr CdfRange kSmallJobCdf{0.0, 300.0, 10.0};
inline constexpr CdfRange kBigJobCdf{500.0, 4000.0, 100.0};

enum class SweepParam { epsilon, risk, machines };

inline const char* to_string(SweepParam p) {
  switch (p) {
    case SweepParam::epsilon: return "epsilon";
    case SweepParam::risk: return "risk";
    case SweepParam::machines: return "machines";
  }
  return "?";
}

struct ExperimentConfig {
  std::optional<std::string> workload_path;
  std::optional<SyntheticConfig> synthetic;
  std::string policy = "srptms+c";
  PolicyParams params;
  SimulationConfig sim;
  int replications = 1;
  std::string out_dir = "out";
  ExportFormat format = ExportFormat::csv;
  std::vector<double> epsilon_grid;
  std::vector<double> risk_grid;
  std::vector<int> machine_grid;
  std::vector<std::string> policies;

  void validate() const {
    if (workload_path.has_value() == synthetic.has_value())
      throw ValidationError("exactly one workload source (a CSV path or a synthetic config) is required");
    if (synthetic) synthetic->validate();
    if (replications < 1) throw ValidationError("replications must be >= 1");
    if (out_dir.empty()) throw ValidationError("output directory must not be empty");
    params.validate();
    sim.validate();
    make_policy(policy, params);
  }
};

inline std::vector<JobSpec> load_workload(const ExperimentConfig& cfg) {
  if (cfg.workload_path) return load_job_summaries(*cfg.workload_path);
  if (cfg.synthetic) return gen_synthetic(*cfg.synthetic);
  throw ValidationError("no workload source");
}

struct ReplicationSet {
  std::vector<SimulationResult> runs;
  std::vector<SummaryMetrics> metrics;
  SummaryMetrics mean;
};

/// Runs `replications` simulations of one policy with seeds sim.seed + 0..N-1.
/// Every run sees the same workload; copy durations come from the run's seed,
/// so two policies given the same seed draw identical copy workloads.
inline ReplicationSet run_replications(std::span<const JobSpec> workload, const std::string& policy,
                                       const PolicyParams& params, const SimulationConfig& sim, int replications) {
  ReplicationSet out;
  for (int i = 0; i < replications; ++i) {
    auto scheduler = make_policy(policy, params);
    SimulationConfig cfg = sim;
    cfg.seed = sim.seed + static_cast<std::uint64_t>(i);
    const auto t0 = std::chrono::steady_clock::now();
    out.runs.push_back(run(workload, *scheduler, cfg));
    auto m = summarize(out.runs.back());
    m.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    out.metrics.push_back(m);
  }
  out.mean = average(out.metrics);
  return out;
}

// Flowtimes of every job in every run, pooled.
inline std::vector<double> pooled_flowtimes(const std::vector<SimulationResult>& runs) {
  std::vector<double> flows;
  for (const auto& r : runs)
    for (const auto& j : r.jobs) flows.push_back(j.completed() ? j.flowtime() : std::numeric_limits<double>::infinity());
  return flows;
}

// Grid value as it appears in file names.
inline std::string grid_label(double v) { return format_sig6(v); }

class OutputDir {
 public:
  OutputDir(std::string dir, ExportFormat format) : dir_(std::move(dir)), format_(format) {
    std::error_code ec;
    std::filesystem::create_directories(dir_, ec);
    if (ec) throw IoError(dir_, "cannot create output directory: " + ec.message());
  }

  std::string path(const std::string& stem) const {
    return (std::filesystem::path(dir_) / (stem + (format_ == ExportFormat::csv ? ".csv" : ".json"))).string();
  }

  template <typename T>
  std::string write(const std::string& stem, const T& value) const {
    const auto p = path(stem);
    export_to(value, format_, p);
    written_.push_back(p);
    return p;
  }

  void write_raw(const std::string& file, const std::string& text) const {
    const auto p = (std::filesystem::path(dir_) / file).string();
    write_text(p, text);
    written_.push_back(p);
  }

  const std::vector<std::string>& written() const noexcept { return written_; }
  ExportFormat format() const noexcept { return format_; }

 private:
  std::string dir_;
  ExportFormat format_;
  mutable std::vector<std::string> written_;
};

// Timestamp and wall time live here only, so metric files stay reproducible.
inline void write_run_meta(const OutputDir& out, const std::string& subcommand, double wall_seconds) {
  const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  char stamp[32];
  std::strftime(stamp, sizeof stamp, "%Y-%m-%dT%H:%M:%SZ", std::gmtime(&now));
  nlohmann::ordered_json j;
  j["subcommand"] = subcommand;
  j["finished_utc"] = stamp;
  j["wall_seconds"] = wall_seconds;
  out.write_raw("run_meta.json", j.dump(2) + '\n');
}

/// simulate: one file per replication (`simulate_rep=<i>`), the averaged
/// metrics (`simulate`), and pooled CDFs for the small- and big-job windows.
inline SummaryMetrics simulate(const ExperimentConfig& cfg, const OutputDir& out) {
  cfg.validate();
  const auto workload = load_workload(cfg);
  const auto set = run_replications(workload, cfg.policy, cfg.params, cfg.sim, cfg.replications);
  for (std::size_t i = 0; i < set.metrics.size(); ++i) out.write("simulate_rep=" + std::to_string(i), set.metrics[i]);
  out.write("simulate", set.mean);
  const auto flows = pooled_flowtimes(set.runs);
  out.write("simulate_cdf_small", cdf(flows, kSmallJobCdf.lo, kSmallJobCdf.hi, kSmallJobCdf.step));
  out.write("simulate_cdf_big", cdf(flows, kBigJobCdf.lo, kBigJobCdf.hi, kBigJobCdf.step));
  return set.mean;
}

struct GridRow {
  std::string label;
  SummaryMetrics metrics;
};

inline std::string grid_csv(const std::string& key, const std::vector<GridRow>& rows) {
  std::string s = key + ',' + kSummaryCsvHeader + '\n';
  for (const auto& r : rows) s += r.label + ',' + summary_csv_row(r.metrics) + '\n';
  return s;
}

inline std::string grid_json(const std::string& key, const std::vector<GridRow>& rows) {
  nlohmann::ordered_json arr = nlohmann::ordered_json::array();
  for (const auto& r : rows) {
    nlohmann::ordered_json j;
    j[key] = r.label;
    for (auto& [k, v] : to_json(r.metrics).items()) j[k] = v;
    arr.push_back(j);
  }
  return arr.dump(2) + '\n';
}

inline void write_grid(const OutputDir& out, const std::string& stem, const std::string& key,
                       const std::vector<GridRow>& rows) {
  if (out.format() == ExportFormat::csv) out.write_raw(stem + ".csv", grid_csv(key, rows));
  else out.write_raw(stem + ".json", grid_json(key, rows));
}

/// sweep: one row per grid value of `param` in `sweep_<param>`, plus the
/// averaged metrics of each point in `sweep_<param>=<value>`.
inline std::vector<GridRow> sweep(const ExperimentConfig& cfg, SweepParam param, const OutputDir& out) {
  cfg.validate();
  const auto workload = load_workload(cfg);
  std::vector<GridRow> rows;
  auto point = [&](const std::string& label, const PolicyParams& params, const SimulationConfig& sim) {
    const auto set = run_replications(workload, cfg.policy, params, sim, cfg.replications);
    out.write(std::string("sweep_") + to_string(param) + '=' + label, set.mean);
    rows.push_back({label, set.mean});
  };
  switch (param) {
    case SweepParam::epsilon:
      if (cfg.epsilon_grid.empty()) throw ValidationError("sweep epsilon: the epsilon grid is empty");
      for (double e : cfg.epsilon_grid) {
        PolicyParams p = cfg.params;
        p.epsilon = e;
        p.validate();
        point(grid_label(e), p, cfg.sim);
      }
      break;
    case SweepParam::risk:
      if (cfg.risk_grid.empty()) throw ValidationError("sweep risk: the risk grid is empty");
      for (double r : cfg.risk_grid) {
        PolicyParams p = cfg.params;
        p.risk_factor = r;
        p.validate();
        point(grid_label(r), p, cfg.sim);
      }
      break;
    case SweepParam::machines:
      if (cfg.machine_grid.empty()) throw ValidationError("sweep machines: the machine grid is empty");
      for (int m : cfg.machine_grid) {
        SimulationConfig s = cfg.sim;
        s.machine_count = m;
        s.validate();
        point(std::to_string(m), cfg.params, s);
      }
      break;
  }
  write_grid(out, std::string("sweep_") + to_string(param), to_string(param), rows);
  return rows;
}

/// compare: every policy on the same workload and the same seeds; one row per
/// policy in `compare`, plus `compare_policy=<name>` and its CDFs.
inline std::vector<GridRow> compare(const ExperimentConfig& cfg, const OutputDir& out) {
  cfg.validate();
  if (cfg.policies.empty()) throw ValidationError("compare: the policy list is empty");
  for (const auto& p : cfg.policies) make_policy(p, cfg.params);
  const auto workload = load_workload(cfg);
  std::vector<GridRow> rows;
  for (const auto& p : cfg.policies) {
    const auto set = run_replications(workload, p, cfg.params, cfg.sim, cfg.replications);
    out.write("compare_policy=" + p, set.mean);
    const auto flows = pooled_flowtimes(set.runs);
    out.write("compare_policy=" + p + "_cdf_small", cdf(flows, kSmallJobCdf.lo, kSmallJobCdf.hi, kSmallJobCdf.step));
    out.write("compare_policy=" + p + "_cdf_big", cdf(flows, kBigJobCdf.lo, kBigJobCdf.hi, kBigJobCdf.step));
    rows.push_back({p, set.mean});
  }
  write_grid(out, "compare", "policy", rows);
  return rows;
}

inline nlohmann::ordered_json to_json(const BoundReport& rep) {
  nlohmann::ordered_json j;
  j["risk"] = rep.risk;
  j["machines"] = rep.machines;
  j["slack_slots"] = rep.slack_slots;
  j["pass"] = rep.pass();
  j["min_rate"] = round_sig6(rep.min_rate());
  auto& jobs = j["jobs"] = nlohmann::ordered_json::array();
  for (const auto& b : rep.jobs) {
    jobs.push_back({{"job", b.name},
                    {"bound_s", round_sig6(b.bound_s)},
                    {"claimed_probability", round_sig6(b.claimed_min_probability)},
                    {"satisfied", b.satisfied},
                    {"replications", b.replications},
                    {"rate", round_sig6(b.rate())},
                    {"wilson_hi", round_sig6(b.interval.hi)},
                    {"worst_excess_s", round_sig6(b.worst_excess_s)},
                    {"pass", b.pass()}});
  }
  return j;
}

/// verify-bounds: the offline policy on a bulk workload, checked per job
/// against E_r + r sd_r + f_s / M (+2 slots) over `replications` seeds.
/// Risk factors at or below 1 are checked without a probability claim.
inline BoundReport verify_bounds(const ExperimentConfig& cfg, const OutputDir& out) {
  cfg.validate();
  const auto workload = load_workload(cfg);
  const RiskFactor risk{cfg.params.risk_factor};
  const auto rep = risk.bound_meaningful() && cfg.replications >= 100
                       ? check_theorem1(workload, cfg.sim.machine_count, risk, cfg.replications, 2.0, cfg.sim.seed)
                       : evaluate_offline_bound(workload, cfg.sim.machine_count, risk, cfg.replications, 2.0,
                                                cfg.sim.seed);
  out.write_raw("verify-bounds_risk=" + grid_label(cfg.params.risk_factor) + ".json", to_json(rep).dump(2) + '\n');
  return rep;
}

}  // namespace clonesim
