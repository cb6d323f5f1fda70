// Batch driver: simulate, sweep, compare, verify-bounds, gen-workload.
#include <chrono>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <map>
#include <string>
#include <vector>

#include "CLI11.hpp"

#include "clonesim/clonesim.hpp"

namespace {

using namespace clonesim;

constexpr int kExitRuntime = 1;
constexpr int kExitUsage = 2;

struct Flags {
  std::string workload;
  std::string policy = "srptms+c";
  double epsilon = 0.6;
  double risk = 3.0;
  int machines = 200;
  double speed = 1.0;
  std::uint64_t seed = 0;
  int replications = 1;
  std::string out = "out";
  std::string format = "csv";
  bool audit = false;

  int jobs = 500;
  std::string arrivals = "poisson";
  double arrival_rate = SyntheticConfig{}.arrival_rate;
  std::string family = "pareto";
  double alpha = 2.5;
  std::uint64_t workload_seed = 1;

  std::string sweep_param;
  std::vector<double> epsilons{0.2, 0.4, 0.6, 0.8, 1.0};
  std::vector<double> risks{0, 1, 2, 3, 4, 5, 6, 7, 8};
  std::vector<int> machine_grid{100, 200, 400};
  std::vector<std::string> policies{"srptms+c", "mantri", "sca-lite"};
};

std::vector<CLI::Option*> add_common(CLI::App& app, Flags& f) {
  app.add_option("--workload", f.workload, "job-summary CSV (default: synthetic workload)");
  app.add_option("--policy", f.policy, "scheduling policy")->check(CLI::IsMember(policy_names()));
  app.add_option("--epsilon", f.epsilon, "fraction of alive weight sharing the machines")->check(CLI::Range(1e-12, 1.0));
  app.add_option("--risk", f.risk, "risk factor r")->check(CLI::NonNegativeNumber);
  app.add_option("--machines", f.machines, "machine count M")->check(CLI::PositiveNumber);
  app.add_option("--speed", f.speed, "work per machine per slot")->check(CLI::PositiveNumber);
  app.add_option("--seed", f.seed, "base simulation seed; replication i uses seed + i");
  app.add_option("--replications", f.replications, "independent runs per point")->check(CLI::PositiveNumber);
  app.add_option("--out", f.out, "output directory");
  app.add_option("--format", f.format, "metric file format")->check(CLI::IsMember({"csv", "json"}));
  app.add_flag("--audit", f.audit, "check engine invariants every slot");

  std::vector<CLI::Option*> synthetic;
  synthetic.push_back(app.add_option("--jobs", f.jobs, "synthetic job count")->check(CLI::PositiveNumber));
  synthetic.push_back(
      app.add_option("--arrivals", f.arrivals, "synthetic arrivals")->check(CLI::IsMember({"bulk", "poisson"})));
  synthetic.push_back(
      app.add_option("--arrival-rate", f.arrival_rate, "synthetic Poisson rate (jobs/s)")->check(CLI::PositiveNumber));
  synthetic.push_back(app.add_option("--family", f.family, "synthetic task-duration family")
                          ->check(CLI::IsMember({"pareto", "deterministic", "lognormal"})));
  synthetic.push_back(app.add_option("--alpha", f.alpha, "synthetic Pareto shape (> 2)"));
  synthetic.push_back(app.add_option("--workload-seed", f.workload_seed, "synthetic workload seed"));
  return synthetic;
}

ExperimentConfig to_config(const Flags& f, const std::vector<CLI::Option*>& synthetic_opts) {
  ExperimentConfig cfg;
  bool synthetic_given = false;
  for (const auto* o : synthetic_opts) synthetic_given = synthetic_given || o->count() > 0;
  if (!f.workload.empty()) {
    if (synthetic_given) throw ValidationError("--workload cannot be combined with synthetic workload options");
    if (!std::filesystem::exists(f.workload)) throw IoError(f.workload, "workload file not found");
    cfg.workload_path = f.workload;
  } else {
    SyntheticConfig s;
    s.job_count = f.jobs;
    s.arrivals = f.arrivals == "bulk" ? ArrivalProcess::bulk : ArrivalProcess::poisson;
    s.arrival_rate = f.arrival_rate;
    s.family = parse_family(f.family);
    s.pareto_alpha = f.alpha;
    s.seed = f.workload_seed;
    cfg.synthetic = s;
  }
  cfg.policy = f.policy;
  cfg.params.epsilon = f.epsilon;
  cfg.params.risk_factor = f.risk;
  cfg.sim.machine_count = f.machines;
  cfg.sim.speed = f.speed;
  cfg.sim.seed = f.seed;
  cfg.sim.audit = f.audit;
  cfg.sim.record_utilization = false;
  cfg.replications = f.replications;
  cfg.out_dir = f.out;
  cfg.format = f.format == "json" ? ExportFormat::json : ExportFormat::csv;
  cfg.epsilon_grid = f.epsilons;
  cfg.risk_grid = f.risks;
  cfg.machine_grid = f.machine_grid;
  cfg.policies = f.policies;
  return cfg;
}

void print_row(const std::string& label, const SummaryMetrics& m) {
  std::printf("%-12s weighted %.6g s  unweighted %.6g s  jobs %lld  clones %lld\n", label.c_str(),
              m.weighted_avg_flowtime_s, m.unweighted_avg_flowtime_s, static_cast<long long>(m.job_count),
              static_cast<long long>(m.total_clone_copies));
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Cluster scheduling simulator with task cloning"};
  app.set_config("--config", "", "config file (TOML/INI); flags override its values");
  app.require_subcommand(1);
  app.fallthrough();

  Flags f;
  const auto synthetic_opts = add_common(app, f);

  auto* simulate_cmd = app.add_subcommand("simulate", "run one policy for N replications");
  auto* sweep_cmd = app.add_subcommand("sweep", "vary epsilon, risk or machine count");
  sweep_cmd->add_option("param", f.sweep_param, "parameter to sweep")
      ->required()
      ->check(CLI::IsMember({"epsilon", "risk", "machines"}));
  sweep_cmd->add_option("--epsilons", f.epsilons, "epsilon grid")->delimiter(',');
  sweep_cmd->add_option("--risks", f.risks, "risk grid")->delimiter(',');
  sweep_cmd->add_option("--machine-grid", f.machine_grid, "machine-count grid")->delimiter(',');
  auto* compare_cmd = app.add_subcommand("compare", "run several policies under common random numbers");
  compare_cmd->add_option("--policies", f.policies, "policies to compare")
      ->delimiter(',')
      ->check(CLI::IsMember(policy_names()));
  auto* verify_cmd = app.add_subcommand("verify-bounds", "check per-job flowtime bounds of the offline policy");
  auto* gen_cmd = app.add_subcommand("gen-workload", "write a synthetic workload as job-summary CSV");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitUsage;
  }

  const auto t0 = std::chrono::steady_clock::now();
  std::string name;
  try {
    if (verify_cmd->parsed() && app.get_option("--arrivals")->count() == 0) f.arrivals = "bulk";
    const ExperimentConfig cfg = to_config(f, synthetic_opts);
    if (gen_cmd->parsed()) {
      if (!cfg.synthetic) throw ValidationError("gen-workload needs synthetic options, not --workload");
      cfg.synthetic->validate();
    } else {
      cfg.validate();
    }
    if (verify_cmd->parsed()) require_bulk(load_workload(cfg), "verify-bounds");
    const OutputDir out(cfg.out_dir, cfg.format);

    if (simulate_cmd->parsed()) {
      name = "simulate";
      print_row(cfg.policy, simulate(cfg, out));
    } else if (sweep_cmd->parsed()) {
      name = "sweep";
      const SweepParam p = f.sweep_param == "epsilon" ? SweepParam::epsilon
                           : f.sweep_param == "risk"  ? SweepParam::risk
                                                      : SweepParam::machines;
      for (const auto& row : sweep(cfg, p, out)) print_row(f.sweep_param + "=" + row.label, row.metrics);
    } else if (compare_cmd->parsed()) {
      name = "compare";
      for (const auto& row : compare(cfg, out)) print_row(row.label, row.metrics);
    } else if (verify_cmd->parsed()) {
      name = "verify-bounds";
      const auto rep = verify_bounds(cfg, out);
      std::printf("jobs %zu  min satisfaction rate %.4f  %s\n", rep.jobs.size(), rep.min_rate(),
                  rep.pass() ? "PASS" : "FAIL");
      write_run_meta(out, name, std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count());
      return rep.pass() ? 0 : kExitRuntime;
    } else if (gen_cmd->parsed()) {
      name = "gen-workload";
      const auto jobs = gen_synthetic(*cfg.synthetic);
      const auto path = (std::filesystem::path(cfg.out_dir) / "gen-workload.csv").string();
      write_job_summaries(path, jobs);
      std::printf("wrote %zu jobs to %s\n", jobs.size(), path.c_str());
    }
    write_run_meta(out, name, std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count());
  } catch (const IoError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return name.empty() ? kExitUsage : kExitRuntime;
  } catch (const ValidationError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitUsage;
  } catch (const ParseError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitUsage;
  } catch (const ContractError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return name.empty() ? kExitUsage : kExitRuntime;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitRuntime;
  }
  return 0;
}
