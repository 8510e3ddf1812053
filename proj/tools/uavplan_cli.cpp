// uavplan: plan, verify and compare UAV data-harvesting trajectories.
//
//   uavplan plan    --scenario F --scheme S --out D [--seed N]
//   uavplan verify  --scenario F --traj F --sched F [--scheme S]
//   uavplan compare --scenario F --out D [--sweep T|pk|alphaN --values V1,V2,...]
//
// Exit codes: 0 ok, 1 I/O or schema error, 2 infeasible, 3 verification failed.

#include <filesystem>
#include <fstream>
#include <iostream>

#include <CLI11.hpp>

#include "uavplan/errors.hpp"
#include "uavplan/scenario_io.hpp"

namespace fs = std::filesystem;
using namespace uavplan;

namespace {

enum Exit { kOk = 0, kIoError = 1, kInfeasible = 2, kVerifyFailed = 3 };

int cmd_plan(const std::string& scenario_path, const std::string& scheme, const std::string& out_dir,
             std::optional<std::uint64_t> seed) {
  Scenario scn = load_scenario(scenario_path);
  if (seed) scn.algo.seed = *seed;
  const SolverConfig cfg = solver_config_from_env();
  PlanReport rep;
  try {
    rep = run_scheme(scn, scheme, cfg);
  } catch (const InfeasibleError& e) {
    std::cerr << "infeasible: " << e.what() << '\n';
    return kInfeasible;
  }
  write_run(out_dir, rep);
  std::cout << "scheme " << rep.scheme << ": min-rate " << format_number(rep.min_rate) << " bps/Hz, "
            << rep.iterations << " iterations";
  if (!rep.certificate.all_passed()) std::cout << ", verification FAILED";
  std::cout << '\n';
  std::cerr << "wall-clock " << rep.wall_seconds << " s\n";
  return kOk;
}

int cmd_verify(const std::string& scenario_path, const std::string& traj_path, const std::string& sched_path,
               const std::string& scheme) {
  const Scenario scn = verification_scenario(load_scenario(scenario_path), scheme);
  const Trajectory traj = read_trajectory_csv(traj_path);
  const Schedule sched = read_schedule_csv(sched_path, scn.K());
  const Certificate cert = verify_plan(scn, traj, sched);
  for (const auto& c : cert.checks) {
    std::cout << (c.passed ? "PASS " : "FAIL ") << c.name;
    if (!c.passed) std::cout << " (slot " << c.slot << "): " << c.detail;
    std::cout << '\n';
  }
  return cert.all_passed() ? kOk : kVerifyFailed;
}

int cmd_compare(const std::string& scenario_path, const std::string& out_dir, const std::string& sweep,
                const std::vector<double>& values) {
  const Scenario base = load_scenario(scenario_path);
  const SolverConfig cfg = solver_config_from_env();
  fs::create_directories(out_dir);
  std::ofstream out(fs::path(out_dir) / "compare.csv");
  if (!out) throw std::runtime_error("cannot write compare.csv in " + out_dir);
  out << "scheme,sweep_key,sweep_value,min_rate";
  for (int k = 1; k <= base.K(); ++k) out << ",R" << k;
  out << ",feasible\n";

  std::vector<std::optional<double>> points;
  if (sweep.empty()) {
    points.emplace_back(std::nullopt);
  } else {
    for (double v : values) points.emplace_back(v);
  }
  for (const auto& point : points) {
    Scenario scn = base;
    if (point) scn = apply_sweep(base, sweep, *point);
    for (const std::string& scheme : kSchemes) {
      out << scheme << ',' << (sweep.empty() ? "none" : sweep) << ','
          << (point ? format_number(*point) : "") << ',';
      try {
        const PlanReport rep = run_scheme(scn, scheme, cfg);
        const bool ok = !rep.failed;
        out << format_number(rep.min_rate);
        for (double r : rep.rates) out << ',' << format_number(r);
        out << ',' << (ok ? "true" : "false") << '\n';
        std::cout << scheme << (point ? " @ " + format_number(*point) : "") << ": " << format_number(rep.min_rate)
                  << '\n';
      } catch (const InfeasibleError& e) {
        out << "";
        for (int k = 0; k < scn.K(); ++k) out << ',';
        out << ",false\n";
        std::cout << scheme << (point ? " @ " + format_number(*point) : "") << ": infeasible (" << e.what()
                  << ")\n";
      }
      out.flush();
    }
  }
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"UAV trajectory and scheduling planner"};
  app.require_subcommand(1);

  std::string scenario, scheme = "proposed", out_dir, traj, sched, sweep, verify_scheme = "proposed";
  std::optional<std::uint64_t> seed;
  std::vector<double> values;

  auto* plan = app.add_subcommand("plan", "Plan a trajectory and schedule");
  plan->add_option("--scenario", scenario, "Scenario JSON file")->required();
  plan->add_option("--scheme", scheme, "proposed | los | los-faithful | fixed-alt | fixed-traj")
      ->check(CLI::IsMember({"proposed", "los", "los-faithful", "fixed-alt", "fixed-traj"}));
  plan->add_option("--out", out_dir, "Output directory")->required();
  plan->add_option("--seed", seed, "Override the scenario seed");

  auto* verify = app.add_subcommand("verify", "Check a plan against a scenario");
  verify->add_option("--scenario", scenario, "Scenario JSON file")->required();
  verify->add_option("--traj", traj, "trajectory.csv")->required();
  verify->add_option("--sched", sched, "schedule.csv")->required();
  verify->add_option("--scheme", verify_scheme, "Scheme that produced the plan (fixed-alt moves the endpoints)");

  auto* compare = app.add_subcommand("compare", "Run all schemes, optionally over a parameter sweep");
  compare->add_option("--scenario", scenario, "Scenario JSON file")->required();
  compare->add_option("--out", out_dir, "Output directory")->required();
  compare->add_option("--sweep", sweep, "T | pk | alphaN")->check(CLI::IsMember({"T", "pk", "alphaN"}));
  compare->add_option("--values", values, "Comma-separated sweep values")->delimiter(',');

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? kOk : kIoError;
  }

  try {
    if (*plan) return cmd_plan(scenario, scheme, out_dir, seed);
    if (*verify) return cmd_verify(scenario, traj, sched, verify_scheme);
    if (*compare) {
      if (!sweep.empty() && values.empty()) {
        std::cerr << "--sweep needs --values\n";
        return kIoError;
      }
      return cmd_compare(scenario, out_dir, sweep, values);
    }
  } catch (const InfeasibleError& e) {
    std::cerr << "infeasible: " << e.what() << '\n';
    return kInfeasible;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kIoError;
  }
  return kIoError;
}
