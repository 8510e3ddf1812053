#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "uavplan/baselines.hpp"
#include "uavplan/planner.hpp"

namespace uavplan {

/// dB to linear power ratio.
double db_to_linear(double db);
/// dBm to watts.
double dbm_to_watts(double dbm);

/// Parses and validates a scenario document. Errors carry `source:line:`
/// prefixes pointing at the offending key where it can be located.
Scenario parse_scenario(const std::string& text, const std::string& source = "<scenario>");
Scenario load_scenario(const std::filesystem::path& path);
nlohmann::json scenario_to_json(const Scenario& scn);

/// Solver settings with UAVPLAN_* environment overrides applied.
SolverConfig solver_config_from_env();

// ---------------------------------------------------------------- schemes ---

inline const std::vector<std::string> kSchemes{"proposed", "los", "fixed-alt", "fixed-traj"};

/// Runs one named scheme ("proposed", "los", "los-faithful", "fixed-alt",
/// "fixed-traj"). Throws DomainError for unknown names.
PlanReport run_scheme(const Scenario& scn, const std::string& scheme, const SolverConfig& cfg = {});

/// Scenario a scheme's plan must be verified against (fixed-alt moves the
/// endpoints to its flight altitude).
Scenario verification_scenario(const Scenario& scn, const std::string& scheme);

/// Copy of scn with one sweep parameter replaced ("T", "pk" in dBm, "alphaN").
Scenario apply_sweep(const Scenario& scn, const std::string& key, double value);

// ------------------------------------------------------------------ files ---

void write_trajectory_csv(const std::filesystem::path& p, const Trajectory& traj);
void write_schedule_csv(const std::filesystem::path& p, const Schedule& sched);
void write_states_csv(const std::filesystem::path& p, const Grid& los);
void write_trace_csv(const std::filesystem::path& p, const std::vector<double>& trace);
nlohmann::json report_to_json(const PlanReport& rep);
/// Writes the five run files into `dir` (created if needed).
void write_run(const std::filesystem::path& dir, const PlanReport& rep);

Trajectory read_trajectory_csv(const std::filesystem::path& p);
/// K is needed because idle slots carry no GN index.
Schedule read_schedule_csv(const std::filesystem::path& p, int K);

/// Fixed-precision text of a double (12 significant digits).
std::string format_number(double v);

}  // namespace uavplan
