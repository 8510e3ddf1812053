#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "uavplan/channel.hpp"
#include "uavplan/convex_engine.hpp"
#include "uavplan/geometry.hpp"

namespace uavplan {

/// Positions are divided by this length inside the optimizer.
inline constexpr double kLengthScale = 100.0;
/// Closed-form slack for the strict separating-hyperplane inequality [m^2].
inline constexpr double kHyperplaneSlack = 1e-6;
/// The indicator sharpness stops growing once it reaches this value.
inline constexpr double kSharpnessFreeze = 1e3;

struct UavLimits {
  Vec3 q_initial{Vec3::Zero()};
  Vec3 q_final{Vec3::Zero()};
  double T = 25.0;  ///< flight period [s]
  int N = 50;       ///< number of slots
  double v_max = 10.0;
  double v_z = 5.0;
  double h_min = 30.0;
  double h_max = 200.0;

  double slot_length() const { return T / N; }
  double step_limit() const { return slot_length() * v_max; }
  double vertical_step_limit() const { return slot_length() * v_z; }
};

struct AlgorithmParams {
  int U = 10;               ///< segment samples per UAV-GN link
  double M = 300.0;         ///< big-M multiplier (meters before scaling, m^2 / m)
  double a0 = 0.01;         ///< initial indicator sharpness
  double eps_growth = 1.1;  ///< sharpness growth per outer iteration
  double eps_conv = 1e-4;   ///< convergence threshold on f [bps/Hz]
  int R_max = 60;           ///< outer iteration cap
  std::uint64_t seed = 1;
};

struct Scenario {
  std::vector<Vec3> gns;
  std::vector<Building> buildings;
  UavLimits uav;
  ChannelParams channel;
  AlgorithmParams algo;

  int K() const { return static_cast<int>(gns.size()); }
  int L() const { return static_cast<int>(buildings.size()); }
  int N() const { return uav.N; }

  /// Building l inflated for continuous-path avoidance (d_max = delta V_max).
  ExpandedBuilding avoidance_box(int l) const;

  /// Throws ScenarioError describing the first violated invariant.
  void validate() const;
};

struct Trajectory {
  std::vector<Vec3> q;  ///< q[0..N]
};

/// K x N weights over slots 1..N (column j is slot n = j + 1).
using Schedule = Grid;

/// Relaxed blockage variables plus the indicator sharpness.
struct BlockageState {
  int K = 0, L = 0, N = 0, U = 0;
  Grid c_bar;                 ///< K x N
  std::vector<double> rho;    ///< (k, l, j)
  std::vector<double> beta;   ///< (k, l, j, u, i)
  double a = 1.0;

  BlockageState() = default;
  BlockageState(int K, int L, int N, int U);

  std::size_t rho_index(int k, int l, int j) const {
    return (static_cast<std::size_t>(k) * L + l) * N + j;
  }
  std::size_t beta_index(int i, int u, int k, int l, int j) const {
    return (rho_index(k, l, j) * static_cast<std::size_t>(U + 1) + u) * 3 + i;
  }
  double& rho_at(int k, int l, int j) { return rho[rho_index(k, l, j)]; }
  double rho_at(int k, int l, int j) const { return rho[rho_index(k, l, j)]; }
  double& beta_at(int i, int u, int k, int l, int j) { return beta[beta_index(i, u, k, l, j)]; }
  double beta_at(int i, int u, int k, int l, int j) const { return beta[beta_index(i, u, k, l, j)]; }
};

struct QtAuxGrid {
  Grid lambda;  ///< K x N
  Grid kappa;   ///< K x N
};

// ------------------------------------------------------------ indicators ---

/// 1 if x >= 1 else 0.
double indicator_exact(double x);
/// max(a x - a + 1, x / a).
double indicator_approx(double x, double a);

/// Tangent of indicator_approx at x_r, as slope / intercept.
struct AffineFn {
  double slope = 0.0;
  double intercept = 0.0;
  double operator()(double x) const { return slope * x + intercept; }
};
AffineFn indicator_lb_fn(double a, double x_r);
double indicator_lb(double x, double a, double x_r);

// --------------------------------------------------------------- options ---

enum class ChannelModel { BlockageAware, AlwaysLoS };
enum class AvoidanceMode { ExpandedHyperplane, RawDiscrete };

struct PlannerOptions {
  ChannelModel channel_model = ChannelModel::BlockageAware;
  AvoidanceMode avoidance = AvoidanceMode::ExpandedHyperplane;
  std::optional<double> fixed_altitude;  ///< freezes z for n = 0..N
  int polish_iterations = 12;            ///< trajectory refits after rounding
  SolverConfig solver;
};

// ------------------------------------------------------------ operations ---

struct InitialState {
  Trajectory traj;
  Schedule schedule;
  BlockageState blockage;
};

/// Altitude of the initial straight-line flight.
double lifted_altitude(const Scenario& scn);

/// Lifted straight line q_I -> q_F, round-robin schedule, oracle-seeded blockage.
/// Throws InfeasibleError when no such trajectory fits in T.
InitialState initialize(const Scenario& scn, const PlannerOptions& opts = {});

/// Per-slot SE coefficients log2(1 + pk h_LB / sigma2) (K x N).
Grid lower_bound_rates(const Scenario& scn, const Trajectory& traj, const Grid& c_bar);

/// Variables s[k][n] (index k * N + j) followed by eta (last index).
LPProblem build_scheduling_lp(const Scenario& scn, const Trajectory& traj, const BlockageState& blockage,
                              ChannelModel model = ChannelModel::BlockageAware);

struct SchedulingResult {
  Schedule schedule;
  double eta = 0.0;
};
SchedulingResult solve_scheduling(const Scenario& scn, const Trajectory& traj, const BlockageState& blockage,
                                  ChannelModel model, const SolverConfig& cfg = {});

/// argmax_k s[k][n] r_k[n] per slot (lowest index on ties); idle when all s <= 1e-6.
Schedule round_schedule(const Schedule& s_frac, const Grid& rates);

/// Local search over binary schedules: moves or swaps single slots between GNs
/// while that raises min_k (1/N) sum_n s_k[n] r_k[n], or keeps it and narrows
/// the spread of the per-GN rates. Slots stay exclusive.
Schedule rebalance_schedule(const Schedule& s, const Grid& rates);

/// Big-M constants of the x, y and z blockage rows of building l (meters before scaling).
struct BigM {
  double x = 0.0, y = 0.0, z = 0.0;
};
BigM big_m_for(const Scenario& scn, int l);

/// Exact (unlinearized) violation of blockage row i at sample u, in meters before scaling
/// (m^2 for i = 0, 1; m for i = 2). Positive means the expanded row fails at beta = 1.
double blockage_row_violation(const Scenario& scn, const Vec3& q, int k, int l, int u, int i);

/// Sets beta, rho and c_bar of pair (k, j) to their largest values allowed
/// by the relaxed rows at trajectory point q, using indicator_approx(., a).
void maximize_pair_blockage(const Scenario& scn, const Vec3& q, int k, int j, BlockageState& b);

/// Moves the blockage state strictly inside its box and row constraints at the
/// given trajectory, so it can seed the barrier solver.
BlockageState interiorize_blockage(const Scenario& scn, const Trajectory& traj, const BlockageState& b);

QtAuxGrid qt_aux_grid(const Scenario& scn, const Trajectory& traj, const Grid& c_bar);

/// Convexified trajectory / LoS-indicator subproblem at a previous iterate.
class TrajectoryProblem {
 public:
  struct Params {
    ChannelModel channel_model = ChannelModel::BlockageAware;
    AvoidanceMode avoidance = AvoidanceMode::ExpandedHyperplane;
    std::optional<double> fixed_altitude;
    double trust_region = kInf;     ///< max |q - q_prev| per coordinate [m]
    double schedule_floor = 1e-9;   ///< pairs with s <= floor are left out
  };

  /// Throws InfeasibleError when `prev` is not strictly feasible.
  TrajectoryProblem(const Scenario& scn, const Schedule& sched, const Trajectory& prev_traj,
                    const BlockageState& prev, const QtAuxGrid& qt, double a, const Params& params);

  const SmoothProblem& problem() const { return problem_; }
  SmoothProblem& problem() { return problem_; }

  /// Decodes x into a trajectory, updating the blockage of modeled pairs.
  void decode(std::span<const double> x, Trajectory& traj, BlockageState& blockage) const;
  double eta(std::span<const double> x) const { return x[static_cast<std::size_t>(eta_index_)]; }
  /// Surrogate rate min_k R_k at x, evaluated without eta.
  double surrogate_min_rate(std::span<const double> x) const;
  std::vector<double> surrogate_rates(std::span<const double> x) const;

  /// Number of variables per family, for diagnostics.
  int num_position_vars() const { return num_position_vars_; }
  int num_pairs() const { return static_cast<int>(pairs_.size()); }
  /// Rows eta <= mean slot rate, one per GN.
  const std::vector<std::size_t>& rate_rows() const { return rate_rows_; }
  /// Rows bounding each slot rate variable by its surrogate, grouped by GN.
  const std::vector<std::vector<std::size_t>>& slot_rows() const { return slot_rows_; }

 private:
  struct PairVars {
    int k = 0, j = 0;
    int c_bar = -1;
    int rho0 = -1;   // L consecutive
    int beta0 = -1;  // L * (U + 1) * 3 consecutive, ordered (l, u, i)
  };
  Vec3 position(std::span<const double> x, int n) const;
  double slot_rate(std::size_t row, std::span<const double> x) const;

  const Scenario* scn_;
  Params params_;
  int K_, L_, N_, U_;
  std::vector<std::array<int, 3>> qvar_;  // per n, -1 when fixed
  std::vector<Vec3> qfixed_;
  std::vector<PairVars> pairs_;
  int eta_index_ = -1;
  int num_position_vars_ = 0;
  std::vector<std::size_t> rate_rows_;
  std::vector<std::vector<std::size_t>> slot_rows_;
  SmoothProblem problem_;
};

// ---------------------------------------------------------- verification ---

struct CheckResult {
  std::string name;
  bool passed = true;
  int slot = -1;  ///< first offending slot (n), -1 if none
  std::string detail;
};

struct Certificate {
  std::vector<CheckResult> checks;
  bool all_passed() const;
  const CheckResult* find(const std::string& name) const;
};

/// Independent plan checks: mobility, discrete expanded-building clearance,
/// continuous-path clearance of the original buildings, schedule validity.
Certificate verify_plan(const Scenario& scn, const Trajectory& traj, const Schedule& sched);

// ------------------------------------------------------------ BCD driver ---

struct PlanReport {
  std::string scheme;
  Trajectory traj;
  Schedule schedule;           ///< binary
  Schedule fractional;         ///< last LP schedule
  Grid los;                    ///< oracle states (1 LoS / 0 NLoS)
  BlockageState blockage;      ///< final relaxed blockage state
  std::vector<double> rates;   ///< realized per-GN SE
  double min_rate = 0.0;
  double initial_value = 0.0;  ///< f^0
  std::vector<double> trace;   ///< f^r, r = 1..iterations
  double lp_value = 0.0;       ///< last fractional LP optimum
  double surrogate_value = 0.0;
  int iterations = 0;
  int polish_iterations = 0;
  int newton_steps = 0;
  int fallbacks = 0;              ///< trust-region retries
  int failed_subproblems = 0;     ///< steps that kept the previous iterate
  int soundness_violations = 0;   ///< surrogate above the lower-bound rate
  int nlos_cbar_violations = 0;   ///< scheduled, oracle NLoS, c_bar > 0.01
  int los_cbar_shortfalls = 0;    ///< scheduled, oracle LoS, c_bar < 0.99
  bool converged = false;
  bool failed = false;
  std::string message;
  double wall_seconds = 0.0;
  Certificate certificate;
};

/// Alternating scheduling LP / trajectory barrier solves with indicator annealing.
PlanReport bcd_solve(const Scenario& scn, const PlannerOptions& opts = {});

/// Oracle LoS grid (K x N) along a trajectory.
Grid oracle_states(const Scenario& scn, const Trajectory& traj);

}  // namespace uavplan
