#include <algorithm>
#include <chrono>
#include <cmath>

#include "uavplan/errors.hpp"
#include "uavplan/planner.hpp"

namespace uavplan {

namespace {

constexpr double kScheduleFloor = 1e-9;

struct StepOutcome {
  bool ok = false;
  double eta = 0.0;
  int newton_steps = 0;
  int retries = 0;
};

bool blockage_modeled(const Scenario& scn, const PlannerOptions& opts) {
  return opts.channel_model == ChannelModel::BlockageAware && scn.L() > 0;
}

Grid effective_cbar(const Scenario& scn, const PlannerOptions& opts, const BlockageState& b) {
  if (opts.channel_model == ChannelModel::AlwaysLoS) return Grid::Ones(scn.K(), scn.N());
  if (scn.L() == 0) return Grid::Ones(scn.K(), scn.N());
  return b.c_bar;
}

// min_k (1/N) sum_n s log2(1 + gamma h_LB)
double lower_bound_min_rate(const Scenario& scn, const Trajectory& traj, const Schedule& s, const Grid& cbar,
                            std::vector<double>* per_gn = nullptr) {
  const Grid r = lower_bound_rates(scn, traj, cbar);
  double worst = kInf;
  if (per_gn) per_gn->clear();
  for (int k = 0; k < scn.K(); ++k) {
    const double v = s.row(k).dot(r.row(k)) / scn.N();
    if (per_gn) per_gn->push_back(v);
    worst = std::min(worst, v);
  }
  return worst;
}

// Partial maximization of the blockage block at a fixed trajectory: every
// pair takes the largest c_bar the relaxed rows admit under the current a.
void refresh_blockage(const Scenario& scn, const PlannerOptions& opts, const Trajectory& traj, BlockageState& b) {
  if (!blockage_modeled(scn, opts)) return;
  for (int k = 0; k < scn.K(); ++k) {
    for (int j = 0; j < scn.N(); ++j) maximize_pair_blockage(scn, traj.q[static_cast<std::size_t>(j + 1)], k, j, b);
  }
}

// One convexified trajectory update with trust-region fallback (lines 7-8).
StepOutcome trajectory_step(const Scenario& scn, const PlannerOptions& opts, const Schedule& s, Trajectory& traj,
                            BlockageState& b, PlanReport& report) {
  StepOutcome out;
  const bool modeled = blockage_modeled(scn, opts);
  double trust = kInf;
  for (int attempt = 0; attempt <= 5; ++attempt) {
    if (attempt == 1) trust = scn.uav.step_limit();
    if (attempt > 1) trust *= 0.5;
    try {
      BlockageState prepared = modeled ? interiorize_blockage(scn, traj, b) : b;
      const QtAuxGrid qt = qt_aux_grid(scn, traj, effective_cbar(scn, opts, prepared));
      TrajectoryProblem::Params params;
      params.channel_model = modeled ? ChannelModel::BlockageAware : ChannelModel::AlwaysLoS;
      params.avoidance = opts.avoidance;
      params.fixed_altitude = opts.fixed_altitude;
      params.trust_region = trust;
      params.schedule_floor = kScheduleFloor;
      TrajectoryProblem tp(scn, s, traj, prepared, qt, b.a, params);
      const SmoothResult res = solve_smooth(tp.problem(), opts.solver);
      out.newton_steps += res.newton_steps;
      if (!(res.max_violation <= opts.solver.tol_feas)) {
        throw InfeasibleError("trajectory subproblem returned an infeasible point");
      }
      Trajectory next;
      tp.decode(res.x, next, prepared);
      const Certificate cert = verify_plan(scn, next, Grid::Zero(scn.K(), scn.N()));
      if (!cert.all_passed() && opts.avoidance == AvoidanceMode::ExpandedHyperplane) {
        throw InfeasibleError("trajectory subproblem produced an unsafe trajectory");
      }

      // Surrogate soundness: QT rate never exceeds the lower-bound rate.
      const std::vector<double> sur = tp.surrogate_rates(res.x);
      std::vector<double> lb;
      lower_bound_min_rate(scn, next, s, effective_cbar(scn, opts, prepared), &lb);
      for (std::size_t k = 0; k < sur.size(); ++k) {
        if (sur[k] > lb[k] + 1e-9 * std::max(1.0, std::abs(lb[k]))) ++report.soundness_violations;
      }

      traj = std::move(next);
      b = std::move(prepared);
      out.ok = true;
      out.eta = tp.eta(res.x);
      return out;
    } catch (const std::runtime_error& e) {
      ++out.retries;
    }
  }
  return out;
}

void finalize_metrics(const Scenario& scn, const PlannerOptions& opts, PlanReport& rep) {
  rep.los = oracle_states(scn, rep.traj);
  const RateSummary rs = average_rates(rep.traj.q, scn.gns, rep.schedule, rep.los, scn.channel);
  rep.rates = rs.per_gn;
  rep.min_rate = rs.min_rate;
  rep.certificate = verify_plan(scn, rep.traj, rep.schedule);
  if (opts.channel_model == ChannelModel::BlockageAware && scn.L() > 0) {
    for (int k = 0; k < scn.K(); ++k) {
      for (int j = 0; j < scn.N(); ++j) {
        if (rep.schedule(k, j) < 0.5) continue;
        const double cb = rep.blockage.c_bar(k, j);
        if (rep.los(k, j) < 0.5 && cb > 0.01) ++rep.nlos_cbar_violations;
        if (rep.los(k, j) >= 0.5 && cb < 0.99) ++rep.los_cbar_shortfalls;
      }
    }
  }
}

}  // namespace

PlanReport bcd_solve(const Scenario& scn, const PlannerOptions& opts) {
  const auto t_start = std::chrono::steady_clock::now();
  opts.solver.validate();
  PlanReport rep;
  rep.scheme = "proposed";

  InitialState init = initialize(scn, opts);
  Trajectory traj = std::move(init.traj);
  BlockageState blk = std::move(init.blockage);
  Schedule s = std::move(init.schedule);
  const ChannelModel lp_model = blockage_modeled(scn, opts) ? ChannelModel::BlockageAware : ChannelModel::AlwaysLoS;

  rep.initial_value = lower_bound_min_rate(scn, traj, s, effective_cbar(scn, opts, blk));
  double f_old = rep.initial_value;
  double a = scn.algo.a0;
  blk.a = a;
  int succeeded = 0;

  for (int r = 1; r <= scn.algo.R_max; ++r) {
    const SchedulingResult sch = solve_scheduling(scn, traj, blk, lp_model, opts.solver);
    s = sch.schedule;
    rep.lp_value = sch.eta;

    const StepOutcome step = trajectory_step(scn, opts, s, traj, blk, rep);
    rep.newton_steps += step.newton_steps;
    rep.fallbacks += std::max(0, step.retries - (step.ok ? 0 : 1));
    double f = f_old;
    if (step.ok) {
      ++succeeded;
      f = step.eta;
    } else {
      ++rep.failed_subproblems;
    }

    // While the indicator is still soft its rows barely bind, so a flat trace
    // there says nothing about convergence.
    const bool settled = a >= kSharpnessFreeze || lp_model == ChannelModel::AlwaysLoS ||
                         std::isinf(scn.algo.eps_conv);
    if (a < kSharpnessFreeze) a *= scn.algo.eps_growth;
    blk.a = a;
    refresh_blockage(scn, opts, traj, blk);

    rep.trace.push_back(f);
    rep.iterations = r;
    const bool done = settled && std::abs(f - f_old) < scn.algo.eps_conv;
    f_old = f;
    if (done) {
      rep.converged = true;
      break;
    }
  }

  // Final fractional schedule at the converged trajectory, then rounding.
  const SchedulingResult fin = solve_scheduling(scn, traj, blk, lp_model, opts.solver);
  rep.fractional = fin.schedule;
  rep.lp_value = fin.eta;
  const Grid rates = lower_bound_rates(scn, traj, effective_cbar(scn, opts, blk));
  rep.schedule = round_schedule(fin.schedule, rates);

  // Refit the trajectory to the binary schedule with the indicator at full
  // sharpness, rebalancing slots between GNs before each refit.
  blk.a = std::max(a, kSharpnessFreeze);
  refresh_blockage(scn, opts, traj, blk);
  double eta_prev = -kInf;
  for (int p = 0; p < opts.polish_iterations; ++p) {
    rep.schedule = rebalance_schedule(rep.schedule, lower_bound_rates(scn, traj, effective_cbar(scn, opts, blk)));
    const StepOutcome step = trajectory_step(scn, opts, rep.schedule, traj, blk, rep);
    rep.newton_steps += step.newton_steps;
    if (!step.ok) {
      ++rep.failed_subproblems;
      break;
    }
    ++succeeded;
    ++rep.polish_iterations;
    rep.surrogate_value = step.eta;
    refresh_blockage(scn, opts, traj, blk);
    if (std::abs(step.eta - eta_prev) < scn.algo.eps_conv) break;
    eta_prev = step.eta;
  }
  if (rep.polish_iterations == 0) {
    rep.surrogate_value = lower_bound_min_rate(scn, traj, rep.schedule, effective_cbar(scn, opts, blk));
  }

  rep.traj = std::move(traj);
  rep.blockage = std::move(blk);
  finalize_metrics(scn, opts, rep);
  rep.failed = succeeded == 0 || !rep.certificate.all_passed();
  if (rep.failed_subproblems > 0) {
    rep.message = std::to_string(rep.failed_subproblems) + " trajectory subproblem(s) kept the previous iterate";
  }
  rep.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t_start).count();
  return rep;
}

}  // namespace uavplan
