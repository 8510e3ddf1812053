#pragma once

#include <vector>

#include "uavplan/planner.hpp"

namespace uavplan {

enum class LosAvoidance {
  Safe,           ///< expanded-building hyperplanes, as in the proposed scheme
  RawBuildings,   ///< hyperplanes on the raw buildings at the slot points only
};

/// BCD with every channel assumed LoS (c_bar = 1).
PlanReport plan_los_based(const Scenario& scn, LosAvoidance mode = LosAvoidance::Safe,
                          const PlannerOptions& base = {});

/// Altitude used by the fixed-altitude scheme: tallest building + 60 m.
double fixed_flight_altitude(const Scenario& scn);

/// The scenario as flown by the fixed-altitude scheme: qI and qF moved to the
/// fixed altitude. Throws InfeasibleError if that altitude is outside [Hmin, Hmax].
Scenario fixed_altitude_scenario(const Scenario& scn);

/// BCD with z frozen at fixed_flight_altitude for every slot.
PlanReport plan_fixed_altitude(const Scenario& scn, const PlannerOptions& base = {});

enum class VisitOrder { NearestNeighbor, Exhaustive };
enum class HoverSplit { Equal, InverseRate };

struct FixedTrajectoryOptions {
  VisitOrder order = VisitOrder::NearestNeighbor;
  HoverSplit hover = HoverSplit::Equal;
  SolverConfig solver;
};

/// Shortest 2-D path from a to b at constant altitude around the given
/// axis-aligned obstacle rectangles (open interiors). Returns the polyline
/// including both endpoints. Throws InfeasibleError when no path exists.
struct Rect2 {
  double x0, y0, x1, y1;
};
std::vector<Eigen::Vector2d> route_around(const Eigen::Vector2d& a, const Eigen::Vector2d& b,
                                          const std::vector<Rect2>& obstacles);

/// Hover-and-fly tour at Hmin over every GN; only the schedule is optimized.
/// Throws InfeasibleError when the tour does not fit in T.
PlanReport plan_fixed_trajectory(const Scenario& scn, const FixedTrajectoryOptions& opts = {});

}  // namespace uavplan
