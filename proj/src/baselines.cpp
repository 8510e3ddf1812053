#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <numeric>
#include <queue>

#include "uavplan/baselines.hpp"
#include "uavplan/errors.hpp"

namespace uavplan {

using Vec2 = Eigen::Vector2d;

// ------------------------------------------------------------- LoS-based ---

PlanReport plan_los_based(const Scenario& scn, LosAvoidance mode, const PlannerOptions& base) {
  PlannerOptions opts = base;
  opts.channel_model = ChannelModel::AlwaysLoS;
  opts.avoidance = mode == LosAvoidance::Safe ? AvoidanceMode::ExpandedHyperplane : AvoidanceMode::RawDiscrete;
  PlanReport rep = bcd_solve(scn, opts);
  rep.scheme = mode == LosAvoidance::Safe ? "los" : "los-faithful";
  return rep;
}

// -------------------------------------------------------- fixed altitude ---

double fixed_flight_altitude(const Scenario& scn) {
  double top = 0.0;
  for (const Building& b : scn.buildings) top = std::max(top, b.height);
  return top + 60.0;
}

Scenario fixed_altitude_scenario(const Scenario& scn) {
  const double z = fixed_flight_altitude(scn);
  if (z < scn.uav.h_min || z > scn.uav.h_max) {
    throw InfeasibleError("fixed flight altitude " + std::to_string(z) + " m is outside [Hmin, Hmax]");
  }
  Scenario out = scn;
  out.uav.q_initial.z() = z;
  out.uav.q_final.z() = z;
  return out;
}

PlanReport plan_fixed_altitude(const Scenario& scn, const PlannerOptions& base) {
  const Scenario flat = fixed_altitude_scenario(scn);
  PlannerOptions opts = base;
  opts.fixed_altitude = fixed_flight_altitude(scn);
  PlanReport rep = bcd_solve(flat, opts);
  rep.scheme = "fixed-alt";
  return rep;
}

// ------------------------------------------------------ fixed trajectory ---

namespace {

bool segment_hits_rect(const Vec2& a, const Vec2& b, const Rect2& r) {
  const Box box{Vec3(r.x0, r.y0, -1.0), Vec3(r.x1, r.y1, 1.0)};
  return segment_intersects_interior(Segment3{Vec3(a.x(), a.y(), 0.0), Vec3(b.x(), b.y(), 0.0)}, box);
}

bool inside_rect(const Vec2& p, const Rect2& r) {
  return p.x() > r.x0 && p.x() < r.x1 && p.y() > r.y0 && p.y() < r.y1;
}

double polyline_length(const std::vector<Vec2>& p) {
  double len = 0.0;
  for (std::size_t i = 1; i < p.size(); ++i) len += (p[i] - p[i - 1]).norm();
  return len;
}

// A constant-velocity piece of the tour (hover pieces have a == b).
struct Piece {
  Vec3 a, b;
  double duration;
};

}  // namespace

std::vector<Vec2> route_around(const Vec2& a, const Vec2& b, const std::vector<Rect2>& obstacles) {
  for (const Rect2& r : obstacles) {
    if (inside_rect(a, r) || inside_rect(b, r)) throw InfeasibleError("route endpoint lies inside an obstacle");
  }
  auto visible = [&](const Vec2& p, const Vec2& q) {
    for (const Rect2& r : obstacles) {
      if (segment_hits_rect(p, q, r)) return false;
    }
    return true;
  };
  if (visible(a, b)) return {a, b};

  // Nodes: endpoints plus obstacle corners nudged outward.
  constexpr double kNudge = 1e-6;
  std::vector<Vec2> nodes{a, b};
  for (const Rect2& r : obstacles) {
    for (const Vec2& c : {Vec2(r.x0 - kNudge, r.y0 - kNudge), Vec2(r.x1 + kNudge, r.y0 - kNudge),
                          Vec2(r.x1 + kNudge, r.y1 + kNudge), Vec2(r.x0 - kNudge, r.y1 + kNudge)}) {
      bool free = true;
      for (const Rect2& o : obstacles) free = free && !inside_rect(c, o);
      if (free) nodes.push_back(c);
    }
  }
  const std::size_t n = nodes.size();
  std::vector<double> dist(n, kInf);
  std::vector<std::size_t> parent(n, n);
  using Item = std::pair<double, std::size_t>;
  std::priority_queue<Item, std::vector<Item>, std::greater<>> pq;
  dist[0] = 0.0;
  pq.emplace(0.0, 0);
  while (!pq.empty()) {
    const auto [d, u] = pq.top();
    pq.pop();
    if (d > dist[u]) continue;
    if (u == 1) break;
    for (std::size_t v = 0; v < n; ++v) {
      if (v == u) continue;
      const double nd = d + (nodes[v] - nodes[u]).norm();
      if (nd < dist[v] && visible(nodes[u], nodes[v])) {
        dist[v] = nd;
        parent[v] = u;
        pq.emplace(nd, v);
      }
    }
  }
  if (!std::isfinite(dist[1])) throw InfeasibleError("no obstacle-free route between waypoints");
  std::vector<Vec2> path;
  for (std::size_t v = 1; v != n; v = parent[v]) {
    path.push_back(nodes[v]);
    if (v == 0) break;
  }
  std::reverse(path.begin(), path.end());
  return path;
}

PlanReport plan_fixed_trajectory(const Scenario& scn, const FixedTrajectoryOptions& opts) {
  const auto t_start = std::chrono::steady_clock::now();
  scn.validate();
  const auto& uav = scn.uav;
  const double z = uav.h_min;
  const int K = scn.K();

  std::vector<Rect2> obstacles;
  for (int l = 0; l < scn.L(); ++l) {
    const ExpandedBuilding e = scn.avoidance_box(l);
    if (e.height() <= z) continue;
    const Vec3& c = e.base.center;
    obstacles.push_back({c.x() - e.half_width(), c.y() - e.half_length(), c.x() + e.half_width(),
                         c.y() + e.half_length()});
  }

  const Vec2 start = uav.q_initial.head<2>();
  const Vec2 finish = uav.q_final.head<2>();
  std::vector<Vec2> hover(static_cast<std::size_t>(K));
  for (int k = 0; k < K; ++k) hover[static_cast<std::size_t>(k)] = scn.gns[static_cast<std::size_t>(k)].head<2>();

  auto leg = [&](const Vec2& p, const Vec2& q) { return polyline_length(route_around(p, q, obstacles)); };

  // Visiting order.
  std::vector<int> order;
  if (opts.order == VisitOrder::Exhaustive) {
    if (K > 6) throw DomainError("exhaustive visiting order is limited to K <= 6");
    std::vector<int> perm(static_cast<std::size_t>(K));
    std::iota(perm.begin(), perm.end(), 0);
    double best = kInf;
    do {
      double len = 0.0;
      Vec2 at = start;
      for (int k : perm) {
        len += leg(at, hover[static_cast<std::size_t>(k)]);
        at = hover[static_cast<std::size_t>(k)];
      }
      len += leg(at, finish);
      if (len < best) {
        best = len;
        order = perm;
      }
    } while (std::next_permutation(perm.begin(), perm.end()));
  } else {
    std::vector<bool> seen(static_cast<std::size_t>(K), false);
    Vec2 at = start;
    for (int step = 0; step < K; ++step) {
      int pick = -1;
      double best = kInf;
      for (int k = 0; k < K; ++k) {
        if (seen[static_cast<std::size_t>(k)]) continue;
        const double d = leg(at, hover[static_cast<std::size_t>(k)]);
        if (d < best) {
          best = d;
          pick = k;
        }
      }
      seen[static_cast<std::size_t>(pick)] = true;
      order.push_back(pick);
      at = hover[static_cast<std::size_t>(pick)];
    }
  }

  // Tour pieces: descend/climb to Hmin, routed legs, hovers, final vertical leg.
  std::vector<Piece> pieces;
  std::vector<std::size_t> hover_piece;
  auto add_move = [&](const Vec3& a, const Vec3& b) {
    const double t = std::max((b - a).norm() / uav.v_max, std::abs(b.z() - a.z()) / uav.v_z);
    if (t > 0.0) pieces.push_back({a, b, t});
  };
  Vec3 at3(start.x(), start.y(), z);
  add_move(uav.q_initial, at3);
  auto route_to = [&](const Vec2& target) {
    const auto path = route_around(at3.head<2>(), target, obstacles);
    for (std::size_t i = 1; i < path.size(); ++i) {
      const Vec3 next(path[i].x(), path[i].y(), z);
      add_move(at3, next);
      at3 = next;
    }
  };
  for (int k : order) {
    route_to(hover[static_cast<std::size_t>(k)]);
    hover_piece.push_back(pieces.size());
    pieces.push_back({at3, at3, 0.0});
  }
  route_to(finish);
  add_move(at3, uav.q_final);

  double t_fly = 0.0;
  for (const Piece& p : pieces) t_fly += p.duration;
  if (t_fly > uav.T * (1.0 + 1e-12)) {
    throw InfeasibleError("fixed tour needs " + std::to_string(t_fly) + " s but T = " + std::to_string(uav.T) +
                          " s; the UAV cannot visit all GNs even at maximum speed");
  }
  const double residual = std::max(0.0, uav.T - t_fly);
  std::vector<double> weight(static_cast<std::size_t>(K), 1.0);
  if (opts.hover == HoverSplit::InverseRate) {
    for (int i = 0; i < K; ++i) {
      const int k = order[static_cast<std::size_t>(i)];
      const Vec3 h(hover[static_cast<std::size_t>(k)].x(), hover[static_cast<std::size_t>(k)].y(), z);
      const Vec3& w = scn.gns[static_cast<std::size_t>(k)];
      const ChannelState st = true_channel_state(h, w, scn.buildings);
      weight[static_cast<std::size_t>(i)] = 1.0 / spectral_efficiency(1.0, gain((h - w).norm(), st, scn.channel),
                                                                      scn.channel);
    }
  }
  const double wsum = std::accumulate(weight.begin(), weight.end(), 0.0);
  for (std::size_t i = 0; i < hover_piece.size(); ++i) pieces[hover_piece[i]].duration = residual * weight[i] / wsum;

  auto position = [&](double t) -> Vec3 {
    for (const Piece& p : pieces) {
      if (t <= p.duration) return p.duration > 0.0 ? Vec3(p.a + (p.b - p.a) * (t / p.duration)) : p.b;
      t -= p.duration;
    }
    return uav.q_final;
  };

  PlanReport rep;
  rep.scheme = "fixed-traj";
  rep.traj.q.resize(static_cast<std::size_t>(uav.N + 1));
  for (int n = 0; n <= uav.N; ++n) rep.traj.q[static_cast<std::size_t>(n)] = position(uav.slot_length() * n);
  rep.traj.q.front() = uav.q_initial;
  rep.traj.q.back() = uav.q_final;

  rep.los = oracle_states(scn, rep.traj);
  BlockageState blk(K, scn.L(), uav.N, scn.algo.U);
  blk.c_bar = rep.los;
  const SchedulingResult sch = solve_scheduling(scn, rep.traj, blk, ChannelModel::BlockageAware, opts.solver);
  rep.fractional = sch.schedule;
  rep.lp_value = sch.eta;
  rep.surrogate_value = sch.eta;
  rep.schedule = round_schedule(sch.schedule, lower_bound_rates(scn, rep.traj, rep.los));
  rep.blockage = std::move(blk);
  const RateSummary rs = average_rates(rep.traj.q, scn.gns, rep.schedule, rep.los, scn.channel);
  rep.rates = rs.per_gn;
  rep.min_rate = rs.min_rate;
  rep.certificate = verify_plan(scn, rep.traj, rep.schedule);
  rep.failed = !rep.certificate.all_passed();
  rep.converged = true;
  rep.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t_start).count();
  return rep;
}

}  // namespace uavplan
