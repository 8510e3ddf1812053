#include <algorithm>
#include <cmath>
#include <numbers>
#include <sstream>

#include "uavplan/errors.hpp"
#include "uavplan/planner.hpp"

namespace uavplan {

namespace {

std::string fmt_vec(const Vec3& v) {
  std::ostringstream os;
  os << "(" << v.x() << ", " << v.y() << ", " << v.z() << ")";
  return os.str();
}

bool footprints_overlap(const Building& a, const Building& b) {
  return std::abs(a.center.x() - b.center.x()) < a.half_width() + b.half_width() &&
         std::abs(a.center.y() - b.center.y()) < a.half_length() + b.half_length();
}

}  // namespace

// -------------------------------------------------------------- scenario ---

ExpandedBuilding Scenario::avoidance_box(int l) const {
  return expand_building(buildings.at(static_cast<std::size_t>(l)), uav.step_limit());
}

void Scenario::validate() const {
  auto fail = [](const std::string& msg) { throw ScenarioError(msg); };
  try {
    channel.validate();
  } catch (const DomainError& e) {
    fail(std::string("channel: ") + e.what());
  }
  if (gns.empty()) fail("gns: at least one ground node is required");
  if (uav.N < 1) fail("uav.N must be at least 1");
  if (!(uav.T > 0.0)) fail("uav.T must be positive");
  if (!(uav.v_max > 0.0 && uav.v_z > 0.0)) fail("uav.Vmax and uav.Vz must be positive");
  if (!(uav.h_min > 0.0 && uav.h_min <= uav.h_max)) fail("uav.Hmin must be positive and not above uav.Hmax");
  if (algo.U < 1) fail("solver.U must be at least 1");
  if (!(algo.M > 0.0)) fail("solver.M must be positive");
  if (!(algo.a0 > 0.0)) fail("solver.a0 must be positive");
  if (!(algo.eps_growth >= 1.0)) fail("solver.eps_growth must be at least 1");
  if (!(algo.eps_conv > 0.0)) fail("solver.eps_conv must be positive");
  if (algo.R_max < 1) fail("solver.Rmax must be at least 1");

  for (std::size_t l = 0; l < buildings.size(); ++l) {
    const Building& b = buildings[l];
    if (!(b.width > 0.0 && b.length > 0.0 && b.height > 0.0)) {
      fail("buildings[" + std::to_string(l) + "]: dimensions must be positive");
    }
    if (!(uav.step_limit() < b.min_dimension())) {
      fail("buildings[" + std::to_string(l) + "]: slot step T/N*Vmax = " + std::to_string(uav.step_limit()) +
           " m must be below the smallest building dimension");
    }
    for (std::size_t m = 0; m < l; ++m) {
      if (footprints_overlap(b, buildings[m])) {
        fail("buildings[" + std::to_string(l) + "] overlaps buildings[" + std::to_string(m) + "]");
      }
    }
  }

  double max_gn_z = -kInf;
  for (std::size_t k = 0; k < gns.size(); ++k) {
    const Vec3& w = gns[k];
    if (!w.allFinite()) fail("gns[" + std::to_string(k) + "]: coordinates must be finite");
    max_gn_z = std::max(max_gn_z, w.z());
    for (std::size_t l = 0; l < buildings.size(); ++l) {
      const Building& b = buildings[l];
      if (std::abs(w.x() - b.center.x()) < b.half_width() && std::abs(w.y() - b.center.y()) < b.half_length()) {
        fail("gns[" + std::to_string(k) + "] lies inside the footprint of buildings[" + std::to_string(l) + "]");
      }
    }
  }
  if (!(uav.h_min - max_gn_z >= 1.0)) fail("uav.Hmin must be at least 1 m above every ground node");

  for (const auto& [name, q] : {std::pair{"uav.qI", uav.q_initial}, std::pair{"uav.qF", uav.q_final}}) {
    if (!q.allFinite()) fail(std::string(name) + ": coordinates must be finite");
    if (q.z() < uav.h_min || q.z() > uav.h_max) {
      fail(std::string(name) + " altitude " + std::to_string(q.z()) + " outside [Hmin, Hmax]");
    }
    for (int l = 0; l < L(); ++l) {
      if (is_interior(avoidance_box(l), q)) {
        fail(std::string(name) + " " + fmt_vec(q) + " lies inside the safety margin of buildings[" +
             std::to_string(l) + "]");
      }
    }
  }
}

BlockageState::BlockageState(int K_, int L_, int N_, int U_)
    : K(K_), L(L_), N(N_), U(U_), c_bar(Grid::Zero(K_, N_)),
      rho(static_cast<std::size_t>(K_) * L_ * N_, 0.0),
      beta(static_cast<std::size_t>(K_) * L_ * N_ * (U_ + 1) * 3, 0.0) {}

// ------------------------------------------------------------ indicators ---

double indicator_exact(double x) { return x >= 1.0 ? 1.0 : 0.0; }

double indicator_approx(double x, double a) {
  if (!(a > 0.0)) throw DomainError("indicator sharpness must be positive");
  return std::max(a * x - a + 1.0, x / a);
}

AffineFn indicator_lb_fn(double a, double x_r) {
  if (!(a > 0.0)) throw DomainError("indicator sharpness must be positive");
  const double steep = a * x_r - a + 1.0;
  const double shallow = x_r / a;
  // Tangent of whichever branch attains the max at x_r (for a >= 1 this is
  // the x_r >= a / (a + 1) rule).
  if (steep >= shallow) return AffineFn{a, 1.0 - a};
  return AffineFn{1.0 / a, 0.0};
}

double indicator_lb(double x, double a, double x_r) { return indicator_lb_fn(a, x_r)(x); }

// ------------------------------------------------------- blockage helpers ---

BigM big_m_for(const Scenario& scn, int l) {
  const Building& b = scn.buildings.at(static_cast<std::size_t>(l));
  // Farthest the UAV can get from any GN: one endpoint plus half the path budget.
  double reach = 0.0;
  for (const Vec3& w : scn.gns) {
    reach = std::max({reach, (scn.uav.q_initial - w).norm(), (scn.uav.q_final - w).norm()});
  }
  reach += 0.5 * scn.uav.T * scn.uav.v_max;
  const double m_max = reach / (2.0 * std::numbers::sqrt2 * scn.algo.U);
  BigM out;
  out.x = std::max(scn.algo.M, 2.0 * std::pow(b.half_width() + m_max, 2));
  out.y = std::max(scn.algo.M, 2.0 * std::pow(b.half_length() + m_max, 2));
  out.z = std::max(scn.algo.M, 2.0 * (b.height + m_max));
  return out;
}

double blockage_row_violation(const Scenario& scn, const Vec3& q, int k, int l, int u, int i) {
  const Vec3& w = scn.gns.at(static_cast<std::size_t>(k));
  const Building& b = scn.buildings.at(static_cast<std::size_t>(l));
  const int U = scn.algo.U;
  const Vec3 p = w + (q - w) * (static_cast<double>(u) / U);
  const double m = (q - w).norm() / (2.0 * std::numbers::sqrt2 * U);
  switch (i) {
    case 0:
      return std::pow(b.half_width() + m, 2) - std::pow(p.x() - b.center.x(), 2);
    case 1:
      return std::pow(b.half_length() + m, 2) - std::pow(p.y() - b.center.y(), 2);
    case 2:
      return b.height + m - p.z();
    default:
      throw DomainError("blockage row index must be 0, 1 or 2");
  }
}

namespace {

double row_m(const BigM& bm, int i) { return i == 0 ? bm.x : (i == 1 ? bm.y : bm.z); }

}  // namespace

void maximize_pair_blockage(const Scenario& scn, const Vec3& q, int k, int j, BlockageState& b) {
  double cbar = 1.0;
  for (int l = 0; l < scn.L(); ++l) {
    const BigM bm = big_m_for(scn, l);
    double rho = kInf;
    for (int u = 0; u <= scn.algo.U; ++u) {
      double sum = 0.0;
      for (int i = 0; i < 3; ++i) {
        const double v = blockage_row_violation(scn, q, k, l, u, i);
        const double beta = std::clamp(1.0 - v / row_m(bm, i), 0.0, 1.0);
        b.beta_at(i, u, k, l, j) = beta;
        sum += indicator_approx(beta, b.a);
      }
      rho = std::min(rho, sum);
    }
    rho = std::clamp(rho, 0.0, 1.0);
    b.rho_at(k, l, j) = rho;
    cbar = std::min(cbar, rho);
  }
  b.c_bar(k, j) = cbar;
}

BlockageState interiorize_blockage(const Scenario& scn, const Trajectory& traj, const BlockageState& in) {
  // Relative distance kept from each cap (for beta, shrunk with the sharpness).
  constexpr double kMargin = 0.05;
  BlockageState b = in;
  auto place = [](double v, double cap, double lo, double rel) {
    const double up = cap * (1.0 - rel);
    return std::clamp(v, std::min(lo, up / 2.0), up);
  };
  std::vector<BigM> bms;
  for (int l = 0; l < scn.L(); ++l) bms.push_back(big_m_for(scn, l));

  for (int k = 0; k < scn.K(); ++k) {
    for (int j = 0; j < scn.N(); ++j) {
      const Vec3& q = traj.q[static_cast<std::size_t>(j + 1)];
      double cap_c = 1.0;
      for (int l = 0; l < scn.L(); ++l) {
        double cap_r = 1.0;
        for (int u = 0; u <= scn.algo.U; ++u) {
          double sum = 0.0;
          for (int i = 0; i < 3; ++i) {
            const double hi =
                std::min(1.0, 1.0 - blockage_row_violation(scn, q, k, l, u, i) / row_m(bms[static_cast<std::size_t>(l)], i));
            if (!(hi > 0.0)) {
              throw InfeasibleError("blockage row cannot be relaxed at slot " + std::to_string(j + 1) +
                                    " (big-M too small)");
            }
            double& beta = b.beta_at(i, u, k, l, j);
            beta = place(beta, hi, kMargin * hi, kMargin / std::max(1.0, b.a));
            sum += indicator_approx(beta, b.a);
          }
          cap_r = std::min(cap_r, sum);
        }
        double& rho = b.rho_at(k, l, j);
        rho = place(rho, cap_r, kMargin * cap_r, kMargin);
        cap_c = std::min(cap_c, rho);
      }
      b.c_bar(k, j) = place(b.c_bar(k, j), cap_c, kMargin * cap_c, kMargin);
    }
  }
  return b;
}

QtAuxGrid qt_aux_grid(const Scenario& scn, const Trajectory& traj, const Grid& c_bar) {
  QtAuxGrid out{Grid::Zero(scn.K(), scn.N()), Grid::Zero(scn.K(), scn.N())};
  for (int k = 0; k < scn.K(); ++k) {
    for (int j = 0; j < scn.N(); ++j) {
      const QtAux aux = qt_optimal_aux(traj.q[static_cast<std::size_t>(j + 1)], scn.gns[static_cast<std::size_t>(k)],
                                       std::clamp(c_bar(k, j), 0.0, 1.0), scn.channel);
      out.lambda(k, j) = aux.lambda;
      out.kappa(k, j) = aux.kappa;
    }
  }
  return out;
}

Grid oracle_states(const Scenario& scn, const Trajectory& traj) {
  Grid los(scn.K(), scn.N());
  for (int k = 0; k < scn.K(); ++k) {
    for (int j = 0; j < scn.N(); ++j) {
      los(k, j) = true_channel_state(traj.q[static_cast<std::size_t>(j + 1)], scn.gns[static_cast<std::size_t>(k)],
                                     scn.buildings) == ChannelState::LoS
                      ? 1.0
                      : 0.0;
    }
  }
  return los;
}

// -------------------------------------------------------- initialization ---

double lifted_altitude(const Scenario& scn) {
  double top = 0.0;
  for (const Building& b : scn.buildings) top = std::max(top, b.height);
  const double z = std::max(scn.uav.h_min, top + scn.uav.step_limit() / (2.0 * std::numbers::sqrt2) + 1.0);
  return std::min(z, scn.uav.h_max);
}

InitialState initialize(const Scenario& scn, const PlannerOptions& opts) {
  scn.validate();
  const auto& uav = scn.uav;
  const double z_lift = opts.fixed_altitude ? *opts.fixed_altitude : lifted_altitude(scn);
  if (z_lift < uav.h_min || z_lift > uav.h_max) {
    throw InfeasibleError("flight altitude " + std::to_string(z_lift) + " m outside [Hmin, Hmax]");
  }

  // Climb, cruise, descend; the cruise leg absorbs all spare time.
  const Vec3 a = uav.q_initial;
  const Vec3 b(a.x(), a.y(), z_lift);
  const Vec3 c(uav.q_final.x(), uav.q_final.y(), z_lift);
  const Vec3 d = uav.q_final;
  auto leg_time = [&](const Vec3& p, const Vec3& q) {
    return std::max((q - p).norm() / uav.v_max, std::abs(q.z() - p.z()) / uav.v_z);
  };
  const double t_climb = leg_time(a, b);
  const double t_desc = leg_time(c, d);
  const double t_cruise_min = leg_time(b, c);
  const double spare = uav.T - (t_climb + t_desc + t_cruise_min);
  if (spare < -1e-9 * uav.T) {
    throw InfeasibleError("T = " + std::to_string(uav.T) + " s is too short to fly from qI to qF (needs " +
                          std::to_string(uav.T - spare) + " s)");
  }
  const double t_cruise = t_cruise_min + std::max(spare, 0.0);

  auto at = [&](double t) -> Vec3 {
    if (t <= t_climb) return t_climb > 0.0 ? Vec3(a + (b - a) * (t / t_climb)) : b;
    t -= t_climb;
    if (t <= t_cruise) return t_cruise > 0.0 ? Vec3(b + (c - b) * (t / t_cruise)) : c;
    t -= t_cruise;
    if (t_desc <= 0.0) return d;
    return c + (d - c) * std::min(t / t_desc, 1.0);
  };

  InitialState init;
  const int N = uav.N;
  init.traj.q.resize(static_cast<std::size_t>(N + 1));
  for (int n = 0; n <= N; ++n) init.traj.q[static_cast<std::size_t>(n)] = at(uav.slot_length() * n);
  init.traj.q.front() = a;
  init.traj.q.back() = d;

  const Certificate cert = verify_plan(scn, init.traj, Grid::Zero(scn.K(), N));
  if (!cert.all_passed()) {
    for (const auto& ch : cert.checks) {
      if (!ch.passed) throw InfeasibleError("initial trajectory infeasible: " + ch.name + ": " + ch.detail);
    }
  }

  init.schedule = Grid::Constant(scn.K(), N, 1.0 / scn.K());

  BlockageState& bs = init.blockage;
  bs = BlockageState(scn.K(), scn.L(), N, scn.algo.U);
  bs.a = scn.algo.a0;
  for (int k = 0; k < scn.K(); ++k) {
    for (int j = 0; j < N; ++j) {
      const Vec3& q = init.traj.q[static_cast<std::size_t>(j + 1)];
      const Vec3& w = scn.gns[static_cast<std::size_t>(k)];
      bool los = true;
      for (int l = 0; l < scn.L(); ++l) {
        const bool blocked = segment_intersects_interior(Segment3{q, w}, scn.buildings[static_cast<std::size_t>(l)]);
        bs.rho_at(k, l, j) = blocked ? 0.0 : 1.0;
        los = los && !blocked;
        for (int u = 0; u <= scn.algo.U; ++u) {
          for (int i = 0; i < 3; ++i) {
            bs.beta_at(i, u, k, l, j) = blockage_row_violation(scn, q, k, l, u, i) <= 0.0 ? 1.0 : 0.0;
          }
        }
      }
      bs.c_bar(k, j) = opts.channel_model == ChannelModel::AlwaysLoS ? 1.0 : (los ? 1.0 : 0.0);
    }
  }
  return init;
}

// ------------------------------------------------------------ scheduling ---

Grid lower_bound_rates(const Scenario& scn, const Trajectory& traj, const Grid& c_bar) {
  Grid r(scn.K(), scn.N());
  for (int k = 0; k < scn.K(); ++k) {
    for (int j = 0; j < scn.N(); ++j) {
      const double d = (traj.q[static_cast<std::size_t>(j + 1)] - scn.gns[static_cast<std::size_t>(k)]).norm();
      r(k, j) = spectral_efficiency(1.0, lower_bound_gain(d, std::clamp(c_bar(k, j), 0.0, 1.0), scn.channel),
                                    scn.channel);
    }
  }
  return r;
}

LPProblem build_scheduling_lp(const Scenario& scn, const Trajectory& traj, const BlockageState& blockage,
                              ChannelModel model) {
  const int K = scn.K(), N = scn.N();
  const Grid cbar = model == ChannelModel::AlwaysLoS ? Grid(Grid::Ones(K, N)) : blockage.c_bar;
  const Grid r = lower_bound_rates(scn, traj, cbar);

  LPProblem lp;
  for (int k = 0; k < K; ++k) {
    for (int j = 0; j < N; ++j) lp.add_variable(0.0, 1.0, 0.0);
  }
  const int eta = lp.add_variable(-kInf, kInf, 1.0);
  for (int j = 0; j < N; ++j) {
    std::vector<std::pair<int, double>> row;
    for (int k = 0; k < K; ++k) row.emplace_back(k * N + j, 1.0);
    lp.add_row(std::move(row), 1.0);
  }
  for (int k = 0; k < K; ++k) {
    std::vector<std::pair<int, double>> row{{eta, 1.0}};
    for (int j = 0; j < N; ++j) {
      if (r(k, j) != 0.0) row.emplace_back(k * N + j, -r(k, j) / N);
    }
    lp.add_row(std::move(row), 0.0);
  }
  return lp;
}

SchedulingResult solve_scheduling(const Scenario& scn, const Trajectory& traj, const BlockageState& blockage,
                                  ChannelModel model, const SolverConfig& cfg) {
  const LPSolution sol = solve_lp(build_scheduling_lp(scn, traj, blockage, model), cfg);
  SchedulingResult out;
  out.schedule = Grid(scn.K(), scn.N());
  for (int k = 0; k < scn.K(); ++k) {
    for (int j = 0; j < scn.N(); ++j) out.schedule(k, j) = sol.x[static_cast<std::size_t>(k * scn.N() + j)];
  }
  out.eta = sol.x.back();
  return out;
}

Schedule round_schedule(const Schedule& s, const Grid& rates) {
  if (s.rows() != rates.rows() || s.cols() != rates.cols()) {
    throw DomainError("round_schedule: schedule and rate grids differ in shape");
  }
  Schedule out = Schedule::Zero(s.rows(), s.cols());
  for (Eigen::Index j = 0; j < s.cols(); ++j) {
    if (!(s.col(j).maxCoeff() > 1e-6)) continue;
    Eigen::Index best = 0;
    double best_v = s(0, j) * rates(0, j);
    for (Eigen::Index k = 1; k < s.rows(); ++k) {
      const double v = s(k, j) * rates(k, j);
      if (v > best_v) {
        best_v = v;
        best = k;
      }
    }
    out(best, j) = 1.0;
  }
  return out;
}

namespace {

struct Balance {
  double min = 0.0, max = 0.0;
  bool better_than(const Balance& o) const {
    constexpr double kTol = 1e-12;
    if (min > o.min + kTol) return true;
    return min >= o.min - kTol && max - min < o.max - o.min - kTol;
  }
};

Balance balance_of(const Eigen::VectorXd& totals) { return {totals.minCoeff(), totals.maxCoeff()}; }

}  // namespace

Schedule rebalance_schedule(const Schedule& s, const Grid& rates) {
  if (s.rows() != rates.rows() || s.cols() != rates.cols()) {
    throw DomainError("rebalance_schedule: schedule and rate grids differ in shape");
  }
  const Eigen::Index K = s.rows();
  const Eigen::Index N = s.cols();
  Schedule out = s;
  // owner[j] = GN served in slot j, -1 when idle
  std::vector<Eigen::Index> owner(static_cast<std::size_t>(N), -1);
  Eigen::VectorXd totals = Eigen::VectorXd::Zero(K);
  for (Eigen::Index j = 0; j < N; ++j) {
    for (Eigen::Index k = 0; k < K; ++k) {
      if (s(k, j) > 0.5) {
        owner[static_cast<std::size_t>(j)] = k;
        totals[k] += rates(k, j);
        break;
      }
    }
  }
  if (K == 0 || N == 0) return out;

  for (int pass = 0; pass < 10 * N; ++pass) {
    Balance best = balance_of(totals);
    Eigen::VectorXd best_totals;
    std::vector<std::pair<Eigen::Index, Eigen::Index>> best_moves;  // (slot, new owner)
    auto consider = [&](const Eigen::VectorXd& t, std::vector<std::pair<Eigen::Index, Eigen::Index>> moves) {
      const Balance b = balance_of(t);
      if (b.better_than(best)) {
        best = b;
        best_totals = t;
        best_moves = std::move(moves);
      }
    };
    for (Eigen::Index j = 0; j < N; ++j) {
      const Eigen::Index a = owner[static_cast<std::size_t>(j)];
      // reassign slot j
      for (Eigen::Index k = 0; k < K; ++k) {
        if (k == a) continue;
        Eigen::VectorXd t = totals;
        if (a >= 0) t[a] -= rates(a, j);
        t[k] += rates(k, j);
        consider(t, {{j, k}});
      }
      // swap owners of slots j and i
      if (a < 0) continue;
      for (Eigen::Index i = j + 1; i < N; ++i) {
        const Eigen::Index b = owner[static_cast<std::size_t>(i)];
        if (b < 0 || b == a) continue;
        Eigen::VectorXd t = totals;
        t[a] += rates(a, i) - rates(a, j);
        t[b] += rates(b, j) - rates(b, i);
        consider(t, {{j, b}, {i, a}});
      }
    }
    if (best_moves.empty()) break;
    for (const auto& [j, k] : best_moves) owner[static_cast<std::size_t>(j)] = k;
    totals = best_totals;
  }

  out.setZero();
  for (Eigen::Index j = 0; j < N; ++j) {
    if (owner[static_cast<std::size_t>(j)] >= 0) out(owner[static_cast<std::size_t>(j)], j) = 1.0;
  }
  return out;
}

}  // namespace uavplan
