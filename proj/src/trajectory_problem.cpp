#include <algorithm>
#include <cmath>
#include <numbers>

#include "uavplan/errors.hpp"
#include "uavplan/planner.hpp"

namespace uavplan {

namespace {

// Absolute slack added to the mobility limits so that a trajectory sitting
// exactly on a limit is still a strictly feasible barrier start.
constexpr double kMobilitySlack = 1e-7;  // m

// Local view of one trajectory point inside a row's support.
struct PointSlots {
  std::array<int, 3> local{-1, -1, -1};
  Vec3 fixed{Vec3::Zero()};

  Vec3 gather(std::span<const double> x) const {
    Vec3 p = fixed;
    for (int c = 0; c < 3; ++c) {
      if (local[c] >= 0) p[c] = x[static_cast<std::size_t>(local[c])];
    }
    return p;
  }
};

// Emits the lower triangle of a dense local Hessian (fixed count).
void emit_dense(HessianSink* hess, const Eigen::MatrixXd& H) {
  if (!hess) return;
  for (int a = 0; a < H.rows(); ++a) {
    for (int b = 0; b <= a; ++b) hess->add(a, b, H(a, b));
  }
}

}  // namespace

TrajectoryProblem::TrajectoryProblem(const Scenario& scn, const Schedule& sched, const Trajectory& prev_traj,
                                     const BlockageState& prev, const QtAuxGrid& qt, double a,
                                     const Params& params)
    : scn_(&scn), params_(params), K_(scn.K()), L_(scn.L()), N_(scn.N()), U_(scn.algo.U) {
  if (!(a > 0.0)) throw DomainError("indicator sharpness must be positive");
  if (static_cast<int>(prev_traj.q.size()) != N_ + 1) throw DomainError("trajectory length must be N + 1");
  if (sched.rows() != K_ || sched.cols() != N_) throw DomainError("schedule must be K x N");
  const bool blockage = params.channel_model == ChannelModel::BlockageAware && L_ > 0;
  const bool free_z = !params.fixed_altitude.has_value();
  const double L0 = kLengthScale;
  const auto& uav = scn.uav;

  std::vector<double> lo, hi, start;
  auto add_var = [&](double l, double h, double x0) {
    lo.push_back(l);
    hi.push_back(h);
    start.push_back(x0);
    return static_cast<int>(start.size()) - 1;
  };

  // ---- trajectory variables q[1..N-1]
  qvar_.assign(static_cast<std::size_t>(N_ + 1), {-1, -1, -1});
  qfixed_.resize(static_cast<std::size_t>(N_ + 1));
  for (int n = 0; n <= N_; ++n) {
    Vec3 p = prev_traj.q[static_cast<std::size_t>(n)];
    if (params.fixed_altitude) p.z() = *params.fixed_altitude;
    qfixed_[static_cast<std::size_t>(n)] = p / L0;
    if (n == 0 || n == N_) continue;
    const double tr = params.trust_region;
    for (int c = 0; c < 3; ++c) {
      if (c == 2 && !free_z) continue;
      double l = p[c] - tr, h = p[c] + tr;
      if (c == 2) {
        l = std::max(l, uav.h_min - kMobilitySlack);
        h = std::min(h, uav.h_max + kMobilitySlack);
      }
      qvar_[static_cast<std::size_t>(n)][static_cast<std::size_t>(c)] = add_var(l / L0, h / L0, p[c] / L0);
      ++num_position_vars_;
    }
  }
  eta_index_ = add_var(-kInf, kInf, 0.0);

  // ---- blockage variables of scheduled pairs
  if (blockage) {
    for (int k = 0; k < K_; ++k) {
      for (int j = 0; j < N_; ++j) {
        if (!(sched(k, j) > params.schedule_floor)) continue;
        PairVars pv;
        pv.k = k;
        pv.j = j;
        pv.c_bar = add_var(0.0, 1.0, prev.c_bar(k, j));
        pv.rho0 = static_cast<int>(start.size());
        for (int l = 0; l < L_; ++l) add_var(0.0, 1.0, prev.rho_at(k, l, j));
        pv.beta0 = static_cast<int>(start.size());
        for (int l = 0; l < L_; ++l) {
          for (int u = 0; u <= U_; ++u) {
            for (int i = 0; i < 3; ++i) add_var(0.0, 1.0, prev.beta_at(i, u, k, l, j));
          }
        }
        pairs_.push_back(pv);
      }
    }
  }

  problem_.dimension = static_cast<int>(start.size());
  problem_.objective.support = {eta_index_};
  problem_.objective.eval = [](std::span<const double> x, std::span<double> g, HessianSink*) {
    g[0] = 1.0;
    return x[0];
  };

  // Builds the support of a row touching trajectory point n; returns the
  // local layout and appends global indices to `support`.
  auto point_slots = [&](int n, std::vector<int>& support) {
    PointSlots ps;
    ps.fixed = qfixed_[static_cast<std::size_t>(n)];
    for (int c = 0; c < 3; ++c) {
      const int v = qvar_[static_cast<std::size_t>(n)][static_cast<std::size_t>(c)];
      if (v >= 0) {
        ps.local[static_cast<std::size_t>(c)] = static_cast<int>(support.size());
        support.push_back(v);
      }
    }
    return ps;
  };
  auto has_vars = [&](int n) {
    const auto& v = qvar_[static_cast<std::size_t>(n)];
    return v[0] >= 0 || v[1] >= 0 || v[2] >= 0;
  };

  auto& rows = problem_.constraints;

  // ---- (a) mobility
  const double step = (uav.step_limit() + kMobilitySlack) / L0;
  const double vstep = (uav.vertical_step_limit() + kMobilitySlack) / L0;
  for (int n = 1; n <= N_; ++n) {
    if (!has_vars(n) && !has_vars(n - 1)) continue;
    SmoothFunction f;
    const PointSlots cur = point_slots(n, f.support);
    const PointSlots prv = point_slots(n - 1, f.support);
    const int dim = static_cast<int>(f.support.size());
    f.eval = [cur, prv, step, dim](std::span<const double> x, std::span<double> g, HessianSink* hess) {
      const Vec3 d = cur.gather(x) - prv.gather(x);
      for (int c = 0; c < 3; ++c) {
        if (cur.local[c] >= 0) g[cur.local[c]] = 2.0 * d[c];
        if (prv.local[c] >= 0) g[prv.local[c]] = -2.0 * d[c];
      }
      if (hess) {
        Eigen::MatrixXd H = Eigen::MatrixXd::Zero(dim, dim);
        for (int c = 0; c < 3; ++c) {
          const int i = cur.local[c], k = prv.local[c];
          if (i >= 0) H(i, i) += 2.0;
          if (k >= 0) H(k, k) += 2.0;
          if (i >= 0 && k >= 0) {
            H(i, k) -= 2.0;
            H(k, i) -= 2.0;
          }
        }
        emit_dense(hess, H);
      }
      return d.squaredNorm() - step * step;
    };
    rows.push_back(std::move(f));

    if (!free_z) continue;
    const int zc = qvar_[static_cast<std::size_t>(n)][2];
    const int zp = qvar_[static_cast<std::size_t>(n - 1)][2];
    for (double sign : {1.0, -1.0}) {
      SmoothFunction v;
      double offset = 0.0;  // constant part of sign * (z[n] - z[n-1])
      std::vector<double> coef;
      if (zc >= 0) {
        v.support.push_back(zc);
        coef.push_back(sign);
      } else {
        offset += sign * qfixed_[static_cast<std::size_t>(n)].z();
      }
      if (zp >= 0) {
        v.support.push_back(zp);
        coef.push_back(-sign);
      } else {
        offset -= sign * qfixed_[static_cast<std::size_t>(n - 1)].z();
      }
      v.eval = [coef, offset, vstep](std::span<const double> x, std::span<double> g, HessianSink*) {
        double val = offset - vstep;
        for (std::size_t i = 0; i < coef.size(); ++i) {
          val += coef[i] * x[i];
          g[i] = coef[i];
        }
        return val;
      };
      rows.push_back(std::move(v));
    }
  }

  // ---- (e) separating hyperplanes
  for (int n = 1; n < N_; ++n) {
    const Vec3 qp = qfixed_[static_cast<std::size_t>(n)] * L0;
    for (int l = 0; l < L_; ++l) {
      const ExpandedBuilding box = params.avoidance == AvoidanceMode::ExpandedHyperplane
                                       ? scn.avoidance_box(l)
                                       : ExpandedBuilding{scn.buildings[static_cast<std::size_t>(l)], 0.0};
      const Vec3 chi = closest_point_on_expanded(box, qp);
      const Vec3 normal = qp - chi;
      const double dist2 = normal.squaredNorm();
      if (dist2 == 0.0) {
        throw InfeasibleError("previous trajectory point " + std::to_string(n) + " touches building " +
                              std::to_string(l));
      }
      const double tau = std::min(kHyperplaneSlack, 0.5 * dist2) / (L0 * L0);
      SmoothFunction f;
      const PointSlots ps = point_slots(n, f.support);
      if (f.support.empty()) continue;
      const Vec3 nn = normal / L0;
      const Vec3 cc = chi / L0;
      f.eval = [ps, nn, cc, tau](std::span<const double> x, std::span<double> g, HessianSink*) {
        for (int c = 0; c < 3; ++c) {
          if (ps.local[c] >= 0) g[ps.local[c]] = -nn[c];
        }
        return tau - nn.dot(ps.gather(x) - cc);
      };
      rows.push_back(std::move(f));
    }
  }

  // ---- (b)-(d) blockage rows of modeled pairs
  const double c0 = 2.0 * std::numbers::sqrt2 * U_;
  for (const PairVars& pv : pairs_) {
    const int n = pv.j + 1;
    const Vec3 w = scn.gns[static_cast<std::size_t>(pv.k)] / L0;
    const Vec3 qr = qfixed_[static_cast<std::size_t>(n)];
    for (int l = 0; l < L_; ++l) {
      const Building& bl = scn.buildings[static_cast<std::size_t>(l)];
      const BigM bm = big_m_for(scn, l);
      const Vec3 center = bl.center / L0;
      const double half[2] = {bl.half_width() / L0, bl.half_length() / L0};
      const double height = bl.height / L0;
      const double Mx[3] = {bm.x / (L0 * L0), bm.y / (L0 * L0), bm.z / L0};
      const int rho = pv.rho0 + l;

      for (int u = 0; u <= U_; ++u) {
        const double frac = static_cast<double>(u) / U_;
        for (int i = 0; i < 3; ++i) {
          const int beta = pv.beta0 + (l * (U_ + 1) + u) * 3 + i;
          SmoothFunction f;
          const PointSlots ps = point_slots(n, f.support);
          const int bl_local = static_cast<int>(f.support.size());
          f.support.push_back(beta);
          const int dim = static_cast<int>(f.support.size());
          const double M = Mx[i];
          if (i < 2) {
            // (A + m)^2 - [2 (p_r - c)(p - p_r) + (p_r - c)^2] - M (1 - beta)
            const double A = half[i];
            const double pr = w[i] + (qr[i] - w[i]) * frac;
            const double off = pr - center[i];
            f.eval = [=](std::span<const double> x, std::span<double> g, HessianSink* hess) {
              const Vec3 q = ps.gather(x);
              const Vec3 r = q - w;
              const double d = r.norm();
              const double m = d / c0;
              const Vec3 gm = r / (d * c0);
              const double p = w[i] + (q[i] - w[i]) * frac;
              const double val = (A + m) * (A + m) - (2.0 * off * (p - pr) + off * off) -
                                 M * (1.0 - x[static_cast<std::size_t>(bl_local)]);
              Vec3 gq = 2.0 * (A + m) * gm;
              gq[i] -= 2.0 * off * frac;
              for (int c = 0; c < 3; ++c) {
                if (ps.local[c] >= 0) g[ps.local[c]] = gq[c];
              }
              g[bl_local] = M;
              if (hess) {
                const Eigen::Matrix3d Hm = (Eigen::Matrix3d::Identity() - r * r.transpose() / (d * d)) / (d * c0);
                const Eigen::Matrix3d Hq = 2.0 * gm * gm.transpose() + 2.0 * (A + m) * Hm;
                Eigen::MatrixXd H = Eigen::MatrixXd::Zero(dim, dim);
                for (int a = 0; a < 3; ++a) {
                  for (int b = 0; b < 3; ++b) {
                    if (ps.local[a] >= 0 && ps.local[b] >= 0) H(ps.local[a], ps.local[b]) = Hq(a, b);
                  }
                }
                emit_dense(hess, H);
              }
              return val;
            };
          } else {
            // (H + m) - z_u - M (1 - beta)
            f.eval = [=](std::span<const double> x, std::span<double> g, HessianSink* hess) {
              const Vec3 q = ps.gather(x);
              const Vec3 r = q - w;
              const double d = r.norm();
              const double m = d / c0;
              const Vec3 gm = r / (d * c0);
              const double zu = w.z() + (q.z() - w.z()) * frac;
              const double val = height + m - zu - M * (1.0 - x[static_cast<std::size_t>(bl_local)]);
              Vec3 gq = gm;
              gq.z() -= frac;
              for (int c = 0; c < 3; ++c) {
                if (ps.local[c] >= 0) g[ps.local[c]] = gq[c];
              }
              g[bl_local] = M;
              if (hess) {
                const Eigen::Matrix3d Hm = (Eigen::Matrix3d::Identity() - r * r.transpose() / (d * d)) / (d * c0);
                Eigen::MatrixXd H = Eigen::MatrixXd::Zero(dim, dim);
                for (int a = 0; a < 3; ++a) {
                  for (int b = 0; b < 3; ++b) {
                    if (ps.local[a] >= 0 && ps.local[b] >= 0) H(ps.local[a], ps.local[b]) = Hm(a, b);
                  }
                }
                emit_dense(hess, H);
              }
              return val;
            };
          }
          rows.push_back(std::move(f));
        }

        // rho - sum_i Phi_lb(beta_i) <= 0
        SmoothFunction ind;
        ind.support.push_back(rho);
        std::array<double, 3> slope{};
        double intercept = 0.0;
        for (int i = 0; i < 3; ++i) {
          const int beta = pv.beta0 + (l * (U_ + 1) + u) * 3 + i;
          const AffineFn t = indicator_lb_fn(a, start[static_cast<std::size_t>(beta)]);
          slope[static_cast<std::size_t>(i)] = t.slope;
          intercept += t.intercept;
          ind.support.push_back(beta);
        }
        ind.eval = [slope, intercept](std::span<const double> x, std::span<double> g, HessianSink*) {
          g[0] = 1.0;
          double v = x[0] - intercept;
          for (std::size_t i = 0; i < 3; ++i) {
            g[i + 1] = -slope[i];
            v -= slope[i] * x[i + 1];
          }
          return v;
        };
        rows.push_back(std::move(ind));
      }

      // c_bar - rho <= 0
      SmoothFunction cr;
      cr.support = {pv.c_bar, rho};
      cr.eval = [](std::span<const double> x, std::span<double> g, HessianSink*) {
        g[0] = 1.0;
        g[1] = -1.0;
        return x[0] - x[1];
      };
      rows.push_back(std::move(cr));
    }
  }

  // ---- (f) rate rows
  std::vector<int> pair_of(static_cast<std::size_t>(K_ * N_), -1);
  for (std::size_t p = 0; p < pairs_.size(); ++p) {
    pair_of[static_cast<std::size_t>(pairs_[p].k * N_ + pairs_[p].j)] = static_cast<int>(p);
  }
  const ChannelParams cp = scn.channel;
  const double N = static_cast<double>(N_);
  slot_rows_.assign(static_cast<std::size_t>(K_), {});
  std::vector<std::vector<int>> slot_vars(static_cast<std::size_t>(K_));
  for (int k = 0; k < K_; ++k) {
    const Vec3 w = scn.gns[static_cast<std::size_t>(k)];
    for (int j = 0; j < N_; ++j) {
      const double s = sched(k, j);
      if (!(s > params.schedule_floor)) continue;
      // r - s log2(1 + gamma h) <= 0, with r the slot's rate epigraph variable
      SmoothFunction f;
      const int r = add_var(-kInf, kInf, 0.0);
      f.support.push_back(r);
      const PointSlots ps = point_slots(j + 1, f.support);
      int cbar_local = -1;
      double cbar_fixed = 1.0;
      const int p = pair_of[static_cast<std::size_t>(k * N_ + j)];
      if (p >= 0) {
        cbar_local = static_cast<int>(f.support.size());
        f.support.push_back(pairs_[static_cast<std::size_t>(p)].c_bar);
      } else {
        cbar_fixed = blockage ? prev.c_bar(k, j) : 1.0;
      }
      const double lambda = qt.lambda(k, j);
      const double kappa = qt.kappa(k, j);
      const int dim = static_cast<int>(f.support.size());
      f.eval = [=](std::span<const double> x, std::span<double> g, HessianSink* hess) {
        const double gamma = cp.snr_scale();
        const Vec3 q = ps.gather(x) * L0;
        const double cb = cbar_local >= 0 ? x[static_cast<std::size_t>(cbar_local)] : cbar_fixed;
        const QtGainDerivatives qd = qt_gain_derivatives(q, w, cb, lambda, kappa, cp);
        const double arg = 1.0 + gamma * qd.value;
        if (!(arg > 0.0)) return kInf;
        g[0] = 1.0;
        Eigen::Vector4d gh = qd.grad;
        gh.head<3>() *= L0;
        const double c1 = s * gamma / (std::numbers::ln2 * arg);
        const Eigen::Vector4d gr = c1 * gh;
        const int loc[4] = {ps.local[0], ps.local[1], ps.local[2], cbar_local};
        for (int a = 0; a < 4; ++a) {
          if (loc[a] >= 0) g[loc[a]] -= gr[a];
        }
        if (hess) {
          Eigen::Matrix4d hh = qd.hess;
          hh.topLeftCorner<3, 3>() *= L0 * L0;
          const Eigen::Matrix4d hr = c1 * hh - (c1 * gamma / arg) * gh * gh.transpose();
          Eigen::MatrixXd H = Eigen::MatrixXd::Zero(dim, dim);
          for (int a = 0; a < 4; ++a) {
            for (int b = 0; b < 4; ++b) {
              if (loc[a] >= 0 && loc[b] >= 0) H(loc[a], loc[b]) = -hr(a, b);
            }
          }
          emit_dense(hess, H);
        }
        return x[0] - s * std::log2(arg);
      };
      slot_rows_[static_cast<std::size_t>(k)].push_back(rows.size());
      slot_vars[static_cast<std::size_t>(k)].push_back(r);
      rows.push_back(std::move(f));
    }
  }

  // eta - (1/N) sum_n r_kn <= 0
  for (int k = 0; k < K_; ++k) {
    SmoothFunction f;
    f.support.push_back(eta_index_);
    for (int r : slot_vars[static_cast<std::size_t>(k)]) f.support.push_back(r);
    f.eval = [N](std::span<const double> x, std::span<double> g, HessianSink*) {
      double v = x[0];
      g[0] = 1.0;
      for (std::size_t i = 1; i < x.size(); ++i) {
        v -= x[i] / N;
        g[i] = -1.0 / N;
      }
      return v;
    };
    rate_rows_.push_back(rows.size());
    rows.push_back(std::move(f));
  }

  problem_.dimension = static_cast<int>(start.size());
  problem_.lower = std::move(lo);
  problem_.upper = std::move(hi);
  problem_.start = std::move(start);

  // Slot rates start just below their surrogate values and eta just below the
  // smallest resulting mean.
  for (const auto& per_k : slot_rows_) {
    for (std::size_t r : per_k) {
      const double v = slot_rate(r, problem_.start);
      if (!std::isfinite(v)) throw InfeasibleError("surrogate rate undefined at the previous iterate");
      problem_.start[static_cast<std::size_t>(problem_.constraints[r].support[0])] = v - 1e-3 * std::max(1.0, std::abs(v));
    }
  }
  double rmin = kInf;
  for (const auto& per_k : slot_rows_) {
    double mean = 0.0;
    for (std::size_t r : per_k) mean += problem_.start[static_cast<std::size_t>(problem_.constraints[r].support[0])];
    rmin = std::min(rmin, mean / static_cast<double>(N_));
  }
  if (slot_rows_.empty()) rmin = 0.0;
  problem_.start[static_cast<std::size_t>(eta_index_)] = rmin - 1e-3 * std::max(1.0, std::abs(rmin));

  const double viol = max_constraint_value(problem_, problem_.start);
  if (!(viol < 0.0)) {
    throw InfeasibleError("previous iterate is not strictly feasible for the trajectory subproblem (max row " +
                          std::to_string(viol) + ")");
  }
}

Vec3 TrajectoryProblem::position(std::span<const double> x, int n) const {
  Vec3 p = qfixed_[static_cast<std::size_t>(n)];
  for (int c = 0; c < 3; ++c) {
    const int v = qvar_[static_cast<std::size_t>(n)][static_cast<std::size_t>(c)];
    if (v >= 0) p[c] = x[static_cast<std::size_t>(v)];
  }
  return p * kLengthScale;
}

double TrajectoryProblem::slot_rate(std::size_t row, std::span<const double> x) const {
  const SmoothFunction& f = problem_.constraints[row];
  std::vector<double> local(f.support.size()), grad(f.support.size(), 0.0);
  for (std::size_t i = 0; i < f.support.size(); ++i) local[i] = x[static_cast<std::size_t>(f.support[i])];
  return local[0] - f.eval(local, grad, nullptr);
}

std::vector<double> TrajectoryProblem::surrogate_rates(std::span<const double> x) const {
  std::vector<double> out;
  for (const auto& per_k : slot_rows_) {
    double rate = 0.0;
    for (std::size_t r : per_k) rate += slot_rate(r, x);
    out.push_back(rate / static_cast<double>(N_));
  }
  return out;
}

double TrajectoryProblem::surrogate_min_rate(std::span<const double> x) const {
  const auto r = surrogate_rates(x);
  return r.empty() ? 0.0 : *std::min_element(r.begin(), r.end());
}

void TrajectoryProblem::decode(std::span<const double> x, Trajectory& traj, BlockageState& b) const {
  traj.q.resize(static_cast<std::size_t>(N_ + 1));
  for (int n = 0; n <= N_; ++n) traj.q[static_cast<std::size_t>(n)] = position(x, n);
  auto clamp01 = [](double v) { return std::clamp(v, 0.0, 1.0); };
  for (const PairVars& pv : pairs_) {
    b.c_bar(pv.k, pv.j) = clamp01(x[static_cast<std::size_t>(pv.c_bar)]);
    for (int l = 0; l < L_; ++l) {
      b.rho_at(pv.k, l, pv.j) = clamp01(x[static_cast<std::size_t>(pv.rho0 + l)]);
      for (int u = 0; u <= U_; ++u) {
        for (int i = 0; i < 3; ++i) {
          b.beta_at(i, u, pv.k, l, pv.j) =
              clamp01(x[static_cast<std::size_t>(pv.beta0 + (l * (U_ + 1) + u) * 3 + i)]);
        }
      }
    }
  }
}

}  // namespace uavplan
