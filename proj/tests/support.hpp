#pragma once

// Independent geometry oracles and scenario builders shared by the tests.

#include <algorithm>
#include <cmath>
#include <random>
#include <utility>

#include "uavplan/errors.hpp"
#include "uavplan/geometry.hpp"
#include "uavplan/planner.hpp"

namespace uavplan::test {

/// Signed Euclidean distance to a closed box: negative inside.
inline double signed_distance(const Vec3& p, const Box& box) {
  const Vec3 c = (box.lo + box.hi) / 2.0;
  const Vec3 h = (box.hi - box.lo) / 2.0;
  const Vec3 d = (p - c).cwiseAbs() - h;
  const double outside = d.cwiseMax(0.0).norm();
  const double inside = std::min(d.maxCoeff(), 0.0);
  return outside + inside;
}

/// Minimum of the signed distance along a segment (convex in t, so golden section).
inline double min_signed_distance(const Segment3& seg, const Box& box) {
  const double g = (std::sqrt(5.0) - 1.0) / 2.0;
  double lo = 0.0, hi = 1.0;
  auto f = [&](double t) { return signed_distance(seg.a + (seg.b - seg.a) * t, box); };
  double x1 = hi - g * (hi - lo), x2 = lo + g * (hi - lo);
  double f1 = f(x1), f2 = f(x2);
  for (int it = 0; it < 200; ++it) {
    if (f1 < f2) {
      hi = x2;
      x2 = x1;
      f2 = f1;
      x1 = hi - g * (hi - lo);
      f1 = f(x1);
    } else {
      lo = x1;
      x1 = x2;
      f1 = f2;
      x2 = lo + g * (hi - lo);
      f2 = f(x2);
    }
  }
  return std::min({f1, f2, f(0.0), f(1.0)});
}

inline bool strictly_inside(const Vec3& p, const Box& box) {
  for (int i = 0; i < 3; ++i) {
    if (!(p[i] > box.lo[i] && p[i] < box.hi[i])) return false;
  }
  return true;
}

/// Interior test at `samples` evenly spaced points including both endpoints.
inline bool dense_sample_hits(const Segment3& seg, const Box& box, int samples) {
  for (int i = 0; i < samples; ++i) {
    const double t = static_cast<double>(i) / (samples - 1);
    if (strictly_inside(seg.a + (seg.b - seg.a) * t, box)) return true;
  }
  return false;
}

inline std::pair<Segment3, Box> random_segment_and_box(std::mt19937_64& rng) {
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const Vec3 half(2 + 20 * unit(rng), 2 + 20 * unit(rng), 0.0);
  const double h = 5 + 50 * unit(rng);
  const Vec3 c(-10 + 20 * unit(rng), -10 + 20 * unit(rng), 0.0);
  const Box box{Vec3(c.x() - half.x(), c.y() - half.y(), 0.0), Vec3(c.x() + half.x(), c.y() + half.y(), h)};
  auto point = [&] { return Vec3(-50 + 100 * unit(rng), -50 + 100 * unit(rng), 80 * unit(rng)); };
  return {Segment3{point(), point()}, box};
}

struct ShortSegmentCase {
  Building building;
  double d_max = 0.0;
  Segment3 seg;
};

/// Random cuboid, d_max in (0, min dims) and a segment no longer than d_max
/// whose endpoints both lie outside the expanded cuboid and at or above the
/// ground (the expanded box has no margin below z = 0, and no UAV or GN point
/// is underground). Endpoints are drawn near the expanded box so many
/// segments pass close to it.
inline ShortSegmentCase random_short_segment(std::mt19937_64& rng) {
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::normal_distribution<double> gauss(0.0, 1.0);
  ShortSegmentCase c;
  c.building = Building(-5 + 10 * unit(rng), -5 + 10 * unit(rng), 1 + 30 * unit(rng), 1 + 30 * unit(rng),
                        1 + 50 * unit(rng));
  double dm = 0.0;
  while (!(dm > 0.0)) dm = c.building.min_dimension() * unit(rng);
  c.d_max = dm;
  const Box ex = box_of(expand_building(c.building, dm));
  const Vec3 lo(ex.lo.x() - dm, ex.lo.y() - dm, 0.0), hi = ex.hi + Vec3::Constant(dm);
  for (;;) {
    const Vec3 a = lo + (hi - lo).cwiseProduct(Vec3(unit(rng), unit(rng), unit(rng)));
    if (strictly_inside(a, ex)) continue;
    Vec3 dir(gauss(rng), gauss(rng), gauss(rng));
    if (dir.norm() == 0.0) continue;
    const Vec3 b = a + dir.normalized() * (dm * unit(rng));
    if (b.z() < 0.0 || strictly_inside(b, ex)) continue;
    c.seg = {a, b};
    return c;
  }
}

/// A building-free scenario with the given ground nodes.
inline Scenario open_field(std::vector<Vec3> gns, Vec3 qi, Vec3 qf, double T, int N) {
  Scenario s;
  s.gns = std::move(gns);
  s.uav.q_initial = qi;
  s.uav.q_final = qf;
  s.uav.T = T;
  s.uav.N = N;
  s.uav.h_min = 30.0;
  s.uav.h_max = 200.0;
  s.algo.eps_growth = 2.0;
  return s;
}

/// One draw of random_scenario; may not leave enough time for the initial flight.
inline Scenario draw_scenario(std::mt19937_64& rng, std::uint64_t seed) {
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  Scenario s;
  s.uav.T = 10.0;
  s.uav.N = 20;
  s.uav.h_min = 30.0;
  s.uav.h_max = 150.0;
  s.algo.eps_growth = 2.0;
  s.algo.seed = seed;

  const int L = 1 + static_cast<int>(unit(rng) * 2.0);
  for (int l = 0; l < L; ++l) {
    for (;;) {
      const double cx = (l == 0 ? -20.0 : 20.0) + 10 * (unit(rng) - 0.5);
      const double cy = 20 * (unit(rng) - 0.5);
      const Building b(cx, cy, 12 + 10 * unit(rng), 12 + 20 * unit(rng), 20 + 15 * unit(rng));
      bool overlaps = false;
      for (const auto& o : s.buildings) {
        overlaps |= std::abs(o.center.x() - b.center.x()) < o.half_width() + b.half_width() + 1.0 &&
                    std::abs(o.center.y() - b.center.y()) < o.half_length() + b.half_length() + 1.0;
      }
      if (overlaps) continue;
      s.buildings.push_back(b);
      break;
    }
  }

  auto outside_all = [&](const Vec3& p, double pad) {
    for (const auto& b : s.buildings) {
      if (std::abs(p.x() - b.center.x()) < b.half_width() + pad &&
          std::abs(p.y() - b.center.y()) < b.half_length() + pad)
        return false;
    }
    return true;
  };
  const int K = 2 + static_cast<int>(unit(rng) * 2.0);
  while (static_cast<int>(s.gns.size()) < K) {
    const Vec3 w(-45 + 90 * unit(rng), -45 + 90 * unit(rng), 0.0);
    if (outside_all(w, 2.0)) s.gns.push_back(w);
  }
  for (;;) {
    const Vec3 qi(-40 + 80 * unit(rng), -32.0, 40.0);
    const Vec3 qf(qi.x() + 10 * (unit(rng) - 0.5), 32.0, 40.0);
    if (outside_all(qi, 5.0) && outside_all(qf, 5.0)) {
      s.uav.q_initial = qi;
      s.uav.q_final = qf;
      break;
    }
  }
  s.validate();
  return s;
}

/// Random valid scenario: one or two buildings below 35 m, two or three ground
/// nodes, 10 s of flight in 20 slots (5 m steps). Draws whose lifted straight
/// flight does not fit in T are redrawn.
inline Scenario random_scenario(std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  for (;;) {
    Scenario s = draw_scenario(rng, seed);
    try {
      initialize(s);
      return s;
    } catch (const InfeasibleError&) {
    }
  }
}

}  // namespace uavplan::test
