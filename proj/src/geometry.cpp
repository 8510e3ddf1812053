#include "uavplan/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "uavplan/errors.hpp"

namespace uavplan {

Building::Building(double cx, double cy, double w, double l, double h)
    : center(cx, cy, 0.0), width(w), length(l), height(h) {
  if (!(w > 0.0) || !(l > 0.0) || !(h > 0.0)) {
    throw DomainError("building dimensions must be positive");
  }
}

double Building::min_dimension() const {
  return std::min({width, length, height});
}

Box box_of(const Building& b) {
  return Box{Vec3(b.center.x() - b.half_width(), b.center.y() - b.half_length(), 0.0),
             Vec3(b.center.x() + b.half_width(), b.center.y() + b.half_length(), b.height)};
}

Box box_of(const ExpandedBuilding& b) {
  const Vec3& c = b.base.center;
  return Box{Vec3(c.x() - b.half_width(), c.y() - b.half_length(), 0.0),
             Vec3(c.x() + b.half_width(), c.y() + b.half_length(), b.height())};
}

Vec3 segment_point(const Segment3& seg, double t) {
  if (!(t >= 0.0 && t <= 1.0)) {
    throw DomainError("segment parameter t must lie in [0, 1]");
  }
  return seg.a + (seg.b - seg.a) * t;
}

std::vector<Vec3> segment_samples(const Segment3& seg, int U) {
  if (U < 1) {
    throw DomainError("segment_samples needs U >= 1");
  }
  std::vector<Vec3> pts;
  pts.reserve(static_cast<std::size_t>(U) + 1);
  const Vec3 d = seg.b - seg.a;
  for (int u = 0; u <= U; ++u) {
    pts.push_back(seg.a + d * (static_cast<double>(u) / U));
  }
  // Exact endpoints regardless of rounding.
  pts.back() = seg.b;
  return pts;
}

bool is_interior(const Box& box, const Vec3& p) {
  for (int i = 0; i < 3; ++i) {
    if (!(p[i] > box.lo[i] && p[i] < box.hi[i])) return false;
  }
  return true;
}

bool is_interior(const Building& b, const Vec3& p) { return is_interior(box_of(b), p); }
bool is_interior(const ExpandedBuilding& b, const Vec3& p) { return is_interior(box_of(b), p); }

bool segment_intersects_interior(const Segment3& seg, const Box& box) {
  const Vec3 d = seg.b - seg.a;
  double enter = -std::numeric_limits<double>::infinity();
  double exit = std::numeric_limits<double>::infinity();
  for (int i = 0; i < 3; ++i) {
    if (d[i] == 0.0) {
      if (!(seg.a[i] > box.lo[i] && seg.a[i] < box.hi[i])) return false;
      continue;
    }
    double t1 = (box.lo[i] - seg.a[i]) / d[i];
    double t2 = (box.hi[i] - seg.a[i]) / d[i];
    if (t1 > t2) std::swap(t1, t2);
    enter = std::max(enter, t1);
    exit = std::min(exit, t2);
  }
  // Open slab intervals intersected with the closed parameter range [0, 1].
  return enter < exit && enter < 1.0 && exit > 0.0;
}

bool segment_intersects_interior(const Segment3& seg, const Building& b) {
  return segment_intersects_interior(seg, box_of(b));
}

bool segment_intersects_interior(const Segment3& seg, const ExpandedBuilding& b) {
  return segment_intersects_interior(seg, box_of(b));
}

ExpandedBuilding expand_building(const Building& b, double d_max) {
  if (!(d_max > 0.0)) {
    throw DomainError("expand_building needs d_max > 0");
  }
  if (!(d_max < b.min_dimension())) {
    throw DomainError("expand_building needs d_max below the smallest building dimension");
  }
  return ExpandedBuilding{b, d_max / (2.0 * std::sqrt(2.0))};
}

Vec3 closest_point_on_expanded(const ExpandedBuilding& b, const Vec3& q) {
  const Box box = box_of(b);
  if (is_interior(box, q)) {
    throw InfeasibleError("point lies strictly inside the expanded building");
  }
  return q.cwiseMax(box.lo).cwiseMin(box.hi);
}

double hyperplane_margin(const Vec3& q_prev, const Vec3& chi, const Vec3& q) {
  const Vec3 normal = q_prev - chi;
  if (normal.squaredNorm() == 0.0) {
    throw DomainError("separating hyperplane normal is zero (q_prev on the boundary)");
  }
  return normal.dot(q - chi);
}

ChannelState true_channel_state(const Vec3& q, const Vec3& w,
                                std::span<const Building> buildings) {
  if (q == w) {
    throw DomainError("channel state undefined for coincident UAV and GN");
  }
  const Segment3 seg{q, w};
  for (const auto& b : buildings) {
    if (segment_intersects_interior(seg, b)) return ChannelState::NLoS;
  }
  return ChannelState::LoS;
}

}  // namespace uavplan
