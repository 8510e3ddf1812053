#pragma once

#include <span>
#include <vector>

#include <Eigen/Core>

namespace uavplan {

using Vec3 = Eigen::Vector3d;

/// Axis-aligned, grounded cuboid. `center` is the footprint center (z = 0);
/// `width` spans x, `length` spans y, `height` spans z from the ground up.
struct Building {
  Vec3 center{Vec3::Zero()};
  double width = 0.0;
  double length = 0.0;
  double height = 0.0;

  Building() = default;
  Building(double cx, double cy, double w, double l, double h);

  double half_width() const { return width / 2.0; }
  double half_length() const { return length / 2.0; }
  double min_dimension() const;
};

/// A building inflated by `margin` on each side face and on the roof.
/// The ground face stays at z = 0.
struct ExpandedBuilding {
  Building base;
  double margin = 0.0;

  double half_width() const { return base.half_width() + margin; }
  double half_length() const { return base.half_length() + margin; }
  double height() const { return base.height + margin; }
};

/// Closed axis-aligned box [lo, hi]; the interior is the open box.
struct Box {
  Vec3 lo;
  Vec3 hi;
};

Box box_of(const Building& b);
Box box_of(const ExpandedBuilding& b);

struct Segment3 {
  Vec3 a;
  Vec3 b;

  double length() const { return (b - a).norm(); }
};

enum class ChannelState { LoS, NLoS };

/// a + (b - a) t for t in [0, 1].
Vec3 segment_point(const Segment3& seg, double t);

/// The U + 1 equally spaced points a, a + (b-a)/U, ..., b.
std::vector<Vec3> segment_samples(const Segment3& seg, int U);

/// True iff p lies strictly inside the box on every axis.
bool is_interior(const Box& box, const Vec3& p);
bool is_interior(const Building& b, const Vec3& p);
bool is_interior(const ExpandedBuilding& b, const Vec3& p);

/// Slab test against the open interior. Segments that only touch faces,
/// edges or corners do not intersect.
bool segment_intersects_interior(const Segment3& seg, const Box& box);
bool segment_intersects_interior(const Segment3& seg, const Building& b);
bool segment_intersects_interior(const Segment3& seg, const ExpandedBuilding& b);

/// Inflates a building by d_max / (2 sqrt 2). Requires 0 < d_max < min dimension.
ExpandedBuilding expand_building(const Building& b, double d_max);

/// Euclidean projection of q onto the closed expanded cuboid. Throws
/// InfeasibleError when q is strictly inside it.
Vec3 closest_point_on_expanded(const ExpandedBuilding& b, const Vec3& q);

/// (q_prev - chi)^T (q - chi). Throws DomainError when q_prev == chi.
double hyperplane_margin(const Vec3& q_prev, const Vec3& chi, const Vec3& q);

/// LoS unless the segment q -> w crosses the interior of some building.
ChannelState true_channel_state(const Vec3& q, const Vec3& w,
                                std::span<const Building> buildings);

}  // namespace uavplan
