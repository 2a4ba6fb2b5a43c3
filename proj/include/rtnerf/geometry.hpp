// Copyright 2026 The rtnerf Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef RTNERF_GEOMETRY_HPP
#define RTNERF_GEOMETRY_HPP

#include <Eigen/Dense>

#include <algorithm>
#include <array>
#include <cmath>
#include <numbers>
#include <optional>
#include <stdexcept>

#include "rtnerf/scene.hpp"

namespace rtnerf {

template <typename Scalar>
using Vec3 = Eigen::Matrix<Scalar, 3, 1>;
template <typename Scalar>
using Mat3 = Eigen::Matrix<Scalar, 3, 3>;

template <typename Scalar>
struct Ray {
  Vec3<Scalar> origin;
  Vec3<Scalar> direction;  // unit length

  Vec3<Scalar> at(Scalar t) const { return origin + t * direction; }
};

/// Pinhole camera. Camera frame: x right, y down, z forward; rotation maps
/// camera-frame vectors to world.
template <typename Scalar>
struct Camera {
  Vec3<Scalar> origin = Vec3<Scalar>::Zero();
  Mat3<Scalar> rotation = Mat3<Scalar>::Identity();
  Scalar fx = 1, fy = 1, cx = 0, cy = 0;
  int width = 1, height = 1;

  Vec3<Scalar> forward() const { return rotation.col(2); }

  bool valid() const {
    const Mat3<Scalar> err = rotation.transpose() * rotation - Mat3<Scalar>::Identity();
    return err.cwiseAbs().maxCoeff() <= Scalar(1e-6) && fx > 0 && fy > 0 && width >= 1 && height >= 1;
  }

  /// Camera at `position` looking at `target` with the given vertical field of view.
  static Camera look_at(const Vec3<Scalar>& position, const Vec3<Scalar>& target, Scalar fov_deg, int width,
                        int height) {
    const Vec3<Scalar> fwd = (target - position).normalized();
    Vec3<Scalar> up(0, 1, 0);
    if (std::abs(fwd.dot(up)) > Scalar(0.999)) up = Vec3<Scalar>(0, 0, 1);
    const Vec3<Scalar> right = fwd.cross(up).normalized();
    const Vec3<Scalar> down = fwd.cross(right);
    Camera cam;
    cam.origin = position;
    cam.rotation.col(0) = right;
    cam.rotation.col(1) = down;
    cam.rotation.col(2) = fwd;
    const Scalar half = fov_deg * std::numbers::pi_v<Scalar> / Scalar(360);
    cam.fy = Scalar(0.5) * Scalar(height) / std::tan(half);
    cam.fx = cam.fy;
    cam.cx = Scalar(0.5) * Scalar(width);
    cam.cy = Scalar(0.5) * Scalar(height);
    cam.width = width;
    cam.height = height;
    return cam;
  }
};

template <typename Scalar>
Ray<Scalar> pixel_to_ray(const Camera<Scalar>& cam, int px, int py) {
  if (px < 0 || py < 0 || px >= cam.width || py >= cam.height) {
    throw std::out_of_range("pixel outside the image");
  }
  const Vec3<Scalar> local((Scalar(px) + Scalar(0.5) - cam.cx) / cam.fx,
                           (Scalar(py) + Scalar(0.5) - cam.cy) / cam.fy, Scalar(1));
  return {cam.origin, (cam.rotation * local).normalized()};
}

template <typename Scalar>
struct Ball {
  Vec3<Scalar> center;
  Scalar radius;
  CellIndex source_cell;
};

/// Circumscribed ball of an occupied cell: radius is half the cell diagonal.
inline Ball<double> cube_to_ball(const CellIndex& cell, const OccupancyGrid& grid) {
  if (!grid.in_range(cell)) throw std::out_of_range("cell index outside the grid");
  if (!grid.occupied(cell)) throw std::invalid_argument("cell is not occupied");
  return {grid.cell_center(cell), 0.5 * grid.cell_size().norm(), cell};
}

/// Pixels whose rays may meet a ball. Membership is an angular test against
/// the ball's view cone; the box is a conservative bound on the members.
template <typename Scalar>
struct PixelRegion {
  int x0 = 0, y0 = 0, x1 = -1, y1 = -1;  // inclusive
  Vec3<Scalar> axis = Vec3<Scalar>::UnitZ();
  Scalar cos_threshold = 1;
  bool contains_origin = false;

  static constexpr Scalar kSlack = std::numeric_limits<Scalar>::epsilon() * 64;

  bool contains(const Vec3<Scalar>& unit_dir) const {
    return contains_origin || unit_dir.dot(axis) >= cos_threshold - kSlack;
  }
  long long pixel_count() const {
    return x1 < x0 || y1 < y0 ? 0 : static_cast<long long>(x1 - x0 + 1) * (y1 - y0 + 1);
  }
};

namespace detail {

// Range of x/z over the 2-D wedge of directions that meet the disk of radius
// r centred at (a, z). Returns false when the wedge reaches z <= 0.
template <typename Scalar>
bool wedge_bounds(Scalar a, Scalar z, Scalar r, Scalar& lo, Scalar& hi) {
  const Scalar len2 = a * a + z * z;
  const Scalar t2 = len2 - r * r;
  if (t2 <= 0) return false;
  const Scalar t = std::sqrt(t2);
  // Tangent directions: the centre direction rotated by +-asin(r/len).
  const Scalar a1 = t * a - r * z, z1 = r * a + t * z;
  const Scalar a2 = t * a + r * z, z2 = -r * a + t * z;
  if (z1 <= 0 || z2 <= 0) return false;
  lo = std::min(a1 / z1, a2 / z2);
  hi = std::max(a1 / z1, a2 / z2);
  return true;
}

inline int clamp_pixel(double v, int limit) {
  if (!(v > -1.0)) return -1;
  if (v > static_cast<double>(limit)) return limit;
  return static_cast<int>(v);
}

}  // namespace detail

template <typename Scalar>
std::optional<PixelRegion<Scalar>> project_ball(const Camera<Scalar>& cam, const Ball<Scalar>& ball) {
  const Vec3<Scalar> to_center = ball.center - cam.origin;
  const Scalar dist = to_center.norm();
  PixelRegion<Scalar> region;
  if (dist <= ball.radius) {
    region.contains_origin = true;
    region.x0 = 0;
    region.y0 = 0;
    region.x1 = cam.width - 1;
    region.y1 = cam.height - 1;
    region.cos_threshold = -1;
    return region;
  }
  const Vec3<Scalar> local = cam.rotation.transpose() * to_center;
  if (local.z() < -ball.radius) return std::nullopt;

  region.axis = to_center / dist;
  region.cos_threshold = std::sqrt(std::max(Scalar(0), Scalar(1) - (ball.radius * ball.radius) / (dist * dist)));

  int x0 = 0, x1 = cam.width - 1, y0 = 0, y1 = cam.height - 1;
  Scalar lo, hi;
  if (detail::wedge_bounds(local.x(), local.z(), ball.radius, lo, hi)) {
    // One pixel of margin on each side absorbs rounding at the edges.
    x0 = std::max(x0, detail::clamp_pixel(std::ceil(double(lo * cam.fx + cam.cx - Scalar(0.5))) - 1, cam.width));
    x1 = std::min(x1, detail::clamp_pixel(std::floor(double(hi * cam.fx + cam.cx - Scalar(0.5))) + 1, cam.width));
  }
  if (detail::wedge_bounds(local.y(), local.z(), ball.radius, lo, hi)) {
    y0 = std::max(y0, detail::clamp_pixel(std::ceil(double(lo * cam.fy + cam.cy - Scalar(0.5))) - 1, cam.height));
    y1 = std::min(y1, detail::clamp_pixel(std::floor(double(hi * cam.fy + cam.cy - Scalar(0.5))) + 1, cam.height));
  }
  if (x1 < x0 || y1 < y0) return std::nullopt;
  region.x0 = x0;
  region.x1 = x1;
  region.y0 = y0;
  region.y1 = y1;
  return region;
}

template <typename Scalar>
struct Segment {
  Scalar t_near;
  Scalar t_far;

  Scalar length() const { return t_far - t_near; }
};

/// Analytic line-sphere intersection clipped to t >= 0.
template <typename Scalar>
std::optional<Segment<Scalar>> ray_sphere_intersect(const Ray<Scalar>& ray, const Ball<Scalar>& ball) {
  const Vec3<Scalar> oc = ball.center - ray.origin;
  const Scalar m = ray.direction.dot(oc);
  const Scalar q = oc.squaredNorm() - ball.radius * ball.radius;
  const Scalar disc = m * m - q;
  if (disc < 0) return std::nullopt;
  const Scalar root = std::sqrt(disc);
  const Scalar t_far = m + root;
  if (t_far < 0) return std::nullopt;
  return Segment<Scalar>{std::max(m - root, Scalar(0)), t_far};
}

/// Slab test against an axis-aligned box, clipped to t >= 0.
template <typename Scalar>
std::optional<Segment<Scalar>> ray_box_intersect(const Ray<Scalar>& ray, const Vec3<Scalar>& lo,
                                                 const Vec3<Scalar>& hi) {
  Scalar t0 = 0;
  Scalar t1 = std::numeric_limits<Scalar>::infinity();
  for (int a = 0; a < 3; ++a) {
    const Scalar o = ray.origin[a];
    const Scalar d = ray.direction[a];
    if (d == 0) {
      if (o < lo[a] || o > hi[a]) return std::nullopt;
      continue;
    }
    Scalar ta = (lo[a] - o) / d;
    Scalar tb = (hi[a] - o) / d;
    if (ta > tb) std::swap(ta, tb);
    t0 = std::max(t0, ta);
    t1 = std::min(t1, tb);
    if (t0 > t1) return std::nullopt;
  }
  return Segment<Scalar>{t0, t1};
}

/// Octant k of the bounds: bit 0 selects the upper x half, bit 1 y, bit 2 z.
inline void octant_box(const SceneBounds& bounds, int k, Eigen::Vector3d& lo, Eigen::Vector3d& hi) {
  const Eigen::Vector3d mid = bounds.center();
  for (int a = 0; a < 3; ++a) {
    const bool upper = ((k >> a) & 1) != 0;
    lo[a] = upper ? mid[a] : bounds.lo()[a];
    hi[a] = upper ? bounds.hi()[a] : mid[a];
  }
}

inline int octant_of(const CellIndex& cell, const OccupancyGrid& grid) {
  const Eigen::Vector3d c = grid.cell_center(cell);
  const Eigen::Vector3d mid = grid.bounds().center();
  return (c.x() >= mid.x() ? 1 : 0) | (c.y() >= mid.y() ? 2 : 0) | (c.z() >= mid.z() ? 4 : 0);
}

inline double distance_to_box(const Eigen::Vector3d& p, const Eigen::Vector3d& lo, const Eigen::Vector3d& hi) {
  const Eigen::Vector3d gap = (lo - p).cwiseMax(p - hi).cwiseMax(Eigen::Vector3d::Zero());
  return gap.norm();
}

/// Octants sorted by distance from the view origin to their nearest point;
/// ties go to the lower index.
inline std::array<int, 8> octant_order(const SceneBounds& bounds, const Eigen::Vector3d& view_origin) {
  std::array<double, 8> dist{};
  for (int k = 0; k < 8; ++k) {
    Eigen::Vector3d lo, hi;
    octant_box(bounds, k, lo, hi);
    dist[static_cast<std::size_t>(k)] = distance_to_box(view_origin, lo, hi);
  }
  std::array<int, 8> order{0, 1, 2, 3, 4, 5, 6, 7};
  std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
    return dist[static_cast<std::size_t>(a)] < dist[static_cast<std::size_t>(b)];
  });
  return order;
}

}  // namespace rtnerf

#endif  // RTNERF_GEOMETRY_HPP
