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

// Independent reference implementations used only by tests. None of these
// call into the code they check, apart from plain data types.

#ifndef RTNERF_TESTS_ORACLES_HPP
#define RTNERF_TESTS_ORACLES_HPP

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <vector>

#include "rtnerf/scene.hpp"

namespace oracle {

// ---------------------------------------------------------------------------
// Dense reconstruction of VM-decomposed grids.

/// Fully materialized grid, x fastest. Each mode is accumulated as an outer
/// product over the whole grid before the next mode, rank by rank.
struct DenseGrid {
  Eigen::Vector3i res;
  int width = 1;  // values per cell
  std::vector<double> values;

  double at(int x, int y, int z, int k = 0) const {
    const std::size_t cell = static_cast<std::size_t>(x) + static_cast<std::size_t>(res.x()) *
                                 (static_cast<std::size_t>(y) + static_cast<std::size_t>(res.y()) * z);
    return values[cell * width + k];
  }
};

/// Writes the three mode products of one factor set into a width-3 grid.
inline void mode_products(const rtnerf::VmFactorSet& f, DenseGrid& modes) {
  const Eigen::Vector3i& res = modes.res;
  for (int z = 0; z < res.z(); ++z)
    for (int y = 0; y < res.y(); ++y)
      for (int x = 0; x < res.x(); ++x) {
        const std::size_t cell = static_cast<std::size_t>(x) + static_cast<std::size_t>(res.x()) *
                                     (static_cast<std::size_t>(y) + static_cast<std::size_t>(res.y()) * z);
        modes.values[cell * 3 + 0] = double(f.vx[x]) * double(f.m_yz(y, z));
        modes.values[cell * 3 + 1] = double(f.vy[y]) * double(f.m_xz(x, z));
        modes.values[cell * 3 + 2] = double(f.vz[z]) * double(f.m_xy(x, y));
      }
}

/// Raw (pre-activation) density grid.
inline DenseGrid reconstruct_density(const rtnerf::VmDecomposition& d) {
  DenseGrid g;
  g.res = d.resolution;
  g.width = 1;
  g.values.assign(static_cast<std::size_t>(d.resolution.prod()), 0.0);
  // The per-cell sum runs rank-major with modes X, Y, Z, matching the
  // documented evaluation order so that double sums are bit-identical.
  DenseGrid modes;
  modes.res = d.resolution;
  modes.width = 3;
  modes.values.assign(static_cast<std::size_t>(d.resolution.prod()) * 3, 0.0);
  std::vector<double> acc(g.values.size(), 0.0);
  for (int r = 0; r < d.rank; ++r) {
    mode_products(d.density[r], modes);
    for (std::size_t c = 0; c < acc.size(); ++c) {
      acc[c] += modes.values[c * 3 + 0];
      acc[c] += modes.values[c * 3 + 1];
      acc[c] += modes.values[c * 3 + 2];
    }
  }
  g.values = std::move(acc);
  return g;
}

/// Appearance features per cell, 3RC values ordered (rank, mode, channel).
inline DenseGrid reconstruct_appearance(const rtnerf::VmDecomposition& d) {
  DenseGrid g;
  g.res = d.resolution;
  g.width = 3 * d.rank * d.channels;
  const std::size_t cells = static_cast<std::size_t>(d.resolution.prod());
  g.values.assign(cells * g.width, 0.0);
  DenseGrid modes;
  modes.res = d.resolution;
  modes.width = 3;
  modes.values.assign(cells * 3, 0.0);
  for (int r = 0; r < d.rank; ++r)
    for (int c = 0; c < d.channels; ++c) {
      mode_products(d.appearance[static_cast<std::size_t>(r * d.channels + c)], modes);
      for (std::size_t cell = 0; cell < cells; ++cell)
        for (int m = 0; m < 3; ++m) g.values[cell * g.width + (r * 3 + m) * d.channels + c] = modes.values[cell * 3 + m];
    }
  return g;
}

// ---------------------------------------------------------------------------
// Ray-sphere by closest approach and bisection (no quadratic formula).

struct SphereHit {
  bool hit = false;
  double t_near = 0.0;
  double t_far = 0.0;
};

inline SphereHit sphere_by_search(const Eigen::Vector3d& o, const Eigen::Vector3d& d, const Eigen::Vector3d& c,
                                  double r) {
  auto dist = [&](double t) { return (o + t * d - c).norm(); };
  // Distance along the ray is convex in t; golden-section search on [0, hi].
  const double hi = (c - o).norm() + 2.0 * r + 1.0;
  double a = 0.0, b = hi;
  const double g = (std::sqrt(5.0) - 1.0) / 2.0;
  double x1 = b - g * (b - a), x2 = a + g * (b - a);
  double f1 = dist(x1), f2 = dist(x2);
  for (int i = 0; i < 200; ++i) {
    if (f1 < f2) {
      b = x2;
      x2 = x1;
      f2 = f1;
      x1 = b - g * (b - a);
      f1 = dist(x1);
    } else {
      a = x1;
      x1 = x2;
      f1 = f2;
      x2 = a + g * (b - a);
      f2 = dist(x2);
    }
  }
  double t_min = 0.5 * (a + b);
  if (dist(0.0) < dist(t_min)) t_min = 0.0;
  SphereHit h;
  if (dist(t_min) > r) return h;
  h.hit = true;
  auto inside = [&](double t) { return dist(t) <= r; };
  // Entry: first inside point on [0, t_min]; exit: last inside point on [t_min, hi].
  if (inside(0.0)) {
    h.t_near = 0.0;
  } else {
    double lo = 0.0, up = t_min;
    for (int i = 0; i < 200; ++i) {
      const double mid = 0.5 * (lo + up);
      (inside(mid) ? up : lo) = mid;
    }
    h.t_near = up;
  }
  double lo = t_min, up = hi;
  for (int i = 0; i < 200; ++i) {
    const double mid = 0.5 * (lo + up);
    (inside(mid) ? lo : up) = mid;
  }
  h.t_far = lo;
  return h;
}

// ---------------------------------------------------------------------------
// Volume rendering of piecewise-constant fields.

struct Piece {
  double length;
  double sigma;
  Eigen::Vector3d color;
};

/// Closed-form integral of T(t) sigma(t) c(t) dt with T(t) = exp(-int_0^t sigma).
inline Eigen::Vector3d analytic_color(const std::vector<Piece>& pieces) {
  Eigen::Vector3d out = Eigen::Vector3d::Zero();
  double depth = 0.0;
  for (const auto& p : pieces) {
    out += std::exp(-depth) * (1.0 - std::exp(-p.sigma * p.length)) * p.color;
    depth += p.sigma * p.length;
  }
  return out;
}

/// Literal sum with T_k including sample k, `steps_per_piece` equal steps.
inline Eigen::Vector3d inclusive_quadrature(const std::vector<Piece>& pieces, int steps_per_piece) {
  Eigen::Vector3d out = Eigen::Vector3d::Zero();
  double depth = 0.0;
  for (const auto& p : pieces) {
    const double dt = p.length / steps_per_piece;
    for (int k = 0; k < steps_per_piece; ++k) {
      depth += p.sigma * dt;
      out += std::exp(-depth) * (1.0 - std::exp(-p.sigma * dt)) * p.color;
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Cycle-by-cycle dual-purpose tree scheduler.

struct TreeSchedule {
  std::uint64_t cycles = 0;
  std::uint64_t mixed_cycles = 0;
  std::uint64_t adder_cycles = 0;
  std::uint64_t adds = 0;
  std::uint64_t searches = 0;
};

/// Each cycle: while searches remain, `search_leaves` leaves search and the
/// rest add; once searches are done every leaf adds.
inline TreeSchedule greedy_tree(std::uint64_t adds, std::uint64_t searches, std::uint64_t width,
                                std::uint64_t search_leaves) {
  TreeSchedule s;
  while (adds > 0 || searches > 0) {
    ++s.cycles;
    if (searches > 0) {
      ++s.mixed_cycles;
      const std::uint64_t sv = std::min(searches, search_leaves);
      searches -= sv;
      s.searches += sv;
      const std::uint64_t av = std::min(adds, width - search_leaves);
      adds -= av;
      s.adds += av;
    } else {
      ++s.adder_cycles;
      const std::uint64_t av = std::min(adds, width);
      adds -= av;
      s.adds += av;
    }
  }
  return s;
}

// ---------------------------------------------------------------------------
// Grid cell lookup by explicit bounds comparison.

inline std::optional<Eigen::Vector3i> cell_containing(const Eigen::Vector3d& p, const rtnerf::SceneBounds& b,
                                                      const Eigen::Vector3i& res) {
  Eigen::Vector3i c;
  for (int a = 0; a < 3; ++a) {
    const double lo = b.min_corner[a], hi = b.max_corner[a];
    if (p[a] < lo || p[a] >= hi) return std::nullopt;
    const double side = (hi - lo) / res[a];
    int k = static_cast<int>((p[a] - lo) / side);
    k = std::min(k, res[a] - 1);
    // Step to the neighbour if rounding put p outside [lo + k side, lo + (k+1) side).
    if (p[a] < lo + k * side && k > 0) --k;
    if (p[a] >= lo + (k + 1) * side && k + 1 < res[a]) ++k;
    c[a] = k;
  }
  return c;
}

}  // namespace oracle

#endif  // RTNERF_TESTS_ORACLES_HPP
