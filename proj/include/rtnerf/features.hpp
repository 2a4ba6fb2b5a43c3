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

#ifndef RTNERF_FEATURES_HPP
#define RTNERF_FEATURES_HPP

#include <Eigen/Dense>

#include <cmath>
#include <cstddef>
#include <span>
#include <stdexcept>
#include <vector>

#include "rtnerf/scene.hpp"

namespace rtnerf {

/// Flat factor numbering shared by every reader: density factors first
/// (rank-major, six per rank), then appearance factors (rank, channel, kind).
inline std::size_t density_factor_id(int r, FactorKind k) {
  return static_cast<std::size_t>(r) * 6 + static_cast<std::size_t>(k);
}
inline std::size_t appearance_factor_id(const VmDecomposition& d, int r, int c, FactorKind k) {
  return static_cast<std::size_t>(d.rank) * 6 + static_cast<std::size_t>(r * d.channels + c) * 6 +
         static_cast<std::size_t>(k);
}

/// Reads factor elements straight out of the dense decomposition.
class DenseFactorReader {
 public:
  explicit DenseFactorReader(const VmDecomposition& d) : views_(factor_views(d)) {}
  float read(std::size_t factor, int row, int col) const { return views_[factor].values(row, col); }
  std::size_t factor_count() const { return views_.size(); }

 private:
  std::vector<FactorView> views_;
};

/// Optional hook for counting the products a feature evaluation performs.
struct ProductCounter {
  std::size_t products = 0;          // products with two non-zero operands
  std::size_t zero_skippable = 0;    // products with at least one zero operand
  std::size_t nonzero_reads = 0;
  std::size_t reads = 0;

  void note(float a, float b) {
    reads += 2;
    nonzero_reads += (a != 0.0f) + (b != 0.0f);
    if (a != 0.0f && b != 0.0f) ++products; else ++zero_skippable;
  }
};

inline void require_in_range(const VmDecomposition& d, const CellIndex& c) {
  if ((c.array() < 0).any() || (c.array() >= d.resolution.array()).any()) {
    throw std::out_of_range("grid index outside the decomposition");
  }
}

/// Three-mode sum for the density grid, rank-major then modes X, Y, Z.
template <typename Reader>
double density_raw(const Reader& reader, const VmDecomposition& d, const CellIndex& c,
                   ProductCounter* counter = nullptr) {
  const int x = c.x(), y = c.y(), z = c.z();
  double sum = 0.0;
  for (int r = 0; r < d.rank; ++r) {
    const float vx = reader.read(density_factor_id(r, FactorKind::VX), 0, x);
    const float myz = reader.read(density_factor_id(r, FactorKind::MYZ), y, z);
    const float vy = reader.read(density_factor_id(r, FactorKind::VY), 0, y);
    const float mxz = reader.read(density_factor_id(r, FactorKind::MXZ), x, z);
    const float vz = reader.read(density_factor_id(r, FactorKind::VZ), 0, z);
    const float mxy = reader.read(density_factor_id(r, FactorKind::MXY), x, y);
    if (counter) {
      counter->note(vx, myz);
      counter->note(vy, mxz);
      counter->note(vz, mxy);
    }
    sum += static_cast<double>(vx) * static_cast<double>(myz);
    sum += static_cast<double>(vy) * static_cast<double>(mxz);
    sum += static_cast<double>(vz) * static_cast<double>(mxy);
  }
  return sum;
}

/// Per-channel products concatenated as (rank, mode, channel).
template <typename Reader>
void appearance_features(const Reader& reader, const VmDecomposition& d, const CellIndex& c,
                         Eigen::Ref<Eigen::VectorXd> out, ProductCounter* counter = nullptr) {
  const int x = c.x(), y = c.y(), z = c.z();
  const int C = d.channels;
  for (int r = 0; r < d.rank; ++r) {
    for (int ch = 0; ch < C; ++ch) {
      const float vx = reader.read(appearance_factor_id(d, r, ch, FactorKind::VX), 0, x);
      const float myz = reader.read(appearance_factor_id(d, r, ch, FactorKind::MYZ), y, z);
      const float vy = reader.read(appearance_factor_id(d, r, ch, FactorKind::VY), 0, y);
      const float mxz = reader.read(appearance_factor_id(d, r, ch, FactorKind::MXZ), x, z);
      const float vz = reader.read(appearance_factor_id(d, r, ch, FactorKind::VZ), 0, z);
      const float mxy = reader.read(appearance_factor_id(d, r, ch, FactorKind::MXY), x, y);
      if (counter) {
        counter->note(vx, myz);
        counter->note(vy, mxz);
        counter->note(vz, mxy);
      }
      out[(r * 3 + 0) * C + ch] = static_cast<double>(vx) * static_cast<double>(myz);
      out[(r * 3 + 1) * C + ch] = static_cast<double>(vy) * static_cast<double>(mxz);
      out[(r * 3 + 2) * C + ch] = static_cast<double>(vz) * static_cast<double>(mxy);
    }
  }
}

double apply_activation(DensityActivation a, double raw);

/// Sum over ranks of the three vector-matrix products for one cell, passed through the scene's activation.
double density_at(const VmDecomposition& d, const CellIndex& c);

Eigen::VectorXd appearance_features(const VmDecomposition& d, const CellIndex& c);

/// [d, sin(2^l pi d), cos(2^l pi d)] for l in [0, degree).
Eigen::VectorXd encode_direction(const Eigen::Vector3d& dir, int degree);

/// Runs the color head; every output channel lands in [0, 1].
Eigen::Vector3d evaluate_head(const AppearanceHead& head, const Eigen::VectorXd& features,
                              const Eigen::Vector3d& dir);

Eigen::Vector3d appearance_at(const VmDecomposition& d, const AppearanceHead& head, const CellIndex& c,
                              const Eigen::Vector3d& dir);

// ---------------------------------------------------------------------------
// Compositing

/// Inclusive: T_k includes sample k itself. Conventional: T_k stops at k - 1.
enum class Transmittance { Inclusive, Conventional };

struct ShadedSample {
  double t = 0.0;
  double delta = 0.0;
  double sigma = 0.0;
  Eigen::Vector3d color = Eigen::Vector3d::Zero();
};

/// Partial sum of the pixel color carried between batches of samples.
struct CompositeState {
  double optical_depth = 0.0;
  double transmittance = 1.0;
  Eigen::Vector3d color = Eigen::Vector3d::Zero();
  std::size_t folded = 0;
  bool terminated = false;

  /// Folds one sample. Once the transmittance after a fold drops below tau
  /// the state is terminated and further calls are ignored (returns false).
  bool fold(double sigma, double delta, const Eigen::Vector3d& color, double tau,
            Transmittance mode = Transmittance::Inclusive) {
    if (terminated) return false;
    const double tau_k = sigma * delta;
    const double alpha = 1.0 - std::exp(-tau_k);
    if (mode == Transmittance::Conventional) {
      this->color += transmittance * alpha * color;
      optical_depth += tau_k;
      transmittance = std::exp(-optical_depth);
    } else {
      optical_depth += tau_k;
      transmittance = std::exp(-optical_depth);
      this->color += transmittance * alpha * color;
    }
    ++folded;
    if (transmittance < tau) terminated = true;
    return true;
  }
};

struct CompositeResult {
  Eigen::Vector3d color = Eigen::Vector3d::Zero();
  std::size_t samples_shaded = 0;
  double transmittance = 1.0;
};

/// Composites samples sorted by t; throws std::invalid_argument otherwise.
CompositeResult composite(std::span<const ShadedSample> samples, double tau,
                          Transmittance mode = Transmittance::Inclusive);

inline constexpr double kDefaultTerminationThreshold = 1e-4;

}  // namespace rtnerf

#endif  // RTNERF_FEATURES_HPP
