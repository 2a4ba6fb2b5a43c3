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

#ifndef RTNERF_SCENE_HPP
#define RTNERF_SCENE_HPP

#include <Eigen/Dense>

#include <array>
#include <cstdint>
#include <filesystem>
#include <stdexcept>
#include <string>
#include <vector>

namespace rtnerf {

using CellIndex = Eigen::Vector3i;

/// Exact element equality that tolerates a shape mismatch.
template <typename A, typename B>
bool same_values(const Eigen::DenseBase<A>& a, const Eigen::DenseBase<B>& b) {
  return a.rows() == b.rows() && a.cols() == b.cols() && (a.derived().array() == b.derived().array()).all();
}

/// Axis-aligned world-space box holding the scene volume.
///
/// Corners are kept in single precision so that they survive a save/load
/// round trip bit for bit.
struct SceneBounds {
  Eigen::Vector3f min_corner{-1.0f, -1.0f, -1.0f};
  Eigen::Vector3f max_corner{1.0f, 1.0f, 1.0f};

  Eigen::Vector3d lo() const { return min_corner.cast<double>(); }
  Eigen::Vector3d hi() const { return max_corner.cast<double>(); }
  Eigen::Vector3d extent() const { return hi() - lo(); }
  Eigen::Vector3d center() const { return 0.5 * (lo() + hi()); }

  bool valid() const { return (max_corner.array() > min_corner.array()).all(); }
  bool operator==(const SceneBounds&) const = default;
};

/// Binary occupancy over a regular grid. Bits are stored one per cell in
/// x-fastest order: index = x + Nx * (y + Ny * z).
class OccupancyGrid {
 public:
  OccupancyGrid() = default;
  OccupancyGrid(const Eigen::Vector3i& resolution, const SceneBounds& bounds);

  const Eigen::Vector3i& resolution() const { return resolution_; }
  const SceneBounds& bounds() const { return bounds_; }
  std::size_t cell_count() const { return bits_.size(); }

  std::size_t linear_index(const CellIndex& c) const {
    return static_cast<std::size_t>(c.x()) +
           static_cast<std::size_t>(resolution_.x()) *
               (static_cast<std::size_t>(c.y()) +
                static_cast<std::size_t>(resolution_.y()) * static_cast<std::size_t>(c.z()));
  }
  CellIndex cell_of(std::size_t linear) const;

  bool in_range(const CellIndex& c) const {
    return (c.array() >= 0).all() && (c.array() < resolution_.array()).all();
  }
  bool occupied(const CellIndex& c) const { return bits_[linear_index(c)] != 0; }
  bool occupied(std::size_t linear) const { return bits_[linear] != 0; }
  void set(const CellIndex& c, bool value) { bits_[linear_index(c)] = value ? 1 : 0; }
  void set(std::size_t linear, bool value) { bits_[linear] = value ? 1 : 0; }
  void fill(bool value);

  /// Per-axis cell side lengths.
  Eigen::Vector3d cell_size() const { return bounds_.extent().cwiseQuotient(resolution_.cast<double>()); }
  Eigen::Vector3d cell_min(const CellIndex& c) const {
    return bounds_.lo() + c.cast<double>().cwiseProduct(cell_size());
  }
  Eigen::Vector3d cell_center(const CellIndex& c) const {
    return bounds_.lo() + (c.cast<double>().array() + 0.5).matrix().cwiseProduct(cell_size());
  }
  /// Quantizes a world point to its cell; the result may be out of range.
  CellIndex quantize(const Eigen::Vector3d& p) const;

  std::size_t popcount() const;
  const std::vector<std::uint8_t>& bits() const { return bits_; }

  bool operator==(const OccupancyGrid&) const = default;

 private:
  Eigen::Vector3i resolution_ = Eigen::Vector3i::Zero();
  SceneBounds bounds_;
  std::vector<std::uint8_t> bits_;
};

double occupancy_ratio(const OccupancyGrid& grid);

/// One matrix-vector triple per decomposition mode: the vector runs along
/// one axis and the matrix spans the remaining plane.
struct VmFactorSet {
  Eigen::VectorXf vx, vy, vz;
  Eigen::MatrixXf m_yz;  // Ny x Nz
  Eigen::MatrixXf m_xz;  // Nx x Nz
  Eigen::MatrixXf m_xy;  // Nx x Ny

  static VmFactorSet zeros(const Eigen::Vector3i& res);
  bool operator==(const VmFactorSet& o) const {
    return same_values(vx, o.vx) && same_values(vy, o.vy) && same_values(vz, o.vz) &&
           same_values(m_yz, o.m_yz) && same_values(m_xz, o.m_xz) && same_values(m_xy, o.m_xy);
  }
};

/// Factor order inside a VmFactorSet, also the on-disk order.
enum class FactorKind : std::uint8_t { VX = 0, VY, VZ, MYZ, MXZ, MXY };
inline constexpr std::array<FactorKind, 6> kFactorKinds = {
    FactorKind::VX, FactorKind::VY, FactorKind::VZ, FactorKind::MYZ, FactorKind::MXZ, FactorKind::MXY};
const char* factor_kind_name(FactorKind kind);

/// Density activation applied on top of the raw three-mode sum.
enum class DensityActivation : std::uint32_t {
  Softplus = 0,
  Relu = 1,
};
const char* activation_name(DensityActivation a);

/// Matrix-vector factorization of the density and appearance grids.
/// density[r] holds rank r; appearance[r * channels + c] holds channel c of rank r.
struct VmDecomposition {
  Eigen::Vector3i resolution = Eigen::Vector3i::Zero();
  int rank = 0;
  int channels = 0;
  std::vector<VmFactorSet> density;
  std::vector<VmFactorSet> appearance;
  DensityActivation activation = DensityActivation::Softplus;

  static VmDecomposition zeros(const Eigen::Vector3i& res, int rank, int channels);
  const VmFactorSet& app(int r, int c) const { return appearance[static_cast<std::size_t>(r * channels + c)]; }
  VmFactorSet& app(int r, int c) { return appearance[static_cast<std::size_t>(r * channels + c)]; }
  int feature_width() const { return 3 * rank * channels; }
  /// Throws std::invalid_argument if sizes disagree with resolution/rank/channels.
  void validate() const;
  bool operator==(const VmDecomposition&) const = default;
};

/// Small view-dependent color head: tanh hidden layers, sigmoid outputs.
struct AppearanceHead {
  int direction_degree = 2;
  std::vector<int> widths;  // input, hidden..., output
  std::vector<Eigen::MatrixXf> weights;  // weights[l] is widths[l+1] x widths[l]
  std::vector<Eigen::VectorXf> biases;

  static int direction_encoding_width(int degree) { return 3 + 6 * degree; }
  int input_width() const { return widths.empty() ? 0 : widths.front(); }
  int output_width() const { return widths.empty() ? 0 : widths.back(); }
  std::size_t mac_count() const;
  void validate(int feature_width) const;
  bool operator==(const AppearanceHead& o) const;
};

struct Scene {
  OccupancyGrid grid;
  VmDecomposition decomp;
  AppearanceHead head;
  std::uint64_t seed = 0;

  bool operator==(const Scene&) const = default;
};

struct SceneParams {
  Eigen::Vector3i resolution{64, 64, 64};
  double target_occupancy = 0.01;
  int rank = 4;
  int channels = 3;
  std::uint64_t seed = 0;
  /// Zero-fraction targets, assigned cyclically to factors in file order.
  std::vector<double> factor_sparsity{0.0};
  /// Upper bound of the uniform draw for non-zero density factor entries.
  double density_scale = 0.5;
  int num_blobs = 4;
  SceneBounds bounds;
  DensityActivation activation = DensityActivation::Softplus;
  int direction_degree = 2;
  int hidden_width = 64;
  int hidden_layers = 2;
};

/// Procedural scene: a few connected blobs of occupied cells plus random
/// factor grids with exact per-factor zero fractions.
Scene generate_synthetic_scene(const SceneParams& params);

/// Read-only view of one factor. Vectors appear as 1 x n matrices.
struct FactorView {
  bool density;
  int rank;
  int channel;  // -1 for density factors
  FactorKind kind;
  Eigen::Map<const Eigen::MatrixXf> values;

  std::string label() const;
};

/// Every factor in file order (density ranks, then appearance rank-major, channel-minor).
std::vector<FactorView> factor_views(const VmDecomposition& d);

class SceneFormatError : public std::runtime_error {
 public:
  enum class Kind { BadMagic, VersionMismatch, Truncated, DimensionMismatch, Io };
  SceneFormatError(Kind kind, std::string field, const std::string& message)
      : std::runtime_error(message), kind_(kind), field_(std::move(field)) {}
  Kind kind() const { return kind_; }
  const std::string& field() const { return field_; }

 private:
  Kind kind_;
  std::string field_;
};

inline constexpr std::uint32_t kSceneFormatVersion = 1;

std::vector<std::uint8_t> serialize_scene(const Scene& scene);
Scene deserialize_scene(const std::vector<std::uint8_t>& bytes);
void save_scene(const Scene& scene, const std::filesystem::path& path);
Scene load_scene(const std::filesystem::path& path);

}  // namespace rtnerf

#endif  // RTNERF_SCENE_HPP
