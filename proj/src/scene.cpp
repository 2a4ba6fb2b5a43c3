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

#include "rtnerf/scene.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <sstream>

namespace rtnerf {

OccupancyGrid::OccupancyGrid(const Eigen::Vector3i& resolution, const SceneBounds& bounds)
    : resolution_(resolution), bounds_(bounds) {
  if ((resolution.array() <= 0).any()) {
    throw std::invalid_argument("occupancy grid resolution must be positive in every axis");
  }
  if (!bounds.valid()) {
    throw std::invalid_argument("scene bounds: max_corner must exceed min_corner in every axis");
  }
  bits_.assign(static_cast<std::size_t>(resolution.x()) * resolution.y() * resolution.z(), 0);
}

CellIndex OccupancyGrid::cell_of(std::size_t linear) const {
  const auto nx = static_cast<std::size_t>(resolution_.x());
  const auto ny = static_cast<std::size_t>(resolution_.y());
  return CellIndex(static_cast<int>(linear % nx), static_cast<int>((linear / nx) % ny),
                   static_cast<int>(linear / (nx * ny)));
}

void OccupancyGrid::fill(bool value) { std::fill(bits_.begin(), bits_.end(), value ? 1 : 0); }

CellIndex OccupancyGrid::quantize(const Eigen::Vector3d& p) const {
  const Eigen::Vector3d rel = (p - bounds_.lo()).cwiseQuotient(cell_size());
  return CellIndex(static_cast<int>(std::floor(rel.x())), static_cast<int>(std::floor(rel.y())),
                   static_cast<int>(std::floor(rel.z())));
}

std::size_t OccupancyGrid::popcount() const {
  return static_cast<std::size_t>(std::count(bits_.begin(), bits_.end(), std::uint8_t{1}));
}

double occupancy_ratio(const OccupancyGrid& grid) {
  if (grid.cell_count() == 0) return 0.0;
  return static_cast<double>(grid.popcount()) / static_cast<double>(grid.cell_count());
}

VmFactorSet VmFactorSet::zeros(const Eigen::Vector3i& res) {
  VmFactorSet f;
  f.vx = Eigen::VectorXf::Zero(res.x());
  f.vy = Eigen::VectorXf::Zero(res.y());
  f.vz = Eigen::VectorXf::Zero(res.z());
  f.m_yz = Eigen::MatrixXf::Zero(res.y(), res.z());
  f.m_xz = Eigen::MatrixXf::Zero(res.x(), res.z());
  f.m_xy = Eigen::MatrixXf::Zero(res.x(), res.y());
  return f;
}

const char* factor_kind_name(FactorKind kind) {
  switch (kind) {
    case FactorKind::VX: return "vX";
    case FactorKind::VY: return "vY";
    case FactorKind::VZ: return "vZ";
    case FactorKind::MYZ: return "MYZ";
    case FactorKind::MXZ: return "MXZ";
    case FactorKind::MXY: return "MXY";
  }
  return "?";
}

const char* activation_name(DensityActivation a) {
  return a == DensityActivation::Relu ? "relu" : "softplus";
}

VmDecomposition VmDecomposition::zeros(const Eigen::Vector3i& res, int rank, int channels) {
  VmDecomposition d;
  d.resolution = res;
  d.rank = rank;
  d.channels = channels;
  d.density.assign(static_cast<std::size_t>(rank), VmFactorSet::zeros(res));
  d.appearance.assign(static_cast<std::size_t>(rank * channels), VmFactorSet::zeros(res));
  return d;
}

namespace {

bool matches(const VmFactorSet& f, const Eigen::Vector3i& res) {
  return f.vx.size() == res.x() && f.vy.size() == res.y() && f.vz.size() == res.z() &&
         f.m_yz.rows() == res.y() && f.m_yz.cols() == res.z() && f.m_xz.rows() == res.x() &&
         f.m_xz.cols() == res.z() && f.m_xy.rows() == res.x() && f.m_xy.cols() == res.y();
}

}  // namespace

void VmDecomposition::validate() const {
  if (rank < 1) throw std::invalid_argument("decomposition rank must be >= 1");
  if (channels < 1) throw std::invalid_argument("decomposition channel count must be >= 1");
  if (density.size() != static_cast<std::size_t>(rank) ||
      appearance.size() != static_cast<std::size_t>(rank * channels)) {
    throw std::invalid_argument("decomposition factor count does not match rank/channels");
  }
  for (const auto& f : density)
    if (!matches(f, resolution)) throw std::invalid_argument("density factor shape mismatch");
  for (const auto& f : appearance)
    if (!matches(f, resolution)) throw std::invalid_argument("appearance factor shape mismatch");
}

std::size_t AppearanceHead::mac_count() const {
  std::size_t macs = 0;
  for (std::size_t l = 0; l + 1 < widths.size(); ++l)
    macs += static_cast<std::size_t>(widths[l]) * static_cast<std::size_t>(widths[l + 1]);
  return macs;
}

void AppearanceHead::validate(int feature_width) const {
  if (widths.size() < 2) throw std::invalid_argument("appearance head needs at least one layer");
  if (direction_degree < 0) throw std::invalid_argument("direction degree must be non-negative");
  if (widths.front() != feature_width + direction_encoding_width(direction_degree)) {
    throw std::invalid_argument("appearance head input width must equal feature width + direction encoding width");
  }
  if (weights.size() + 1 != widths.size() || biases.size() + 1 != widths.size()) {
    throw std::invalid_argument("appearance head layer count mismatch");
  }
  for (std::size_t l = 0; l < weights.size(); ++l) {
    if (widths[l] <= 0 || widths[l + 1] <= 0) throw std::invalid_argument("layer widths must be positive");
    if (weights[l].rows() != widths[l + 1] || weights[l].cols() != widths[l] ||
        biases[l].size() != widths[l + 1]) {
      throw std::invalid_argument("appearance head layer shape mismatch");
    }
  }
}

bool AppearanceHead::operator==(const AppearanceHead& o) const {
  if (direction_degree != o.direction_degree || widths != o.widths ||
      weights.size() != o.weights.size() || biases.size() != o.biases.size()) {
    return false;
  }
  for (std::size_t l = 0; l < weights.size(); ++l)
    if (!same_values(weights[l], o.weights[l]) || !same_values(biases[l], o.biases[l])) return false;
  return true;
}

std::string FactorView::label() const {
  std::ostringstream os;
  os << (density ? "density" : "appearance") << ".r" << rank;
  if (!density) os << ".c" << channel;
  os << "." << factor_kind_name(kind);
  return os.str();
}

namespace {

Eigen::Map<const Eigen::MatrixXf> as_matrix(const Eigen::VectorXf& v) {
  return {v.data(), 1, v.size()};
}
Eigen::Map<const Eigen::MatrixXf> as_matrix(const Eigen::MatrixXf& m) {
  return {m.data(), m.rows(), m.cols()};
}

void append_views(std::vector<FactorView>& out, const VmFactorSet& f, bool density, int r, int c) {
  out.push_back({density, r, c, FactorKind::VX, as_matrix(f.vx)});
  out.push_back({density, r, c, FactorKind::VY, as_matrix(f.vy)});
  out.push_back({density, r, c, FactorKind::VZ, as_matrix(f.vz)});
  out.push_back({density, r, c, FactorKind::MYZ, as_matrix(f.m_yz)});
  out.push_back({density, r, c, FactorKind::MXZ, as_matrix(f.m_xz)});
  out.push_back({density, r, c, FactorKind::MXY, as_matrix(f.m_xy)});
}

}  // namespace

std::vector<FactorView> factor_views(const VmDecomposition& d) {
  std::vector<FactorView> out;
  out.reserve(6 * d.density.size() + 6 * d.appearance.size());
  for (int r = 0; r < d.rank; ++r) append_views(out, d.density[static_cast<std::size_t>(r)], true, r, -1);
  for (int r = 0; r < d.rank; ++r)
    for (int c = 0; c < d.channels; ++c) append_views(out, d.app(r, c), false, r, c);
  return out;
}

// ---------------------------------------------------------------------------
// Synthesis

namespace {

using Rng = std::mt19937_64;

void grow_blobs(OccupancyGrid& grid, std::size_t target_cells, int num_blobs, Rng& rng) {
  const Eigen::Vector3d res = grid.resolution().cast<double>();
  if (target_cells == grid.cell_count()) {
    grid.fill(true);
    return;
  }
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  struct Blob {
    Eigen::Vector3d center;
    double weight;
  };
  std::vector<Blob> blobs;
  for (int b = 0; b < std::max(1, num_blobs); ++b) {
    Eigen::Vector3d c;
    for (int a = 0; a < 3; ++a) c[a] = (0.25 + 0.5 * unit(rng)) * res[a];
    blobs.push_back({c, 0.6 + 0.8 * unit(rng)});
  }
  // Every cell gets a score: distance to the nearest blob center scaled by the
  // blob's weight, plus a little jitter. The lowest-score cells are level sets
  // of this field, so they form compact blobs around the centers.
  std::vector<std::pair<double, std::size_t>> scored(grid.cell_count());
  for (std::size_t i = 0; i < grid.cell_count(); ++i) {
    const Eigen::Vector3d p = grid.cell_of(i).cast<double>().array() + 0.5;
    double best = std::numeric_limits<double>::infinity();
    for (const auto& b : blobs) best = std::min(best, (p - b.center).norm() / b.weight);
    scored[i] = {best + 0.5 * unit(rng), i};
  }
  std::nth_element(scored.begin(), scored.begin() + static_cast<std::ptrdiff_t>(target_cells), scored.end());
  for (std::size_t k = 0; k < target_cells; ++k) grid.set(scored[k].second, true);
}

template <typename Derived>
void fill_sparse(Eigen::DenseBase<Derived>& m, double sparsity, double lo, double hi, Rng& rng) {
  std::uniform_real_distribution<float> value(static_cast<float>(lo), static_cast<float>(hi));
  const auto n = static_cast<std::size_t>(m.size());
  for (Eigen::Index i = 0; i < m.size(); ++i) {
    float v = value(rng);
    while (v == 0.0f) v = value(rng);
    m.derived().data()[i] = v;
  }
  const auto zeros = static_cast<std::size_t>(std::llround(sparsity * static_cast<double>(n)));
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::shuffle(order.begin(), order.end(), rng);
  for (std::size_t k = 0; k < zeros; ++k) m.derived().data()[order[k]] = 0.0f;
}

void fill_set(VmFactorSet& f, const std::vector<double>& sparsity, std::size_t& cursor, double lo,
              double hi, Rng& rng) {
  auto next = [&] { return sparsity[cursor++ % sparsity.size()]; };
  fill_sparse(f.vx, next(), lo, hi, rng);
  fill_sparse(f.vy, next(), lo, hi, rng);
  fill_sparse(f.vz, next(), lo, hi, rng);
  fill_sparse(f.m_yz, next(), lo, hi, rng);
  fill_sparse(f.m_xz, next(), lo, hi, rng);
  fill_sparse(f.m_xy, next(), lo, hi, rng);
}

}  // namespace

Scene generate_synthetic_scene(const SceneParams& p) {
  if ((p.resolution.array() <= 0).any()) throw std::invalid_argument("resolution must be non-zero in every axis");
  if ((p.resolution.array() < 8).any()) throw std::invalid_argument("resolution must be at least 8 in every axis");
  if (!(p.target_occupancy > 0.0 && p.target_occupancy <= 1.0)) {
    throw std::invalid_argument("target occupancy must lie in (0, 1]");
  }
  if (p.rank < 1) throw std::invalid_argument("rank must be >= 1");
  if (p.channels < 1) throw std::invalid_argument("channel count must be >= 1");
  if (p.factor_sparsity.empty()) throw std::invalid_argument("factor sparsity list must not be empty");
  for (double s : p.factor_sparsity)
    if (!(s >= 0.0 && s <= 1.0)) throw std::invalid_argument("factor sparsity targets must lie in [0, 1]");
  if (!(p.density_scale > 0.0)) throw std::invalid_argument("density scale must be positive");
  if (p.direction_degree < 0) throw std::invalid_argument("direction degree must be non-negative");
  if (p.hidden_width < 1 || p.hidden_layers < 0) throw std::invalid_argument("invalid head shape");

  Scene scene;
  scene.seed = p.seed;
  scene.grid = OccupancyGrid(p.resolution, p.bounds);

  const auto cells = static_cast<double>(scene.grid.cell_count());
  const auto target_cells = static_cast<std::size_t>(std::llround(p.target_occupancy * cells));
  const double achieved = static_cast<double>(target_cells) / cells;
  if (target_cells == 0 || std::abs(achieved - p.target_occupancy) > 0.1 * p.target_occupancy) {
    throw std::invalid_argument("occupancy target unreachable at this resolution");
  }

  Rng rng(p.seed);
  grow_blobs(scene.grid, target_cells, p.num_blobs, rng);

  auto& d = scene.decomp;
  d = VmDecomposition::zeros(p.resolution, p.rank, p.channels);
  d.activation = p.activation;
  std::size_t cursor = 0;
  // Density entries are drawn positive so raw sums never go negative.
  for (auto& f : d.density) fill_set(f, p.factor_sparsity, cursor, 0.05 * p.density_scale, p.density_scale, rng);
  for (auto& f : d.appearance) fill_set(f, p.factor_sparsity, cursor, -1.0, 1.0, rng);

  auto& head = scene.head;
  head.direction_degree = p.direction_degree;
  head.widths.push_back(d.feature_width() + AppearanceHead::direction_encoding_width(p.direction_degree));
  for (int l = 0; l < p.hidden_layers; ++l) head.widths.push_back(p.hidden_width);
  head.widths.push_back(3);
  for (std::size_t l = 0; l + 1 < head.widths.size(); ++l) {
    const int in = head.widths[l];
    const int out = head.widths[l + 1];
    const double limit = std::sqrt(6.0 / (in + out));
    std::uniform_real_distribution<float> w(static_cast<float>(-limit), static_cast<float>(limit));
    std::uniform_real_distribution<float> b(-0.1f, 0.1f);
    Eigen::MatrixXf weights(out, in);
    for (Eigen::Index i = 0; i < weights.size(); ++i) weights.data()[i] = w(rng);
    Eigen::VectorXf bias(out);
    for (Eigen::Index i = 0; i < bias.size(); ++i) bias[i] = b(rng);
    head.weights.push_back(std::move(weights));
    head.biases.push_back(std::move(bias));
  }
  return scene;
}

}  // namespace rtnerf
