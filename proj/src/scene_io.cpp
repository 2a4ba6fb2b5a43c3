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

// Scene container, all fields little-endian:
//
//   "RTNF" u32 version u32 nx ny nz u32 rank u32 channels u64 seed
//   f32 bounds[6] u32 activation u32 direction_degree u32 layer_count
//   u32 widths[layer_count + 1]
//   occupancy bitset, ceil(cells / 8) bytes, x-fastest, LSB first
//   density factors per rank: vX vY vZ MYZ MXZ MXY (matrices row-major)
//   appearance factors per rank, per channel: same order
//   head layers: W (out x in, row-major) then b

#include <algorithm>
#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>

#include "rtnerf/scene.hpp"

namespace rtnerf {
namespace {

static_assert(std::endian::native == std::endian::little || std::endian::native == std::endian::big);

template <typename T>
T to_little(T v) {
  if constexpr (std::endian::native == std::endian::big) {
    unsigned char b[sizeof(T)];
    std::memcpy(b, &v, sizeof(T));
    std::reverse(std::begin(b), std::end(b));
    std::memcpy(&v, b, sizeof(T));
  }
  return v;
}

class Writer {
 public:
  template <typename T>
  void put(T v) {
    v = to_little(v);
    const auto* p = reinterpret_cast<const std::uint8_t*>(&v);
    out_.insert(out_.end(), p, p + sizeof(T));
  }
  void put_bytes(const void* data, std::size_t n) {
    const auto* p = static_cast<const std::uint8_t*>(data);
    out_.insert(out_.end(), p, p + n);
  }
  template <typename Derived>
  void put_row_major(const Eigen::DenseBase<Derived>& m) {
    for (Eigen::Index i = 0; i < m.rows(); ++i)
      for (Eigen::Index j = 0; j < m.cols(); ++j) put<float>(m(i, j));
  }
  std::vector<std::uint8_t> take() { return std::move(out_); }

 private:
  std::vector<std::uint8_t> out_;
};

class Reader {
 public:
  explicit Reader(const std::vector<std::uint8_t>& bytes) : bytes_(bytes) {}

  template <typename T>
  T get(const std::string& field) {
    need(sizeof(T), field);
    T v;
    std::memcpy(&v, bytes_.data() + pos_, sizeof(T));
    pos_ += sizeof(T);
    return to_little(v);
  }
  const std::uint8_t* get_bytes(std::size_t n, const std::string& field) {
    need(n, field);
    const auto* p = bytes_.data() + pos_;
    pos_ += n;
    return p;
  }
  void get_row_major(Eigen::MatrixXf& m, const std::string& field) {
    need(sizeof(float) * static_cast<std::size_t>(m.size()), field);
    for (Eigen::Index i = 0; i < m.rows(); ++i)
      for (Eigen::Index j = 0; j < m.cols(); ++j) m(i, j) = get<float>(field);
  }
  void get_vector(Eigen::VectorXf& v, const std::string& field) {
    need(sizeof(float) * static_cast<std::size_t>(v.size()), field);
    for (Eigen::Index i = 0; i < v.size(); ++i) v[i] = get<float>(field);
  }
  std::size_t remaining() const { return bytes_.size() - pos_; }

 private:
  void need(std::size_t n, const std::string& field) const {
    if (bytes_.size() - pos_ < n) {
      throw SceneFormatError(SceneFormatError::Kind::Truncated, field,
                             "truncated payload while reading " + field);
    }
  }
  const std::vector<std::uint8_t>& bytes_;
  std::size_t pos_ = 0;
};

[[noreturn]] void dimension_error(const std::string& field, const std::string& what) {
  throw SceneFormatError(SceneFormatError::Kind::DimensionMismatch, field,
                         "dimension inconsistency in " + field + ": " + what);
}

constexpr char kMagic[4] = {'R', 'T', 'N', 'F'};
constexpr std::uint32_t kMaxDim = 4096;
constexpr std::uint32_t kMaxCount = 1u << 16;

void write_set(Writer& w, const VmFactorSet& f) {
  w.put_row_major(f.vx.transpose());
  w.put_row_major(f.vy.transpose());
  w.put_row_major(f.vz.transpose());
  w.put_row_major(f.m_yz);
  w.put_row_major(f.m_xz);
  w.put_row_major(f.m_xy);
}

void read_set(Reader& r, VmFactorSet& f, const std::string& prefix) {
  r.get_vector(f.vx, prefix + ".vX");
  r.get_vector(f.vy, prefix + ".vY");
  r.get_vector(f.vz, prefix + ".vZ");
  r.get_row_major(f.m_yz, prefix + ".MYZ");
  r.get_row_major(f.m_xz, prefix + ".MXZ");
  r.get_row_major(f.m_xy, prefix + ".MXY");
}

}  // namespace

std::vector<std::uint8_t> serialize_scene(const Scene& scene) {
  const auto& grid = scene.grid;
  const auto& d = scene.decomp;
  const auto& head = scene.head;
  d.validate();
  head.validate(d.feature_width());
  if (grid.resolution() != d.resolution) throw std::invalid_argument("grid and decomposition resolution differ");

  Writer w;
  w.put_bytes(kMagic, 4);
  w.put<std::uint32_t>(kSceneFormatVersion);
  for (int a = 0; a < 3; ++a) w.put<std::uint32_t>(static_cast<std::uint32_t>(grid.resolution()[a]));
  w.put<std::uint32_t>(static_cast<std::uint32_t>(d.rank));
  w.put<std::uint32_t>(static_cast<std::uint32_t>(d.channels));
  w.put<std::uint64_t>(scene.seed);
  for (int a = 0; a < 3; ++a) w.put<float>(grid.bounds().min_corner[a]);
  for (int a = 0; a < 3; ++a) w.put<float>(grid.bounds().max_corner[a]);
  w.put<std::uint32_t>(static_cast<std::uint32_t>(d.activation));
  w.put<std::uint32_t>(static_cast<std::uint32_t>(head.direction_degree));
  w.put<std::uint32_t>(static_cast<std::uint32_t>(head.weights.size()));
  for (int width : head.widths) w.put<std::uint32_t>(static_cast<std::uint32_t>(width));

  std::vector<std::uint8_t> packed((grid.cell_count() + 7) / 8, 0);
  for (std::size_t i = 0; i < grid.cell_count(); ++i)
    if (grid.occupied(i)) packed[i / 8] |= static_cast<std::uint8_t>(1u << (i % 8));
  w.put_bytes(packed.data(), packed.size());

  for (const auto& f : d.density) write_set(w, f);
  for (const auto& f : d.appearance) write_set(w, f);
  for (std::size_t l = 0; l < head.weights.size(); ++l) {
    w.put_row_major(head.weights[l]);
    w.put_row_major(head.biases[l].transpose());
  }
  return w.take();
}

Scene deserialize_scene(const std::vector<std::uint8_t>& bytes) {
  Reader r(bytes);
  const auto* magic = r.get_bytes(4, "magic");
  if (std::memcmp(magic, kMagic, 4) != 0) {
    throw SceneFormatError(SceneFormatError::Kind::BadMagic, "magic", "bad magic");
  }
  const auto version = r.get<std::uint32_t>("version");
  if (version != kSceneFormatVersion) {
    throw SceneFormatError(SceneFormatError::Kind::VersionMismatch, "version",
                           "version mismatch: file has " + std::to_string(version) + ", expected " +
                               std::to_string(kSceneFormatVersion));
  }
  Eigen::Vector3i res;
  const char* axis_names[3] = {"dims.nx", "dims.ny", "dims.nz"};
  for (int a = 0; a < 3; ++a) {
    const auto n = r.get<std::uint32_t>(axis_names[a]);
    if (n == 0 || n > kMaxDim) dimension_error(axis_names[a], "value " + std::to_string(n) + " out of range");
    res[a] = static_cast<int>(n);
  }
  const auto rank = r.get<std::uint32_t>("rank");
  if (rank == 0 || rank > kMaxCount) dimension_error("rank", "value " + std::to_string(rank) + " out of range");
  const auto channels = r.get<std::uint32_t>("channels");
  if (channels == 0 || channels > kMaxCount) {
    dimension_error("channels", "value " + std::to_string(channels) + " out of range");
  }

  Scene scene;
  scene.seed = r.get<std::uint64_t>("seed");
  SceneBounds bounds;
  for (int a = 0; a < 3; ++a) bounds.min_corner[a] = r.get<float>("bounds");
  for (int a = 0; a < 3; ++a) bounds.max_corner[a] = r.get<float>("bounds");
  if (!bounds.valid()) dimension_error("bounds", "max_corner must exceed min_corner");

  const auto activation = r.get<std::uint32_t>("activation");
  if (activation > static_cast<std::uint32_t>(DensityActivation::Relu)) {
    dimension_error("activation", "unknown code " + std::to_string(activation));
  }
  auto& head = scene.head;
  head.direction_degree = static_cast<int>(r.get<std::uint32_t>("head.direction_degree"));
  if (head.direction_degree > 64) dimension_error("head.direction_degree", "value out of range");
  const auto layers = r.get<std::uint32_t>("head.layer_count");
  if (layers == 0 || layers > 64) dimension_error("head.layer_count", "value out of range");
  for (std::uint32_t l = 0; l <= layers; ++l) {
    const auto width = r.get<std::uint32_t>("head.widths");
    if (width == 0 || width > kMaxCount) dimension_error("head.widths", "width out of range");
    head.widths.push_back(static_cast<int>(width));
  }
  const int feature_width = 3 * static_cast<int>(rank) * static_cast<int>(channels);
  if (head.widths.front() != feature_width + AppearanceHead::direction_encoding_width(head.direction_degree)) {
    dimension_error("head.widths", "input width " + std::to_string(head.widths.front()) +
                                       " does not match features + direction encoding");
  }

  scene.grid = OccupancyGrid(res, bounds);
  const std::size_t packed_size = (scene.grid.cell_count() + 7) / 8;
  const auto* packed = r.get_bytes(packed_size, "occupancy");
  for (std::size_t i = 0; i < scene.grid.cell_count(); ++i)
    scene.grid.set(i, ((packed[i / 8] >> (i % 8)) & 1u) != 0);
  if (scene.grid.cell_count() % 8 != 0 &&
      (packed[packed_size - 1] >> (scene.grid.cell_count() % 8)) != 0) {
    dimension_error("occupancy", "padding bits set past the last cell");
  }

  auto& d = scene.decomp;
  d = VmDecomposition::zeros(res, static_cast<int>(rank), static_cast<int>(channels));
  d.activation = static_cast<DensityActivation>(activation);
  for (std::uint32_t k = 0; k < rank; ++k) read_set(r, d.density[k], "density.r" + std::to_string(k));
  for (std::uint32_t k = 0; k < rank; ++k)
    for (std::uint32_t c = 0; c < channels; ++c)
      read_set(r, d.app(static_cast<int>(k), static_cast<int>(c)),
               "appearance.r" + std::to_string(k) + ".c" + std::to_string(c));

  for (std::uint32_t l = 0; l < layers; ++l) {
    Eigen::MatrixXf w(head.widths[l + 1], head.widths[l]);
    r.get_row_major(w, "head.W" + std::to_string(l));
    Eigen::VectorXf b(head.widths[l + 1]);
    r.get_vector(b, "head.b" + std::to_string(l));
    head.weights.push_back(std::move(w));
    head.biases.push_back(std::move(b));
  }
  if (r.remaining() != 0) dimension_error("trailer", std::to_string(r.remaining()) + " unexpected trailing bytes");
  return scene;
}

void save_scene(const Scene& scene, const std::filesystem::path& path) {
  const auto bytes = serialize_scene(scene);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw SceneFormatError(SceneFormatError::Kind::Io, "path", "cannot open " + path.string() + " for writing");
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw SceneFormatError(SceneFormatError::Kind::Io, "path", "write failed for " + path.string());
}

Scene load_scene(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw SceneFormatError(SceneFormatError::Kind::Io, "path", "cannot open " + path.string());
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return deserialize_scene(bytes);
}

}  // namespace rtnerf
