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

#ifndef RTNERF_SPARSE_HPP
#define RTNERF_SPARSE_HPP

#include <Eigen/Dense>

#include <algorithm>
#include <bit>
#include <cstdint>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

#include <nlohmann/json.hpp>

#include "rtnerf/scene.hpp"

namespace rtnerf {

/// Byte widths used when accounting encoded sizes.
struct SizeModel {
  int value_width = 4;
  int coord_width = 2;
  int ptr_width = 4;
};

enum class Variant { Bitmap, Coo };
const char* variant_name(Variant v);

/// COO is chosen when at least 80% of the elements are zero. Evaluated in
/// integers so that the boundary is exact.
inline bool is_high_sparsity(std::size_t zeros, std::size_t total) { return 5 * zeros >= 4 * total; }

inline constexpr int kBitmapHitCycles = 3;
inline constexpr int kBitmapMissCycles = 1;
inline constexpr int kDefaultBucketCapacity = 16;

template <typename Scalar>
struct QueryResult {
  Scalar value;
  int cycles;
};

/// Row-pointer + presence bitmap + packed non-zeros. Each row of the bitmap
/// is padded to whole 64-bit words.
template <typename Scalar>
struct BitmapEncoding {
  int rows = 0;
  int cols = 0;
  int words_per_row = 0;
  std::vector<std::uint32_t> row_ptr;  // rows + 1 entries, row_ptr[rows] == values.size()
  std::vector<std::uint64_t> bitmap;
  std::vector<Scalar> values;

  bool bit(int x, int y) const {
    return ((bitmap[static_cast<std::size_t>(x) * words_per_row + y / 64] >> (y % 64)) & 1u) != 0;
  }
  std::size_t row_popcount(int x) const {
    std::size_t n = 0;
    for (int w = 0; w < words_per_row; ++w) n += std::popcount(bitmap[static_cast<std::size_t>(x) * words_per_row + w]);
    return n;
  }
  /// Number of set bits in row x strictly before column y.
  std::size_t prefix_popcount(int x, int y) const {
    const std::size_t base = static_cast<std::size_t>(x) * words_per_row;
    std::size_t n = 0;
    for (int w = 0; w < y / 64; ++w) n += std::popcount(bitmap[base + w]);
    if (y % 64 != 0) n += std::popcount(bitmap[base + y / 64] & ((std::uint64_t{1} << (y % 64)) - 1));
    return n;
  }
  std::size_t nnz() const { return values.size(); }
};

template <typename Scalar>
struct CooEntry {
  int x;
  int y;
  Scalar value;
};

struct TreeNode {
  std::uint8_t axis;  // 0: compare x, 1: compare y
  int threshold;      // go left when coordinate < threshold
};

/// Coordinate list plus a complete binary search tree (heap layout) whose
/// leaves hold buckets of at most `bucket_capacity` entries.
template <typename Scalar>
struct CooEncoding {
  int rows = 0;
  int cols = 0;
  int height = 0;
  int bucket_capacity = kDefaultBucketCapacity;
  std::vector<CooEntry<Scalar>> entries;  // lexicographic (x, y)
  std::vector<TreeNode> nodes;            // 2^height - 1 internal nodes
  std::vector<std::uint32_t> leaf_offsets;  // 2^height + 1
  std::vector<std::uint32_t> leaf_entries;  // indices into entries, grouped by leaf

  std::size_t num_leaves() const { return std::size_t{1} << height; }
  std::size_t nnz() const { return entries.size(); }
  int latency() const { return height + 1; }
};

template <typename Scalar>
struct HybridEncoding {
  Variant variant = Variant::Coo;
  int rows = 0;
  int cols = 0;
  std::size_t nnz = 0;
  double sparsity = 0.0;
  std::size_t encoded_bytes = 0;
  std::variant<BitmapEncoding<Scalar>, CooEncoding<Scalar>> payload;

  const BitmapEncoding<Scalar>& bitmap() const { return std::get<BitmapEncoding<Scalar>>(payload); }
  const CooEncoding<Scalar>& coo() const { return std::get<CooEncoding<Scalar>>(payload); }
  int tree_height() const { return variant == Variant::Coo ? coo().height : 0; }
};

struct EncodeOptions {
  std::optional<Variant> force;
  SizeModel size_model;
  int bucket_capacity = kDefaultBucketCapacity;
};

// ---------------------------------------------------------------------------
// Size model

template <typename Scalar>
std::size_t encoded_size(const BitmapEncoding<Scalar>& e, const SizeModel& m = {}) {
  const auto elems = static_cast<std::size_t>(e.rows) * static_cast<std::size_t>(e.cols);
  return (elems + 7) / 8 + static_cast<std::size_t>(e.rows) * m.ptr_width + e.nnz() * m.value_width;
}

template <typename Scalar>
std::size_t encoded_size(const CooEncoding<Scalar>& e, const SizeModel& m = {}) {
  return e.nnz() * static_cast<std::size_t>(2 * m.coord_width + m.value_width) +
         e.nodes.size() * static_cast<std::size_t>(1 + m.coord_width);
}

template <typename Scalar>
std::size_t encoded_size(const HybridEncoding<Scalar>& e, const SizeModel& m = {}) {
  return std::visit([&](const auto& p) { return encoded_size(p, m); }, e.payload);
}

// ---------------------------------------------------------------------------
// Encoders

template <typename Derived>
BitmapEncoding<typename Derived::Scalar> encode_bitmap(const Eigen::MatrixBase<Derived>& m) {
  using Scalar = typename Derived::Scalar;
  BitmapEncoding<Scalar> e;
  e.rows = static_cast<int>(m.rows());
  e.cols = static_cast<int>(m.cols());
  e.words_per_row = (e.cols + 63) / 64;
  e.bitmap.assign(static_cast<std::size_t>(e.rows) * e.words_per_row, 0);
  e.row_ptr.reserve(static_cast<std::size_t>(e.rows) + 1);
  for (int x = 0; x < e.rows; ++x) {
    e.row_ptr.push_back(static_cast<std::uint32_t>(e.values.size()));
    for (int y = 0; y < e.cols; ++y) {
      const Scalar v = m(x, y);
      if (v != Scalar(0)) {
        e.bitmap[static_cast<std::size_t>(x) * e.words_per_row + y / 64] |= std::uint64_t{1} << (y % 64);
        e.values.push_back(v);
      }
    }
  }
  e.row_ptr.push_back(static_cast<std::uint32_t>(e.values.size()));
  return e;
}

namespace detail {

struct Region {
  int lo[2];
  int hi[2];  // exclusive
};

template <typename Scalar>
bool build_tree(CooEncoding<Scalar>& e, std::size_t node, int depth, std::vector<std::uint32_t> idx,
                Region region, std::vector<std::vector<std::uint32_t>>& leaves) {
  if (depth == e.height) {
    const std::size_t leaf = node - (e.num_leaves() - 1);
    const bool fits = idx.size() <= static_cast<std::size_t>(e.bucket_capacity);
    leaves[leaf] = std::move(idx);
    return fits;
  }
  auto coord = [&](std::uint32_t i, int axis) { return axis == 0 ? e.entries[i].x : e.entries[i].y; };
  int axis = depth % 2;
  auto splittable = [&](int a) {
    if (idx.size() < 2) return false;
    const int first = coord(idx.front(), a);
    return std::any_of(idx.begin(), idx.end(), [&](std::uint32_t i) { return coord(i, a) != first; });
  };
  if (!splittable(axis) && splittable(1 - axis)) axis = 1 - axis;

  int threshold = region.lo[axis];
  if (splittable(axis)) {
    std::vector<int> values;
    values.reserve(idx.size());
    for (auto i : idx) values.push_back(coord(i, axis));
    std::sort(values.begin(), values.end());
    // Choose the distinct value whose "< threshold" side is closest to half.
    const std::size_t half = values.size() / 2;
    std::size_t best_gap = values.size() + 1;
    for (std::size_t k = 1; k < values.size(); ++k) {
      if (values[k] == values[k - 1]) continue;
      const std::size_t gap = k > half ? k - half : half - k;
      if (gap < best_gap) {
        best_gap = gap;
        threshold = values[k];
      }
    }
  }
  e.nodes[node] = TreeNode{static_cast<std::uint8_t>(axis), threshold};
  std::vector<std::uint32_t> left, right;
  for (auto i : idx) (coord(i, axis) < threshold ? left : right).push_back(i);
  Region lr = region, rr = region;
  lr.hi[axis] = threshold;
  rr.lo[axis] = threshold;
  const bool ok_left = build_tree(e, 2 * node + 1, depth + 1, std::move(left), lr, leaves);
  const bool ok_right = build_tree(e, 2 * node + 2, depth + 1, std::move(right), rr, leaves);
  return ok_left && ok_right;
}

inline int min_height(std::size_t nnz, int capacity) {
  int h = 0;
  while ((std::size_t{1} << h) * static_cast<std::size_t>(capacity) < nnz) ++h;
  return h;
}

}  // namespace detail

template <typename Derived>
CooEncoding<typename Derived::Scalar> encode_coo(const Eigen::MatrixBase<Derived>& m,
                                                 int bucket_capacity = kDefaultBucketCapacity) {
  using Scalar = typename Derived::Scalar;
  if (bucket_capacity < 1) throw std::invalid_argument("bucket capacity must be positive");
  CooEncoding<Scalar> e;
  e.rows = static_cast<int>(m.rows());
  e.cols = static_cast<int>(m.cols());
  e.bucket_capacity = bucket_capacity;
  for (int x = 0; x < e.rows; ++x)
    for (int y = 0; y < e.cols; ++y)
      if (m(x, y) != Scalar(0)) e.entries.push_back({x, y, m(x, y)});

  std::vector<std::uint32_t> all(e.entries.size());
  for (std::size_t i = 0; i < all.size(); ++i) all[i] = static_cast<std::uint32_t>(i);
  // Start at the minimum height and deepen until every bucket fits; skewed
  // coordinate distributions can need an extra level.
  for (e.height = detail::min_height(e.entries.size(), bucket_capacity);; ++e.height) {
    e.nodes.assign(e.num_leaves() - 1, TreeNode{0, 0});
    std::vector<std::vector<std::uint32_t>> leaves(e.num_leaves());
    const detail::Region root{{0, 0}, {e.rows, e.cols}};
    if (detail::build_tree(e, 0, 0, all, root, leaves)) {
      e.leaf_offsets.assign(1, 0);
      e.leaf_entries.clear();
      for (const auto& leaf : leaves) {
        e.leaf_entries.insert(e.leaf_entries.end(), leaf.begin(), leaf.end());
        e.leaf_offsets.push_back(static_cast<std::uint32_t>(e.leaf_entries.size()));
      }
      return e;
    }
  }
}

template <typename Derived>
HybridEncoding<typename Derived::Scalar> encode(const Eigen::MatrixBase<Derived>& m, const EncodeOptions& opt = {}) {
  using Scalar = typename Derived::Scalar;
  if (m.size() == 0) throw std::invalid_argument("cannot encode an empty matrix");
  HybridEncoding<Scalar> e;
  e.rows = static_cast<int>(m.rows());
  e.cols = static_cast<int>(m.cols());
  const auto total = static_cast<std::size_t>(m.size());
  std::size_t zeros = 0;
  for (Eigen::Index j = 0; j < m.cols(); ++j)
    for (Eigen::Index i = 0; i < m.rows(); ++i) zeros += m(i, j) == Scalar(0);
  e.nnz = total - zeros;
  e.sparsity = static_cast<double>(zeros) / static_cast<double>(total);
  e.variant = opt.force.value_or(is_high_sparsity(zeros, total) ? Variant::Coo : Variant::Bitmap);
  if (e.variant == Variant::Coo) {
    e.payload = encode_coo(m, opt.bucket_capacity);
  } else {
    e.payload = encode_bitmap(m);
  }
  e.encoded_bytes = encoded_size(e, opt.size_model);
  return e;
}

// ---------------------------------------------------------------------------
// Queries

inline void require_query_bounds(int rows, int cols, int x, int y) {
  if (x < 0 || y < 0 || x >= rows || y >= cols) throw std::out_of_range("sparse query outside the matrix");
}

/// Cycle 1 fetches the row and tests the bit; on a hit cycle 2 forms the
/// address from the row pointer plus the prefix popcount and cycle 3 reads
/// the value.
template <typename Scalar>
QueryResult<Scalar> query_bitmap(const BitmapEncoding<Scalar>& e, int x, int y) {
  require_query_bounds(e.rows, e.cols, x, y);
  if (!e.bit(x, y)) return {Scalar(0), kBitmapMissCycles};
  const std::size_t address = e.row_ptr[static_cast<std::size_t>(x)] + e.prefix_popcount(x, y);
  return {e.values[address], kBitmapHitCycles};
}

/// One comparison per tree level, then a direct match inside the leaf bucket.
template <typename Scalar>
QueryResult<Scalar> query_coo(const CooEncoding<Scalar>& e, int x, int y) {
  require_query_bounds(e.rows, e.cols, x, y);
  std::size_t node = 0;
  for (int level = 0; level < e.height; ++level) {
    const TreeNode& n = e.nodes[node];
    const int c = n.axis == 0 ? x : y;
    node = c < n.threshold ? 2 * node + 1 : 2 * node + 2;
  }
  const std::size_t leaf = node - (e.num_leaves() - 1);
  for (std::uint32_t k = e.leaf_offsets[leaf]; k < e.leaf_offsets[leaf + 1]; ++k) {
    const auto& entry = e.entries[e.leaf_entries[k]];
    if (entry.x == x && entry.y == y) return {entry.value, e.latency()};
  }
  return {Scalar(0), e.latency()};
}

template <typename Scalar>
QueryResult<Scalar> query(const HybridEncoding<Scalar>& e, int x, int y) {
  return e.variant == Variant::Coo ? query_coo(e.coo(), x, y) : query_bitmap(e.bitmap(), x, y);
}

// ---------------------------------------------------------------------------
// Inspection dump: JSON header plus base64 payloads.

std::string base64_encode(const std::vector<std::uint8_t>& bytes);
std::vector<std::uint8_t> base64_decode(const std::string& text);

nlohmann::json dump_encoding(const HybridEncoding<float>& e);
HybridEncoding<float> load_encoding_dump(const nlohmann::json& j, const SizeModel& m = {});

// ---------------------------------------------------------------------------
// Factor census and codec-backed factor reads

struct FactorSparsity {
  std::string label;
  int rows = 0;
  int cols = 0;
  std::size_t zeros = 0;
  std::size_t total = 0;
  double sparsity = 0.0;
  Variant variant = Variant::Bitmap;
};

struct SparsityCensus {
  std::vector<FactorSparsity> factors;
  std::size_t low_count = 0;   // < 80% zeros, bitmap
  std::size_t high_count = 0;  // >= 80% zeros, COO
  double low_share() const {
    const auto n = low_count + high_count;
    return n == 0 ? 0.0 : static_cast<double>(low_count) / static_cast<double>(n);
  }
};

SparsityCensus sparsity_census(const VmDecomposition& d);
nlohmann::json to_json(const SparsityCensus& c);

/// Query-cycle histograms and storage footprint gathered while factors are
/// read through their encodings.
struct CodecStats {
  bool enabled = false;
  std::map<int, std::uint64_t> bitmap_cycles;  // latency -> query count
  std::map<int, std::uint64_t> coo_cycles;
  std::uint64_t footprint_bytes = 0;        // encoded (or dense) factor storage
  std::uint64_t dense_footprint_bytes = 0;
  double high_sparsity_fraction = 0.0;      // share of factors stored as COO

  std::uint64_t bitmap_queries() const;
  std::uint64_t coo_queries() const;
  void merge(const CodecStats& other);
};

nlohmann::json to_json(const CodecStats& s);
CodecStats codec_stats_from_json(const nlohmann::json& j);

/// Dense-equivalent factor reads served by per-factor hybrid encodings.
class EncodedFactorReader {
 public:
  explicit EncodedFactorReader(const VmDecomposition& d, const EncodeOptions& opt = {});

  float read(std::size_t factor, int row, int col) const;
  const CodecStats& stats() const { return stats_; }
  const HybridEncoding<float>& encoding(std::size_t factor) const { return encodings_[factor]; }
  std::size_t factor_count() const { return encodings_.size(); }

 private:
  std::vector<HybridEncoding<float>> encodings_;
  mutable CodecStats stats_;
};

}  // namespace rtnerf

#endif  // RTNERF_SPARSE_HPP
