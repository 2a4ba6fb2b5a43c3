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

#ifndef RTNERF_RENDERER_HPP
#define RTNERF_RENDERER_HPP

#include <Eigen/Dense>

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "rtnerf/features.hpp"
#include "rtnerf/geometry.hpp"
#include "rtnerf/scene.hpp"
#include "rtnerf/sparse.hpp"

namespace rtnerf {

using CameraD = Camera<double>;
using RayD = Ray<double>;

/// One located point. `delta` is the length of the ray interval it stands
/// for; `octant_rank` is the position of its octant in the visiting order
/// (always 0 for the uniform pipeline).
struct SamplePoint {
  double t = 0.0;
  double delta = 0.0;
  CellIndex cell = CellIndex::Zero();
  int octant_rank = 0;
};

/// Per-pixel sample lists, row-major pixels, each sorted by strictly
/// increasing t.
struct RaySampleBatch {
  int width = 0;
  int height = 0;
  std::vector<RayD> rays;
  std::vector<std::vector<SamplePoint>> samples;

  std::size_t pixel_count() const { return rays.size(); }
  std::size_t total_samples() const;
};

struct StepSeconds {
  double step1 = 0.0;         // ray generation
  double step2_1 = 0.0;       // point location
  double step2_2_grid = 0.0;  // feature extraction
  double step2_2_mlp = 0.0;   // color head
  double step3 = 0.0;         // compositing
};

/// Logical operation counts of one render. Everything except step_seconds
/// is deterministic.
struct StepTrace {
  std::string pipeline;
  std::uint64_t occupancy_accesses = 0;
  std::uint64_t embedding_element_reads = 0;
  std::uint64_t embedding_bytes = 0;
  std::uint64_t multiplies = 0;
  std::uint64_t adds = 0;
  std::uint64_t mlp_macs = 0;
  std::uint64_t sparse_queries = 0;
  std::uint64_t composite_ops = 0;
  std::uint64_t points_located = 0;
  std::uint64_t points_shaded = 0;
  // Geometry primitives issued by the ray/point-location steps.
  std::uint64_t rays_generated = 0;
  std::uint64_t balls_approximated = 0;
  std::uint64_t projections = 0;
  std::uint64_t intersections = 0;
  StepSeconds step_seconds;
};

/// Keys every serialized trace must carry.
const std::vector<std::string>& trace_counter_keys();
nlohmann::json to_json(const StepTrace& t);
/// Throws std::invalid_argument naming the first missing or malformed key.
StepTrace trace_from_json(const nlohmann::json& j);
/// Trace JSON with wall times removed, for determinism comparisons.
nlohmann::json logical_json(const StepTrace& t);

/// H x W RGB image, row-major pixels, channels in [0, 1].
struct Image {
  int width = 0;
  int height = 0;
  Eigen::Matrix<double, Eigen::Dynamic, 3, Eigen::RowMajor> rgb;

  Image() = default;
  Image(int w, int h) : width(w), height(h), rgb(Eigen::MatrixX3d::Zero(static_cast<Eigen::Index>(w) * h, 3)) {}
  Eigen::Vector3d pixel(int x, int y) const { return rgb.row(static_cast<Eigen::Index>(y) * width + x).transpose(); }
};

/// Binary P6, 8 bits per channel.
std::vector<std::uint8_t> encode_ppm(const Image& img);
void write_ppm(const Image& img, const std::string& path);
Image decode_ppm(const std::vector<std::uint8_t>& bytes);

// ---------------------------------------------------------------------------
// Point location

std::vector<RayD> generate_rays(const CameraD& cam);

/// N midpoint samples over each ray's chord through the scene bounds. Every
/// sample costs one occupancy lookup, so accesses are H*W*N for any grid.
RaySampleBatch locate_points_uniform(const CameraD& cam, const OccupancyGrid& grid, int n_samples,
                                     StepTrace* trace = nullptr);

/// Loops over occupied cells octant by octant; each cell is turned into a
/// ball, projected, and intersected with its member pixels' rays. In exact
/// mode the chord is clipped to the cube itself.
RaySampleBatch locate_points_rt(const CameraD& cam, const OccupancyGrid& grid, bool exact,
                                StepTrace* trace = nullptr);

/// Midpoint samples with spacing `spacing` covering [t_near, t_far]; the
/// last sample's interval is clipped to the segment end.
void sample_segment(double t_near, double t_far, double spacing, const CellIndex& cell, int octant_rank,
                    std::vector<SamplePoint>& out);

// ---------------------------------------------------------------------------
// Rendering

enum class Pipeline { Uniform, Rt };
const char* pipeline_name(Pipeline p);

/// Octant: fold each pixel's samples one octant at a time, carrying the
/// partial color. GlobalSort: one pass over the t-sorted list.
enum class Schedule { Octant, GlobalSort };

struct RenderOptions {
  Pipeline pipeline = Pipeline::Rt;
  bool exact = true;
  double tau = kDefaultTerminationThreshold;
  int n_samples = 128;
  Transmittance transmittance = Transmittance::Inclusive;
  Schedule schedule = Schedule::Octant;
  bool use_codec = false;  // read factors through their sparse encodings
  EncodeOptions codec;
};

struct RenderResult {
  Image image;
  StepTrace trace;
  CodecStats codec;
  std::uint64_t octant_violations = 0;  // rays whose later octant brought an earlier t
};

RenderResult render(const Scene& scene, const CameraD& cam, const RenderOptions& opt = {});

struct AccessReport {
  std::uint64_t uniform_accesses = 0;
  std::uint64_t rt_accesses = 0;
  std::uint64_t popcount = 0;
  std::optional<double> ratio;  // empty when rt_accesses == 0

  std::string ratio_text() const;
};

AccessReport compare_access_counts(const Scene& scene, const CameraD& cam, int n_uniform);
nlohmann::json to_json(const AccessReport& r);

struct ImageDiff {
  double max_abs = 0.0;
  double mean_abs = 0.0;  // over every pixel and channel
};

ImageDiff image_diff(const Image& a, const Image& b);

}  // namespace rtnerf

#endif  // RTNERF_RENDERER_HPP
