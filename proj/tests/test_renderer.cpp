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

#include <gtest/gtest.h>

#include <set>

#include "oracles.hpp"
#include "rtnerf/renderer.hpp"
#include "test_support.hpp"

namespace rtnerf {
namespace {

using testing::standard_camera;

OccupancyGrid empty_grid() { return OccupancyGrid(Eigen::Vector3i::Constant(64), SceneBounds{}); }

TEST(Uniform, FixedAccessCost) {
  const auto cam = standard_camera(16, 16);
  StepTrace t;
  const auto batch = locate_points_uniform(cam, empty_grid(), 64, &t);
  EXPECT_EQ(t.occupancy_accesses, 16384u);
  EXPECT_EQ(batch.total_samples(), 0u);

  const Scene s = testing::standard_scene(7);
  StepTrace t2;
  locate_points_uniform(cam, s.grid, 64, &t2);
  EXPECT_EQ(t2.occupancy_accesses, 16384u);
  EXPECT_GT(t2.points_located, 0u);
  EXPECT_THROW(locate_points_uniform(cam, s.grid, 0), std::invalid_argument);
}

TEST(Uniform, RetainedSamplesQuantizeToOccupiedCells) {
  OccupancyGrid g = empty_grid();
  const CellIndex only(30, 33, 40);
  g.set(only, true);
  // The cell spans about two pixels at this size.
  const auto cam = standard_camera(200, 200);
  const auto batch = locate_points_uniform(cam, g, 256);
  ASSERT_GT(batch.total_samples(), 0u);
  for (std::size_t p = 0; p < batch.pixel_count(); ++p) {
    double prev = -1.0;
    for (const auto& sp : batch.samples[p]) {
      const auto c = oracle::cell_containing(batch.rays[p].at(sp.t), g.bounds(), g.resolution());
      ASSERT_TRUE(c);
      EXPECT_EQ(*c, only);
      EXPECT_EQ(sp.cell, only);
      EXPECT_GT(sp.t, prev);
      prev = sp.t;
    }
  }
}

TEST(Rt, EmptyGridHasNoAccesses) {
  StepTrace t;
  const auto batch = locate_points_rt(standard_camera(32, 32), empty_grid(), true, &t);
  EXPECT_EQ(t.occupancy_accesses, 0u);
  EXPECT_EQ(batch.total_samples(), 0u);
}

TEST(Rt, AccessesBoundedByPopcountPlusEight) {
  for (std::uint64_t seed : {1u, 7u}) {
    const Scene s = testing::standard_scene(seed);
    for (int size : {16, 96}) {
      StepTrace t;
      locate_points_rt(standard_camera(size, size), s.grid, true, &t);
      EXPECT_LE(t.occupancy_accesses, s.grid.popcount() + 8);
      EXPECT_GE(t.occupancy_accesses, s.grid.popcount());
    }
  }
}

TEST(Rt, SamplesSortedAndInsideTheirCells) {
  const Scene s = testing::standard_scene(3);
  const auto cam = standard_camera(48, 48);
  const auto batch = locate_points_rt(cam, s.grid, true);
  const Eigen::Vector3d side = s.grid.cell_size();
  const double spacing = 0.5 * side.minCoeff();
  ASSERT_GT(batch.total_samples(), 0u);
  for (std::size_t p = 0; p < batch.pixel_count(); ++p) {
    const auto& v = batch.samples[p];
    for (std::size_t k = 0; k < v.size(); ++k) {
      if (k > 0) ASSERT_GT(v[k].t, v[k - 1].t);
      ASSERT_GT(v[k].delta, 0.0);
      ASSERT_LE(v[k].delta, spacing * (1 + 1e-12));
      ASSERT_TRUE(s.grid.occupied(v[k].cell));
      // Exact mode: the sample point lies in (or on the boundary of) its cube.
      const Eigen::Vector3d q = batch.rays[p].at(v[k].t);
      const Eigen::Vector3d lo = s.grid.cell_min(v[k].cell);
      EXPECT_TRUE(((q - lo).array() >= -1e-9).all() && ((lo + side - q).array() >= -1e-9).all());
    }
  }
}

// Every cell the uniform pipeline retains is also located by the exact RT
// pipeline; cells only RT finds are crossed by a chord shorter than the
// uniform step (uniform midpoint sampling can step over them).
TEST(Rt, ExactCellSetCoversUniformCellSet) {
  const Scene s = testing::standard_scene(7);
  const auto cam = standard_camera(64, 64);
  const auto uni = locate_points_uniform(cam, s.grid, 128);
  const auto rt = locate_points_rt(cam, s.grid, true);
  const Eigen::Vector3d lo = s.grid.bounds().lo(), hi = s.grid.bounds().hi();
  std::size_t rt_only = 0, shared = 0;
  for (std::size_t p = 0; p < uni.pixel_count(); ++p) {
    std::set<std::size_t> a, b;
    for (const auto& sp : uni.samples[p]) a.insert(s.grid.linear_index(sp.cell));
    for (const auto& sp : rt.samples[p]) b.insert(s.grid.linear_index(sp.cell));
    for (auto c : a) ASSERT_TRUE(b.count(c)) << "pixel " << p;
    const auto chord = ray_box_intersect(uni.rays[p], lo, hi);
    for (auto c : b) {
      if (a.count(c)) {
        ++shared;
        continue;
      }
      ++rt_only;
      const CellIndex cell = s.grid.cell_of(c);
      const Eigen::Vector3d clo = s.grid.cell_min(cell);
      const auto seg = ray_box_intersect(uni.rays[p], clo, Eigen::Vector3d(clo + s.grid.cell_size()));
      ASSERT_TRUE(seg && chord);
      EXPECT_LT(seg->length(), chord->length() / 128 * (1 + 1e-9));
    }
  }
  EXPECT_GT(shared, 1000u);
  RecordProperty("rt_only_cells", static_cast<int>(rt_only));
}

TEST(Render, ZeroDensityIsBlack) {
  const Scene s = testing::zero_density_scene();
  for (auto pipeline : {Pipeline::Uniform, Pipeline::Rt}) {
    RenderOptions opt;
    opt.pipeline = pipeline;
    const auto r = render(s, standard_camera(32, 32), opt);
    EXPECT_EQ(r.image.rgb.cwiseAbs().maxCoeff(), 0.0);
    EXPECT_GT(r.trace.points_shaded, 0u);
  }
}

TEST(Render, SingleSeedOracleAgreement) {
  const Scene s = testing::standard_scene(7);
  const auto cam = standard_camera();
  RenderOptions u;
  u.pipeline = Pipeline::Uniform;
  u.n_samples = 128;
  RenderOptions r;
  const auto a = render(s, cam, u);
  const auto b = render(s, cam, r);
  const auto d = image_diff(a.image, b.image);
  EXPECT_LE(d.max_abs, 0.02);
  EXPECT_LE(d.mean_abs, 0.005);
  EXPECT_LE(b.trace.points_shaded, b.trace.points_located);
  EXPECT_LE(a.trace.points_shaded, a.trace.points_located);
}

TEST(Render, OctantScheduleMatchesGlobalSortAtTauZero) {
  const Scene s = testing::standard_scene(2);
  const auto cam = standard_camera(64, 64);
  RenderOptions opt;
  opt.tau = 0.0;
  const auto a = render(s, cam, opt);
  opt.schedule = Schedule::GlobalSort;
  const auto b = render(s, cam, opt);
  EXPECT_TRUE((a.image.rgb.array() == b.image.rgb.array()).all());
  // Violations are resolved by refolding, so they exist but do not matter.
  EXPECT_EQ(a.trace.points_located, b.trace.points_located);
}

TEST(Render, OccluderTerminatesEarly) {
  const Scene s = testing::occluder_scene();
  const auto cam = standard_camera();
  RenderOptions opt;
  opt.tau = 1e-4;
  const auto early = render(s, cam, opt);
  opt.tau = 0.0;
  const auto full = render(s, cam, opt);
  EXPECT_LT(early.trace.points_shaded, full.trace.points_shaded);
  EXPECT_LE(image_diff(early.image, full.image).max_abs, 1e-3);
  EXPECT_GT(early.image.rgb.maxCoeff(), 0.1);
}

TEST(Render, Deterministic) {
  const Scene s = testing::standard_scene(5);
  const auto cam = standard_camera(48, 48);
  const auto a = render(s, cam);
  const auto b = render(s, cam);
  EXPECT_TRUE((a.image.rgb.array() == b.image.rgb.array()).all());
  EXPECT_EQ(logical_json(a.trace), logical_json(b.trace));
}

TEST(Render, CodecReadsDoNotChangeColors) {
  SceneParams p;
  p.seed = 4;
  p.factor_sparsity = {0.3, 0.9};
  const Scene s = generate_synthetic_scene(p);
  const auto cam = standard_camera(48, 48);
  RenderOptions opt;
  const auto dense = render(s, cam, opt);
  opt.use_codec = true;
  const auto coded = render(s, cam, opt);
  EXPECT_TRUE((dense.image.rgb.array() == coded.image.rgb.array()).all());
  EXPECT_EQ(coded.trace.sparse_queries, coded.trace.embedding_element_reads);
  EXPECT_EQ(coded.codec.bitmap_queries() + coded.codec.coo_queries(), coded.trace.sparse_queries);
  EXPECT_LT(coded.trace.multiplies, dense.trace.multiplies);
  EXPECT_LT(coded.codec.footprint_bytes, coded.codec.dense_footprint_bytes);
  for (const auto& [c, n] : coded.codec.bitmap_cycles) EXPECT_TRUE(c == 1 || c == 3);
}

TEST(Access, WorkedExamples) {
  const auto cam = standard_camera();
  const Scene s = testing::standard_scene(7);
  const auto r = compare_access_counts(s, cam, 128);
  EXPECT_EQ(r.uniform_accesses, 128u * 128u * 128u);
  EXPECT_LE(r.rt_accesses, r.popcount + 8);
  ASSERT_TRUE(r.ratio);
  EXPECT_GE(*r.ratio, 20.0);
  // Arithmetic reference for this popcount.
  EXPECT_NEAR(*r.ratio, 2097152.0 / static_cast<double>(r.rt_accesses), 1e-9);

  SceneParams full;
  full.target_occupancy = 1.0;
  full.rank = 1;
  full.channels = 1;
  const auto rf = compare_access_counts(generate_synthetic_scene(full), cam, 128);
  EXPECT_EQ(rf.popcount, 262144u);
  ASSERT_TRUE(rf.ratio);
  EXPECT_NEAR(*rf.ratio, 8.0, 0.01);

  Scene empty = s;
  empty.grid.fill(false);
  const auto re = compare_access_counts(empty, cam, 128);
  EXPECT_EQ(re.rt_accesses, 0u);
  EXPECT_FALSE(re.ratio);
  EXPECT_EQ(re.ratio_text(), "unbounded");
  EXPECT_EQ(to_json(re)["ratio"], "unbounded");
}

TEST(Access, RatioForPopcount2621) {
  // 2621 occupied cells spread over all octants.
  OccupancyGrid g = empty_grid();
  std::size_t placed = 0;
  for (std::size_t i = 0; placed < 2621; i += 97, ++placed) g.set(i % g.cell_count(), true);
  ASSERT_EQ(g.popcount(), 2621u);
  Scene s = testing::standard_scene(7);
  s.grid = g;
  const auto r = compare_access_counts(s, standard_camera(), 128);
  EXPECT_EQ(r.rt_accesses, 2621u + 8u);
  EXPECT_NEAR(*r.ratio, 797.0, 1.0);
}

TEST(Trace, JsonRoundTripAndMissingKey) {
  const auto r = render(testing::standard_scene(1), standard_camera(16, 16));
  const nlohmann::json j = to_json(r.trace);
  for (const auto& key : trace_counter_keys()) EXPECT_TRUE(j.contains(key)) << key;
  for (const char* k : {"step1", "step2_1", "step2_2_grid", "step2_2_mlp", "step3"}) EXPECT_TRUE(j["step_seconds"].contains(k));
  EXPECT_EQ(logical_json(trace_from_json(j)), logical_json(r.trace));
  nlohmann::json bad = j;
  bad.erase("mlp_macs");
  try {
    trace_from_json(bad);
    FAIL();
  } catch (const std::invalid_argument& e) {
    EXPECT_NE(std::string(e.what()).find("mlp_macs"), std::string::npos);
  }
}

TEST(Image, PpmRoundTrip) {
  Image img(5, 3);
  for (Eigen::Index i = 0; i < img.rgb.rows(); ++i) img.rgb.row(i) = Eigen::RowVector3d(i / 15.0, 1.0, 0.0);
  const auto bytes = encode_ppm(img);
  const std::string head(bytes.begin(), bytes.begin() + 11);
  EXPECT_EQ(head, "P6\n5 3\n255\n");
  EXPECT_EQ(bytes.size(), 11u + 45u);
  const Image back = decode_ppm(bytes);
  EXPECT_EQ(back.width, 5);
  EXPECT_LE((back.rgb - img.rgb).cwiseAbs().maxCoeff(), 0.5 / 255.0 + 1e-12);
  EXPECT_THROW(decode_ppm(std::vector<std::uint8_t>{'P', '3'}), std::invalid_argument);
}

}  // namespace
}  // namespace rtnerf
