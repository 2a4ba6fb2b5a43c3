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

#include "rtnerf/renderer.hpp"

#include <chrono>
#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>

namespace rtnerf {

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

bool sample_less(const SamplePoint& a, const SamplePoint& b, const OccupancyGrid& grid) {
  if (a.t != b.t) return a.t < b.t;
  return grid.linear_index(a.cell) < grid.linear_index(b.cell);
}

}  // namespace

std::size_t RaySampleBatch::total_samples() const {
  std::size_t n = 0;
  for (const auto& s : samples) n += s.size();
  return n;
}

const std::vector<std::string>& trace_counter_keys() {
  static const std::vector<std::string> keys = {
      "occupancy_accesses", "embedding_element_reads", "embedding_bytes", "multiplies",
      "adds",               "mlp_macs",                "sparse_queries",  "composite_ops",
      "points_located",     "points_shaded",           "rays_generated",  "balls_approximated",
      "projections",        "intersections"};
  return keys;
}

namespace {

std::uint64_t* counter_slot(StepTrace& t, const std::string& key) {
  if (key == "occupancy_accesses") return &t.occupancy_accesses;
  if (key == "embedding_element_reads") return &t.embedding_element_reads;
  if (key == "embedding_bytes") return &t.embedding_bytes;
  if (key == "multiplies") return &t.multiplies;
  if (key == "adds") return &t.adds;
  if (key == "mlp_macs") return &t.mlp_macs;
  if (key == "sparse_queries") return &t.sparse_queries;
  if (key == "composite_ops") return &t.composite_ops;
  if (key == "points_located") return &t.points_located;
  if (key == "points_shaded") return &t.points_shaded;
  if (key == "rays_generated") return &t.rays_generated;
  if (key == "balls_approximated") return &t.balls_approximated;
  if (key == "projections") return &t.projections;
  if (key == "intersections") return &t.intersections;
  return nullptr;
}

const char* kStepKeys[] = {"step1", "step2_1", "step2_2_grid", "step2_2_mlp", "step3"};

double* step_slot(StepSeconds& s, int i) {
  switch (i) {
    case 0: return &s.step1;
    case 1: return &s.step2_1;
    case 2: return &s.step2_2_grid;
    case 3: return &s.step2_2_mlp;
    default: return &s.step3;
  }
}

}  // namespace

nlohmann::json logical_json(const StepTrace& t) {
  nlohmann::json j;
  j["pipeline"] = t.pipeline;
  StepTrace copy = t;
  for (const auto& key : trace_counter_keys()) j[key] = *counter_slot(copy, key);
  return j;
}

nlohmann::json to_json(const StepTrace& t) {
  nlohmann::json j = logical_json(t);
  nlohmann::json steps;
  StepSeconds s = t.step_seconds;
  for (int i = 0; i < 5; ++i) steps[kStepKeys[i]] = *step_slot(s, i);
  j["step_seconds"] = steps;
  return j;
}

StepTrace trace_from_json(const nlohmann::json& j) {
  if (!j.is_object()) throw std::invalid_argument("trace must be a JSON object");
  StepTrace t;
  if (j.contains("pipeline")) {
    if (!j["pipeline"].is_string()) throw std::invalid_argument("trace key pipeline must be a string");
    t.pipeline = j["pipeline"].get<std::string>();
  }
  for (const auto& key : trace_counter_keys()) {
    if (!j.contains(key)) throw std::invalid_argument("trace is missing key " + key);
    if (!j[key].is_number_unsigned() && !(j[key].is_number_integer() && j[key].get<long long>() >= 0)) {
      throw std::invalid_argument("trace key " + key + " must be a non-negative integer");
    }
    *counter_slot(t, key) = j[key].get<std::uint64_t>();
  }
  if (!j.contains("step_seconds")) throw std::invalid_argument("trace is missing key step_seconds");
  const auto& steps = j["step_seconds"];
  for (int i = 0; i < 5; ++i) {
    if (!steps.contains(kStepKeys[i]) || !steps[kStepKeys[i]].is_number()) {
      throw std::invalid_argument(std::string("trace is missing key step_seconds.") + kStepKeys[i]);
    }
    *step_slot(t.step_seconds, i) = steps[kStepKeys[i]].get<double>();
  }
  if (t.points_shaded > t.points_located) throw std::invalid_argument("trace has points_shaded > points_located");
  return t;
}

// ---------------------------------------------------------------------------
// Images

std::vector<std::uint8_t> encode_ppm(const Image& img) {
  const std::string header = "P6\n" + std::to_string(img.width) + " " + std::to_string(img.height) + "\n255\n";
  std::vector<std::uint8_t> out(header.begin(), header.end());
  out.reserve(out.size() + static_cast<std::size_t>(img.rgb.size()));
  for (Eigen::Index i = 0; i < img.rgb.rows(); ++i)
    for (int c = 0; c < 3; ++c) {
      const double v = std::clamp(img.rgb(i, c), 0.0, 1.0);
      out.push_back(static_cast<std::uint8_t>(std::lround(v * 255.0)));
    }
  return out;
}

void write_ppm(const Image& img, const std::string& path) {
  const auto bytes = encode_ppm(img);
  std::ofstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot open " + path + " for writing");
  f.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!f) throw std::runtime_error("failed writing " + path);
}

Image decode_ppm(const std::vector<std::uint8_t>& bytes) {
  std::size_t pos = 0;
  auto token = [&]() {
    while (pos < bytes.size() && std::isspace(bytes[pos])) ++pos;
    std::string tok;
    while (pos < bytes.size() && !std::isspace(bytes[pos])) tok.push_back(static_cast<char>(bytes[pos++]));
    return tok;
  };
  if (token() != "P6") throw std::invalid_argument("not a binary PPM");
  const int w = std::stoi(token());
  const int h = std::stoi(token());
  if (std::stoi(token()) != 255) throw std::invalid_argument("only 8-bit PPM is supported");
  ++pos;  // single whitespace after maxval
  if (w < 1 || h < 1 || bytes.size() - pos != static_cast<std::size_t>(w) * h * 3) {
    throw std::invalid_argument("PPM payload size does not match its header");
  }
  Image img(w, h);
  for (Eigen::Index i = 0; i < img.rgb.rows(); ++i)
    for (int c = 0; c < 3; ++c) img.rgb(i, c) = bytes[pos++] / 255.0;
  return img;
}

// ---------------------------------------------------------------------------
// Point location

std::vector<RayD> generate_rays(const CameraD& cam) {
  std::vector<RayD> rays;
  rays.reserve(static_cast<std::size_t>(cam.width) * cam.height);
  for (int y = 0; y < cam.height; ++y)
    for (int x = 0; x < cam.width; ++x) rays.push_back(pixel_to_ray(cam, x, y));
  return rays;
}

RaySampleBatch locate_points_uniform(const CameraD& cam, const OccupancyGrid& grid, int n_samples,
                                     StepTrace* trace) {
  if (n_samples < 1) throw std::invalid_argument("n_samples must be at least 1");
  RaySampleBatch batch;
  batch.width = cam.width;
  batch.height = cam.height;
  auto start = Clock::now();
  batch.rays = generate_rays(cam);
  if (trace) {
    trace->rays_generated += batch.rays.size();
    trace->step_seconds.step1 += seconds_since(start);
  }
  start = Clock::now();
  batch.samples.resize(batch.rays.size());
  const Eigen::Vector3d lo = grid.bounds().lo(), hi = grid.bounds().hi();
  for (std::size_t p = 0; p < batch.rays.size(); ++p) {
    const RayD& ray = batch.rays[p];
    const auto chord = ray_box_intersect(ray, lo, hi);
    if (!chord || chord->length() <= 0.0) continue;
    const double step = chord->length() / n_samples;
    for (int k = 0; k < n_samples; ++k) {
      const double t = chord->t_near + (k + 0.5) * step;
      const CellIndex c = grid.quantize(ray.at(t));
      if (grid.in_range(c) && grid.occupied(c)) batch.samples[p].push_back({t, step, c, 0});
    }
  }
  if (trace) {
    trace->intersections += batch.rays.size();
    trace->occupancy_accesses += static_cast<std::uint64_t>(batch.rays.size()) * static_cast<std::uint64_t>(n_samples);
    trace->points_located += batch.total_samples();
    trace->step_seconds.step2_1 += seconds_since(start);
  }
  return batch;
}

void sample_segment(double t_near, double t_far, double spacing, const CellIndex& cell, int octant_rank,
                    std::vector<SamplePoint>& out) {
  if (!(t_far > t_near)) return;
  for (double a = t_near; a < t_far; a += spacing) {
    const double b = std::min(a + spacing, t_far);
    if (!(b > a)) break;
    out.push_back({0.5 * (a + b), b - a, cell, octant_rank});
  }
}

RaySampleBatch locate_points_rt(const CameraD& cam, const OccupancyGrid& grid, bool exact, StepTrace* trace) {
  RaySampleBatch batch;
  batch.width = cam.width;
  batch.height = cam.height;
  auto start = Clock::now();
  batch.rays = generate_rays(cam);
  if (trace) {
    trace->rays_generated += batch.rays.size();
    trace->step_seconds.step1 += seconds_since(start);
  }
  start = Clock::now();
  batch.samples.resize(batch.rays.size());

  // Occupied cells bucketed by octant.
  std::array<std::vector<CellIndex>, 8> by_octant;
  const Eigen::Vector3i& res = grid.resolution();
  for (int z = 0; z < res.z(); ++z)
    for (int y = 0; y < res.y(); ++y)
      for (int x = 0; x < res.x(); ++x) {
        const CellIndex c(x, y, z);
        if (grid.occupied(c)) by_octant[static_cast<std::size_t>(octant_of(c, grid))].push_back(c);
      }

  const std::array<int, 8> order = octant_order(grid.bounds(), cam.origin);
  const double spacing = 0.5 * grid.cell_size().minCoeff();
  const Eigen::Vector3d side = grid.cell_size();
  std::uint64_t visits = 0, balls = 0, projections = 0, intersections = 0;
  std::vector<SamplePoint> segment;
  for (int rank = 0; rank < 8; ++rank) {
    const auto& cells = by_octant[static_cast<std::size_t>(order[static_cast<std::size_t>(rank)])];
    if (cells.empty()) continue;
    ++visits;  // octant bookkeeping
    for (const CellIndex& cell : cells) {
      ++visits;
      const Ball<double> ball = cube_to_ball(cell, grid);
      ++balls;
      const auto region = project_ball(cam, ball);
      ++projections;
      if (!region) continue;
      const Eigen::Vector3d cube_lo = grid.cell_min(cell);
      const Eigen::Vector3d cube_hi = cube_lo + side;
      for (int py = region->y0; py <= region->y1; ++py) {
        for (int px = region->x0; px <= region->x1; ++px) {
          const std::size_t p = static_cast<std::size_t>(py) * cam.width + px;
          const RayD& ray = batch.rays[p];
          if (!region->contains(ray.direction)) continue;
          ++intersections;
          auto seg = ray_sphere_intersect(ray, ball);
          if (!seg) continue;
          if (exact) {
            seg = ray_box_intersect(ray, cube_lo, cube_hi);
            if (!seg) continue;
          }
          sample_segment(seg->t_near, seg->t_far, spacing, cell, rank, batch.samples[p]);
        }
      }
    }
  }

  for (std::size_t p = 0; p < batch.samples.size(); ++p) {
    auto& s = batch.samples[p];
    std::sort(s.begin(), s.end(), [&](const SamplePoint& a, const SamplePoint& b) { return sample_less(a, b, grid); });
    if (!exact && s.size() > 1) {
      // Neighbouring balls overlap; keep one sample per located cell among
      // samples whose intervals overlap.
      std::vector<SamplePoint> kept;
      kept.reserve(s.size());
      const RayD& ray = batch.rays[p];
      for (const auto& sp : s) {
        bool duplicate = false;
        const CellIndex here = grid.quantize(ray.at(sp.t));
        for (auto it = kept.rbegin(); it != kept.rend(); ++it) {
          if (it->t + 0.5 * it->delta <= sp.t - 0.5 * sp.delta) break;
          if (grid.quantize(ray.at(it->t)) == here) {
            duplicate = true;
            break;
          }
        }
        if (!duplicate) kept.push_back(sp);
      }
      s = std::move(kept);
    }
    // Strictly increasing t: equal-t samples from different cells only
    // arise from degenerate tangent chords; keep the first.
    s.erase(std::unique(s.begin(), s.end(), [](const SamplePoint& a, const SamplePoint& b) { return a.t == b.t; }),
            s.end());
  }

  if (trace) {
    trace->occupancy_accesses += visits;
    trace->balls_approximated += balls;
    trace->projections += projections;
    trace->intersections += intersections;
    trace->points_located += batch.total_samples();
    trace->step_seconds.step2_1 += seconds_since(start);
  }
  return batch;
}

// ---------------------------------------------------------------------------
// Shading

const char* pipeline_name(Pipeline p) { return p == Pipeline::Uniform ? "uniform" : "rt"; }

namespace {

using Tally = std::vector<std::pair<int, std::uint64_t>>;

Tally tally_delta(const std::map<int, std::uint64_t>& before, const std::map<int, std::uint64_t>& after) {
  Tally d;
  for (const auto& [c, n] : after) {
    const auto it = before.find(c);
    const std::uint64_t prev = it == before.end() ? 0 : it->second;
    if (n > prev) d.emplace_back(c, n - prev);
  }
  return d;
}

/// Everything about a cell that does not depend on the view direction.
struct CellShade {
  bool ready = false;
  double sigma = 0.0;
  Eigen::VectorXd features;
  ProductCounter density_ops;
  ProductCounter appearance_ops;
  Tally bitmap_tally;
  Tally coo_tally;
};

template <typename Reader>
class Shader {
 public:
  Shader(const Scene& scene, const Reader& reader, bool codec, const EncodeOptions& enc, StepTrace& trace,
         CodecStats& stats)
      : scene_(scene), reader_(reader), codec_(codec), value_width_(enc.size_model.value_width), trace_(trace),
        stats_(stats), cells_(scene.grid.bits().size()) {}

  /// Shades one sample; `memo` caches the last (cell, color) seen on the ray.
  ShadedSample shade(const SamplePoint& sp, const RayD& ray, std::size_t& memo_cell, Eigen::Vector3d& memo_color) {
    const std::size_t id = scene_.grid.linear_index(sp.cell);
    CellShade& cs = cells_[id];
    if (!cs.ready) fill(cs, sp.cell);
    account(cs);
    ++trace_.points_shaded;
    trace_.mlp_macs += scene_.head.mac_count();
    if (memo_cell != id) {
      const auto start = Clock::now();
      memo_color = evaluate_head(scene_.head, cs.features, ray.direction);
      memo_cell = id;
      trace_.step_seconds.step2_2_mlp += seconds_since(start);
    }
    return {sp.t, sp.delta, cs.sigma, memo_color};
  }

 private:
  void fill(CellShade& cs, const CellIndex& cell) {
    const auto start = Clock::now();
    const VmDecomposition& d = scene_.decomp;
    std::map<int, std::uint64_t> bitmap_before, coo_before;
    if constexpr (std::is_same_v<Reader, EncodedFactorReader>) {
      bitmap_before = reader_.stats().bitmap_cycles;
      coo_before = reader_.stats().coo_cycles;
    }
    cs.sigma = apply_activation(d.activation, density_raw(reader_, d, cell, &cs.density_ops));
    cs.features.resize(d.feature_width());
    appearance_features(reader_, d, cell, cs.features, &cs.appearance_ops);
    if constexpr (std::is_same_v<Reader, EncodedFactorReader>) {
      cs.bitmap_tally = tally_delta(bitmap_before, reader_.stats().bitmap_cycles);
      cs.coo_tally = tally_delta(coo_before, reader_.stats().coo_cycles);
    }
    cs.ready = true;
    trace_.step_seconds.step2_2_grid += seconds_since(start);
  }

  // Logical per-point cost; the cell cache is only a host-side shortcut.
  void account(const CellShade& cs) {
    const std::uint64_t reads = cs.density_ops.reads + cs.appearance_ops.reads;
    trace_.embedding_element_reads += reads;
    if (codec_) {
      trace_.sparse_queries += reads;
      trace_.multiplies += cs.density_ops.products + cs.appearance_ops.products;
      trace_.adds += cs.density_ops.products > 0 ? cs.density_ops.products - 1 : 0;
      trace_.embedding_bytes +=
          static_cast<std::uint64_t>(cs.density_ops.nonzero_reads + cs.appearance_ops.nonzero_reads) * value_width_;
      for (const auto& [c, n] : cs.bitmap_tally) stats_.bitmap_cycles[c] += n;
      for (const auto& [c, n] : cs.coo_tally) stats_.coo_cycles[c] += n;
    } else {
      const std::uint64_t products = reads / 2;
      const std::uint64_t density_products = cs.density_ops.reads / 2;
      trace_.multiplies += products;
      trace_.adds += density_products > 0 ? density_products - 1 : 0;
      trace_.embedding_bytes += reads * static_cast<std::uint64_t>(value_width_);
    }
  }

  const Scene& scene_;
  const Reader& reader_;
  bool codec_;
  int value_width_;
  StepTrace& trace_;
  CodecStats& stats_;
  std::vector<CellShade> cells_;
};

template <typename Reader>
void shade_all(const Scene& scene, const RaySampleBatch& batch, const RenderOptions& opt, const Reader& reader,
               RenderResult& out) {
  Shader<Reader> shader(scene, reader, opt.use_codec, opt.codec, out.trace, out.codec);
  const bool octant = opt.pipeline == Pipeline::Rt && opt.schedule == Schedule::Octant;
  std::vector<std::optional<ShadedSample>> cache;
  std::array<std::vector<std::size_t>, 8> buckets;

  for (std::size_t p = 0; p < batch.pixel_count(); ++p) {
    const auto& samples = batch.samples[p];
    const RayD& ray = batch.rays[p];
    std::size_t memo_cell = std::numeric_limits<std::size_t>::max();
    Eigen::Vector3d memo_color = Eigen::Vector3d::Zero();
    cache.assign(samples.size(), std::nullopt);
    CompositeState state;
    double step3 = 0.0;

    auto fold_index = [&](std::size_t i) {
      if (!cache[i]) cache[i] = shader.shade(samples[i], ray, memo_cell, memo_color);
      const auto start = Clock::now();
      const ShadedSample& s = *cache[i];
      const bool applied = state.fold(s.sigma, s.delta, s.color, opt.tau, opt.transmittance);
      out.trace.composite_ops += applied;
      step3 += seconds_since(start);
    };

    if (!octant) {
      for (std::size_t i = 0; i < samples.size() && !state.terminated; ++i) fold_index(i);
    } else {
      for (auto& b : buckets) b.clear();
      for (std::size_t i = 0; i < samples.size(); ++i) buckets[static_cast<std::size_t>(samples[i].octant_rank)].push_back(i);
      // Largest index (in t order) already folded; a later octant must not
      // bring anything before it.
      std::ptrdiff_t frontier = -1;
      bool violated = false;
      for (int rank = 0; rank < 8; ++rank) {
        const auto& bucket = buckets[static_cast<std::size_t>(rank)];
        if (bucket.empty()) continue;
        if (static_cast<std::ptrdiff_t>(bucket.front()) < frontier) {
          // Out-of-order octant for this ray: refold everything seen so far
          // in t order.
          violated = true;
          state = CompositeState{};
          frontier = -1;
          for (std::size_t i = 0; i < samples.size() && !state.terminated; ++i) {
            if (samples[i].octant_rank > rank) continue;
            fold_index(i);
            frontier = static_cast<std::ptrdiff_t>(i);
          }
          continue;
        }
        for (std::size_t i : bucket) {
          if (state.terminated) break;
          fold_index(i);
          frontier = static_cast<std::ptrdiff_t>(i);
        }
      }
      out.octant_violations += violated;
    }
    out.trace.step_seconds.step3 += step3;
    out.image.rgb.row(static_cast<Eigen::Index>(p)) = state.color.transpose();
  }
}

}  // namespace

RenderResult render(const Scene& scene, const CameraD& cam, const RenderOptions& opt) {
  if (!cam.valid()) throw std::invalid_argument("camera is not valid");
  if (!(opt.tau >= 0.0 && opt.tau < 1.0)) throw std::invalid_argument("termination threshold must lie in [0, 1)");
  RenderResult out;
  out.trace.pipeline = pipeline_name(opt.pipeline);
  out.image = Image(cam.width, cam.height);
  const RaySampleBatch batch = opt.pipeline == Pipeline::Uniform
                                   ? locate_points_uniform(cam, scene.grid, opt.n_samples, &out.trace)
                                   : locate_points_rt(cam, scene.grid, opt.exact, &out.trace);
  if (opt.use_codec) {
    const auto start = Clock::now();
    const EncodedFactorReader reader(scene.decomp, opt.codec);
    out.trace.step_seconds.step2_2_grid += seconds_since(start);
    out.codec = reader.stats();
    out.codec.bitmap_cycles.clear();
    out.codec.coo_cycles.clear();
    shade_all(scene, batch, opt, reader, out);
  } else {
    const DenseFactorReader reader(scene.decomp);
    for (const auto& v : factor_views(scene.decomp)) {
      out.codec.dense_footprint_bytes +=
          static_cast<std::uint64_t>(v.values.size()) * static_cast<std::uint64_t>(opt.codec.size_model.value_width);
    }
    out.codec.footprint_bytes = out.codec.dense_footprint_bytes;
    shade_all(scene, batch, opt, reader, out);
  }
  return out;
}

std::string AccessReport::ratio_text() const {
  if (!ratio) return "unbounded";
  std::ostringstream os;
  os.precision(6);
  os << *ratio;
  return os.str();
}

AccessReport compare_access_counts(const Scene& scene, const CameraD& cam, int n_uniform) {
  if (n_uniform < 1) throw std::invalid_argument("n_samples must be at least 1");
  AccessReport r;
  StepTrace uniform, rt;
  locate_points_uniform(cam, scene.grid, n_uniform, &uniform);
  locate_points_rt(cam, scene.grid, true, &rt);
  r.uniform_accesses = uniform.occupancy_accesses;
  r.rt_accesses = rt.occupancy_accesses;
  r.popcount = scene.grid.popcount();
  if (r.rt_accesses > 0) r.ratio = static_cast<double>(r.uniform_accesses) / static_cast<double>(r.rt_accesses);
  return r;
}

nlohmann::json to_json(const AccessReport& r) {
  nlohmann::json j = {{"uniform_accesses", r.uniform_accesses},
                      {"rt_accesses", r.rt_accesses},
                      {"popcount", r.popcount}};
  if (r.ratio) {
    j["ratio"] = *r.ratio;
  } else {
    j["ratio"] = "unbounded";
  }
  return j;
}

ImageDiff image_diff(const Image& a, const Image& b) {
  if (a.width != b.width || a.height != b.height) throw std::invalid_argument("image dimensions differ");
  ImageDiff d;
  if (a.rgb.size() == 0) return d;
  const auto diff = (a.rgb - b.rgb).cwiseAbs();
  d.max_abs = diff.maxCoeff();
  d.mean_abs = diff.mean();
  return d;
}

}  // namespace rtnerf
