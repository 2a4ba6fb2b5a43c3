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

#include "rtnerf/cli.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <iterator>
#include <map>
#include <sstream>

#include "rtnerf/accel_sim.hpp"
#include "rtnerf/renderer.hpp"
#include "rtnerf/scene.hpp"
#include "rtnerf/sparse.hpp"

namespace rtnerf {

std::uint64_t fnv1a64(const std::vector<std::uint8_t>& bytes) {
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (auto b : bytes) {
    h ^= b;
    h *= 0x100000001b3ull;
  }
  return h;
}

std::string hex64(std::uint64_t v) {
  std::ostringstream os;
  os << std::hex;
  os.width(16);
  os.fill('0');
  os << v;
  return os.str();
}

namespace {

/// Bad flag values or inputs; maps to exit code 2.
struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

std::vector<std::uint8_t> read_bytes(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw UsageError("cannot read " + path);
  return {std::istreambuf_iterator<char>(f), std::istreambuf_iterator<char>()};
}

nlohmann::json read_json(const std::string& path) {
  const auto bytes = read_bytes(path);
  try {
    return nlohmann::json::parse(bytes.begin(), bytes.end());
  } catch (const nlohmann::json::parse_error& e) {
    throw UsageError(path + " is not valid JSON: " + e.what());
  }
}

void write_text(const std::string& path, const std::string& text) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw UsageError("cannot write " + path);
  f << text;
  if (!f) throw std::runtime_error("failed writing " + path);
}

void write_json(const std::string& path, const nlohmann::json& j) { write_text(path, j.dump(2) + "\n"); }

Scene load_scene_or_usage(const std::string& path) {
  try {
    return load_scene(path);
  } catch (const SceneFormatError& e) {
    throw UsageError(path + ": " + e.what());
  }
}

struct Manifest {
  std::string command;
  std::vector<std::string> arguments;
  std::optional<std::uint64_t> seed;
  std::map<std::string, std::string> input_hashes;
  std::vector<std::string> outputs;

  void add_input(const std::string& path) { input_hashes[path] = hex64(fnv1a64(read_bytes(path))); }

  void write(const std::string& primary_output) const {
    nlohmann::json j;
    j["command"] = command;
    j["arguments"] = arguments;
    j["seed"] = seed ? nlohmann::json(*seed) : nlohmann::json(nullptr);
    j["input_hashes"] = input_hashes;
    j["output_paths"] = outputs;
    j["tool_version"] = kToolVersion;
    write_json(primary_output + ".manifest.json", j);
  }
};

struct CameraFlags {
  std::vector<double> pos{0.0, 0.0, 4.0};
  std::vector<double> look_at{0.0, 0.0, 0.0};
  double fov_deg = 40.0;
  int width = 128;
  int height = 128;

  void add(CLI::App* app) {
    app->add_option("--cam-pos", pos, "camera position x y z")->expected(3);
    app->add_option("--cam-look-at", look_at, "look-at target x y z")->expected(3);
    app->add_option("--fov-deg", fov_deg, "vertical field of view in degrees")->check(CLI::Range(1.0, 179.0));
    app->add_option("--width", width, "image width")->check(CLI::Range(1, 8192));
    app->add_option("--height", height, "image height")->check(CLI::Range(1, 8192));
  }

  CameraD camera() const {
    const Eigen::Vector3d p(pos[0], pos[1], pos[2]);
    const Eigen::Vector3d t(look_at[0], look_at[1], look_at[2]);
    if ((p - t).norm() <= 0.0) throw UsageError("--cam-pos and --cam-look-at must differ");
    return CameraD::look_at(p, t, fov_deg, width, height);
  }
};

struct RenderFlags {
  std::string pipeline = "rt";
  bool exact = false;
  double tau = kDefaultTerminationThreshold;
  int n_samples = 128;
  std::string schedule = "octant";
  std::string transmittance = "inclusive";
  bool codec = false;

  void add(CLI::App* app, const std::string& suffix = "") {
    app->add_option("--pipeline" + suffix, pipeline, "uniform or rt")->check(CLI::IsMember({"uniform", "rt"}));
    app->add_flag("--exact" + suffix, exact, "clip rt chords to the cube instead of the ball");
    app->add_option("--tau" + suffix, tau, "early-termination threshold in [0, 1)")->check(CLI::Range(0.0, 0.999999));
    app->add_option("--n-samples" + suffix, n_samples, "uniform samples per ray")->check(CLI::Range(1, 1 << 20));
    app->add_option("--schedule" + suffix, schedule, "octant or global")->check(CLI::IsMember({"octant", "global"}));
    app->add_option("--transmittance" + suffix, transmittance, "inclusive or conventional")
        ->check(CLI::IsMember({"inclusive", "conventional"}));
    app->add_flag("--codec" + suffix, codec, "read factors through their sparse encodings");
  }

  RenderOptions options() const {
    RenderOptions o;
    o.pipeline = pipeline == "uniform" ? Pipeline::Uniform : Pipeline::Rt;
    o.exact = exact;
    o.tau = tau;
    o.n_samples = n_samples;
    o.schedule = schedule == "global" ? Schedule::GlobalSort : Schedule::Octant;
    o.transmittance = transmittance == "conventional" ? Transmittance::Conventional : Transmittance::Inclusive;
    o.use_codec = codec;
    return o;
  }
};

int cmd_gen_scene(const std::vector<int>& res, double occupancy, int rank, int channels,
                  const std::vector<double>& sparsity, std::uint64_t seed, const std::string& activation,
                  double density_scale, int blobs, const std::string& out_path, Manifest& manifest,
                  std::ostream& out) {
  SceneParams p;
  if (res.size() == 1) {
    p.resolution = Eigen::Vector3i::Constant(res[0]);
  } else if (res.size() == 3) {
    p.resolution = Eigen::Vector3i(res[0], res[1], res[2]);
  } else {
    throw UsageError("--res takes one or three values");
  }
  p.target_occupancy = occupancy;
  p.rank = rank;
  p.channels = channels;
  p.factor_sparsity = sparsity;
  p.seed = seed;
  p.activation = activation == "relu" ? DensityActivation::Relu : DensityActivation::Softplus;
  p.density_scale = density_scale;
  p.num_blobs = blobs;
  Scene scene;
  try {
    scene = generate_synthetic_scene(p);
  } catch (const std::invalid_argument& e) {
    throw UsageError(e.what());
  }
  save_scene(scene, out_path);
  manifest.seed = seed;
  manifest.outputs.push_back(out_path);
  manifest.write(out_path);
  out << "wrote " << out_path << " (" << scene.grid.popcount() << " occupied cells)\n";
  return kExitOk;
}

int cmd_render(const std::string& scene_path, const CameraFlags& cam_flags, const RenderFlags& rflags,
               const std::string& image_out, const std::string& trace_out, const std::string& codec_out,
               Manifest& manifest, std::ostream& out) {
  const Scene scene = load_scene_or_usage(scene_path);
  manifest.add_input(scene_path);
  manifest.seed = scene.seed;
  const RenderResult r = render(scene, cam_flags.camera(), rflags.options());
  write_ppm(r.image, image_out);
  manifest.outputs.push_back(image_out);
  if (!trace_out.empty()) {
    write_json(trace_out, to_json(r.trace));
    manifest.outputs.push_back(trace_out);
  }
  if (!codec_out.empty()) {
    write_json(codec_out, to_json(r.codec));
    manifest.outputs.push_back(codec_out);
  }
  manifest.write(image_out);
  out << "rendered " << r.image.width << "x" << r.image.height << " with " << r.trace.pipeline << ": "
      << r.trace.points_shaded << " points shaded, " << r.trace.occupancy_accesses << " occupancy accesses\n";
  return kExitOk;
}

int cmd_compare(const std::string& scene_path, const CameraFlags& cam_flags, const RenderFlags& a,
                const RenderFlags& b, const std::string& out_path, Manifest& manifest, std::ostream& out) {
  const Scene scene = load_scene_or_usage(scene_path);
  manifest.add_input(scene_path);
  manifest.seed = scene.seed;
  const CameraD cam = cam_flags.camera();
  const RenderResult ra = render(scene, cam, a.options());
  const RenderResult rb = render(scene, cam, b.options());
  const ImageDiff diff = image_diff(ra.image, rb.image);
  const AccessReport access = compare_access_counts(scene, cam, a.pipeline == "uniform" ? a.n_samples : b.n_samples);
  nlohmann::json j;
  j["a"] = {{"pipeline", a.pipeline}, {"exact", a.exact}, {"tau", a.tau}, {"trace", logical_json(ra.trace)}};
  j["b"] = {{"pipeline", b.pipeline}, {"exact", b.exact}, {"tau", b.tau}, {"trace", logical_json(rb.trace)}};
  j["max_abs_delta"] = diff.max_abs;
  j["mean_abs_delta"] = diff.mean_abs;
  j["access_report"] = to_json(access);
  write_json(out_path, j);
  manifest.outputs.push_back(out_path);
  manifest.write(out_path);
  out << "max |delta| " << diff.max_abs << ", mean |delta| " << diff.mean_abs << ", access ratio "
      << access.ratio_text() << "\n";
  return kExitOk;
}

nlohmann::json histogram(const std::map<int, std::uint64_t>& h) {
  nlohmann::json j = nlohmann::json::object();
  for (const auto& [c, n] : h) j[std::to_string(c)] = n;
  return j;
}

int cmd_codec_stats(const std::string& scene_path, const std::string& force, const std::string& out_path,
                    const std::string& dump_dir, Manifest& manifest, std::ostream& out) {
  const Scene scene = load_scene_or_usage(scene_path);
  manifest.add_input(scene_path);
  manifest.seed = scene.seed;
  EncodeOptions opt;
  if (force == "bitmap") opt.force = Variant::Bitmap;
  if (force == "coo") opt.force = Variant::Coo;
  if (!dump_dir.empty()) std::filesystem::create_directories(dump_dir);

  const SparsityCensus census = sparsity_census(scene.decomp);
  nlohmann::json factors = nlohmann::json::array();
  std::map<int, std::uint64_t> bitmap_total, coo_total;
  std::uint64_t encoded_total = 0, dense_total = 0;
  bool all_exact = true;
  const auto views = factor_views(scene.decomp);
  for (std::size_t f = 0; f < views.size(); ++f) {
    const auto& m = views[f].values;
    const HybridEncoding<float> e = encode(m, opt);
    std::map<int, std::uint64_t> cycles;
    bool exact = true;
    for (int x = 0; x < e.rows; ++x)
      for (int y = 0; y < e.cols; ++y) {
        const auto q = query(e, x, y);
        exact = exact && q.value == m(x, y);
        ++cycles[q.cycles];
      }
    auto& total = e.variant == Variant::Coo ? coo_total : bitmap_total;
    for (const auto& [c, n] : cycles) total[c] += n;
    all_exact = all_exact && exact;
    encoded_total += e.encoded_bytes;
    dense_total += static_cast<std::uint64_t>(m.size()) * opt.size_model.value_width;
    factors.push_back({{"label", views[f].label()},
                       {"rows", e.rows},
                       {"cols", e.cols},
                       {"sparsity", e.sparsity},
                       {"nnz", e.nnz},
                       {"variant", variant_name(e.variant)},
                       {"encoded_bytes", e.encoded_bytes},
                       {"bitmap_bytes", encoded_size(encode_bitmap(m), opt.size_model)},
                       {"coo_bytes", encoded_size(encode_coo(m), opt.size_model)},
                       {"tree_height", e.tree_height()},
                       {"roundtrip_exact", exact},
                       {"cycles", histogram(cycles)}});
    if (!dump_dir.empty()) {
      const std::string path = (std::filesystem::path(dump_dir) / (views[f].label() + ".json")).string();
      write_json(path, dump_encoding(e));
      manifest.outputs.push_back(path);
    }
  }
  nlohmann::json j;
  j["force_variant"] = force;
  j["census"] = to_json(census);
  j["factors"] = factors;
  j["bitmap_cycles"] = histogram(bitmap_total);
  j["coo_cycles"] = histogram(coo_total);
  j["encoded_bytes"] = encoded_total;
  j["dense_bytes"] = dense_total;
  j["roundtrip_exact"] = all_exact;
  write_json(out_path, j);
  manifest.outputs.push_back(out_path);
  manifest.write(out_path);
  out << census.factors.size() << " factors, low-sparsity share " << census.low_share() << ", round trip "
      << (all_exact ? "exact" : "MISMATCH") << "\n";
  return all_exact ? kExitOk : kExitInternal;
}

HardwareConfig load_config(const std::string& path) {
  try {
    return hardware_config_from_json(read_json(path));
  } catch (const std::invalid_argument& e) {
    throw UsageError(path + ": " + e.what());
  } catch (const nlohmann::json::exception& e) {
    throw UsageError(path + ": " + e.what());
  }
}

int cmd_simulate(const std::string& config_path, const std::string& trace_path, const std::string& codec_path,
                 const std::string& compare_path, const std::string& out_path, Manifest& manifest,
                 std::ostream& out) {
  const HardwareConfig config = load_config(config_path);
  manifest.add_input(config_path);
  StepTrace trace;
  try {
    trace = trace_from_json(read_json(trace_path));
  } catch (const std::invalid_argument& e) {
    throw UsageError(trace_path + ": " + e.what());
  }
  manifest.add_input(trace_path);
  CodecStats codec;
  if (!codec_path.empty()) {
    try {
      codec = codec_stats_from_json(read_json(codec_path));
    } catch (const std::exception& e) {
      throw UsageError(codec_path + ": " + e.what());
    }
    manifest.add_input(codec_path);
  }
  const CycleReport report = simulate(trace, codec, config);
  nlohmann::json j = to_json(report);
  if (!compare_path.empty()) {
    const HardwareConfig other = load_config(compare_path);
    manifest.add_input(compare_path);
    const CycleReport other_report = simulate(trace, codec, other);
    j["comparison"] = {{"candidate", to_json(other_report)}, {"speedup", to_json(compare(report, other_report))}};
  }
  write_json(out_path, j);
  manifest.outputs.push_back(out_path);
  manifest.write(out_path);
  out << config.name << ": " << report.total_cycles << " cycles, " << report.fps << " fps\n";
  return kExitOk;
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Instrumented radiance-field renderer, sparse codec and accelerator cost model", "rtnerf"};
  app.require_subcommand(1);
  app.set_version_flag("--version", kToolVersion);

  // gen-scene
  auto* gen = app.add_subcommand("gen-scene", "generate a synthetic scene file");
  std::vector<int> res{64};
  double occupancy = 0.01;
  int rank = 4, channels = 3, blobs = 4;
  std::vector<double> sparsity{0.0};
  std::uint64_t seed = 0;
  std::string activation = "softplus";
  double density_scale = 0.5;
  std::string gen_out;
  gen->add_option("--res", res, "grid resolution (one or three values)")->expected(1, 3);
  gen->add_option("--occupancy", occupancy, "fraction of occupied cells")->check(CLI::Range(1e-9, 1.0));
  gen->add_option("--rank", rank, "decomposition rank")->check(CLI::Range(1, 256));
  gen->add_option("--channels", channels, "appearance channels per rank")->check(CLI::Range(1, 256));
  gen->add_option("--factor-sparsity", sparsity, "zero fractions applied cyclically to factors")
      ->check(CLI::Range(0.0, 1.0));
  gen->add_option("--seed", seed, "generator seed");
  gen->add_option("--activation", activation, "softplus or relu")->check(CLI::IsMember({"softplus", "relu"}));
  gen->add_option("--density-scale", density_scale, "upper bound of density factor values")
      ->check(CLI::PositiveNumber);
  gen->add_option("--blobs", blobs, "number of occupancy blobs")->check(CLI::Range(1, 1024));
  gen->add_option("--out", gen_out, "output scene path")->required();

  // render
  auto* ren = app.add_subcommand("render", "render a scene and record its operation trace");
  std::string scene_path, image_out, trace_out, codec_out;
  CameraFlags cam;
  RenderFlags rflags;
  ren->add_option("--scene", scene_path, "scene file")->required();
  cam.add(ren);
  rflags.add(ren);
  ren->add_option("--image-out", image_out, "output PPM path")->required();
  ren->add_option("--trace-out", trace_out, "output trace JSON path");
  ren->add_option("--codec-out", codec_out, "output codec statistics JSON path");

  // compare
  auto* cmp = app.add_subcommand("compare", "render twice and diff the images and access counts");
  std::string cmp_scene, cmp_out;
  CameraFlags cmp_cam;
  RenderFlags fa, fb;
  fa.pipeline = "uniform";
  fb.exact = true;
  cmp->add_option("--scene", cmp_scene, "scene file")->required();
  cmp_cam.add(cmp);
  fa.add(cmp, "-a");
  fb.add(cmp, "-b");
  cmp->add_option("--out", cmp_out, "output diff JSON path")->required();

  // codec-stats
  auto* cs = app.add_subcommand("codec-stats", "encode every factor and report sizes and query latencies");
  std::string cs_scene, cs_out, cs_dump, force = "auto";
  cs->add_option("--scene", cs_scene, "scene file")->required();
  cs->add_option("--force-variant", force, "auto, bitmap or coo")->check(CLI::IsMember({"auto", "bitmap", "coo"}));
  cs->add_option("--dump-dir", cs_dump, "directory for per-factor encoding dumps");
  cs->add_option("--out", cs_out, "output JSON path")->required();

  // simulate
  auto* sim = app.add_subcommand("simulate", "estimate accelerator cycles for a trace");
  std::string cfg_path, sim_trace, sim_codec, sim_compare, sim_out;
  sim->add_option("--config", cfg_path, "hardware config JSON")->required();
  sim->add_option("--trace", sim_trace, "trace JSON from render")->required();
  sim->add_option("--codec-stats", sim_codec, "codec statistics JSON from render --codec-out");
  sim->add_option("--compare-config", sim_compare, "second hardware config to compare against");
  sim->add_option("--out", sim_out, "output report JSON path")->required();

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::CallForVersion&) {
    out << kToolVersion << "\n";
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    std::ostringstream help_out, msg;
    app.exit(e, help_out, msg);
    err << msg.str();
    if (msg.str().empty()) err << e.what() << "\n";
    return e.get_exit_code() == 0 ? kExitOk : kExitUsage;
  }

  Manifest manifest;
  manifest.arguments = args;
  try {
    if (*gen) {
      manifest.command = "gen-scene";
      return cmd_gen_scene(res, occupancy, rank, channels, sparsity, seed, activation, density_scale, blobs,
                           gen_out, manifest, out);
    }
    if (*ren) {
      manifest.command = "render";
      return cmd_render(scene_path, cam, rflags, image_out, trace_out, codec_out, manifest, out);
    }
    if (*cmp) {
      manifest.command = "compare";
      return cmd_compare(cmp_scene, cmp_cam, fa, fb, cmp_out, manifest, out);
    }
    if (*cs) {
      manifest.command = "codec-stats";
      return cmd_codec_stats(cs_scene, force, cs_out, cs_dump, manifest, out);
    }
    if (*sim) {
      manifest.command = "simulate";
      return cmd_simulate(cfg_path, sim_trace, sim_codec, sim_compare, sim_out, manifest, out);
    }
  } catch (const UsageError& e) {
    err << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const std::exception& e) {
    err << "internal error: " << e.what() << "\n";
    return kExitInternal;
  }
  err << "error: no command given\n";
  return kExitUsage;
}

}  // namespace rtnerf
