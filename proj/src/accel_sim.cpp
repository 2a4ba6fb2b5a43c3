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

#include "rtnerf/accel_sim.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <set>
#include <stdexcept>

namespace rtnerf {

namespace {

constexpr double kMiB = 1024.0 * 1024.0;

std::uint64_t ceil_div(std::uint64_t a, std::uint64_t b) { return a == 0 ? 0 : (a - 1) / b + 1; }

bool is_pow2(std::uint64_t v) { return v != 0 && (v & (v - 1)) == 0; }

}  // namespace

HardwareConfig HardwareConfig::edge() {
  HardwareConfig c;
  c.name = "rt-nerf-edge";
  c.num_spu = 1;
  c.num_ppu = 1;
  c.frequency = 1e9;
  c.sram_bytes = 3.5 * kMiB;
  c.dram_bandwidth = 17e9;
  return c;
}

HardwareConfig HardwareConfig::cloud() {
  HardwareConfig c;
  c.name = "rt-nerf-cloud";
  c.num_spu = 30;
  c.num_ppu = 30;
  c.frequency = 1e9;
  c.sram_bytes = 105 * kMiB;
  c.dram_bandwidth = 510e9;
  return c;
}

void HardwareConfig::validate() const {
  auto positive = [](std::uint64_t v, const char* field) {
    if (v == 0) throw std::invalid_argument(std::string(field) + " must be positive");
  };
  positive(num_spu, "num_spu");
  positive(num_ppu, "num_ppu");
  positive(multipliers_per_ppu, "multipliers_per_ppu");
  positive(tree_width, "tree_width");
  positive(mlp_macs_per_cycle, "mlp_macs_per_cycle");
  positive(spu_cost_table.ray_gen, "spu_cost_table.ray_gen");
  positive(spu_cost_table.ball_approx, "spu_cost_table.ball_approx");
  positive(spu_cost_table.projection, "spu_cost_table.projection");
  positive(spu_cost_table.intersection, "spu_cost_table.intersection");
  positive(spu_cost_table.occupancy_access, "spu_cost_table.occupancy_access");
  if (!is_pow2(tree_width)) throw std::invalid_argument("tree_width must be a power of two");
  if (!(frequency > 0.0) || !std::isfinite(frequency)) throw std::invalid_argument("frequency must be positive");
  if (!(sram_bytes > 0.0) || !std::isfinite(sram_bytes)) throw std::invalid_argument("sram_bytes must be positive");
  if (!(dram_bandwidth > 0.0) || !std::isfinite(dram_bandwidth)) {
    throw std::invalid_argument("dram_bandwidth must be positive");
  }
  if (!(search_leaf_fraction > 0.0 && search_leaf_fraction <= 1.0)) {
    throw std::invalid_argument("search_leaf_fraction must lie in (0, 1]");
  }
}

std::uint64_t HardwareConfig::search_leaves() const {
  const auto s = static_cast<std::uint64_t>(std::llround(search_leaf_fraction * static_cast<double>(tree_width)));
  return std::clamp<std::uint64_t>(s, 1, tree_width);
}

nlohmann::json to_json(const HardwareConfig& c) {
  return {{"name", c.name},
          {"num_spu", c.num_spu},
          {"num_ppu", c.num_ppu},
          {"multipliers_per_ppu", c.multipliers_per_ppu},
          {"tree_width", c.tree_width},
          {"mlp_macs_per_cycle", c.mlp_macs_per_cycle},
          {"frequency", c.frequency},
          {"sram_bytes", c.sram_bytes},
          {"dram_bandwidth", c.dram_bandwidth},
          {"spu_cost_table",
           {{"ray_gen", c.spu_cost_table.ray_gen},
            {"ball_approx", c.spu_cost_table.ball_approx},
            {"projection", c.spu_cost_table.projection},
            {"intersection", c.spu_cost_table.intersection},
            {"occupancy_access", c.spu_cost_table.occupancy_access}}},
          {"search_leaf_fraction", c.search_leaf_fraction}};
}

namespace {

const nlohmann::json& require(const nlohmann::json& j, const std::string& key, const std::string& where) {
  if (!j.contains(key)) throw std::invalid_argument(where + " is missing key " + key);
  return j[key];
}

std::uint64_t require_count(const nlohmann::json& j, const std::string& key, const std::string& where) {
  const auto& v = require(j, key, where);
  if (!v.is_number_integer() || v.get<long long>() < 0) {
    throw std::invalid_argument(where + " key " + key + " must be a non-negative integer");
  }
  return v.get<std::uint64_t>();
}

double require_number(const nlohmann::json& j, const std::string& key, const std::string& where) {
  const auto& v = require(j, key, where);
  if (!v.is_number()) throw std::invalid_argument(where + " key " + key + " must be a number");
  return v.get<double>();
}

void reject_unknown(const nlohmann::json& j, const std::set<std::string>& allowed, const std::string& where) {
  for (const auto& [k, v] : j.items()) {
    if (!allowed.count(k)) throw std::invalid_argument(where + " has unknown key " + k);
  }
}

}  // namespace

HardwareConfig hardware_config_from_json(const nlohmann::json& j) {
  if (!j.is_object()) throw std::invalid_argument("config must be a JSON object");
  reject_unknown(j,
                 {"name", "num_spu", "num_ppu", "multipliers_per_ppu", "tree_width", "mlp_macs_per_cycle",
                  "frequency", "sram_bytes", "dram_bandwidth", "spu_cost_table", "search_leaf_fraction"},
                 "config");
  HardwareConfig c;
  const auto& name = require(j, "name", "config");
  if (!name.is_string()) throw std::invalid_argument("config key name must be a string");
  c.name = name.get<std::string>();
  c.num_spu = require_count(j, "num_spu", "config");
  c.num_ppu = require_count(j, "num_ppu", "config");
  c.multipliers_per_ppu = require_count(j, "multipliers_per_ppu", "config");
  c.tree_width = require_count(j, "tree_width", "config");
  c.mlp_macs_per_cycle = require_count(j, "mlp_macs_per_cycle", "config");
  c.frequency = require_number(j, "frequency", "config");
  c.sram_bytes = require_number(j, "sram_bytes", "config");
  c.dram_bandwidth = require_number(j, "dram_bandwidth", "config");
  const auto& table = require(j, "spu_cost_table", "config");
  if (!table.is_object()) throw std::invalid_argument("config key spu_cost_table must be an object");
  reject_unknown(table, {"ray_gen", "ball_approx", "projection", "intersection", "occupancy_access"},
                 "spu_cost_table");
  c.spu_cost_table.ray_gen = require_count(table, "ray_gen", "spu_cost_table");
  c.spu_cost_table.ball_approx = require_count(table, "ball_approx", "spu_cost_table");
  c.spu_cost_table.projection = require_count(table, "projection", "spu_cost_table");
  c.spu_cost_table.intersection = require_count(table, "intersection", "spu_cost_table");
  c.spu_cost_table.occupancy_access = require_count(table, "occupancy_access", "spu_cost_table");
  if (j.contains("search_leaf_fraction")) c.search_leaf_fraction = require_number(j, "search_leaf_fraction", "config");
  c.validate();
  return c;
}

double TreeReport::utilization(std::uint64_t tree_width) const {
  if (cycles == 0) return 0.0;
  return static_cast<double>(adds_served + searches_served) / (static_cast<double>(tree_width) * cycles);
}

double TreeReport::adder_fraction() const {
  return cycles == 0 ? 0.0 : static_cast<double>(adder_cycles) / static_cast<double>(cycles);
}

double TreeReport::mixed_fraction() const {
  return cycles == 0 ? 0.0 : static_cast<double>(mixed_cycles) / static_cast<double>(cycles);
}

TreeReport model_dual_purpose_tree(std::uint64_t adds, std::uint64_t searches, double high_sparsity_fraction,
                                   const HardwareConfig& config) {
  config.validate();
  if (!(high_sparsity_fraction >= 0.0 && high_sparsity_fraction <= 1.0)) {
    throw std::invalid_argument("high_sparsity_fraction must lie in [0, 1]");
  }
  TreeReport r;
  r.high_sparsity_fraction = high_sparsity_fraction;
  const std::uint64_t w = config.tree_width;
  std::uint64_t remaining_adds = adds;
  if (searches > 0) {
    const std::uint64_t s = config.search_leaves();
    const std::uint64_t a = w - s;
    r.mixed_cycles = ceil_div(searches, s);
    const std::uint64_t mixed_adds = std::min(adds, r.mixed_cycles * a);
    remaining_adds -= mixed_adds;
  }
  r.adder_cycles = ceil_div(remaining_adds, w);
  r.cycles = r.mixed_cycles + r.adder_cycles;
  r.adds_served = adds;
  r.searches_served = searches;
  return r;
}

CycleReport simulate(const StepTrace& trace, const CodecStats& codec, const HardwareConfig& config) {
  config.validate();
  CycleReport r;
  r.config_name = config.name;
  r.tree_width = config.tree_width;
  const auto& cost = config.spu_cost_table;
  const double spu = static_cast<double>(config.num_spu);
  const double ppu = static_cast<double>(config.num_ppu);
  auto d = [](std::uint64_t v) { return static_cast<double>(v); };

  r.steps[0].compute_cycles = d(trace.rays_generated * cost.ray_gen) / spu;

  r.steps[1].compute_cycles = d(trace.balls_approximated * cost.ball_approx + trace.projections * cost.projection +
                                trace.intersections * cost.intersection +
                                trace.occupancy_accesses * cost.occupancy_access) /
                              spu;
  r.steps[1].bytes = d(trace.occupancy_accesses);

  std::uint64_t search_slots = 0;
  for (const auto& [cycles, count] : codec.coo_cycles) search_slots += static_cast<std::uint64_t>(cycles) * count;
  r.tree = model_dual_purpose_tree(trace.adds, search_slots, codec.high_sparsity_fraction, config);
  // One pipelined read unit per PPU. With the codec it is the bitmap search
  // unit (one query per cycle after the fill); without it every element read
  // is a single-cycle dense fetch through the same port.
  std::uint64_t read_cycles = 0;
  if (codec.enabled) {
    const std::uint64_t bitmap_queries = codec.bitmap_queries();
    read_cycles = bitmap_queries == 0 ? 0 : bitmap_queries + (kBitmapHitCycles - 1);
  } else {
    read_cycles = trace.embedding_element_reads;
  }
  r.steps[2].compute_cycles =
      (d(trace.multiplies) / d(config.multipliers_per_ppu) + d(r.tree.cycles) + d(read_cycles)) / ppu;
  // Factors that fit on chip are fetched once; otherwise every read streams.
  const bool resident = codec.footprint_bytes > 0 && d(codec.footprint_bytes) <= config.sram_bytes;
  r.steps[2].bytes = resident ? std::min(d(codec.footprint_bytes), d(trace.embedding_bytes)) : d(trace.embedding_bytes);

  r.steps[3].compute_cycles = d(trace.mlp_macs) / d(config.mlp_macs_per_cycle) / ppu;
  r.steps[4].compute_cycles = d(trace.composite_ops) / ppu;

  double total = 0.0;
  for (auto& s : r.steps) {
    s.memory_cycles = s.bytes * config.frequency / config.dram_bandwidth;
    s.memory_bound = s.memory_cycles > s.compute_cycles;
    s.cycles = std::max(s.compute_cycles, s.memory_cycles);
    total += s.cycles;
  }
  if (total <= 0.0) {
    r.total_cycles = 1.0;
    r.fractions.fill(1.0 / 5.0);
  } else {
    r.total_cycles = total;
    for (std::size_t i = 0; i < 5; ++i) r.fractions[i] = r.steps[i].cycles / total;
  }
  r.fps = config.frequency / r.total_cycles;
  return r;
}

nlohmann::json to_json(const CycleReport& r) {
  nlohmann::json steps, fractions, flags;
  for (std::size_t i = 0; i < 5; ++i) {
    const auto& s = r.steps[i];
    steps[kStepNames[i]] = {{"compute_cycles", s.compute_cycles},
                            {"memory_cycles", s.memory_cycles},
                            {"cycles", s.cycles},
                            {"bytes", s.bytes},
                            {"memory_bound", s.memory_bound}};
    fractions[kStepNames[i]] = r.fractions[i];
    flags[kStepNames[i]] = s.memory_bound;
  }
  return {{"config", r.config_name},
          {"overlap_model", "per-step max(compute_cycles, memory_cycles)"},
          {"steps", steps},
          {"total_cycles", r.total_cycles},
          {"fps", r.fps},
          {"fractions", fractions},
          {"memory_bound", flags},
          {"tree_mode_census",
           {{"tree_width", r.tree_width},
            {"cycles", r.tree.cycles},
            {"adder_cycles", r.tree.adder_cycles},
            {"mixed_cycles", r.tree.mixed_cycles},
            {"adder_fraction", r.tree.adder_fraction()},
            {"mixed_fraction", r.tree.mixed_fraction()},
            {"adds_served", r.tree.adds_served},
            {"searches_served", r.tree.searches_served},
            {"high_sparsity_fraction", r.tree.high_sparsity_fraction},
            {"utilization", r.tree.utilization(r.tree_width)}}}};
}

namespace {

std::set<std::string> key_set(const nlohmann::json& j, const std::string& where) {
  if (!j.is_object()) throw std::invalid_argument(where + " must be an object");
  std::set<std::string> keys;
  for (const auto& [k, v] : j.items()) keys.insert(k);
  return keys;
}

}  // namespace

CycleReport cycle_report_from_json(const nlohmann::json& j) {
  if (!j.is_object()) throw std::invalid_argument("report must be a JSON object");
  CycleReport r;
  r.config_name = require(j, "config", "report").get<std::string>();
  const auto& steps = require(j, "steps", "report");
  const auto& fractions = require(j, "fractions", "report");
  const std::set<std::string> expected(kStepNames.begin(), kStepNames.end());
  if (key_set(steps, "report steps") != expected) throw std::invalid_argument("report steps have mismatched keys");
  if (key_set(fractions, "report fractions") != expected) {
    throw std::invalid_argument("report fractions have mismatched keys");
  }
  for (std::size_t i = 0; i < 5; ++i) {
    const auto& s = steps[kStepNames[i]];
    const std::string where = std::string("steps.") + kStepNames[i];
    r.steps[i].compute_cycles = require_number(s, "compute_cycles", where);
    r.steps[i].memory_cycles = require_number(s, "memory_cycles", where);
    r.steps[i].cycles = require_number(s, "cycles", where);
    r.steps[i].bytes = require_number(s, "bytes", where);
    r.steps[i].memory_bound = require(s, "memory_bound", where).get<bool>();
    r.fractions[i] = fractions[kStepNames[i]].get<double>();
  }
  r.total_cycles = require_number(j, "total_cycles", "report");
  r.fps = require_number(j, "fps", "report");
  const auto& tree = require(j, "tree_mode_census", "report");
  r.tree_width = require_count(tree, "tree_width", "tree_mode_census");
  r.tree.cycles = require_count(tree, "cycles", "tree_mode_census");
  r.tree.adder_cycles = require_count(tree, "adder_cycles", "tree_mode_census");
  r.tree.mixed_cycles = require_count(tree, "mixed_cycles", "tree_mode_census");
  r.tree.adds_served = require_count(tree, "adds_served", "tree_mode_census");
  r.tree.searches_served = require_count(tree, "searches_served", "tree_mode_census");
  r.tree.high_sparsity_fraction = require_number(tree, "high_sparsity_fraction", "tree_mode_census");
  return r;
}

namespace {

double ratio_or_one(double a, double b) {
  if (a == b) return 1.0;
  if (b == 0.0) return std::numeric_limits<double>::infinity();
  return a / b;
}

nlohmann::json finite_or_text(double v) {
  if (std::isfinite(v)) return v;
  return "unbounded";
}

}  // namespace

SpeedupReport compare(const CycleReport& a, const CycleReport& b) {
  SpeedupReport s;
  for (std::size_t i = 0; i < 5; ++i) {
    s.step_speedup[i] = ratio_or_one(a.steps[i].cycles, b.steps[i].cycles);
    s.fraction_shift[i] = b.fractions[i] - a.fractions[i];
  }
  s.total_speedup = ratio_or_one(a.total_cycles, b.total_cycles);
  return s;
}

nlohmann::json to_json(const SpeedupReport& s) {
  nlohmann::json steps, shifts;
  for (std::size_t i = 0; i < 5; ++i) {
    steps[kStepNames[i]] = finite_or_text(s.step_speedup[i]);
    shifts[kStepNames[i]] = s.fraction_shift[i];
  }
  return {{"step_speedup", steps}, {"total_speedup", finite_or_text(s.total_speedup)}, {"fraction_shift", shifts}};
}

nlohmann::json compare_reports_json(const nlohmann::json& a, const nlohmann::json& b) {
  if (key_set(require(a, "steps", "first report"), "first report steps") !=
      key_set(require(b, "steps", "second report"), "second report steps")) {
    throw std::invalid_argument("reports have mismatched step keys");
  }
  const CycleReport ra = cycle_report_from_json(a);
  const CycleReport rb = cycle_report_from_json(b);
  nlohmann::json j = to_json(compare(ra, rb));
  j["baseline"] = ra.config_name;
  j["candidate"] = rb.config_name;
  return j;
}

}  // namespace rtnerf
