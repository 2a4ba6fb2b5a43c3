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

#ifndef RTNERF_ACCEL_SIM_HPP
#define RTNERF_ACCEL_SIM_HPP

#include <array>
#include <cstdint>
#include <string>

#include <nlohmann/json.hpp>

#include "rtnerf/renderer.hpp"
#include "rtnerf/sparse.hpp"

namespace rtnerf {

/// Serial-unit cycles per geometry primitive. The defaults are placeholders
/// chosen for internal consistency, not measured silicon costs.
struct SpuCostTable {
  std::uint64_t ray_gen = 8;
  std::uint64_t ball_approx = 6;
  std::uint64_t projection = 20;
  std::uint64_t intersection = 14;
  std::uint64_t occupancy_access = 1;

  bool operator==(const SpuCostTable&) const = default;
};

struct HardwareConfig {
  std::string name = "custom";
  std::uint64_t num_spu = 1;
  std::uint64_t num_ppu = 1;
  std::uint64_t multipliers_per_ppu = 64;
  std::uint64_t tree_width = 64;  // leaves per dual-purpose tree, power of two
  std::uint64_t mlp_macs_per_cycle = 512;
  double frequency = 1e9;        // Hz
  double sram_bytes = 3.5 * 1024 * 1024;
  double dram_bandwidth = 17e9;  // bytes / second
  SpuCostTable spu_cost_table;
  double search_leaf_fraction = 0.5;  // share of tree leaves serving searches in mixed mode

  static HardwareConfig edge();
  static HardwareConfig cloud();

  /// Throws std::invalid_argument naming the first bad field.
  void validate() const;
  std::uint64_t search_leaves() const;

  bool operator==(const HardwareConfig&) const = default;
};

nlohmann::json to_json(const HardwareConfig& c);
/// Requires every field except search_leaf_fraction; rejects unknown keys.
HardwareConfig hardware_config_from_json(const nlohmann::json& j);

/// Cycle cost of one dual-purpose tree serving `adds` additions and
/// `searches` search-leaf slots.
struct TreeReport {
  std::uint64_t cycles = 0;
  std::uint64_t adder_cycles = 0;  // full tree adding
  std::uint64_t mixed_cycles = 0;  // split between adding and searching
  std::uint64_t adds_served = 0;
  std::uint64_t searches_served = 0;
  double high_sparsity_fraction = 0.0;

  double utilization(std::uint64_t tree_width) const;
  double adder_fraction() const;
  double mixed_fraction() const;
};

/// Mixed mode runs while searches remain, with search_leaves() leaves
/// searching and the rest adding; afterwards all leaves add.
TreeReport model_dual_purpose_tree(std::uint64_t adds, std::uint64_t searches, double high_sparsity_fraction,
                                   const HardwareConfig& config);

inline constexpr std::array<const char*, 5> kStepNames = {"step1", "step2_1", "step2_2_grid", "step2_2_mlp",
                                                          "step3"};

struct StepCost {
  double compute_cycles = 0.0;
  double memory_cycles = 0.0;
  double cycles = 0.0;  // max(compute, memory)
  double bytes = 0.0;
  bool memory_bound = false;
};

struct CycleReport {
  std::string config_name;
  std::array<StepCost, 5> steps;
  double total_cycles = 1.0;
  double fps = 0.0;
  std::array<double, 5> fractions{};
  TreeReport tree;
  std::uint64_t tree_width = 1;

  double step2_2_share() const { return fractions[2] + fractions[3]; }
};

/// Deterministic cost model: per-step max(compute, memory).
CycleReport simulate(const StepTrace& trace, const CodecStats& codec, const HardwareConfig& config);

nlohmann::json to_json(const CycleReport& r);
CycleReport cycle_report_from_json(const nlohmann::json& j);

struct SpeedupReport {
  std::array<double, 5> step_speedup{};  // a.cycles / b.cycles
  double total_speedup = 1.0;
  std::array<double, 5> fraction_shift{};  // b.fraction - a.fraction
};

SpeedupReport compare(const CycleReport& a, const CycleReport& b);
nlohmann::json to_json(const SpeedupReport& s);
/// Compares two serialized reports; throws when their step keys differ.
nlohmann::json compare_reports_json(const nlohmann::json& a, const nlohmann::json& b);

}  // namespace rtnerf

#endif  // RTNERF_ACCEL_SIM_HPP
