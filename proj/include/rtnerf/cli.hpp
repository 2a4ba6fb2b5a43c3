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

#ifndef RTNERF_CLI_HPP
#define RTNERF_CLI_HPP

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

namespace rtnerf {

inline constexpr const char* kToolVersion = "0.1.0";

inline constexpr int kExitOk = 0;
inline constexpr int kExitInternal = 1;
inline constexpr int kExitUsage = 2;

/// Runs one command line (without the program name). Never throws.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

/// 64-bit FNV-1a, used for manifest input hashes.
std::uint64_t fnv1a64(const std::vector<std::uint8_t>& bytes);
std::string hex64(std::uint64_t v);

}  // namespace rtnerf

#endif  // RTNERF_CLI_HPP
