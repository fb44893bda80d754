// Copyright 2026 The FusionDeepMF Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     https://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef FUSIONDEEPMF_RNG_HPP_
#define FUSIONDEEPMF_RNG_HPP_

#include <cstdint>
#include <random>
#include <string_view>

namespace fdmf {

using Rng = std::mt19937_64;

// Derives an independent stream seed from a root seed and a purpose tag, so
// every consumer of randomness hangs off the single user-provided seed.
inline std::uint64_t DeriveSeed(std::uint64_t root, std::string_view tag) {
  std::uint64_t h = 1469598103934665603ULL;  // FNV-1a
  for (char c : tag) {
    h ^= static_cast<unsigned char>(c);
    h *= 1099511628211ULL;
  }
  std::uint64_t z = root ^ h;
  // splitmix64 finalizer
  z += 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

inline std::uint64_t DeriveSeed(std::uint64_t root, std::string_view tag,
                                std::uint64_t index) {
  return DeriveSeed(DeriveSeed(root, tag) + index, "index");
}

}  // namespace fdmf

#endif  // FUSIONDEEPMF_RNG_HPP_
