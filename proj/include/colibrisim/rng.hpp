/*
 * Copyright (c) 2026, The colibri-sim authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#pragma once

#include <cstdint>

namespace colibrisim {

// Counter-based generator (splitmix64 finalizer). Stateless: the value for
// (seed, core, counter) is a pure function, so replays and state snapshots
// never carry hidden RNG state.
inline std::uint64_t mix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

inline std::uint64_t rng_draw(std::uint64_t seed, std::uint64_t stream, std::uint64_t counter) {
  return mix64(mix64(seed ^ (stream * 0xd1342543de82ef95ULL)) ^
               (counter * 0xaf251af3b0f025b5ULL));
}

/// Uniform pick in [0, n). n must be > 0.
inline std::uint64_t rng_pick(std::uint64_t seed, std::uint64_t stream, std::uint64_t counter,
                              std::uint64_t n) {
  return rng_draw(seed, stream, counter) % n;
}

}  // namespace colibrisim
