/**
 * Copyright 2026 The cvborn authors
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

namespace cvborn {

// Counter-based uniform stream. Every variate is a pure function of
// (seed, counter words), so shots can be drawn in any order or on any
// thread and still reproduce bit-exactly.

namespace detail {

inline std::uint64_t splitmix64(std::uint64_t z) {
    z += 0x9e3779b97f4a7c15ULL;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

}  // namespace detail

/// 64-bit hash of a (seed, a, b) key.
inline std::uint64_t hash_key(std::uint64_t seed, std::uint64_t a, std::uint64_t b) {
    std::uint64_t h = detail::splitmix64(seed);
    h = detail::splitmix64(h ^ a);
    h = detail::splitmix64(h ^ b);
    return h;
}

/// Derives an independent sub-seed, e.g. one per (iteration, task) in training.
inline std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t a, std::uint64_t b) {
    return hash_key(seed, a, b);
}

/// Uniform variate in the open interval (0, 1), keyed by (seed, shot, mode).
inline double uniform_open(std::uint64_t seed, std::uint64_t shot, std::uint64_t mode) {
    const std::uint64_t h = hash_key(seed, shot, mode);
    // 53 significant bits, shifted to bin midpoints so 0 and 1 are unreachable.
    return (static_cast<double>(h >> 11) + 0.5) * 0x1.0p-53;
}

}  // namespace cvborn
