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

#include <complex>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace cvborn {

using complex = std::complex<double>;

/// Raised when an input violates a documented precondition or schema.
class ValidationError : public std::invalid_argument {
public:
    explicit ValidationError(const std::string& msg) : std::invalid_argument(msg) {}
};

/// Raised when a numerically valid input drives the simulation outside its
/// supported regime (truncation overflow, degenerate conditional state, ...).
class SimulationError : public std::runtime_error {
public:
    explicit SimulationError(const std::string& msg) : std::runtime_error(msg) {}
};

/// Exact binomial coefficient; values used here stay far below 2^53.
inline double binomial(int n, int k) {
    if (k < 0 || k > n) return 0.0;
    if (k > n - k) k = n - k;
    double result = 1.0;
    for (int i = 1; i <= k; ++i) {
        result = result * static_cast<double>(n - k + i) / static_cast<double>(i);
    }
    return result > 0.5 ? static_cast<double>(static_cast<std::uint64_t>(result + 0.5)) : 0.0;
}

inline std::int64_t binomial_i(int n, int k) {
    return static_cast<std::int64_t>(binomial(n, k));
}

}  // namespace cvborn
