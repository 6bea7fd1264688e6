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

#include <cmath>
#include <vector>

#include "cvborn/common.hpp"

namespace cvborn {

// Physicists' Hermite polynomials H_n: H_0 = 1, H_1 = 2x,
// H_{n+1} = 2x H_n - 2n H_{n-1}. Coefficients are integers and stay exactly
// representable in double up to n ~ 23, beyond every cutoff exercised here.

/// Monomial coefficients of H_n, constant term first.
inline std::vector<double> hermite_coefficients(int n) {
    if (n < 0) throw ValidationError("hermite_coefficients: degree must be >= 0");
    std::vector<double> prev{1.0};
    if (n == 0) return prev;
    std::vector<double> curr{0.0, 2.0};
    for (int k = 1; k < n; ++k) {
        std::vector<double> next(static_cast<std::size_t>(k) + 2, 0.0);
        for (std::size_t i = 0; i < curr.size(); ++i) {
            next[i + 1] += 2.0 * curr[i];
        }
        for (std::size_t i = 0; i < prev.size(); ++i) {
            next[i] -= 2.0 * static_cast<double>(k) * prev[i];
        }
        prev = std::move(curr);
        curr = std::move(next);
    }
    return curr;
}

/// Polynomial product of coefficient sequences (a discrete convolution).
inline std::vector<double> poly_multiply(const std::vector<double>& a, const std::vector<double>& b) {
    if (a.empty() || b.empty()) return {};
    std::vector<double> out(a.size() + b.size() - 1, 0.0);
    for (std::size_t i = 0; i < a.size(); ++i) {
        for (std::size_t j = 0; j < b.size(); ++j) {
            out[i + j] += a[i] * b[j];
        }
    }
    return out;
}

/// Horner evaluation; constant term first.
inline double poly_eval(const std::vector<double>& coeffs, double x) {
    double acc = 0.0;
    for (std::size_t i = coeffs.size(); i-- > 0;) {
        acc = acc * x + coeffs[i];
    }
    return acc;
}

/// Harmonic-oscillator wavefunction at physical coordinate x:
/// psi_n(x) = (pi*hbar)^{-1/4} (2^n n!)^{-1/2} e^{-x^2/(2 hbar)} H_n(x/sqrt(hbar)).
/// Evaluated through the normalized recurrence, which is stable in n.
inline double wavefunction(int n, double x, double hbar = 1.0) {
    if (n < 0) throw ValidationError("wavefunction: quantum number must be >= 0");
    if (hbar <= 0.0) throw ValidationError("wavefunction: hbar must be positive");
    const double t = x / std::sqrt(hbar);
    double prev = 0.0;
    double curr = std::pow(M_PI * hbar, -0.25) * std::exp(-0.5 * t * t);
    for (int k = 0; k < n; ++k) {
        const double next = std::sqrt(2.0 / (k + 1.0)) * t * curr
                            - std::sqrt(static_cast<double>(k) / (k + 1.0)) * prev;
        prev = curr;
        curr = next;
    }
    return curr;
}

/// psi_0 .. psi_{count-1} at natural-unit coordinate t (hbar = 1).
inline void wavefunction_values(int count, double t, std::vector<double>& out) {
    out.resize(static_cast<std::size_t>(count));
    double prev = 0.0;
    double curr = std::pow(M_PI, -0.25) * std::exp(-0.5 * t * t);
    for (int k = 0; k < count; ++k) {
        out[static_cast<std::size_t>(k)] = curr;
        const double next = std::sqrt(2.0 / (k + 1.0)) * t * curr
                            - std::sqrt(static_cast<double>(k) / (k + 1.0)) * prev;
        prev = curr;
        curr = next;
    }
}

namespace detail {

/// Coefficients of the L2-normalized Hermite functions' polynomial part,
/// h_n = H_n / sqrt(2^n n! sqrt(pi)); products of these stay O(1).
inline std::vector<std::vector<double>> normalized_hermite_table(int count) {
    std::vector<std::vector<double>> table(static_cast<std::size_t>(count));
    for (int n = 0; n < count; ++n) {
        std::vector<double> coeffs = hermite_coefficients(n);
        const double log_norm =
            -0.5 * (static_cast<double>(n) * std::log(2.0) + std::lgamma(n + 1.0) + 0.5 * std::log(M_PI));
        const double norm = std::exp(log_norm);
        for (double& c : coeffs) c *= norm;
        table[static_cast<std::size_t>(n)] = std::move(coeffs);
    }
    return table;
}

}  // namespace detail

}  // namespace cvborn
