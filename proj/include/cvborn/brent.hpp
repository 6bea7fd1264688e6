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

#include <algorithm>
#include <cmath>
#include <limits>

#include "cvborn/common.hpp"

namespace cvborn {

struct BrentOptions {
    double x_tolerance = 1e-12;
    double f_tolerance = 1e-10;
    int max_iterations = 200;
};

/// Brent's method on a bracketing interval [a, b] with f(a)·f(b) <= 0.
/// Combines bisection with secant/inverse-quadratic steps; convergence is
/// guaranteed because the bracket never grows.
template <typename F>
double brent_root(F&& f, double a, double b, const BrentOptions& opts = {}) {
    double fa = f(a);
    double fb = f(b);
    if (fa == 0.0) return a;
    if (fb == 0.0) return b;
    if (fa * fb > 0.0) {
        throw ValidationError("brent_root: interval does not bracket a root");
    }

    double c = a, fc = fa;
    double d = b - a, e = d;

    for (int iter = 0; iter < opts.max_iterations; ++iter) {
        if (std::abs(fc) < std::abs(fb)) {
            a = b; b = c; c = a;
            fa = fb; fb = fc; fc = fa;
        }
        const double tol = 2.0 * std::numeric_limits<double>::epsilon() * std::abs(b)
                           + 0.5 * opts.x_tolerance;
        const double midpoint = 0.5 * (c - b);
        if (std::abs(midpoint) <= tol || std::abs(fb) <= opts.f_tolerance) {
            return b;
        }
        if (std::abs(e) >= tol && std::abs(fa) > std::abs(fb)) {
            // Interpolation step: secant, or inverse quadratic when a, b, c differ.
            const double s = fb / fa;
            double p, q;
            if (a == c) {
                p = 2.0 * midpoint * s;
                q = 1.0 - s;
            } else {
                const double qq = fa / fc;
                const double r = fb / fc;
                p = s * (2.0 * midpoint * qq * (qq - r) - (b - a) * (r - 1.0));
                q = (qq - 1.0) * (r - 1.0) * (s - 1.0);
            }
            if (p > 0.0) q = -q;
            p = std::abs(p);
            if (2.0 * p < std::min(3.0 * midpoint * q - std::abs(tol * q), std::abs(e * q))) {
                e = d;
                d = p / q;
            } else {
                d = midpoint;
                e = d;
            }
        } else {
            d = midpoint;
            e = d;
        }
        a = b;
        fa = fb;
        b += (std::abs(d) > tol) ? d : (midpoint > 0.0 ? tol : -tol);
        fb = f(b);
        if (fb == 0.0) return b;
        if ((fb > 0.0) == (fc > 0.0)) {
            c = a;
            fc = fa;
            d = b - a;
            e = d;
        }
    }
    return b;
}

}  // namespace cvborn
