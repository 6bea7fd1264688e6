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

#include <Eigen/Dense>
#include <cmath>
#include <cstdlib>
#include <mutex>
#include <optional>
#include <sstream>
#include <thread>
#include <vector>

#include "cvborn/brent.hpp"
#include "cvborn/fock.hpp"
#include "cvborn/gates.hpp"
#include "cvborn/hermite.hpp"
#include "cvborn/rng.hpp"

namespace cvborn {

// ---------------------------------------------------------------------------
// Error function
// ---------------------------------------------------------------------------

enum class ErfMode {
    Approximate,  // Abramowitz-Stegun 7.1.25 rational form, |error| <= 2.5e-5
    Accurate,     // full-precision reference, for oracle-grade checks
};

/// Abramowitz-Stegun 7.1.25 rational approximation of erf, extended to
/// negative arguments through the exact odd symmetry.
inline double erf_approx(double t) {
    constexpr double p = 0.47047;
    constexpr double a1 = 0.3480242;
    constexpr double a2 = -0.0958798;
    constexpr double a3 = 0.7478556;
    const double x = std::abs(t);
    const double u = 1.0 / (1.0 + p * x);
    const double value = 1.0 - (a1 * u + a2 * u * u + a3 * u * u * u) * std::exp(-x * x);
    return t < 0.0 ? -value : value;
}

inline double erf_eval(double t, ErfMode mode) {
    return mode == ErfMode::Approximate ? erf_approx(t) : std::erf(t);
}

// ---------------------------------------------------------------------------
// Single-mode position distribution
// ---------------------------------------------------------------------------

/// Polynomial data of one mode's position distribution in natural units:
/// density p(x) = Q(x) e^{-x^2}, CDF F(t) = (erf(t)+1)/2 - e^{-t^2} A(t).
struct ModeDistribution {
    std::vector<double> q_coeffs;
    std::vector<double> a_coeffs;
    double hbar = 2.0;
};

namespace detail {

/// Everything that depends only on the cutoff: products of normalized Hermite
/// polynomial parts, and the split of the Gaussian moment integrals
/// int_{-inf}^t x^k e^{-x^2} dx = gauss_k (erf(t)+1)/2 - e^{-t^2} poly_k(t).
struct CdfTables {
    int cutoff = 0;
    std::vector<std::vector<double>> products;  // products[n * cutoff + m] = coeffs of h_n h_m
    std::vector<double> gauss;                  // gauss_k
    std::vector<std::vector<double>> polys;     // poly_k coefficients

    explicit CdfTables(int c) : cutoff(c) {
        const auto normalized = normalized_hermite_table(c);
        products.resize(static_cast<std::size_t>(c) * static_cast<std::size_t>(c));
        for (int n = 0; n < c; ++n) {
            for (int m = n; m < c; ++m) {
                auto prod = poly_multiply(normalized[static_cast<std::size_t>(n)],
                                          normalized[static_cast<std::size_t>(m)]);
                products[static_cast<std::size_t>(n * c + m)] = prod;
                products[static_cast<std::size_t>(m * c + n)] = std::move(prod);
            }
        }
        const int max_degree = 2 * c - 2;
        gauss.resize(static_cast<std::size_t>(max_degree) + 1);
        polys.resize(static_cast<std::size_t>(max_degree) + 1);
        gauss[0] = std::sqrt(M_PI);
        polys[0] = {};
        if (max_degree >= 1) {
            gauss[1] = 0.0;
            polys[1] = {0.5};
        }
        for (int k = 2; k <= max_degree; ++k) {
            const double factor = 0.5 * (k - 1);
            gauss[static_cast<std::size_t>(k)] = factor * gauss[static_cast<std::size_t>(k - 2)];
            std::vector<double> poly(static_cast<std::size_t>(k), 0.0);
            const auto& lower = polys[static_cast<std::size_t>(k - 2)];
            for (std::size_t i = 0; i < lower.size(); ++i) poly[i] = factor * lower[i];
            poly[static_cast<std::size_t>(k - 1)] += 0.5;  // t^{k-1}/2 term
            polys[static_cast<std::size_t>(k)] = std::move(poly);
        }
    }
};

inline ModeDistribution mode_distribution_with_tables(const cxmat& rho1, double hbar,
                                                      const CdfTables& tables) {
    const int c = tables.cutoff;
    if (rho1.rows() != c || rho1.cols() != c) {
        throw ValidationError("mode_distribution: matrix does not match cutoff");
    }
    std::vector<double> q(static_cast<std::size_t>(2 * c - 1), 0.0);
    for (int n = 0; n < c; ++n) {
        const auto& diag_prod = tables.products[static_cast<std::size_t>(n * c + n)];
        const double w = rho1(n, n).real();
        for (std::size_t i = 0; i < diag_prod.size(); ++i) q[i] += w * diag_prod[i];
        for (int m = n + 1; m < c; ++m) {
            const double w2 = 2.0 * rho1(n, m).real();  // hermiticity folds (m, n)
            if (w2 == 0.0) continue;
            const auto& prod = tables.products[static_cast<std::size_t>(n * c + m)];
            for (std::size_t i = 0; i < prod.size(); ++i) q[i] += w2 * prod[i];
        }
    }

    // Integrate Q(x)e^{-x^2} termwise; `mass` is the total integral and equals
    // the trace, so dividing by it pins F(-inf) = 0 and F(+inf) = 1 exactly.
    double mass = 0.0;
    std::vector<double> a(q.size() >= 2 ? q.size() - 2 : std::size_t{0}, 0.0);
    if (q.size() == 1) a.assign(1, 0.0);
    for (std::size_t k = 0; k < q.size(); ++k) {
        if (q[k] == 0.0) continue;
        mass += q[k] * tables.gauss[k];
        const auto& poly = tables.polys[k];
        if (poly.size() > a.size()) a.resize(poly.size(), 0.0);
        for (std::size_t i = 0; i < poly.size(); ++i) a[i] += q[k] * poly[i];
    }
    if (mass <= 1e-14) {
        throw SimulationError("mode_distribution: distribution mass <= 1e-14");
    }
    for (double& v : q) v /= mass;
    for (double& v : a) v /= mass;
    return ModeDistribution{std::move(q), std::move(a), hbar};
}

}  // namespace detail

/// Expands the Born-rule position density of a normalized single-mode density
/// matrix into p(x) = Q(x)e^{-x^2} and its closed-form CDF polynomial A.
/// All polynomial work happens in natural units (hbar = 1); `hbar` is carried
/// along only for the output scaling.
inline ModeDistribution mode_distribution(const cxmat& rho1, double hbar = 2.0) {
    detail::CdfTables tables(static_cast<int>(rho1.rows()));
    return detail::mode_distribution_with_tables(rho1, hbar, tables);
}

inline ModeDistribution mode_distribution(const DensityMatrix& rho, double hbar = 2.0) {
    if (rho.basis->modes() != 1) {
        throw ValidationError("mode_distribution: expected a single-mode state");
    }
    return mode_distribution(rho.entries, hbar);
}

/// Alternative construction of the CDF polynomial A through the closed-form
/// coefficient tables
///   B_{n,m} = (n! C_{n,m} + (1 - delta_{n,m}) n! 2^n H_{m-n-1})
///             / sqrt(2^{n+m} n! m! pi),
///   C_{n,m} = sum_{k=0}^{n-1} 2^k/(n-k)! (H_{n-k} * H_{m-k-1}),
/// with Hermite polynomials of negative degree read as zero and B taken
/// symmetric (B_{n,m} = B_{m,n} for n > m, folding the Hermitian matrix).
/// Serves as an independent cross-check of the termwise integration above.
inline std::vector<double> a_coefficients_closed_form(const cxmat& rho1) {
    const int c = static_cast<int>(rho1.rows());
    std::vector<std::vector<double>> hermite(static_cast<std::size_t>(c));
    for (int n = 0; n < c; ++n) hermite[static_cast<std::size_t>(n)] = hermite_coefficients(n);
    const auto hermite_or_zero = [&](int degree) -> std::vector<double> {
        if (degree < 0) return {};
        if (degree < c) return hermite[static_cast<std::size_t>(degree)];
        return hermite_coefficients(degree);
    };

    const auto b_table = [&](int n, int m) {
        std::vector<double> numerator;
        const double n_factorial = std::tgamma(n + 1.0);
        for (int k = 0; k < n; ++k) {
            const auto left = hermite_or_zero(n - k);
            const auto right = hermite_or_zero(m - k - 1);
            if (left.empty() || right.empty()) continue;
            auto term = poly_multiply(left, right);
            const double factor =
                n_factorial * std::pow(2.0, k) / std::tgamma(static_cast<double>(n - k) + 1.0);
            if (term.size() > numerator.size()) numerator.resize(term.size(), 0.0);
            for (std::size_t i = 0; i < term.size(); ++i) numerator[i] += factor * term[i];
        }
        if (n != m) {
            const auto delta_term = hermite_or_zero(m - n - 1);
            const double factor = n_factorial * std::pow(2.0, n);
            if (delta_term.size() > numerator.size()) numerator.resize(delta_term.size(), 0.0);
            for (std::size_t i = 0; i < delta_term.size(); ++i) {
                numerator[i] += factor * delta_term[i];
            }
        }
        const double denom = std::sqrt(std::pow(2.0, n + m) * std::tgamma(n + 1.0) *
                                       std::tgamma(m + 1.0) * M_PI);
        for (double& v : numerator) v /= denom;
        return numerator;
    };

    std::vector<double> a;
    const auto accumulate = [&](const std::vector<double>& poly, double weight) {
        if (poly.size() > a.size()) a.resize(poly.size(), 0.0);
        for (std::size_t i = 0; i < poly.size(); ++i) a[i] += weight * poly[i];
    };
    for (int n = 0; n < c; ++n) {
        accumulate(b_table(n, n), rho1(n, n).real());
        for (int m = n + 1; m < c; ++m) {
            accumulate(b_table(n, m), 2.0 * rho1(n, m).real());
        }
    }
    if (a.empty()) a.assign(1, 0.0);
    return a;
}

/// Density value Q(t) e^{-t^2} in natural units.
inline double pdf_eval(const ModeDistribution& dist, double t) {
    return poly_eval(dist.q_coeffs, t) * std::exp(-t * t);
}

/// CDF value F(t) = (erf(t)+1)/2 - e^{-t^2} A(t), clamped to [0, 1].
inline double cdf_eval(const ModeDistribution& dist, double t,
                       ErfMode erf_mode = ErfMode::Approximate) {
    const double value = 0.5 * (erf_eval(t, erf_mode) + 1.0)
                         - std::exp(-t * t) * poly_eval(dist.a_coeffs, t);
    return std::clamp(value, 0.0, 1.0);
}

/// Solves F(t) = alpha by symmetric bracket doubling from [-1, 1] followed by
/// Brent's method (guaranteed convergence on the bracket).
inline double invert_cdf(const ModeDistribution& dist, double alpha,
                         ErfMode erf_mode = ErfMode::Approximate) {
    if (!(alpha > 0.0 && alpha < 1.0)) {
        throw ValidationError("invert_cdf: alpha must lie strictly inside (0, 1)");
    }
    constexpr double bracket_cap = 64.0;
    double lo = -1.0;
    while (cdf_eval(dist, lo, erf_mode) > alpha) {
        lo *= 2.0;
        if (lo < -bracket_cap) {
            throw SimulationError("invert_cdf: no bracket within |t| <= 64; distribution is pathological");
        }
    }
    double hi = 1.0;
    while (cdf_eval(dist, hi, erf_mode) < alpha) {
        hi *= 2.0;
        if (hi > bracket_cap) {
            throw SimulationError("invert_cdf: no bracket within |t| <= 64; distribution is pathological");
        }
    }
    return brent_root([&](double t) { return cdf_eval(dist, t, erf_mode) - alpha; }, lo, hi,
                      BrentOptions{1e-12, 1e-10, 200});
}

// ---------------------------------------------------------------------------
// Conditional single-mode states
// ---------------------------------------------------------------------------

/// Single-mode conditional density matrix of `mode`, given physical-unit
/// position samples for all earlier modes: later modes are traced out, earlier
/// modes are contracted against their position wavefunction vectors, and the
/// result is normalized to unit trace.
inline DensityMatrix conditional_density(const DensityMatrix& rho,
                                         const std::vector<double>& prior_samples, int mode,
                                         double hbar) {
    const FockBasis& basis = *rho.basis;
    const int d = basis.modes();
    const int c = basis.cutoff();
    if (mode < 0 || mode >= d) throw ValidationError("conditional_density: mode out of range");
    if (static_cast<int>(prior_samples.size()) != mode) {
        throw ValidationError("conditional_density: need exactly one prior sample per earlier mode");
    }
    if (hbar <= 0.0) throw ValidationError("conditional_density: hbar must be positive");

    const DensityMatrix* reduced = &rho;
    DensityMatrix storage;
    if (mode < d - 1) {
        std::vector<int> keep(static_cast<std::size_t>(mode) + 1);
        for (int m = 0; m <= mode; ++m) keep[static_cast<std::size_t>(m)] = m;
        storage = partial_trace(rho, keep);
        reduced = &storage;
    }

    const FockBasis& red_basis = *reduced->basis;
    const std::int64_t dim = red_basis.dimension();

    // Per-mode wavefunction values at the sampled positions, L2-normalized so
    // the conditional trace measures degeneracy relative to the prefix
    // likelihood rather than its absolute density.
    std::vector<std::vector<double>> psi(static_cast<std::size_t>(mode));
    for (int j = 0; j < mode; ++j) {
        auto& values = psi[static_cast<std::size_t>(j)];
        wavefunction_values(c, prior_samples[static_cast<std::size_t>(j)] / std::sqrt(hbar), values);
        double norm = 0.0;
        for (double v : values) norm += v * v;
        norm = std::sqrt(norm);
        if (norm > 0.0) {
            for (double& v : values) v /= norm;
        }
    }

    std::vector<double> weight(static_cast<std::size_t>(dim));
    std::vector<int> head(static_cast<std::size_t>(dim));
    for (std::int64_t i = 0; i < dim; ++i) {
        const OccupationVector& occ = red_basis.occupation_of(i);
        double w = 1.0;
        for (int j = 0; j < mode; ++j) {
            w *= psi[static_cast<std::size_t>(j)][static_cast<std::size_t>(occ[static_cast<std::size_t>(j)])];
        }
        weight[static_cast<std::size_t>(i)] = w;
        head[static_cast<std::size_t>(i)] = occ.back();
    }

    cxmat m = cxmat::Zero(c, c);
    for (std::int64_t i = 0; i < dim; ++i) {
        const double wi = weight[static_cast<std::size_t>(i)];
        if (wi == 0.0) continue;
        for (std::int64_t j = 0; j < dim; ++j) {
            m(head[static_cast<std::size_t>(i)], head[static_cast<std::size_t>(j)]) +=
                wi * weight[static_cast<std::size_t>(j)] * reduced->entries(i, j);
        }
    }
    const double trace = m.trace().real();
    if (trace <= 1e-14) {
        throw SimulationError("conditional_density: conditional trace <= 1e-14 (zero-density region)");
    }
    m /= trace;
    m = 0.5 * (m + cxmat(m.adjoint()));
    return DensityMatrix{make_basis({1, c}), std::move(m)};
}

// ---------------------------------------------------------------------------
// Mode-by-mode sampling
// ---------------------------------------------------------------------------

/// shots x modes matrix of position samples in physical (hbar-scaled) units.
struct SampleMatrix {
    Eigen::MatrixXd values;

    Eigen::Index shots() const { return values.rows(); }
    Eigen::Index modes() const { return values.cols(); }
};

struct SampleOptions {
    double hbar = 2.0;
    std::uint64_t seed = 12345;
    std::vector<double> angles;  // optional per-mode measurement angles
    ErfMode erf_mode = ErfMode::Approximate;
    int threads = 0;  // 0: CVBORN_THREADS env var, else hardware concurrency
};

namespace detail {

inline int resolve_thread_count(int requested, std::int64_t shots) {
    int threads = requested;
    if (threads <= 0) {
        if (const char* env = std::getenv("CVBORN_THREADS")) {
            threads = std::atoi(env);
        }
    }
    if (threads <= 0) {
        threads = static_cast<int>(std::thread::hardware_concurrency());
    }
    if (threads < 1) threads = 1;
    return static_cast<int>(std::min<std::int64_t>(threads, std::max<std::int64_t>(shots, 1)));
}

template <typename ShotBody>
inline void run_shots(std::int64_t shots, int threads, ShotBody&& body) {
    if (threads <= 1) {
        for (std::int64_t shot = 0; shot < shots; ++shot) body(shot, 0);
        return;
    }
    std::vector<std::thread> pool;
    pool.reserve(static_cast<std::size_t>(threads));
    for (int t = 0; t < threads; ++t) {
        pool.emplace_back([&, t] {
            for (std::int64_t shot = t; shot < shots; shot += threads) body(shot, t);
        });
    }
    for (auto& th : pool) th.join();
}

/// Lexicon shared by both sampling paths: per mode i, how each basis state of
/// modes 0..i splits into (prefix rank, occupation of mode i), plus, for the
/// pure path, the tail rank of modes i+1..d-1 for every global state.
struct SamplingPlan {
    int modes = 0;
    int cutoff = 0;
    double hbar = 2.0;
    std::vector<std::shared_ptr<const FockBasis>> partial_bases;  // modes 0..i, i = 0..d-1
    std::vector<LastModeSplit> splits;                            // split of partial_bases[i]
    std::vector<std::int64_t> prefix_dims;                        // dim of modes 0..i-1

    SamplingPlan(const FockBasis& basis, double hbar_in) {
        modes = basis.modes();
        cutoff = basis.cutoff();
        hbar = hbar_in;
        partial_bases.reserve(static_cast<std::size_t>(modes));
        for (int i = 0; i < modes; ++i) {
            partial_bases.push_back(make_basis({i + 1, cutoff}));
        }
        splits.resize(static_cast<std::size_t>(modes));
        prefix_dims.resize(static_cast<std::size_t>(modes));
        prefix_dims[0] = 1;
        for (int i = 1; i < modes; ++i) {
            splits[static_cast<std::size_t>(i)] =
                split_last_mode(*partial_bases[static_cast<std::size_t>(i)],
                                *partial_bases[static_cast<std::size_t>(i - 1)]);
            prefix_dims[static_cast<std::size_t>(i)] =
                partial_bases[static_cast<std::size_t>(i - 1)]->dimension();
        }
        if (modes >= 1) {
            // trivial split for mode 0: prefix rank 0, head = occupation
            auto& split0 = splits[0];
            const FockBasis& b0 = *partial_bases[0];
            split0.prefix_rank.assign(static_cast<std::size_t>(b0.dimension()), 0);
            split0.last_occupation.resize(static_cast<std::size_t>(b0.dimension()));
            for (std::int64_t i = 0; i < b0.dimension(); ++i) {
                split0.last_occupation[static_cast<std::size_t>(i)] = b0.occupation_of(i)[0];
            }
        }
    }

    /// Extends the prefix weight vector after sampling natural coordinate t on
    /// mode i, normalizing to unit L2 so conditional traces stay O(1).
    void extend_prefix(int i, double t, const Eigen::VectorXd& pw, Eigen::VectorXd& out,
                       std::vector<double>& psi_scratch) const {
        wavefunction_values(cutoff, t, psi_scratch);
        const FockBasis& b = *partial_bases[static_cast<std::size_t>(i)];
        const LastModeSplit& split = splits[static_cast<std::size_t>(i)];
        out.resize(b.dimension());
        for (std::int64_t a = 0; a < b.dimension(); ++a) {
            out(a) = pw(split.prefix_rank[static_cast<std::size_t>(a)]) *
                     psi_scratch[static_cast<std::size_t>(split.last_occupation[static_cast<std::size_t>(a)])];
        }
        const double norm = out.norm();
        if (norm > 0.0) out /= norm;
    }
};

inline cxmat conditional_from_pairs(const cxmat& m_raw, std::int64_t shot, int mode) {
    const double trace = m_raw.trace().real();
    if (trace <= 1e-14) {
        std::ostringstream msg;
        msg << "sample_homodyne: degenerate conditional state at shot " << shot << ", mode "
            << mode << " (trace " << trace << ")";
        throw SimulationError(msg.str());
    }
    cxmat m = m_raw / trace;
    m = 0.5 * (m + cxmat(m.adjoint()));
    return m;
}

inline double draw_position(const ModeDistribution& dist, std::uint64_t seed, std::int64_t shot,
                            int mode, ErfMode erf_mode) {
    const double alpha = uniform_open(seed, static_cast<std::uint64_t>(shot),
                                      static_cast<std::uint64_t>(mode));
    try {
        return invert_cdf(dist, alpha, erf_mode);
    } catch (const SimulationError& err) {
        std::ostringstream msg;
        msg << err.what() << " (shot " << shot << ", mode " << mode << ")";
        throw SimulationError(msg.str());
    }
}

}  // namespace detail

/// Homodyne sampling of a general (mixed) state: the reduced state of modes
/// 0..i is contracted against the sampled prefix wavefunctions to produce each
/// conditional, an O(dim^2) pass per mode and shot.
inline SampleMatrix sample_homodyne(const DensityMatrix& rho, std::int64_t shots,
                                    const SampleOptions& options = {}) {
    if (shots < 1) throw ValidationError("sample_homodyne: shots must be >= 1");
    if (options.hbar <= 0.0) throw ValidationError("sample_homodyne: hbar must be positive");
    const FockBasis& basis = *rho.basis;
    const int d = basis.modes();
    const int c = basis.cutoff();

    DensityMatrix state = rho;
    if (!options.angles.empty()) {
        if (static_cast<int>(options.angles.size()) != d) {
            throw ValidationError("sample_homodyne: need one angle per mode");
        }
        // measuring x_phi equals pre-rotating by R(-phi) and measuring x
        cxvec phase(basis.dimension());
        for (std::int64_t i = 0; i < basis.dimension(); ++i) {
            const OccupationVector& occ = basis.occupation_of(i);
            double angle = 0.0;
            for (int m = 0; m < d; ++m) {
                angle -= options.angles[static_cast<std::size_t>(m)] * occ[static_cast<std::size_t>(m)];
            }
            phase(i) = std::polar(1.0, angle);
        }
        state.entries = phase.asDiagonal() * state.entries * phase.conjugate().asDiagonal();
    }

    detail::SamplingPlan plan(basis, options.hbar);
    detail::CdfTables tables(c);

    // Reduced states of modes 0..i, computed once; the head-major grouped
    // copies let each conditional be a blocked quadratic form in the prefix
    // weights (the paper's O(n_i^2) contraction loop).
    std::vector<cxmat> grouped(static_cast<std::size_t>(d));
    std::vector<std::vector<std::int64_t>> offsets(static_cast<std::size_t>(d));
    {
        cxmat reduced = state.entries;
        for (int i = d - 1; i >= 0; --i) {
            const FockBasis& b = *plan.partial_bases[static_cast<std::size_t>(i)];
            const detail::LastModeSplit& split = plan.splits[static_cast<std::size_t>(i)];
            // group position of basis state a: offset(head) + prefix_rank
            std::vector<std::int64_t> off(static_cast<std::size_t>(c) + 1, 0);
            for (int h = 0; h < c; ++h) {
                const std::int64_t block =
                    i == 0 ? 1 : binomial_i(i + (c - h) - 1, i);  // prefix states with total < c-h
                off[static_cast<std::size_t>(h) + 1] = off[static_cast<std::size_t>(h)] + block;
            }
            std::vector<std::int64_t> position(static_cast<std::size_t>(b.dimension()));
            for (std::int64_t a = 0; a < b.dimension(); ++a) {
                position[static_cast<std::size_t>(a)] =
                    off[static_cast<std::size_t>(split.last_occupation[static_cast<std::size_t>(a)])] +
                    split.prefix_rank[static_cast<std::size_t>(a)];
            }
            cxmat g(b.dimension(), b.dimension());
            for (std::int64_t a = 0; a < b.dimension(); ++a) {
                for (std::int64_t bb = 0; bb < b.dimension(); ++bb) {
                    g(position[static_cast<std::size_t>(a)], position[static_cast<std::size_t>(bb)]) =
                        reduced(a, bb);
                }
            }
            grouped[static_cast<std::size_t>(i)] = std::move(g);
            offsets[static_cast<std::size_t>(i)] = std::move(off);
            if (i > 0) {
                reduced = detail::trace_out_last(reduced, b,
                                                 *plan.partial_bases[static_cast<std::size_t>(i - 1)],
                                                 split);
            }
        }
    }

    // Mode 0 has no conditioning, so its distribution is shot-independent.
    const ModeDistribution dist0 = detail::mode_distribution_with_tables(
        detail::conditional_from_pairs(grouped[0], -1, 0), plan.hbar, tables);

    SampleMatrix samples;
    samples.values.resize(shots, d);
    const double scale = std::sqrt(plan.hbar);
    const int threads = detail::resolve_thread_count(options.threads, shots);

    std::exception_ptr failure;
    std::mutex failure_mutex;
    detail::run_shots(shots, threads, [&](std::int64_t shot, int) {
        try {
            Eigen::VectorXd pw = Eigen::VectorXd::Ones(1);
            Eigen::VectorXd pw_next;
            std::vector<double> psi_scratch;
            cxmat m(c, c);
            cxvec pwc, column;
            for (int i = 0; i < d; ++i) {
                double t = 0.0;
                if (i == 0) {
                    t = detail::draw_position(dist0, options.seed, shot, 0, options.erf_mode);
                } else {
                    const cxmat& g = grouped[static_cast<std::size_t>(i)];
                    const auto& off = offsets[static_cast<std::size_t>(i)];
                    pwc = pw.cast<complex>();
                    column.resize(g.rows());
                    m.setZero();
                    for (int hc = 0; hc < c; ++hc) {
                        const std::int64_t len_c = off[static_cast<std::size_t>(hc) + 1] -
                                                   off[static_cast<std::size_t>(hc)];
                        if (len_c <= 0) continue;
                        column.noalias() =
                            g.middleCols(off[static_cast<std::size_t>(hc)], len_c) * pwc.head(len_c);
                        for (int hr = 0; hr < c; ++hr) {
                            const std::int64_t len_r = off[static_cast<std::size_t>(hr) + 1] -
                                                       off[static_cast<std::size_t>(hr)];
                            if (len_r <= 0) continue;
                            m(hr, hc) = pwc.head(len_r).dot(
                                column.segment(off[static_cast<std::size_t>(hr)], len_r));
                        }
                    }
                    const ModeDistribution dist = detail::mode_distribution_with_tables(
                        detail::conditional_from_pairs(m, shot, i), plan.hbar, tables);
                    t = detail::draw_position(dist, options.seed, shot, i, options.erf_mode);
                }
                samples.values(shot, i) = scale * t;
                if (i + 1 < d) {
                    plan.extend_prefix(i, t, pw, pw_next, psi_scratch);
                    std::swap(pw, pw_next);
                }
            }
        } catch (...) {
            std::lock_guard<std::mutex> lock(failure_mutex);
            if (!failure) failure = std::current_exception();
        }
    });
    if (failure) std::rethrow_exception(failure);
    return samples;
}

/// Homodyne sampling of a pure state. The conditional of mode i given the
/// sampled prefix decomposes over the occupations of the not-yet-measured
/// tail modes into a sum of rank-one terms, so each conditional costs one
/// pass over the global amplitude vector instead of a quadratic contraction.
inline SampleMatrix sample_homodyne(const PureState& psi, std::int64_t shots,
                                    const SampleOptions& options = {}) {
    if (shots < 1) throw ValidationError("sample_homodyne: shots must be >= 1");
    if (options.hbar <= 0.0) throw ValidationError("sample_homodyne: hbar must be positive");
    const FockBasis& basis = *psi.basis;
    const int d = basis.modes();
    const int c = basis.cutoff();
    const std::int64_t dim = basis.dimension();

    cxvec amplitudes = psi.amplitudes;
    if (!options.angles.empty()) {
        if (static_cast<int>(options.angles.size()) != d) {
            throw ValidationError("sample_homodyne: need one angle per mode");
        }
        for (std::int64_t i = 0; i < dim; ++i) {
            const OccupationVector& occ = basis.occupation_of(i);
            double angle = 0.0;
            for (int m = 0; m < d; ++m) {
                angle -= options.angles[static_cast<std::size_t>(m)] * occ[static_cast<std::size_t>(m)];
            }
            amplitudes(i) *= std::polar(1.0, angle);
        }
    }

    detail::SamplingPlan plan(basis, options.hbar);
    detail::CdfTables tables(c);

    // Per mode i: prefix rank (modes 0..i-1), occupation of mode i, and tail
    // rank (modes i+1..d-1) of every global basis state.
    struct ModeView {
        std::vector<std::int64_t> prefix_rank;
        std::vector<int> head;
        std::vector<std::int64_t> tail_rank;
        std::int64_t tail_dim = 1;
    };
    std::vector<ModeView> views(static_cast<std::size_t>(d));
    {
        OccupationVector prefix, tail;
        for (int i = 0; i < d; ++i) {
            ModeView& view = views[static_cast<std::size_t>(i)];
            view.prefix_rank.resize(static_cast<std::size_t>(dim));
            view.head.resize(static_cast<std::size_t>(dim));
            view.tail_rank.resize(static_cast<std::size_t>(dim));
            std::optional<FockBasis> prefix_basis;
            std::optional<FockBasis> tail_basis;
            if (i > 0) prefix_basis.emplace(CutoffSpec{i, c});
            if (i < d - 1) {
                tail_basis.emplace(CutoffSpec{d - 1 - i, c});
                view.tail_dim = tail_basis->dimension();
            }
            for (std::int64_t g = 0; g < dim; ++g) {
                const OccupationVector& occ = basis.occupation_of(g);
                view.head[static_cast<std::size_t>(g)] = occ[static_cast<std::size_t>(i)];
                if (prefix_basis) {
                    prefix.assign(occ.begin(), occ.begin() + i);
                    view.prefix_rank[static_cast<std::size_t>(g)] = prefix_basis->index_of(prefix);
                } else {
                    view.prefix_rank[static_cast<std::size_t>(g)] = 0;
                }
                if (tail_basis) {
                    tail.assign(occ.begin() + i + 1, occ.end());
                    view.tail_rank[static_cast<std::size_t>(g)] = tail_basis->index_of(tail);
                } else {
                    view.tail_rank[static_cast<std::size_t>(g)] = 0;
                }
            }
        }
    }

    // Mode 0 distribution is shot-independent: V(h, t) = sum of amplitudes.
    ModeDistribution dist0{{}, {}, options.hbar};
    {
        cxmat v = cxmat::Zero(c, views[0].tail_dim);
        for (std::int64_t g = 0; g < dim; ++g) {
            v(views[0].head[static_cast<std::size_t>(g)],
              views[0].tail_rank[static_cast<std::size_t>(g)]) += amplitudes(g);
        }
        cxmat m = v * v.adjoint();
        dist0 = detail::mode_distribution_with_tables(detail::conditional_from_pairs(m, -1, 0),
                                                      options.hbar, tables);
    }

    SampleMatrix samples;
    samples.values.resize(shots, d);
    const double scale = std::sqrt(options.hbar);
    const int threads = detail::resolve_thread_count(options.threads, shots);

    std::exception_ptr failure;
    std::mutex failure_mutex;
    detail::run_shots(shots, threads, [&](std::int64_t shot, int) {
        try {
            Eigen::VectorXd pw = Eigen::VectorXd::Ones(1);
            Eigen::VectorXd pw_next;
            std::vector<double> psi_scratch;
            cxmat v, m;
            for (int i = 0; i < d; ++i) {
                double t = 0.0;
                if (i == 0) {
                    t = detail::draw_position(dist0, options.seed, shot, 0, options.erf_mode);
                } else {
                    const ModeView& view = views[static_cast<std::size_t>(i)];
                    v.setZero(c, view.tail_dim);
                    for (std::int64_t g = 0; g < dim; ++g) {
                        const complex a = amplitudes(g);
                        if (a == complex(0.0, 0.0)) continue;
                        v(view.head[static_cast<std::size_t>(g)],
                          view.tail_rank[static_cast<std::size_t>(g)]) +=
                            pw(view.prefix_rank[static_cast<std::size_t>(g)]) * a;
                    }
                    m.noalias() = v * v.adjoint();
                    const ModeDistribution dist = detail::mode_distribution_with_tables(
                        detail::conditional_from_pairs(m, shot, i), options.hbar, tables);
                    t = detail::draw_position(dist, options.seed, shot, i, options.erf_mode);
                }
                samples.values(shot, i) = scale * t;
                if (i + 1 < d) {
                    plan.extend_prefix(i, t, pw, pw_next, psi_scratch);
                    std::swap(pw, pw_next);
                }
            }
        } catch (...) {
            std::lock_guard<std::mutex> lock(failure_mutex);
            if (!failure) failure = std::current_exception();
        }
    });
    if (failure) std::rethrow_exception(failure);
    return samples;
}

// ---------------------------------------------------------------------------
// Joint density evaluation (Born rule at a phase-space point)
// ---------------------------------------------------------------------------

/// p(x) = |<x|psi>|^2 at a physical-unit position vector.
inline double eval_joint_density(const PureState& psi, const std::vector<double>& point,
                                 double hbar) {
    const FockBasis& basis = *psi.basis;
    const int d = basis.modes();
    if (static_cast<int>(point.size()) != d) {
        throw ValidationError("eval_joint_density: point dimension mismatch");
    }
    const int c = basis.cutoff();
    std::vector<std::vector<double>> psi_values(static_cast<std::size_t>(d));
    for (int m = 0; m < d; ++m) {
        psi_values[static_cast<std::size_t>(m)].resize(static_cast<std::size_t>(c));
        for (int n = 0; n < c; ++n) {
            psi_values[static_cast<std::size_t>(m)][static_cast<std::size_t>(n)] =
                wavefunction(n, point[static_cast<std::size_t>(m)], hbar);
        }
    }
    complex overlap = 0.0;
    for (std::int64_t g = 0; g < basis.dimension(); ++g) {
        const OccupationVector& occ = basis.occupation_of(g);
        double w = 1.0;
        for (int m = 0; m < d; ++m) {
            w *= psi_values[static_cast<std::size_t>(m)][static_cast<std::size_t>(occ[static_cast<std::size_t>(m)])];
        }
        overlap += w * psi.amplitudes(g);
    }
    return std::norm(overlap);
}

/// p(x) = Tr[rho |x><x|] at a physical-unit position vector.
inline double eval_joint_density(const DensityMatrix& rho, const std::vector<double>& point,
                                 double hbar) {
    const FockBasis& basis = *rho.basis;
    const int d = basis.modes();
    if (static_cast<int>(point.size()) != d) {
        throw ValidationError("eval_joint_density: point dimension mismatch");
    }
    const int c = basis.cutoff();
    std::vector<std::vector<double>> psi_values(static_cast<std::size_t>(d));
    for (int m = 0; m < d; ++m) {
        psi_values[static_cast<std::size_t>(m)].resize(static_cast<std::size_t>(c));
        for (int n = 0; n < c; ++n) {
            psi_values[static_cast<std::size_t>(m)][static_cast<std::size_t>(n)] =
                wavefunction(n, point[static_cast<std::size_t>(m)], hbar);
        }
    }
    Eigen::VectorXd w(basis.dimension());
    for (std::int64_t g = 0; g < basis.dimension(); ++g) {
        const OccupationVector& occ = basis.occupation_of(g);
        double value = 1.0;
        for (int m = 0; m < d; ++m) {
            value *= psi_values[static_cast<std::size_t>(m)][static_cast<std::size_t>(occ[static_cast<std::size_t>(m)])];
        }
        w(g) = value;
    }
    const complex result = w.cast<complex>().dot(rho.entries * w.cast<complex>());
    return result.real();
}

}  // namespace cvborn
