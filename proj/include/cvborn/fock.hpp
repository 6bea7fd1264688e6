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
#include <algorithm>
#include <memory>
#include <numeric>
#include <sstream>
#include <vector>

#include "cvborn/common.hpp"

namespace cvborn {

using cxvec = Eigen::VectorXcd;
using cxmat = Eigen::MatrixXcd;

/// Truncated multimode Fock space: `modes` optical modes, total photon
/// number strictly below `cutoff`.
struct CutoffSpec {
    int modes = 1;
    int cutoff = 1;

    friend bool operator==(const CutoffSpec&, const CutoffSpec&) = default;
};

inline void validate(const CutoffSpec& spec) {
    if (spec.modes < 1) throw ValidationError("CutoffSpec: modes must be >= 1");
    if (spec.cutoff < 1) throw ValidationError("CutoffSpec: cutoff must be >= 1");
}

using OccupationVector = std::vector<int>;

/// dim = C(d + c - 1, d) for d modes with total occupation < c.
inline std::int64_t space_dimension(const CutoffSpec& spec) {
    validate(spec);
    return binomial_i(spec.modes + spec.cutoff - 1, spec.modes);
}

namespace detail {

inline void enumerate_compositions(int total, int modes, OccupationVector& scratch,
                                   std::vector<OccupationVector>& out) {
    const int pos = static_cast<int>(scratch.size());
    if (pos == modes - 1) {
        scratch.push_back(total);
        out.push_back(scratch);
        scratch.pop_back();
        return;
    }
    for (int v = 0; v <= total; ++v) {
        scratch.push_back(v);
        enumerate_compositions(total - v, modes, scratch, out);
        scratch.pop_back();
    }
}

}  // namespace detail

/// All occupation vectors with sum < cutoff, ordered by total photon number
/// first and lexicographically within each total.
inline std::vector<OccupationVector> enumerate_basis(const CutoffSpec& spec) {
    validate(spec);
    std::vector<OccupationVector> out;
    out.reserve(static_cast<std::size_t>(space_dimension(spec)));
    OccupationVector scratch;
    for (int total = 0; total < spec.cutoff; ++total) {
        detail::enumerate_compositions(total, spec.modes, scratch, out);
    }
    return out;
}

/// Bijection between occupation vectors and contiguous indices in the
/// canonical (total-major, lexicographic) ordering. Ranks are computed
/// combinatorially; the enumerated list provides the inverse lookup.
class FockBasis {
public:
    explicit FockBasis(CutoffSpec spec)
        : spec_(spec), states_(enumerate_basis(spec)) {}

    const CutoffSpec& cutoff_spec() const { return spec_; }
    int modes() const { return spec_.modes; }
    int cutoff() const { return spec_.cutoff; }
    std::int64_t dimension() const { return static_cast<std::int64_t>(states_.size()); }

    const std::vector<OccupationVector>& states() const { return states_; }
    const OccupationVector& occupation_of(std::int64_t index) const {
        if (index < 0 || index >= dimension()) {
            throw ValidationError("FockBasis: index out of range");
        }
        return states_[static_cast<std::size_t>(index)];
    }

    /// Rank of `v` in the canonical ordering; rejects out-of-truncation vectors.
    std::int64_t index_of(const OccupationVector& v) const {
        if (static_cast<int>(v.size()) != spec_.modes) {
            throw ValidationError("FockBasis: occupation vector has wrong mode count");
        }
        int total = 0;
        for (int n : v) {
            if (n < 0) throw ValidationError("FockBasis: negative occupation number");
            total += n;
        }
        if (total >= spec_.cutoff) {
            std::ostringstream msg;
            msg << "FockBasis: total occupation " << total
                << " violates truncation (must be < " << spec_.cutoff << ")";
            throw ValidationError(msg.str());
        }
        // States with smaller total precede all states of this total.
        std::int64_t rank = binomial_i(spec_.modes + total - 1, spec_.modes);
        // Lexicographic rank among compositions of `total` into `modes` parts.
        int remaining = total;
        for (int pos = 0; pos + 1 < spec_.modes; ++pos) {
            for (int smaller = 0; smaller < v[static_cast<std::size_t>(pos)]; ++smaller) {
                const int rest = remaining - smaller;
                const int slots = spec_.modes - pos - 1;
                rank += binomial_i(rest + slots - 1, slots - 1);
            }
            remaining -= v[static_cast<std::size_t>(pos)];
        }
        return rank;
    }

private:
    CutoffSpec spec_;
    std::vector<OccupationVector> states_;
};

using BasisPtr = std::shared_ptr<const FockBasis>;

inline BasisPtr make_basis(CutoffSpec spec) {
    return std::make_shared<const FockBasis>(spec);
}

/// Complex amplitude vector over a truncated Fock basis.
struct PureState {
    BasisPtr basis;
    cxvec amplitudes;

    double norm_squared() const { return amplitudes.squaredNorm(); }
};

/// Hermitian, trace-one matrix over a truncated Fock basis.
struct DensityMatrix {
    BasisPtr basis;
    cxmat entries;

    double trace_real() const { return entries.trace().real(); }
};

inline PureState vacuum_state(BasisPtr basis) {
    cxvec amps = cxvec::Zero(basis->dimension());
    amps(0) = 1.0;
    return PureState{std::move(basis), std::move(amps)};
}

inline PureState fock_state(BasisPtr basis, const OccupationVector& occupation) {
    cxvec amps = cxvec::Zero(basis->dimension());
    amps(basis->index_of(occupation)) = 1.0;
    return PureState{std::move(basis), std::move(amps)};
}

inline PureState normalized(PureState state) {
    const double norm = std::sqrt(state.norm_squared());
    if (norm < 1e-14) throw SimulationError("PureState: cannot normalize a zero state");
    state.amplitudes /= norm;
    return state;
}

inline DensityMatrix outer_product(const PureState& state) {
    return DensityMatrix{state.basis, state.amplitudes * state.amplitudes.adjoint()};
}

/// Divides by the trace; rejects traces at or below the degeneracy threshold.
inline DensityMatrix normalize(DensityMatrix rho) {
    const double trace = rho.trace_real();
    if (trace <= 1e-14) {
        throw SimulationError("DensityMatrix: trace <= 1e-14, state is degenerate");
    }
    rho.entries /= trace;
    return rho;
}

struct ValidationTolerances {
    double hermiticity = 1e-10;
    double trace = 1e-10;
    double diagonal_negativity = 1e-12;
};

/// Checks the DensityMatrix invariants and throws on violation; never repairs.
inline void validate(const DensityMatrix& rho, const ValidationTolerances& tol = {}) {
    const cxmat& m = rho.entries;
    if (m.rows() != m.cols() || m.rows() != rho.basis->dimension()) {
        throw ValidationError("DensityMatrix: shape does not match basis dimension");
    }
    if ((m - m.adjoint()).cwiseAbs().maxCoeff() > tol.hermiticity) {
        throw ValidationError("DensityMatrix: not Hermitian within tolerance");
    }
    if (std::abs(m.trace().real() - 1.0) > tol.trace || std::abs(m.trace().imag()) > tol.trace) {
        throw ValidationError("DensityMatrix: trace differs from 1 beyond tolerance");
    }
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
        if (m(i, i).real() < -tol.diagonal_negativity) {
            throw ValidationError("DensityMatrix: negative diagonal entry");
        }
    }
}

/// Reduced density matrix on `keep_modes` (ascending mode indices), same cutoff.
inline DensityMatrix partial_trace(const DensityMatrix& rho, const std::vector<int>& keep_modes) {
    const FockBasis& basis = *rho.basis;
    const int d = basis.modes();
    if (keep_modes.empty()) throw ValidationError("partial_trace: keep_modes must be non-empty");
    if (!std::is_sorted(keep_modes.begin(), keep_modes.end()) ||
        std::adjacent_find(keep_modes.begin(), keep_modes.end()) != keep_modes.end()) {
        throw ValidationError("partial_trace: keep_modes must be strictly ascending");
    }
    for (int m : keep_modes) {
        if (m < 0 || m >= d) throw ValidationError("partial_trace: mode index out of range");
    }

    std::vector<bool> keep(static_cast<std::size_t>(d), false);
    for (int m : keep_modes) keep[static_cast<std::size_t>(m)] = true;

    auto out_basis = make_basis({static_cast<int>(keep_modes.size()), basis.cutoff()});
    const std::int64_t dim = basis.dimension();

    // Split every basis state into (kept part index, traced part) once.
    std::vector<std::int64_t> kept_index(static_cast<std::size_t>(dim));
    std::vector<OccupationVector> traced_part(static_cast<std::size_t>(dim));
    OccupationVector kept_occ(keep_modes.size());
    for (std::int64_t i = 0; i < dim; ++i) {
        const OccupationVector& occ = basis.occupation_of(i);
        OccupationVector traced;
        std::size_t k = 0;
        for (int m = 0; m < d; ++m) {
            if (keep[static_cast<std::size_t>(m)]) {
                kept_occ[k++] = occ[static_cast<std::size_t>(m)];
            } else {
                traced.push_back(occ[static_cast<std::size_t>(m)]);
            }
        }
        kept_index[static_cast<std::size_t>(i)] = out_basis->index_of(kept_occ);
        traced_part[static_cast<std::size_t>(i)] = std::move(traced);
    }

    cxmat out = cxmat::Zero(out_basis->dimension(), out_basis->dimension());
    for (std::int64_t i = 0; i < dim; ++i) {
        for (std::int64_t j = 0; j < dim; ++j) {
            if (traced_part[static_cast<std::size_t>(i)] == traced_part[static_cast<std::size_t>(j)]) {
                out(kept_index[static_cast<std::size_t>(i)], kept_index[static_cast<std::size_t>(j)]) +=
                    rho.entries(i, j);
            }
        }
    }
    return DensityMatrix{std::move(out_basis), std::move(out)};
}

namespace detail {

/// Per-state decomposition of a k-mode basis into (first k-1 modes, last mode).
/// `prefix_rank` is the canonical rank in the (k-1)-mode basis; within the
/// canonical ordering, prefixes of all states with a fixed last occupation `h`
/// enumerate exactly the (k-1)-mode states with total < cutoff - h, in order.
struct LastModeSplit {
    std::vector<std::int64_t> prefix_rank;
    std::vector<int> last_occupation;
};

inline LastModeSplit split_last_mode(const FockBasis& basis, const FockBasis& prefix_basis) {
    LastModeSplit split;
    const std::int64_t dim = basis.dimension();
    split.prefix_rank.resize(static_cast<std::size_t>(dim));
    split.last_occupation.resize(static_cast<std::size_t>(dim));
    OccupationVector prefix(static_cast<std::size_t>(basis.modes() - 1));
    for (std::int64_t i = 0; i < dim; ++i) {
        const OccupationVector& occ = basis.occupation_of(i);
        std::copy(occ.begin(), occ.end() - 1, prefix.begin());
        split.prefix_rank[static_cast<std::size_t>(i)] = prefix_basis.index_of(prefix);
        split.last_occupation[static_cast<std::size_t>(i)] = occ.back();
    }
    return split;
}

/// Traces out the last mode of a matrix over `basis` (k >= 2 modes).
inline cxmat trace_out_last(const cxmat& m, const FockBasis& basis, const FockBasis& prefix_basis,
                            const LastModeSplit& split) {
    cxmat out = cxmat::Zero(prefix_basis.dimension(), prefix_basis.dimension());
    const std::int64_t dim = basis.dimension();
    for (std::int64_t i = 0; i < dim; ++i) {
        const int h = split.last_occupation[static_cast<std::size_t>(i)];
        for (std::int64_t j = 0; j < dim; ++j) {
            if (split.last_occupation[static_cast<std::size_t>(j)] == h) {
                out(split.prefix_rank[static_cast<std::size_t>(i)],
                    split.prefix_rank[static_cast<std::size_t>(j)]) += m(i, j);
            }
        }
    }
    return out;
}

}  // namespace detail

}  // namespace cvborn
