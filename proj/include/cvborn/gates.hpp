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
#include <array>
#include <cmath>
#include <optional>
#include <sstream>
#include <vector>

#include "cvborn/fock.hpp"

namespace cvborn {

enum class GateKind {
    Phaseshift,    // R(phi)   = exp(i phi a'a)
    Beamsplitter,  // BS(th,p) = exp(th (e^{ip} a_j a_k' - e^{-ip} a_j' a_k))
    Displacement,  // D(alpha) = exp(alpha a' - alpha* a)
    Squeezing,     // S(z)     = exp((z* a^2 - z a'^2) / 2)
    CubicPhase,    // V(gamma) = exp(i gamma x^3 / (3 hbar))
    CrossKerr,     // CK(xi)   = exp(i xi n_j n_k)
};

inline bool is_gaussian(GateKind kind) {
    return kind == GateKind::Phaseshift || kind == GateKind::Beamsplitter ||
           kind == GateKind::Displacement || kind == GateKind::Squeezing;
}

inline bool is_diagonal(GateKind kind) {
    return kind == GateKind::Phaseshift || kind == GateKind::CrossKerr;
}

inline int mode_arity(GateKind kind) {
    return (kind == GateKind::Beamsplitter || kind == GateKind::CrossKerr) ? 2 : 1;
}

inline const char* gate_name(GateKind kind) {
    switch (kind) {
        case GateKind::Phaseshift: return "phaseshift";
        case GateKind::Beamsplitter: return "beamsplitter";
        case GateKind::Displacement: return "displacement";
        case GateKind::Squeezing: return "squeezing";
        case GateKind::CubicPhase: return "cubic_phase";
        case GateKind::CrossKerr: return "cross_kerr";
    }
    return "unknown";
}

struct GateSpec {
    GateKind kind = GateKind::Phaseshift;
    std::array<int, 2> modes{0, 0};
    std::array<double, 2> params{0.0, 0.0};

    int arity() const { return mode_arity(kind); }
    int param_count() const {
        switch (kind) {
            case GateKind::Beamsplitter:
            case GateKind::Displacement:
            case GateKind::Squeezing: return 2;
            default: return 1;
        }
    }
};

inline GateSpec phaseshift(int mode, double phi) {
    return GateSpec{GateKind::Phaseshift, {mode, 0}, {phi, 0.0}};
}
inline GateSpec beamsplitter(int mode_a, int mode_b, double theta, double phi = 0.0) {
    return GateSpec{GateKind::Beamsplitter, {mode_a, mode_b}, {theta, phi}};
}
inline GateSpec displacement(int mode, complex alpha) {
    return GateSpec{GateKind::Displacement, {mode, 0}, {alpha.real(), alpha.imag()}};
}
inline GateSpec squeezing(int mode, double r, double phase = 0.0) {
    return GateSpec{GateKind::Squeezing, {mode, 0}, {r, phase}};
}
inline GateSpec cubic_phase(int mode, double gamma) {
    return GateSpec{GateKind::CubicPhase, {mode, 0}, {gamma, 0.0}};
}
inline GateSpec cross_kerr(int mode_a, int mode_b, double xi) {
    return GateSpec{GateKind::CrossKerr, {mode_a, mode_b}, {xi, 0.0}};
}

/// Ties trainable weight `weight_index` to one scalar parameter of one gate.
struct WeightBinding {
    int weight_index = 0;
    int gate_position = 0;
    int param_slot = 0;
};

/// Parametrized photonic circuit over a truncated Fock space.
struct Circuit {
    CutoffSpec space;
    double hbar = 2.0;
    std::vector<GateSpec> gates;
    std::vector<WeightBinding> bindings;
    std::optional<OccupationVector> input;  // default: vacuum
    double leakage_limit = 1e-3;
    int pad = 10;

    int weight_count() const { return static_cast<int>(bindings.size()); }
};

inline void validate(const Circuit& circuit) {
    validate(circuit.space);
    if (circuit.hbar <= 0.0) throw ValidationError("Circuit: hbar must be positive");
    if (circuit.pad < 0) throw ValidationError("Circuit: pad must be >= 0");
    for (std::size_t g = 0; g < circuit.gates.size(); ++g) {
        const GateSpec& gate = circuit.gates[g];
        for (int m = 0; m < gate.arity(); ++m) {
            if (gate.modes[static_cast<std::size_t>(m)] < 0 ||
                gate.modes[static_cast<std::size_t>(m)] >= circuit.space.modes) {
                std::ostringstream msg;
                msg << "Circuit: gate " << g << " (" << gate_name(gate.kind)
                    << ") addresses mode " << gate.modes[static_cast<std::size_t>(m)]
                    << " outside 0.." << circuit.space.modes - 1;
                throw ValidationError(msg.str());
            }
        }
        if (gate.arity() == 2 && gate.modes[0] == gate.modes[1]) {
            throw ValidationError("Circuit: two-mode gate requires distinct modes");
        }
    }
    // Bindings: contiguous weight indices, Gaussian targets, and placement
    // after every non-Gaussian gate (the shift rules stop working otherwise).
    int last_non_gaussian = -1;
    for (std::size_t g = 0; g < circuit.gates.size(); ++g) {
        if (!is_gaussian(circuit.gates[g].kind)) last_non_gaussian = static_cast<int>(g);
    }
    std::vector<int> seen(circuit.bindings.size(), 0);
    for (const WeightBinding& b : circuit.bindings) {
        if (b.weight_index < 0 || b.weight_index >= static_cast<int>(circuit.bindings.size())) {
            throw ValidationError("Circuit: weight indices must be contiguous 0..W-1");
        }
        seen[static_cast<std::size_t>(b.weight_index)] += 1;
        if (b.gate_position < 0 || b.gate_position >= static_cast<int>(circuit.gates.size())) {
            throw ValidationError("Circuit: binding refers to a gate position out of range");
        }
        const GateSpec& gate = circuit.gates[static_cast<std::size_t>(b.gate_position)];
        if (!is_gaussian(gate.kind)) {
            std::ostringstream msg;
            msg << "Circuit: weight " << b.weight_index << " bound to non-Gaussian gate "
                << gate_name(gate.kind) << "; no shift rule exists";
            throw ValidationError(msg.str());
        }
        if (b.param_slot < 0 || b.param_slot >= gate.param_count()) {
            throw ValidationError("Circuit: binding parameter slot out of range");
        }
        if (b.gate_position <= last_non_gaussian) {
            throw ValidationError(
                "Circuit: trainable gates must come after every non-Gaussian gate");
        }
    }
    for (int count : seen) {
        if (count != 1) throw ValidationError("Circuit: each weight needs exactly one binding");
    }
    if (circuit.input) {
        FockBasis basis(circuit.space);
        basis.index_of(*circuit.input);  // throws if outside truncation
    }
}

// ---------------------------------------------------------------------------
// Truncated mode operators and gate unitaries
// ---------------------------------------------------------------------------

/// Single-mode annihilation/creation matrices at the given cutoff:
/// a[n-1, n] = sqrt(n), and the conjugate transpose for a'.
inline std::pair<cxmat, cxmat> ladder_matrices(int cutoff) {
    if (cutoff < 1) throw ValidationError("ladder_matrices: cutoff must be >= 1");
    cxmat a = cxmat::Zero(cutoff, cutoff);
    for (int n = 1; n < cutoff; ++n) {
        a(n - 1, n) = std::sqrt(static_cast<double>(n));
    }
    return {a, a.adjoint()};
}

/// Index of |n_j, n_k> in the two-mode truncated basis (total-major, then n_j).
inline std::int64_t two_mode_index(int n_j, int n_k) {
    const std::int64_t s = n_j + n_k;
    return s * (s + 1) / 2 + n_j;
}

namespace detail {

/// exp(G) for anti-Hermitian G, via the eigendecomposition of H = -iG.
inline cxmat exp_antihermitian(const cxmat& generator) {
    cxmat h = complex(0.0, -1.0) * generator;
    h = 0.5 * (h + cxmat(h.adjoint()));  // scrub floating asymmetry
    Eigen::SelfAdjointEigenSolver<cxmat> eigh(h);
    if (eigh.info() != Eigen::Success) {
        throw SimulationError("gate_unitary: eigendecomposition failed");
    }
    const Eigen::VectorXd& lambda = eigh.eigenvalues();
    cxvec phases(lambda.size());
    for (Eigen::Index i = 0; i < lambda.size(); ++i) {
        phases(i) = std::polar(1.0, lambda(i));
    }
    return eigh.eigenvectors() * phases.asDiagonal() * eigh.eigenvectors().adjoint();
}

inline cxmat single_mode_generator(const GateSpec& gate, int dim, double hbar) {
    auto [a, ad] = ladder_matrices(dim);
    switch (gate.kind) {
        case GateKind::Displacement: {
            const complex alpha(gate.params[0], gate.params[1]);
            return alpha * ad - std::conj(alpha) * a;
        }
        case GateKind::Squeezing: {
            const complex z = std::polar(gate.params[0], gate.params[1]);
            return 0.5 * (std::conj(z) * a * a - z * ad * ad);
        }
        case GateKind::CubicPhase: {
            const cxmat x = std::sqrt(hbar / 2.0) * (a + ad);
            return complex(0.0, gate.params[0] / (3.0 * hbar)) * x * x * x;
        }
        default:
            throw ValidationError("single_mode_generator: unsupported gate kind");
    }
}

inline cxmat beamsplitter_generator(double theta, double phi, int cutoff) {
    const std::int64_t dim = binomial_i(cutoff + 1, 2);
    cxmat g = cxmat::Zero(dim, dim);
    const complex up = theta * std::polar(1.0, phi);     // a_j a_k'
    const complex down = -theta * std::polar(1.0, -phi); // a_j' a_k
    for (int s = 0; s < cutoff; ++s) {
        for (int n = 0; n <= s; ++n) {
            const int m = s - n;
            const std::int64_t col = two_mode_index(n, m);
            if (n >= 1) {
                g(two_mode_index(n - 1, m + 1), col) +=
                    up * std::sqrt(static_cast<double>(n) * (m + 1));
            }
            if (m >= 1) {
                g(two_mode_index(n + 1, m - 1), col) +=
                    down * std::sqrt(static_cast<double>(n + 1) * m);
            }
        }
    }
    return g;
}

}  // namespace detail

/// Gate matrix on the gate's local modes, truncated at `cutoff`.
/// Diagonal gates are built exactly; the rest are exponentiated on a space
/// padded to cutoff + pad and then cropped, so the crop boundary error is
/// controlled by the padding.
inline cxmat gate_unitary(const GateSpec& gate, int cutoff, int pad, double hbar = 2.0) {
    if (cutoff < 1) throw ValidationError("gate_unitary: cutoff must be >= 1");
    if (pad < 0) throw ValidationError("gate_unitary: pad must be >= 0");
    switch (gate.kind) {
        case GateKind::Phaseshift: {
            cxmat u = cxmat::Zero(cutoff, cutoff);
            for (int n = 0; n < cutoff; ++n) {
                u(n, n) = std::polar(1.0, gate.params[0] * n);
            }
            return u;
        }
        case GateKind::CrossKerr: {
            const std::int64_t dim = binomial_i(cutoff + 1, 2);
            cxmat u = cxmat::Zero(dim, dim);
            for (int s = 0; s < cutoff; ++s) {
                for (int n = 0; n <= s; ++n) {
                    const std::int64_t i = two_mode_index(n, s - n);
                    u(i, i) = std::polar(1.0, gate.params[0] * n * (s - n));
                }
            }
            return u;
        }
        case GateKind::Beamsplitter: {
            const cxmat full = detail::exp_antihermitian(
                detail::beamsplitter_generator(gate.params[0], gate.params[1], cutoff + pad));
            const std::int64_t dim = binomial_i(cutoff + 1, 2);
            return full.topLeftCorner(dim, dim);
        }
        default: {
            const cxmat full = detail::exp_antihermitian(
                detail::single_mode_generator(gate, cutoff + pad, hbar));
            return full.topLeftCorner(cutoff, cutoff);
        }
    }
}

// ---------------------------------------------------------------------------
// Circuit application
// ---------------------------------------------------------------------------

namespace detail {

/// Groups global basis indices by the occupations of all modes except the
/// gate's. Member k of a group is the global index whose local gate-mode
/// configuration has local index k (single mode: n; two modes:
/// two_mode_index(n_j, n_k)). The local indices below each group's cutoff
/// remainder K are all present, so each group is a dense prefix of the local
/// basis and the gate's cropped unitary applies block-wise.
inline std::vector<std::vector<std::int64_t>> gate_groups(const FockBasis& basis,
                                                          const GateSpec& gate) {
    const int d = basis.modes();
    const int arity = gate.arity();
    const int c = basis.cutoff();
    const auto local_size = [&](int remainder) {
        return arity == 1 ? static_cast<std::int64_t>(remainder) : binomial_i(remainder + 1, 2);
    };

    std::vector<std::vector<std::int64_t>> groups;
    std::vector<std::int64_t> group_of(static_cast<std::size_t>(basis.dimension()));
    if (d == arity) {
        groups.resize(1);
        groups[0].resize(static_cast<std::size_t>(local_size(c)));
    } else {
        FockBasis rest_basis({d - arity, c});
        groups.resize(static_cast<std::size_t>(rest_basis.dimension()));
        for (std::int64_t r = 0; r < rest_basis.dimension(); ++r) {
            const OccupationVector& rest_occ = rest_basis.occupation_of(r);
            int total = 0;
            for (int n : rest_occ) total += n;
            groups[static_cast<std::size_t>(r)].resize(
                static_cast<std::size_t>(local_size(c - total)));
        }
        OccupationVector rest(static_cast<std::size_t>(d - arity));
        for (std::int64_t i = 0; i < basis.dimension(); ++i) {
            const OccupationVector& occ = basis.occupation_of(i);
            std::size_t r = 0;
            for (int m = 0; m < d; ++m) {
                if (m != gate.modes[0] && (arity == 1 || m != gate.modes[1])) {
                    rest[r++] = occ[static_cast<std::size_t>(m)];
                }
            }
            group_of[static_cast<std::size_t>(i)] = rest_basis.index_of(rest);
        }
    }
    for (std::int64_t i = 0; i < basis.dimension(); ++i) {
        const OccupationVector& occ = basis.occupation_of(i);
        const int n_first = occ[static_cast<std::size_t>(gate.modes[0])];
        const std::int64_t local =
            arity == 1 ? n_first
                       : two_mode_index(n_first, occ[static_cast<std::size_t>(gate.modes[1])]);
        const std::int64_t g = (d == arity) ? 0 : group_of[static_cast<std::size_t>(i)];
        groups[static_cast<std::size_t>(g)][static_cast<std::size_t>(local)] = i;
    }
    return groups;
}

/// Applies a local unitary (on the gate's modes, cropped at the basis cutoff)
/// to the global state. Target components that would exceed the global
/// truncation are dropped; the lost mass shows up as norm deficit.
inline void apply_local_unitary(const FockBasis& basis, cxvec& amplitudes, const GateSpec& gate,
                                const cxmat& local_unitary) {
    const auto groups = gate_groups(basis, gate);
    cxvec in, out;
    for (const auto& members : groups) {
        const auto local_dim = static_cast<Eigen::Index>(members.size());
        in.resize(local_dim);
        for (Eigen::Index k = 0; k < local_dim; ++k) {
            in(k) = amplitudes(members[static_cast<std::size_t>(k)]);
        }
        out.noalias() = local_unitary.topLeftCorner(local_dim, local_dim) * in;
        for (Eigen::Index k = 0; k < local_dim; ++k) {
            amplitudes(members[static_cast<std::size_t>(k)]) = out(k);
        }
    }
}

inline void apply_diagonal_gate(const FockBasis& basis, cxvec& amplitudes, const GateSpec& gate) {
    for (std::int64_t i = 0; i < basis.dimension(); ++i) {
        const OccupationVector& occ = basis.occupation_of(i);
        double angle = 0.0;
        if (gate.kind == GateKind::Phaseshift) {
            angle = gate.params[0] * occ[static_cast<std::size_t>(gate.modes[0])];
        } else {
            angle = gate.params[0] * occ[static_cast<std::size_t>(gate.modes[0])] *
                    occ[static_cast<std::size_t>(gate.modes[1])];
        }
        amplitudes(i) *= std::polar(1.0, angle);
    }
}

}  // namespace detail

/// Raw evolution: applies the gate list in order without renormalizing.
/// Linear in the input amplitudes.
inline cxvec apply_gates(const FockBasis& basis, cxvec amplitudes,
                         const std::vector<GateSpec>& gates, double hbar, int pad = 10) {
    for (const GateSpec& gate : gates) {
        if (is_diagonal(gate.kind)) {
            detail::apply_diagonal_gate(basis, amplitudes, gate);
        } else {
            const cxmat u = gate_unitary(gate, basis.cutoff(), pad, hbar);
            detail::apply_local_unitary(basis, amplitudes, gate, u);
        }
    }
    return amplitudes;
}

struct ApplyResult {
    PureState state;       // renormalized circuit output
    double leakage = 0.0;  // 1 - pre-renormalization squared norm
};

/// Binds weights, runs the circuit on its input state and renormalizes.
/// Truncation leakage beyond the circuit's limit is an error: the cutoff is
/// too small for the requested parameters.
inline ApplyResult apply_circuit(const Circuit& circuit, const std::vector<double>& weights) {
    validate(circuit);
    if (static_cast<int>(weights.size()) != circuit.weight_count()) {
        throw ValidationError("apply_circuit: weight vector length does not match bindings");
    }
    std::vector<GateSpec> gates = circuit.gates;
    for (const WeightBinding& b : circuit.bindings) {
        gates[static_cast<std::size_t>(b.gate_position)]
            .params[static_cast<std::size_t>(b.param_slot)] =
            weights[static_cast<std::size_t>(b.weight_index)];
    }

    auto basis = make_basis(circuit.space);
    PureState state = circuit.input ? fock_state(basis, *circuit.input) : vacuum_state(basis);
    state.amplitudes = apply_gates(*basis, std::move(state.amplitudes), gates, circuit.hbar,
                                   circuit.pad);

    const double norm_sq = state.norm_squared();
    const double leakage = 1.0 - norm_sq;
    if (leakage > circuit.leakage_limit) {
        std::ostringstream msg;
        msg << "apply_circuit: truncation leakage " << leakage << " exceeds limit "
            << circuit.leakage_limit << "; increase the Fock space cutoff (currently "
            << circuit.space.cutoff << ")";
        throw SimulationError(msg.str());
    }
    state.amplitudes /= std::sqrt(norm_sq);
    return ApplyResult{std::move(state), leakage};
}

// ---------------------------------------------------------------------------
// Parameter-shift rule
// ---------------------------------------------------------------------------

struct ShiftSettings {
    double s_displacement = 1.0;
    double s_squeezing = 1.0;
};

struct ShiftedWeights {
    std::vector<double> plus;
    std::vector<double> minus;
    double multiplier = 1.0;
};

/// Weight vectors for the positively and negatively shifted circuits and the
/// matching multiplier m_G. Shifts: pi/2 for phaseshift and beamsplitter
/// theta (m = 1); s_D for displacement (m = 1/s_D); s_S for squeezing
/// (m = 1/sinh(s_S)).
inline ShiftedWeights shifted_circuits(const Circuit& circuit, const std::vector<double>& weights,
                                       int weight_index, const ShiftSettings& settings = {}) {
    if (static_cast<int>(weights.size()) != circuit.weight_count()) {
        throw ValidationError("shifted_circuits: weight vector length does not match bindings");
    }
    const WeightBinding* binding = nullptr;
    for (const WeightBinding& b : circuit.bindings) {
        if (b.weight_index == weight_index) binding = &b;
    }
    if (binding == nullptr) {
        throw ValidationError("shifted_circuits: no binding for the requested weight");
    }
    const GateSpec& gate = circuit.gates[static_cast<std::size_t>(binding->gate_position)];

    double shift = 0.0;
    double multiplier = 0.0;
    switch (gate.kind) {
        case GateKind::Phaseshift:
            shift = M_PI / 2.0;
            multiplier = 1.0;
            break;
        case GateKind::Beamsplitter:
            if (binding->param_slot != 0) {
                throw ValidationError(
                    "shifted_circuits: no shift rule for the beamsplitter phase parameter");
            }
            shift = M_PI / 2.0;
            multiplier = 1.0;
            break;
        case GateKind::Displacement:
            if (binding->param_slot != 0) {
                throw ValidationError(
                    "shifted_circuits: displacement shifts apply to the real amplitude slot");
            }
            shift = settings.s_displacement;
            multiplier = 1.0 / settings.s_displacement;
            break;
        case GateKind::Squeezing:
            if (binding->param_slot != 0) {
                throw ValidationError(
                    "shifted_circuits: squeezing shifts apply to the magnitude slot");
            }
            shift = settings.s_squeezing;
            multiplier = 1.0 / std::sinh(settings.s_squeezing);
            break;
        default:
            throw ValidationError("shifted_circuits: gradients of non-Gaussian gates are unsupported");
    }

    ShiftedWeights out;
    out.plus = weights;
    out.minus = weights;
    out.plus[static_cast<std::size_t>(weight_index)] += shift;
    out.minus[static_cast<std::size_t>(weight_index)] -= shift;
    out.multiplier = multiplier;
    return out;
}

}  // namespace cvborn
