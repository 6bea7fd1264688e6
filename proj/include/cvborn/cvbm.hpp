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
#include <chrono>
#include <cmath>
#include <variant>
#include <vector>

#include "cvborn/gates.hpp"
#include "cvborn/homodyne.hpp"
#include "cvborn/rng.hpp"

namespace cvborn {

// ---------------------------------------------------------------------------
// Kernel and MMD estimators
// ---------------------------------------------------------------------------

struct KernelParams {
    double sigma = 1.0;
};

/// Gaussian kernel k(x, y) = exp(-||x - y||^2 / (2 sigma^2)).
inline double gaussian_kernel(const Eigen::VectorXd& x, const Eigen::VectorXd& y,
                              const KernelParams& params = {}) {
    if (params.sigma <= 0.0) throw ValidationError("gaussian_kernel: sigma must be positive");
    if (x.size() != y.size()) throw ValidationError("gaussian_kernel: dimension mismatch");
    return std::exp(-(x - y).squaredNorm() / (2.0 * params.sigma * params.sigma));
}

namespace detail {

/// Sum of k(x_i, y_j) over all pairs. Works one x-row at a time so the
/// active data stays cache-resident, with per-row partial sums reduced in a
/// fixed order: the result is bit-identical for any thread count.
inline double kernel_cross_sum(const Eigen::MatrixXd& x, const Eigen::MatrixXd& y, double sigma) {
    const double gamma = 1.0 / (2.0 * sigma * sigma);
    const Eigen::Index m = x.rows();
    const Eigen::Index n = y.rows();
    const Eigen::VectorXd xn = x.rowwise().squaredNorm();
    const Eigen::VectorXd yn = y.rowwise().squaredNorm();

    Eigen::VectorXd row_sums(m);
    const auto rows = [&](Eigen::Index begin, Eigen::Index end) {
        Eigen::ArrayXd buffer(n);
        for (Eigen::Index i = begin; i < end; ++i) {
            if (x.cols() == 1) {
                buffer = xn(i) + yn.array() - (2.0 * x(i, 0)) * y.col(0).array();
            } else {
                buffer.matrix().noalias() = y * (-2.0 * x.row(i).transpose());
                buffer += xn(i) + yn.array();
            }
            row_sums(i) = (-gamma * buffer).exp().sum();
        }
    };

    const int threads =
        static_cast<double>(m) * static_cast<double>(n) >= 4e6
            ? resolve_thread_count(0, m)
            : 1;
    if (threads <= 1) {
        rows(0, m);
    } else {
        std::vector<std::thread> pool;
        const Eigen::Index chunk = (m + threads - 1) / threads;
        for (int t = 0; t < threads; ++t) {
            const Eigen::Index begin = std::min<Eigen::Index>(t * chunk, m);
            const Eigen::Index end = std::min<Eigen::Index>(begin + chunk, m);
            if (begin < end) pool.emplace_back(rows, begin, end);
        }
        for (auto& th : pool) th.join();
    }
    double total = 0.0;
    for (Eigen::Index i = 0; i < m; ++i) total += row_sums(i);
    return total;
}

/// Sum of k(x_i, x_j) over ordered pairs with i != j.
inline double kernel_offdiag_sum(const Eigen::MatrixXd& x, double sigma) {
    return kernel_cross_sum(x, x, sigma) - static_cast<double>(x.rows());
}

}  // namespace detail

/// Unbiased two-sample MMD estimate:
///   sum_{i != j} k(x_i, x_j) / (M(M-1)) + sum_{i != j} k(y_i, y_j) / (N(N-1))
///   - 2 sum_{i,j} k(x_i, y_j) / (MN).
inline double mmd_estimate(const SampleMatrix& x, const SampleMatrix& y,
                           const KernelParams& params = {}) {
    if (params.sigma <= 0.0) throw ValidationError("mmd_estimate: sigma must be positive");
    const auto m = static_cast<double>(x.shots());
    const auto n = static_cast<double>(y.shots());
    if (x.shots() < 2 || y.shots() < 2) {
        throw ValidationError("mmd_estimate: the unbiased estimator needs at least 2 rows per side");
    }
    if (x.modes() != y.modes()) throw ValidationError("mmd_estimate: mode count mismatch");
    const double xx = detail::kernel_offdiag_sum(x.values, params.sigma) / (m * (m - 1.0));
    const double yy = detail::kernel_offdiag_sum(y.values, params.sigma) / (n * (n - 1.0));
    const double xy = detail::kernel_cross_sum(x.values, y.values, params.sigma) / (m * n);
    return xx + yy - 2.0 * xy;
}

/// Parameter-shift gradient estimate: with A/B sampled from the positively and
/// negatively shifted circuits, X from the current circuit and Y from the
/// target,
///   m_G [ mean k(a, x) - mean k(b, x) - mean k(a, y) + mean k(b, y) ].
inline double grad_estimate(const SampleMatrix& a, const SampleMatrix& b, const SampleMatrix& x,
                            const SampleMatrix& y, double multiplier,
                            const KernelParams& params = {}) {
    if (params.sigma <= 0.0) throw ValidationError("grad_estimate: sigma must be positive");
    if (a.shots() < 1 || b.shots() < 1 || x.shots() < 1 || y.shots() < 1) {
        throw ValidationError("grad_estimate: empty sample set");
    }
    if (a.modes() != x.modes() || b.modes() != x.modes() || y.modes() != x.modes()) {
        throw ValidationError("grad_estimate: mode count mismatch");
    }
    const auto r = static_cast<double>(a.shots());
    const auto s = static_cast<double>(b.shots());
    const auto m = static_cast<double>(x.shots());
    const auto n = static_cast<double>(y.shots());
    const double ax = detail::kernel_cross_sum(a.values, x.values, params.sigma) / (r * m);
    const double bx = detail::kernel_cross_sum(b.values, x.values, params.sigma) / (s * m);
    const double ay = detail::kernel_cross_sum(a.values, y.values, params.sigma) / (r * n);
    const double by = detail::kernel_cross_sum(b.values, y.values, params.sigma) / (s * n);
    return multiplier * (ax - bx - ay + by);
}

// ---------------------------------------------------------------------------
// Adam optimizer
// ---------------------------------------------------------------------------

struct AdamState {
    Eigen::VectorXd first_moment;
    Eigen::VectorXd second_moment;
    long step_count = 0;

    static AdamState zeros(Eigen::Index size) {
        return AdamState{Eigen::VectorXd::Zero(size), Eigen::VectorXd::Zero(size), 0};
    }
};

struct TrainConfig {
    long shots = 1000;       // M = N per loss evaluation
    long grad_shots = 0;     // R = S per shifted circuit; 0 means `shots`
    double learning_rate = 0.01;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
    long iterations = 100;
    std::uint64_t seed = 12345;
    double s_displacement = 1.0;
    double s_squeezing = 1.0;
    KernelParams kernel;
    bool resample_target = true;  // fresh target draw each iteration
    ErfMode erf_mode = ErfMode::Approximate;
    int threads = 0;

    long effective_grad_shots() const { return grad_shots > 0 ? grad_shots : shots; }
};

inline void validate(const TrainConfig& config) {
    if (config.shots < 2) throw ValidationError("TrainConfig: shots must be >= 2");
    if (config.iterations < 0) throw ValidationError("TrainConfig: iterations must be >= 0");
    if (config.learning_rate <= 0.0) throw ValidationError("TrainConfig: learning rate must be positive");
    if (config.beta1 <= 0.0 || config.beta1 >= 1.0 || config.beta2 <= 0.0 || config.beta2 >= 1.0) {
        throw ValidationError("TrainConfig: decay rates must lie in (0, 1)");
    }
    if (config.epsilon <= 0.0) throw ValidationError("TrainConfig: epsilon must be positive");
    if (config.s_displacement <= 0.0 || config.s_squeezing <= 0.0) {
        throw ValidationError("TrainConfig: shift magnitudes must be positive");
    }
    if (config.kernel.sigma <= 0.0) throw ValidationError("TrainConfig: kernel sigma must be positive");
}

/// One bias-corrected Adam update; returns the new state and weights.
inline std::pair<AdamState, Eigen::VectorXd> adam_step(const AdamState& state,
                                                       const Eigen::VectorXd& weights,
                                                       const Eigen::VectorXd& grad,
                                                       const TrainConfig& config) {
    if (state.first_moment.size() != weights.size() || grad.size() != weights.size()) {
        throw ValidationError("adam_step: vector length mismatch");
    }
    AdamState next;
    next.step_count = state.step_count + 1;
    next.first_moment = config.beta1 * state.first_moment + (1.0 - config.beta1) * grad;
    next.second_moment =
        config.beta2 * state.second_moment + (1.0 - config.beta2) * grad.cwiseProduct(grad);
    const double bias1 = 1.0 - std::pow(config.beta1, static_cast<double>(next.step_count));
    const double bias2 = 1.0 - std::pow(config.beta2, static_cast<double>(next.step_count));
    const Eigen::VectorXd m_hat = next.first_moment / bias1;
    const Eigen::VectorXd v_hat = next.second_moment / bias2;
    Eigen::VectorXd updated =
        weights - config.learning_rate *
                      (m_hat.array() / (v_hat.array().sqrt() + config.epsilon)).matrix();
    return {std::move(next), std::move(updated)};
}

// ---------------------------------------------------------------------------
// Training loop
// ---------------------------------------------------------------------------

struct TrainRecord {
    long iteration = 0;
    double loss = 0.0;
    std::vector<double> weights;
    double wall_time_s = 0.0;
};

/// Target distribution: either a circuit with fixed weights (resampled each
/// iteration by default) or a fixed pre-drawn sample pool.
struct CircuitTarget {
    Circuit circuit;
    std::vector<double> weights;
};

using TrainTarget = std::variant<CircuitTarget, SampleMatrix>;

struct BaselineStats {
    double mean = 0.0;
    double stddev = 0.0;
    int repeats = 0;
};

namespace detail {

inline SampleMatrix sample_circuit(const Circuit& circuit, const std::vector<double>& weights,
                                   long shots, std::uint64_t seed, const TrainConfig& config) {
    const ApplyResult applied = apply_circuit(circuit, weights);
    SampleOptions options;
    options.hbar = circuit.hbar;
    options.seed = seed;
    options.erf_mode = config.erf_mode;
    options.threads = config.threads;
    return sample_homodyne(applied.state, shots, options);
}

/// Draws `shots` rows from a fixed pool, uniformly with replacement.
inline SampleMatrix draw_from_pool(const SampleMatrix& pool, long shots, std::uint64_t seed) {
    SampleMatrix out;
    out.values.resize(shots, pool.modes());
    const auto pool_rows = static_cast<std::uint64_t>(pool.shots());
    for (long i = 0; i < shots; ++i) {
        const double u = uniform_open(seed, static_cast<std::uint64_t>(i), 0);
        const auto row = static_cast<Eigen::Index>(
            std::min<std::uint64_t>(pool_rows - 1, static_cast<std::uint64_t>(u * static_cast<double>(pool_rows))));
        out.values.row(i) = pool.values.row(row);
    }
    return out;
}

}  // namespace detail

/// Mean and spread of the MMD estimator between independent sample pairs of
/// the target with itself: the convergence reference band.
inline BaselineStats loss_baseline(const Circuit& target_circuit,
                                   const std::vector<double>& target_weights,
                                   const TrainConfig& config, int repeats) {
    if (repeats < 1) throw ValidationError("loss_baseline: repeats must be >= 1");
    validate(config);
    const ApplyResult applied = apply_circuit(target_circuit, target_weights);
    SampleOptions options;
    options.hbar = target_circuit.hbar;
    options.erf_mode = config.erf_mode;
    options.threads = config.threads;

    std::vector<double> values(static_cast<std::size_t>(repeats));
    for (int r = 0; r < repeats; ++r) {
        options.seed = derive_seed(config.seed, 0x6261736511ULL, static_cast<std::uint64_t>(2 * r));
        const SampleMatrix a = sample_homodyne(applied.state, config.shots, options);
        options.seed = derive_seed(config.seed, 0x6261736511ULL, static_cast<std::uint64_t>(2 * r + 1));
        const SampleMatrix b = sample_homodyne(applied.state, config.shots, options);
        values[static_cast<std::size_t>(r)] = mmd_estimate(a, b, config.kernel);
    }
    double mean = 0.0;
    for (double v : values) mean += v;
    mean /= static_cast<double>(repeats);
    double var = 0.0;
    for (double v : values) var += (v - mean) * (v - mean);
    var = repeats > 1 ? var / static_cast<double>(repeats - 1) : 0.0;
    return BaselineStats{mean, std::sqrt(var), repeats};
}

/// Trains the circuit against the target with parameter-shift stochastic
/// gradients and Adam. Emits one record per evaluated iteration, including a
/// final record at the post-update weights; fully deterministic given the seed.
inline std::vector<TrainRecord> train(const Circuit& model, const std::vector<double>& initial_weights,
                                      const TrainTarget& target, const TrainConfig& config) {
    validate(config);
    validate(model);
    if (static_cast<int>(initial_weights.size()) != model.weight_count()) {
        throw ValidationError("train: initial weight count does not match circuit bindings");
    }
    if (const auto* pool = std::get_if<SampleMatrix>(&target)) {
        if (pool->modes() != model.space.modes) {
            throw ValidationError("train: target sample mode count does not match circuit");
        }
        if (pool->shots() < 2) throw ValidationError("train: target pool needs at least 2 rows");
    }

    const ShiftSettings shifts{config.s_displacement, config.s_squeezing};
    const int weight_count = model.weight_count();
    std::vector<double> weights = initial_weights;
    AdamState adam = AdamState::zeros(weight_count);
    std::vector<TrainRecord> records;
    records.reserve(static_cast<std::size_t>(config.iterations) + 1);

    const auto start = std::chrono::steady_clock::now();
    const auto elapsed = [&start] {
        return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    };

    for (long iteration = 0; iteration <= config.iterations; ++iteration) {
        const auto it = static_cast<std::uint64_t>(iteration);
        SampleMatrix x;
        SampleMatrix y;
        try {
            x = detail::sample_circuit(model, weights, config.shots,
                                       derive_seed(config.seed, it, 0), config);
            if (const auto* circuit_target = std::get_if<CircuitTarget>(&target)) {
                const std::uint64_t target_it = config.resample_target ? it : 0;
                y = detail::sample_circuit(circuit_target->circuit, circuit_target->weights,
                                           config.shots, derive_seed(config.seed, target_it, 1),
                                           config);
            } else {
                const auto& pool = std::get<SampleMatrix>(target);
                y = detail::draw_from_pool(pool, config.shots, derive_seed(config.seed, it, 1));
            }
        } catch (const SimulationError& err) {
            std::ostringstream msg;
            msg << err.what() << " (training iteration " << iteration << ")";
            throw SimulationError(msg.str());
        }

        TrainRecord record;
        record.iteration = iteration;
        record.loss = mmd_estimate(x, y, config.kernel);
        record.weights = weights;
        record.wall_time_s = elapsed();
        records.push_back(record);
        if (iteration == config.iterations) break;

        Eigen::VectorXd grad(weight_count);
        for (int w = 0; w < weight_count; ++w) {
            const ShiftedWeights shifted = shifted_circuits(model, weights, w, shifts);
            SampleMatrix a;
            SampleMatrix b;
            try {
                a = detail::sample_circuit(model, shifted.plus, config.effective_grad_shots(),
                                           derive_seed(config.seed, it, static_cast<std::uint64_t>(2 + 2 * w)),
                                           config);
                b = detail::sample_circuit(model, shifted.minus, config.effective_grad_shots(),
                                           derive_seed(config.seed, it, static_cast<std::uint64_t>(3 + 2 * w)),
                                           config);
            } catch (const SimulationError& err) {
                std::ostringstream msg;
                msg << err.what() << " (training iteration " << iteration << ", weight " << w << ")";
                throw SimulationError(msg.str());
            }
            grad(w) = grad_estimate(a, b, x, y, shifted.multiplier, config.kernel);
        }

        Eigen::VectorXd weight_vec =
            Eigen::Map<const Eigen::VectorXd>(weights.data(), static_cast<Eigen::Index>(weights.size()));
        auto [next_adam, next_weights] = adam_step(adam, weight_vec, grad, config);
        adam = std::move(next_adam);
        for (int w = 0; w < weight_count; ++w) weights[static_cast<std::size_t>(w)] = next_weights(w);
    }
    return records;
}

}  // namespace cvborn
