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

#include <catch2/catch_amalgamated.hpp>
#include <random>

#include "cvborn/homodyne.hpp"
#include "support/oracles.hpp"

using namespace cvborn;

TEST_CASE("hermite coefficients from the three-term recurrence") {
    CHECK(hermite_coefficients(0) == std::vector<double>{1.0});
    CHECK(hermite_coefficients(1) == std::vector<double>{0.0, 2.0});
    CHECK(hermite_coefficients(2) == std::vector<double>{-2.0, 0.0, 4.0});
    CHECK(hermite_coefficients(3) == std::vector<double>{0.0, -12.0, 0.0, 8.0});
    // leading coefficient of H_n is 2^n
    for (int n = 0; n <= 12; ++n) {
        CHECK(hermite_coefficients(n).back() == std::pow(2.0, n));
    }
}

TEST_CASE("wavefunction values") {
    CHECK(wavefunction(0, 0.0, 1.0) == Catch::Approx(std::pow(M_PI, -0.25)).epsilon(1e-12));
    CHECK(wavefunction(1, 0.0, 1.0) == 0.0);
    CHECK(wavefunction(1, 0.0, 2.0) == 0.0);

    // normalization against adaptive quadrature, n <= 12
    for (double hbar : {1.0, 2.0}) {
        for (int n = 0; n <= 12; ++n) {
            const double integral = oracles::adaptive_simpson(
                [&](double x) {
                    const double value = wavefunction(n, x, hbar);
                    return value * value;
                },
                -12.0 * std::sqrt(hbar), 12.0 * std::sqrt(hbar), 1e-11);
            CHECK(integral == Catch::Approx(1.0).margin(1e-8));
        }
    }
}

TEST_CASE("mode distribution of the lowest Fock states") {
    const double inv_sqrt_pi = 1.0 / std::sqrt(M_PI);

    SECTION("vacuum") {
        cxmat rho = cxmat::Zero(2, 2);
        rho(0, 0) = 1.0;
        const ModeDistribution dist = mode_distribution(rho, 1.0);
        CHECK(dist.q_coeffs[0] == Catch::Approx(inv_sqrt_pi).epsilon(1e-12));
        for (double a : dist.a_coeffs) CHECK(std::abs(a) < 1e-15);
    }
    SECTION("single photon") {
        cxmat rho = cxmat::Zero(2, 2);
        rho(1, 1) = 1.0;
        const ModeDistribution dist = mode_distribution(rho, 1.0);
        REQUIRE(dist.q_coeffs.size() == 3);
        CHECK(std::abs(dist.q_coeffs[0]) < 1e-15);
        CHECK(dist.q_coeffs[2] == Catch::Approx(2.0 * inv_sqrt_pi).epsilon(1e-12));
        REQUIRE(dist.a_coeffs.size() >= 2);
        CHECK(dist.a_coeffs[1] == Catch::Approx(inv_sqrt_pi).epsilon(1e-12));
    }
    SECTION("even mixture") {
        cxmat rho = cxmat::Zero(2, 2);
        rho(0, 0) = 0.5;
        rho(1, 1) = 0.5;
        const ModeDistribution dist = mode_distribution(rho, 1.0);
        CHECK(dist.q_coeffs[0] == Catch::Approx(0.5 * inv_sqrt_pi).epsilon(1e-12));
        CHECK(dist.q_coeffs[2] == Catch::Approx(inv_sqrt_pi).epsilon(1e-12));
    }
}

TEST_CASE("closed-form A coefficients match termwise integration") {
    std::mt19937_64 rng(123);
    for (int c = 2; c <= 10; ++c) {
        for (int rep = 0; rep < 10; ++rep) {
            const cxmat rho = oracles::random_density(c, rng);
            const ModeDistribution dist = mode_distribution(rho, 1.0);
            const std::vector<double> closed = a_coefficients_closed_form(rho);
            const std::size_t size = std::max(closed.size(), dist.a_coeffs.size());
            for (std::size_t i = 0; i < size; ++i) {
                const double x = i < dist.a_coeffs.size() ? dist.a_coeffs[i] : 0.0;
                const double y = i < closed.size() ? closed[i] : 0.0;
                REQUIRE(std::abs(x - y) < 1e-9);
            }
        }
    }
}

TEST_CASE("density stays non-negative on a dense grid") {
    std::mt19937_64 rng(5);
    for (int rep = 0; rep < 20; ++rep) {
        const ModeDistribution dist = mode_distribution(oracles::random_density(6, rng), 1.0);
        for (double t = -8.0; t <= 8.0; t += 0.01) {
            REQUIRE(pdf_eval(dist, t) > -1e-10);
        }
    }
}

TEST_CASE("erf approximation") {
    CHECK(std::abs(erf_approx(0.0)) < 1e-15);
    for (double t : {0.3, 1.7, 4.0, 22.0}) {
        CHECK(erf_approx(-t) == -erf_approx(t));
    }
    double worst = 0.0;
    for (double t = -6.0; t <= 6.0; t += 1e-3) {
        worst = std::max(worst, std::abs(erf_approx(t) - std::erf(t)));
    }
    CHECK(worst <= 2.5e-5);
}

TEST_CASE("cdf values and limits") {
    cxmat vacuum = cxmat::Zero(2, 2);
    vacuum(0, 0) = 1.0;
    const ModeDistribution dist = mode_distribution(vacuum, 1.0);
    CHECK(cdf_eval(dist, 0.0, ErfMode::Accurate) == Catch::Approx(0.5).margin(1e-12));
    CHECK(cdf_eval(dist, 8.0, ErfMode::Accurate) == Catch::Approx(1.0).margin(1e-8));
    CHECK(cdf_eval(dist, -8.0, ErfMode::Accurate) == Catch::Approx(0.0).margin(1e-8));

    cxmat photon = cxmat::Zero(2, 2);
    photon(1, 1) = 1.0;
    const ModeDistribution single = mode_distribution(photon, 1.0);
    const double expected = 0.5 * (std::erf(1.0) + 1.0) - std::exp(-1.0) / std::sqrt(M_PI);
    CHECK(cdf_eval(single, 1.0, ErfMode::Accurate) == Catch::Approx(expected).margin(1e-10));
    CHECK(cdf_eval(single, 1.0) == Catch::Approx(0.71380).margin(1e-4));
}

TEST_CASE("cdf agrees with quadrature of the density on random states") {
    std::mt19937_64 rng(99);
    std::uniform_real_distribution<double> uniform(-5.0, 5.0);
    for (int rep = 0; rep < 10; ++rep) {
        const ModeDistribution dist = mode_distribution(oracles::random_density(8, rng), 1.0);
        for (int k = 0; k < 10; ++k) {
            const double t = uniform(rng);
            const double quad = oracles::adaptive_simpson(
                [&](double x) { return pdf_eval(dist, x); }, -14.0, t, 1e-12);
            REQUIRE(cdf_eval(dist, t, ErfMode::Accurate) == Catch::Approx(quad).margin(1e-8));
        }
    }
}

TEST_CASE("cdf is monotone up to the erf approximation slack") {
    std::mt19937_64 rng(7);
    const ModeDistribution dist = mode_distribution(oracles::random_density(7, rng), 1.0);
    double previous = -1.0;
    for (double t = -10.0; t <= 10.0; t += 0.002) {
        const double value = cdf_eval(dist, t);
        REQUIRE(value >= previous - 5e-5);
        previous = value;
    }
}

TEST_CASE("cdf inversion") {
    cxmat vacuum = cxmat::Zero(3, 3);
    vacuum(0, 0) = 1.0;
    const ModeDistribution dist = mode_distribution(vacuum, 1.0);
    CHECK(std::abs(invert_cdf(dist, 0.5, ErfMode::Accurate)) < 1e-9);
    // vacuum natural-unit density is N(0, 1/2): quantile at Phi(1) is 1/sqrt(2)
    CHECK(invert_cdf(dist, 0.841344746068543, ErfMode::Accurate) ==
          Catch::Approx(1.0 / std::sqrt(2.0)).margin(1e-6));

    std::mt19937_64 rng(55);
    const ModeDistribution random_dist = mode_distribution(oracles::random_density(6, rng), 1.0);
    for (double alpha : {0.01, 0.25, 0.9}) {
        const double t = invert_cdf(random_dist, alpha, ErfMode::Accurate);
        CHECK(cdf_eval(random_dist, t, ErfMode::Accurate) == Catch::Approx(alpha).margin(1e-8));
    }

    CHECK_THROWS_AS(invert_cdf(dist, 0.0), ValidationError);
    CHECK_THROWS_AS(invert_cdf(dist, 1.0), ValidationError);
}

TEST_CASE("brent root finder") {
    const auto cubic = [](double x) { return x * x * x - 2.0 * x - 5.0; };
    const double root = brent_root(cubic, 1.0, 3.0);
    CHECK(std::abs(cubic(root)) <= 1e-10);
    const double tight = brent_root(cubic, 1.0, 3.0, BrentOptions{1e-15, 0.0, 200});
    CHECK(tight == Catch::Approx(2.0945514815423265).epsilon(1e-13));
    CHECK_THROWS_AS(brent_root([](double x) { return x * x + 1.0; }, -1.0, 1.0), ValidationError);
}

TEST_CASE("conditional density of a product state ignores the other mode") {
    // |psi> = (c0|0> + c1|1>) (x) |coherent-ish>, conditional of mode 1 must
    // not depend on the mode-0 sample.
    auto basis = make_basis({2, 4});
    cxvec amps = cxvec::Zero(basis->dimension());
    const complex c0(0.6, 0.0), c1(0.8, 0.0);
    const complex d0(0.9, 0.0), d1(std::sqrt(1.0 - 0.81), 0.0);
    amps(basis->index_of({0, 0})) = c0 * d0;
    amps(basis->index_of({0, 1})) = c0 * d1;
    amps(basis->index_of({1, 0})) = c1 * d0;
    amps(basis->index_of({1, 1})) = c1 * d1;
    const DensityMatrix rho = outer_product(normalized(PureState{basis, amps}));

    const DensityMatrix cond_a = conditional_density(rho, {0.3}, 1, 2.0);
    const DensityMatrix cond_b = conditional_density(rho, {-1.7}, 1, 2.0);
    CHECK((cond_a.entries - cond_b.entries).cwiseAbs().maxCoeff() < 1e-10);
    CHECK(std::abs(cond_a.trace_real() - 1.0) < 1e-12);

    const DensityMatrix marginal = partial_trace(rho, {1});
    CHECK((cond_a.entries - marginal.entries).cwiseAbs().maxCoeff() < 1e-10);
}

TEST_CASE("conditional density matches the joint-density ratio") {
    Circuit circuit;
    circuit.space = {2, 6};
    circuit.gates = {beamsplitter(0, 1, M_PI / 4.0)};
    circuit.input = OccupationVector{1, 0};
    const ApplyResult applied = apply_circuit(circuit, {});
    const DensityMatrix rho = outer_product(applied.state);
    const double hbar = 2.0;

    for (double s0 : {-0.9, 0.4, 1.6}) {
        const DensityMatrix cond = conditional_density(rho, {s0}, 1, hbar);
        const ModeDistribution dist = mode_distribution(cond, hbar);
        // marginal density of the observed prefix, by quadrature of the joint
        const double marginal = oracles::adaptive_simpson(
            [&](double y) { return eval_joint_density(rho, {s0, y}, hbar); }, -20.0, 20.0, 1e-13);
        for (int k = 0; k < 200; ++k) {
            const double y = -5.0 + 10.0 * k / 199.0;
            const double expected = eval_joint_density(rho, {s0, y}, hbar) / marginal;
            // natural-unit density -> physical density
            const double actual = pdf_eval(dist, y / std::sqrt(hbar)) / std::sqrt(hbar);
            REQUIRE(actual == Catch::Approx(expected).margin(1e-6));
        }
    }
}

TEST_CASE("conditional density in a zero-density region is degenerate") {
    // mode 0 in |1>: its position density vanishes at the origin
    auto basis = make_basis({2, 3});
    const DensityMatrix rho = outer_product(fock_state(basis, {1, 0}));
    CHECK_THROWS_AS(conditional_density(rho, {0.0}, 1, 2.0), SimulationError);
}

TEST_CASE("conditional density argument checks") {
    auto basis = make_basis({2, 3});
    const DensityMatrix rho = outer_product(vacuum_state(basis));
    CHECK_THROWS_AS(conditional_density(rho, {0.1, 0.2}, 1, 2.0), ValidationError);
    CHECK_THROWS_AS(conditional_density(rho, {}, 2, 2.0), ValidationError);
    CHECK_THROWS_AS(conditional_density(rho, {}, 0, -1.0), ValidationError);
}
