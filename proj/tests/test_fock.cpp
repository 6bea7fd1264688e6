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

#include "cvborn/fock.hpp"
#include "cvborn/gates.hpp"
#include "support/oracles.hpp"

using namespace cvborn;

TEST_CASE("space dimension follows the binomial formula") {
    CHECK(space_dimension({1, 7}) == 7);
    CHECK(space_dimension({2, 3}) == 6);
    CHECK(space_dimension({3, 1}) == 1);
    CHECK(space_dimension({4, 10}) == 715);
    CHECK_THROWS_AS(space_dimension({0, 3}), ValidationError);
    CHECK_THROWS_AS(space_dimension({2, 0}), ValidationError);
}

TEST_CASE("basis enumeration is total-major and lexicographic") {
    CHECK(enumerate_basis({2, 2}) ==
          std::vector<OccupationVector>{{0, 0}, {0, 1}, {1, 0}});
    CHECK(enumerate_basis({1, 3}) == std::vector<OccupationVector>{{0}, {1}, {2}});
    CHECK(enumerate_basis({2, 1}) == std::vector<OccupationVector>{{0, 0}});

    for (int d = 1; d <= 4; ++d) {
        for (int c = 1; c <= 5; ++c) {
            CHECK(static_cast<std::int64_t>(enumerate_basis({d, c}).size()) ==
                  space_dimension({d, c}));
        }
    }
}

TEST_CASE("basis index inverts the enumeration") {
    FockBasis basis({2, 2});
    CHECK(basis.index_of({0, 0}) == 0);
    CHECK(basis.index_of({1, 0}) == 2);
    CHECK_THROWS_AS(basis.index_of({1, 1}), ValidationError);

    for (int d = 1; d <= 4; ++d) {
        for (int c = 1; c <= 6; ++c) {
            FockBasis b({d, c});
            for (std::int64_t i = 0; i < b.dimension(); ++i) {
                REQUIRE(b.index_of(b.occupation_of(i)) == i);
            }
        }
    }
}

TEST_CASE("outer product of a pure state") {
    auto basis = make_basis({2, 3});
    const PureState vac = vacuum_state(basis);
    const DensityMatrix rho = outer_product(vac);
    CHECK(rho.entries(0, 0) == complex(1.0, 0.0));
    CHECK(rho.entries.cwiseAbs().sum() == 1.0);

    std::mt19937_64 rng(5);
    std::normal_distribution<double> gauss;
    cxvec amps(basis->dimension());
    for (Eigen::Index i = 0; i < amps.size(); ++i) amps(i) = complex(gauss(rng), gauss(rng));
    const PureState state = normalized(PureState{basis, amps});
    const DensityMatrix r = outer_product(state);
    CHECK(std::abs(r.trace_real() - 1.0) < 1e-12);
    validate(r);
    // rank one: all 2x2 minors vanish
    double worst = 0.0;
    for (Eigen::Index i = 0; i < 4; ++i) {
        for (Eigen::Index j = 0; j < 4; ++j) {
            worst = std::max(worst,
                             std::abs(r.entries(i, i) * r.entries(j, j) -
                                      r.entries(i, j) * r.entries(j, i)));
        }
    }
    CHECK(worst < 1e-10);
}

TEST_CASE("partial trace on product and entangled states") {
    auto basis = make_basis({2, 2});

    const DensityMatrix vac2 = outer_product(vacuum_state(basis));
    const DensityMatrix traced = partial_trace(vac2, {1});
    CHECK(traced.basis->dimension() == 2);
    CHECK(std::abs(traced.entries(0, 0).real() - 1.0) < 1e-14);

    // (|0,1> + |1,0>)/sqrt(2), keep mode 0 -> diag(1/2, 1/2)
    cxvec amps = cxvec::Zero(basis->dimension());
    amps(basis->index_of({0, 1})) = 1.0 / std::sqrt(2.0);
    amps(basis->index_of({1, 0})) = 1.0 / std::sqrt(2.0);
    const DensityMatrix bell = outer_product(PureState{basis, amps});
    const DensityMatrix half = partial_trace(bell, {0});
    CHECK(std::abs(half.entries(0, 0).real() - 0.5) < 1e-12);
    CHECK(std::abs(half.entries(1, 1).real() - 0.5) < 1e-12);
    CHECK(std::abs(half.entries(0, 1)) < 1e-12);

    CHECK_THROWS_AS(partial_trace(bell, {}), ValidationError);
    CHECK_THROWS_AS(partial_trace(bell, {2}), ValidationError);
}

TEST_CASE("partial trace matches brute-force contraction on random states") {
    std::mt19937_64 rng(2024);
    for (int d = 2; d <= 3; ++d) {
        for (int c = 2; c <= 5; ++c) {
            FockBasis basis({d, c});
            const cxmat rho = oracles::random_density(static_cast<int>(basis.dimension()), rng);
            const DensityMatrix dm{make_basis({d, c}), rho};
            for (int keep_mode = 0; keep_mode < d; ++keep_mode) {
                const std::vector<int> keep{keep_mode};
                const DensityMatrix reduced = partial_trace(dm, keep);
                const cxmat expected =
                    oracles::partial_trace_brute(rho, basis, keep, *reduced.basis);
                CHECK((reduced.entries - expected).cwiseAbs().maxCoeff() < 1e-12);
                CHECK(std::abs(reduced.trace_real() - 1.0) < 1e-10);
                validate(reduced);
                // Hermitian PSD in, Hermitian PSD out
                Eigen::SelfAdjointEigenSolver<cxmat> eigh(reduced.entries);
                CHECK(eigh.eigenvalues().minCoeff() > -1e-10);
            }
        }
    }
}

TEST_CASE("partial trace composes over disjoint stages") {
    std::mt19937_64 rng(77);
    FockBasis basis({3, 4});
    const DensityMatrix rho{make_basis({3, 4}),
                            oracles::random_density(static_cast<int>(basis.dimension()), rng)};
    // trace out mode 2, then mode 1, versus keeping mode 0 directly
    const DensityMatrix step1 = partial_trace(rho, {0, 1});
    const DensityMatrix step2 = partial_trace(step1, {0});
    const DensityMatrix direct = partial_trace(rho, {0});
    CHECK((step2.entries - direct.entries).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("normalize rescales the trace and rejects degenerate states") {
    auto basis = make_basis({1, 3});
    DensityMatrix rho{basis, cxmat::Zero(3, 3)};
    rho.entries(0, 0) = 2.0;
    const DensityMatrix unit = normalize(rho);
    CHECK(std::abs(unit.trace_real() - 1.0) < 1e-14);

    const DensityMatrix again = normalize(unit);
    CHECK((again.entries - unit.entries).cwiseAbs().maxCoeff() < 1e-14);

    DensityMatrix zero{basis, cxmat::Zero(3, 3)};
    CHECK_THROWS_AS(normalize(zero), SimulationError);
}

TEST_CASE("density matrix validation reports violations") {
    auto basis = make_basis({1, 2});
    DensityMatrix bad{basis, cxmat::Zero(2, 2)};
    bad.entries << complex(0.5), complex(0.3, 0.1), complex(0.3, 0.2), complex(0.5);
    CHECK_THROWS_AS(validate(bad), ValidationError);

    DensityMatrix negative{basis, cxmat::Zero(2, 2)};
    negative.entries(0, 0) = 1.5;
    negative.entries(1, 1) = -0.5;
    CHECK_THROWS_AS(validate(negative), ValidationError);
}
