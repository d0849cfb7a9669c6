// Copyright 2026 The hqdl Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include <cmath>

#include <catch_amalgamated.hpp>

#include "hqdl/dtm.hpp"

using namespace hqdl;
using Catch::Matchers::WithinAbs;

namespace {

AmplitudeState random_state(std::size_t d, RandomSource &rng) {
    std::vector<double> v(d);
    for (auto &x : v) {
        x = rng.normal();
    }
    return prepare_state(v);
}

} // namespace

TEST_CASE("tomography shot formula", "[dtm]") {
    CHECK(tomography_shots(1024, 0.01) == 69315);
    CHECK(tomography_shots(64, 0.1) == static_cast<std::uint64_t>(std::ceil(std::log(64.0) / 0.01)));
    CHECK(tomography_shots(1, 0.5) == 1);
    CHECK(tomography_shots(1024, 0.01, 2.0) == 138630);
    CHECK_THROWS_AS(tomography_shots(16, 1.0), Error);
}

TEST_CASE("linf_tomography examples", "[dtm]") {
    std::vector<double> e0(16, 0.0);
    e0[0] = 1.0;
    const auto psi = prepare_state(e0);
    for (auto mode : {NoiseMode::Bounded, NoiseMode::Stochastic}) {
        NoiseModel noise(mode, 12);
        ResourceLedger ledger;
        const auto out = linf_tomography(psi, 0.1, noise, ledger);
        for (std::size_t i = 0; i < 16; ++i) {
            CHECK_THAT(out[i], WithinAbs(e0[i], 0.1));
        }
        CHECK(ledger.shots() == 2 * tomography_shots(16, 0.1));
        CHECK(ledger.t_depth() == psi.prep_cost);
    }

    RandomSource rng(13);
    const auto r = random_state(32, rng);
    NoiseModel exact;
    ResourceLedger ledger;
    CHECK(linf_tomography(r, 0.05, exact, ledger) == r.amplitudes);
    CHECK(ledger.shots() == 2 * tomography_shots(32, 0.05));
}

TEST_CASE("stochastic tomography magnitudes and sign rule", "[dtm][property]") {
    RandomSource rng(14);
    const double eps = 0.05;
    int within = 0;
    const int trials = 50;
    for (int t = 0; t < trials; ++t) {
        const auto psi = random_state(64, rng);
        NoiseModel noise(NoiseMode::Stochastic, 100 + static_cast<std::uint64_t>(t));
        ResourceLedger ledger;
        const auto out = linf_tomography(psi, eps, noise, ledger);
        double worst = 0.0;
        for (std::size_t i = 0; i < 64; ++i) {
            const double a = psi.amplitudes[i];
            worst = std::max(worst, std::abs(std::abs(out[i]) - std::abs(a)));
            if (std::abs(a) >= 2.0 * eps) {
                REQUIRE(out[i] * a >= 0.0);
            }
        }
        within += worst <= eps ? 1 : 0;
    }
    CHECK(within >= 45);
}

TEST_CASE("dcd_q2c examples", "[dtm]") {
    const auto b4 = build_basis(4);
    const auto row2 = b4.row(2);
    NoiseModel exact;
    ResourceLedger ledger;
    const auto c = dcd_q2c(prepare_state(row2), 4, 0.01, b4, exact, ledger);
    const std::vector<double> want{0, 0, 1, 0};
    for (std::size_t j = 0; j < 4; ++j) {
        CHECK_THAT(c.coefficients[j], WithinAbs(want[j], 1e-14));
    }

    RandomSource rng(15);
    const auto b16 = build_basis(16);
    const auto psi = random_state(16, rng);
    const auto q = dcd_q2c(psi, 16, 0.01, b16, exact, ledger);
    const auto f = cheb_forward(psi.amplitudes, 16, b16);
    for (std::size_t j = 0; j < 16; ++j) {
        CHECK_THAT(q.coefficients[j], WithinAbs(f.coefficients[j], 1e-14));
    }

    AmplitudeState unit_cost = psi;
    unit_cost.prep_cost = 1.0;
    ResourceLedger counted;
    dcd_q2c(unit_cost, 8, 0.01, b16, exact, counted);
    CHECK(counted.oracle_queries() == 2520);
    CHECK(counted.shots() == 8);

    NoiseModel bounded(NoiseMode::Bounded, 2);
    const auto noisy = dcd_q2c(psi, 16, 0.02, b16, bounded, ledger);
    for (std::size_t j = 0; j < 16; ++j) {
        CHECK_THAT(noisy.coefficients[j], WithinAbs(f.coefficients[j], 0.02));
    }
    CHECK_THROWS_AS(dcd_q2c(psi, 17, 0.01, b16, exact, ledger), Error);
    CHECK_THROWS_AS(dcd_q2c(psi, 4, 0.01, b4, exact, ledger), Error);
}

TEST_CASE("dcd_c2q examples", "[dtm]") {
    const auto b = build_basis(256);
    ResourceLedger ledger;
    CoeffVector e0{{1.0}, 0.0, 256};
    const auto s = dcd_c2q(e0, b, ledger);
    for (std::size_t i = 0; i < 256; ++i) {
        REQUIRE_THAT(s.amplitudes[i], WithinAbs(b.at(0, i), 1e-15));
    }

    RandomSource rng(16);
    const auto psi = random_state(256, rng);
    const auto full = dcd_c2q(cheb_forward(psi.amplitudes, 256, b), b, ledger);
    for (std::size_t i = 0; i < 256; ++i) {
        REQUIRE_THAT(full.amplitudes[i], WithinAbs(psi.amplitudes[i], 1e-9));
    }

    ResourceLedger l16;
    const auto s16 = dcd_c2q(cheb_forward(psi.amplitudes, 16, b), b, l16);
    CHECK(s16.prep_cost == 1024.0);
    CHECK(l16.t_depth() == 1024.0);
    CHECK(l16.qram_words() == 16);
}

TEST_CASE("transfer_roundtrip examples", "[dtm]") {
    RandomSource rng(17);
    const auto b = build_basis(64);
    const auto psi = random_state(64, rng);
    NoiseModel exact;
    {
        ResourceLedger ledger;
        TransferParams p;
        p.rank = 64;
        const auto rep = transfer_roundtrip(psi, p, &b, exact, ledger);
        CHECK(rep.l2_error <= 1e-9);
    }
    {
        ResourceLedger ledger;
        TransferParams p;
        p.rank = 10;
        const auto rep = transfer_roundtrip(psi, p, &b, exact, ledger);
        CHECK_THAT(rep.l2_error, WithinAbs(truncation_tail(psi.amplitudes, 10, b), 1e-12));
        CHECK_THAT(norm2(rep.state.amplitudes), WithinAbs(1.0, 1e-12));
    }
    for (double eps : {0.1, 0.03, 0.01}) {
        NoiseModel bounded(NoiseMode::Bounded, 5);
        ResourceLedger ledger;
        TransferParams p;
        p.protocol = Protocol::Linf;
        p.epsilon = eps;
        const auto rep = transfer_roundtrip(psi, p, nullptr, bounded, ledger);
        CHECK(rep.linf_error <= eps * (1 + 1e-12));
        CHECK(rep.ledger.qram_words() == 64);
    }
    TransferParams p;
    CHECK_THROWS_AS(transfer_roundtrip(psi, p, nullptr, exact, *std::make_unique<ResourceLedger>()),
                    Error);
}

TEST_CASE("CSV row reproduces the overhead product", "[dtm]") {
    RandomSource rng(18);
    const auto b = build_basis(256);
    const auto psi = random_state(256, rng);
    NoiseModel noise(NoiseMode::Bounded, 18);
    ResourceLedger ledger;
    TransferParams p;
    p.rank = 16;
    p.delta = 0.01;
    const auto rep = transfer_roundtrip(psi, p, &b, noise, ledger);
    const auto fields = csv::split(rep.csv_row());
    const auto header = csv::split(TransferReport::csv_header());
    REQUIRE(fields.size() == header.size());
    const double tdepth = std::stod(fields[6]);
    const double shots = std::stod(fields[7]);
    const double Q = std::stod(fields[9]);
    CHECK(Q == tdepth * shots);
    CHECK(Q == rep.overhead());
    CHECK(parse_protocol(fields[0]) == Protocol::Dcd);
}
