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

#pragma once

/**
 * @file
 * Data transfer between amplitude-encoded states and classical memory:
 * the l-infinity tomography baseline and the two-stage Chebyshev
 * coefficient protocol (estimate r coefficients, re-prepare the truncated
 * state), with their resource accounting.
 */

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "hqdl/chebyshev.hpp"
#include "hqdl/csv.hpp"
#include "hqdl/error.hpp"
#include "hqdl/qlam.hpp"
#include "hqdl/resource.hpp"

namespace hqdl {

enum class Protocol { Linf, Dcd };

inline std::string_view to_string(Protocol p) { return p == Protocol::Linf ? "linf" : "dcd"; }

inline Protocol parse_protocol(std::string_view s) {
    if (s == "linf") return Protocol::Linf;
    if (s == "dcd") return Protocol::Dcd;
    fail(ErrorCode::InvalidArgument, "unknown protocol '" + std::string(s) + "' (expected linf or dcd)");
}

/// Shots per tomography pass: ceil(c_tomo ln(d) / eps^2), at least one.
inline std::uint64_t tomography_shots(std::size_t d, double epsilon, double c_tomo = 1.0) {
    check_precision(epsilon);
    const double n = std::ceil(c_tomo * std::log(static_cast<double>(d)) / (epsilon * epsilon));
    return std::max<std::uint64_t>(1, static_cast<std::uint64_t>(n));
}

/// Amplitude readout to precision eps in the max norm.
///
/// Exact mode returns psi. Bounded mode puts every coordinate on the edge
/// of the guarantee: off by exactly eps, with an independent random sign.
/// Stochastic mode samples: magnitudes are square roots of empirical
/// frequencies, and the interference pass recovers the sign exactly where
/// |psi_i| >= 2 eps and returns a random sign below that.
///
/// Charges 2 * shots (magnitude pass + sign pass), each a run of the
/// depth-C_psi preparation circuit.
inline std::vector<double> linf_tomography(const AmplitudeState &psi, double epsilon, NoiseModel &noise,
                                           ResourceLedger &ledger, double c_tomo = 1.0) {
    check_precision(epsilon);
    const std::size_t d = psi.dimension();
    const std::uint64_t shots = tomography_shots(d, epsilon, c_tomo);
    std::vector<double> out(psi.amplitudes);
    switch (noise.mode()) {
    case NoiseMode::Exact:
        break;
    case NoiseMode::Bounded:
        for (auto &v : out) {
            v += noise.rng().coin() ? epsilon : -epsilon;
        }
        break;
    case NoiseMode::Stochastic: {
        RandomSource &rng = noise.rng();
        std::uint64_t remaining = shots;
        double mass = 1.0;
        for (std::size_t i = 0; i < d; ++i) {
            const double p = psi.amplitudes[i] * psi.amplitudes[i];
            std::uint64_t count = 0;
            if (i + 1 == d) {
                count = remaining;
            } else if (remaining > 0) {
                count = rng.binomial(remaining, mass > 0.0 ? std::clamp(p / mass, 0.0, 1.0) : 0.0);
            }
            remaining -= count;
            mass -= p;
            const double magnitude =
                std::sqrt(static_cast<double>(count) / static_cast<double>(shots));
            double sign = psi.amplitudes[i] >= 0.0 ? 1.0 : -1.0;
            if (std::abs(psi.amplitudes[i]) < 2.0 * epsilon) {
                sign = rng.coin() ? 1.0 : -1.0;
            }
            out[i] = sign * magnitude;
        }
        break;
    }
    }
    ledger.add_shots(2 * shots);
    ledger.add_tdepth(psi.prep_cost);
    return out;
}

/// Preparation cost of |T_j>: (log2 d)^2 from the three-term recurrence.
inline double basis_prep_cost(std::size_t d) { return prep::polylog(1)(d); }

/// Stage 1: estimate c_j = <T_j|psi> for j < r to precision delta.
inline CoeffVector dcd_q2c(const AmplitudeState &psi, std::size_t r, double delta,
                           const ChebyshevBasis &basis, NoiseModel &noise, ResourceLedger &ledger) {
    const std::size_t d = basis.dimension();
    require(psi.dimension() == d, ErrorCode::DimensionMismatch, "state and basis dimensions differ");
    require(r <= d, ErrorCode::RankTooLarge,
            "rank " + std::to_string(r) + " exceeds dimension " + std::to_string(d));
    check_precision(delta);
    CoeffVector c;
    c.dimension = d;
    c.precision = delta;
    c.coefficients.reserve(r);
    AmplitudeState tj;
    tj.prep_cost = basis_prep_cost(d);
    tj.kind = PrepKind::Known;
    for (std::size_t j = 0; j < r; ++j) {
        const auto row = basis.row(j);
        tj.amplitudes.assign(row.begin(), row.end());
        c.coefficients.push_back(inner_product_estimate(tj, psi, delta, noise, ledger));
    }
    return c;
}

/// Stage 2: load the r coefficients, evaluate sum_j c_j T_ji and prepare the
/// renormalized state (cost r (log2 d)^2 unless overridden).
inline AmplitudeState dcd_c2q(const CoeffVector &c, const ChebyshevBasis &basis, ResourceLedger &ledger,
                              const std::optional<PrepCostModel> &cost = std::nullopt) {
    const std::vector<double> v = cheb_reconstruct(c, basis, true);
    const PrepCostModel model = cost ? *cost : prep::polylog(c.rank());
    AmplitudeState s = prepare_state(v, model);
    ledger.add_tdepth(s.prep_cost);
    ledger.add_qram_words(c.rank());
    return s;
}

struct TransferParams {
    Protocol protocol = Protocol::Dcd;
    std::size_t rank = 0;  ///< dcd
    double delta = 0.01;   ///< dcd
    double epsilon = 0.01; ///< linf
    double c_tomo = 1.0;   ///< linf
};

struct TransferReport {
    Protocol protocol = Protocol::Dcd;
    std::size_t dimension = 0;
    TransferParams params;
    std::vector<double> reconstructed; ///< un-normalized classical reconstruction
    AmplitudeState state;              ///< renormalized state handed to the next layer
    double l2_error = 0.0;
    double linf_error = 0.0;
    ResourceLedger ledger;

    [[nodiscard]] double overhead() const { return hqdl::overhead(ledger); }

    static std::string csv_header() {
        return "protocol,d,param,delta,l2_err,linf_err,tdepth,shots,queries,Q";
    }

    [[nodiscard]] std::string csv_row() const {
        const bool dcd = protocol == Protocol::Dcd;
        return csv::join({std::string(to_string(protocol)), std::to_string(dimension),
                          dcd ? std::to_string(params.rank) : csv::num(params.epsilon),
                          dcd ? csv::num(params.delta) : std::string(), csv::num(l2_error),
                          csv::num(linf_error), csv::num(ledger.t_depth()),
                          std::to_string(ledger.shots()), std::to_string(ledger.oracle_queries()),
                          csv::num(overhead())});
    }
};

/// One quantum-to-classical then classical-to-quantum cycle; errors are
/// measured on the un-normalized reconstruction against psi.
inline TransferReport transfer_roundtrip(const AmplitudeState &psi, const TransferParams &params,
                                         const ChebyshevBasis *basis, NoiseModel &noise,
                                         ResourceLedger &ledger) {
    TransferReport rep;
    rep.protocol = params.protocol;
    rep.dimension = psi.dimension();
    rep.params = params;
    if (params.protocol == Protocol::Linf) {
        rep.reconstructed = linf_tomography(psi, params.epsilon, noise, ledger, params.c_tomo);
        rep.state = prepare_state(rep.reconstructed, prep::dense());
        ledger.add_tdepth(rep.state.prep_cost);
        ledger.add_qram_words(psi.dimension());
    } else {
        require(basis != nullptr, ErrorCode::InvalidArgument, "dcd transfer needs a Chebyshev basis");
        const CoeffVector c = dcd_q2c(psi, params.rank, params.delta, *basis, noise, ledger);
        rep.reconstructed = cheb_reconstruct(c, *basis, false);
        rep.state = dcd_c2q(c, *basis, ledger);
    }
    double l2 = 0.0, linf = 0.0;
    for (std::size_t i = 0; i < psi.dimension(); ++i) {
        const double e = std::abs(rep.reconstructed[i] - psi.amplitudes[i]);
        l2 += e * e;
        linf = std::max(linf, e);
    }
    rep.l2_error = std::sqrt(l2);
    rep.linf_error = linf;
    rep.ledger = ledger;
    return rep;
}

} // namespace hqdl
