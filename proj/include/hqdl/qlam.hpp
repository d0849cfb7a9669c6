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
 * Linear-algebra module emulation: amplitude-encoded states, block-encoding
 * application, amplitude-estimation readout and overlap estimation, each
 * under a selectable noise model.
 */

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "hqdl/error.hpp"
#include "hqdl/qam.hpp"
#include "hqdl/random.hpp"
#include "hqdl/resource.hpp"

namespace hqdl {

/// Oracle states are unknown (the output of an earlier layer) and every use
/// counts as oracle queries; Known states (e.g. a Chebyshev basis vector)
/// have a classical description and only contribute circuit depth.
enum class PrepKind { Oracle, Known };

struct AmplitudeState {
    std::vector<double> amplitudes;
    double prep_cost = 1.0; ///< T-depth of the state-preparation unitary
    PrepKind kind = PrepKind::Oracle;

    [[nodiscard]] std::size_t dimension() const { return amplitudes.size(); }
};

enum class NoiseMode { Exact, Bounded, Stochastic };

inline std::string_view to_string(NoiseMode m) {
    switch (m) {
    case NoiseMode::Exact: return "exact";
    case NoiseMode::Bounded: return "bounded";
    case NoiseMode::Stochastic: return "stochastic";
    }
    return "?";
}

inline NoiseMode parse_noise_mode(std::string_view s) {
    if (s == "exact") return NoiseMode::Exact;
    if (s == "bounded") return NoiseMode::Bounded;
    if (s == "stochastic") return NoiseMode::Stochastic;
    fail(ErrorCode::InvalidArgument, "unknown noise mode '" + std::string(s) +
                                         "' (expected exact, bounded or stochastic)");
}

/// Estimator error behaviour.
///  - exact: no error;
///  - bounded: uniform in [-delta, delta], so |error| <= delta always;
///  - stochastic: centred Gaussian, std delta/2, truncated at +-2 delta.
class NoiseModel {
  public:
    explicit NoiseModel(NoiseMode mode = NoiseMode::Exact, std::uint64_t seed = 0)
        : mode_(mode), rng_(seed) {}

    [[nodiscard]] NoiseMode mode() const { return mode_; }
    [[nodiscard]] bool exact() const { return mode_ == NoiseMode::Exact; }
    RandomSource &rng() { return rng_; }

    double draw_error(double delta) {
        switch (mode_) {
        case NoiseMode::Exact:
            return 0.0;
        case NoiseMode::Bounded:
            return rng_.uniform(-delta, delta);
        case NoiseMode::Stochastic:
            for (;;) {
                const double e = rng_.normal(0.0, 0.5 * delta);
                if (std::abs(e) <= 2.0 * delta) {
                    return e;
                }
            }
        }
        return 0.0;
    }

  private:
    NoiseMode mode_;
    RandomSource rng_;
};

using PrepCostModel = std::function<double(std::size_t)>;

namespace prep {

/// Generic dense state preparation, 2d.
inline PrepCostModel dense() {
    return [](std::size_t d) { return 2.0 * static_cast<double>(d); };
}

inline double log2_dim(std::size_t d) {
    return std::max(1.0, std::log2(static_cast<double>(d)));
}

/// Re-preparation from r classical coefficients: r (log2 d)^2.
inline PrepCostModel polylog(std::size_t r) {
    return [r](std::size_t d) {
        const double l = log2_dim(d);
        return static_cast<double>(std::max<std::size_t>(r, 1)) * l * l;
    };
}

/// Conversion of an index-parallel digital register into amplitudes: one
/// arccos evaluation for the rotation angle plus ceil(log2 d) controlled
/// rotations.
inline PrepCostModel digital(const CostTable &costs, int word_bits, int qfbe_iters = 16) {
    const double angle = arccos_depth(costs, word_bits, qfbe_iters);
    return [angle](std::size_t d) { return angle + std::ceil(log2_dim(d)); };
}

} // namespace prep

inline double norm2(std::span<const double> v) {
    double s = 0.0;
    for (double x : v) {
        s += x * x;
    }
    return std::sqrt(s);
}

inline AmplitudeState prepare_state(std::span<const double> v, const PrepCostModel &cost = prep::dense(),
                                    PrepKind kind = PrepKind::Oracle) {
    require(!v.empty(), ErrorCode::ZeroVector, "cannot prepare an empty state");
    const double n = norm2(v);
    require(n > 0.0 && std::isfinite(n), ErrorCode::ZeroVector, "cannot prepare the zero vector");
    AmplitudeState s;
    s.amplitudes.assign(v.begin(), v.end());
    for (auto &a : s.amplitudes) {
        a /= n;
    }
    s.prep_cost = cost(v.size());
    require(s.prep_cost > 0.0, ErrorCode::InvalidArgument, "state preparation cost must be positive");
    s.kind = kind;
    return s;
}

/// (alpha, a, delta)-block-encoding of a real m x n matrix.
struct BlockEncoding {
    Eigen::MatrixXd matrix;
    double alpha = 1.0;
    std::size_t ancillas = 1;
    double encoding_error = 0.0;
    double depth = 1.0; ///< T-depth of one application of U_A

    static BlockEncoding of(Eigen::MatrixXd A, std::size_t ancillas = 1,
                            double encoding_error = 0.0) {
        BlockEncoding be;
        be.alpha = spectral_norm(A);
        if (be.alpha == 0.0) {
            be.alpha = 1.0;
        }
        const double l = prep::log2_dim(static_cast<std::size_t>(std::max(A.rows(), A.cols())));
        be.depth = l * l;
        be.matrix = std::move(A);
        be.ancillas = ancillas;
        be.encoding_error = encoding_error;
        return be;
    }

    static double spectral_norm(const Eigen::MatrixXd &A) {
        if (A.size() == 0) {
            return 0.0;
        }
        Eigen::JacobiSVD<Eigen::MatrixXd> svd(A);
        return svd.singularValues()(0);
    }

    void validate() const {
        require(encoding_error >= 0.0, ErrorCode::InvalidArgument,
                "block-encoding error must be non-negative");
        const double s = spectral_norm(matrix);
        require(alpha >= s * (1.0 - 1e-12), ErrorCode::InvalidArgument,
                "block-encoding alpha " + std::to_string(alpha) + " below spectral norm " +
                    std::to_string(s));
    }
};

struct BlockEncodingResult {
    AmplitudeState state;
    double success_probability = 0.0;
};

/// Post-selected output A psi / ||A psi||. The success probability is
/// ||A psi||^2 / alpha^2. With `postselect`, the ledger's shots are inflated
/// by 1 / success_probability.
inline BlockEncodingResult apply_block_encoding(const BlockEncoding &be, const AmplitudeState &psi,
                                                NoiseModel &noise, ResourceLedger &ledger,
                                                bool postselect = false) {
    be.validate();
    require(static_cast<std::size_t>(be.matrix.cols()) == psi.dimension(),
            ErrorCode::DimensionMismatch,
            "block-encoded matrix has " + std::to_string(be.matrix.cols()) +
                " columns, state has dimension " + std::to_string(psi.dimension()));
    const Eigen::Map<const Eigen::VectorXd> v(psi.amplitudes.data(),
                                              static_cast<Eigen::Index>(psi.dimension()));
    Eigen::VectorXd out = be.matrix * v / be.alpha;
    require(out.norm() > 1e-15, ErrorCode::DegenerateState, "A psi is the zero vector");
    if (!noise.exact() && be.encoding_error > 0.0) {
        Eigen::VectorXd dir(out.size());
        for (Eigen::Index i = 0; i < dir.size(); ++i) {
            dir(i) = noise.rng().normal();
        }
        const double magnitude = std::abs(noise.draw_error(be.encoding_error));
        const double cap = noise.mode() == NoiseMode::Bounded ? be.encoding_error
                                                              : 2.0 * be.encoding_error;
        out += std::min(magnitude, cap) * dir / dir.norm();
    }
    ScopedAncilla anc(ledger.ancilla(), be.ancillas);
    BlockEncodingResult r;
    r.success_probability = std::min(1.0, out.squaredNorm());
    out.normalize();
    r.state.amplitudes.assign(out.data(), out.data() + out.size());
    r.state.prep_cost = psi.prep_cost + be.depth;
    r.state.kind = psi.kind;
    ledger.add_tdepth(be.depth);
    if (postselect) {
        ledger.apply_postselection(r.success_probability);
    }
    return r;
}

/// Oracle queries per amplitude-estimation call at precision delta. QAE
/// needs O(1/delta) queries; pi/delta is the phase-grid constant.
inline std::uint64_t qae_queries(double delta) {
    return static_cast<std::uint64_t>(std::ceil(M_PI / delta));
}

inline void check_precision(double delta) {
    require(delta > 0.0 && delta < 1.0, ErrorCode::InvalidPrecision,
            "precision must lie in (0, 1), got " + std::to_string(delta));
}

inline double qae_estimate(double p, double delta, NoiseModel &noise, ResourceLedger &ledger) {
    check_precision(delta);
    require(p >= 0.0 && p <= 1.0, ErrorCode::InvalidArgument,
            "probability must lie in [0, 1], got " + std::to_string(p));
    ledger.add_queries(qae_queries(delta));
    ledger.add_shots(1);
    return std::clamp(p + noise.draw_error(delta), 0.0, 1.0);
}

/// Signed overlap <x, y> from a Hadamard-test probability (1 + <x,y>)/2,
/// estimated to delta/2 and mapped back affinely (so the overlap error is
/// at most delta in bounded mode). Queries are weighted by the preparation
/// cost of the Oracle-kind states; depth by both preparations.
inline double inner_product_estimate(const AmplitudeState &x, const AmplitudeState &y, double delta,
                                     NoiseModel &noise, ResourceLedger &ledger) {
    check_precision(delta);
    require(x.dimension() == y.dimension(), ErrorCode::DimensionMismatch,
            "overlap of states with different dimensions");
    double s = 0.0;
    for (std::size_t i = 0; i < x.dimension(); ++i) {
        s += x.amplitudes[i] * y.amplitudes[i];
    }
    s = std::clamp(s, -1.0, 1.0);
    const double p = 0.5 * (1.0 + s);
    const double p_hat = std::clamp(p + noise.draw_error(0.5 * delta), 0.0, 1.0);

    const auto q = static_cast<double>(qae_queries(delta));
    double oracle_cost = 0.0;
    for (const auto *st : {&x, &y}) {
        if (st->kind == PrepKind::Oracle) {
            oracle_cost += st->prep_cost;
        }
    }
    ledger.add_queries(static_cast<std::uint64_t>(std::ceil(q * oracle_cost - 1e-9)));
    ledger.add_tdepth(q * (x.prep_cost + y.prep_cost));
    ledger.add_shots(1);
    return 2.0 * p_hat - 1.0;
}

/// Multinomial draw with probabilities |amplitude|^2, as counts per index.
inline std::vector<std::uint64_t> sample_measure(const AmplitudeState &psi, std::uint64_t shots,
                                                 RandomSource &rng, ResourceLedger &ledger) {
    require(shots >= 1, ErrorCode::InvalidArgument, "need at least one shot");
    std::vector<std::uint64_t> counts(psi.dimension(), 0);
    std::uint64_t remaining = shots;
    double mass = 1.0;
    for (std::size_t i = 0; i < psi.dimension() && remaining > 0; ++i) {
        const double p = psi.amplitudes[i] * psi.amplitudes[i];
        if (i + 1 == psi.dimension()) {
            counts[i] = remaining;
            break;
        }
        const double cond = mass > 0.0 ? std::clamp(p / mass, 0.0, 1.0) : 0.0;
        counts[i] = rng.binomial(remaining, cond);
        remaining -= counts[i];
        mass -= p;
    }
    ledger.add_shots(shots);
    ledger.add_tdepth(psi.prep_cost);
    return counts;
}

/// Block concatenation: head h's amplitudes, scaled by w_h, occupy index block h.
inline AmplitudeState lcu_concat(std::span<const AmplitudeState> states, std::span<const double> weights,
                                 ResourceLedger &ledger, const CostTable &costs = {},
                                 int word_bits = kDefaultFormat.total_bits) {
    require(!states.empty() && states.size() == weights.size(), ErrorCode::InvalidArgument,
            "lcu_concat needs one weight per state");
    const std::size_t D = states[0].dimension();
    std::vector<double> stacked;
    stacked.reserve(D * states.size());
    double depth = 0.0;
    for (std::size_t h = 0; h < states.size(); ++h) {
        require(states[h].dimension() == D, ErrorCode::DimensionMismatch,
                "lcu_concat states differ in dimension");
        for (double a : states[h].amplitudes) {
            stacked.push_back(weights[h] * a);
        }
        depth += states[h].prep_cost;
    }
    depth += static_cast<double>(states.size()) * costs.adder(word_bits);
    const double n = norm2(stacked);
    require(n > 0.0, ErrorCode::ZeroVector, "lcu_concat of zero-weighted states");
    for (auto &a : stacked) {
        a /= n;
    }
    ledger.add_tdepth(depth);
    AmplitudeState out;
    out.amplitudes = std::move(stacked);
    out.prep_cost = depth;
    out.kind = PrepKind::Oracle;
    return out;
}

} // namespace hqdl
