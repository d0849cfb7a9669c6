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
 * Arithmetic module emulation: reversible fixed-point tensor arithmetic,
 * element-wise nonlinearities and iterative function evaluation, each
 * charged to a ResourceLedger.
 *
 * Cost semantics are element-parallel: an operation applied across an index
 * register costs one layer of its primitive circuit, not one per element.
 * The CostTable constants are a declared hardware stand-in (depth of an
 * adder, multiplier, comparator and register copy as functions of the word
 * size b), not measured circuit depths.
 */

#include <cmath>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "hqdl/error.hpp"
#include "hqdl/fixed_point.hpp"
#include "hqdl/resource.hpp"
#include "hqdl/tensor.hpp"

namespace hqdl {

struct CostTable {
    double adder_coeff = 2.0;      ///< adder depth = adder_coeff * b
    double multiplier_coeff = 4.0; ///< multiplier depth = multiplier_coeff * b^2
    double comparator_coeff = 1.0; ///< comparator depth = comparator_coeff * b
    double copy_coeff = 1.0;       ///< register copy depth = copy_coeff * b

    [[nodiscard]] double adder(int b) const { return adder_coeff * b; }
    [[nodiscard]] double multiplier(int b) const { return multiplier_coeff * b * b; }
    [[nodiscard]] double comparator(int b) const { return comparator_coeff * b; }
    [[nodiscard]] double copy(int b) const { return copy_coeff * b; }
    [[nodiscard]] double mac(int b) const { return multiplier(b) + adder(b); }

    void validate() const {
        require(adder_coeff > 0 && multiplier_coeff > 0 && comparator_coeff > 0 &&
                    copy_coeff > 0,
                ErrorCode::InvalidArgument, "cost table entries must be strictly positive");
    }
};

namespace detail {

/// acc + round(a * b): one multiply-accumulate with rounding after the product.
inline int128_t mac_raw(int128_t acc, const FixedPoint &a, const FixedPoint &b) {
    return acc + round_shift_even(int128_t{a.raw()} * int128_t{b.raw()},
                                  a.format().fraction_bits);
}

inline FixedPoint to_fixed(int128_t raw, FixedFormat format, const char *op) {
    return fx::checked(raw, format, op);
}

inline FixedFormat common_format(const FixedTensor &a, const FixedTensor &b) {
    const FixedFormat fa = format_of(a);
    require(fa == format_of(b), ErrorCode::InvalidArgument,
            "operands use different fixed-point formats");
    return fa;
}

} // namespace detail

inline FixedTensor qadd(const FixedTensor &a, const FixedTensor &b, ResourceLedger &ledger,
                        const CostTable &costs = {}) {
    require_same_shape(a.shape(), b.shape(), "qadd");
    const FixedFormat format = detail::common_format(a, b);
    ScopedAncilla carry(ledger.ancilla(), a.size());
    std::vector<FixedPoint> out;
    out.reserve(a.size());
    for (std::size_t i = 0; i < a.size(); ++i) {
        out.push_back(fx::add(a[i], b[i]));
    }
    ledger.add_tdepth(costs.adder(format.total_bits));
    return {a.shape(), std::move(out)};
}

/// R_{ijkl} = sum_mu S_{i mu j} T_{k mu l}; S is (c_s, d, p), T is (c_t, d, q),
/// the result is (c_s, p, c_t, q). Sequential over mu, parallel over ijkl.
inline FixedTensor tensor_dot(const FixedTensor &S, const FixedTensor &T, ResourceLedger &ledger,
                              const CostTable &costs = {}) {
    require(S.rank() == 3 && T.rank() == 3, ErrorCode::ShapeMismatch,
            "tensor_dot expects rank-3 operands");
    require(S.extent(1) == T.extent(1), ErrorCode::ShapeMismatch,
            "tensor_dot contracted extents differ: " + shape_string(S.shape()) + " vs " +
                shape_string(T.shape()));
    const FixedFormat format = detail::common_format(S, T);
    const std::size_t cs = S.extent(0), d = S.extent(1), p = S.extent(2);
    const std::size_t ct = T.extent(0), q = T.extent(2);
    FixedTensor R({cs, p, ct, q}, fx::zero(format));
    {
        ScopedAncilla products(ledger.ancilla(), R.size() * format.total_bits);
        for (std::size_t i = 0; i < cs; ++i) {
            for (std::size_t j = 0; j < p; ++j) {
                for (std::size_t k = 0; k < ct; ++k) {
                    for (std::size_t l = 0; l < q; ++l) {
                        int128_t acc = 0;
                        for (std::size_t mu = 0; mu < d; ++mu) {
                            acc = detail::mac_raw(acc, S(i, mu, j), T(k, mu, l));
                        }
                        R(i, j, k, l) = detail::to_fixed(acc, format, "tensor_dot");
                    }
                }
            }
        }
    }
    ledger.add_tdepth(static_cast<double>(d) * costs.mac(format.total_bits));
    return R;
}

/// Position-wise linear map over the last axis: Y[..., o] = b[o] + sum_i X[..., i] W[i, o].
/// Parallel over the leading (index-register) axes; the d_in x d_out map
/// itself is sequential, so the depth is d_in * d_out multiply-accumulates.
inline FixedTensor qlinear(const FixedTensor &X, const FixedTensor &W,
                           const std::optional<FixedTensor> &bias, ResourceLedger &ledger,
                           const CostTable &costs = {}) {
    require(W.rank() == 2, ErrorCode::ShapeMismatch, "qlinear weight must be a matrix");
    const std::size_t din = W.extent(0), dout = W.extent(1);
    require(X.shape().back() == din, ErrorCode::ShapeMismatch,
            "qlinear inner dimensions differ: " + shape_string(X.shape()) + " x " +
                shape_string(W.shape()));
    const FixedFormat format = detail::common_format(X, W);
    if (bias) {
        require(bias->size() == dout, ErrorCode::ShapeMismatch, "qlinear bias length mismatch");
        require(format_of(*bias) == format, ErrorCode::InvalidArgument, "bias format mismatch");
    }
    Shape shape = X.shape();
    shape.back() = dout;
    FixedTensor Y(shape, fx::zero(format));
    const std::size_t rows = X.size() / din;
    {
        ScopedAncilla products(ledger.ancilla(), Y.size() * format.total_bits);
        for (std::size_t r = 0; r < rows; ++r) {
            for (std::size_t o = 0; o < dout; ++o) {
                int128_t acc = bias ? (*bias)[o].raw() : 0;
                for (std::size_t i = 0; i < din; ++i) {
                    acc = detail::mac_raw(acc, X[r * din + i], W[i * dout + o]);
                }
                Y[r * dout + o] = detail::to_fixed(acc, format, "qlinear");
            }
        }
    }
    ledger.add_tdepth(static_cast<double>(din * dout) * costs.mac(format.total_bits));
    return Y;
}

// ---------------------------------------------------------------------------
// Newton reciprocal

namespace detail {

/// Power-of-two exponent k with x * 2^k in [0.5, 1].
inline int prescale_exponent(const FixedPoint &x) {
    const double v = x.value();
    int k = 0;
    double s = v;
    while (s > 1.0) {
        s *= 0.5;
        --k;
    }
    while (s < 0.5) {
        s *= 2.0;
        ++k;
    }
    return k;
}

/// y_{k+1} = y_k (2 - x y_k) from y_0 = 1 on an input already in [0.5, 1].
inline FixedPoint newton_core(const FixedPoint &x, int iters) {
    const FixedFormat f = x.format();
    const FixedPoint two = fx::constant(2.0, f);
    FixedPoint y = fx::constant(1.0, f);
    for (int k = 0; k < iters; ++k) {
        y = fx::mul(y, fx::sub(two, fx::mul(x, y)));
    }
    return y;
}

inline void check_iters(int iters) {
    require(iters >= 0 && iters <= 64, ErrorCode::InvalidArgument,
            "iteration count must lie in [0, 64]");
}

} // namespace detail

/// Depth of `iters` Newton steps: two multipliers and one adder each.
inline double reciprocal_depth(const CostTable &costs, int b, int iters) {
    return iters * (2.0 * costs.multiplier(b) + costs.adder(b));
}

/// 1/x for x in (0, 2). The input is shifted into [0.5, 1] (shift tracked and
/// undone on the result) so the seed y_0 = 1 starts with |1 - x y_0| <= 1/2.
inline FixedPoint reciprocal_newton(const FixedPoint &x, int iters, ResourceLedger &ledger,
                                    const CostTable &costs = {}) {
    detail::check_iters(iters);
    const double v = x.value();
    require(v > 0.0 && v < 2.0, ErrorCode::DomainError,
            "reciprocal_newton needs x in (0, 2), got " + std::to_string(v));
    const int k = detail::prescale_exponent(x);
    const FixedPoint y = detail::newton_core(fx::shift(x, k), iters);
    ledger.add_tdepth(reciprocal_depth(costs, x.format().total_bits, iters));
    return fx::shift(y, k);
}

/// Same routine for any positive input; used on classical scalars, so its
/// depth is reported as precompute rather than circuit depth.
inline FixedPoint reciprocal_positive(const FixedPoint &x, int iters, ResourceLedger &ledger,
                                      const CostTable &costs = {}) {
    detail::check_iters(iters);
    require(x.raw() > 0, ErrorCode::DomainError, "reciprocal of a non-positive value");
    const int k = detail::prescale_exponent(x);
    const FixedPoint y = detail::newton_core(fx::shift(x, k), iters);
    ledger.add_precompute(reciprocal_depth(costs, x.format().total_bits, iters));
    return fx::shift(y, k);
}

/// Real-arithmetic reference iterates y_1..y_iters (no pre-scaling).
inline std::vector<double> reciprocal_newton_iterates(double x, int iters, double y0 = 1.0) {
    std::vector<double> out;
    double y = y0;
    for (int k = 0; k < iters; ++k) {
        y = y * (2.0 - x * y);
        out.push_back(y);
    }
    return out;
}

// ---------------------------------------------------------------------------
// arccos by function-value binary expansion

/// With x = cos(pi t), one step maps t -> 2t - b where b = [x <= 0]: the
/// branch bits are exactly the binary digits of t = arccos(x) / pi.
struct QfbeResult {
    FixedPoint theta;
    std::vector<bool> bits;
};

inline double arccos_depth(const CostTable &costs, int b, int iters) {
    return iters * (costs.multiplier(b) + costs.adder(b) + costs.comparator(b));
}

inline QfbeResult arccos_qfbe_detailed(const FixedPoint &x, int iters, ResourceLedger &ledger,
                                       const CostTable &costs = {}) {
    require(iters >= 1 && iters <= 64, ErrorCode::InvalidArgument,
            "QFBE iteration count must lie in [1, 64]");
    const double v = x.value();
    require(v >= -1.0 && v <= 1.0, ErrorCode::DomainError,
            "arccos needs |x| <= 1, got " + std::to_string(v));
    const FixedFormat f = x.format();
    require(f.total_bits - f.fraction_bits >= 4, ErrorCode::InvalidArgument,
            "arccos needs >= 3 integer bits to hold values up to pi");
    const FixedPoint one = fx::constant(1.0, f);
    QfbeResult out;
    out.bits.reserve(static_cast<std::size_t>(iters));
    unsigned __int128 t = 0; // t = sum_k bit_k 2^(iters-1-k)
    FixedPoint xk = x;
    for (int k = 0; k < iters; ++k) {
        const bool bit = xk.raw() <= 0;
        out.bits.push_back(bit);
        t = (t << 1) | static_cast<unsigned>(bit);
        const FixedPoint twice_sq = fx::shift(fx::mul(xk, xk), 1);
        xk = bit ? fx::sub(one, twice_sq) : fx::sub(twice_sq, one);
    }
    // theta = pi t / 2^iters, with pi held to 61 fractional bits.
    constexpr std::int64_t kPiQ61 = 7244019458077122842LL;
    const int128_t scaled = static_cast<int128_t>(t) * kPiQ61; // < 2^126
    const int128_t raw = round_shift_even(scaled, 61 + iters - f.fraction_bits);
    out.theta = fx::checked(raw, f, "arccos");
    ledger.add_tdepth(arccos_depth(costs, f.total_bits, iters));
    return out;
}

inline FixedPoint arccos_qfbe(const FixedPoint &x, int iters, ResourceLedger &ledger,
                              const CostTable &costs = {}) {
    return arccos_qfbe_detailed(x, iters, ledger, costs).theta;
}

// ---------------------------------------------------------------------------
// Element-wise nonlinearities and layers

/// max(0, x) into a fresh output register, controlled on the sign bit.
inline FixedTensor qrelu(const FixedTensor &x, ResourceLedger &ledger, const CostTable &costs = {}) {
    const FixedFormat format = format_of(x);
    ScopedAncilla sign_bits(ledger.ancilla(), x.size());
    ScopedAncilla outputs(ledger.ancilla(), x.size() * format.total_bits);
    std::vector<FixedPoint> out;
    out.reserve(x.size());
    for (const auto &v : x.data()) {
        out.push_back(fx::max0(v));
    }
    ledger.add_tdepth(costs.copy(format.total_bits) + costs.comparator(format.total_bits));
    return {x.shape(), std::move(out)};
}

/// Same-padded 2-D cross-correlation with bias. X is (B, Cin, H, W), the
/// kernel (Cout, Cin, K, K) with K odd, bias has Cout entries. Output
/// positions run in parallel; the Cin K^2 taps are sequential.
inline FixedTensor qconv(const FixedTensor &X, const FixedTensor &kernel, const FixedTensor &bias,
                         ResourceLedger &ledger, const CostTable &costs = {}) {
    require(X.rank() == 4 && kernel.rank() == 4, ErrorCode::ShapeMismatch,
            "qconv expects (B,C,H,W) input and (C,C,K,K) kernel");
    const std::size_t B = X.extent(0), Cin = X.extent(1), H = X.extent(2), W = X.extent(3);
    const std::size_t Cout = kernel.extent(0), K = kernel.extent(2);
    require(kernel.extent(1) == Cin, ErrorCode::ShapeMismatch, "qconv channel mismatch");
    require(kernel.extent(3) == K && K % 2 == 1, ErrorCode::ShapeMismatch,
            "qconv kernel must be square with odd extent");
    require(bias.size() == Cout, ErrorCode::ShapeMismatch, "qconv bias length mismatch");
    const FixedFormat format = detail::common_format(X, kernel);
    require(format_of(bias) == format, ErrorCode::InvalidArgument, "bias format mismatch");
    const auto pad = static_cast<std::ptrdiff_t>(K / 2);
    FixedTensor Y({B, Cout, H, W}, fx::zero(format));
    {
        ScopedAncilla products(ledger.ancilla(), Y.size() * format.total_bits);
        for (std::size_t b = 0; b < B; ++b) {
            for (std::size_t co = 0; co < Cout; ++co) {
                for (std::size_t i = 0; i < H; ++i) {
                    for (std::size_t j = 0; j < W; ++j) {
                        int128_t acc = bias[co].raw();
                        for (std::size_t ci = 0; ci < Cin; ++ci) {
                            for (std::size_t di = 0; di < K; ++di) {
                                const auto ii = static_cast<std::ptrdiff_t>(i + di) - pad;
                                if (ii < 0 || ii >= static_cast<std::ptrdiff_t>(H)) {
                                    continue;
                                }
                                for (std::size_t dj = 0; dj < K; ++dj) {
                                    const auto jj = static_cast<std::ptrdiff_t>(j + dj) - pad;
                                    if (jj < 0 || jj >= static_cast<std::ptrdiff_t>(W)) {
                                        continue;
                                    }
                                    acc = detail::mac_raw(acc, kernel(co, ci, di, dj),
                                                          X(b, ci, static_cast<std::size_t>(ii),
                                                            static_cast<std::size_t>(jj)));
                                }
                            }
                        }
                        Y(b, co, i, j) = detail::to_fixed(acc, format, "qconv");
                    }
                }
            }
        }
    }
    ledger.add_tdepth(static_cast<double>(Cin * K * K) * costs.mac(format.total_bits));
    return Y;
}

/// Normalization statistics for one group of entries.
struct NormStats {
    double mean = 0.0;
    double variance = 1.0;
};

/// Which group a flat index belongs to: (index / inner) % count.
/// Per-channel batch norm on (B,C,H,W) uses inner = H W, count = C;
/// per-token layer norm on (B,N,d) uses inner = d, count = B N.
struct NormGroups {
    std::size_t inner = 1;
    std::size_t count = 1;

    static NormGroups whole(std::size_t size) { return {size, 1}; }
    [[nodiscard]] std::size_t of(std::size_t flat) const { return (flat / inner) % count; }
};

struct QbnParams {
    double gamma = 1.0;
    double beta = 0.0;
    double eps = 1e-5;
    int newton_iters = 6;
};

/// Depth of the in-circuit part of qbn: subtract, scale, shift.
inline double qbn_depth(const CostTable &costs, int b) {
    return costs.multiplier(b) + 2.0 * costs.adder(b);
}

/// Classical precompute per group: digit-recurrence sqrt (f comparator+adder
/// stages), Newton reciprocal, and the gamma multiply.
inline double qbn_precompute_depth(const CostTable &costs, FixedFormat f, int iters) {
    return f.fraction_bits * (costs.comparator(f.total_bits) + costs.adder(f.total_bits)) +
           reciprocal_depth(costs, f.total_bits, iters) + costs.multiplier(f.total_bits);
}

/// gamma (y - mu) / sqrt(sigma^2 + eps) + beta with per-group statistics.
inline FixedTensor qbn(const FixedTensor &Y, std::span<const NormStats> stats, NormGroups groups,
                       const QbnParams &params, ResourceLedger &ledger,
                       const CostTable &costs = {}) {
    require(stats.size() == groups.count, ErrorCode::ShapeMismatch,
            "qbn needs one statistics entry per group");
    require(params.eps > 0.0, ErrorCode::DomainError, "qbn eps must be positive");
    const FixedFormat f = format_of(Y);
    std::vector<FixedPoint> mean, scale;
    mean.reserve(groups.count);
    scale.reserve(groups.count);
    const FixedPoint gamma = fx::constant(params.gamma, f);
    for (const auto &s : stats) {
        require(s.variance >= 0.0, ErrorCode::DomainError, "qbn variance must be non-negative");
        FixedPoint v = fx::constant(s.variance + params.eps, f);
        if (v.raw() == 0) {
            v = FixedPoint::from_raw(1, f); // eps below resolution: one lsb
        }
        const FixedPoint root = fx::sqrt_digit(v);
        const FixedPoint inv = reciprocal_positive(root, params.newton_iters, ledger, costs);
        mean.push_back(fx::constant(s.mean, f));
        scale.push_back(fx::mul(gamma, inv));
        ledger.add_precompute(qbn_precompute_depth(costs, f, params.newton_iters) -
                              reciprocal_depth(costs, f.total_bits, params.newton_iters));
    }
    const FixedPoint beta = fx::constant(params.beta, f);
    ScopedAncilla scratch(ledger.ancilla(), Y.size() * f.total_bits);
    std::vector<FixedPoint> out;
    out.reserve(Y.size());
    for (std::size_t i = 0; i < Y.size(); ++i) {
        const std::size_t g = groups.of(i);
        out.push_back(fx::add(fx::mul(fx::sub(Y[i], mean[g]), scale[g]), beta));
    }
    ledger.add_tdepth(qbn_depth(costs, f.total_bits));
    return {Y.shape(), std::move(out)};
}

/// Single-statistics form.
inline FixedTensor qbn(const FixedTensor &Y, double mu, double sigma2, double gamma, double beta,
                       double eps, ResourceLedger &ledger, const CostTable &costs = {}) {
    const NormStats s{mu, sigma2};
    QbnParams p;
    p.gamma = gamma;
    p.beta = beta;
    p.eps = eps;
    return qbn(Y, std::span<const NormStats>(&s, 1), NormGroups::whole(Y.size()), p, ledger, costs);
}

} // namespace hqdl
