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
 * Network blocks assembled from the arithmetic (QAM), linear-algebra (QLAM)
 * and transfer (DTM) modules: the residual block, multi-head self-attention,
 * the position-wise feed-forward network, the transformer block, and the
 * backward pass of a linear layer.
 *
 * Every forward pass takes real inputs, runs on fixed-point registers of
 * the configured format, and returns the decoded result. Input loading is
 * charged by the caller; the ledger receives everything inside the block.
 */

#include <algorithm>
#include <cmath>
#include <optional>
#include <vector>

#include <Eigen/Dense>

#include "hqdl/dtm.hpp"
#include "hqdl/qam.hpp"
#include "hqdl/qlam.hpp"

namespace hqdl {

inline FixedTensor to_fixed(const Eigen::MatrixXd &M, FixedFormat f) {
    RealTensor t({static_cast<std::size_t>(M.rows()), static_cast<std::size_t>(M.cols())});
    for (Eigen::Index i = 0; i < M.rows(); ++i)
        for (Eigen::Index j = 0; j < M.cols(); ++j)
            t(i, j) = M(i, j);
    return encode(t, f);
}

inline FixedTensor to_fixed(const Eigen::VectorXd &v, FixedFormat f) {
    return encode(RealTensor({static_cast<std::size_t>(v.size())},
                             std::vector<double>(v.data(), v.data() + v.size())),
                  f);
}

/// Classical copy of a register read out through the transfer module.
///
/// The register's norm travels classically with it; the direction is
/// measured with `params.protocol` on a state whose preparation circuit has
/// depth `circuit_depth`. A zero register runs the same circuit and budget
/// and reads out zeros.
inline std::vector<double> dtm_snapshot(std::span<const double> values, double circuit_depth,
                                        const TransferParams &params, NoiseModel &noise,
                                        ResourceLedger &ledger) {
    const std::size_t d = values.size();
    const double depth = std::max(circuit_depth, 1.0);
    const PrepCostModel cost = [depth](std::size_t) { return depth; };
    std::optional<ChebyshevBasis> basis;
    TransferParams p = params;
    if (p.protocol == Protocol::Dcd) {
        basis = build_basis(d);
        p.rank = std::min(p.rank, d);
    }
    const ChebyshevBasis *bp = basis ? &*basis : nullptr;
    const double n = norm2(values);
    if (n == 0.0) {
        NoiseModel quiet;
        const std::vector<double> ones(d, 1.0);
        transfer_roundtrip(prepare_state(ones, cost), p, bp, quiet, ledger);
        return std::vector<double>(d, 0.0);
    }
    auto out = transfer_roundtrip(prepare_state(values, cost), p, bp, noise, ledger).reconstructed;
    for (auto &v : out) {
        v *= n;
    }
    return out;
}

namespace detail {

inline void check_transfer(const TransferParams &p) {
    if (p.protocol == Protocol::Linf) {
        check_precision(p.epsilon);
        require(p.c_tomo > 0.0, ErrorCode::InvalidArgument, "c_tomo must be positive");
    } else {
        check_precision(p.delta);
        require(p.rank >= 1, ErrorCode::InvalidArgument, "dcd rank must be at least 1");
    }
}

inline void check_matrix(const Eigen::MatrixXd &M, Eigen::Index rows, Eigen::Index cols,
                         const char *name) {
    require(M.rows() == rows && M.cols() == cols, ErrorCode::ShapeMismatch,
            std::string(name) + " must be " + std::to_string(rows) + "x" + std::to_string(cols) +
                ", got " + std::to_string(M.rows()) + "x" + std::to_string(M.cols()));
    require(M.allFinite(), ErrorCode::InvalidArgument, std::string(name) + " has non-finite entries");
}

/// Mean and population variance of each group of `values`.
inline std::vector<NormStats> group_stats(std::span<const double> values, NormGroups groups) {
    std::vector<double> sum(groups.count, 0.0), sq(groups.count, 0.0), n(groups.count, 0.0);
    for (std::size_t i = 0; i < values.size(); ++i) {
        const std::size_t g = groups.of(i);
        sum[g] += values[i];
        n[g] += 1.0;
    }
    std::vector<NormStats> out(groups.count);
    for (std::size_t g = 0; g < groups.count; ++g) {
        out[g].mean = sum[g] / n[g];
    }
    for (std::size_t i = 0; i < values.size(); ++i) {
        const std::size_t g = groups.of(i);
        sq[g] += (values[i] - out[g].mean) * (values[i] - out[g].mean);
    }
    for (std::size_t g = 0; g < groups.count; ++g) {
        out[g].variance = sq[g] / n[g];
    }
    return out;
}

} // namespace detail

// ---------------------------------------------------------------------------
// Residual block

struct ResBlockConfig {
    std::size_t B = 1, C = 1, H = 1, W = 1, K = 1;
    RealTensor kernel;        ///< (C, C, K, K)
    std::vector<double> bias; ///< one entry per channel
    double gamma = 1.0;
    double beta = 0.0;
    double eps = 1e-5;
    TransferParams dtm{Protocol::Linf};
    NoiseMode noise = NoiseMode::Exact;
    std::uint64_t seed = 0;
    FixedFormat format{48, 24};
    CostTable costs;

    void validate() const {
        require(B > 0 && C > 0 && H > 0 && W > 0 && K > 0, ErrorCode::InvalidDimension,
                "block extents must be positive");
        require(K % 2 == 1, ErrorCode::InvalidArgument, "kernel extent must be odd");
        require(kernel.shape() == Shape{C, C, K, K}, ErrorCode::ShapeMismatch,
                "kernel must have shape " + shape_string({C, C, K, K}) + ", got " +
                    shape_string(kernel.shape()));
        require(bias.size() == C, ErrorCode::ShapeMismatch, "bias needs one entry per channel");
        require(eps > 0.0, ErrorCode::DomainError, "batch-norm eps must be positive");
        format.validate();
        costs.validate();
        detail::check_transfer(dtm);
    }

    [[nodiscard]] Shape input_shape() const { return {B, C, H, W}; }
};

/// conv -> transfer snapshot -> batch statistics -> batch norm -> ReLU ->
/// shortcut addition -> ReLU. Batch norm acts on the re-loaded snapshot, so
/// readout noise reaches the output.
inline RealTensor residual_block_forward(const RealTensor &X, const ResBlockConfig &cfg,
                                         ResourceLedger &ledger) {
    cfg.validate();
    require(X.shape() == cfg.input_shape(), ErrorCode::ShapeMismatch,
            "block input has shape " + shape_string(X.shape()) + ", expected " +
                shape_string(cfg.input_shape()));
    NoiseModel noise(cfg.noise, cfg.seed);
    const FixedFormat f = cfg.format;
    const FixedTensor Xq = encode(X, f);
    const double start = ledger.t_depth();

    const FixedTensor Y = qconv(Xq, encode(cfg.kernel, f), encode(RealTensor({cfg.C}, cfg.bias), f),
                                ledger, cfg.costs);
    const RealTensor Yr = decode(Y);
    const auto snap = dtm_snapshot(Yr.data(), ledger.t_depth() - start, cfg.dtm, noise, ledger);

    const NormGroups groups{cfg.H * cfg.W, cfg.C};
    const auto stats = detail::group_stats(snap, groups);
    QbnParams qp;
    qp.gamma = cfg.gamma;
    qp.beta = cfg.beta;
    qp.eps = cfg.eps;
    const FixedTensor Z =
        qbn(encode(RealTensor(Y.shape(), snap), f), stats, groups, qp, ledger, cfg.costs);
    const FixedTensor S = qadd(qrelu(Z, ledger, cfg.costs), Xq, ledger, cfg.costs);
    return decode(qrelu(S, ledger, cfg.costs));
}

// ---------------------------------------------------------------------------
// Attention

struct AttnConfig {
    std::size_t B = 1, N = 1, d = 2, heads = 1;
    Eigen::MatrixXd WQ, WK, WV, WO; ///< d x d
    TransferParams dtm{Protocol::Linf};
    NoiseMode noise = NoiseMode::Exact;
    std::uint64_t seed = 0;
    FixedFormat format{48, 24};
    CostTable costs;

    void validate() const {
        require(B > 0 && N > 0 && d > 0 && heads > 0, ErrorCode::InvalidDimension,
                "attention extents must be positive");
        require(d % heads == 0, ErrorCode::InvalidArgument,
                "d = " + std::to_string(d) + " is not divisible by heads = " + std::to_string(heads));
        const auto n = static_cast<Eigen::Index>(d);
        detail::check_matrix(WQ, n, n, "W_Q");
        detail::check_matrix(WK, n, n, "W_K");
        detail::check_matrix(WV, n, n, "W_V");
        detail::check_matrix(WO, n, n, "W_O");
        format.validate();
        costs.validate();
        detail::check_transfer(dtm);
        check_precision(dtm.delta);
    }

    [[nodiscard]] Shape input_shape() const { return {B, N, d}; }
};

namespace detail {

inline void softmax_rows(Eigen::MatrixXd &A) {
    for (Eigen::Index i = 0; i < A.rows(); ++i) {
        const double m = A.row(i).maxCoeff();
        A.row(i) = (A.row(i).array() - m).exp();
        const double s = A.row(i).sum();
        require(s > 0.0 && std::isfinite(s), ErrorCode::DegenerateState, "softmax row underflow");
        A.row(i) /= s;
    }
}

/// Heads of one batch element joined by a uniformly weighted LCU; head
/// norms are re-applied digitally on the concatenated register.
inline void concat_heads(RealTensor &out, std::size_t b, std::size_t heads, std::size_t dk,
                         const std::vector<double> &head_prep, ResourceLedger &ledger,
                         const CostTable &costs, int word_bits) {
    const std::size_t N = out.extent(1), d = out.extent(2);
    std::vector<AmplitudeState> states;
    std::vector<double> weights, norms;
    for (std::size_t h = 0; h < heads; ++h) {
        std::vector<double> block(N * dk);
        for (std::size_t i = 0; i < N; ++i)
            for (std::size_t c = 0; c < dk; ++c)
                block[i * dk + c] = out(b, i, h * dk + c);
        const double n = norm2(block);
        norms.push_back(n);
        if (n == 0.0) {
            states.push_back(prepare_state(std::vector<double>(N * dk, 1.0)));
            weights.push_back(0.0);
        } else {
            states.push_back(prepare_state(block));
            weights.push_back(1.0 / std::sqrt(static_cast<double>(heads)));
        }
        states.back().prep_cost = head_prep[h];
    }
    double wn = 0.0;
    for (double w : weights) {
        wn += w * w;
    }
    if (wn == 0.0) {
        return;
    }
    const AmplitudeState joined = lcu_concat(states, weights, ledger, costs, word_bits);
    for (std::size_t h = 0; h < heads; ++h) {
        const double scale = weights[h] == 0.0 ? 0.0 : norms[h] * std::sqrt(wn) / weights[h];
        for (std::size_t i = 0; i < N; ++i)
            for (std::size_t c = 0; c < dk; ++c)
                out(b, i, h * dk + c) = scale * joined.amplitudes[h * N * dk + i * dk + c];
    }
    (void)d;
}

inline FixedTensor mhsa(const FixedTensor &X, const AttnConfig &cfg, NoiseModel &noise,
                        ResourceLedger &ledger) {
    const std::size_t B = cfg.B, N = cfg.N, d = cfg.d, H = cfg.heads, dk = d / H;
    const FixedFormat f = format_of(X);
    const int bits = f.total_bits;
    const CostTable &costs = cfg.costs;
    const double start = ledger.t_depth();

    // (1) projections, parallel over the (B, N) index register
    const FixedTensor Q = qlinear(X, to_fixed(cfg.WQ, f), std::nullopt, ledger, costs);
    const FixedTensor K = qlinear(X, to_fixed(cfg.WK, f), std::nullopt, ledger, costs);
    const FixedTensor V = qlinear(X, to_fixed(cfg.WV, f), std::nullopt, ledger, costs);

    // (2) indexed dot products, parallel over (b, i, j); heads in sequence
    const FixedPoint scale = fx::constant(1.0 / std::sqrt(static_cast<double>(dk)), f);
    std::vector<double> scores(B * H * N * N);
    ResourceLedger parallel;
    for (std::size_t b = 0; b < B; ++b) {
        for (std::size_t h = 0; h < H; ++h) {
            FixedTensor Qh({N, dk, 1}, fx::zero(f)), Kh({N, dk, 1}, fx::zero(f));
            for (std::size_t i = 0; i < N; ++i)
                for (std::size_t c = 0; c < dk; ++c) {
                    Qh(i, c, 0) = Q(b, i, h * dk + c);
                    Kh(i, c, 0) = K(b, i, h * dk + c);
                }
            const FixedTensor R = tensor_dot(Qh, Kh, parallel, costs);
            for (std::size_t i = 0; i < N; ++i)
                for (std::size_t j = 0; j < N; ++j)
                    scores[((b * H + h) * N + i) * N + j] = fx::mul(R(i, 0, j, 0), scale).value();
        }
    }
    ledger.add_tdepth(static_cast<double>(d) * costs.mac(bits) +
                      static_cast<double>(H) * costs.multiplier(bits));

    // (3) scores to classical memory, softmax there
    const auto snap = dtm_snapshot(scores, ledger.t_depth() - start, cfg.dtm, noise, ledger);

    // (4) A V per head through a block encoding of A
    RealTensor heads_out({B, N, d}, 0.0);
    const PrepCostModel prep_v = prep::digital(costs, bits);
    double worst_success = 1.0;
    for (std::size_t b = 0; b < B; ++b) {
        std::vector<double> head_prep(H, 0.0);
        for (std::size_t h = 0; h < H; ++h) {
            Eigen::MatrixXd A(N, N);
            for (std::size_t i = 0; i < N; ++i)
                for (std::size_t j = 0; j < N; ++j)
                    A(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) =
                        snap[((b * H + h) * N + i) * N + j];
            softmax_rows(A);
            const BlockEncoding be = BlockEncoding::of(A);
            head_prep[h] = prep_v(N) + be.depth;
            double kept = 0.0, total = 0.0;
            for (std::size_t c = 0; c < dk; ++c) {
                std::vector<double> v(N);
                for (std::size_t i = 0; i < N; ++i) {
                    v[i] = V(b, i, h * dk + c).value();
                }
                const double vn = norm2(v);
                if (vn == 0.0) {
                    continue;
                }
                const Eigen::Map<const Eigen::VectorXd> ev(v.data(), static_cast<Eigen::Index>(N));
                if ((A * ev).norm() <= 1e-12 * vn) {
                    continue;
                }
                const auto r = apply_block_encoding(be, prepare_state(v, prep_v), noise, ledger);
                const double p = qae_estimate(r.success_probability, cfg.dtm.delta, noise, ledger);
                const double norm = be.alpha * std::sqrt(p) * vn;
                for (std::size_t i = 0; i < N; ++i) {
                    heads_out(b, i, h * dk + c) = norm * r.state.amplitudes[i];
                }
                kept += r.success_probability * vn * vn;
                total += vn * vn;
            }
            if (total > 0.0 && kept > 0.0) {
                worst_success = std::min(worst_success, kept / total);
            }
        }
        // (5) head concatenation
        concat_heads(heads_out, b, H, dk, head_prep, ledger, costs, bits);
    }
    ledger.apply_postselection(worst_success);

    return qlinear(encode(heads_out, f), to_fixed(cfg.WO, f), std::nullopt, ledger, costs);
}

} // namespace detail

inline RealTensor mhsa_forward(const RealTensor &X, const AttnConfig &cfg, ResourceLedger &ledger) {
    cfg.validate();
    require(X.shape() == cfg.input_shape(), ErrorCode::ShapeMismatch,
            "attention input has shape " + shape_string(X.shape()) + ", expected " +
                shape_string(cfg.input_shape()));
    NoiseModel noise(cfg.noise, cfg.seed);
    return decode(detail::mhsa(encode(X, cfg.format), cfg, noise, ledger));
}

// ---------------------------------------------------------------------------
// Feed-forward network and transformer block

struct FfnParams {
    Eigen::MatrixXd W1; ///< d x d_ff
    Eigen::VectorXd b1; ///< d_ff
    Eigen::MatrixXd W2; ///< d_ff x d_out
    Eigen::VectorXd b2; ///< d_out

    void validate(std::size_t d) const {
        const auto n = static_cast<Eigen::Index>(d);
        require(W1.rows() == n && b1.size() == W1.cols() && W2.rows() == W1.cols() &&
                    b2.size() == W2.cols(),
                ErrorCode::ShapeMismatch, "feed-forward weight shapes do not chain");
        require(W1.allFinite() && W2.allFinite() && b1.allFinite() && b2.allFinite(),
                ErrorCode::InvalidArgument, "feed-forward weights have non-finite entries");
    }
};

/// (X W1 + b1) -> ReLU -> (. W2 + b2) at every position in parallel.
inline FixedTensor ffn_forward(const FixedTensor &X, const FfnParams &p, ResourceLedger &ledger,
                               const CostTable &costs = {}) {
    p.validate(X.shape().back());
    const FixedFormat f = format_of(X);
    const FixedTensor H = qlinear(X, to_fixed(p.W1, f), to_fixed(p.b1, f), ledger, costs);
    return qlinear(qrelu(H, ledger, costs), to_fixed(p.W2, f), to_fixed(p.b2, f), ledger, costs);
}

inline RealTensor ffn_forward(const RealTensor &X, const FfnParams &p, ResourceLedger &ledger,
                              FixedFormat f = {48, 24}, const CostTable &costs = {}) {
    return decode(ffn_forward(encode(X, f), p, ledger, costs));
}

/// Per-token normalization through the batch-norm machinery: statistics
/// over the last axis from a transfer snapshot, unit gain, zero shift.
inline FixedTensor layer_norm(const FixedTensor &X, double eps, double circuit_depth,
                              const TransferParams &dtm, NoiseModel &noise, ResourceLedger &ledger,
                              const CostTable &costs = {}) {
    const std::size_t d = X.shape().back();
    const RealTensor Xr = decode(X);
    const auto snap = dtm_snapshot(Xr.data(), circuit_depth, dtm, noise, ledger);
    const NormGroups groups{d, X.size() / d};
    QbnParams qp;
    qp.eps = eps;
    return qbn(encode(RealTensor(X.shape(), snap), format_of(X)), detail::group_stats(snap, groups),
               groups, qp, ledger, costs);
}

/// Y = X + MHSA(LN(X)); out = Y + FFN(LN(Y)).
inline RealTensor transformer_block_forward(const RealTensor &X, const AttnConfig &cfg,
                                            const FfnParams &ffn, ResourceLedger &ledger,
                                            double ln_eps = 1e-5) {
    cfg.validate();
    ffn.validate(cfg.d);
    require(ffn.W2.cols() == static_cast<Eigen::Index>(cfg.d), ErrorCode::ShapeMismatch,
            "feed-forward output width must equal d");
    require(X.shape() == cfg.input_shape(), ErrorCode::ShapeMismatch,
            "block input has shape " + shape_string(X.shape()) + ", expected " +
                shape_string(cfg.input_shape()));
    require(ln_eps > 0.0, ErrorCode::DomainError, "layer-norm eps must be positive");
    NoiseModel noise(cfg.noise, cfg.seed);
    const FixedTensor Xq = encode(X, cfg.format);
    const double start = ledger.t_depth();

    const FixedTensor L1 = layer_norm(Xq, ln_eps, ledger.t_depth() - start, cfg.dtm, noise, ledger, cfg.costs);
    const FixedTensor Y = qadd(Xq, detail::mhsa(L1, cfg, noise, ledger), ledger, cfg.costs);
    const FixedTensor L2 = layer_norm(Y, ln_eps, ledger.t_depth() - start, cfg.dtm, noise, ledger, cfg.costs);
    return decode(qadd(Y, ffn_forward(L2, ffn, ledger, cfg.costs), ledger, cfg.costs));
}

// ---------------------------------------------------------------------------
// Backward pass of Y = W X

struct LinearGrads {
    Eigen::MatrixXd dX;
    Eigen::MatrixXd dW;
};

/// dX = W^T dY on fixed-point registers, parallel over the N columns.
/// dW_ij = ||dY_i|| ||X_j|| <dY_i, X_j>, each overlap estimated to delta.
inline LinearGrads backprop_linear(const Eigen::MatrixXd &W, const Eigen::MatrixXd &X,
                                   const Eigen::MatrixXd &dY, double delta, NoiseModel &noise,
                                   ResourceLedger &ledger, FixedFormat f = {48, 24},
                                   const CostTable &costs = {}) {
    require(W.cols() == X.rows() && W.rows() == dY.rows() && X.cols() == dY.cols(),
            ErrorCode::ShapeMismatch, "backprop_linear needs W (m x n), X (n x N), dY (m x N)");
    check_precision(delta);
    LinearGrads g;
    const RealTensor dXt = decode(qlinear(to_fixed(Eigen::MatrixXd(dY.transpose()), f), to_fixed(W, f),
                                          std::nullopt, ledger, costs));
    g.dX.resize(W.cols(), X.cols());
    for (Eigen::Index n = 0; n < X.cols(); ++n)
        for (Eigen::Index j = 0; j < W.cols(); ++j)
            g.dX(j, n) = dXt(n, j);

    g.dW = Eigen::MatrixXd::Zero(W.rows(), W.cols());
    for (Eigen::Index i = 0; i < W.rows(); ++i) {
        const Eigen::VectorXd gi = dY.row(i).transpose();
        const double ni = gi.norm();
        if (ni == 0.0) {
            continue;
        }
        const AmplitudeState si = prepare_state(std::span<const double>(gi.data(), static_cast<std::size_t>(gi.size())));
        for (Eigen::Index j = 0; j < W.cols(); ++j) {
            const Eigen::VectorXd xj = X.row(j).transpose();
            const double nj = xj.norm();
            if (nj == 0.0) {
                continue;
            }
            const AmplitudeState sj = prepare_state(std::span<const double>(xj.data(), static_cast<std::size_t>(xj.size())));
            g.dW(i, j) = ni * nj * inner_product_estimate(si, sj, delta, noise, ledger);
        }
    }
    return g;
}

/// 1 - <a, b>^2 on the normalized vectors.
inline double infidelity(std::span<const double> a, std::span<const double> b) {
    require(a.size() == b.size(), ErrorCode::DimensionMismatch, "infidelity of different sizes");
    const double na = norm2(a), nb = norm2(b);
    if (na == 0.0 && nb == 0.0) {
        return 0.0;
    }
    if (na == 0.0 || nb == 0.0) {
        return 1.0;
    }
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        s += a[i] * b[i];
    }
    const double ov = s / (na * nb);
    return std::max(0.0, 1.0 - ov * ov);
}

inline double l2_difference(std::span<const double> a, std::span<const double> b) {
    require(a.size() == b.size(), ErrorCode::DimensionMismatch, "difference of different sizes");
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        s += (a[i] - b[i]) * (a[i] - b[i]);
    }
    return std::sqrt(s);
}

} // namespace hqdl
