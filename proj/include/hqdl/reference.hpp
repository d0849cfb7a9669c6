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
 * Double-precision versions of the network blocks. They share no code with
 * the emulated paths and serve as the ground truth for infidelity reports.
 */

#include <algorithm>
#include <cmath>
#include <vector>

#include <Eigen/Dense>

#include "hqdl/tensor.hpp"

namespace hqdl::reference {

/// Same-padded cross-correlation; X (B,C,H,W), kernel (Co,C,K,K).
inline RealTensor conv2d(const RealTensor &X, const RealTensor &kernel, const std::vector<double> &bias) {
    const std::size_t B = X.extent(0), C = X.extent(1), H = X.extent(2), W = X.extent(3);
    const std::size_t Co = kernel.extent(0), K = kernel.extent(2);
    const long pad = static_cast<long>(K / 2);
    RealTensor Y({B, Co, H, W});
    for (std::size_t b = 0; b < B; ++b)
        for (std::size_t co = 0; co < Co; ++co)
            for (std::size_t i = 0; i < H; ++i)
                for (std::size_t j = 0; j < W; ++j) {
                    double acc = bias[co];
                    for (std::size_t ci = 0; ci < C; ++ci)
                        for (std::size_t di = 0; di < K; ++di)
                            for (std::size_t dj = 0; dj < K; ++dj) {
                                const long ii = static_cast<long>(i + di) - pad;
                                const long jj = static_cast<long>(j + dj) - pad;
                                if (ii < 0 || jj < 0 || ii >= static_cast<long>(H) ||
                                    jj >= static_cast<long>(W))
                                    continue;
                                acc += kernel(co, ci, di, dj) *
                                       X(b, ci, static_cast<std::size_t>(ii), static_cast<std::size_t>(jj));
                            }
                    Y(b, co, i, j) = acc;
                }
    return Y;
}

/// Per-channel batch normalization with batch statistics.
inline RealTensor batch_norm(const RealTensor &Y, double gamma, double beta, double eps) {
    const std::size_t B = Y.extent(0), C = Y.extent(1), HW = Y.extent(2) * Y.extent(3);
    RealTensor out = Y;
    for (std::size_t c = 0; c < C; ++c) {
        double mean = 0.0, sq = 0.0;
        for (std::size_t b = 0; b < B; ++b)
            for (std::size_t k = 0; k < HW; ++k)
                mean += Y[(b * C + c) * HW + k];
        mean /= static_cast<double>(B * HW);
        for (std::size_t b = 0; b < B; ++b)
            for (std::size_t k = 0; k < HW; ++k)
                sq += std::pow(Y[(b * C + c) * HW + k] - mean, 2);
        const double inv = 1.0 / std::sqrt(sq / static_cast<double>(B * HW) + eps);
        for (std::size_t b = 0; b < B; ++b)
            for (std::size_t k = 0; k < HW; ++k) {
                auto &v = out[(b * C + c) * HW + k];
                v = gamma * (v - mean) * inv + beta;
            }
    }
    return out;
}

inline RealTensor relu(RealTensor t) {
    for (auto &v : t.data()) {
        v = std::max(0.0, v);
    }
    return t;
}

inline RealTensor add(RealTensor a, const RealTensor &b) {
    for (std::size_t i = 0; i < a.size(); ++i) {
        a[i] += b[i];
    }
    return a;
}

inline RealTensor residual_block(const RealTensor &X, const RealTensor &kernel,
                                 const std::vector<double> &bias, double gamma, double beta,
                                 double eps) {
    return relu(add(relu(batch_norm(conv2d(X, kernel, bias), gamma, beta, eps)), X));
}

/// Rows of a (B,N,d) tensor as an (B*N) x d matrix.
inline Eigen::MatrixXd tokens(const RealTensor &X) {
    const std::size_t d = X.shape().back(), rows = X.size() / d;
    Eigen::MatrixXd M(rows, d);
    for (std::size_t r = 0; r < rows; ++r)
        for (std::size_t c = 0; c < d; ++c)
            M(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = X[r * d + c];
    return M;
}

inline RealTensor from_tokens(const Eigen::MatrixXd &M, const Shape &shape) {
    RealTensor out(shape);
    const auto d = static_cast<std::size_t>(M.cols());
    for (std::size_t r = 0; r < static_cast<std::size_t>(M.rows()); ++r)
        for (std::size_t c = 0; c < d; ++c)
            out[r * d + c] = M(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c));
    return out;
}

/// Softmax attention over (B,N,d) with h heads and d_k = d / h.
inline RealTensor mhsa(const RealTensor &X, std::size_t heads, const Eigen::MatrixXd &WQ,
                       const Eigen::MatrixXd &WK, const Eigen::MatrixXd &WV,
                       const Eigen::MatrixXd &WO) {
    const std::size_t B = X.extent(0), N = X.extent(1), d = X.extent(2), dk = d / heads;
    const Eigen::MatrixXd T = tokens(X);
    Eigen::MatrixXd concat(B * N, d);
    for (std::size_t b = 0; b < B; ++b) {
        const Eigen::MatrixXd Xb = T.middleRows(static_cast<Eigen::Index>(b * N), static_cast<Eigen::Index>(N));
        const Eigen::MatrixXd Q = Xb * WQ, K = Xb * WK, V = Xb * WV;
        for (std::size_t h = 0; h < heads; ++h) {
            const auto c0 = static_cast<Eigen::Index>(h * dk), w = static_cast<Eigen::Index>(dk);
            Eigen::MatrixXd S = Q.middleCols(c0, w) * K.middleCols(c0, w).transpose() /
                                std::sqrt(static_cast<double>(dk));
            for (Eigen::Index i = 0; i < S.rows(); ++i) {
                const double m = S.row(i).maxCoeff();
                S.row(i) = (S.row(i).array() - m).exp();
                S.row(i) /= S.row(i).sum();
            }
            concat.block(static_cast<Eigen::Index>(b * N), c0, static_cast<Eigen::Index>(N), w) =
                S * V.middleCols(c0, w);
        }
    }
    return from_tokens(concat * WO, X.shape());
}

inline RealTensor ffn(const RealTensor &X, const Eigen::MatrixXd &W1, const Eigen::VectorXd &b1,
                      const Eigen::MatrixXd &W2, const Eigen::VectorXd &b2) {
    Eigen::MatrixXd H = (tokens(X) * W1).rowwise() + b1.transpose();
    H = H.cwiseMax(0.0);
    const Eigen::MatrixXd Y = (H * W2).rowwise() + b2.transpose();
    Shape shape = X.shape();
    shape.back() = static_cast<std::size_t>(W2.cols());
    return from_tokens(Y, shape);
}

/// Per-token normalization over the last axis (unit gain, zero shift).
inline RealTensor layer_norm(const RealTensor &X, double eps) {
    Eigen::MatrixXd T = tokens(X);
    for (Eigen::Index r = 0; r < T.rows(); ++r) {
        const double mean = T.row(r).mean();
        const double var = (T.row(r).array() - mean).square().mean();
        T.row(r) = (T.row(r).array() - mean) / std::sqrt(var + eps);
    }
    return from_tokens(T, X.shape());
}

inline RealTensor transformer_block(const RealTensor &X, std::size_t heads, const Eigen::MatrixXd &WQ,
                                    const Eigen::MatrixXd &WK, const Eigen::MatrixXd &WV,
                                    const Eigen::MatrixXd &WO, const Eigen::MatrixXd &W1,
                                    const Eigen::VectorXd &b1, const Eigen::MatrixXd &W2,
                                    const Eigen::VectorXd &b2, double eps) {
    const RealTensor Y = add(X, mhsa(layer_norm(X, eps), heads, WQ, WK, WV, WO));
    return add(Y, ffn(layer_norm(Y, eps), W1, b1, W2, b2));
}

} // namespace hqdl::reference
