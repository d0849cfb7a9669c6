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
 * Discrete Chebyshev basis on the Chebyshev-Gauss nodes, with the exact
 * projection / reconstruction transforms and the truncation diagnostics
 * the coefficient-transfer protocol is built on.
 *
 * Row j holds T_j(x_i), x_i = cos(pi (i + 1/2) / d), scaled to unit norm.
 * On these nodes the sampled polynomials are exactly orthogonal, so no
 * Gram-Schmidt pass is needed.
 */

#include <cmath>
#include <cstddef>
#include <cstdio>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include "hqdl/error.hpp"

namespace hqdl {

class ChebyshevBasis {
  public:
    explicit ChebyshevBasis(std::size_t d) : d_(d) {
        require(d >= 1, ErrorCode::InvalidDimension, "Chebyshev basis dimension must be >= 1");
        // cos(pi k / (2d)) for k in [0, 4d): every entry is one table lookup,
        // which keeps large-j rows as accurate as row 1.
        const std::size_t period = 4 * d;
        std::vector<double> table(period);
        for (std::size_t k = 0; k < period; ++k) {
            table[k] = std::cos(M_PI * static_cast<double>(k) / static_cast<double>(2 * d));
        }
        rows_.resize(d * d);
        const double scale0 = 1.0 / std::sqrt(static_cast<double>(d));
        const double scale = std::sqrt(2.0 / static_cast<double>(d));
        for (std::size_t j = 0; j < d; ++j) {
            const double s = j == 0 ? scale0 : scale;
            for (std::size_t i = 0; i < d; ++i) {
                rows_[j * d + i] = s * table[(j * (2 * i + 1)) % period];
            }
        }
    }

    [[nodiscard]] std::size_t dimension() const { return d_; }

    [[nodiscard]] std::span<const double> row(std::size_t j) const {
        require(j < d_, ErrorCode::RankTooLarge, "basis row index out of range");
        return {rows_.data() + j * d_, d_};
    }

    [[nodiscard]] double at(std::size_t j, std::size_t i) const { return rows_[j * d_ + i]; }

    /// One line per basis vector, full double precision.
    void write_csv(std::ostream &out) const {
        char buf[32];
        for (std::size_t j = 0; j < d_; ++j) {
            for (std::size_t i = 0; i < d_; ++i) {
                std::snprintf(buf, sizeof buf, "%.17g", at(j, i));
                out << (i ? "," : "") << buf;
            }
            out << '\n';
        }
    }

  private:
    std::size_t d_;
    std::vector<double> rows_;
};

inline ChebyshevBasis build_basis(std::size_t d) { return ChebyshevBasis(d); }

struct CoeffVector {
    std::vector<double> coefficients;
    double precision = 0.0; ///< per-coefficient estimation precision delta
    std::size_t dimension = 0;

    [[nodiscard]] std::size_t rank() const { return coefficients.size(); }
};

namespace detail {

inline double dot(std::span<const double> a, std::span<const double> b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        s += a[i] * b[i];
    }
    return s;
}

inline double norm2(std::span<const double> a) { return std::sqrt(dot(a, a)); }

inline void check_unit(std::span<const double> psi, std::size_t d) {
    require(psi.size() == d, ErrorCode::DimensionMismatch,
            "state length " + std::to_string(psi.size()) + " != basis dimension " +
                std::to_string(d));
    const double n = norm2(psi);
    require(std::abs(n - 1.0) <= 1e-9, ErrorCode::DegenerateState,
            "state is not unit norm (norm " + std::to_string(n) + ")");
}

} // namespace detail

inline CoeffVector cheb_forward(std::span<const double> psi, std::size_t r,
                                const ChebyshevBasis &basis) {
    const std::size_t d = basis.dimension();
    require(r <= d, ErrorCode::RankTooLarge,
            "rank " + std::to_string(r) + " exceeds dimension " + std::to_string(d));
    detail::check_unit(psi, d);
    CoeffVector c;
    c.dimension = d;
    c.coefficients.resize(r);
    for (std::size_t j = 0; j < r; ++j) {
        c.coefficients[j] = detail::dot(basis.row(j), psi);
    }
    return c;
}

inline std::vector<double> cheb_reconstruct(const CoeffVector &c, const ChebyshevBasis &basis,
                                            bool renormalize) {
    const std::size_t d = basis.dimension();
    require(c.dimension == d, ErrorCode::DimensionMismatch,
            "coefficient source dimension does not match basis");
    require(c.rank() <= d, ErrorCode::RankTooLarge, "coefficient rank exceeds dimension");
    std::vector<double> out(d, 0.0);
    for (std::size_t j = 0; j < c.rank(); ++j) {
        const double cj = c.coefficients[j];
        const auto row = basis.row(j);
        for (std::size_t i = 0; i < d; ++i) {
            out[i] += cj * row[i];
        }
    }
    if (renormalize) {
        const double n = detail::norm2(out);
        require(n >= 1e-12, ErrorCode::DegenerateState, "reconstruction has (near) zero norm");
        for (auto &v : out) {
            v /= n;
        }
    }
    return out;
}

/// l2 norm of the discarded coefficients c_r..c_{d-1}.
inline double truncation_tail(std::span<const double> psi, std::size_t r,
                              const ChebyshevBasis &basis) {
    const std::size_t d = basis.dimension();
    require(r <= d, ErrorCode::RankTooLarge, "rank exceeds dimension");
    detail::check_unit(psi, d);
    double tail = 0.0;
    for (std::size_t j = r; j < d; ++j) {
        const double cj = detail::dot(basis.row(j), psi);
        tail += cj * cj;
    }
    return std::sqrt(tail);
}

} // namespace hqdl
