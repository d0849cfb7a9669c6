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

// Independent reference computations used only by the tests. Nothing here
// calls into the library's implementation paths.

#include <cmath>
#include <cstddef>
#include <vector>

namespace oracle {

/// T_j(x_i) evaluated by the three-term recurrence at the Chebyshev-Gauss
/// nodes, normalized by brute-force summation.
inline std::vector<std::vector<double>> chebyshev_rows(std::size_t d) {
    std::vector<std::vector<double>> rows(d, std::vector<double>(d));
    for (std::size_t i = 0; i < d; ++i) {
        const double x = std::cos(M_PI * (static_cast<double>(i) + 0.5) / static_cast<double>(d));
        double tm1 = 1.0, t = x;
        rows[0][i] = 1.0;
        if (d > 1) {
            rows[1][i] = x;
        }
        for (std::size_t j = 2; j < d; ++j) {
            const double tn = 2.0 * x * t - tm1;
            tm1 = t;
            t = tn;
            rows[j][i] = tn;
        }
    }
    for (auto &r : rows) {
        double s = 0.0;
        for (double v : r) {
            s += v * v;
        }
        s = std::sqrt(s);
        for (double &v : r) {
            v /= s;
        }
    }
    return rows;
}

inline double dot(const std::vector<double> &a, const std::vector<double> &b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        s += a[i] * b[i];
    }
    return s;
}

/// Same-padded cross-correlation on (B,C,H,W) with kernel (Co,Ci,K,K).
inline std::vector<double> conv2d(const std::vector<double> &x, std::size_t B, std::size_t C,
                                  std::size_t H, std::size_t W, const std::vector<double> &k,
                                  std::size_t Co, std::size_t K, const std::vector<double> &bias) {
    std::vector<double> y(B * Co * H * W, 0.0);
    const long pad = static_cast<long>(K / 2);
    for (std::size_t b = 0; b < B; ++b)
        for (std::size_t co = 0; co < Co; ++co)
            for (long i = 0; i < static_cast<long>(H); ++i)
                for (long j = 0; j < static_cast<long>(W); ++j) {
                    double acc = bias[co];
                    for (std::size_t ci = 0; ci < C; ++ci)
                        for (long di = -pad; di <= pad; ++di)
                            for (long dj = -pad; dj <= pad; ++dj) {
                                const long ii = i + di, jj = j + dj;
                                if (ii < 0 || jj < 0 || ii >= static_cast<long>(H) ||
                                    jj >= static_cast<long>(W))
                                    continue;
                                acc += k[((co * C + ci) * K + static_cast<std::size_t>(di + pad)) * K +
                                         static_cast<std::size_t>(dj + pad)] *
                                       x[((b * C + ci) * H + static_cast<std::size_t>(ii)) * W +
                                         static_cast<std::size_t>(jj)];
                            }
                    y[((b * Co + co) * H + static_cast<std::size_t>(i)) * W + static_cast<std::size_t>(j)] = acc;
                }
    return y;
}

} // namespace oracle
