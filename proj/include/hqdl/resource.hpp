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
 * Resource accounting: the per-run ledger, the overhead metric
 * Q = T-depth x shots, closed-form overhead models for the residual and
 * attention blocks, and the qRAM infidelity model with its fits.
 *
 * Ledger semantics: t_depth is the summed depth of the circuits a run
 * executes (each distinct circuit charged once); shots counts circuit
 * repetitions. Arithmetic on classically known scalars is tallied in
 * precompute_tdepth and stays out of Q.
 */

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <map>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "hqdl/error.hpp"

namespace hqdl {

/// Live / peak ancilla qubits. Scratch registers are released by their
/// uncompute step, so a balanced op leaves live() where it found it.
class AncillaTracker {
  public:
    void allocate(std::uint64_t qubits) {
        live_ += qubits;
        high_water_ = std::max(high_water_, live_);
    }
    void release(std::uint64_t qubits) {
        require(qubits <= live_, ErrorCode::InvalidArgument,
                "ancilla release exceeds live count");
        live_ -= qubits;
    }
    [[nodiscard]] std::uint64_t live() const { return live_; }
    [[nodiscard]] std::uint64_t high_water() const { return high_water_; }

  private:
    std::uint64_t live_ = 0;
    std::uint64_t high_water_ = 0;
};

/// RAII scratch register: allocate on entry, uncompute on exit.
class ScopedAncilla {
  public:
    ScopedAncilla(AncillaTracker &tracker, std::uint64_t qubits)
        : tracker_(tracker), qubits_(qubits) {
        tracker_.allocate(qubits_);
    }
    ~ScopedAncilla() { tracker_.release(qubits_); }
    ScopedAncilla(const ScopedAncilla &) = delete;
    ScopedAncilla &operator=(const ScopedAncilla &) = delete;

  private:
    AncillaTracker &tracker_;
    std::uint64_t qubits_;
};

class ResourceLedger {
  public:
    void add_tdepth(double depth) {
        require(depth >= 0.0, ErrorCode::InvalidArgument, "negative T-depth charge");
        t_depth_ += depth;
    }
    void add_precompute(double depth) { precompute_tdepth_ += depth; }
    void add_shots(std::uint64_t shots) { shots_ += shots; }
    void add_queries(std::uint64_t queries) { oracle_queries_ += queries; }
    void add_qram_words(std::uint64_t words) { qram_words_ += words; }

    /// Post-selection on a success probability p repeats the circuit 1/p
    /// times per accepted shot: inflate the shot count accordingly.
    void apply_postselection(double success_probability) {
        require(success_probability > 0.0 && success_probability <= 1.0,
                ErrorCode::InvalidArgument, "post-selection probability must lie in (0, 1]");
        shots_ = static_cast<std::uint64_t>(
            std::ceil(static_cast<double>(shots_) / success_probability - 1e-9));
    }

    AncillaTracker &ancilla() { return ancilla_; }
    [[nodiscard]] const AncillaTracker &ancilla() const { return ancilla_; }

    [[nodiscard]] double t_depth() const { return t_depth_; }
    [[nodiscard]] double precompute_tdepth() const { return precompute_tdepth_; }
    [[nodiscard]] std::uint64_t shots() const { return shots_; }
    [[nodiscard]] std::uint64_t oracle_queries() const { return oracle_queries_; }
    [[nodiscard]] std::uint64_t qram_words() const { return qram_words_; }
    [[nodiscard]] std::uint64_t ancilla_high_water() const { return ancilla_.high_water(); }
    /// Peak ancilla including merged-in task ledgers (summed: concurrent
    /// tasks hold their scratch at the same time).
    [[nodiscard]] std::uint64_t total_ancilla_high_water() const {
        return ancilla_.high_water() + ancilla_merge_;
    }

    /// Component-wise sum; used to fold task-local ledgers together.
    void merge(const ResourceLedger &other) {
        t_depth_ += other.t_depth_;
        precompute_tdepth_ += other.precompute_tdepth_;
        shots_ += other.shots_;
        oracle_queries_ += other.oracle_queries_;
        qram_words_ += other.qram_words_;
        ancilla_merge_ += other.total_ancilla_high_water();
    }

    friend ResourceLedger merged(ResourceLedger a, const ResourceLedger &b) {
        a.merge(b);
        return a;
    }

  private:
    double t_depth_ = 0.0;
    double precompute_tdepth_ = 0.0;
    std::uint64_t shots_ = 0;
    std::uint64_t oracle_queries_ = 0;
    std::uint64_t qram_words_ = 0;
    AncillaTracker ancilla_;
    std::uint64_t ancilla_merge_ = 0;

};

inline double overhead(const ResourceLedger &ledger) {
    return ledger.t_depth() * static_cast<double>(ledger.shots());
}

using SamplingOverhead = std::function<double(std::size_t, std::size_t, std::size_t, std::size_t)>;

/// C K^2 S(B,C,H,W) with log factors suppressed.
inline double qresnet_overhead_model(std::size_t B, std::size_t C, std::size_t H, std::size_t W,
                                     std::size_t K, const SamplingOverhead &S) {
    require(B > 0 && C > 0 && H > 0 && W > 0 && K > 0, ErrorCode::InvalidDimension,
            "extents must be positive");
    return static_cast<double>(C) * static_cast<double>(K * K) * S(B, C, H, W);
}

/// d^2 log2(d) B (log2 N)^2 S(B,N,d); the polylog in N is realized as a squared log.
inline double mhsa_overhead_model(std::size_t B, std::size_t N, std::size_t d,
                                  const std::function<double(std::size_t, std::size_t, std::size_t)> &S) {
    require(B >= 1 && N >= 2 && d >= 2, ErrorCode::InvalidDimension,
            "attention overhead model needs B >= 1, N >= 2, d >= 2");
    const double dd = static_cast<double>(d);
    const double logN = std::log2(static_cast<double>(N));
    return dd * dd * std::log2(dd) * static_cast<double>(B) * logN * logN * S(B, N, d);
}

// ---------------------------------------------------------------------------
// qRAM infidelity

struct QramModel {
    double kappa = 0.0;
    double c0 = 0.0;
};

inline double qram_infidelity(double n, double k, const QramModel &m) {
    require(n >= 1 && k >= 1, ErrorCode::InvalidArgument, "qRAM address and word bits must be >= 1");
    return std::clamp(m.kappa * n * (n + k) + m.c0, 0.0, 1.0);
}

struct QramSample {
    double n = 0;
    double k = 0;
    double infidelity = 0;
};

struct QramFit {
    QramModel model;
    double rms = 0.0;
};

namespace detail {

inline Eigen::VectorXd least_squares(const Eigen::MatrixXd &A, const Eigen::VectorXd &b,
                                     const char *what) {
    Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(A);
    qr.setThreshold(1e-10);
    if (qr.rank() < A.cols()) {
        fail(ErrorCode::DegenerateFit, std::string(what) + ": design matrix is rank-deficient");
    }
    return qr.solve(b);
}

} // namespace detail

/// Least-squares fit of I = kappa n(n+k) + c0.
inline QramFit fit_qram(std::span<const QramSample> data) {
    std::vector<double> distinct;
    for (const auto &s : data) {
        distinct.push_back(s.n * (s.n + s.k));
    }
    std::sort(distinct.begin(), distinct.end());
    distinct.erase(std::unique(distinct.begin(), distinct.end()), distinct.end());
    if (data.size() < 3 || distinct.size() < 2) {
        fail(ErrorCode::DegenerateFit,
             "qRAM fit needs >= 3 points spanning >= 2 distinct n(n+k) values");
    }
    const auto m = static_cast<Eigen::Index>(data.size());
    Eigen::MatrixXd A(m, 2);
    Eigen::VectorXd b(m);
    for (Eigen::Index i = 0; i < m; ++i) {
        const auto &s = data[static_cast<std::size_t>(i)];
        A(i, 0) = s.n * (s.n + s.k);
        A(i, 1) = 1.0;
        b(i) = s.infidelity;
    }
    // Column scaling keeps the QR rank test meaningful when n(n+k) ~ 1e3.
    const double scale = A.col(0).cwiseAbs().maxCoeff();
    A.col(0) /= scale;
    const Eigen::VectorXd x = detail::least_squares(A, b, "qRAM fit");
    QramFit fit;
    fit.model.kappa = x(0) / scale;
    fit.model.c0 = x(1);
    fit.rms = std::sqrt((A * x - b).squaredNorm() / static_cast<double>(m));
    return fit;
}

/// Two-stage extrapolation: per word size k, a quadratic in n evaluated at
/// n_target; then a line through those values in k.
struct TwoStageFit {
    std::map<double, Eigen::Vector3d> quadratic_by_k; ///< (a, b, c): a n^2 + b n + c
    std::map<double, double> at_target;                ///< F(n_target, k)
    double slope = 0.0;
    double intercept = 0.0;
    double n_target = 30.0;

    [[nodiscard]] double predict(double k) const { return intercept + slope * k; }
};

inline TwoStageFit fit_qram_two_stage(std::span<const QramSample> data, double n_target = 30.0) {
    std::map<double, std::vector<QramSample>> by_k;
    for (const auto &s : data) {
        by_k[s.k].push_back(s);
    }
    TwoStageFit out;
    out.n_target = n_target;
    for (const auto &[k, rows] : by_k) {
        std::vector<double> ns;
        for (const auto &s : rows) {
            ns.push_back(s.n);
        }
        std::sort(ns.begin(), ns.end());
        ns.erase(std::unique(ns.begin(), ns.end()), ns.end());
        if (ns.size() < 3) {
            continue; // a quadratic needs three distinct address sizes
        }
        const auto m = static_cast<Eigen::Index>(rows.size());
        Eigen::MatrixXd A(m, 3);
        Eigen::VectorXd b(m);
        for (Eigen::Index i = 0; i < m; ++i) {
            const double n = rows[static_cast<std::size_t>(i)].n / n_target;
            A(i, 0) = n * n;
            A(i, 1) = n;
            A(i, 2) = 1.0;
            b(i) = rows[static_cast<std::size_t>(i)].infidelity;
        }
        const Eigen::Vector3d x = detail::least_squares(A, b, "per-k quadratic fit");
        const Eigen::Vector3d coeff(x(0) / (n_target * n_target), x(1) / n_target, x(2));
        out.quadratic_by_k[k] = coeff;
        out.at_target[k] = x(0) + x(1) + x(2);
    }
    if (out.at_target.size() < 2) {
        fail(ErrorCode::DegenerateFit,
             "two-stage fit needs >= 2 word sizes with >= 3 distinct address sizes each");
    }
    const auto m = static_cast<Eigen::Index>(out.at_target.size());
    Eigen::MatrixXd A(m, 2);
    Eigen::VectorXd b(m);
    Eigen::Index i = 0;
    for (const auto &[k, v] : out.at_target) {
        A(i, 0) = k;
        A(i, 1) = 1.0;
        b(i) = v;
        ++i;
    }
    const Eigen::Vector2d x = detail::least_squares(A, b, "linear extrapolation in k");
    out.slope = x(0);
    out.intercept = x(1);
    return out;
}

/// Ordinary least-squares slope of log(y) on log(x).
inline double loglog_slope(std::span<const double> x, std::span<const double> y) {
    require(x.size() == y.size() && x.size() >= 2, ErrorCode::InvalidArgument,
            "slope fit needs >= 2 paired points");
    const auto m = static_cast<Eigen::Index>(x.size());
    Eigen::MatrixXd A(m, 2);
    Eigen::VectorXd b(m);
    for (Eigen::Index i = 0; i < m; ++i) {
        require(x[static_cast<std::size_t>(i)] > 0 && y[static_cast<std::size_t>(i)] > 0,
                ErrorCode::DomainError, "log-log fit needs positive data");
        A(i, 0) = std::log(x[static_cast<std::size_t>(i)]);
        A(i, 1) = 1.0;
        b(i) = std::log(y[static_cast<std::size_t>(i)]);
    }
    return detail::least_squares(A, b, "log-log slope")(0);
}

/// Coefficient of determination of the linear regression y ~ a x + b.
inline double r_squared_linear(std::span<const double> x, std::span<const double> y) {
    require(x.size() == y.size() && x.size() >= 3, ErrorCode::InvalidArgument,
            "regression needs >= 3 paired points");
    const auto m = static_cast<Eigen::Index>(x.size());
    Eigen::MatrixXd A(m, 2);
    Eigen::VectorXd b(m);
    for (Eigen::Index i = 0; i < m; ++i) {
        A(i, 0) = x[static_cast<std::size_t>(i)];
        A(i, 1) = 1.0;
        b(i) = y[static_cast<std::size_t>(i)];
    }
    const Eigen::VectorXd coef = detail::least_squares(A, b, "linear regression");
    const double ss_res = (A * coef - b).squaredNorm();
    const double ss_tot = (b.array() - b.mean()).square().sum();
    return ss_tot == 0.0 ? 1.0 : 1.0 - ss_res / ss_tot;
}

} // namespace hqdl
