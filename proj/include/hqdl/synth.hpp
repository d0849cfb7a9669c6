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
 * Synthetic workloads: states with a controlled Chebyshev spectrum and a
 * two-class task whose label lives in a few low-order modes.
 */

#include <cmath>
#include <ostream>
#include <vector>

#include <Eigen/Dense>

#include "hqdl/chebyshev.hpp"
#include "hqdl/csv.hpp"
#include "hqdl/dtm.hpp"
#include "hqdl/qlam.hpp"
#include "hqdl/random.hpp"

namespace hqdl {

struct SpectrumSpec {
    std::size_t d = 64;
    double p = 2.0;
    std::uint64_t seed = 0;

    void validate() const {
        require(d >= 1, ErrorCode::InvalidDimension, "spectrum dimension must be positive");
        require(p > 0.5, ErrorCode::InvalidArgument,
                "decay exponent must exceed 0.5, got " + std::to_string(p));
    }
};

/// c_j = s_j (j+1)^-p with seeded signs (s_0 = +1 fixes the global sign), normalized.
inline std::vector<double> compressible_coefficients(const SpectrumSpec &spec) {
    spec.validate();
    RandomSource rng(spec.seed);
    std::vector<double> c(spec.d);
    double n = 0.0;
    for (std::size_t j = 0; j < spec.d; ++j) {
        const double sign = rng.coin() || j == 0 ? 1.0 : -1.0;
        c[j] = sign * std::pow(static_cast<double>(j + 1), -spec.p);
        n += c[j] * c[j];
    }
    for (auto &v : c) {
        v /= std::sqrt(n);
    }
    return c;
}

inline AmplitudeState make_compressible_state(const SpectrumSpec &spec, const ChebyshevBasis &basis,
                                              const PrepCostModel &cost = prep::dense()) {
    require(basis.dimension() == spec.d, ErrorCode::DimensionMismatch,
            "basis dimension differs from the spectrum dimension");
    CoeffVector c{compressible_coefficients(spec), 0.0, spec.d};
    return prepare_state(cheb_reconstruct(c, basis, true), cost);
}

inline AmplitudeState make_compressible_state(const SpectrumSpec &spec) {
    return make_compressible_state(spec, build_basis(spec.d));
}

/// sqrt(sum_{j >= r} c_j^2) of the planted spectrum.
inline double planted_tail(const SpectrumSpec &spec, std::size_t r) {
    const auto c = compressible_coefficients(spec);
    double s = 0.0;
    for (std::size_t j = r; j < c.size(); ++j) {
        s += c[j] * c[j];
    }
    return std::sqrt(s);
}

// ---------------------------------------------------------------------------
// Toy classification task

struct ToyTaskSpec {
    std::size_t n_samples = 2000;
    std::size_t d = 32;
    std::uint64_t seed = 0;
    double separation = 2.0;
    /// Class-mean offset per informative mode, as a fraction of `separation`.
    std::vector<double> informative{0.3, 0.95};
    double train_fraction = 0.5;

    void validate() const {
        require(d >= 8, ErrorCode::InvalidDimension, "toy task needs d >= 8");
        require(n_samples >= 4, ErrorCode::InvalidArgument, "toy task needs at least 4 samples");
        require(informative.size() < d, ErrorCode::InvalidArgument,
                "more informative modes than dimensions");
        require(separation >= 0.0, ErrorCode::InvalidArgument, "separation must be non-negative");
        require(train_fraction > 0.0 && train_fraction < 1.0, ErrorCode::InvalidArgument,
                "train fraction must lie in (0, 1)");
    }
};

struct ToyTask {
    std::vector<AmplitudeState> states;
    std::vector<int> labels; ///< +1 / -1
    std::size_t n_train = 0;
    std::size_t d = 0;

    void write_csv(std::ostream &out) const {
        std::vector<std::string> head{"label"};
        for (std::size_t i = 0; i < d; ++i) {
            head.push_back("a" + std::to_string(i));
        }
        out << csv::join(head) << '\n';
        for (std::size_t s = 0; s < states.size(); ++s) {
            std::vector<std::string> row{std::to_string(labels[s])};
            for (double a : states[s].amplitudes) {
                row.push_back(csv::num(a));
            }
            out << csv::join(row) << '\n';
        }
    }
};

/// Two Gaussian blobs in Chebyshev-coefficient space. Informative mode j has
/// class means +-informative[j] * separation over unit noise; the remaining
/// modes carry noise decaying as 1/(j+1). Labels alternate, so both halves
/// of the split are balanced.
inline ToyTask make_toy_task(const ToyTaskSpec &spec, const ChebyshevBasis &basis) {
    spec.validate();
    require(basis.dimension() == spec.d, ErrorCode::DimensionMismatch, "basis dimension mismatch");
    RandomSource rng(spec.seed);
    ToyTask task;
    task.d = spec.d;
    task.n_train = static_cast<std::size_t>(std::round(spec.train_fraction * static_cast<double>(spec.n_samples)));
    const std::size_t k = spec.informative.size();
    for (std::size_t s = 0; s < spec.n_samples; ++s) {
        const int y = s % 2 == 0 ? 1 : -1;
        CoeffVector c;
        c.dimension = spec.d;
        c.coefficients.resize(spec.d);
        for (std::size_t j = 0; j < spec.d; ++j) {
            const double sigma = j < k ? 1.0 : 1.0 / static_cast<double>(j + 1);
            c.coefficients[j] = rng.normal(0.0, sigma);
            if (j < k) {
                c.coefficients[j] += y * spec.informative[j] * spec.separation;
            }
        }
        task.states.push_back(prepare_state(cheb_reconstruct(c, basis, false)));
        task.labels.push_back(y);
    }
    return task;
}

inline ToyTask make_toy_task(std::size_t n_samples, std::size_t d, std::uint64_t seed) {
    ToyTaskSpec spec;
    spec.n_samples = n_samples;
    spec.d = d;
    spec.seed = seed;
    return make_toy_task(spec, build_basis(d));
}

/// Closed-form least-squares linear probe on +-1 targets, with intercept.
class LinearProbe {
  public:
    void fit(const Eigen::MatrixXd &features, const std::vector<int> &labels) {
        require(static_cast<std::size_t>(features.rows()) == labels.size(), ErrorCode::ShapeMismatch,
                "one label per feature row");
        Eigen::MatrixXd A(features.rows(), features.cols() + 1);
        A.col(0).setOnes();
        A.rightCols(features.cols()) = features;
        Eigen::VectorXd y(features.rows());
        for (Eigen::Index i = 0; i < y.size(); ++i) {
            y(i) = labels[static_cast<std::size_t>(i)];
        }
        w_ = A.colPivHouseholderQr().solve(y);
    }

    [[nodiscard]] int predict(const Eigen::RowVectorXd &x) const {
        const double s = w_(0) + x.dot(w_.tail(w_.size() - 1));
        return s >= 0.0 ? 1 : -1;
    }

    [[nodiscard]] double accuracy(const Eigen::MatrixXd &features, const std::vector<int> &labels) const {
        std::size_t hit = 0;
        for (Eigen::Index i = 0; i < features.rows(); ++i) {
            hit += predict(features.row(i)) == labels[static_cast<std::size_t>(i)] ? 1 : 0;
        }
        return static_cast<double>(hit) / static_cast<double>(features.rows());
    }

  private:
    Eigen::VectorXd w_;
};

/// Train on the first n_train rows, report accuracy on the rest.
inline double probe_split_accuracy(const Eigen::MatrixXd &F, const ToyTask &task) {
    const auto ntr = static_cast<Eigen::Index>(task.n_train);
    const std::vector<int> ytr(task.labels.begin(), task.labels.begin() + ntr);
    const std::vector<int> yte(task.labels.begin() + ntr, task.labels.end());
    LinearProbe probe;
    probe.fit(F.topRows(ntr), ytr);
    return probe.accuracy(F.bottomRows(F.rows() - ntr), yte);
}

/// Test accuracy of a probe trained on the first r DCD coefficients of
/// every sample. delta = 0 reads the coefficients exactly.
inline double accuracy_at_rank(const ToyTask &task, std::size_t r, const ChebyshevBasis &basis,
                               double delta, NoiseModel &noise, ResourceLedger &ledger) {
    require(r >= 1 && r <= task.d, ErrorCode::RankTooLarge,
            "rank " + std::to_string(r) + " outside [1, " + std::to_string(task.d) + "]");
    const auto n = static_cast<Eigen::Index>(task.states.size());
    Eigen::MatrixXd F(n, static_cast<Eigen::Index>(r));
    for (Eigen::Index s = 0; s < n; ++s) {
        const auto &st = task.states[static_cast<std::size_t>(s)];
        const CoeffVector c = delta > 0.0 ? dcd_q2c(st, r, delta, basis, noise, ledger)
                                          : cheb_forward(st.amplitudes, r, basis);
        for (Eigen::Index j = 0; j < static_cast<Eigen::Index>(r); ++j) {
            F(s, j) = c.coefficients[static_cast<std::size_t>(j)];
        }
    }
    return probe_split_accuracy(F, task);
}

/// Probe accuracy on the raw amplitudes.
inline double raw_accuracy(const ToyTask &task) {
    const auto n = static_cast<Eigen::Index>(task.states.size());
    Eigen::MatrixXd F(n, static_cast<Eigen::Index>(task.d));
    for (Eigen::Index s = 0; s < n; ++s)
        for (Eigen::Index i = 0; i < F.cols(); ++i)
            F(s, i) = task.states[static_cast<std::size_t>(s)].amplitudes[static_cast<std::size_t>(i)];
    return probe_split_accuracy(F, task);
}

/// Smallest rank whose accuracy is within `tolerance` of the last entry.
inline std::size_t elbow_rank(const std::vector<double> &accuracy_by_rank, double tolerance = 0.02) {
    require(!accuracy_by_rank.empty(), ErrorCode::InvalidArgument, "empty accuracy curve");
    const double plateau = accuracy_by_rank.back();
    for (std::size_t r = 0; r < accuracy_by_rank.size(); ++r) {
        if (accuracy_by_rank[r] >= plateau - tolerance) {
            return r + 1;
        }
    }
    return accuracy_by_rank.size();
}

} // namespace hqdl
