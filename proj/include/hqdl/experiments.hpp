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
 * Experiment drivers behind the command-line tool. Each driver expands a
 * grid into cells, runs the cells (optionally on several threads) and
 * returns a Table whose rows are in grid order. Every cell is a pure
 * function of the spec and the row's seed, so any row can be re-run alone
 * and reproduces bit-exactly.
 */

#include <algorithm>
#include <atomic>
#include <bit>
#include <cmath>
#include <cstdint>
#include <exception>
#include <limits>
#include <optional>
#include <ostream>
#include <string>
#include <thread>
#include <vector>

#include <Eigen/Dense>

#include "hqdl/chebyshev.hpp"
#include "hqdl/csv.hpp"
#include "hqdl/dtm.hpp"
#include "hqdl/models.hpp"
#include "hqdl/qlam.hpp"
#include "hqdl/random.hpp"
#include "hqdl/reference.hpp"
#include "hqdl/resource.hpp"
#include "hqdl/synth.hpp"

namespace hqdl::experiments {

struct Table {
    std::vector<std::string> columns;
    std::vector<std::vector<std::string>> rows;

    void write_csv(std::ostream &out) const {
        out << csv::join(columns) << '\n';
        for (const auto &r : rows) {
            out << csv::join(r) << '\n';
        }
    }

    [[nodiscard]] std::size_t column(const std::string &name) const {
        const auto it = std::find(columns.begin(), columns.end(), name);
        require(it != columns.end(), ErrorCode::InvalidArgument, "no column named '" + name + "'");
        return static_cast<std::size_t>(it - columns.begin());
    }

    [[nodiscard]] double value(std::size_t row, const std::string &name) const {
        return csv::parse_double(rows.at(row).at(column(name)), name);
    }
};

/// Runs fn(i) for i in [0, n) on up to `jobs` threads. The first exception
/// (lowest index) is rethrown after all workers finish.
template <class Fn>
void parallel_for(std::size_t n, std::size_t jobs, Fn &&fn) {
    jobs = std::clamp<std::size_t>(jobs, 1, std::max<std::size_t>(n, 1));
    std::vector<std::exception_ptr> errors(n);
    std::atomic<std::size_t> next{0};
    auto worker = [&] {
        for (std::size_t i = next++; i < n; i = next++) {
            try {
                fn(i);
            } catch (...) {
                errors[i] = std::current_exception();
            }
        }
    };
    if (jobs == 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        for (std::size_t t = 0; t < jobs; ++t) {
            pool.emplace_back(worker);
        }
        for (auto &t : pool) {
            t.join();
        }
    }
    for (const auto &e : errors) {
        if (e) {
            std::rethrow_exception(e);
        }
    }
}

/// Child seed for one cell, keyed by the row seed and the cell coordinates.
inline std::uint64_t cell_seed(std::uint64_t seed, std::initializer_list<std::uint64_t> keys) {
    std::uint64_t k = 0x2545f4914f6cdd1dULL;
    for (std::uint64_t v : keys) {
        k = splitmix64(k ^ v);
    }
    return RandomSource(seed).derive(k).seed();
}

inline std::uint64_t key(double v) { return std::bit_cast<std::uint64_t>(v); }

template <class T>
void check_grid(const std::vector<T> &grid, const std::string &name) {
    require(!grid.empty(), ErrorCode::InvalidArgument, name + " grid is empty");
}

// ---------------------------------------------------------------------------
// Reference overhead

enum class BaselineModel { Resnet, Transformer, Direct };

inline BaselineModel parse_baseline_model(std::string_view s) {
    if (s == "resnet") return BaselineModel::Resnet;
    if (s == "transformer") return BaselineModel::Transformer;
    if (s == "direct") return BaselineModel::Direct;
    fail(ErrorCode::InvalidArgument,
         "unknown model '" + std::string(s) + "' (expected resnet, transformer or direct)");
}

/// Token count N of the classical model a sweep is compared against:
/// (input_dim / 4)^2 feature-map positions for a ResNet, (input_dim / 16)^2
/// patches for a vision transformer, or N itself.
struct Baseline {
    BaselineModel model = BaselineModel::Resnet;
    std::size_t input_dim = 32;
    std::size_t tokens = 0; ///< direct

    void validate() const {
        switch (model) {
        case BaselineModel::Resnet:
            require(input_dim >= 4 && input_dim % 4 == 0, ErrorCode::InvalidDimension,
                    "resnet input_dim must be a positive multiple of 4");
            break;
        case BaselineModel::Transformer:
            require(input_dim >= 16 && input_dim % 16 == 0, ErrorCode::InvalidDimension,
                    "transformer input_dim must be a positive multiple of 16");
            break;
        case BaselineModel::Direct:
            require(tokens > 0, ErrorCode::InvalidDimension, "direct baseline needs tokens > 0");
            break;
        }
    }

    [[nodiscard]] std::size_t N() const {
        validate();
        switch (model) {
        case BaselineModel::Resnet: return (input_dim / 4) * (input_dim / 4);
        case BaselineModel::Transformer: return (input_dim / 16) * (input_dim / 16);
        case BaselineModel::Direct: return tokens;
        }
        return 0;
    }

    [[nodiscard]] double overhead() const { return static_cast<double>(N()) * 1e8; }
};

// ---------------------------------------------------------------------------
// Transfer sweeps

struct TaskOptions {
    std::size_t n_samples = 400;
    double separation = 2.0;
    std::vector<double> informative{0.3, 0.95};
};

struct SweepCommon {
    std::vector<std::size_t> dims{64, 128};
    std::vector<std::uint64_t> seeds{0};
    NoiseMode noise = NoiseMode::Bounded;
    double decay = 2.0; ///< power-law exponent of the input spectrum
    Baseline baseline;
    std::optional<TaskOptions> task;
    std::size_t jobs = 1;

    void validate() const {
        check_grid(dims, "dimension");
        check_grid(seeds, "seed");
        for (std::size_t d : dims) {
            require(d >= 2, ErrorCode::InvalidDimension, "dimensions must be >= 2");
            require(!task || d >= 8, ErrorCode::InvalidDimension, "the toy task needs d >= 8");
        }
        require(decay > 0.5, ErrorCode::InvalidArgument, "decay exponent must exceed 0.5");
        if (task) {
            require(task->n_samples >= 4, ErrorCode::InvalidArgument, "task needs >= 4 samples");
        }
        baseline.validate();
    }

    [[nodiscard]] ToyTask make_task(std::size_t d, const ChebyshevBasis &basis, std::uint64_t seed) const {
        ToyTaskSpec t;
        t.d = d;
        t.n_samples = task->n_samples;
        t.separation = task->separation;
        t.informative = task->informative;
        t.seed = cell_seed(seed, {d, 0x7a5c});
        return make_toy_task(t, basis);
    }
};

/// Input state of a sweep row: power-law spectrum with seeded signs, dense
/// preparation (cost 2d).
inline AmplitudeState sweep_state(std::size_t d, double decay, std::uint64_t seed,
                                  const ChebyshevBasis &basis) {
    return make_compressible_state({d, decay, cell_seed(seed, {d})}, basis, prep::dense());
}

struct DcdSweepSpec : SweepCommon {
    std::vector<std::size_t> ranks{4, 8};
    std::vector<double> deltas{0.01};

    void validate() const {
        SweepCommon::validate();
        check_grid(ranks, "rank");
        check_grid(deltas, "delta");
        for (std::size_t r : ranks) {
            require(r >= 1, ErrorCode::InvalidArgument, "ranks must be >= 1");
        }
        for (double v : deltas) {
            check_precision(v);
        }
    }
};

inline std::vector<std::string> dcd_sweep_columns() {
    return {"d", "r", "delta", "seed", "l2_err", "accuracy", "tdepth", "shots", "queries", "Q", "Q_baseline"};
}

/// One (d, r, delta, seed) cell; the basis must have dimension d.
inline std::vector<std::string> dcd_sweep_row(const DcdSweepSpec &spec, const ChebyshevBasis &basis,
                                              std::size_t r, double delta, std::uint64_t seed) {
    const std::size_t d = basis.dimension();
    const AmplitudeState psi = sweep_state(d, spec.decay, seed, basis);
    NoiseModel noise(spec.noise, cell_seed(seed, {d, r, key(delta)}));
    ResourceLedger ledger;
    TransferParams p;
    p.protocol = Protocol::Dcd;
    p.rank = r;
    p.delta = delta;
    const TransferReport rep = transfer_roundtrip(psi, p, &basis, noise, ledger);

    std::string accuracy;
    if (spec.task) {
        const ToyTask task = spec.make_task(d, basis, seed);
        NoiseModel tn(spec.noise, cell_seed(seed, {d, r, key(delta), 0x7a5c}));
        ResourceLedger scratch;
        accuracy = csv::num(accuracy_at_rank(task, r, basis, delta, tn, scratch));
    }
    return {std::to_string(d), std::to_string(r), csv::num(delta), std::to_string(seed),
            csv::num(rep.l2_error), accuracy, csv::num(ledger.t_depth()),
            std::to_string(ledger.shots()), std::to_string(ledger.oracle_queries()),
            csv::num(overhead(ledger)), csv::num(spec.baseline.overhead())};
}

/// Cells with r > d are omitted.
inline Table dcd_sweep(const DcdSweepSpec &spec) {
    spec.validate();
    struct Cell {
        std::size_t di, r;
        double delta;
        std::uint64_t seed;
    };
    std::vector<Cell> cells;
    for (std::size_t di = 0; di < spec.dims.size(); ++di)
        for (std::size_t r : spec.ranks)
            for (double delta : spec.deltas)
                for (std::uint64_t seed : spec.seeds)
                    if (r <= spec.dims[di])
                        cells.push_back({di, r, delta, seed});
    require(!cells.empty(), ErrorCode::InvalidArgument, "every rank exceeds every dimension");

    std::vector<ChebyshevBasis> bases;
    for (std::size_t d : spec.dims) {
        bases.push_back(build_basis(d));
    }
    Table t{dcd_sweep_columns(), std::vector<std::vector<std::string>>(cells.size())};
    parallel_for(cells.size(), spec.jobs, [&](std::size_t i) {
        const Cell &c = cells[i];
        t.rows[i] = dcd_sweep_row(spec, bases[c.di], c.r, c.delta, c.seed);
    });
    return t;
}

struct TomoSweepSpec : SweepCommon {
    std::vector<double> epsilons{0.1, 0.05};
    double c_tomo = 1.0;

    void validate() const {
        SweepCommon::validate();
        check_grid(epsilons, "epsilon");
        for (double e : epsilons) {
            check_precision(e);
        }
        require(c_tomo > 0.0, ErrorCode::InvalidArgument, "c_tomo must be positive");
    }
};

inline std::vector<std::string> tomo_sweep_columns() {
    return {"d", "eps", "seed", "shots_per_pass", "l2_err", "accuracy", "tdepth", "shots", "queries", "Q", "Q_baseline"};
}

/// Linear-probe accuracy on l-infinity readouts of the task states.
inline double linf_accuracy(const ToyTask &task, double epsilon, NoiseModel &noise, double c_tomo = 1.0) {
    Eigen::MatrixXd F(static_cast<Eigen::Index>(task.states.size()), static_cast<Eigen::Index>(task.d));
    ResourceLedger scratch;
    for (std::size_t s = 0; s < task.states.size(); ++s) {
        const auto v = linf_tomography(task.states[s], epsilon, noise, scratch, c_tomo);
        for (std::size_t i = 0; i < v.size(); ++i) {
            F(static_cast<Eigen::Index>(s), static_cast<Eigen::Index>(i)) = v[i];
        }
    }
    return probe_split_accuracy(F, task);
}

inline std::vector<std::string> tomo_sweep_row(const TomoSweepSpec &spec, const ChebyshevBasis &basis,
                                               double eps, std::uint64_t seed) {
    const std::size_t d = basis.dimension();
    const AmplitudeState psi = sweep_state(d, spec.decay, seed, basis);
    NoiseModel noise(spec.noise, cell_seed(seed, {d, key(eps)}));
    ResourceLedger ledger;
    TransferParams p;
    p.protocol = Protocol::Linf;
    p.epsilon = eps;
    p.c_tomo = spec.c_tomo;
    const TransferReport rep = transfer_roundtrip(psi, p, nullptr, noise, ledger);

    std::string accuracy;
    if (spec.task) {
        const ToyTask task = spec.make_task(d, basis, seed);
        NoiseModel tn(spec.noise, cell_seed(seed, {d, key(eps), 0x7a5c}));
        accuracy = csv::num(linf_accuracy(task, eps, tn, spec.c_tomo));
    }
    return {std::to_string(d), csv::num(eps), std::to_string(seed),
            std::to_string(tomography_shots(d, eps, spec.c_tomo)), csv::num(rep.l2_error), accuracy,
            csv::num(ledger.t_depth()), std::to_string(ledger.shots()),
            std::to_string(ledger.oracle_queries()), csv::num(overhead(ledger)),
            csv::num(spec.baseline.overhead())};
}

inline Table tomo_sweep(const TomoSweepSpec &spec) {
    spec.validate();
    struct Cell {
        std::size_t di;
        double eps;
        std::uint64_t seed;
    };
    std::vector<Cell> cells;
    for (std::size_t di = 0; di < spec.dims.size(); ++di)
        for (double eps : spec.epsilons)
            for (std::uint64_t seed : spec.seeds)
                cells.push_back({di, eps, seed});
    std::vector<ChebyshevBasis> bases;
    for (std::size_t d : spec.dims) {
        bases.push_back(build_basis(d));
    }
    Table t{tomo_sweep_columns(), std::vector<std::vector<std::string>>(cells.size())};
    parallel_for(cells.size(), spec.jobs, [&](std::size_t i) {
        const Cell &c = cells[i];
        t.rows[i] = tomo_sweep_row(spec, bases[c.di], c.eps, c.seed);
    });
    return t;
}

/// Cheapest DCD setting whose error bound tail(r) + sqrt(r) delta meets
/// `target`: for each r the largest admissible delta is taken, and r is
/// chosen to minimize r^2 / delta (the Q of a transfer up to constants).
struct DcdOperatingPoint {
    std::size_t rank = 0;
    double delta = 0.0;
};

inline DcdOperatingPoint dcd_operating_point(const AmplitudeState &psi, const ChebyshevBasis &basis,
                                             double target, std::size_t max_rank = 256) {
    DcdOperatingPoint best;
    double best_cost = std::numeric_limits<double>::infinity();
    const std::size_t top = std::min(max_rank, basis.dimension());
    for (std::size_t r = 1; r <= top; ++r) {
        const double slack = target - truncation_tail(psi.amplitudes, r, basis);
        if (slack <= 0.0) {
            continue;
        }
        const double delta = std::min(0.5, slack / std::sqrt(static_cast<double>(r)));
        const double cost = static_cast<double>(r * r) / delta;
        if (cost < best_cost) {
            best_cost = cost;
            best = {r, delta};
        }
    }
    require(best.rank > 0, ErrorCode::InvalidArgument,
            "no rank up to " + std::to_string(top) + " reaches the target error");
    return best;
}

// ---------------------------------------------------------------------------
// Seeded block instances

inline Eigen::MatrixXd random_matrix(Eigen::Index r, Eigen::Index c, RandomSource &rng, double scale) {
    Eigen::MatrixXd M(r, c);
    for (Eigen::Index i = 0; i < M.size(); ++i) {
        M.data()[i] = rng.normal(0.0, scale);
    }
    return M;
}

inline RealTensor random_tensor(Shape s, RandomSource &rng) {
    RealTensor t(std::move(s));
    for (auto &v : t.data()) {
        v = rng.normal();
    }
    return t;
}

/// Kernel entries N(0, 1/(C K^2)), biases N(0, 0.01).
inline ResBlockConfig random_residual_block(std::size_t B, std::size_t C, std::size_t H, std::size_t W,
                                            std::size_t K, RandomSource &rng) {
    ResBlockConfig c;
    c.B = B;
    c.C = C;
    c.H = H;
    c.W = W;
    c.K = K;
    c.kernel = RealTensor({C, C, K, K});
    for (auto &v : c.kernel.data()) {
        v = rng.normal(0.0, 1.0 / std::sqrt(static_cast<double>(C * K * K)));
    }
    c.bias.resize(C);
    for (auto &v : c.bias) {
        v = rng.normal(0.0, 0.1);
    }
    return c;
}

inline AttnConfig random_attention(std::size_t B, std::size_t N, std::size_t d, std::size_t heads,
                                   RandomSource &rng) {
    AttnConfig c;
    c.B = B;
    c.N = N;
    c.d = d;
    c.heads = heads;
    const auto n = static_cast<Eigen::Index>(d);
    const double s = 1.0 / std::sqrt(static_cast<double>(d));
    c.WQ = random_matrix(n, n, rng, s);
    c.WK = random_matrix(n, n, rng, s);
    c.WV = random_matrix(n, n, rng, s);
    c.WO = random_matrix(n, n, rng, s);
    return c;
}

inline FfnParams random_ffn(std::size_t d, std::size_t hidden, RandomSource &rng) {
    const auto n = static_cast<Eigen::Index>(d), h = static_cast<Eigen::Index>(hidden);
    return {random_matrix(n, h, rng, 0.5), random_matrix(h, 1, rng, 0.1), random_matrix(h, n, rng, 0.5),
            random_matrix(n, 1, rng, 0.1)};
}

// ---------------------------------------------------------------------------
// Single-block fidelity

enum class BlockKind { Resnet, Transformer };

struct BlockSpec {
    BlockKind kind = BlockKind::Resnet;
    std::size_t B = 1, C = 4, H = 8, W = 8, K = 3; ///< residual block
    std::size_t N = 4, d = 4, heads = 2, d_ff = 8;  ///< transformer block
    Protocol protocol = Protocol::Linf;
    std::size_t rank = 0; ///< dcd; 0 means full rank
    std::vector<NoiseMode> noises{NoiseMode::Bounded};
    std::vector<double> precisions{0.02, 0.002};
    std::vector<std::uint64_t> seeds{0};
    std::uint64_t instance_seed = 0; ///< weights and input
    /// Residual block: C*C rows of K*K kernel entries. Transformer: W_Q,
    /// W_K, W_V, W_O stacked into 4d rows of d. Replaces the seeded weights.
    std::optional<Eigen::MatrixXd> weights;
    std::size_t jobs = 1;

    void validate() const {
        check_grid(noises, "noise");
        check_grid(precisions, "precision");
        check_grid(seeds, "seed");
        for (double p : precisions) {
            check_precision(p);
        }
        if (kind == BlockKind::Resnet) {
            require(B > 0 && C > 0 && H > 0 && W > 0 && K > 0, ErrorCode::InvalidDimension,
                    "block extents must be positive");
            require(K % 2 == 1, ErrorCode::InvalidArgument, "kernel extent must be odd");
            if (weights) {
                require(weights->rows() == static_cast<Eigen::Index>(C * C) &&
                            weights->cols() == static_cast<Eigen::Index>(K * K),
                        ErrorCode::ShapeMismatch,
                        "weights file must have " + std::to_string(C * C) + " rows of " +
                            std::to_string(K * K) + " kernel entries");
            }
        } else {
            require(B > 0 && N > 0 && d > 0 && heads > 0 && d_ff > 0, ErrorCode::InvalidDimension,
                    "block extents must be positive");
            require(d % heads == 0, ErrorCode::InvalidArgument, "d must be divisible by heads");
            if (weights) {
                require(weights->rows() == static_cast<Eigen::Index>(4 * d) &&
                            weights->cols() == static_cast<Eigen::Index>(d),
                        ErrorCode::ShapeMismatch,
                        "weights file must stack W_Q, W_K, W_V, W_O into " + std::to_string(4 * d) +
                            " rows of " + std::to_string(d));
            }
        }
        if (weights) {
            require(weights->allFinite(), ErrorCode::InvalidArgument, "weights file has non-finite entries");
        }
    }
};

inline std::vector<std::string> block_columns() {
    return {"block", "noise", "precision", "seed", "infidelity", "l2_diff", "tdepth", "shots", "Q"};
}

/// Weights, input and classical reference output of a block spec.
struct BlockInstance {
    ResBlockConfig res;
    AttnConfig attn;
    FfnParams ffn;
    RealTensor X;
    RealTensor reference;

    static BlockInstance make(const BlockSpec &spec) {
        spec.validate();
        RandomSource rng(spec.instance_seed);
        BlockInstance b;
        if (spec.kind == BlockKind::Resnet) {
            b.res = random_residual_block(spec.B, spec.C, spec.H, spec.W, spec.K, rng);
            if (spec.weights) {
                for (std::size_t i = 0; i < spec.C * spec.C; ++i)
                    for (std::size_t j = 0; j < spec.K * spec.K; ++j)
                        b.res.kernel[i * spec.K * spec.K + j] =
                            (*spec.weights)(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j));
            }
            b.X = random_tensor(b.res.input_shape(), rng);
            b.reference = reference::residual_block(b.X, b.res.kernel, b.res.bias, b.res.gamma, b.res.beta,
                                                    b.res.eps);
        } else {
            b.attn = random_attention(spec.B, spec.N, spec.d, spec.heads, rng);
            if (spec.weights) {
                const auto n = static_cast<Eigen::Index>(spec.d);
                b.attn.WQ = spec.weights->middleRows(0, n);
                b.attn.WK = spec.weights->middleRows(n, n);
                b.attn.WV = spec.weights->middleRows(2 * n, n);
                b.attn.WO = spec.weights->middleRows(3 * n, n);
            }
            b.ffn = random_ffn(spec.d, spec.d_ff, rng);
            b.X = random_tensor(b.attn.input_shape(), rng);
            b.reference = reference::transformer_block(b.X, spec.heads, b.attn.WQ, b.attn.WK, b.attn.WV,
                                                       b.attn.WO, b.ffn.W1, b.ffn.b1, b.ffn.W2, b.ffn.b2, 1e-5);
        }
        return b;
    }
};

inline std::vector<std::string> block_row(const BlockSpec &spec, const BlockInstance &inst, NoiseMode noise,
                                          double precision, std::uint64_t seed) {
    TransferParams dtm;
    dtm.protocol = spec.protocol;
    dtm.epsilon = precision;
    dtm.delta = precision;
    ResourceLedger ledger;
    RealTensor out;
    if (spec.kind == BlockKind::Resnet) {
        ResBlockConfig cfg = inst.res;
        dtm.rank = spec.rank ? spec.rank : cfg.B * cfg.C * cfg.H * cfg.W;
        cfg.dtm = dtm;
        cfg.noise = noise;
        cfg.seed = cell_seed(seed, {key(precision), static_cast<std::uint64_t>(noise)});
        out = residual_block_forward(inst.X, cfg, ledger);
    } else {
        AttnConfig cfg = inst.attn;
        dtm.rank = spec.rank ? spec.rank : cfg.B * cfg.N * cfg.d;
        cfg.dtm = dtm;
        cfg.noise = noise;
        cfg.seed = cell_seed(seed, {key(precision), static_cast<std::uint64_t>(noise)});
        out = transformer_block_forward(inst.X, cfg, inst.ffn, ledger);
    }
    return {spec.kind == BlockKind::Resnet ? "resnet" : "transformer", std::string(to_string(noise)),
            csv::num(precision), std::to_string(seed), csv::num(infidelity(out.data(), inst.reference.data())),
            csv::num(l2_difference(out.data(), inst.reference.data())), csv::num(ledger.t_depth()),
            std::to_string(ledger.shots()), csv::num(overhead(ledger))};
}

inline Table block(const BlockSpec &spec) {
    const BlockInstance inst = BlockInstance::make(spec);
    struct Cell {
        NoiseMode noise;
        double precision;
        std::uint64_t seed;
    };
    std::vector<Cell> cells;
    for (NoiseMode m : spec.noises)
        for (double p : spec.precisions)
            for (std::uint64_t s : spec.seeds)
                cells.push_back({m, p, s});
    Table t{block_columns(), std::vector<std::vector<std::string>>(cells.size())};
    parallel_for(cells.size(), spec.jobs, [&](std::size_t i) {
        t.rows[i] = block_row(spec, inst, cells[i].noise, cells[i].precision, cells[i].seed);
    });
    return t;
}

// ---------------------------------------------------------------------------
// Gradient check of Y = W X against central differences of L = <G, W X>

struct GradcheckSpec {
    std::size_t m = 4, n = 5, N = 6;
    std::vector<std::uint64_t> seeds{0};
    NoiseMode noise = NoiseMode::Exact;
    double delta = 0.01;
    bool identity = false; ///< W = I (needs m == n)
    std::optional<std::pair<std::size_t, std::size_t>> corrupt; ///< perturb dW(i, j) after the pass
    double step = 1e-4;
    double tolerance = 1e-5;

    void validate() const {
        check_grid(seeds, "seed");
        require(m > 0 && n > 0 && N > 0, ErrorCode::InvalidDimension, "gradcheck extents must be positive");
        require(!identity || m == n, ErrorCode::InvalidArgument, "identity W needs m == n");
        check_precision(delta);
        require(step > 0.0, ErrorCode::InvalidArgument, "finite-difference step must be positive");
        require(tolerance > 0.0, ErrorCode::InvalidArgument, "tolerance must be positive");
        if (corrupt) {
            require(corrupt->first < m && corrupt->second < n, ErrorCode::OutOfRange,
                    "corrupted index lies outside dW");
        }
    }
};

inline std::vector<std::string> gradcheck_columns() {
    return {"seed", "noise", "grad", "max_err", "limit", "worst", "pass"};
}

/// Two rows per seed. dX is always checked as a norm-wise relative error
/// against `tolerance`. dW is checked the same way in exact mode; in noisy
/// modes max_err is the largest |error| / (delta ||dY_i|| ||X_j||), limit 1.
inline std::vector<std::vector<std::string>> gradcheck_rows(const GradcheckSpec &spec, std::uint64_t seed) {
    RandomSource rng(cell_seed(seed, {spec.m, spec.n, spec.N}));
    const auto m = static_cast<Eigen::Index>(spec.m), n = static_cast<Eigen::Index>(spec.n),
               N = static_cast<Eigen::Index>(spec.N);
    const Eigen::MatrixXd W = spec.identity ? Eigen::MatrixXd::Identity(m, n)
                                            : random_matrix(m, n, rng, 1.0 / std::sqrt(static_cast<double>(n)));
    const Eigen::MatrixXd X = random_matrix(n, N, rng, 1.0);
    const Eigen::MatrixXd G = random_matrix(m, N, rng, 1.0);

    NoiseModel noise(spec.noise, cell_seed(seed, {0x9c}));
    ResourceLedger ledger;
    LinearGrads g = backprop_linear(W, X, G, spec.delta, noise, ledger);
    if (spec.corrupt) {
        const auto [i, j] = *spec.corrupt;
        g.dW(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) += 1.0;
    }

    const auto loss = [&](const Eigen::MatrixXd &Wv, const Eigen::MatrixXd &Xv) {
        return (G.array() * (Wv * Xv).array()).sum();
    };
    const double h = spec.step;
    Eigen::MatrixXd fdW(m, n), fdX(n, N);
    for (Eigen::Index i = 0; i < m; ++i)
        for (Eigen::Index j = 0; j < n; ++j) {
            Eigen::MatrixXd Wp = W, Wm = W;
            Wp(i, j) += h;
            Wm(i, j) -= h;
            fdW(i, j) = (loss(Wp, X) - loss(Wm, X)) / (2 * h);
        }
    for (Eigen::Index i = 0; i < n; ++i)
        for (Eigen::Index j = 0; j < N; ++j) {
            Eigen::MatrixXd Xp = X, Xm = X;
            Xp(i, j) += h;
            Xm(i, j) -= h;
            fdX(i, j) = (loss(W, Xp) - loss(W, Xm)) / (2 * h);
        }

    const auto relative = [](const Eigen::MatrixXd &got, const Eigen::MatrixXd &want, Eigen::Index &wi,
                             Eigen::Index &wj) {
        const double scale = std::max(want.cwiseAbs().maxCoeff(), std::numeric_limits<double>::min());
        return (got - want).cwiseAbs().maxCoeff(&wi, &wj) / scale;
    };
    const auto row = [&](const char *name, double err, double limit, Eigen::Index wi, Eigen::Index wj) {
        return std::vector<std::string>{std::to_string(seed), std::string(to_string(spec.noise)), name,
                                        csv::num(err), csv::num(limit),
                                        std::string(name) + "[" + std::to_string(wi) + "," + std::to_string(wj) + "]",
                                        err <= limit ? "pass" : "fail"};
    };

    std::vector<std::vector<std::string>> out;
    Eigen::Index wi = 0, wj = 0;
    if (spec.noise == NoiseMode::Exact) {
        const double e = relative(g.dW, fdW, wi, wj);
        out.push_back(row("dW", e, spec.tolerance, wi, wj));
    } else {
        double worst = 0.0;
        for (Eigen::Index i = 0; i < m; ++i)
            for (Eigen::Index j = 0; j < n; ++j) {
                const double bound = spec.delta * G.row(i).norm() * X.row(j).norm();
                // The finite-difference error of a bilinear loss is rounding only.
                const double e = std::abs(g.dW(i, j) - fdW(i, j)) / (bound + 1e-9);
                if (e > worst) {
                    worst = e;
                    wi = i;
                    wj = j;
                }
            }
        out.push_back(row("dW", worst, 1.0, wi, wj));
    }
    const double ex = relative(g.dX, fdX, wi, wj);
    out.push_back(row("dX", ex, spec.tolerance, wi, wj));
    return out;
}

inline Table gradcheck(const GradcheckSpec &spec) {
    spec.validate();
    Table t{gradcheck_columns(), {}};
    for (std::uint64_t s : spec.seeds) {
        for (auto &r : gradcheck_rows(spec, s)) {
            t.rows.push_back(std::move(r));
        }
    }
    return t;
}

inline bool all_pass(const Table &t) {
    const std::size_t c = t.column("pass");
    return std::all_of(t.rows.begin(), t.rows.end(), [c](const auto &r) { return r[c] == "pass"; });
}

// ---------------------------------------------------------------------------
// qRAM infidelity fit

struct QramFitSpec {
    std::vector<QramSample> data; ///< fitted as given when non-empty
    QramModel planted{4.7e-5, 2e-3};
    double relative_noise = 0.0;
    std::uint64_t seed = 0;
    std::vector<double> ns{4, 8, 12, 16, 20}; ///< simulable sizes, up to (20, 20)
    std::vector<double> ks{5, 10, 15, 20};

    void validate() const {
        if (data.empty()) {
            check_grid(ns, "n");
            check_grid(ks, "k");
            require(relative_noise >= 0.0, ErrorCode::InvalidArgument, "noise level must be non-negative");
        }
    }
};

/// I = kappa n(n+k) + c0 on the (n, k) grid, times (1 + noise z), z ~ N(0, 1).
inline std::vector<QramSample> planted_qram_data(const QramFitSpec &spec) {
    RandomSource rng(spec.seed);
    std::vector<QramSample> out;
    for (double n : spec.ns)
        for (double k : spec.ks) {
            const double clean = spec.planted.kappa * n * (n + k) + spec.planted.c0;
            out.push_back({n, k, clean * (1.0 + spec.relative_noise * rng.normal())});
        }
    return out;
}

/// Published fidelity anchors at n = 30 address bits.
inline constexpr double kFidelityAnchor32 = 0.91;
inline constexpr double kFidelityAnchor64 = 0.87;

inline Table qram_fit(const QramFitSpec &spec) {
    spec.validate();
    const auto data = spec.data.empty() ? planted_qram_data(spec) : spec.data;
    const QramFit fit = fit_qram(data);
    Table t{{"quantity", "value", "anchor"}, {}};
    t.rows.push_back({"kappa", csv::num(fit.model.kappa), ""});
    t.rows.push_back({"c0", csv::num(fit.model.c0), ""});
    t.rows.push_back({"rms", csv::num(fit.rms), ""});
    if (spec.data.empty()) {
        t.rows.push_back({"planted_kappa", csv::num(spec.planted.kappa), ""});
        t.rows.push_back({"planted_c0", csv::num(spec.planted.c0), ""});
    }
    t.rows.push_back({"fidelity_n30_k32", csv::num(1.0 - qram_infidelity(30, 32, fit.model)),
                      csv::num(kFidelityAnchor32)});
    t.rows.push_back({"fidelity_n30_k64", csv::num(1.0 - qram_infidelity(30, 64, fit.model)),
                      csv::num(kFidelityAnchor64)});
    return t;
}

// ---------------------------------------------------------------------------
// Closed-form overhead models against the ledger

struct OverheadSpec {
    std::vector<std::size_t> channels{1, 2, 4, 8};
    std::vector<std::size_t> kernels{1, 3, 5};
    std::size_t spatial = 8;
    std::vector<std::size_t> dims{8, 16, 32, 64};
    std::size_t tokens = 16;        ///< fixed N for the d sweep
    std::vector<std::size_t> token_grid{4, 8, 16, 32, 64};
    std::size_t token_dim = 8;      ///< fixed d for the N sweep
    std::size_t heads = 2;
    NoiseMode noise = NoiseMode::Exact;
    std::uint64_t seed = 0;
    std::size_t jobs = 1;

    void validate() const {
        check_grid(channels, "channel");
        check_grid(kernels, "kernel");
        check_grid(dims, "dimension");
        check_grid(token_grid, "token");
        require(spatial > 0 && tokens >= 2 && token_dim >= 2 && heads > 0, ErrorCode::InvalidDimension,
                "overhead extents out of range");
        for (std::size_t K : kernels) {
            require(K % 2 == 1, ErrorCode::InvalidArgument, "kernel extents must be odd");
        }
        for (std::size_t d : dims) {
            require(d >= 2 && d % heads == 0, ErrorCode::InvalidArgument, "dimensions must be divisible by heads");
        }
        for (std::size_t N : token_grid) {
            require(N >= 2, ErrorCode::InvalidDimension, "token counts must be >= 2");
        }
        require(token_dim % heads == 0, ErrorCode::InvalidArgument, "token_dim must be divisible by heads");
    }
};

inline std::vector<std::string> overhead_columns() {
    return {"block", "C", "K", "N", "d", "model", "tdepth", "shots", "Q", "tdepth_over_model"};
}

/// Models use unit sampling overhead, so `model` is the T-depth law alone
/// (C K^2 for the residual block, d^2 log2 d (log2 N)^2 for attention).
inline Table overhead_report(const OverheadSpec &spec) {
    spec.validate();
    struct Cell {
        bool attention;
        std::size_t a, b;
    };
    std::vector<Cell> cells;
    for (std::size_t C : spec.channels)
        for (std::size_t K : spec.kernels)
            cells.push_back({false, C, K});
    for (std::size_t d : spec.dims)
        cells.push_back({true, spec.tokens, d});
    for (std::size_t N : spec.token_grid)
        cells.push_back({true, N, spec.token_dim});

    Table t{overhead_columns(), std::vector<std::vector<std::string>>(cells.size())};
    parallel_for(cells.size(), spec.jobs, [&](std::size_t i) {
        const Cell &c = cells[i];
        RandomSource rng(cell_seed(spec.seed, {c.attention, c.a, c.b}));
        ResourceLedger ledger;
        double model = 0.0;
        if (!c.attention) {
            auto cfg = random_residual_block(1, c.a, spec.spatial, spec.spatial, c.b, rng);
            cfg.noise = spec.noise;
            cfg.seed = rng.next_u64();
            residual_block_forward(random_tensor(cfg.input_shape(), rng), cfg, ledger);
            model = qresnet_overhead_model(1, c.a, spec.spatial, spec.spatial, c.b,
                                           [](auto, auto, auto, auto) { return 1.0; });
        } else {
            auto cfg = random_attention(1, c.a, c.b, spec.heads, rng);
            cfg.noise = spec.noise;
            cfg.seed = rng.next_u64();
            mhsa_forward(random_tensor(cfg.input_shape(), rng), cfg, ledger);
            model = mhsa_overhead_model(1, c.a, c.b, [](auto, auto, auto) { return 1.0; });
        }
        t.rows[i] = {c.attention ? "mhsa" : "resnet", c.attention ? "" : std::to_string(c.a),
                     c.attention ? "" : std::to_string(c.b), c.attention ? std::to_string(c.a) : "",
                     c.attention ? std::to_string(c.b) : "", csv::num(model), csv::num(ledger.t_depth()),
                     std::to_string(ledger.shots()), csv::num(overhead(ledger)),
                     csv::num(ledger.t_depth() / model)};
    });
    return t;
}

} // namespace hqdl::experiments
