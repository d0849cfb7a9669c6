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

#include <cmath>

#include <catch_amalgamated.hpp>

#include "hqdl/models.hpp"
#include "hqdl/reference.hpp"
#include "hqdl/resource.hpp"

using namespace hqdl;
using Catch::Matchers::WithinAbs;

namespace {

Eigen::MatrixXd random_matrix(Eigen::Index r, Eigen::Index c, RandomSource &rng, double scale) {
    Eigen::MatrixXd M(r, c);
    for (Eigen::Index i = 0; i < M.size(); ++i) {
        M.data()[i] = rng.normal(0.0, scale);
    }
    return M;
}

Eigen::VectorXd random_vector(Eigen::Index n, RandomSource &rng, double scale) {
    return random_matrix(n, 1, rng, scale);
}

RealTensor random_tensor(Shape s, RandomSource &rng) {
    RealTensor t(std::move(s));
    for (auto &v : t.data()) {
        v = rng.normal();
    }
    return t;
}

ResBlockConfig random_block(std::size_t C, std::size_t K, std::size_t H, RandomSource &rng) {
    ResBlockConfig c;
    c.C = C;
    c.K = K;
    c.H = c.W = H;
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

AttnConfig random_attention(std::size_t N, std::size_t d, std::size_t h, RandomSource &rng) {
    AttnConfig c;
    c.N = N;
    c.d = d;
    c.heads = h;
    const auto n = static_cast<Eigen::Index>(d);
    const double s = 1.0 / std::sqrt(static_cast<double>(d));
    c.WQ = random_matrix(n, n, rng, s);
    c.WK = random_matrix(n, n, rng, s);
    c.WV = random_matrix(n, n, rng, s);
    c.WO = random_matrix(n, n, rng, s);
    return c;
}

FfnParams random_ffn(Eigen::Index d, Eigen::Index hidden, RandomSource &rng) {
    return {random_matrix(d, hidden, rng, 0.5), random_vector(hidden, rng, 0.1),
            random_matrix(hidden, d, rng, 0.5), random_vector(d, rng, 0.1)};
}

double max_abs_diff(const RealTensor &a, const RealTensor &b) {
    REQUIRE(a.shape() == b.shape());
    double worst = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        worst = std::max(worst, std::abs(a[i] - b[i]));
    }
    return worst;
}

} // namespace

TEST_CASE("residual block examples", "[models]") {
    ResBlockConfig zero;
    zero.C = 2;
    zero.H = zero.W = 3;
    zero.kernel = RealTensor({2, 2, 1, 1}, 0.5);
    zero.bias = {0.0, 0.0};
    ResourceLedger ledger;
    const auto Y0 = residual_block_forward(RealTensor({1, 2, 3, 3}, 0.0), zero, ledger);
    for (double v : Y0.data()) {
        CHECK(v == 0.0);
    }

    ResBlockConfig id;
    id.H = id.W = 2;
    id.kernel = RealTensor({1, 1, 1, 1}, 1.0);
    id.bias = {0.0};
    const RealTensor X({1, 1, 2, 2}, std::vector<double>{1.0, -2.0, 0.5, 3.0});
    const auto Y = residual_block_forward(X, id, ledger);
    // Hand-computed: mean 0.625, var 3.171875.
    const double inv = 1.0 / std::sqrt(3.171875 + 1e-5);
    for (std::size_t i = 0; i < 4; ++i) {
        const double bn = (X[i] - 0.625) * inv;
        CHECK_THAT(Y[i], WithinAbs(std::max(0.0, std::max(0.0, bn) + X[i]), 1e-6));
    }
    CHECK(max_abs_diff(Y, reference::residual_block(X, id.kernel, id.bias, 1.0, 0.0, 1e-5)) <= 1e-6);

    ResBlockConfig bad = id;
    bad.K = 2;
    CHECK_THROWS_AS(residual_block_forward(X, bad, ledger), Error);
    CHECK_THROWS_AS(residual_block_forward(RealTensor({1, 2, 2, 2}), id, ledger), Error);
}

TEST_CASE("residual block matches the classical reference in exact mode", "[models][oracle]") {
    RandomSource rng(31);
    for (int s = 0; s < 20; ++s) {
        const auto cfg = random_block(4, 3, 8, rng);
        const auto X = random_tensor(cfg.input_shape(), rng);
        ResourceLedger ledger;
        const auto Y = residual_block_forward(X, cfg, ledger);
        const auto R = reference::residual_block(X, cfg.kernel, cfg.bias, cfg.gamma, cfg.beta, cfg.eps);
        REQUIRE(max_abs_diff(Y, R) <= 1e-5);
        REQUIRE(ledger.ancilla().live() == 0);
    }
}

TEST_CASE("residual block infidelity grows with sampling precision", "[models][property]") {
    RandomSource rng(32);
    const auto base = random_block(4, 3, 8, rng);
    const auto X = random_tensor(base.input_shape(), rng);
    const auto R = reference::residual_block(X, base.kernel, base.bias, base.gamma, base.beta, base.eps);
    double previous = 0.0;
    for (double eps : {0.002, 0.004, 0.01, 0.02}) {
        double mean = 0.0;
        for (std::uint64_t seed = 0; seed < 8; ++seed) {
            auto cfg = base;
            cfg.noise = NoiseMode::Bounded;
            cfg.dtm.epsilon = eps;
            cfg.seed = seed;
            ResourceLedger ledger;
            mean += infidelity(residual_block_forward(X, cfg, ledger).data(), R.data()) / 8.0;
        }
        CHECK(mean >= previous);
        CHECK(mean >= 0.5 * eps * eps);
        previous = mean;
    }
}

TEST_CASE("residual block T-depth grows linearly in C K^2", "[models][property]") {
    RandomSource rng(33);
    std::vector<double> ck2, depth, model;
    const SamplingOverhead unit = [](auto, auto, auto, auto) { return 1.0; };
    for (std::size_t C : {1u, 2u, 4u, 8u}) {
        for (std::size_t K : {1u, 3u, 5u}) {
            const auto cfg = random_block(C, K, 8, rng);
            ResourceLedger ledger;
            residual_block_forward(random_tensor(cfg.input_shape(), rng), cfg, ledger);
            ck2.push_back(static_cast<double>(C * K * K));
            depth.push_back(ledger.t_depth());
            model.push_back(qresnet_overhead_model(1, C, 8, 8, K, unit));
        }
    }
    CHECK_THAT(loglog_slope(ck2, depth), WithinAbs(1.0, 0.1));
    CHECK(r_squared_linear(model, depth) >= 0.98);
}

TEST_CASE("attention examples", "[models]") {
    RandomSource rng(34);
    ResourceLedger ledger;
    {
        auto cfg = random_attention(1, 4, 2, rng);
        const auto X = random_tensor(cfg.input_shape(), rng);
        const auto Y = mhsa_forward(X, cfg, ledger);
        const Eigen::MatrixXd want = reference::tokens(X) * cfg.WV * cfg.WO;
        for (std::size_t c = 0; c < 4; ++c) {
            CHECK_THAT(Y[c], WithinAbs(want(0, static_cast<Eigen::Index>(c)), 1e-6));
        }
    }
    {
        auto cfg = random_attention(5, 4, 1, rng);
        cfg.WQ.setZero();
        cfg.WK.setZero();
        const auto X = random_tensor(cfg.input_shape(), rng);
        const auto Y = mhsa_forward(X, cfg, ledger);
        const Eigen::MatrixXd V = reference::tokens(X) * cfg.WV;
        const Eigen::RowVectorXd want = V.colwise().mean() * cfg.WO;
        for (std::size_t i = 0; i < 5; ++i)
            for (std::size_t c = 0; c < 4; ++c)
                CHECK_THAT(Y(0, i, c), WithinAbs(want(static_cast<Eigen::Index>(c)), 1e-6));
    }
    for (int s = 0; s < 5; ++s) {
        auto cfg = random_attention(4, 2, 1, rng);
        const auto X = random_tensor(cfg.input_shape(), rng);
        const auto Y = mhsa_forward(X, cfg, ledger);
        CHECK(max_abs_diff(Y, reference::mhsa(X, 1, cfg.WQ, cfg.WK, cfg.WV, cfg.WO)) <= 1e-6);
    }
    auto bad = random_attention(4, 4, 3, rng);
    CHECK_THROWS_AS(mhsa_forward(RealTensor({1, 4, 4}), bad, ledger), Error);
}

TEST_CASE("attention matches the classical reference in exact mode", "[models][oracle]") {
    RandomSource rng(35);
    for (int s = 0; s < 20; ++s) {
        auto cfg = random_attention(4, 4, 2, rng);
        cfg.B = 2;
        const auto X = random_tensor(cfg.input_shape(), rng);
        ResourceLedger ledger;
        const auto Y = mhsa_forward(X, cfg, ledger);
        REQUIRE(max_abs_diff(Y, reference::mhsa(X, 2, cfg.WQ, cfg.WK, cfg.WV, cfg.WO)) <= 1e-5);
    }
}

TEST_CASE("attention noisy modes stay close to the reference", "[models]") {
    RandomSource rng(36);
    auto cfg = random_attention(8, 4, 2, rng);
    const auto X = random_tensor(cfg.input_shape(), rng);
    const auto R = reference::mhsa(X, 2, cfg.WQ, cfg.WK, cfg.WV, cfg.WO);
    for (auto mode : {NoiseMode::Bounded, NoiseMode::Stochastic}) {
        cfg.noise = mode;
        cfg.dtm.epsilon = 0.005;
        cfg.dtm.delta = 0.005;
        ResourceLedger ledger;
        CHECK(infidelity(mhsa_forward(X, cfg, ledger).data(), R.data()) < 0.05);
        CHECK(ledger.oracle_queries() > 0);
    }
}

TEST_CASE("attention T-depth scales as d^2 and polylog in N", "[models][property]") {
    RandomSource rng(37);
    std::vector<double> ds, dd, ns, nd;
    for (std::size_t d : {8u, 16u, 32u, 64u}) {
        auto cfg = random_attention(16, d, 2, rng);
        ResourceLedger ledger;
        mhsa_forward(random_tensor(cfg.input_shape(), rng), cfg, ledger);
        ds.push_back(static_cast<double>(d));
        dd.push_back(ledger.t_depth());
    }
    CHECK_THAT(loglog_slope(ds, dd), WithinAbs(2.0, 0.15));
    CHECK_THAT(dd[2] / dd[1], WithinAbs(4.0, 0.4));
    for (std::size_t N : {4u, 8u, 16u, 32u, 64u}) {
        auto cfg = random_attention(N, 8, 2, rng);
        ResourceLedger ledger;
        mhsa_forward(random_tensor(cfg.input_shape(), rng), cfg, ledger);
        ns.push_back(static_cast<double>(N));
        nd.push_back(ledger.t_depth());
    }
    CHECK(loglog_slope(ns, nd) <= 0.2);
}

TEST_CASE("feed-forward examples", "[models]") {
    ResourceLedger ledger;
    const Eigen::MatrixXd I = Eigen::MatrixXd::Identity(3, 3);
    const Eigen::VectorXd z = Eigen::VectorXd::Zero(3);
    const RealTensor X({1, 2, 3}, std::vector<double>{0.5, 1.0, 2.0, 0.0, 3.25, 0.125});
    CHECK(max_abs_diff(ffn_forward(X, FfnParams{I, z, I, z}, ledger), X) == 0.0);

    RandomSource rng(38);
    const auto p = random_ffn(3, 4, rng);
    const auto Z = ffn_forward(RealTensor({1, 2, 3}, 0.0), p, ledger);
    const Eigen::VectorXd want = p.b2 + p.W2.transpose() * p.b1.cwiseMax(0.0);
    for (std::size_t i = 0; i < 2; ++i)
        for (std::size_t c = 0; c < 3; ++c)
            CHECK_THAT(Z(0, i, c), WithinAbs(want(static_cast<Eigen::Index>(c)), 1e-6));

    for (int s = 0; s < 20; ++s) {
        const auto q = random_ffn(3, 4, rng);
        const auto Xs = random_tensor({2, 3}, rng);
        REQUIRE(max_abs_diff(ffn_forward(Xs, q, ledger), reference::ffn(Xs, q.W1, q.b1, q.W2, q.b2)) <= 1e-5);
    }
    CHECK_THROWS_AS(ffn_forward(X, FfnParams{I, z, Eigen::MatrixXd::Identity(4, 4), z}, ledger), Error);
}

TEST_CASE("transformer block examples", "[models]") {
    RandomSource rng(39);
    auto cfg = random_attention(4, 4, 2, rng);
    AttnConfig zero = cfg;
    zero.WQ.setZero();
    zero.WK.setZero();
    zero.WV.setZero();
    zero.WO.setZero();
    const FfnParams none{Eigen::MatrixXd::Zero(4, 8), Eigen::VectorXd::Zero(8), Eigen::MatrixXd::Zero(8, 4),
                         Eigen::VectorXd::Zero(4)};
    const auto X = random_tensor(cfg.input_shape(), rng);
    ResourceLedger ledger;
    CHECK(max_abs_diff(transformer_block_forward(X, zero, none, ledger), X) <= 1e-6);

    for (int s = 0; s < 20; ++s) {
        auto c = random_attention(4, 4, 2, rng);
        const auto f = random_ffn(4, 8, rng);
        const auto Xs = random_tensor(c.input_shape(), rng);
        ResourceLedger l;
        const auto Y = transformer_block_forward(Xs, c, f, l);
        const auto R = reference::transformer_block(Xs, 2, c.WQ, c.WK, c.WV, c.WO, f.W1, f.b1, f.W2, f.b2, 1e-5);
        REQUIRE(max_abs_diff(Y, R) <= 1e-5);
    }
}

TEST_CASE("backprop_linear examples", "[models]") {
    RandomSource rng(40);
    NoiseModel exact;
    ResourceLedger ledger;
    const Eigen::MatrixXd X = random_matrix(3, 16, rng, 1.0);
    const Eigen::MatrixXd dY = random_matrix(3, 16, rng, 1.0);
    const auto id = backprop_linear(Eigen::MatrixXd::Identity(3, 3), X, dY, 0.01, exact, ledger);
    CHECK((id.dX - dY).cwiseAbs().maxCoeff() <= 1e-6);

    const auto zero = backprop_linear(random_matrix(3, 3, rng, 1.0), X, Eigen::MatrixXd::Zero(3, 16), 0.01,
                                      exact, ledger);
    CHECK(zero.dX.cwiseAbs().maxCoeff() == 0.0);
    CHECK(zero.dW.cwiseAbs().maxCoeff() == 0.0);

    // Central differences of L(W) = 0.5 ||W X||^2 with step 1e-4.
    const Eigen::MatrixXd W = random_matrix(3, 3, rng, 1.0);
    const auto loss = [&](const Eigen::MatrixXd &M) { return 0.5 * (M * X).squaredNorm(); };
    ResourceLedger l2;
    const auto g = backprop_linear(W, X, W * X, 0.01, exact, l2);
    Eigen::MatrixXd fd(3, 3);
    for (Eigen::Index i = 0; i < 3; ++i)
        for (Eigen::Index j = 0; j < 3; ++j) {
            Eigen::MatrixXd P = W, M = W;
            P(i, j) += 1e-4;
            M(i, j) -= 1e-4;
            fd(i, j) = (loss(P) - loss(M)) / 2e-4;
        }
    CHECK((g.dW - fd).cwiseAbs().maxCoeff() / fd.cwiseAbs().maxCoeff() <= 1e-5);
    CHECK(l2.oracle_queries() == 9 * qae_queries(0.01) * 64);

    NoiseModel bounded(NoiseMode::Bounded, 3);
    ResourceLedger l3;
    const auto gb = backprop_linear(W, X, W * X, 0.05, bounded, l3);
    const Eigen::MatrixXd dYb = W * X;
    for (Eigen::Index i = 0; i < 3; ++i)
        for (Eigen::Index j = 0; j < 3; ++j)
            CHECK(std::abs(gb.dW(i, j) - (dYb.row(i) * X.row(j).transpose())(0, 0)) <=
                  0.05 * dYb.row(i).norm() * X.row(j).norm() * (1 + 1e-12));
    CHECK_THROWS_AS(backprop_linear(W, X, random_matrix(2, 16, rng, 1.0), 0.01, exact, l3), Error);
}

TEST_CASE("DCD transfer inside the residual block", "[models]") {
    RandomSource rng(41);
    auto cfg = random_block(2, 3, 4, rng);
    cfg.dtm = TransferParams{Protocol::Dcd, 32, 0.01};
    const auto X = random_tensor(cfg.input_shape(), rng);
    ResourceLedger ledger;
    const auto Y = residual_block_forward(X, cfg, ledger);
    const auto R = reference::residual_block(X, cfg.kernel, cfg.bias, cfg.gamma, cfg.beta, cfg.eps);
    CHECK(max_abs_diff(Y, R) <= 1e-5);
    CHECK(ledger.oracle_queries() > 0);
    CHECK(ledger.qram_words() == 32);
}
