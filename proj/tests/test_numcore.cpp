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
#include <set>

#include <catch_amalgamated.hpp>

#include "hqdl/fixed_point.hpp"
#include "hqdl/random.hpp"
#include "hqdl/tensor.hpp"

using namespace hqdl;
using Catch::Matchers::WithinAbs;

TEST_CASE("fp_encode examples", "[numcore]") {
    const FixedFormat f{16, 8};
    CHECK(fp_encode(0.0, f).raw() == 0);
    CHECK(fp_encode(1.0, f).raw() == 256);
    const auto x = fp_encode(0.3, f);
    CHECK(x.raw() == 77);
    CHECK(fp_decode(x) == 0.30078125);
}

TEST_CASE("fp_decode examples", "[numcore]") {
    const FixedFormat f{16, 8};
    CHECK(fp_decode(FixedPoint::from_raw(0, f)) == 0.0);
    CHECK(fp_decode(FixedPoint::from_raw(256, f)) == 1.0);
    CHECK(fp_decode(FixedPoint::from_raw(-128, f)) == -0.5);
}

TEST_CASE("rounding is ties-to-even", "[numcore]") {
    const FixedFormat f{16, 0};
    CHECK(fp_encode(0.5, f).raw() == 0);
    CHECK(fp_encode(1.5, f).raw() == 2);
    CHECK(fp_encode(2.5, f).raw() == 2);
    CHECK(fp_encode(-0.5, f).raw() == 0);
    CHECK(fp_encode(-1.5, f).raw() == -2);
    CHECK(round_shift_even(3, 1) == 2);  // 1.5 -> 2
    CHECK(round_shift_even(5, 1) == 2);  // 2.5 -> 2
    CHECK(round_shift_even(-3, 1) == -2);
    CHECK(round_shift_even(7, 2) == 2);  // 1.75 -> 2
}

TEST_CASE("range and overflow are reported", "[numcore]") {
    const FixedFormat f{8, 4}; // [-8, 8 - 1/16]
    CHECK(f.max_value() == 7.9375);
    CHECK(f.min_value() == -8.0);
    CHECK_NOTHROW(fp_encode(7.9375, f));
    CHECK_NOTHROW(fp_encode(-8.0, f));
    auto code_of = [](auto &&fn) {
        try {
            fn();
        } catch (const Error &e) {
            return e.code();
        }
        return ErrorCode::InvalidArgument;
    };
    CHECK(code_of([&] { fp_encode(8.0, f); }) == ErrorCode::OutOfRange);
    CHECK(code_of([&] { fp_encode(-8.1, f); }) == ErrorCode::OutOfRange);
    CHECK(code_of([&] { fp_encode(NAN, f); }) == ErrorCode::OutOfRange);
    CHECK(code_of([&] { fx::add(fp_encode(7.0, f), fp_encode(1.0, f)); }) == ErrorCode::Overflow);
    CHECK(code_of([&] { fx::mul(fp_encode(4.0, f), fp_encode(2.0, f)); }) == ErrorCode::Overflow);
    CHECK(code_of([&] { FixedPoint::from_raw(128, f); }) == ErrorCode::Overflow);
    CHECK(code_of([&] { fp_encode(1.0, FixedFormat{65, 4}); }) == ErrorCode::InvalidArgument);
}

TEST_CASE("encode/decode round trip is exhaustive for small widths", "[numcore][property]") {
    for (int b = 2; b <= 12; ++b) {
        for (int f = 0; f < b; ++f) {
            const FixedFormat fmt{b, f};
            for (std::int64_t raw = fmt.min_raw(); raw <= fmt.max_raw(); ++raw) {
                const auto x = FixedPoint::from_raw(raw, fmt);
                REQUIRE(fp_encode(fp_decode(x), fmt) == x);
            }
        }
    }
}

TEST_CASE("rounding error bound holds on random reals", "[numcore][property]") {
    RandomSource rng(42);
    for (const FixedFormat fmt : {FixedFormat{16, 8}, FixedFormat{32, 16}, FixedFormat{48, 24},
                                  FixedFormat{64, 40}, FixedFormat{12, 11}}) {
        const double bound = std::ldexp(1.0, -fmt.fraction_bits - 1);
        const double lo = fmt.min_value(), hi = fmt.max_value();
        double worst = 0.0;
        for (int i = 0; i < 100000; ++i) {
            const double x = rng.uniform(lo, hi);
            worst = std::max(worst, std::abs(fp_decode(fp_encode(x, fmt)) - x));
        }
        CHECK(worst <= bound);
    }
}

TEST_CASE("fixed-point arithmetic", "[numcore]") {
    const FixedFormat f{32, 16};
    const auto a = fp_encode(1.25, f), b = fp_encode(-0.5, f);
    CHECK(fx::add(a, b).value() == 0.75);
    CHECK(fx::sub(a, b).value() == 1.75);
    CHECK(fx::mul(a, b).value() == -0.625);
    CHECK(fx::shift(a, 2).value() == 5.0);
    CHECK(fx::shift(a, -1).value() == 0.625);
    CHECK(fx::max0(b).value() == 0.0);
    CHECK(fx::sqrt_digit(fp_encode(2.25, f)).value() == 1.5);
    CHECK_THAT(fx::sqrt_digit(fp_encode(2.0, f)).value(), WithinAbs(std::sqrt(2.0), f.lsb()));
    // Products of full 64-bit words go through 128-bit intermediates.
    const FixedFormat w{64, 60};
    CHECK_THAT(fx::mul(fp_encode(1.5, w), fp_encode(-1.25, w)).value(), WithinAbs(-1.875, 1e-15));
}

TEST_CASE("tensor shape invariants", "[numcore]") {
    RealTensor t({2, 3}, 1.0);
    CHECK(t.size() == 6);
    t(1, 2) = 5.0;
    CHECK(t[5] == 5.0);
    CHECK_THROWS_AS(RealTensor(Shape{2, 0}), Error);
    CHECK_THROWS_AS(RealTensor(Shape{2, 2}, std::vector<double>(3)), Error);
    const auto enc = encode(t, FixedFormat{16, 8});
    CHECK(decode(enc)(1, 2) == 5.0);
}

TEST_CASE("random source is reproducible and derives independent streams", "[numcore]") {
    RandomSource a(7), b(7);
    for (int i = 0; i < 100; ++i) {
        REQUIRE(a.next_u64() == b.next_u64());
    }
    CHECK(a.position() == 100);
    RandomSource c(7);
    auto c1 = c.derive(1), c2 = c.derive(2), c1b = c.derive(1);
    CHECK(c.position() == 0);
    const auto x1 = c1.next_u64();
    CHECK(x1 == c1b.next_u64());
    CHECK(x1 != c2.next_u64());
    std::set<std::uint64_t> seen;
    RandomSource u(9);
    double mean = 0.0;
    for (int i = 0; i < 20000; ++i) {
        const double v = u.uniform();
        REQUIRE(v >= 0.0);
        REQUIRE(v < 1.0);
        mean += v;
    }
    CHECK_THAT(mean / 20000, WithinAbs(0.5, 0.01));
}
