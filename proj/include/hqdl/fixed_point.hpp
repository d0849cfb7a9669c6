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
 * Two's-complement fixed-point scalars: the digital encoding every
 * arithmetic-module operation acts on. Rounding is round-to-nearest,
 * ties-to-even; overflow is always reported, never wrapped or saturated.
 */

#include <cmath>
#include <compare>
#include <cstdint>
#include <string>

#include "hqdl/error.hpp"

namespace hqdl {

using int128_t = __int128;

struct FixedFormat {
    int total_bits = 32;
    int fraction_bits = 16;

    constexpr bool operator==(const FixedFormat &) const = default;

    [[nodiscard]] constexpr std::int64_t max_raw() const {
        return total_bits == 64
                   ? INT64_MAX
                   : (std::int64_t{1} << (total_bits - 1)) - 1;
    }
    [[nodiscard]] constexpr std::int64_t min_raw() const {
        return total_bits == 64 ? INT64_MIN
                                : -(std::int64_t{1} << (total_bits - 1));
    }
    /// Weight of the least significant bit, 2^-f.
    [[nodiscard]] double lsb() const { return std::ldexp(1.0, -fraction_bits); }
    [[nodiscard]] double max_value() const {
        return std::ldexp(static_cast<double>(max_raw()), -fraction_bits);
    }
    [[nodiscard]] double min_value() const {
        return std::ldexp(static_cast<double>(min_raw()), -fraction_bits);
    }
    [[nodiscard]] constexpr bool fits(int128_t raw) const {
        return raw >= min_raw() && raw <= max_raw();
    }

    void validate() const {
        require(total_bits >= 2 && total_bits <= 64, ErrorCode::InvalidArgument,
                "fixed-point total bits must lie in [2, 64], got " +
                    std::to_string(total_bits));
        require(fraction_bits >= 0 && fraction_bits < total_bits &&
                    fraction_bits <= 62,
                ErrorCode::InvalidArgument,
                "fixed-point fraction bits must lie in [0, min(b-1, 62)], got " +
                    std::to_string(fraction_bits));
    }
};

inline constexpr FixedFormat kDefaultFormat{32, 16};

/// Round v / 2^shift to the nearest integer, ties to even.
inline int128_t round_shift_even(int128_t v, int shift) {
    if (shift <= 0) {
        return v << (-shift);
    }
    int128_t q = v >> shift; // arithmetic shift floors
    const int128_t rem = v - (q << shift);
    const int128_t half = int128_t{1} << (shift - 1);
    if (rem > half || (rem == half && (q & 1) != 0)) {
        ++q;
    }
    return q;
}

class FixedPoint {
  public:
    FixedPoint() = default;

    static FixedPoint from_raw(std::int64_t raw, FixedFormat format) {
        format.validate();
        require(format.fits(raw), ErrorCode::Overflow,
                "raw value " + std::to_string(raw) + " does not fit in " +
                    std::to_string(format.total_bits) + " bits");
        return FixedPoint(raw, format);
    }

    [[nodiscard]] std::int64_t raw() const { return raw_; }
    [[nodiscard]] FixedFormat format() const { return format_; }
    [[nodiscard]] double value() const {
        return std::ldexp(static_cast<double>(raw_), -format_.fraction_bits);
    }
    [[nodiscard]] bool is_negative() const { return raw_ < 0; }

    friend bool operator==(const FixedPoint &a, const FixedPoint &b) {
        return a.raw_ == b.raw_ && a.format_ == b.format_;
    }

  private:
    FixedPoint(std::int64_t raw, FixedFormat format)
        : raw_(raw), format_(format) {}

    std::int64_t raw_ = 0;
    FixedFormat format_ = kDefaultFormat;
};

inline FixedPoint fp_encode(double x, FixedFormat format = kDefaultFormat) {
    format.validate();
    require(std::isfinite(x), ErrorCode::OutOfRange, "cannot encode non-finite value");
    const double scaled = std::nearbyint(std::ldexp(x, format.fraction_bits));
    const double bound = std::ldexp(1.0, format.total_bits - 1);
    if (scaled >= bound || scaled < -bound) {
        fail(ErrorCode::OutOfRange,
             std::to_string(x) + " outside representable range [" +
                 std::to_string(format.min_value()) + ", " +
                 std::to_string(format.max_value()) + "]");
    }
    return FixedPoint::from_raw(static_cast<std::int64_t>(scaled), format);
}

inline double fp_decode(FixedPoint x) { return x.value(); }

namespace fx {

inline void check_same_format(const FixedPoint &a, const FixedPoint &b) {
    require(a.format() == b.format(), ErrorCode::InvalidArgument,
            "fixed-point operands have different formats");
}

inline FixedPoint checked(int128_t raw, FixedFormat format, const char *op) {
    require(format.fits(raw), ErrorCode::Overflow,
            std::string("fixed-point overflow in ") + op);
    return FixedPoint::from_raw(static_cast<std::int64_t>(raw), format);
}

inline FixedPoint add(FixedPoint a, FixedPoint b) {
    check_same_format(a, b);
    return checked(int128_t{a.raw()} + b.raw(), a.format(), "add");
}

inline FixedPoint sub(FixedPoint a, FixedPoint b) {
    check_same_format(a, b);
    return checked(int128_t{a.raw()} - b.raw(), a.format(), "sub");
}

inline FixedPoint neg(FixedPoint a) {
    return checked(-int128_t{a.raw()}, a.format(), "neg");
}

/// Product rounded back to the operand format.
inline FixedPoint mul(FixedPoint a, FixedPoint b) {
    check_same_format(a, b);
    const int128_t wide = int128_t{a.raw()} * int128_t{b.raw()};
    return checked(round_shift_even(wide, a.format().fraction_bits), a.format(),
                   "mul");
}

/// Multiply by 2^k. Left shifts are exact; right shifts round to even.
inline FixedPoint shift(FixedPoint a, int k) {
    const int128_t v = k >= 0 ? (int128_t{a.raw()} << k)
                              : round_shift_even(int128_t{a.raw()}, -k);
    return checked(v, a.format(), "shift");
}

inline FixedPoint constant(double x, FixedFormat format) { return fp_encode(x, format); }

inline FixedPoint zero(FixedFormat format) { return FixedPoint::from_raw(0, format); }

inline FixedPoint max0(FixedPoint a) {
    return a.is_negative() ? zero(a.format()) : a;
}

/// Square root by the restoring digit recurrence, one result bit per stage.
/// The result is floor(sqrt(value) * 2^f) / 2^f.
inline FixedPoint sqrt_digit(FixedPoint a) {
    require(!a.is_negative(), ErrorCode::DomainError, "square root of a negative value");
    using u128 = unsigned __int128;
    u128 radicand = static_cast<u128>(a.raw()) << a.format().fraction_bits;
    u128 root = 0;
    u128 bit = u128{1} << 126;
    while (bit > radicand) {
        bit >>= 2;
    }
    while (bit != 0) {
        if (radicand >= root + bit) {
            radicand -= root + bit;
            root = (root >> 1) + bit;
        } else {
            root >>= 1;
        }
        bit >>= 2;
    }
    return checked(static_cast<int128_t>(root), a.format(), "sqrt");
}

} // namespace fx
} // namespace hqdl
