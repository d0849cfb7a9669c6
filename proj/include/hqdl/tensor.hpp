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

#include <cstddef>
#include <functional>
#include <initializer_list>
#include <numeric>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "hqdl/error.hpp"
#include "hqdl/fixed_point.hpp"

namespace hqdl {

enum class Encoding { Digital, AmplitudeSource };

using Shape = std::vector<std::size_t>;

inline std::string shape_string(const Shape &shape) {
    std::string out = "(";
    for (std::size_t i = 0; i < shape.size(); ++i) {
        out += (i ? "," : "") + std::to_string(shape[i]);
    }
    return out + ")";
}

inline std::size_t shape_volume(const Shape &shape) {
    return std::accumulate(shape.begin(), shape.end(), std::size_t{1},
                           std::multiplies<>());
}

/// Dense row-major tensor. Entry count always equals the product of the
/// (strictly positive) extents.
template <typename T> class Tensor {
  public:
    using value_type = T;

    Tensor() = default;

    explicit Tensor(Shape shape, T fill = T{}, Encoding encoding = Encoding::Digital)
        : shape_(std::move(shape)), encoding_(encoding) {
        validate_shape();
        data_.assign(shape_volume(shape_), fill);
    }

    Tensor(Shape shape, std::vector<T> data, Encoding encoding = Encoding::Digital)
        : shape_(std::move(shape)), data_(std::move(data)), encoding_(encoding) {
        validate_shape();
        require(data_.size() == shape_volume(shape_), ErrorCode::ShapeMismatch,
                "entry count " + std::to_string(data_.size()) +
                    " does not match shape " + shape_string(shape_));
    }

    [[nodiscard]] const Shape &shape() const { return shape_; }
    [[nodiscard]] std::size_t rank() const { return shape_.size(); }
    [[nodiscard]] std::size_t extent(std::size_t axis) const { return shape_.at(axis); }
    [[nodiscard]] std::size_t size() const { return data_.size(); }
    [[nodiscard]] Encoding encoding() const { return encoding_; }

    [[nodiscard]] std::span<const T> data() const { return data_; }
    [[nodiscard]] std::span<T> data() { return data_; }
    [[nodiscard]] const std::vector<T> &values() const { return data_; }

    T &operator[](std::size_t i) { return data_[i]; }
    const T &operator[](std::size_t i) const { return data_[i]; }

    template <typename... Idx> [[nodiscard]] std::size_t offset(Idx... idx) const {
        static_assert(sizeof...(Idx) > 0);
        const std::size_t index[] = {static_cast<std::size_t>(idx)...};
        require(sizeof...(Idx) == shape_.size(), ErrorCode::ShapeMismatch,
                "index rank does not match tensor rank");
        std::size_t flat = 0;
        for (std::size_t a = 0; a < shape_.size(); ++a) {
            flat = flat * shape_[a] + index[a];
        }
        return flat;
    }

    template <typename... Idx> T &operator()(Idx... idx) { return data_[offset(idx...)]; }
    template <typename... Idx> const T &operator()(Idx... idx) const {
        return data_[offset(idx...)];
    }

    [[nodiscard]] Tensor reshaped(Shape shape) const {
        return Tensor(std::move(shape), data_, encoding_);
    }

  private:
    void validate_shape() const {
        require(!shape_.empty(), ErrorCode::ShapeMismatch, "tensor shape must be non-empty");
        for (auto e : shape_) {
            require(e > 0, ErrorCode::ShapeMismatch,
                    "tensor extents must be strictly positive, got " + shape_string(shape_));
        }
    }

    Shape shape_;
    std::vector<T> data_;
    Encoding encoding_ = Encoding::Digital;
};

using RealTensor = Tensor<double>;
using FixedTensor = Tensor<FixedPoint>;

inline void require_same_shape(const Shape &a, const Shape &b, const char *what) {
    require(a == b, ErrorCode::ShapeMismatch,
            std::string(what) + ": shapes " + shape_string(a) + " and " + shape_string(b) +
                " differ");
}

inline FixedTensor encode(const RealTensor &t, FixedFormat format) {
    std::vector<FixedPoint> out;
    out.reserve(t.size());
    for (double v : t.data()) {
        out.push_back(fp_encode(v, format));
    }
    return {t.shape(), std::move(out), t.encoding()};
}

inline RealTensor decode(const FixedTensor &t) {
    std::vector<double> out;
    out.reserve(t.size());
    for (const auto &v : t.data()) {
        out.push_back(v.value());
    }
    return {t.shape(), std::move(out), t.encoding()};
}

/// Format shared by all entries; throws on a mixed tensor.
inline FixedFormat format_of(const FixedTensor &t) {
    const FixedFormat f = t[0].format();
    for (const auto &v : t.data()) {
        require(v.format() == f, ErrorCode::InvalidArgument, "tensor mixes fixed-point formats");
    }
    return f;
}

} // namespace hqdl
