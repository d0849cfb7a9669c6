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

#include <cmath>
#include <cstdint>
#include <random>

namespace hqdl {

inline constexpr std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

/// Seeded stream. Identical seed and call sequence give bit-identical draws;
/// parallel work takes a child stream from derive() instead of sharing one.
class RandomSource {
  public:
    explicit RandomSource(std::uint64_t seed = 0) : seed_(seed), engine_(splitmix64(seed)) {}

    [[nodiscard]] std::uint64_t seed() const { return seed_; }
    [[nodiscard]] std::uint64_t position() const { return position_; }

    /// Independent child stream keyed by (seed, key); does not advance this one.
    [[nodiscard]] RandomSource derive(std::uint64_t key) const {
        return RandomSource(splitmix64(seed_ ^ splitmix64(key + 0x632be59bd9b4e019ULL)));
    }

    std::uint64_t next_u64() {
        ++position_;
        return engine_();
    }

    /// Uniform in [0, 1) with 53 random bits.
    double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    double normal() {
        // Box-Muller; u1 in (0, 1] avoids log(0).
        const double u1 = 1.0 - uniform();
        const double u2 = uniform();
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
    }

    double normal(double mean, double stddev) { return mean + stddev * normal(); }

    bool coin() { return (next_u64() >> 63) != 0; }

    std::uint64_t binomial(std::uint64_t trials, double p) {
        if (trials == 0 || p <= 0.0) {
            return 0;
        }
        if (p >= 1.0) {
            return trials;
        }
        std::binomial_distribution<std::uint64_t> dist(trials, p);
        ++position_;
        return dist(engine_);
    }

    std::mt19937_64 &engine() { return engine_; }

  private:
    std::uint64_t seed_;
    std::uint64_t position_ = 0;
    std::mt19937_64 engine_;
};

} // namespace hqdl
