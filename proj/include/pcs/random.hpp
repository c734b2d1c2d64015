/*
   Copyright 2026 The pcs Authors

   Licensed under the Apache License, Version 2.0 (the "License");
   you may not use this file except in compliance with the License.
   You may obtain a copy of the License at

       http://www.apache.org/licenses/LICENSE-2.0

   Unless required by applicable law or agreed to in writing, software
   distributed under the License is distributed on an "AS IS" BASIS,
   WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
   See the License for the specific language governing permissions and
   limitations under the License.
*/

// Counter-based random numbers (Philox4x32-10) with a fixed stream discipline.
//
// Every random quantity in the library is addressed by (seed, stream, draw):
// the seed is the Philox key, the stream id occupies the upper two counter
// words, and the draw index the lower two. A matrix row, a detector count or
// a Monte-Carlo sample each get their own stream, so results never depend on
// generation order or thread count.

#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numbers>

namespace pcs {

class Philox4x32 {
public:
    using Counter = std::array<std::uint32_t, 4>;
    using Key = std::array<std::uint32_t, 2>;

    static constexpr int kRounds = 10;

    static constexpr Counter block(Counter ctr, Key key) noexcept
    {
        ctr = round(ctr, key);
        for (int r = 1; r < kRounds; ++r) {
            key[0] += kWeyl0;
            key[1] += kWeyl1;
            ctr = round(ctr, key);
        }
        return ctr;
    }

private:
    static constexpr std::uint32_t kMul0 = 0xD2511F53u;
    static constexpr std::uint32_t kMul1 = 0xCD9E8D57u;
    static constexpr std::uint32_t kWeyl0 = 0x9E3779B9u;
    static constexpr std::uint32_t kWeyl1 = 0xBB67AE85u;

    static constexpr Counter round(const Counter& c, const Key& k) noexcept
    {
        const std::uint64_t p0 = static_cast<std::uint64_t>(kMul0) * c[0];
        const std::uint64_t p1 = static_cast<std::uint64_t>(kMul1) * c[2];
        const auto hi0 = static_cast<std::uint32_t>(p0 >> 32);
        const auto lo0 = static_cast<std::uint32_t>(p0);
        const auto hi1 = static_cast<std::uint32_t>(p1 >> 32);
        const auto lo1 = static_cast<std::uint32_t>(p1);
        return {hi1 ^ c[1] ^ k[0], lo1, hi0 ^ c[3] ^ k[1], lo0};
    }
};

/// SplitMix64 finalizer. Bijective on 64-bit words.
constexpr std::uint64_t mix64(std::uint64_t z) noexcept
{
    z += 0x9E3779B97F4A7C15ull;
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
    return z ^ (z >> 31);
}

/// Child seed for replicate/task `index`: base XOR mix64(index). Distinct
/// indices always give distinct seeds because mix64 is a bijection.
constexpr std::uint64_t derive_seed(std::uint64_t base, std::uint64_t index) noexcept
{
    return base ^ mix64(index);
}

namespace detail {

/// 64x64 -> 128-bit product; returns the low word and stores the high word.
constexpr std::uint64_t mul_wide(std::uint64_t a, std::uint64_t b, std::uint64_t& hi) noexcept
{
    const std::uint64_t a0 = a & 0xffffffffu, a1 = a >> 32, b0 = b & 0xffffffffu, b1 = b >> 32;
    const std::uint64_t p00 = a0 * b0, p01 = a0 * b1, p10 = a1 * b0, p11 = a1 * b1;
    const std::uint64_t mid = (p00 >> 32) + (p01 & 0xffffffffu) + (p10 & 0xffffffffu);
    hi = p11 + (p01 >> 32) + (p10 >> 32) + (mid >> 32);
    return (mid << 32) | (p00 & 0xffffffffu);
}

} // namespace detail

/// One substream of the counter-based generator. Satisfies
/// UniformRandomBitGenerator, but the library never hands it to <random>
/// distributions since those are not portable across standard libraries.
class RandomStream {
public:
    using result_type = std::uint64_t;

    constexpr RandomStream(std::uint64_t seed, std::uint64_t stream) noexcept
        : key_{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32)}
        , stream_(stream)
    {}

    static constexpr result_type min() noexcept { return 0; }
    static constexpr result_type max() noexcept { return std::numeric_limits<result_type>::max(); }

    constexpr result_type operator()() noexcept
    {
        if (have_ == 0) refill();
        --have_;
        return buffer_[1 - have_];
    }

    /// Uniform on [0, 1) with 53 random bits.
    double uniform() noexcept { return static_cast<double>((*this)() >> 11) * 0x1.0p-53; }

    /// Uniform on (0, 1]; safe as a log argument.
    double uniform_open0() noexcept { return (static_cast<double>((*this)() >> 11) + 1.0) * 0x1.0p-53; }

    /// Unbiased integer in [0, bound) (Lemire's multiply-and-reject).
    std::uint64_t below(std::uint64_t bound) noexcept
    {
        std::uint64_t hi = 0;
        std::uint64_t low = detail::mul_wide((*this)(), bound, hi);
        if (low < bound) {
            const std::uint64_t threshold = (0 - bound) % bound;
            while (low < threshold) low = detail::mul_wide((*this)(), bound, hi);
        }
        return hi;
    }

    /// Standard normal via Box-Muller; consumes exactly two words per call.
    double normal() noexcept
    {
        const double r = std::sqrt(-2.0 * std::log(uniform_open0()));
        return r * std::cos(2.0 * std::numbers::pi * uniform());
    }

    /// Philox blocks consumed so far (two 64-bit words per block).
    constexpr std::uint64_t blocks() const noexcept { return counter_; }

private:
    constexpr void refill() noexcept
    {
        const Philox4x32::Counter ctr{static_cast<std::uint32_t>(counter_),
                                      static_cast<std::uint32_t>(counter_ >> 32),
                                      static_cast<std::uint32_t>(stream_),
                                      static_cast<std::uint32_t>(stream_ >> 32)};
        const auto out = Philox4x32::block(ctr, key_);
        buffer_[0] = (static_cast<std::uint64_t>(out[1]) << 32) | out[0];
        buffer_[1] = (static_cast<std::uint64_t>(out[3]) << 32) | out[2];
        ++counter_;
        have_ = 2;
    }

    Philox4x32::Key key_;
    std::uint64_t stream_;
    std::uint64_t counter_ = 0;
    std::array<std::uint64_t, 2> buffer_{};
    int have_ = 0;
};

/// Stream ids used across the library. Keeping them in one place makes the
/// substream layout auditable.
namespace streams {
inline constexpr std::uint64_t kMatrixRowBase = 0;             // + row index
inline constexpr std::uint64_t kPoissonBase = 1ull << 40;      // + detector index
inline constexpr std::uint64_t kValidation = 1ull << 41;       // + trial index
inline constexpr std::uint64_t kSignal = 1ull << 42;
inline constexpr std::uint64_t kMonteCarlo = 1ull << 43;       // + sample index
} // namespace streams

} // namespace pcs
