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

#include <gtest/gtest.h>

#include <cmath>
#include <set>
#include <vector>

#include "pcs/random.hpp"

namespace {

using pcs::Philox4x32;
using pcs::RandomStream;

// Published known-answer vectors for Philox4x32 with 10 rounds.
TEST(Philox, KnownAnswerZero)
{
    const auto out = Philox4x32::block({0, 0, 0, 0}, {0, 0});
    EXPECT_EQ(out, (Philox4x32::Counter{0x6627e8d5u, 0xe169c58du, 0xbc57ac4cu, 0x9b00dbd8u}));
}

TEST(Philox, KnownAnswerAllOnes)
{
    const auto out = Philox4x32::block({0xffffffffu, 0xffffffffu, 0xffffffffu, 0xffffffffu}, {0xffffffffu, 0xffffffffu});
    EXPECT_EQ(out, (Philox4x32::Counter{0x408f276du, 0x41c83b0eu, 0xa20bc7c6u, 0x6d5451fdu}));
}

TEST(Philox, KnownAnswerPiDigits)
{
    const auto out = Philox4x32::block({0x243f6a88u, 0x85a308d3u, 0x13198a2eu, 0x03707344u}, {0xa4093822u, 0x299f31d0u});
    EXPECT_EQ(out, (Philox4x32::Counter{0xd16cfe09u, 0x94fdccebu, 0x5001e420u, 0x24126ea1u}));
}

TEST(Philox, IsConstexpr)
{
    constexpr auto out = Philox4x32::block({0, 0, 0, 0}, {0, 0});
    static_assert(out[0] == 0x6627e8d5u);
}

TEST(RandomStream, WordLayoutMatchesBlocks)
{
    const std::uint64_t seed = 0x0123456789abcdefull, stream = 77;
    RandomStream rng(seed, stream);
    for (std::uint64_t c = 0; c < 4; ++c) {
        const Philox4x32::Counter ctr{static_cast<std::uint32_t>(c), static_cast<std::uint32_t>(c >> 32),
                                      static_cast<std::uint32_t>(stream), static_cast<std::uint32_t>(stream >> 32)};
        const auto b = Philox4x32::block(ctr, {static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32)});
        EXPECT_EQ(rng(), (std::uint64_t{b[1]} << 32) | b[0]);
        EXPECT_EQ(rng(), (std::uint64_t{b[3]} << 32) | b[2]);
    }
    EXPECT_EQ(rng.blocks(), 4u);
}

TEST(RandomStream, StreamsAndSeedsDiffer)
{
    RandomStream a(1, 0), b(1, 1), c(2, 0);
    const auto x = a(), y = b(), z = c();
    EXPECT_NE(x, y);
    EXPECT_NE(x, z);
    RandomStream a2(1, 0);
    EXPECT_EQ(a2(), x);
}

TEST(RandomStream, UniformRanges)
{
    RandomStream rng(5, 5);
    for (int i = 0; i < 100000; ++i) {
        const double u = rng.uniform();
        ASSERT_GE(u, 0.0);
        ASSERT_LT(u, 1.0);
        const double v = rng.uniform_open0();
        ASSERT_GT(v, 0.0);
        ASSERT_LE(v, 1.0);
    }
}

TEST(RandomStream, UniformMoments)
{
    RandomStream rng(11, 3);
    const int n = 200000;
    double s = 0.0, s2 = 0.0;
    for (int i = 0; i < n; ++i) {
        const double u = rng.uniform();
        s += u;
        s2 += u * u;
    }
    const double mean = s / n, var = s2 / n - mean * mean;
    EXPECT_NEAR(mean, 0.5, 5.0 * std::sqrt(1.0 / 12.0 / n));
    EXPECT_NEAR(var, 1.0 / 12.0, 2e-3);
}

TEST(RandomStream, WideMultiplyMatchesSplitOracle)
{
    // Schoolbook product on 16-bit limbs.
    const auto oracle = [](std::uint64_t a, std::uint64_t b, std::uint64_t& hi) {
        std::uint32_t limbs[8] = {};
        for (int i = 0; i < 4; ++i) {
            std::uint64_t carry = 0;
            for (int j = 0; j < 4; ++j) {
                const std::uint64_t ai = (a >> (16 * i)) & 0xffff, bj = (b >> (16 * j)) & 0xffff;
                const std::uint64_t t = limbs[i + j] + ai * bj + carry;
                limbs[i + j] = static_cast<std::uint32_t>(t & 0xffff);
                carry = t >> 16;
            }
            for (int k = i + 4; carry && k < 8; ++k) {
                const std::uint64_t t = limbs[k] + carry;
                limbs[k] = static_cast<std::uint32_t>(t & 0xffff);
                carry = t >> 16;
            }
        }
        std::uint64_t lo = 0;
        hi = 0;
        for (int k = 3; k >= 0; --k) lo = (lo << 16) | limbs[k];
        for (int k = 7; k >= 4; --k) hi = (hi << 16) | limbs[k];
        return lo;
    };
    RandomStream rng(3, 9);
    const std::uint64_t edge[] = {0, 1, 0xffffffffull, 0x100000000ull, ~0ull, ~0ull - 1};
    for (auto a : edge)
        for (auto b : edge) {
            std::uint64_t h1 = 0, h2 = 0;
            EXPECT_EQ(pcs::detail::mul_wide(a, b, h1), oracle(a, b, h2));
            EXPECT_EQ(h1, h2);
        }
    for (int t = 0; t < 10000; ++t) {
        const auto a = rng(), b = rng();
        std::uint64_t h1 = 0, h2 = 0;
        ASSERT_EQ(pcs::detail::mul_wide(a, b, h1), oracle(a, b, h2));
        ASSERT_EQ(h1, h2);
    }
}

TEST(RandomStream, BelowIsInRangeAndRoughlyUniform)
{
    RandomStream rng(17, 0);
    std::vector<int> hist(7, 0);
    const int n = 70000;
    for (int i = 0; i < n; ++i) {
        const auto v = rng.below(7);
        ASSERT_LT(v, 7u);
        ++hist[v];
    }
    // Chi-square with 6 dof; 0.999 quantile is about 22.5.
    double chi = 0.0;
    for (int h : hist) chi += (h - n / 7.0) * (h - n / 7.0) / (n / 7.0);
    EXPECT_LT(chi, 22.5);
    EXPECT_EQ(rng.below(1), 0u);
}

TEST(RandomStream, NormalMoments)
{
    RandomStream rng(23, 4);
    const int n = 200000;
    double s = 0.0, s2 = 0.0;
    for (int i = 0; i < n; ++i) {
        const double z = rng.normal();
        s += z;
        s2 += z * z;
    }
    EXPECT_NEAR(s / n, 0.0, 5.0 / std::sqrt(n));
    EXPECT_NEAR(s2 / n, 1.0, 5.0 * std::sqrt(2.0 / n));
}

TEST(DeriveSeed, DistinctAndReproducible)
{
    std::set<std::uint64_t> seen;
    for (std::uint64_t r = 0; r < 1000; ++r) seen.insert(pcs::derive_seed(7, r));
    EXPECT_EQ(seen.size(), 1000u);
    EXPECT_EQ(pcs::derive_seed(7, 3), 7ull ^ pcs::mix64(3));
}

TEST(Mix64, KnownValue)
{
    // SplitMix64 output for state 0 (first draw of the reference generator).
    EXPECT_EQ(pcs::mix64(0), 0xe220a8397b1dcdafull);
}

} // namespace
