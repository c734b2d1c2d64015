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

#include <algorithm>
#include <cmath>
#include <set>
#include <sstream>
#include <vector>

#include "pcs/sensing.hpp"

namespace {

using pcs::RowScheme;
using pcs::SensingMatrix;
__extension__ typedef unsigned __int128 u128;

// Reference Philox4x32-10, written out independently of the library.
struct RefPhilox {
    static void block(std::uint32_t ctr[4], std::uint32_t k0, std::uint32_t k1)
    {
        for (int r = 0; r < 10; ++r) {
            if (r > 0) {
                k0 += 0x9E3779B9u;
                k1 += 0xBB67AE85u;
            }
            const std::uint64_t p0 = 0xD2511F53ull * ctr[0];
            const std::uint64_t p1 = 0xCD9E8D57ull * ctr[2];
            const std::uint32_t n0 = static_cast<std::uint32_t>(p1 >> 32) ^ ctr[1] ^ k0;
            const std::uint32_t n1 = static_cast<std::uint32_t>(p1);
            const std::uint32_t n2 = static_cast<std::uint32_t>(p0 >> 32) ^ ctr[3] ^ k1;
            const std::uint32_t n3 = static_cast<std::uint32_t>(p0);
            ctr[0] = n0;
            ctr[1] = n1;
            ctr[2] = n2;
            ctr[3] = n3;
        }
    }
    // The d-th 64-bit word of (seed, stream).
    static std::uint64_t word(std::uint64_t seed, std::uint64_t stream, std::uint64_t d)
    {
        const std::uint64_t c = d / 2;
        std::uint32_t ctr[4] = {static_cast<std::uint32_t>(c), static_cast<std::uint32_t>(c >> 32),
                                static_cast<std::uint32_t>(stream), static_cast<std::uint32_t>(stream >> 32)};
        block(ctr, static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32));
        return d % 2 == 0 ? (std::uint64_t{ctr[1]} << 32 | ctr[0]) : (std::uint64_t{ctr[3]} << 32 | ctr[2]);
    }
};

std::vector<std::vector<double>> dense(const SensingMatrix& a)
{
    std::vector<std::vector<double>> d(a.n_rows(), std::vector<double>(a.n_cols(), 0.0));
    for (std::size_t i = 0; i < a.n_rows(); ++i)
        for (auto j : a.row(i)) d[i][j] = a.entry_value();
    return d;
}

std::vector<double> random_vector(std::size_t n, std::uint64_t seed, double lo = 0.0, double hi = 1.0)
{
    pcs::RandomStream rng(seed, 999);
    std::vector<double> v(n);
    for (auto& x : v) x = lo + (hi - lo) * rng.uniform();
    return v;
}

TEST(BuildMatrix, DefaultFixedRowWeight)
{
    const auto a = pcs::build_matrix(512, 1024, 0.5, RowScheme::fixed(32), 1);
    EXPECT_EQ(a.n_rows(), 512u);
    EXPECT_EQ(a.n_cols(), 1024u);
    EXPECT_DOUBLE_EQ(a.entry_value(), 1.0 / 512.0);
    EXPECT_DOUBLE_EQ(a.p(), 1.0 - 32.0 / 1024.0);
    for (std::size_t i = 0; i < a.n_rows(); ++i) {
        const auto r = a.row(i);
        ASSERT_EQ(r.size(), 32u);
        ASSERT_TRUE(std::is_sorted(r.begin(), r.end()));
        ASSERT_EQ(std::set<std::uint32_t>(r.begin(), r.end()).size(), 32u);
    }
}

TEST(BuildMatrix, OneByOneIid)
{
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
        const auto a = pcs::build_matrix(1, 1, 0.5, RowScheme::iid(), seed);
        EXPECT_LE(a.nnz(), 1u);
        EXPECT_DOUBLE_EQ(a.entry_value(), 1.0);
    }
}

TEST(BuildMatrix, IidMatchesReferenceStream)
{
    const auto a = pcs::build_matrix(4, 8, 0.5, RowScheme::iid(), 42);
    for (std::size_t i = 0; i < 4; ++i) {
        std::vector<std::uint32_t> expect;
        for (std::uint64_t j = 0; j < 8; ++j) {
            const double u = static_cast<double>(RefPhilox::word(42, i, j) >> 11) * 0x1.0p-53;
            if (u < 0.5) expect.push_back(static_cast<std::uint32_t>(j));
        }
        const auto r = a.row(i);
        EXPECT_EQ(std::vector<std::uint32_t>(r.begin(), r.end()), expect) << "row " << i;
    }
}

TEST(BuildMatrix, FixedWeightMatchesReferenceFloyd)
{
    const std::size_t n = 6, m = 20, w = 5;
    const std::uint64_t seed = 9;
    const auto a = pcs::build_matrix(n, m, 0.5, RowScheme::fixed(w), seed);
    for (std::size_t i = 0; i < n; ++i) {
        std::uint64_t d = 0;
        // Lemire bounded draw on the reference words.
        const auto below = [&](std::uint64_t bound) {
            for (;;) {
                const std::uint64_t x = RefPhilox::word(seed, i, d++);
                const u128 prod = static_cast<u128>(x) * bound;
                const auto low = static_cast<std::uint64_t>(prod);
                if (low >= bound || low >= (0 - bound) % bound) return static_cast<std::uint64_t>(prod >> 64);
            }
        };
        std::set<std::uint32_t> chosen;
        for (std::size_t j = m - w; j < m; ++j) {
            const auto t = static_cast<std::uint32_t>(below(j + 1));
            chosen.insert(chosen.count(t) ? static_cast<std::uint32_t>(j) : t);
        }
        const auto r = a.row(i);
        EXPECT_EQ(std::vector<std::uint32_t>(r.begin(), r.end()), std::vector<std::uint32_t>(chosen.begin(), chosen.end()));
    }
}

TEST(BuildMatrix, Deterministic)
{
    const auto a = pcs::build_matrix(64, 128, 0.3, RowScheme::iid(), 5);
    const auto b = pcs::build_matrix(64, 128, 0.3, RowScheme::iid(), 5);
    EXPECT_EQ(pcs::to_text(a), pcs::to_text(b));
    EXPECT_NE(pcs::to_text(a), pcs::to_text(pcs::build_matrix(64, 128, 0.3, RowScheme::iid(), 6)));
}

TEST(BuildMatrix, RejectsBadArguments)
{
    EXPECT_THROW(pcs::build_matrix(4, 4, 0.0, RowScheme::iid(), 1), pcs::ValidationError);
    EXPECT_THROW(pcs::build_matrix(4, 4, 1.0, RowScheme::iid(), 1), pcs::ValidationError);
    EXPECT_THROW(pcs::build_matrix(4, 4, 0.5, RowScheme::fixed(0), 1), pcs::ValidationError);
    EXPECT_THROW(pcs::build_matrix(4, 4, 0.5, RowScheme::fixed(5), 1), pcs::ValidationError);
    EXPECT_THROW(pcs::build_matrix(0, 4, 0.5, RowScheme::iid(), 1), pcs::ValidationError);
}

TEST(SensingMatrix, RejectsMalformedPatterns)
{
    EXPECT_THROW(pcs::matrix_from_rows(4, {{1, 0}}), pcs::ValidationError);
    EXPECT_THROW(pcs::matrix_from_rows(4, {{1, 1}}), pcs::ValidationError);
    EXPECT_THROW(pcs::matrix_from_rows(4, {{4}}), pcs::ValidationError);
    EXPECT_THROW(pcs::matrix_from_rows(4, {{0, 1}, {2}}, 0.5, 0, RowScheme::fixed(2)), pcs::ValidationError);
}

TEST(Apply, AllOnesTwoByTwo)
{
    const auto a = pcs::matrix_from_rows(2, {{0, 1}, {0, 1}});
    EXPECT_EQ(pcs::apply(a, std::vector<double>{3, 5}), (std::vector<double>{4, 4}));
    EXPECT_EQ(pcs::apply_adjoint(a, std::vector<double>{1, 1}), (std::vector<double>{1, 1}));
}

TEST(Apply, ZeroInputs)
{
    const auto a = pcs::build_matrix(8, 16, 0.5, RowScheme::iid(), 3);
    for (double x : pcs::apply(a, std::vector<double>(16, 0.0))) EXPECT_EQ(x, 0.0);
    for (double x : pcs::apply_adjoint(a, std::vector<double>(8, 0.0))) EXPECT_EQ(x, 0.0);
}

TEST(Apply, MatchesDenseOracle)
{
    const auto a = pcs::build_matrix(16, 64, 0.5, RowScheme::iid(), 11);
    const auto d = dense(a);
    const auto f = random_vector(64, 1);
    const auto v = random_vector(16, 2, -1.0, 1.0);
    const auto af = pcs::apply(a, f);
    const auto atv = pcs::apply_adjoint(a, v);
    for (std::size_t i = 0; i < 16; ++i) {
        double s = 0.0;
        for (std::size_t j = 0; j < 64; ++j) s += d[i][j] * f[j];
        EXPECT_NEAR(af[i], s, 1e-14);
    }
    for (std::size_t j = 0; j < 64; ++j) {
        double s = 0.0;
        for (std::size_t i = 0; i < 16; ++i) s += d[i][j] * v[i];
        EXPECT_NEAR(atv[j], s, 1e-14);
    }
}

TEST(Apply, AdjointIdentity)
{
    const auto a = pcs::build_matrix(37, 90, 0.6, RowScheme::iid(), 4);
    for (std::uint64_t t = 0; t < 20; ++t) {
        const auto f = random_vector(90, 100 + t, -1.0, 1.0);
        const auto v = random_vector(37, 200 + t, -1.0, 1.0);
        const auto af = pcs::apply(a, f);
        const auto atv = pcs::apply_adjoint(a, v);
        double lhs = 0.0, rhs = 0.0, nf = 0.0, nv = 0.0;
        for (std::size_t i = 0; i < 37; ++i) lhs += af[i] * v[i], nv += v[i] * v[i];
        for (std::size_t j = 0; j < 90; ++j) rhs += f[j] * atv[j], nf += f[j] * f[j];
        EXPECT_LE(std::abs(lhs - rhs), 1e-12 * std::sqrt(nf * nv));
    }
}

TEST(Apply, LengthMismatchThrows)
{
    const auto a = pcs::build_matrix(4, 8, 0.5, RowScheme::iid(), 1);
    EXPECT_THROW(pcs::apply(a, std::vector<double>(7, 1.0)), pcs::ValidationError);
    EXPECT_THROW(pcs::apply_adjoint(a, std::vector<double>(5, 1.0)), pcs::ValidationError);
}

TEST(Validate, AllOnesPatternHasUnitFlux)
{
    const auto a = pcs::matrix_from_rows(3, {{0, 1, 2}, {0, 1, 2}});
    const auto rep = pcs::validate(a, 50, 1);
    EXPECT_NEAR(rep.max_flux_ratio, 1.0, 1e-14);
    EXPECT_TRUE(rep.ok());
}

TEST(Validate, IndicatorFluxEqualsColumnShare)
{
    const auto a = pcs::build_matrix(16, 32, 0.5, RowScheme::iid(), 8);
    const auto counts = a.column_counts();
    for (std::size_t j = 0; j < 32; ++j) {
        std::vector<double> e(32, 0.0);
        e[j] = 1.0;
        const auto af = pcs::apply(a, e);
        double s = 0.0;
        for (double x : af) s += x;
        EXPECT_NEAR(s, static_cast<double>(counts[j]) / 16.0, 1e-15);
        EXPECT_LE(s, 1.0);
    }
}

TEST(Validate, DefaultMatrix)
{
    const auto a = pcs::build_matrix(512, 1024, 0.5, RowScheme::fixed(32), 1);
    const auto rep = pcs::validate(a, 100, 3);
    EXPECT_TRUE(rep.rows_nonempty);
    EXPECT_LE(rep.max_flux_ratio, 1.0 + pcs::kValidationSlack);
    EXPECT_TRUE(rep.min_measurement_ok);
    EXPECT_TRUE(rep.ok());
}

TEST(Validate, FlagsEmptyRows)
{
    const auto a = pcs::matrix_from_rows(4, {{0}, {}, {3}});
    const auto rep = pcs::validate(a, 10, 1);
    EXPECT_EQ(rep.empty_rows, 1u);
    EXPECT_FALSE(rep.rows_nonempty);
    EXPECT_FALSE(rep.min_measurement_ok);
    EXPECT_FALSE(rep.ok());
}

TEST(ImpliedEntry, AffineMapValues)
{
    EXPECT_DOUBLE_EQ(SensingMatrix::implied_entry(true, 0.5), 1.0);
    EXPECT_DOUBLE_EQ(SensingMatrix::implied_entry(false, 0.5), -1.0);
    // E Z = 0 and E Z² = 1 under P(nonzero) = 1 − p.
    for (double p : {0.1, 0.3, 0.75}) {
        const double hi = SensingMatrix::implied_entry(true, p), lo = SensingMatrix::implied_entry(false, p);
        EXPECT_NEAR((1 - p) * hi + p * lo, 0.0, 1e-15);
        EXPECT_NEAR((1 - p) * hi * hi + p * lo * lo, 1.0, 1e-14);
    }
}

TEST(MatrixFile, RoundTrip)
{
    for (const auto& a : {pcs::build_matrix(20, 40, 0.7, RowScheme::iid(), 2),
                          pcs::build_matrix(8, 16, 0.5, RowScheme::fixed(3), 4)}) {
        const auto text = pcs::to_text(a);
        std::istringstream is(text);
        const auto b = pcs::read_matrix(is);
        EXPECT_TRUE(a == b);
        EXPECT_EQ(pcs::to_text(b), text);
    }
}

TEST(MatrixFile, HeaderFormat)
{
    const auto a = pcs::matrix_from_rows(3, {{0, 2}, {1}}, 0.25, 9);
    EXPECT_EQ(pcs::to_text(a), "pcs-matrix v1 2 3 0.25 iid 9\n0 2\n1\n");
}

TEST(MatrixFile, RejectsMalformedInput)
{
    for (const char* text : {"", "pcs-matrix v2 1 1 0.5 iid 0\n0\n", "nope v1 1 1 0.5 iid 0\n0\n",
                             "pcs-matrix v1 2 3 0.5 iid 0\n0\n", "pcs-matrix v1 1 3 0.5 iid 0\n5\n",
                             "pcs-matrix v1 1 3 0.5 iid 0\n2 1\n", "pcs-matrix v1 1 3 0.5 iid 0\n1 x\n",
                             "pcs-matrix v1 1 3 0.5 fixed:2 0\n1\n"}) {
        std::istringstream is(text);
        EXPECT_THROW(pcs::read_matrix(is), pcs::ValidationError) << text;
    }
}

TEST(RowScheme, StringRoundTrip)
{
    EXPECT_EQ(pcs::to_string(RowScheme::iid()), "iid");
    EXPECT_EQ(pcs::to_string(RowScheme::fixed(32)), "fixed:32");
    EXPECT_EQ(pcs::parse_row_scheme("fixed:32"), RowScheme::fixed(32));
    EXPECT_EQ(pcs::parse_row_scheme("iid"), RowScheme::iid());
    EXPECT_THROW(pcs::parse_row_scheme("fixed:"), pcs::ValidationError);
    EXPECT_THROW(pcs::parse_row_scheme("dense"), pcs::ValidationError);
}

TEST(Signal, Invariants)
{
    const auto s = pcs::Signal::from_values({1.0, 2.0, 5.0});
    EXPECT_DOUBLE_EQ(s.total_intensity, 8.0);
    EXPECT_THROW(pcs::Signal::from_values({1.0, -1.0}), pcs::ValidationError);
    EXPECT_THROW(pcs::Signal::with_intensity({1.0, 2.0}, 4.0), pcs::ValidationError);
    EXPECT_NO_THROW(pcs::Signal::with_intensity({1.0, 2.0}, 3.0 * (1 + 1e-12)));
}

} // namespace
