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

// Positivity- and flux-preserving sensing matrices.
//
// A has entries in {0, 1/N}. It is stored as a row pattern (CSR without
// values) since every stored entry has the same value. The zero-mean
// isotropic matrix Z it derives from is never materialized; see
// implied_entry() for the affine map between the two.

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <istream>
#include <limits>
#include <numeric>
#include <ostream>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include "pcs/error.hpp"
#include "pcs/io.hpp"
#include "pcs/random.hpp"

namespace pcs {

struct RowScheme {
    enum class Kind { IidBernoulli, FixedRowWeight };

    Kind kind = Kind::IidBernoulli;
    std::size_t weight = 0;   // only meaningful for FixedRowWeight

    static constexpr RowScheme iid() { return {Kind::IidBernoulli, 0}; }
    static constexpr RowScheme fixed(std::size_t w) { return {Kind::FixedRowWeight, w}; }

    friend bool operator==(const RowScheme&, const RowScheme&) = default;
};

inline std::string to_string(const RowScheme& s)
{
    return s.kind == RowScheme::Kind::IidBernoulli ? std::string("iid")
                                                   : "fixed:" + std::to_string(s.weight);
}

inline RowScheme parse_row_scheme(std::string_view s)
{
    if (s == "iid") return RowScheme::iid();
    if (s.starts_with("fixed:")) {
        const auto w = io::parse_u64(s.substr(6), "row weight");
        return RowScheme::fixed(static_cast<std::size_t>(w));
    }
    throw ValidationError("unknown row scheme '" + std::string(s) + "'");
}

class SensingMatrix {
public:
    using Index = std::uint32_t;

    /// Builds from a CSR pattern. Column indices must be strictly ascending
    /// within each row and lie in [0, n_cols).
    SensingMatrix(std::size_t n_rows, std::size_t n_cols, std::vector<std::size_t> offsets,
                  std::vector<Index> columns, double p, std::uint64_t seed, RowScheme scheme)
        : n_rows_(n_rows), n_cols_(n_cols), offsets_(std::move(offsets)), columns_(std::move(columns)),
          p_(p), seed_(seed), scheme_(scheme)
    {
        detail::require(n_rows_ >= 1 && n_cols_ >= 1, "matrix dimensions must be positive");
        detail::require(offsets_.size() == n_rows_ + 1 && offsets_.front() == 0 &&
                            offsets_.back() == columns_.size(),
                        "malformed row offsets");
        for (std::size_t i = 0; i < n_rows_; ++i) {
            detail::require(offsets_[i] <= offsets_[i + 1], "malformed row offsets");
            const auto r = row(i);
            for (std::size_t k = 0; k < r.size(); ++k) {
                detail::require(r[k] < n_cols_, "row " + std::to_string(i) + ": column index out of range");
                detail::require(k == 0 || r[k - 1] < r[k],
                                "row " + std::to_string(i) + ": column indices must be strictly ascending");
            }
            if (scheme_.kind == RowScheme::Kind::FixedRowWeight)
                detail::require(r.size() == scheme_.weight,
                                "row " + std::to_string(i) + ": expected exactly " +
                                    std::to_string(scheme_.weight) + " nonzeros");
        }
    }

    std::size_t n_rows() const noexcept { return n_rows_; }
    std::size_t n_cols() const noexcept { return n_cols_; }
    double p() const noexcept { return p_; }
    std::uint64_t seed() const noexcept { return seed_; }
    const RowScheme& scheme() const noexcept { return scheme_; }
    std::size_t nnz() const noexcept { return columns_.size(); }

    /// The value of every stored entry.
    double entry_value() const noexcept { return 1.0 / static_cast<double>(n_rows_); }

    std::span<const Index> row(std::size_t i) const noexcept
    {
        return {columns_.data() + offsets_[i], offsets_[i + 1] - offsets_[i]};
    }

    /// Number of nonzeros in each column.
    std::vector<std::size_t> column_counts() const
    {
        std::vector<std::size_t> c(n_cols_, 0);
        for (auto j : columns_) ++c[j];
        return c;
    }

    /// Entry of the isotropic matrix Z (Ã = Z/√N) that corresponds to the
    /// pattern bit `nonzero` under A = √(p(1−p))·Z/N + (1−p)/N:
    /// nonzero -> √(p/(1−p)), zero -> −√((1−p)/p).
    static double implied_entry(bool nonzero, double p)
    {
        const double b = nonzero ? 1.0 : 0.0;
        return (b - (1.0 - p)) / std::sqrt(p * (1.0 - p));
    }

    friend bool operator==(const SensingMatrix&, const SensingMatrix&) = default;

private:
    std::size_t n_rows_;
    std::size_t n_cols_;
    std::vector<std::size_t> offsets_;
    std::vector<Index> columns_;
    double p_;
    std::uint64_t seed_;
    RowScheme scheme_;
};

/// Nonnegative intensity vector with its total intensity I = ‖f‖₁.
struct Signal {
    std::vector<double> values;
    double total_intensity = 0.0;

    std::size_t size() const noexcept { return values.size(); }

    /// Validates f ⪰ 0 and sums to get I.
    static Signal from_values(std::vector<double> v)
    {
        double sum = 0.0;
        for (double x : v) {
            detail::require(std::isfinite(x) && x >= 0.0, "signal values must be finite and nonnegative");
            sum += x;
        }
        detail::require(sum > 0.0, "signal total intensity must be positive");
        return Signal{std::move(v), sum};
    }

    /// Validates against a declared intensity (relative tolerance 1e-9).
    static Signal with_intensity(std::vector<double> v, double intensity)
    {
        auto s = from_values(std::move(v));
        detail::require(intensity > 0.0 && std::abs(s.total_intensity - intensity) <= 1e-9 * intensity,
                        "signal does not sum to its declared total intensity");
        s.total_intensity = intensity;
        return s;
    }
};

/// Generates a sensing matrix. Row i is drawn from substream
/// streams::kMatrixRowBase + i of `seed`, so rows are independent of each
/// other and of generation order.
///
/// IidBernoulli: entry (i, j) is nonzero iff the j-th uniform of row i's
/// stream is below 1 − p. Rows may come out empty; validate() flags them.
///
/// FixedRowWeight(w): w distinct columns per row by Floyd's algorithm. The
/// `p` argument is ignored and the stored p is the implied 1 − w/m.
inline SensingMatrix build_matrix(std::size_t n_rows, std::size_t n_cols, double p, RowScheme scheme,
                                  std::uint64_t seed)
{
    detail::require(n_rows >= 1 && n_cols >= 1, "matrix dimensions must be positive");
    detail::require(n_cols <= std::numeric_limits<SensingMatrix::Index>::max(), "too many columns");

    std::vector<std::size_t> offsets(n_rows + 1, 0);
    std::vector<SensingMatrix::Index> cols;

    if (scheme.kind == RowScheme::Kind::IidBernoulli) {
        detail::require(p > 0.0 && p < 1.0, "p must lie in the open interval (0, 1)");
        const double one_prob = 1.0 - p;
        cols.reserve(static_cast<std::size_t>(static_cast<double>(n_rows * n_cols) * one_prob * 1.1) + 16);
        for (std::size_t i = 0; i < n_rows; ++i) {
            RandomStream rng(seed, streams::kMatrixRowBase + i);
            for (std::size_t j = 0; j < n_cols; ++j)
                if (rng.uniform() < one_prob) cols.push_back(static_cast<SensingMatrix::Index>(j));
            offsets[i + 1] = cols.size();
        }
    } else {
        const std::size_t w = scheme.weight;
        detail::require(w >= 1 && w <= n_cols, "row weight must lie in [1, n_cols]");
        p = 1.0 - static_cast<double>(w) / static_cast<double>(n_cols);
        cols.reserve(n_rows * w);
        std::vector<SensingMatrix::Index> chosen;
        chosen.reserve(w);
        for (std::size_t i = 0; i < n_rows; ++i) {
            RandomStream rng(seed, streams::kMatrixRowBase + i);
            chosen.clear();
            // Floyd: for j = m−w .. m−1 pick t in [0, j]; take j if t is taken.
            for (std::size_t j = n_cols - w; j < n_cols; ++j) {
                const auto t = static_cast<SensingMatrix::Index>(rng.below(j + 1));
                const bool taken = std::find(chosen.begin(), chosen.end(), t) != chosen.end();
                chosen.push_back(taken ? static_cast<SensingMatrix::Index>(j) : t);
            }
            std::sort(chosen.begin(), chosen.end());
            cols.insert(cols.end(), chosen.begin(), chosen.end());
            offsets[i + 1] = cols.size();
        }
    }
    return SensingMatrix(n_rows, n_cols, std::move(offsets), std::move(cols), p, seed, scheme);
}

/// Builds a matrix from explicit row patterns (tests, hand-made operators).
inline SensingMatrix matrix_from_rows(std::size_t n_cols, const std::vector<std::vector<SensingMatrix::Index>>& rows,
                                      double p = 0.5, std::uint64_t seed = 0,
                                      RowScheme scheme = RowScheme::iid())
{
    std::vector<std::size_t> offsets{0};
    std::vector<SensingMatrix::Index> cols;
    for (const auto& r : rows) {
        cols.insert(cols.end(), r.begin(), r.end());
        offsets.push_back(cols.size());
    }
    return SensingMatrix(rows.size(), n_cols, std::move(offsets), std::move(cols), p, seed, scheme);
}

namespace detail {

inline void apply_into(const SensingMatrix& a, std::span<const double> f, std::span<double> out)
{
    require(f.size() == a.n_cols(), "apply: input length does not match matrix columns");
    require(out.size() == a.n_rows(), "apply: output length does not match matrix rows");
    const double n = static_cast<double>(a.n_rows());
    for (std::size_t i = 0; i < a.n_rows(); ++i) {
        double s = 0.0;
        for (auto j : a.row(i)) s += f[j];
        out[i] = s / n;
    }
}

inline void apply_adjoint_into(const SensingMatrix& a, std::span<const double> v, std::span<double> out)
{
    require(v.size() == a.n_rows(), "apply_adjoint: input length does not match matrix rows");
    require(out.size() == a.n_cols(), "apply_adjoint: output length does not match matrix columns");
    std::fill(out.begin(), out.end(), 0.0);
    for (std::size_t i = 0; i < a.n_rows(); ++i) {
        const double vi = v[i];
        for (auto j : a.row(i)) out[j] += vi;
    }
    const double n = static_cast<double>(a.n_rows());
    for (auto& x : out) x /= n;
}

struct ApplyFn {
    void operator()(const SensingMatrix& a, std::span<const double> f, std::span<double> out) const
    {
        apply_into(a, f, out);
    }
    std::vector<double> operator()(const SensingMatrix& a, std::span<const double> f) const
    {
        std::vector<double> out(a.n_rows());
        apply_into(a, f, out);
        return out;
    }
};

struct ApplyAdjointFn {
    void operator()(const SensingMatrix& a, std::span<const double> v, std::span<double> out) const
    {
        apply_adjoint_into(a, v, out);
    }
    std::vector<double> operator()(const SensingMatrix& a, std::span<const double> v) const
    {
        std::vector<double> out(a.n_cols());
        apply_adjoint_into(a, v, out);
        return out;
    }
};

} // namespace detail

// Function objects rather than functions: an unqualified apply(A, vec) would
// otherwise also find std::apply through argument-dependent lookup.

/// A f, with each row sum taken in ascending column order.
inline constexpr detail::ApplyFn apply{};

/// Aᵀ v; contributions to each column accumulate in ascending row order.
inline constexpr detail::ApplyAdjointFn apply_adjoint{};

struct ValidationReport {
    std::size_t empty_rows = 0;
    bool rows_nonempty = true;
    /// max over trials of ‖Af‖₁/‖f‖₁ for random f ⪰ 0.
    double max_flux_ratio = 0.0;
    bool flux_ok = true;
    /// min over trials of min_i (Af)_i / (cI/N) for random f ⪰ cI·1; ≥ 1 passes.
    double min_measurement_ratio = 0.0;
    bool min_measurement_ok = true;
    std::size_t trials = 0;

    bool ok() const noexcept { return rows_nonempty && flux_ok && min_measurement_ok; }
};

/// Slack allowed on the flux and minimum-measurement checks for rounding.
inline constexpr double kValidationSlack = 1e-12;

/// Checks flux preservation and the minimum-measurement bound on random
/// inputs. Trial t draws from substream streams::kValidation + t.
inline ValidationReport validate(const SensingMatrix& a, std::size_t trials, std::uint64_t seed)
{
    detail::require(trials >= 1, "validate: trials must be >= 1");
    ValidationReport rep;
    rep.trials = trials;
    for (std::size_t i = 0; i < a.n_rows(); ++i)
        if (a.row(i).empty()) ++rep.empty_rows;
    rep.rows_nonempty = rep.empty_rows == 0;

    const std::size_t m = a.n_cols();
    const double nrows = static_cast<double>(a.n_rows());
    std::vector<double> f(m), af(a.n_rows());
    rep.min_measurement_ratio = std::numeric_limits<double>::infinity();
    for (std::size_t t = 0; t < trials; ++t) {
        RandomStream rng(seed, streams::kValidation + t);
        double l1 = 0.0;
        for (auto& x : f) {
            x = -std::log(rng.uniform_open0());
            l1 += x;
        }
        pcs::apply(a, f, af);
        const double ratio = std::accumulate(af.begin(), af.end(), 0.0) / l1;
        rep.max_flux_ratio = std::max(rep.max_flux_ratio, ratio);

        // f ⪰ cI·1 with I = 1 and c drawn in (0, 1/m).
        const double c = rng.uniform_open0() / static_cast<double>(m);
        const double spread = 1.0 - c * static_cast<double>(m);
        for (auto& x : f) x = c + spread * (x / l1);
        pcs::apply(a, f, af);
        const double floor = c / nrows;
        const double worst = *std::min_element(af.begin(), af.end());
        rep.min_measurement_ratio = std::min(rep.min_measurement_ratio, worst / floor);
    }
    rep.flux_ok = rep.max_flux_ratio <= 1.0 + kValidationSlack;
    rep.min_measurement_ok = rep.min_measurement_ratio >= 1.0 - kValidationSlack;
    return rep;
}

// ---- file format -----------------------------------------------------------
//
//   pcs-matrix v1 N m p scheme seed
//   <ascending column indices of row 0>
//   ...
//
// scheme is "iid" or "fixed:W"; an empty row is an empty line.

inline void write_matrix(std::ostream& os, const SensingMatrix& a)
{
    os << "pcs-matrix v1 " << a.n_rows() << ' ' << a.n_cols() << ' ' << io::format_double(a.p()) << ' '
       << to_string(a.scheme()) << ' ' << a.seed() << '\n';
    for (std::size_t i = 0; i < a.n_rows(); ++i) {
        const auto r = a.row(i);
        for (std::size_t k = 0; k < r.size(); ++k) {
            if (k) os << ' ';
            os << r[k];
        }
        os << '\n';
    }
}

inline std::string to_text(const SensingMatrix& a)
{
    std::ostringstream os;
    write_matrix(os, a);
    return os.str();
}

inline SensingMatrix read_matrix(std::istream& is)
{
    std::string line;
    detail::require(static_cast<bool>(std::getline(is, line)), "matrix file is empty");
    std::istringstream hs(line);
    std::string magic, version, p_tok, scheme_tok;
    std::size_t n = 0, m = 0;
    std::uint64_t seed = 0;
    hs >> magic >> version >> n >> m >> p_tok >> scheme_tok >> seed;
    detail::require(!hs.fail() && magic == "pcs-matrix", "matrix file: bad header '" + line + "'");
    detail::require(version == "v1", "matrix file: unsupported version '" + version + "'");
    const double p = io::parse_double(p_tok, "p");
    const RowScheme scheme = parse_row_scheme(scheme_tok);

    std::vector<std::size_t> offsets{0};
    std::vector<SensingMatrix::Index> cols;
    for (std::size_t i = 0; i < n; ++i) {
        detail::require(static_cast<bool>(std::getline(is, line)),
                        "matrix file: expected " + std::to_string(n) + " rows, got " + std::to_string(i));
        std::istringstream rs(line);
        std::uint64_t j = 0;
        while (rs >> j) {
            detail::require(j < m, "matrix file: column index out of range in row " + std::to_string(i));
            cols.push_back(static_cast<SensingMatrix::Index>(j));
        }
        detail::require(rs.eof(), "matrix file: malformed row " + std::to_string(i));
        offsets.push_back(cols.size());
    }
    return SensingMatrix(n, m, std::move(offsets), std::move(cols), p, seed, scheme);
}

} // namespace pcs
