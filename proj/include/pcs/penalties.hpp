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

// Denoisers for the separable quadratic subproblem
//
//     min_f ‖v − f‖²₂ + γ·pen(f)
//
// (pruned recursive dyadic partitions, their cycle-spun average, and
// soft-thresholding in an orthonormal basis), plus the quantized
// coefficient class, its prefix codelength, and the Euclidean projection
// onto C = {g ⪰ cI·1, Σg = I}.

#pragma once

#include <algorithm>
#include <bit>
#include <functional>
#include <numbers>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <ostream>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "pcs/error.hpp"
#include "pcs/io.hpp"

namespace pcs {

inline bool is_power_of_two(std::size_t n) noexcept { return n != 0 && std::has_single_bit(n); }

// ---- recursive dyadic partitions -------------------------------------------

/// How a leaf picks its level: the plain mean, or the mean clipped at zero
/// (the exact per-leaf minimizer under f ⪰ 0).
enum class LeafFit { Mean, NonnegativeMean };

struct PartitionLeaf {
    std::size_t start = 0;
    std::size_t length = 0;
    double level = 0.0;
};

struct PartitionFit {
    std::size_t n = 0;
    std::vector<PartitionLeaf> leaves;   // ascending start
    double cost = 0.0;

    std::size_t leaf_count() const noexcept { return leaves.size(); }

    std::vector<double> as_vector() const
    {
        std::vector<double> out(n);
        for (const auto& l : leaves) std::fill_n(out.begin() + static_cast<std::ptrdiff_t>(l.start), l.length, l.level);
        return out;
    }
};

/// Debug dump: one `start length level` line per leaf.
inline void write_partition(std::ostream& os, const PartitionFit& fit)
{
    for (const auto& l : fit.leaves) os << l.start << ' ' << l.length << ' ' << io::format_double(l.level) << '\n';
}

namespace detail {

// Bottom-up pruning on an implicit heap (node k has children 2k, 2k+1;
// node n + i is sample i). Samples are read through `at(i)` so cycle
// spinning can fit a rotated view without copying.
class RdpPruner {
public:
    template <class Sample>
    void fit(std::size_t n, double gamma, LeafFit mode, Sample&& at)
    {
        n_ = n;
        sum_.resize(2 * n);
        sumsq_.resize(2 * n);
        cost_.resize(2 * n);
        level_.resize(2 * n);
        pruned_.resize(2 * n);
        for (std::size_t i = 0; i < n; ++i) {
            const double x = at(i);
            const std::size_t k = n + i;
            sum_[k] = x;
            sumsq_[k] = x * x;
            const double c = leaf_level(x, 1.0, mode);
            level_[k] = c;
            cost_[k] = (x - c) * (x - c) + gamma;
            pruned_[k] = 1;
        }
        for (std::size_t k = n - 1; k >= 1; --k) {
            const std::size_t l = 2 * k, r = l + 1;
            sum_[k] = sum_[l] + sum_[r];
            sumsq_[k] = sumsq_[l] + sumsq_[r];
            const double len = static_cast<double>(n >> std::bit_width(k) << 1);
            const double c = leaf_level(sum_[k], len, mode);
            const double sse = std::max(0.0, sumsq_[k] - 2.0 * c * sum_[k] + len * c * c);
            const double as_leaf = sse + gamma;
            const double as_split = cost_[l] + cost_[r];
            level_[k] = c;
            if (as_leaf <= as_split) {
                cost_[k] = as_leaf;
                pruned_[k] = 1;
            } else {
                cost_[k] = as_split;
                pruned_[k] = 0;
            }
        }
    }

    /// Leaves of the last fit in ascending start order.
    void leaves(std::vector<PartitionLeaf>& out) const
    {
        out.clear();
        collect(1, out);
    }

    double root_cost() const noexcept { return cost_[1]; }

private:
    static double leaf_level(double sum, double len, LeafFit mode) noexcept
    {
        const double mean = sum / len;
        return (mode == LeafFit::NonnegativeMean && mean < 0.0) ? 0.0 : mean;
    }

    void collect(std::size_t k, std::vector<PartitionLeaf>& out) const
    {
        if (pruned_[k]) {
            const int depth = std::bit_width(k) - 1;
            const std::size_t len = n_ >> depth;
            const std::size_t start = (k - (std::size_t{1} << depth)) * len;
            out.push_back({start, len, level_[k]});
            return;
        }
        collect(2 * k, out);
        collect(2 * k + 1, out);
    }

    std::size_t n_ = 0;
    std::vector<double> sum_, sumsq_, cost_, level_;
    std::vector<unsigned char> pruned_;
};

inline void require_dyadic(std::size_t n, double gamma)
{
    require(is_power_of_two(n), "signal length " + std::to_string(n) + " is not a power of two");
    require(gamma >= 0.0 && std::isfinite(gamma), "penalty weight gamma must be finite and >= 0");
}

} // namespace detail

/// Exact global minimizer of Σ(v_i − f_i)² + γ·(#leaves) over functions that
/// are constant on the leaves of a pruned dyadic partition. A node is kept
/// as a leaf when that costs no more than splitting it.
inline PartitionFit rdp_denoise(std::span<const double> v, double gamma, LeafFit mode = LeafFit::Mean)
{
    detail::require_dyadic(v.size(), gamma);
    const std::size_t n = v.size();
    PartitionFit fit;
    fit.n = n;
    if (n == 1) {
        const double c = (mode == LeafFit::NonnegativeMean && v[0] < 0.0) ? 0.0 : v[0];
        fit.leaves.push_back({0, 1, c});
        fit.cost = (v[0] - c) * (v[0] - c) + gamma;
        return fit;
    }
    detail::RdpPruner pruner;
    pruner.fit(n, gamma, mode, [&](std::size_t i) { return v[i]; });
    pruner.leaves(fit.leaves);
    double sse = 0.0;
    for (const auto& l : fit.leaves)
        for (std::size_t i = l.start; i < l.start + l.length; ++i) sse += (v[i] - l.level) * (v[i] - l.level);
    fit.cost = sse + gamma * static_cast<double>(fit.leaves.size());
    return fit;
}

/// Translation-invariant RDP estimate: the average over all n circular
/// shifts s of unshift_s(rdp_denoise(shift_s(v))), where
/// shift_s(v)_i = v_{(i+s) mod n}. Per-shift results are added in ascending
/// s. Shifts s and s + n/2 induce the same dyadic cells, so the second half
/// reuses the leaves of the first.
class CycleSpinner {
public:
    std::vector<double> denoise(std::span<const double> v, double gamma, LeafFit mode = LeafFit::Mean)
    {
        detail::require_dyadic(v.size(), gamma);
        const std::size_t n = v.size();
        std::vector<double> out(n, 0.0);
        if (n == 1) {
            out[0] = rdp_denoise(v, gamma, mode).leaves[0].level;
            mean_leaves_ = 1.0;
            return out;
        }
        const std::size_t half = n / 2;
        const std::size_t mask = n - 1;
        per_shift_.resize(half);
        for (std::size_t s = 0; s < half; ++s) {
            pruner_.fit(n, gamma, mode, [&](std::size_t i) { return v[(i + s) & mask]; });
            pruner_.leaves(per_shift_[s]);
            add_unshifted(per_shift_[s], s, mask, out);
        }
        // fit_{s+n/2} is fit_s rotated by n/2, so its unshifted copy is
        // unshift_s(fit_s) again.
        std::size_t leaves = 0;
        for (std::size_t s = 0; s < half; ++s) {
            add_unshifted(per_shift_[s], s, mask, out);
            leaves += per_shift_[s].size();
        }
        mean_leaves_ = static_cast<double>(leaves) / static_cast<double>(half);
        const double inv = static_cast<double>(n);
        for (auto& x : out) x /= inv;
        return out;
    }

    /// Mean leaf count over the n per-shift fits of the last denoise() call.
    double mean_leaf_count() const noexcept { return mean_leaves_; }

private:
    static void add_unshifted(const std::vector<PartitionLeaf>& leaves, std::size_t s, std::size_t mask,
                              std::vector<double>& out)
    {
        for (const auto& l : leaves)
            for (std::size_t i = l.start; i < l.start + l.length; ++i) out[(i + s) & mask] += l.level;
    }

    detail::RdpPruner pruner_;
    std::vector<std::vector<PartitionLeaf>> per_shift_;
    double mean_leaves_ = 0.0;
};

inline std::vector<double> rdp_denoise_ti(std::span<const double> v, double gamma, LeafFit mode = LeafFit::Mean)
{
    CycleSpinner spinner;
    return spinner.denoise(v, gamma, mode);
}

/// Leaves in the coarsest dyadic partition on which f is exactly constant.
inline std::size_t dyadic_leaf_count(std::span<const double> f)
{
    detail::require(is_power_of_two(f.size()), "dyadic_leaf_count: length is not a power of two");
    const std::size_t n = f.size();
    // Walk levels bottom-up; `uniform[k]` says block k at this level is constant.
    std::vector<unsigned char> uniform(n, 1);
    std::size_t leaves = 0;
    for (std::size_t len = 1; len < n; len *= 2) {
        const std::size_t blocks = n / len;
        for (std::size_t b = 0; b < blocks; b += 2) {
            const bool merge = uniform[b] && uniform[b + 1] && f[b * len] == f[(b + 1) * len];
            if (!merge) leaves += std::size_t{uniform[b]} + std::size_t{uniform[b + 1]};
            uniform[b / 2] = merge ? 1 : 0;
        }
    }
    return leaves + (uniform[0] ? 1 : 0);
}

/// Mean over all circular shifts of dyadic_leaf_count(shift_s(f)).
inline double shift_averaged_leaf_count(std::span<const double> f)
{
    detail::require(is_power_of_two(f.size()), "shift_averaged_leaf_count: length is not a power of two");
    const std::size_t n = f.size();
    if (n == 1) return 1.0;
    std::vector<double> shifted(n);
    double total = 0.0;
    for (std::size_t s = 0; s < n / 2; ++s) {
        for (std::size_t i = 0; i < n; ++i) shifted[i] = f[(i + s) & (n - 1)];
        total += 2.0 * static_cast<double>(dyadic_leaf_count(shifted));
    }
    return total / static_cast<double>(n);
}

/// Per-leaf penalty in nats. Kraft: log₂(n)·ln 2 = ln n per leaf. Raw: 1.
enum class LeafCode { Kraft, Raw };

inline double leaf_penalty(std::size_t n, LeafCode code)
{
    return code == LeafCode::Kraft ? std::log2(static_cast<double>(n)) * std::numbers::ln2 : 1.0;
}

// ---- orthonormal bases -----------------------------------------------------

enum class Basis { Identity, Haar };

/// Full-depth orthonormal Haar analysis θ = Wᵀv. Layout: [scaling, coarsest
/// detail, ..., finest details].
inline std::vector<double> haar_forward(std::span<const double> v)
{
    detail::require(is_power_of_two(v.size()), "Haar transform needs a power-of-two length");
    std::vector<double> a(v.begin(), v.end()), tmp(v.size());
    const double r = std::numbers::sqrt2 / 2.0;
    for (std::size_t len = v.size(); len > 1; len /= 2) {
        const std::size_t h = len / 2;
        for (std::size_t i = 0; i < h; ++i) {
            tmp[i] = (a[2 * i] + a[2 * i + 1]) * r;
            tmp[h + i] = (a[2 * i] - a[2 * i + 1]) * r;
        }
        std::copy_n(tmp.begin(), len, a.begin());
    }
    return a;
}

/// Synthesis v = Wθ, inverse of haar_forward.
inline std::vector<double> haar_inverse(std::span<const double> theta)
{
    detail::require(is_power_of_two(theta.size()), "Haar transform needs a power-of-two length");
    std::vector<double> a(theta.begin(), theta.end()), tmp(theta.size());
    const double r = std::numbers::sqrt2 / 2.0;
    for (std::size_t len = 2; len <= theta.size(); len *= 2) {
        const std::size_t h = len / 2;
        for (std::size_t i = 0; i < h; ++i) {
            tmp[2 * i] = (a[i] + a[h + i]) * r;
            tmp[2 * i + 1] = (a[i] - a[h + i]) * r;
        }
        std::copy_n(tmp.begin(), len, a.begin());
    }
    return a;
}

inline std::vector<double> analyze(std::span<const double> v, Basis b)
{
    return b == Basis::Haar ? haar_forward(v) : std::vector<double>(v.begin(), v.end());
}

inline std::vector<double> synthesize(std::span<const double> theta, Basis b)
{
    return b == Basis::Haar ? haar_inverse(theta) : std::vector<double>(theta.begin(), theta.end());
}

inline double soft_threshold(double x, double t) noexcept
{
    const double mag = std::abs(x) - t;
    return mag > 0.0 ? std::copysign(mag, x) : 0.0;
}

/// argmin_f ‖v − f‖² + τ_eff·‖Wᵀf‖₁ = W·soft(Wᵀv, τ_eff/2).
inline std::vector<double> soft_threshold_basis(std::span<const double> v, double tau_eff, Basis basis)
{
    detail::require(tau_eff >= 0.0 && std::isfinite(tau_eff), "soft_threshold_basis: tau_eff must be finite and >= 0");
    auto theta = analyze(v, basis);
    for (auto& x : theta) x = soft_threshold(x, tau_eff / 2.0);
    return synthesize(theta, basis);
}

inline double l1_norm_in_basis(std::span<const double> f, Basis basis)
{
    const auto theta = analyze(f, basis);
    double s = 0.0;
    for (double x : theta) s += std::abs(x);
    return s;
}

// ---- projection onto C -----------------------------------------------------

/// Euclidean projection of g onto C = {x ⪰ cI·1, Σx = I}. Writing x = cI + z
/// reduces this to projecting g − cI onto the simplex of radius I(1 − cm):
/// sort descending, find the threshold λ, and clip.
inline std::vector<double> project_onto_C(std::span<const double> g, double intensity, double c)
{
    const std::size_t m = g.size();
    detail::require(m >= 1, "project_onto_C: empty vector");
    detail::require(intensity > 0.0 && std::isfinite(intensity), "project_onto_C: intensity must be positive");
    detail::require(c >= 0.0 && c * static_cast<double>(m) < 1.0, "project_onto_C: C is empty (need 0 <= c < 1/m)");
    const double floor = c * intensity;
    const double radius = intensity - floor * static_cast<double>(m);

    std::vector<double> u(m);
    for (std::size_t i = 0; i < m; ++i) u[i] = g[i] - floor;
    std::vector<double> sorted = u;
    std::sort(sorted.begin(), sorted.end(), std::greater<>());
    double prefix = 0.0, lambda = 0.0;
    for (std::size_t j = 0; j < m; ++j) {
        prefix += sorted[j];
        const double candidate = (prefix - radius) / static_cast<double>(j + 1);
        if (sorted[j] - candidate > 0.0) lambda = candidate;
    }
    std::vector<double> x(m);
    for (std::size_t i = 0; i < m; ++i) x[i] = floor + std::max(u[i] - lambda, 0.0);
    return x;
}

// ---- quantized coefficients and their codelength ----------------------------

/// Sparse quantized coefficient vector. Coefficients that are exactly zero
/// are off the support; every stored one sits in one of B = ⌈√m⌉ uniform bins
/// over [−I, I].
struct QuantizedCoeffs {
    std::size_t m = 0;
    std::vector<std::pair<std::size_t, std::size_t>> nonzeros;   // (index, bin), ascending index
    double intensity_scale = 0.0;

    std::size_t bins() const { return bin_count(m); }
    std::size_t support_size() const noexcept { return nonzeros.size(); }

    static std::size_t bin_count(std::size_t m)
    {
        auto b = static_cast<std::size_t>(std::ceil(std::sqrt(static_cast<double>(m))));
        while (b * b < m) ++b;
        while (b > 1 && (b - 1) * (b - 1) >= m) --b;
        return std::max<std::size_t>(b, 1);
    }

    double bin_center(std::size_t bin) const
    {
        const double width = 2.0 * intensity_scale / static_cast<double>(bins());
        return -intensity_scale + (static_cast<double>(bin) + 0.5) * width;
    }

    std::vector<double> dequantize() const
    {
        std::vector<double> theta(m, 0.0);
        for (const auto& [idx, bin] : nonzeros) theta[idx] = bin_center(bin);
        return theta;
    }
};

/// Nearest-bin-center quantization. Error per stored coefficient is at most
/// I/B, hence ‖θ_q − θ‖² ≤ I²·‖θ‖₀/m.
inline QuantizedCoeffs quantize_coeffs(std::span<const double> theta, double intensity)
{
    detail::require(intensity > 0.0 && std::isfinite(intensity), "quantize_coeffs: intensity must be positive");
    QuantizedCoeffs q;
    q.m = theta.size();
    q.intensity_scale = intensity;
    const std::size_t b = q.bins();
    const double width = 2.0 * intensity / static_cast<double>(b);
    for (std::size_t i = 0; i < theta.size(); ++i) {
        detail::require(std::abs(theta[i]) <= intensity,
                        "quantize_coeffs: coefficient " + std::to_string(i) + " lies outside [-I, I]");
        if (theta[i] == 0.0) continue;
        auto bin = static_cast<std::size_t>(std::floor((theta[i] + intensity) / width));
        q.nonzeros.emplace_back(i, std::min(bin, b - 1));
    }
    return q;
}

/// Prefix codelength in bits: log₂(m+1) for the support size, then log₂ m
/// per location and ½log₂ m per quantized value.
inline double codelength_penalty(const QuantizedCoeffs& q)
{
    const double m = static_cast<double>(q.m);
    const double k = static_cast<double>(q.support_size());
    return std::log2(m + 1.0) + 1.5 * k * std::log2(m);
}

/// The same penalty in nats, the scale on which Σ e^{−pen} ≤ 1.
inline double codelength_penalty_nats(const QuantizedCoeffs& q)
{
    return codelength_penalty(q) * std::numbers::ln2;
}

} // namespace pcs
