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

// Poisson observation model y ~ Poisson(Af): sampling, negative
// log-likelihood and its gradient, and two divergences between Poisson
// intensity vectors.

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "pcs/error.hpp"
#include "pcs/random.hpp"
#include "pcs/sensing.hpp"

namespace pcs {

using CountVector = std::vector<std::uint64_t>;

/// Absolute log floor used when no intensity scale is known.
inline constexpr double kAbsoluteLogFloor = 1e-30;

/// Floor ε = 1e-10·(I/N) for log(max(μ, ε)).
inline double log_floor(double intensity, std::size_t n_detectors)
{
    if (!(intensity > 0.0) || n_detectors == 0) return kAbsoluteLogFloor;
    return 1e-10 * intensity / static_cast<double>(n_detectors);
}

namespace detail {

// Sequential-search inversion; exact for small means.
inline std::uint64_t poisson_inversion(double mu, RandomStream& rng)
{
    const double u = rng.uniform();
    double p = std::exp(-mu);
    double cdf = p;
    std::uint64_t k = 0;
    while (u >= cdf) {
        ++k;
        p *= mu / static_cast<double>(k);
        const double next = cdf + p;
        if (next == cdf) break;   // tail below double resolution
        cdf = next;
    }
    return k;
}

// Transformed rejection with squeeze (Hörmann's PTRS), valid for mu >= 10.
inline std::uint64_t poisson_ptrs(double mu, RandomStream& rng)
{
    const double slam = std::sqrt(mu);
    const double loglam = std::log(mu);
    const double b = 0.931 + 2.53 * slam;
    const double a = -0.059 + 0.02483 * b;
    const double invalpha = 1.1239 + 1.1328 / (b - 3.4);
    const double vr = 0.9277 - 3.6224 / (b - 2.0);
    for (;;) {
        const double u = rng.uniform() - 0.5;
        const double v = rng.uniform();
        const double us = 0.5 - std::abs(u);
        const double k = std::floor((2.0 * a / us + b) * u + mu + 0.43);
        if (us >= 0.07 && v <= vr) return static_cast<std::uint64_t>(k);
        if (k < 0.0 || (us < 0.013 && v > us)) continue;
        if (std::log(v) + std::log(invalpha) - std::log(a / (us * us) + b) <=
            -mu + k * loglam - std::lgamma(k + 1.0))
            return static_cast<std::uint64_t>(k);
    }
}

} // namespace detail

/// One Poisson draw with mean `mu` from `rng`.
inline std::uint64_t poisson_draw(double mu, RandomStream& rng)
{
    if (mu == 0.0) return 0;
    return mu < 10.0 ? detail::poisson_inversion(mu, rng) : detail::poisson_ptrs(mu, rng);
}

/// y_i ~ Poisson(mu_i) independently; component i uses substream
/// streams::kPoissonBase + i of `seed`.
inline CountVector sample_poisson(std::span<const double> mu, std::uint64_t seed)
{
    CountVector y(mu.size());
    for (std::size_t i = 0; i < mu.size(); ++i) {
        detail::require(std::isfinite(mu[i]) && mu[i] >= 0.0,
                        "sample_poisson: intensity " + std::to_string(i) + " is negative or non-finite");
        RandomStream rng(seed, streams::kPoissonBase + i);
        y[i] = poisson_draw(mu[i], rng);
    }
    return y;
}

inline double total_count(const CountVector& y)
{
    double s = 0.0;
    for (auto v : y) s += static_cast<double>(v);
    return s;
}

/// φ = Σ_j [μ_j − y_j·log max(μ_j, ε)]. The log y_j! terms are dropped.
/// Throws DomainError when y_j > 0 but the floored intensity is zero.
template <class Counts>
double neg_log_likelihood(const Counts& y, std::span<const double> mu, double floor = kAbsoluteLogFloor)
{
    detail::require(y.size() == mu.size(), "neg_log_likelihood: length mismatch");
    double phi = 0.0;
    for (std::size_t j = 0; j < mu.size(); ++j) {
        const double yj = static_cast<double>(y[j]);
        phi += mu[j];
        if (yj != 0.0) {
            const double m = std::max(mu[j], floor);
            if (!(m > 0.0))
                throw DomainError("neg_log_likelihood: positive count at zero intensity (index " +
                                  std::to_string(j) + ")");
            phi -= yj * std::log(m);
        }
    }
    return phi;
}

/// ∇φ(f) = Aᵀ(1 − y ⊘ Af), with the same floor as neg_log_likelihood.
/// `af` is A f, already computed by the caller.
template <class Counts>
void nll_gradient(const Counts& y, const SensingMatrix& a, std::span<const double> af, std::span<double> grad,
                  double floor = kAbsoluteLogFloor)
{
    detail::require(y.size() == a.n_rows() && af.size() == a.n_rows(), "nll_gradient: length mismatch");
    std::vector<double> w(a.n_rows());
    for (std::size_t i = 0; i < w.size(); ++i) {
        const double yi = static_cast<double>(y[i]);
        if (yi == 0.0) {
            w[i] = 1.0;
            continue;
        }
        const double m = std::max(af[i], floor);
        if (!(m > 0.0))
            throw DomainError("nll_gradient: positive count at zero intensity (index " + std::to_string(i) + ")");
        w[i] = 1.0 - yi / m;
    }
    pcs::apply_adjoint(a, w, grad);
}

template <class Counts>
std::vector<double> nll_gradient(const Counts& y, std::span<const double> f, const SensingMatrix& a,
                                 double floor = kAbsoluteLogFloor)
{
    const auto af = pcs::apply(a, f);
    std::vector<double> g(a.n_cols());
    nll_gradient(y, a, af, g, floor);
    return g;
}

/// KL(Poisson(g) ‖ Poisson(h)) = Σ_i [g_i log(g_i/h_i) − g_i + h_i], 0·log 0 = 0.
inline double kl_divergence(std::span<const double> g, std::span<const double> h)
{
    detail::require(g.size() == h.size(), "kl_divergence: length mismatch");
    double kl = 0.0;
    for (std::size_t i = 0; i < g.size(); ++i) {
        detail::require(g[i] >= 0.0 && h[i] >= 0.0, "kl_divergence: intensities must be nonnegative");
        if (g[i] == 0.0) {
            kl += h[i];
            continue;
        }
        if (h[i] == 0.0) throw DomainError("kl_divergence: g_i > 0 with h_i = 0 (index " + std::to_string(i) + ")");
        kl += g[i] * std::log(g[i] / h[i]) - g[i] + h[i];
    }
    return kl;
}

/// Σ_i (√g_i − √h_i)², which equals 2·log(1/affinity) for Poisson
/// likelihoods with intensities g and h.
inline double hellinger_distance_sq(std::span<const double> g, std::span<const double> h)
{
    detail::require(g.size() == h.size(), "hellinger_distance_sq: length mismatch");
    double s = 0.0;
    for (std::size_t i = 0; i < g.size(); ++i) {
        detail::require(g[i] >= 0.0 && h[i] >= 0.0, "hellinger_distance_sq: intensities must be nonnegative");
        const double d = std::sqrt(g[i]) - std::sqrt(h[i]);
        s += d * d;
    }
    return s;
}

/// Hellinger affinity ∫√(p(y|g)p(y|h)) dν = exp(−½ Σ(√g − √h)²).
inline double hellinger_affinity(std::span<const double> g, std::span<const double> h)
{
    return std::exp(-0.5 * hellinger_distance_sq(g, h));
}

} // namespace pcs
