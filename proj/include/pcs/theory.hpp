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

// Numerical evaluators for the risk-bound quantities, compressible test
// signals, and Monte-Carlo checks of the near-isometry claims for the
// isotropic matrix Ã = Z/√N implied by a sensing matrix.
//
// The absolute constants c₂ and c₄ are not known numerically; they are
// inputs (default 1) and are echoed in every report. c₁, c₃ and K(c₁,c₃,p)
// only affect success probabilities and have no numeric role here.

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include "pcs/error.hpp"
#include "pcs/penalties.hpp"
#include "pcs/random.hpp"
#include "pcs/sensing.hpp"

namespace pcs::theory {

/// Subgaussianity constant: √(3/(2p(1−p))) for p ≠ 1/2, and 1 at exactly
/// p = 1/2. The jump at 1/2 is intentional.
inline double zeta(double p)
{
    pcs::detail::require(p > 0.0 && p < 1.0, "zeta: p must lie in (0, 1)");
    if (p == 0.5) return 1.0;
    return std::sqrt(3.0 / (2.0 * p * (1.0 - p)));
}

/// C_{N,p} = max(24/c, 16/(p(1−p)))·N.
inline double c_np(std::size_t n, double p, double c)
{
    pcs::detail::require(p > 0.0 && p < 1.0, "c_np: p must lie in (0, 1)");
    pcs::detail::require(c > 0.0 && c < 1.0, "c_np: c must lie in (0, 1)");
    return std::max(24.0 / c, 16.0 / (p * (1.0 - p))) * static_cast<double>(n);
}

/// k_*(N) = N / (2·c₄·ζ_p⁴·log₂ m).
inline double k_star(std::size_t n, std::size_t m, double p, double c4)
{
    pcs::detail::require(m >= 2, "k_star: m must be >= 2");
    pcs::detail::require(c4 > 0.0, "k_star: c4 must be positive");
    const double z = zeta(p);
    return static_cast<double>(n) / (2.0 * c4 * z * z * z * z * std::log2(static_cast<double>(m)));
}

struct BoundParams {
    std::size_t m = 1024;
    std::size_t n = 512;
    double p = 0.5;
    double intensity = 1e5;
    double alpha = 1.0;
    double rho = 1.0;
    double c = 0.1;
    double c2 = 1.0;
    double c4 = 1.0;

    void validate() const
    {
        pcs::detail::require(m >= 2 && n >= 1, "bound: need m >= 2 and N >= 1");
        pcs::detail::require(p > 0.0 && p < 1.0, "bound: p must lie in (0, 1)");
        pcs::detail::require(intensity > 0.0 && alpha > 0.0 && rho > 0.0, "bound: I, alpha and rho must be positive");
        pcs::detail::require(c > 0.0 && c < 1.0, "bound: c must lie in (0, 1)");
        pcs::detail::require(c2 > 0.0 && c4 > 0.0, "bound: c2 and c4 must be positive");
    }
};

struct BoundTerm {
    std::size_t k = 0;
    double approximation = 0.0;   // k^{−2α}
    double quantization = 0.0;    // k/m
    double codelength = 0.0;      // k·log₂ m / I
    double bracket() const noexcept { return approximation + quantization + codelength; }
};

enum class IntensityRegime { Low, High };

inline std::string to_string(IntensityRegime r) { return r == IntensityRegime::Low ? "low" : "high"; }

struct BoundReport {
    BoundParams params;
    double zeta_p = 0.0;
    double C_Np = 0.0;
    double k_star = 0.0;
    std::vector<BoundTerm> terms;   // k = 1..⌊k_*⌋
    std::size_t argmin_k = 0;       // 0 when the k range is empty
    double min_bracket = std::numeric_limits<double>::infinity();
    double leading_term = std::numeric_limits<double>::infinity();   // C_{N,p} · min_bracket
    double additive_term = 0.0;     // 2c₂²ζ⁴ log(c₂ζ⁴m/N) / N
    IntensityRegime regime = IntensityRegime::Low;
    /// k at which the regime's rate kicks in: (αI/log₂m)^{1/(2α+1)} (low) or
    /// (αm)^{1/(2α+1)} (high).
    double critical_k = 0.0;
    bool saturated = false;
};

/// Tabulates k^{−2α} + k/m + k·log₂m/I over 1 ≤ k ≤ k_*(N) and the
/// surrounding constants. The regime split compares k/m with k·log₂m/I, so
/// "low intensity" means I ≤ m·log₂ m.
inline BoundReport evaluate_bound(const BoundParams& params)
{
    params.validate();
    BoundReport rep;
    rep.params = params;
    rep.zeta_p = zeta(params.p);
    rep.C_Np = c_np(params.n, params.p, params.c);
    rep.k_star = k_star(params.n, params.m, params.p, params.c4);

    const double m = static_cast<double>(params.m);
    const double log2m = std::log2(m);
    const double kmax = std::floor(rep.k_star);
    for (std::size_t k = 1; static_cast<double>(k) <= kmax; ++k) {
        const double kd = static_cast<double>(k);
        BoundTerm t{k, std::pow(kd, -2.0 * params.alpha), kd / m, kd * log2m / params.intensity};
        if (t.bracket() < rep.min_bracket) {
            rep.min_bracket = t.bracket();
            rep.argmin_k = k;
        }
        rep.terms.push_back(t);
    }
    if (rep.argmin_k > 0) rep.leading_term = rep.C_Np * rep.min_bracket;

    const double z4 = std::pow(rep.zeta_p, 4.0);
    const double nn = static_cast<double>(params.n);
    rep.additive_term = 2.0 * params.c2 * params.c2 * z4 * std::log(params.c2 * z4 * m / nn) / nn;

    rep.regime = params.intensity <= m * log2m ? IntensityRegime::Low : IntensityRegime::High;
    const double base = rep.regime == IntensityRegime::Low ? params.alpha * params.intensity / log2m
                                                           : params.alpha * m;
    rep.critical_k = std::pow(base, 1.0 / (2.0 * params.alpha + 1.0));
    rep.saturated = rep.k_star < 1.0 || rep.k_star < rep.critical_k;
    return rep;
}

// ---- compressible signals --------------------------------------------------

struct CompressibleSignal {
    Signal signal;                   // after projection onto C
    std::vector<double> coefficients;   // θ before projection, f_raw = Wθ
    std::vector<double> raw;            // Wθ before projection
};

/// Weak-ℓq coefficients |θ_(j)| = ρ·I·j^{−1/q} with q = 1/(α + ½), random
/// signs and positions, mapped through the basis and projected onto
/// C = {f ⪰ cI·1, Σf = I}.
inline CompressibleSignal generate_compressible_signal(std::size_t m, double alpha, double rho, double intensity,
                                                       double c, Basis basis, std::uint64_t seed)
{
    pcs::detail::require(m >= 1, "compressible signal: m must be >= 1");
    pcs::detail::require(alpha >= 0.0 && rho > 0.0 && intensity > 0.0, "compressible signal: need alpha >= 0, rho > 0, I > 0");
    pcs::detail::require(c >= 0.0 && c * static_cast<double>(m) < 1.0, "compressible signal: infeasible c (need c*m < 1)");
    if (basis == Basis::Haar)
        pcs::detail::require(is_power_of_two(m), "compressible signal: Haar basis needs a power-of-two length");

    const double inv_q = alpha + 0.5;
    RandomStream rng(seed, streams::kSignal);
    std::vector<std::size_t> perm(m);
    std::iota(perm.begin(), perm.end(), std::size_t{0});
    for (std::size_t i = m; i > 1; --i) std::swap(perm[i - 1], perm[rng.below(i)]);

    std::vector<double> theta(m);
    for (std::size_t j = 0; j < m; ++j) {
        const double mag = rho * intensity * std::pow(static_cast<double>(j + 1), -inv_q);
        theta[perm[j]] = (rng() >> 63) ? -mag : mag;
    }
    auto raw = synthesize(theta, basis);
    auto projected = project_onto_C(raw, intensity, c);
    Signal sig{std::move(projected), intensity};
    return {std::move(sig), std::move(theta), std::move(raw)};
}

/// (1/I²)‖θ − θ^{(k)}‖² where θ^{(k)} keeps the k largest magnitudes
/// (ties go to the lower index).
inline double best_k_term_error(std::span<const double> theta, std::size_t k, double intensity)
{
    pcs::detail::require(k <= theta.size(), "best_k_term_error: k exceeds the vector length");
    pcs::detail::require(intensity > 0.0, "best_k_term_error: intensity must be positive");
    std::vector<std::size_t> order(theta.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return std::abs(theta[a]) > std::abs(theta[b]); });
    double err = 0.0;
    for (std::size_t r = k; r < order.size(); ++r) err += theta[order[r]] * theta[order[r]];
    return err / (intensity * intensity);
}

// ---- Monte-Carlo checks on the implied isotropic matrix ---------------------

/// Ã u for the matrix implied by `a`:
/// (Ãu)_i = (Σ_{j∈row i} u_j − (1−p)·Σ_j u_j) / √(N·p(1−p)).
inline std::vector<double> apply_isotropic(const SensingMatrix& a, std::span<const double> u)
{
    const double p = a.p();
    pcs::detail::require(p > 0.0 && p < 1.0, "isotropic map needs p in (0, 1)");
    pcs::detail::require(u.size() == a.n_cols(), "apply_isotropic: length mismatch");
    const double total = std::accumulate(u.begin(), u.end(), 0.0);
    const double scale = 1.0 / std::sqrt(static_cast<double>(a.n_rows()) * p * (1.0 - p));
    std::vector<double> out(a.n_rows());
    for (std::size_t i = 0; i < a.n_rows(); ++i) {
        double s = 0.0;
        for (auto j : a.row(i)) s += u[j];
        out[i] = (s - (1.0 - p) * total) * scale;
    }
    return out;
}

struct MomentEstimate {
    std::size_t samples = 0;
    double mean = 0.0;
    double mean_se = 0.0;
    double second_moment = 0.0;
    double second_moment_se = 0.0;
};

/// Sample mean and second moment of the implied Z entries of `a`, with
/// standard errors.
inline MomentEstimate implied_entry_moments(const SensingMatrix& a)
{
    const double p = a.p();
    pcs::detail::require(p > 0.0 && p < 1.0, "implied entries need p in (0, 1)");
    const double hi = SensingMatrix::implied_entry(true, p);
    const double lo = SensingMatrix::implied_entry(false, p);
    const double total = static_cast<double>(a.n_rows()) * static_cast<double>(a.n_cols());
    const double ones = static_cast<double>(a.nnz());
    const double zeros = total - ones;

    MomentEstimate est;
    est.samples = a.n_rows() * a.n_cols();
    est.mean = (ones * hi + zeros * lo) / total;
    est.second_moment = (ones * hi * hi + zeros * lo * lo) / total;
    const double fourth = (ones * std::pow(hi, 4) + zeros * std::pow(lo, 4)) / total;
    est.mean_se = std::sqrt(std::max(est.second_moment - est.mean * est.mean, 0.0) / total);
    est.second_moment_se = std::sqrt(std::max(fourth - est.second_moment * est.second_moment, 0.0) / total);
    return est;
}

namespace detail {

inline std::vector<double> random_unit_l2(std::size_t m, RandomStream& rng)
{
    std::vector<double> u(m);
    double nrm = 0.0;
    do {
        nrm = 0.0;
        for (auto& x : u) {
            x = rng.normal();
            nrm += x * x;
        }
    } while (nrm == 0.0);
    nrm = std::sqrt(nrm);
    for (auto& x : u) x /= nrm;
    return u;
}

// Random point with ‖u‖₁ = 1: Laplace entries, normalized.
inline std::vector<double> random_unit_l1(std::size_t m, RandomStream& rng)
{
    std::vector<double> u(m);
    double nrm = 0.0;
    for (auto& x : u) {
        const double e = -std::log(rng.uniform_open0());
        x = (rng() >> 63) ? -e : e;
        nrm += e;
    }
    for (auto& x : u) x /= nrm;
    return u;
}

inline double sq_norm(std::span<const double> v)
{
    double s = 0.0;
    for (double x : v) s += x * x;
    return s;
}

} // namespace detail

struct IsometryCheck {
    std::size_t vectors = 0;
    std::size_t satisfied = 0;
    double min_value = std::numeric_limits<double>::infinity();
    double max_value = -std::numeric_limits<double>::infinity();
    double mean_value = 0.0;
    double fraction() const noexcept { return vectors ? static_cast<double>(satisfied) / static_cast<double>(vectors) : 0.0; }
};

/// Fraction of random unit vectors u with 1/2 ≤ ‖Ãu‖² ≤ 3/2. Sample t uses
/// substream streams::kMonteCarlo + t.
inline IsometryCheck empirical_isometry_check(const SensingMatrix& a, std::size_t n_vectors, std::uint64_t seed)
{
    IsometryCheck res;
    res.vectors = n_vectors;
    double sum = 0.0;
    for (std::size_t t = 0; t < n_vectors; ++t) {
        RandomStream rng(seed, streams::kMonteCarlo + t);
        const auto u = detail::random_unit_l2(a.n_cols(), rng);
        const double v = detail::sq_norm(apply_isotropic(a, u));
        sum += v;
        res.min_value = std::min(res.min_value, v);
        res.max_value = std::max(res.max_value, v);
        if (v >= 0.5 && v <= 1.5) ++res.satisfied;
    }
    if (n_vectors) res.mean_value = sum / static_cast<double>(n_vectors);
    return res;
}

/// Fraction of random pairs u, v with ‖u‖₁ = ‖v‖₁ = 1 satisfying
/// ‖u − v‖² ≤ 4‖Ã(u − v)‖² + 2c₂²ζ⁴ log(c₂ζ⁴m/N)/N. `min_value` and
/// `max_value` track the slack (right side minus left side).
inline IsometryCheck empirical_pair_check(const SensingMatrix& a, std::size_t n_pairs, std::uint64_t seed,
                                          double c2 = 1.0)
{
    const double z4 = std::pow(zeta(a.p()), 4.0);
    const double m = static_cast<double>(a.n_cols());
    const double n = static_cast<double>(a.n_rows());
    const double additive = 2.0 * c2 * c2 * z4 * std::log(c2 * z4 * m / n) / n;
    IsometryCheck res;
    res.vectors = n_pairs;
    double sum = 0.0;
    for (std::size_t t = 0; t < n_pairs; ++t) {
        RandomStream rng(seed, streams::kMonteCarlo + t);
        const auto u = detail::random_unit_l1(a.n_cols(), rng);
        const auto v = detail::random_unit_l1(a.n_cols(), rng);
        std::vector<double> d(u.size());
        for (std::size_t j = 0; j < d.size(); ++j) d[j] = u[j] - v[j];
        const double slack = 4.0 * detail::sq_norm(apply_isotropic(a, d)) + additive - detail::sq_norm(d);
        sum += slack;
        res.min_value = std::min(res.min_value, slack);
        res.max_value = std::max(res.max_value, slack);
        if (slack >= 0.0) ++res.satisfied;
    }
    if (n_pairs) res.mean_value = sum / static_cast<double>(n_pairs);
    return res;
}

} // namespace pcs::theory
