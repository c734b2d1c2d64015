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

// Penalized Poisson likelihood reconstruction
//
//     minimize φ(f) + τ·pen(f)  subject to f ⪰ 0,   φ(f) = Σ_j (Af)_j − y_j log (Af)_j
//
// by a sequence of separable quadratic subproblems: each iteration denoises
// the gradient step f − ∇φ(f)/η with penalty weight 2τ/η. η comes from a
// Barzilai-Borwein ratio and is increased until the penalized objective does
// not go up.

#pragma once

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include "pcs/error.hpp"
#include "pcs/io.hpp"
#include "pcs/model.hpp"
#include "pcs/penalties.hpp"
#include "pcs/sensing.hpp"

namespace pcs {

enum class Penalty { Rdp, RdpTi, L1Identity, L1Haar };

inline std::string to_string(Penalty p)
{
    switch (p) {
    case Penalty::Rdp: return "rdp";
    case Penalty::RdpTi: return "rdp-ti";
    case Penalty::L1Identity: return "l1";
    case Penalty::L1Haar: return "l1-haar";
    }
    return "?";
}

inline Penalty parse_penalty(std::string_view s)
{
    if (s == "rdp") return Penalty::Rdp;
    if (s == "rdp-ti") return Penalty::RdpTi;
    if (s == "l1") return Penalty::L1Identity;
    if (s == "l1-haar") return Penalty::L1Haar;
    throw ValidationError("unknown penalty '" + std::string(s) + "' (expected rdp, rdp-ti, l1 or l1-haar)");
}

inline bool is_partition_penalty(Penalty p) { return p == Penalty::Rdp || p == Penalty::RdpTi; }

struct SolverConfig {
    double tau = 1.0;
    Penalty penalty = Penalty::RdpTi;
    std::size_t max_iters = 10000;
    double time_budget_seconds = 0.0;   // 0 = unlimited
    double rel_obj_tol = 1e-8;
    double eta_min = 1e-30;
    double eta_max = 1e30;
    bool bb_enabled = true;
    double backtrack_factor = 2.0;
    bool renormalize_output = false;
    std::uint64_t seed = 0;   // recorded for provenance; the iteration itself is deterministic
    LeafCode leaf_code = LeafCode::Kraft;
    /// Known total intensity, used for the log floor. Estimated from the
    /// counts when absent.
    std::optional<double> intensity;
    /// Cycle-spun penalty only: keep one partition fit per shift across
    /// iterations instead of refitting every shift from the averaged iterate.
    bool ti_per_shift_state = true;

    void validate() const
    {
        detail::require(tau >= 0.0 && std::isfinite(tau), "solver: tau must be finite and >= 0");
        detail::require(max_iters >= 1, "solver: max_iters must be >= 1");
        detail::require(time_budget_seconds >= 0.0, "solver: time budget must be >= 0");
        detail::require(rel_obj_tol >= 0.0, "solver: rel_obj_tol must be >= 0");
        detail::require(eta_min > 0.0 && eta_min <= eta_max, "solver: need 0 < eta_min <= eta_max");
        detail::require(backtrack_factor > 1.0, "solver: backtrack_factor must exceed 1");
    }
};

enum class Termination { MaxIterations, TimeBudget, Converged, FixedPoint, NoDescent };

inline std::string to_string(Termination t)
{
    switch (t) {
    case Termination::MaxIterations: return "max-iterations";
    case Termination::TimeBudget: return "time-budget";
    case Termination::Converged: return "converged";
    case Termination::FixedPoint: return "fixed-point";
    case Termination::NoDescent: return "no-descent";
    }
    return "?";
}

struct IterationRecord {
    std::size_t iter = 0;
    double eta = 0.0;
    double objective = 0.0;
    double phi = 0.0;
    std::size_t backtracks = 0;
    double elapsed_s = 0.0;
};

struct SolveTrace {
    std::vector<IterationRecord> records;   // records[0] is the starting point
    std::vector<double> estimate;
    Termination termination = Termination::MaxIterations;

    std::size_t iterations() const noexcept { return records.empty() ? 0 : records.size() - 1; }
    double final_objective() const { return records.back().objective; }
};

/// CSV with header iter,eta,objective,phi,backtracks,elapsed_s.
inline void write_trace_csv(std::ostream& os, const SolveTrace& t)
{
    os << "iter,eta,objective,phi,backtracks,elapsed_s\n";
    for (const auto& r : t.records)
        os << r.iter << ',' << io::format_double(r.eta) << ',' << io::format_double(r.objective) << ','
           << io::format_double(r.phi) << ',' << r.backtracks << ',' << io::format_double(r.elapsed_s) << '\n';
}

/// Starting point shared by every arm: z = Aᵀy, x = y ⊘ Az,
/// f⁰ = z ⊙ Aᵀx ⊘ Aᵀ1. Zero denominators give zero entries; y = 0 gives 0.
template <class Counts>
std::vector<double> initialize(const Counts& y, const SensingMatrix& a)
{
    detail::require(y.size() == a.n_rows(), "initialize: count vector length does not match matrix rows");
    std::vector<double> yd(y.size());
    for (std::size_t i = 0; i < y.size(); ++i) yd[i] = static_cast<double>(y[i]);

    const auto z = pcs::apply_adjoint(a, yd);
    const auto az = pcs::apply(a, z);
    std::vector<double> x(a.n_rows(), 0.0);
    for (std::size_t i = 0; i < x.size(); ++i)
        if (az[i] > 0.0) x[i] = yd[i] / az[i];
    const auto atx = pcs::apply_adjoint(a, x);
    const auto at1 = pcs::apply_adjoint(a, std::vector<double>(a.n_rows(), 1.0));
    std::vector<double> f0(a.n_cols(), 0.0);
    for (std::size_t j = 0; j < f0.size(); ++j)
        if (at1[j] > 0.0) f0[j] = z[j] * atx[j] / at1[j];
    return f0;
}

/// Estimate of ‖f‖₁ from counts: Σy scaled by m/Σ_j(Aᵀ1)_j, which undoes
/// the average column mass of A.
template <class Counts>
double intensity_estimate(const Counts& y, const SensingMatrix& a)
{
    double total = 0.0;
    for (auto v : y) total += static_cast<double>(v);
    const double mass = static_cast<double>(a.nnz()) / static_cast<double>(a.n_rows());
    return mass > 0.0 ? total * static_cast<double>(a.n_cols()) / mass : 0.0;
}

/// R(f*, f̂) = ‖f̂ − f*‖²₂ / I².
inline double risk(std::span<const double> f_hat, const Signal& f_star)
{
    detail::require(f_hat.size() == f_star.size(), "risk: length mismatch");
    detail::require(f_star.total_intensity > 0.0, "risk: total intensity must be positive");
    double s = 0.0;
    for (std::size_t i = 0; i < f_hat.size(); ++i) {
        const double d = f_hat[i] - f_star.values[i];
        s += d * d;
    }
    return s / (f_star.total_intensity * f_star.total_intensity);
}

/// The penalty term and its matching subproblem solver for one penalty kind.
///
/// The cycle-spun variant can carry one partition fit per circular shift
/// across iterations (`per_shift_state`). Each shift then refits its own
/// previous fit moved by the common gradient step, and the penalty charged
/// is the mean leaf count of those fits. Their average is the iterate.
class Regularizer {
public:
    Regularizer(Penalty kind, std::size_t n, LeafCode code, bool per_shift_state = false)
        : kind_(kind), n_(n), per_shift_(kind == Penalty::RdpTi && per_shift_state && n > 1)
    {
        if (is_partition_penalty(kind) || kind == Penalty::L1Haar)
            detail::require(is_power_of_two(n), to_string(kind) + " penalty needs a power-of-two signal length");
        leaf_cost_ = leaf_penalty(n, code);
    }

    /// pen(f). Partition penalties charge per leaf of the coarsest dyadic
    /// partition that represents f exactly (averaged over circular shifts
    /// for the translation-invariant variant).
    double penalty(std::span<const double> f) const
    {
        switch (kind_) {
        case Penalty::Rdp: return leaf_cost_ * static_cast<double>(dyadic_leaf_count(f));
        case Penalty::RdpTi: return leaf_cost_ * shift_averaged_leaf_count(f);
        case Penalty::L1Identity: return l1_norm_in_basis(f, Basis::Identity);
        case Penalty::L1Haar: return l1_norm_in_basis(f, Basis::Haar);
        }
        return 0.0;
    }

    /// Sets the iterate that the next denoise() call starts from. With
    /// per-shift state every shift's fit is set to f.
    void reset(std::span<const double> f)
    {
        base_.assign(f.begin(), f.end());
        if (!per_shift_) return;
        const std::size_t half = n_ / 2;
        fits_.assign(half, base_);
        cand_.assign(half, std::vector<double>(n_));
    }

    /// Makes the output of the last denoise() call the current iterate.
    void accept(std::span<const double> out)
    {
        base_.assign(out.begin(), out.end());
        if (per_shift_) fits_.swap(cand_);
    }

    /// argmin_{f ⪰ 0} ‖s − f‖² + tau_eff·pen(f) (exact for Rdp and
    /// L1Identity; the TI and Haar variants clip the unconstrained answer).
    std::vector<double> denoise(std::span<const double> s, double tau_eff)
    {
        std::vector<double> out;
        switch (kind_) {
        case Penalty::Rdp:
            out = rdp_denoise(s, tau_eff * leaf_cost_, LeafFit::NonnegativeMean).as_vector();
            break;
        case Penalty::RdpTi:
            if (per_shift_) {
                out = denoise_per_shift(s, tau_eff * leaf_cost_);
            } else {
                out = spinner_.denoise(s, tau_eff * leaf_cost_, LeafFit::NonnegativeMean);
                last_penalty_ = leaf_cost_ * spinner_.mean_leaf_count();
            }
            break;
        case Penalty::L1Identity:
            out = soft_threshold_basis(s, tau_eff, Basis::Identity);
            break;
        case Penalty::L1Haar:
            out = soft_threshold_basis(s, tau_eff, Basis::Haar);
            break;
        }
        for (auto& x : out) x = std::max(x, 0.0);
        return out;
    }

    double leaf_cost() const noexcept { return leaf_cost_; }

    /// Penalty charged to the output of the last denoise() call. Differs
    /// from penalty(output) only for the cycle-spun variant, whose output is
    /// charged the mean leaf count of the per-shift partitions it averages.
    double penalty_of_last(std::span<const double> out) const
    {
        return kind_ == Penalty::RdpTi ? last_penalty_ : penalty(out);
    }

private:
    // Shifts s and s + n/2 see the same input up to a half-length rotation,
    // which leaves the root split in place, so only n/2 fits are kept.
    std::vector<double> denoise_per_shift(std::span<const double> s, double gamma)
    {
        detail::require(base_.size() == n_ && s.size() == n_, "regularizer: reset() before denoise()");
        const std::size_t half = n_ / 2, mask = n_ - 1;
        std::vector<double> out(n_, 0.0), v(n_);
        std::size_t leaves = 0;
        for (std::size_t k = 0; k < half; ++k) {
            const auto& prev = fits_[k];
            for (std::size_t j = 0; j < n_; ++j) v[j] = s[j] + (prev[j] - base_[j]);
            pruner_.fit(n_, gamma, LeafFit::NonnegativeMean, [&](std::size_t i) { return v[(i + k) & mask]; });
            pruner_.leaves(leaf_buf_);
            leaves += leaf_buf_.size();
            auto& fit = cand_[k];
            for (const auto& l : leaf_buf_)
                for (std::size_t i = l.start; i < l.start + l.length; ++i) fit[(i + k) & mask] = l.level;
            for (std::size_t j = 0; j < n_; ++j) out[j] += fit[j];
        }
        for (auto& x : out) x /= static_cast<double>(half);
        last_penalty_ = leaf_cost_ * static_cast<double>(leaves) / static_cast<double>(half);
        return out;
    }

    Penalty kind_;
    std::size_t n_;
    bool per_shift_;
    double leaf_cost_ = 1.0;
    double last_penalty_ = 0.0;
    CycleSpinner spinner_;
    detail::RdpPruner pruner_;
    std::vector<PartitionLeaf> leaf_buf_;
    std::vector<double> base_;
    std::vector<std::vector<double>> fits_, cand_;
};

namespace detail {

inline double dot(std::span<const double> a, std::span<const double> b)
{
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
    return s;
}

} // namespace detail

/// Runs the solver from `f0` (or from initialize() when f0 is empty).
template <class Counts>
SolveTrace solve(const Counts& y, const SensingMatrix& a, const SolverConfig& cfg, std::vector<double> f0 = {})
{
    cfg.validate();
    detail::require(y.size() == a.n_rows(), "solve: count vector length does not match matrix rows");
    using clock = std::chrono::steady_clock;
    const auto t0 = clock::now();
    const auto elapsed = [&] { return std::chrono::duration<double>(clock::now() - t0).count(); };

    const std::size_t m = a.n_cols();
    Regularizer reg(cfg.penalty, m, cfg.leaf_code, cfg.ti_per_shift_state);
    const double floor = log_floor(cfg.intensity.value_or(intensity_estimate(y, a)), a.n_rows());

    std::vector<double> f = f0.empty() ? initialize(y, a) : std::move(f0);
    detail::require(f.size() == m, "solve: starting point length does not match matrix columns");
    for (auto& x : f) x = std::max(x, 0.0);
    reg.reset(f);

    std::vector<double> af = pcs::apply(a, f);
    std::vector<double> grad(m), grad_new(m), step(m), af_new(a.n_rows());

    const auto objective = [&](double pen, std::span<const double> ax, double& phi) {
        phi = neg_log_likelihood(y, ax, floor);
        const double obj = phi + (cfg.tau > 0.0 ? cfg.tau * pen : 0.0);
        if (!std::isfinite(obj)) throw SolverAbort("solver: objective is not finite");
        return obj;
    };

    SolveTrace trace;
    double phi = 0.0;
    double obj = objective(cfg.tau > 0.0 ? reg.penalty(f) : 0.0, af, phi);
    nll_gradient(y, a, af, grad, floor);

    const double gnorm = std::sqrt(detail::dot(grad, grad));
    const double fnorm = std::sqrt(detail::dot(f, f));
    double eta = std::clamp(gnorm / (fnorm + 1e-12), cfg.eta_min, cfg.eta_max);
    trace.records.push_back({0, eta, obj, phi, 0, elapsed()});

    std::size_t small_changes = 0;
    trace.termination = Termination::MaxIterations;
    for (std::size_t k = 1; k <= cfg.max_iters; ++k) {
        if (cfg.time_budget_seconds > 0.0 && elapsed() >= cfg.time_budget_seconds) {
            trace.termination = Termination::TimeBudget;
            break;
        }
        std::size_t backtracks = 0;
        std::vector<double> f_new;
        double phi_new = 0.0, obj_new = 0.0;
        bool accepted = false;
        for (;;) {
            for (std::size_t j = 0; j < m; ++j) step[j] = f[j] - grad[j] / eta;
            f_new = reg.denoise(step, 2.0 * cfg.tau / eta);
            pcs::apply(a, f_new, af_new);
            obj_new = objective(cfg.tau > 0.0 ? reg.penalty_of_last(f_new) : 0.0, af_new, phi_new);
            if (obj_new <= obj) {
                accepted = true;
                break;
            }
            if (eta >= cfg.eta_max) break;
            eta = std::min(eta * cfg.backtrack_factor, cfg.eta_max);
            ++backtracks;
        }
        if (!accepted) {
            trace.termination = Termination::NoDescent;
            break;
        }
        if (f_new == f) {
            trace.termination = Termination::FixedPoint;
            break;
        }

        nll_gradient(y, a, af_new, grad_new, floor);
        double dxdx = 0.0, dxdg = 0.0;
        for (std::size_t j = 0; j < m; ++j) {
            const double dx = f_new[j] - f[j];
            dxdx += dx * dx;
            dxdg += dx * (grad_new[j] - grad[j]);
        }
        trace.records.push_back({k, eta, obj_new, phi_new, backtracks, elapsed()});

        const double rel = std::abs(obj - obj_new) / std::max(std::abs(obj_new), 1e-300);
        small_changes = rel < cfg.rel_obj_tol ? small_changes + 1 : 0;

        reg.accept(f_new);
        f.swap(f_new);
        af.swap(af_new);
        grad.swap(grad_new);
        obj = obj_new;
        if (cfg.bb_enabled) eta = std::clamp(dxdx > 0.0 ? dxdg / dxdx : cfg.eta_min, cfg.eta_min, cfg.eta_max);

        if (small_changes >= 5) {
            trace.termination = Termination::Converged;
            break;
        }
    }

    if (cfg.renormalize_output) {
        const double total = std::accumulate(f.begin(), f.end(), 0.0);
        const double target = cfg.intensity.value_or(intensity_estimate(y, a));
        if (total > 0.0 && target > 0.0)
            for (auto& x : f) x *= target / total;
    }
    trace.estimate = std::move(f);
    return trace;
}

} // namespace pcs
