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

// Experiment runner: builds the test signal and sensing matrix, simulates
// replicate count vectors, runs every solver arm over a τ grid, and reports
// the risk of each run plus the best-τ summary per arm.

#pragma once

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <exception>
#include <istream>
#include <map>
#include <mutex>
#include <ostream>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "pcs/error.hpp"
#include "pcs/io.hpp"
#include "pcs/model.hpp"
#include "pcs/penalties.hpp"
#include "pcs/random.hpp"
#include "pcs/sensing.hpp"
#include "pcs/spiral.hpp"
#include "pcs/theory.hpp"

namespace pcs::harness {

enum class SignalKind { Constant, PiecewiseConstant, PiecewiseSmooth, Compressible };

inline SignalKind parse_signal_kind(std::string_view s)
{
    if (s == "constant") return SignalKind::Constant;
    if (s == "piecewise-constant") return SignalKind::PiecewiseConstant;
    if (s == "piecewise-smooth") return SignalKind::PiecewiseSmooth;
    if (s == "compressible") return SignalKind::Compressible;
    throw ValidationError("unknown signal kind '" + std::string(s) + "'");
}

struct SignalSpec {
    SignalKind kind = SignalKind::PiecewiseConstant;
    std::size_t m = 1024;
    double intensity = 8.2e5;
    std::size_t segments = 8;
    std::uint64_t seed = 1;
    // compressible signals only
    double alpha = 1.0;
    double rho = 1.0;
    double c = 0.0;
    Basis basis = Basis::Haar;
};

struct MatrixSpec {
    std::size_t rows = 512;
    std::size_t row_weight = 32;   // 0 selects IID Bernoulli entries with probability 1 − p
    double p = 0.5;
    std::uint64_t seed = 1;

    RowScheme scheme() const { return row_weight > 0 ? RowScheme::fixed(row_weight) : RowScheme::iid(); }
};

struct Arm {
    std::string name;
    SolverConfig solver;
    std::vector<double> taus;   // absolute τ values; empty: the shared grid times tau_scale()
};

enum class SweepAxis { None, Detectors, Intensity };

inline std::string to_string(SweepAxis a)
{
    switch (a) {
    case SweepAxis::None: return "none";
    case SweepAxis::Detectors: return "N";
    case SweepAxis::Intensity: return "I";
    }
    return "?";
}

inline SweepAxis parse_axis(std::string_view s)
{
    if (s == "none" || s.empty()) return SweepAxis::None;
    if (s == "N") return SweepAxis::Detectors;
    if (s == "I") return SweepAxis::Intensity;
    throw ValidationError("unknown sweep axis '" + std::string(s) + "' (expected N or I)");
}

struct ExperimentConfig {
    SignalSpec signal;
    MatrixSpec matrix;
    std::uint64_t noise_seed = 7;
    std::vector<Arm> arms;
    std::vector<double> taus;   // shared τ grid, relative to tau_scale()
    std::size_t replicates = 4;
    SweepAxis axis = SweepAxis::None;
    std::vector<double> values;
    unsigned threads = 1;

    void validate() const
    {
        pcs::detail::require(signal.m >= 1 && matrix.rows >= 1, "experiment: dimensions must be positive");
        pcs::detail::require(replicates >= 1, "experiment: replicates must be >= 1");
        pcs::detail::require(!arms.empty(), "experiment: at least one solver arm is required");
        for (const auto& arm : arms) {
            if (is_partition_penalty(arm.solver.penalty) || arm.solver.penalty == Penalty::L1Haar)
                pcs::detail::require(is_power_of_two(signal.m),
                                "experiment: arm '" + arm.name + "' needs a power-of-two signal length");
            pcs::detail::require(!(arm.taus.empty() && taus.empty()), "experiment: arm '" + arm.name + "' has no tau values");
            arm.solver.validate();
        }
        for (std::size_t i = 1; i < values.size(); ++i)
            pcs::detail::require(values[i] > values[i - 1], "sweep: values must be ascending");
        for (double v : values) pcs::detail::require(v > 0.0, "sweep: values must be positive");
    }
};

/// n log-spaced values from lo to hi inclusive.
inline std::vector<double> log_grid(double lo, double hi, std::size_t n)
{
    pcs::detail::require(lo > 0.0 && hi >= lo && n >= 1, "log_grid: need 0 < lo <= hi and n >= 1");
    std::vector<double> g(n);
    if (n == 1) {
        g[0] = lo;
        return g;
    }
    const double a = std::log10(lo), b = std::log10(hi);
    for (std::size_t i = 0; i < n; ++i) g[i] = std::pow(10.0, a + (b - a) * static_cast<double>(i) / static_cast<double>(n - 1));
    return g;
}

/// Seeded test waveform: m samples, `segments`
/// constant pieces between random cut points with levels in [0.05, 1),
/// rescaled to total intensity I. The smooth variant replaces the two
/// samples at each cut with a 3-tap moving average.
inline Signal make_test_signal(const SignalSpec& spec)
{
    pcs::detail::require(spec.m >= 1, "signal: m must be >= 1");
    pcs::detail::require(spec.intensity > 0.0 && std::isfinite(spec.intensity), "signal: intensity must be positive");
    const std::size_t m = spec.m;
    std::vector<double> v(m, 1.0);

    switch (spec.kind) {
    case SignalKind::Constant: break;
    case SignalKind::Compressible:
        return theory::generate_compressible_signal(m, spec.alpha, spec.rho, spec.intensity, spec.c, spec.basis,
                                                    spec.seed)
            .signal;
    case SignalKind::PiecewiseConstant:
    case SignalKind::PiecewiseSmooth: {
        pcs::detail::require(spec.segments >= 1 && spec.segments <= m, "signal: need 1 <= segments <= m");
        RandomStream rng(spec.seed, streams::kSignal);
        // segments − 1 distinct cut points in [1, m − 1] (Floyd).
        std::vector<std::size_t> cuts;
        const std::size_t pool = m - 1, want = spec.segments - 1;
        for (std::size_t j = pool - want; j < pool; ++j) {
            const std::size_t t = rng.below(j + 1);
            const bool taken = std::find(cuts.begin(), cuts.end(), t + 1) != cuts.end();
            cuts.push_back(taken ? j + 1 : t + 1);
        }
        std::sort(cuts.begin(), cuts.end());
        std::size_t seg = 0;
        double level = 0.05 + 0.95 * rng.uniform();
        for (std::size_t i = 0; i < m; ++i) {
            if (seg < cuts.size() && i == cuts[seg]) {
                ++seg;
                level = 0.05 + 0.95 * rng.uniform();
            }
            v[i] = level;
        }
        if (spec.kind == SignalKind::PiecewiseSmooth) {
            const auto base = v;
            for (auto b : cuts)
                for (std::size_t i : {b - 1, b}) {
                    const double left = base[i == 0 ? 0 : i - 1];
                    const double right = base[std::min(i + 1, m - 1)];
                    v[i] = (left + base[i] + right) / 3.0;
                }
        }
        break;
    }
    }
    double sum = 0.0;
    for (double x : v) sum += x;
    const double scale = spec.intensity / sum;
    for (auto& x : v) x *= scale;
    return Signal{std::move(v), spec.intensity};
}

struct RunRow {
    std::size_t arm = 0;
    double tau = 0.0;
    std::size_t replicate = 0;
    double risk = 0.0;
    double objective = 0.0;
    std::size_t iterations = 0;
    double elapsed_s = 0.0;
    Termination termination = Termination::MaxIterations;
    bool objective_monotone = true;   // accepted objectives never increased
};

struct ArmSummary {
    std::string arm;
    double best_tau = 0.0;
    double risk_mean = 0.0;
    double risk_sd = 0.0;
    std::size_t replicates = 0;
    std::vector<double> taus;          // grid used by this arm
    std::vector<double> mean_by_tau;   // replicate mean of risk per τ
};

struct RiskReport {
    std::vector<RunRow> rows;   // canonical order: arm, τ, replicate
    std::vector<ArmSummary> arms;
    std::vector<std::uint64_t> replicate_seeds;
    std::vector<double> mean_counts;   // mean detector count per replicate
};

/// Noise seed of replicate r.
inline std::uint64_t replicate_seed(std::uint64_t base, std::size_t r) { return derive_seed(base, r); }

namespace detail {

inline double mean(std::span<const double> v)
{
    double s = 0.0;
    for (double x : v) s += x;
    return v.empty() ? 0.0 : s / static_cast<double>(v.size());
}

inline double sample_sd(std::span<const double> v)
{
    if (v.size() < 2) return 0.0;
    const double mu = mean(v);
    double s = 0.0;
    for (double x : v) s += (x - mu) * (x - mu);
    return std::sqrt(s / static_cast<double>(v.size() - 1));
}

// Runs fn(0..count-1) on up to `threads` workers; rethrows the first error.
template <class Fn>
void parallel_for(std::size_t count, unsigned threads, Fn&& fn)
{
    if (threads <= 1 || count <= 1) {
        for (std::size_t i = 0; i < count; ++i) fn(i);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::exception_ptr error;
    std::mutex error_mutex;
    std::vector<std::thread> pool;
    for (unsigned t = 0; t < std::min<std::size_t>(threads, count); ++t)
        pool.emplace_back([&] {
            for (std::size_t i; (i = next.fetch_add(1)) < count;) {
                try {
                    fn(i);
                } catch (...) {
                    std::lock_guard lock(error_mutex);
                    if (!error) error = std::current_exception();
                }
            }
        });
    for (auto& th : pool) th.join();
    if (error) std::rethrow_exception(error);
}

} // namespace detail

/// Recomputes the per-arm summaries from rows (also used to build them).
inline std::vector<ArmSummary> summarize(const std::vector<RunRow>& rows, const std::vector<Arm>& arms,
                                         const std::vector<std::vector<double>>& grids, std::size_t replicates)
{
    std::vector<ArmSummary> out;
    for (std::size_t a = 0; a < arms.size(); ++a) {
        ArmSummary s;
        s.arm = arms[a].name;
        s.taus = grids[a];
        s.replicates = replicates;
        std::vector<std::vector<double>> by_tau(grids[a].size());
        for (const auto& r : rows) {
            if (r.arm != a) continue;
            const auto it = std::find(grids[a].begin(), grids[a].end(), r.tau);
            by_tau[static_cast<std::size_t>(it - grids[a].begin())].push_back(r.risk);
        }
        std::size_t best = 0;
        for (std::size_t t = 0; t < by_tau.size(); ++t) {
            s.mean_by_tau.push_back(detail::mean(by_tau[t]));
            if (s.mean_by_tau[t] < s.mean_by_tau[best]) best = t;
        }
        s.best_tau = grids[a][best];
        s.risk_mean = s.mean_by_tau[best];
        s.risk_sd = detail::sample_sd(by_tau[best]);
        out.push_back(std::move(s));
    }
    return out;
}

/// Scale the shared τ grid is relative to. Leaf penalties are counted in
/// the same nats as φ, so their scale is 1. For ℓ1 penalties it is the mean
/// column mass of A, the typical size of a gradient entry.
inline double tau_scale(Penalty p, const SensingMatrix& a)
{
    if (is_partition_penalty(p)) return 1.0;
    return static_cast<double>(a.nnz()) / (static_cast<double>(a.n_rows()) * static_cast<double>(a.n_cols()));
}

inline RiskReport run_experiment(const ExperimentConfig& cfg)
{
    cfg.validate();
    const Signal truth = make_test_signal(cfg.signal);
    const SensingMatrix a =
        build_matrix(cfg.matrix.rows, cfg.signal.m, cfg.matrix.p, cfg.matrix.scheme(), cfg.matrix.seed);
    const auto mu = pcs::apply(a, truth.values);

    RiskReport rep;
    std::vector<CountVector> counts;
    for (std::size_t r = 0; r < cfg.replicates; ++r) {
        rep.replicate_seeds.push_back(replicate_seed(cfg.noise_seed, r));
        counts.push_back(sample_poisson(mu, rep.replicate_seeds.back()));
        rep.mean_counts.push_back(total_count(counts.back()) / static_cast<double>(a.n_rows()));
    }

    std::vector<std::vector<double>> grids;
    for (const auto& arm : cfg.arms) {
        if (!arm.taus.empty()) {
            grids.push_back(arm.taus);
            continue;
        }
        const double scale = tau_scale(arm.solver.penalty, a);
        auto g = cfg.taus;
        for (auto& t : g) t *= scale;
        grids.push_back(std::move(g));
    }

    for (std::size_t ai = 0; ai < cfg.arms.size(); ++ai)
        for (double tau : grids[ai])
            for (std::size_t r = 0; r < cfg.replicates; ++r) rep.rows.push_back({ai, tau, r});

    detail::parallel_for(rep.rows.size(), cfg.threads, [&](std::size_t idx) {
        RunRow& row = rep.rows[idx];
        SolverConfig sc = cfg.arms[row.arm].solver;
        sc.tau = row.tau;
        sc.intensity = truth.total_intensity;
        try {
            const auto trace = solve(counts[row.replicate], a, sc);
            row.risk = risk(trace.estimate, truth);
            row.objective = trace.final_objective();
            row.iterations = trace.iterations();
            row.elapsed_s = trace.records.back().elapsed_s;
            row.termination = trace.termination;
            for (std::size_t k = 1; k < trace.records.size(); ++k)
                if (trace.records[k].objective > trace.records[k - 1].objective) row.objective_monotone = false;
        } catch (const SolverAbort& e) {
            throw SolverAbort(std::string(e.what()) + " [arm " + cfg.arms[row.arm].name + ", tau " +
                              io::format_double(row.tau) + ", replicate " + std::to_string(row.replicate) + "]");
        }
    });

    rep.arms = summarize(rep.rows, cfg.arms, grids, cfg.replicates);
    return rep;
}

/// Per-run rows: arm,tau,replicate,risk,objective,iterations,termination.
/// Wall-clock time is left out so the file is reproducible.
inline void write_rows_csv(std::ostream& os, const RiskReport& rep, const std::vector<Arm>& arms)
{
    os << "arm,tau,replicate,risk,objective,iterations,termination\n";
    for (const auto& r : rep.rows)
        os << arms[r.arm].name << ',' << io::format_double(r.tau) << ',' << r.replicate << ','
           << io::format_double(r.risk) << ',' << io::format_double(r.objective) << ',' << r.iterations << ','
           << to_string(r.termination) << '\n';
}

struct SweepRow {
    SweepAxis axis = SweepAxis::None;
    double value = 0.0;
    ArmSummary summary;
};

inline void write_sweep_header(std::ostream& os) { os << "axis,value,arm,tau_best,risk_mean,risk_sd,replicates\n"; }

inline void write_sweep_row(std::ostream& os, const SweepRow& r)
{
    os << to_string(r.axis) << ',' << io::format_double(r.value) << ',' << r.summary.arm << ','
       << io::format_double(r.summary.best_tau) << ',' << io::format_double(r.summary.risk_mean) << ','
       << io::format_double(r.summary.risk_sd) << ',' << r.summary.replicates << '\n';
}

/// The configuration with the swept quantity set to `value`.
inline ExperimentConfig at_sweep_value(ExperimentConfig cfg, SweepAxis axis, double value)
{
    if (axis == SweepAxis::Detectors) {
        pcs::detail::require(value >= 1.0 && value == std::floor(value), "sweep: N values must be positive integers");
        cfg.matrix.rows = static_cast<std::size_t>(value);
    } else if (axis == SweepAxis::Intensity) {
        cfg.signal.intensity = value;
    }
    return cfg;
}

/// One RiskReport per value; rows come out in value order, then arm order.
/// With axis None the configured experiment runs once.
inline std::vector<SweepRow> sweep(const ExperimentConfig& cfg, SweepAxis axis, const std::vector<double>& values,
                                   std::vector<RiskReport>* reports = nullptr)
{
    std::vector<double> vals = values;
    if (axis == SweepAxis::None) {
        vals = {0.0};
    } else {
        pcs::detail::require(!vals.empty(), "sweep: no values given");
        for (std::size_t i = 0; i < vals.size(); ++i) {
            pcs::detail::require(vals[i] > 0.0, "sweep: values must be positive");
            pcs::detail::require(i == 0 || vals[i] > vals[i - 1], "sweep: values must be ascending");
        }
    }
    std::vector<SweepRow> out;
    for (double v : vals) {
        const auto rep = run_experiment(at_sweep_value(cfg, axis, v));
        for (const auto& s : rep.arms) out.push_back({axis, v, s});
        if (reports) reports->push_back(rep);
    }
    return out;
}

inline std::string sweep_csv(const std::vector<SweepRow>& rows)
{
    std::ostringstream os;
    write_sweep_header(os);
    for (const auto& r : rows) write_sweep_row(os, r);
    return os.str();
}

// ---- configuration file ------------------------------------------------------
//
// key = value lines grouped in sections [signal] [matrix] [solver.<arm>]
// [sweep]. '#' and ';' start comments. Lists are comma separated.

namespace detail {

inline std::string trim(std::string_view s)
{
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string_view::npos) return {};
    const auto e = s.find_last_not_of(" \t\r");
    return std::string(s.substr(b, e - b + 1));
}

inline std::vector<double> parse_list(std::string_view s, std::string_view what)
{
    std::vector<double> out;
    std::size_t pos = 0;
    while (pos <= s.size()) {
        const auto comma = s.find(',', pos);
        const auto tok = trim(s.substr(pos, comma == std::string_view::npos ? std::string_view::npos : comma - pos));
        if (!tok.empty()) out.push_back(io::parse_double(tok, what));
        if (comma == std::string_view::npos) break;
        pos = comma + 1;
    }
    return out;
}

inline bool parse_bool(std::string_view s)
{
    if (s == "true" || s == "1" || s == "yes" || s == "on") return true;
    if (s == "false" || s == "0" || s == "no" || s == "off") return false;
    throw ValidationError("cannot parse boolean from '" + std::string(s) + "'");
}

inline std::size_t parse_size(std::string_view s, std::string_view what)
{
    return static_cast<std::size_t>(io::parse_u64(s, what));
}

} // namespace detail

/// Defaults: m = 1024, N = 512, 32 nonzeros per row, I = 8.2e5, four replicates.
inline ExperimentConfig default_config()
{
    ExperimentConfig cfg;
    cfg.taus = log_grid(1e-3, 1e3, 12);
    for (auto pen : {Penalty::Rdp, Penalty::RdpTi}) {
        Arm arm;
        arm.name = to_string(pen);
        arm.solver.penalty = pen;
        arm.solver.max_iters = 500;
        cfg.arms.push_back(arm);
    }
    return cfg;
}

inline ExperimentConfig parse_config(std::istream& is)
{
    ExperimentConfig cfg = default_config();
    bool arms_given = false;
    double tau_min = 1e-3, tau_max = 1e3;
    std::size_t tau_points = 12;
    bool grid_given = false;
    std::map<std::string, std::size_t> arm_index;

    std::string section, line;
    std::size_t lineno = 0;
    while (std::getline(is, line)) {
        ++lineno;
        const auto hash = line.find_first_of("#;");
        auto text = detail::trim(std::string_view(line).substr(0, hash));
        if (text.empty()) continue;
        const auto where = " (line " + std::to_string(lineno) + ")";
        if (text.front() == '[') {
            pcs::detail::require(text.back() == ']', "config: malformed section header" + where);
            section = detail::trim(std::string_view(text).substr(1, text.size() - 2));
            if (section.starts_with("solver.")) {
                if (!arms_given) {
                    cfg.arms.clear();
                    arms_given = true;
                }
                const auto name = section.substr(7);
                pcs::detail::require(!name.empty() && !arm_index.count(name), "config: bad or duplicate arm name" + where);
                Arm arm;
                arm.name = name;
                arm.solver.max_iters = 500;
                arm_index[name] = cfg.arms.size();
                cfg.arms.push_back(arm);
            } else {
                pcs::detail::require(section == "signal" || section == "matrix" || section == "sweep",
                                "config: unknown section [" + section + "]" + where);
            }
            continue;
        }
        const auto eq = text.find('=');
        pcs::detail::require(eq != std::string::npos, "config: expected key = value" + where);
        const auto key = detail::trim(std::string_view(text).substr(0, eq));
        const auto val = detail::trim(std::string_view(text).substr(eq + 1));
        const auto bad_key = [&] { return ValidationError("config: unknown key '" + key + "' in [" + section + "]" + where); };

        if (section == "signal") {
            auto& s = cfg.signal;
            if (key == "kind") s.kind = parse_signal_kind(val);
            else if (key == "m") s.m = detail::parse_size(val, key);
            else if (key == "intensity") s.intensity = io::parse_double(val, key);
            else if (key == "segments") s.segments = detail::parse_size(val, key);
            else if (key == "seed") s.seed = io::parse_u64(val, key);
            else if (key == "alpha") s.alpha = io::parse_double(val, key);
            else if (key == "rho") s.rho = io::parse_double(val, key);
            else if (key == "c") s.c = io::parse_double(val, key);
            else if (key == "basis") {
                pcs::detail::require(val == "haar" || val == "identity", "config: basis must be haar or identity" + where);
                s.basis = val == "haar" ? Basis::Haar : Basis::Identity;
            } else throw bad_key();
        } else if (section == "matrix") {
            auto& mt = cfg.matrix;
            if (key == "rows") mt.rows = detail::parse_size(val, key);
            else if (key == "row_weight") mt.row_weight = detail::parse_size(val, key);
            else if (key == "p") mt.p = io::parse_double(val, key);
            else if (key == "seed") mt.seed = io::parse_u64(val, key);
            else throw bad_key();
        } else if (section == "sweep") {
            if (key == "axis") cfg.axis = parse_axis(val);
            else if (key == "values") cfg.values = detail::parse_list(val, key);
            else if (key == "replicates") cfg.replicates = detail::parse_size(val, key);
            else if (key == "noise_seed") cfg.noise_seed = io::parse_u64(val, key);
            else if (key == "taus") { cfg.taus = detail::parse_list(val, key); grid_given = false; }
            else if (key == "tau_min") { tau_min = io::parse_double(val, key); grid_given = true; }
            else if (key == "tau_max") { tau_max = io::parse_double(val, key); grid_given = true; }
            else if (key == "tau_points") { tau_points = detail::parse_size(val, key); grid_given = true; }
            else if (key == "threads") cfg.threads = static_cast<unsigned>(detail::parse_size(val, key));
            else throw bad_key();
        } else if (section.starts_with("solver.")) {
            auto& arm = cfg.arms[arm_index.at(section.substr(7))];
            auto& sc = arm.solver;
            if (key == "penalty") sc.penalty = parse_penalty(val);
            else if (key == "taus") arm.taus = detail::parse_list(val, key);
            else if (key == "max_iters") sc.max_iters = detail::parse_size(val, key);
            else if (key == "tol") sc.rel_obj_tol = io::parse_double(val, key);
            else if (key == "time_budget") sc.time_budget_seconds = io::parse_double(val, key);
            else if (key == "eta_min") sc.eta_min = io::parse_double(val, key);
            else if (key == "eta_max") sc.eta_max = io::parse_double(val, key);
            else if (key == "bb") sc.bb_enabled = detail::parse_bool(val);
            else if (key == "backtrack_factor") sc.backtrack_factor = io::parse_double(val, key);
            else if (key == "renormalize") sc.renormalize_output = detail::parse_bool(val);
            else if (key == "ti_per_shift") sc.ti_per_shift_state = detail::parse_bool(val);
            else if (key == "leaf_code") {
                pcs::detail::require(val == "kraft" || val == "raw", "config: leaf_code must be kraft or raw" + where);
                sc.leaf_code = val == "kraft" ? LeafCode::Kraft : LeafCode::Raw;
            } else throw bad_key();
        } else {
            throw ValidationError("config: key outside of any section" + where);
        }
    }
    if (grid_given) cfg.taus = log_grid(tau_min, tau_max, tau_points);
    cfg.validate();
    return cfg;
}

} // namespace pcs::harness
