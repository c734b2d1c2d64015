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

// pcs command-line tool. Exit codes: 0 success, 2 validation failure,
// 3 solver abort, 1 anything else.

#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include "CLI11.hpp"
#include "pcs/pcs.hpp"

namespace {

constexpr int kExitValidation = 2;
constexpr int kExitSolver = 3;

struct GenMatrixArgs {
    std::size_t rows = 512, cols = 1024, row_weight = 32, check = 1000;
    double p = 0.5;
    std::uint64_t seed = 1;
    std::string out;
};

int run_gen_matrix(const GenMatrixArgs& o)
{
    const auto scheme = o.row_weight > 0 ? pcs::RowScheme::fixed(o.row_weight) : pcs::RowScheme::iid();
    const auto a = pcs::build_matrix(o.rows, o.cols, o.p, scheme, o.seed);
    {
        auto out = pcs::io::open_out(o.out);
        pcs::write_matrix(out, a);
    }
    std::fprintf(stderr, "matrix %zux%zu scheme=%s nnz=%zu p=%s\n", a.n_rows(), a.n_cols(),
                 pcs::to_string(a.scheme()).c_str(), a.nnz(), pcs::io::format_double(a.p()).c_str());
    if (o.check == 0) return 0;
    const auto rep = pcs::validate(a, o.check, o.seed);
    std::fprintf(stderr, "validate: empty_rows=%zu max_flux_ratio=%s min_measurement_ratio=%s -> %s\n",
                 rep.empty_rows, pcs::io::format_double(rep.max_flux_ratio).c_str(),
                 pcs::io::format_double(rep.min_measurement_ratio).c_str(), rep.ok() ? "ok" : "FAILED");
    return rep.ok() ? 0 : kExitValidation;
}

struct SimulateArgs {
    std::string matrix, signal, out, signal_out, kind = "piecewise-constant";
    double intensity = 8.2e5;
    std::size_t segments = 8;
    std::uint64_t seed = 7, signal_seed = 1;
};

int run_simulate(const SimulateArgs& o)
{
    auto in = pcs::io::open_in(o.matrix);
    const auto a = pcs::read_matrix(in);
    std::vector<double> f;
    if (!o.signal.empty()) {
        auto sin = pcs::io::open_in(o.signal);
        f = pcs::io::read_values(sin);
    } else {
        pcs::harness::SignalSpec spec;
        spec.kind = pcs::harness::parse_signal_kind(o.kind);
        spec.m = a.n_cols();
        spec.intensity = o.intensity;
        spec.segments = o.segments;
        spec.seed = o.signal_seed;
        f = pcs::harness::make_test_signal(spec).values;
    }
    pcs::detail::require(f.size() == a.n_cols(), "simulate: signal length does not match matrix columns");
    for (double x : f) pcs::detail::require(x >= 0.0, "simulate: signal has a negative entry");
    if (!o.signal_out.empty()) {
        auto so = pcs::io::open_out(o.signal_out);
        pcs::io::write_values(so, f);
    }
    const auto y = pcs::sample_poisson(pcs::apply(a, f), o.seed);
    auto out = pcs::io::open_out(o.out);
    pcs::io::write_values(out, std::span<const std::uint64_t>(y));
    std::fprintf(stderr, "counts: total=%.0f mean=%s\n", pcs::total_count(y),
                 pcs::io::format_double(pcs::total_count(y) / static_cast<double>(y.size())).c_str());
    return 0;
}

struct ReconstructArgs {
    std::string matrix, counts, trace, out, truth, penalty = "rdp-ti", leaf_code = "kraft";
    double tau = 1.0, tol = 1e-8, time_budget = 0.0;
    std::optional<double> intensity;
    std::size_t max_iters = 500;
    bool renormalize = false, shared_ti = false;
};

int run_reconstruct(const ReconstructArgs& o)
{
    auto min = pcs::io::open_in(o.matrix);
    const auto a = pcs::read_matrix(min);
    auto cin = pcs::io::open_in(o.counts);
    const auto y = pcs::io::read_counts(cin);

    pcs::SolverConfig cfg;
    cfg.penalty = pcs::parse_penalty(o.penalty);
    cfg.tau = o.tau;
    cfg.max_iters = o.max_iters;
    cfg.rel_obj_tol = o.tol;
    cfg.time_budget_seconds = o.time_budget;
    cfg.renormalize_output = o.renormalize;
    cfg.intensity = o.intensity;
    cfg.ti_per_shift_state = !o.shared_ti;
    pcs::detail::require(o.leaf_code == "kraft" || o.leaf_code == "raw", "--leaf-code must be kraft or raw");
    cfg.leaf_code = o.leaf_code == "kraft" ? pcs::LeafCode::Kraft : pcs::LeafCode::Raw;

    const auto trace = pcs::solve(y, a, cfg);
    {
        auto out = pcs::io::open_out(o.out);
        pcs::io::write_values(out, trace.estimate);
    }
    if (!o.trace.empty()) {
        auto tf = pcs::io::open_out(o.trace);
        pcs::write_trace_csv(tf, trace);
    }
    std::fprintf(stderr, "penalty=%s tau=%s iterations=%zu termination=%s objective=%s\n",
                 pcs::to_string(cfg.penalty).c_str(), pcs::io::format_double(cfg.tau).c_str(), trace.iterations(),
                 pcs::to_string(trace.termination).c_str(), pcs::io::format_double(trace.final_objective()).c_str());
    if (!o.truth.empty()) {
        auto tin = pcs::io::open_in(o.truth);
        const auto truth = pcs::Signal::from_values(pcs::io::read_values(tin));
        std::fprintf(stderr, "risk=%s\n", pcs::io::format_double(pcs::risk(trace.estimate, truth)).c_str());
    }
    return 0;
}

struct SweepArgs {
    std::string config, out, rows;
    unsigned threads = 0;
};

int run_sweep(const SweepArgs& o)
{
    pcs::harness::ExperimentConfig cfg = pcs::harness::default_config();
    if (!o.config.empty()) {
        auto in = pcs::io::open_in(o.config);
        cfg = pcs::harness::parse_config(in);
    }
    if (o.threads > 0) cfg.threads = o.threads;
    std::vector<pcs::harness::RiskReport> reports;
    const auto rows = pcs::harness::sweep(cfg, cfg.axis, cfg.values, &reports);
    const auto csv = pcs::harness::sweep_csv(rows);
    if (o.out.empty() || o.out == "-") {
        std::cout << csv;
    } else {
        auto out = pcs::io::open_out(o.out);
        out << csv;
    }
    if (!o.rows.empty()) {
        auto rf = pcs::io::open_out(o.rows);
        for (const auto& rep : reports) pcs::harness::write_rows_csv(rf, rep, cfg.arms);
    }
    for (std::size_t i = 0; i < reports.size(); ++i) {
        double mc = 0.0;
        for (double c : reports[i].mean_counts) mc += c;
        mc /= static_cast<double>(reports[i].mean_counts.size());
        std::fprintf(stderr, "run %zu: mean detector count %s\n", i, pcs::io::format_double(mc).c_str());
    }
    return 0;
}

struct VerifyArgs {
    std::string matrix;
    std::size_t vectors = 1000;
    std::uint64_t seed = 1;
    double c2 = 1.0;
};

int run_verify(const VerifyArgs& o)
{
    auto in = pcs::io::open_in(o.matrix);
    const auto a = pcs::read_matrix(in);
    const auto mom = pcs::theory::implied_entry_moments(a);
    const auto iso = pcs::theory::empirical_isometry_check(a, o.vectors, o.seed);
    const auto pair = pcs::theory::empirical_pair_check(a, o.vectors, o.seed, o.c2);
    const auto fd = [](double x) { return pcs::io::format_double(x); };
    std::cout << "check,vectors,fraction,min,max,mean\n";
    std::cout << "isometry," << iso.vectors << ',' << fd(iso.fraction()) << ',' << fd(iso.min_value) << ','
              << fd(iso.max_value) << ',' << fd(iso.mean_value) << '\n';
    std::cout << "pair," << pair.vectors << ',' << fd(pair.fraction()) << ',' << fd(pair.min_value) << ','
              << fd(pair.max_value) << ',' << fd(pair.mean_value) << '\n';
    std::fprintf(stderr, "implied entries: n=%zu mean=%s (se %s) second moment=%s (se %s)\n", mom.samples,
                 fd(mom.mean).c_str(), fd(mom.mean_se).c_str(), fd(mom.second_moment).c_str(), fd(mom.second_moment_se).c_str());
    return 0;
}

int run_bound(const pcs::theory::BoundParams& p)
{
    const auto rep = pcs::theory::evaluate_bound(p);
    const auto fd = [](double x) { return pcs::io::format_double(x); };
    std::cout << "k,approximation,quantization,codelength,bracket,leading\n";
    for (const auto& t : rep.terms)
        std::cout << t.k << ',' << fd(t.approximation) << ',' << fd(t.quantization) << ',' << fd(t.codelength) << ','
                  << fd(t.bracket()) << ',' << fd(rep.C_Np * t.bracket()) << '\n';
    std::fprintf(stderr,
                 "zeta_p=%s C_Np=%s k_star=%s argmin_k=%zu min_bracket=%s leading=%s additive=%s regime=%s "
                 "critical_k=%s saturated=%s\n",
                 fd(rep.zeta_p).c_str(), fd(rep.C_Np).c_str(), fd(rep.k_star).c_str(), rep.argmin_k,
                 fd(rep.min_bracket).c_str(), fd(rep.leading_term).c_str(), fd(rep.additive_term).c_str(),
                 pcs::theory::to_string(rep.regime).c_str(), fd(rep.critical_k).c_str(),
                 rep.saturated ? "yes" : "no");
    std::fprintf(stderr, "note: c, c2 and c4 are caller inputs; the bound holds only with a probability set by the\n"
                         "unmodelled constants c1, c3 and K(c1, c3, p)\n");
    return 0;
}

} // namespace

int main(int argc, char** argv)
{
    CLI::App app{"Poisson compressed sensing: matrices, simulation, reconstruction and bounds"};
    app.require_subcommand(1);
    int rc = 0;

    GenMatrixArgs gm;
    auto* c_gm = app.add_subcommand("gen-matrix", "Generate a sensing matrix pattern");
    c_gm->add_option("--rows", gm.rows, "Number of detectors N")->check(CLI::PositiveNumber);
    c_gm->add_option("--cols", gm.cols, "Signal length m")->check(CLI::PositiveNumber);
    c_gm->add_option("--p", gm.p, "Probability of a zero entry (iid scheme)");
    c_gm->add_option("--row-weight", gm.row_weight, "Nonzeros per row; 0 selects iid Bernoulli rows");
    c_gm->add_option("--seed", gm.seed, "Generator seed");
    c_gm->add_option("--check", gm.check, "Random inputs for the flux/measurement check (0 skips)");
    c_gm->add_option("--out", gm.out, "Output matrix file")->required();
    c_gm->callback([&] { rc = run_gen_matrix(gm); });

    SimulateArgs sm;
    auto* c_sm = app.add_subcommand("simulate", "Draw Poisson counts y ~ Poisson(Af)");
    c_sm->add_option("--matrix", sm.matrix, "Matrix file")->required();
    c_sm->add_option("--signal", sm.signal, "Intensity file, one value per line");
    c_sm->add_option("--signal-kind", sm.kind, "Built-in signal when --signal is absent");
    c_sm->add_option("--intensity", sm.intensity, "Total intensity of the built-in signal");
    c_sm->add_option("--segments", sm.segments, "Segments of the built-in signal");
    c_sm->add_option("--signal-seed", sm.signal_seed, "Seed of the built-in signal");
    c_sm->add_option("--signal-out", sm.signal_out, "Write the signal used");
    c_sm->add_option("--seed", sm.seed, "Noise seed");
    c_sm->add_option("--out", sm.out, "Output count file")->required();
    c_sm->callback([&] { rc = run_simulate(sm); });

    ReconstructArgs rc_args;
    auto* c_rc = app.add_subcommand("reconstruct", "Penalized likelihood reconstruction");
    c_rc->add_option("--matrix", rc_args.matrix, "Matrix file")->required();
    c_rc->add_option("--counts", rc_args.counts, "Count file")->required();
    c_rc->add_option("--penalty", rc_args.penalty, "rdp, rdp-ti, l1 or l1-haar");
    c_rc->add_option("--tau", rc_args.tau, "Regularization weight");
    c_rc->add_option("--max-iters", rc_args.max_iters, "Iteration limit");
    c_rc->add_option("--tol", rc_args.tol, "Relative objective tolerance");
    c_rc->add_option("--time-budget", rc_args.time_budget, "Wall-clock budget in seconds (0 = none)");
    c_rc->add_option("--intensity", rc_args.intensity, "Known total intensity for the log floor");
    c_rc->add_option("--leaf-code", rc_args.leaf_code, "Per-leaf cost: kraft or raw");
    c_rc->add_flag("--renormalize", rc_args.renormalize, "Scale the estimate to the intensity estimate");
    c_rc->add_flag("--shared-ti", rc_args.shared_ti, "Refit every shift from the averaged iterate");
    c_rc->add_option("--truth", rc_args.truth, "True signal file; reports the risk");
    c_rc->add_option("--trace", rc_args.trace, "Per-iteration CSV");
    c_rc->add_option("--out", rc_args.out, "Output estimate file")->required();
    c_rc->callback([&] { rc = run_reconstruct(rc_args); });

    SweepArgs sw;
    auto* c_sw = app.add_subcommand("sweep", "Run an experiment config and report best-tau risks");
    c_sw->add_option("--config", sw.config, "Config file (built-in defaults when absent)");
    c_sw->add_option("--out", sw.out, "Summary CSV (stdout when absent)");
    c_sw->add_option("--rows", sw.rows, "Per-run CSV");
    c_sw->add_option("--threads", sw.threads, "Worker threads (overrides the config)");
    c_sw->callback([&] { rc = run_sweep(sw); });

    VerifyArgs vt;
    auto* c_vt = app.add_subcommand("verify-theory", "Monte-Carlo isometry checks on a matrix");
    c_vt->add_option("--matrix", vt.matrix, "Matrix file")->required();
    c_vt->add_option("--vectors", vt.vectors, "Random vectors (and pairs)");
    c_vt->add_option("--seed", vt.seed, "Seed");
    c_vt->add_option("--c2", vt.c2, "Constant in the additive term of the pair check");
    c_vt->callback([&] { rc = run_verify(vt); });

    pcs::theory::BoundParams bp;
    auto* c_bd = app.add_subcommand("bound", "Tabulate the risk bound over k");
    c_bd->add_option("--m", bp.m, "Signal length");
    c_bd->add_option("--n", bp.n, "Detectors N");
    c_bd->add_option("--p", bp.p, "Zero-entry probability");
    c_bd->add_option("--alpha", bp.alpha, "Compressibility exponent");
    c_bd->add_option("--rho", bp.rho, "Compressibility radius");
    c_bd->add_option("--intensity", bp.intensity, "Total intensity I");
    c_bd->add_option("--c", bp.c, "Floor fraction c");
    c_bd->add_option("--c2", bp.c2, "Constant c2");
    c_bd->add_option("--c4", bp.c4, "Constant c4");
    c_bd->callback([&] { rc = run_bound(bp); });

    try {
        app.parse(argc, argv);
    } catch (const CLI::Success& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return kExitValidation;
    } catch (const pcs::ValidationError& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return kExitValidation;
    } catch (const pcs::DomainError& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return kExitValidation;
    } catch (const pcs::SolverAbort& e) {
        std::fprintf(stderr, "solver aborted: %s\n", e.what());
        return kExitSolver;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    }
    return rc;
}
