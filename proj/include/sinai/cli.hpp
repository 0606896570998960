#pragma once

// Command-line front end. run_cli() parses arguments, runs one estimator
// pipeline and writes a CSV or JSON report. Exit codes: 0 success, 2 bad
// configuration or input, 3 numerical failure.

#include <algorithm>
#include <functional>
#include <iostream>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"

#include "sinai/dynamics.hpp"
#include "sinai/io.hpp"
#include "sinai/orbits.hpp"
#include "sinai/singularity.hpp"
#include "sinai/thermo.hpp"

namespace sinai::cli {

inline constexpr int exit_ok = 0;
inline constexpr int exit_config = 2;
inline constexpr int exit_numeric = 3;

inline int exit_code_for(ErrorCode c)
{
    switch (c) {
    case ErrorCode::OverlappingScatterers:
    case ErrorCode::DegenerateLattice:
    case ErrorCode::UnsupportedFamily:
    case ErrorCode::IndexOutOfRange:
    case ErrorCode::InvalidInput:
    case ErrorCode::UnsupportedPotential:
    case ErrorCode::ConfigError:
    case ErrorCode::IoError:
        return exit_config;
    default:
        return exit_numeric;
    }
}

struct Common {
    std::string table;
    std::uint64_t seed = 1;
    unsigned threads = 1;
    std::string format = "csv";
    std::string output = "-";
};

/// A report produced before a numerical error; written out, then exit 3.
class PartialResult : public Error {
public:
    PartialResult(Report r, const Error& cause) : Error(cause.code(), cause.what()), report(std::move(r)) {}
    Report report;
};

inline Potential parse_potential(const std::string& s)
{
    if (s == "zero")
        return ZeroPotential{};
    if (s.rfind("tau:", 0) == 0) {
        try {
            return ScaledTauPotential{std::stod(s.substr(4))};
        } catch (const std::logic_error&) {
        }
    }
    throw Error(ErrorCode::ConfigError, "potential must be 'zero' or 'tau:<c>', got '" + s + "'");
}

inline std::string join(const std::vector<std::string>& v, const char* sep = "; ")
{
    std::string s;
    for (std::size_t k = 0; k < v.size(); ++k)
        s += (k ? sep : "") + v[k];
    return s;
}

template <typename T>
std::string list_text(const std::vector<T>& v)
{
    std::string s;
    for (std::size_t k = 0; k < v.size(); ++k) {
        if (k)
            s += " ";
        if constexpr (std::is_floating_point_v<T>)
            s += fmt(v[k]);
        else
            s += std::to_string(v[k]);
    }
    return s;
}

namespace detail {

struct Context {
    Common common;
    std::optional<TableSpec> spec;

    const TableSpec& table_spec()
    {
        if (!spec) {
            if (common.table.empty())
                throw Error(ErrorCode::ConfigError, "--table is required");
            spec = load_spec(common.table);
        }
        return *spec;
    }
    Report start(const std::string& command, bool with_table = true)
    {
        Report r;
        r.command = command;
        r.seed = common.seed;
        if (with_table)
            r.spec_hash = spec_hash(table_spec());
        return r;
    }
    Billiard billiard() { return Billiard(build_table(table_spec())); }
};

inline FlightBounds flight(const Billiard& b, const Common& c)
{
    FlightSampling fs;
    fs.seed = c.seed;
    fs.threads = c.threads;
    return free_flight_bounds(b, fs);
}

inline CensusOptions census_options(const Common& c, std::size_t window, std::size_t cap, double flight_bound)
{
    CensusOptions o;
    o.window = window;
    o.grammar.seed = c.seed;
    o.max_itineraries = cap;
    o.threads = c.threads;
    o.flight_bound = flight_bound;
    return o;
}

// --- individual pipelines -------------------------------------------------

inline void horizon_rows(Report& r, const BilliardTable& t, int d_max)
{
    const auto h = finite_horizon_check(t, d_max);
    auto& tb = r.table("horizon", {"finite", "exhaustive", "d_max", "directions_checked", "witness_p", "witness_q",
                                   "witness_width"});
    if (h.witness)
        tb.add({h.finite, h.exhaustive, static_cast<long long>(h.d_max), static_cast<long long>(h.directions_checked),
                static_cast<long long>(h.witness->p), static_cast<long long>(h.witness->q), h.witness->width});
    else
        tb.add({h.finite, h.exhaustive, static_cast<long long>(h.d_max), static_cast<long long>(h.directions_checked),
                std::string("none"), std::string("none"), std::string("none")});
}

inline void domain_rows(Report& r, const TableSpec& spec)
{
    auto& tb = r.table("domain", {"family", "accepted", "margin", "violated"});
    if (std::holds_alternative<CustomFamily>(spec)) {
        tb.add({family_name(spec), false, 0.0, std::string("unsupported family")});
        return;
    }
    const auto v = validate_domain(spec);
    tb.add({family_name(spec), v.accepted, v.margin, join(v.violated_constraints)});
}

inline void flight_rows(Report& r, const FlightBounds& fb, double kappa)
{
    auto& tb = r.table("flight", {"tau_min", "tau_min_exact", "tau_max", "tau_max_is_estimate", "slack", "kappa_min"});
    tb.add({fb.tau_min, fb.tau_min_exact, fb.tau_max, fb.tau_max_estimate, fb.slack, kappa});
}

inline void srb_rows(Report& r, double tau, double kappa)
{
    const auto q = srb_entropy_quadrature(tau, kappa);
    auto& tb = r.table("srb_bound", {"tau_min", "kappa_min", "value", "error_estimate", "exceeds_half_log2"});
    tb.add({tau, kappa, q.value, q.error_estimate, q.value > 0.5 * std::log(2.0)});
}

inline void sparse_rows(Report& r, const Billiard& b, const Potential& g, const std::string& mode,
                        std::optional<double> plb, const std::vector<std::size_t>& n0s,
                        const std::vector<double>& phi0s, std::size_t samples, const Common& c)
{
    auto& tb = r.table("sparse_recurrence",
                       {"mode", "value", "s0", "pressure_lower_bound", "sup_g", "certified", "caveats"});
    std::vector<S0Estimate> grid;
    for (const std::string m : {"paper", "estimated"}) {
        if (mode != "both" && mode != m)
            continue;
        SparseRecurrenceInput in;
        in.mode = m == "paper" ? S0Mode::Paper : S0Mode::Estimated;
        in.pressure_lower_bound = plb;
        in.n0s = n0s;
        in.phi0s = phi0s;
        in.search.samples = samples;
        in.search.seed = c.seed;
        in.search.threads = c.threads;
        const auto rep = sparse_recurrence_check(b, g, in, m == "estimated" ? &grid : nullptr);
        r.tables[r.tables.size() - 1].add({m, rep.value, rep.inputs[2].second, rep.inputs[0].second,
                                           rep.inputs[1].second, rep.verdict.value_or(false), join(rep.caveats)});
    }
    (void)tb;
    if (!grid.empty()) {
        auto& gt = r.table("s0_grid", {"n0", "phi0", "value", "witness_scatterer", "witness_r", "witness_phi"});
        for (const auto& e : grid)
            gt.add({static_cast<long long>(e.n0), e.phi0, e.value, static_cast<long long>(e.witness.scatterer),
                    e.witness.r, e.witness.phi});
    }
}

inline std::vector<std::pair<std::size_t, std::size_t>> cell_rows(Report& r, const Billiard& b, std::size_t n_min,
                                                                  std::size_t n_max, std::size_t budget,
                                                                  const Common& c)
{
    auto& tb = r.table("cells", {"n", "cells", "samples"});
    std::vector<std::pair<std::size_t, std::size_t>> counts;
    for (std::size_t n = n_min; n <= n_max; ++n) {
        CellSampler s;
        s.budget = budget;
        s.seed = c.seed;
        s.threads = c.threads;
        const auto cc = count_cells(b, n, s);
        r.tables.back().add({static_cast<long long>(n), static_cast<long long>(cc.cells),
                             static_cast<long long>(cc.samples_used)});
        counts.push_back({n, cc.cells});
    }
    (void)tb;
    return counts;
}

inline void growth_rows(Report& r, const std::vector<std::pair<std::size_t, std::size_t>>& counts)
{
    std::vector<std::pair<std::size_t, std::size_t>> positive;
    for (const auto& p : counts)
        if (p.first > 0)
            positive.push_back(p);
    if (positive.size() < 3)
        return;
    const auto gr = entropy_from_cells(positive);
    auto& tb = r.table("cell_growth", {"n", "increment", "least_squares_rate"});
    for (const auto& [n, inc] : gr.increments)
        tb.add({static_cast<long long>(n), inc, gr.rate});
}

inline void census_rows(Report& r, const BilliardTable& t, const OrbitCensus& c, const Potential& g,
                        ReportTable& summary, ReportTable* orbits)
{
    summary.add({static_cast<long long>(c.period), static_cast<long long>(c.orbits.size()),
                 static_cast<long long>(c.count), c.weighted_sum, static_cast<long long>(c.itineraries_tried),
                 static_cast<long long>(c.nonconverged), c.partial});
    if (!orbits)
        return;
    for (const auto& o : c.orbits)
        orbits->add({static_cast<long long>(c.period), format_itinerary(o.itinerary),
                     static_cast<long long>(o.period), o.length, o.grazing_margin,
                     static_cast<double>(c.period / o.period) * orbit_sum(t, g, o)});
    (void)r;
}

} // namespace detail

/// Runs the tool on an argument list (without the program name).
inline int run_cli(std::vector<std::string> args, std::ostream& out = std::cout, std::ostream& err = std::cerr)
{
    CLI::App app{"Dispersing billiards on the torus: dynamics, orbit counts and entropy bounds", "sinai"};
    app.require_subcommand(1);
    app.set_version_flag("--version", std::string(tool_name) + " " + tool_version);

    detail::Context ctx;
    std::function<Report()> action;

    auto common = [&](CLI::App* sub, bool table_required) {
        auto* o = sub->add_option("--table", ctx.common.table, "table spec JSON (or a config file with a table block)");
        if (table_required)
            o->required();
        sub->add_option("--seed", ctx.common.seed, "random seed")->capture_default_str();
        sub->add_option("--threads", ctx.common.threads, "worker threads (does not change results)")
            ->capture_default_str();
        sub->add_option("--format", ctx.common.format, "output format")
            ->check(CLI::IsMember({"csv", "json"}))
            ->capture_default_str();
        sub->add_option("--output,-o", ctx.common.output, "output file, '-' for stdout")->capture_default_str();
    };

    // check-horizon
    int d_max = 10;
    {
        auto* s = app.add_subcommand("check-horizon", "finite-horizon verdict with witness corridor");
        common(s, true);
        s->add_option("--d-max", d_max, "largest corridor direction component")->capture_default_str();
        s->callback([&] {
            action = [&] {
                auto r = ctx.start("check-horizon");
                r.parameters = {{"d_max", std::to_string(d_max)}};
                detail::horizon_rows(r, build_table(ctx.table_spec()), d_max);
                return r;
            };
        });
    }
    // validate-domain
    {
        auto* s = app.add_subcommand("validate-domain", "membership in the reference parameter domains");
        common(s, true);
        s->callback([&] {
            action = [&] {
                auto r = ctx.start("validate-domain");
                detail::domain_rows(r, ctx.table_spec());
                return r;
            };
        });
    }
    // srb-bound
    std::optional<double> tau_min_opt, kappa_opt;
    {
        auto* s = app.add_subcommand("srb-bound", "SRB entropy lower bound from tau_min and kappa_min");
        common(s, false);
        s->add_option("--tau-min", tau_min_opt, "minimal free flight");
        s->add_option("--kappa-min", kappa_opt, "minimal curvature");
        s->callback([&] {
            action = [&] {
                const bool use_table = !(tau_min_opt && kappa_opt);
                auto r = ctx.start("srb-bound", use_table);
                double tau = tau_min_opt.value_or(0.0), kap = kappa_opt.value_or(0.0);
                if (use_table) {
                    const Billiard b = ctx.billiard();
                    const auto fb = detail::flight(b, ctx.common);
                    tau = tau_min_opt.value_or(fb.tau_min);
                    kap = kappa_opt.value_or(min_curvature(b.table()));
                }
                detail::srb_rows(r, tau, kap);
                return r;
            };
        });
    }
    // s0
    std::vector<std::size_t> n0s{4, 6, 8, 10};
    std::vector<double> phi0s{1.2, 1.3, 1.4, 1.5};
    std::size_t s0_samples = 4000;
    {
        auto* s = app.add_subcommand("s0", "frequency of near-grazing collisions on a (n0, phi0) grid");
        common(s, true);
        s->add_option("--n0", n0s, "window lengths")->capture_default_str();
        s->add_option("--phi0", phi0s, "grazing thresholds (radians)")->capture_default_str();
        s->add_option("--samples", s0_samples, "stratified samples per scatterer")->capture_default_str();
        s->callback([&] {
            action = [&] {
                auto r = ctx.start("s0");
                r.parameters = {{"n0", list_text(n0s)}, {"phi0", list_text(phi0s)},
                                {"samples", std::to_string(s0_samples)}};
                const Billiard b = ctx.billiard();
                S0Search cfg;
                cfg.samples = s0_samples;
                cfg.seed = ctx.common.seed;
                cfg.threads = ctx.common.threads;
                auto& tb = r.table("s0", {"n0", "phi0", "value", "witness_scatterer", "witness_r", "witness_phi"});
                for (const auto& e : s0_grid(b, n0s, phi0s, cfg))
                    tb.add({static_cast<long long>(e.n0), e.phi0, e.value, static_cast<long long>(e.witness.scatterer),
                            e.witness.r, e.witness.phi});
                return r;
            };
        });
    }
    // cells
    std::size_t n_min = 0, n_max = 6, budget = 20000;
    {
        auto* s = app.add_subcommand("cells", "distinct itineraries of length n (partition cell counts)");
        common(s, true);
        s->add_option("--n-min", n_min)->capture_default_str();
        s->add_option("--n-max", n_max)->capture_default_str();
        s->add_option("--budget", budget, "samples per scatterer")->capture_default_str();
        s->callback([&] {
            action = [&] {
                auto r = ctx.start("cells");
                r.parameters = {{"n_min", std::to_string(n_min)}, {"n_max", std::to_string(n_max)},
                                {"budget", std::to_string(budget)}};
                const Billiard b = ctx.billiard();
                const auto counts = detail::cell_rows(r, b, n_min, n_max, budget, ctx.common);
                detail::growth_rows(r, counts);
                return r;
            };
        });
    }
    // singularity
    int order = 1;
    double resolution = 0.02;
    {
        auto* s = app.add_subcommand("singularity", "singularity curves S_n (n < 0 for forward images)");
        common(s, true);
        s->add_option("--order", order)->capture_default_str();
        s->add_option("--resolution", resolution)->capture_default_str();
        s->callback([&] {
            action = [&] {
                auto r = ctx.start("singularity");
                r.parameters = {{"order", std::to_string(order)}, {"resolution", fmt(resolution)}};
                const Billiard b = ctx.billiard();
                SingularityOptions opt;
                opt.resolution = resolution;
                opt.threads = ctx.common.threads;
                const auto set = singularity_set(b, order, opt);
                auto& tb = r.table("curves", {"scatterer", "r", "phi", "branch", "order", "side"});
                for (const auto& c : set.curves)
                    for (const auto& p : c.points)
                        tb.add({static_cast<long long>(c.scatterer), p.r, p.phi, static_cast<long long>(c.branch),
                                static_cast<long long>(c.order), static_cast<long long>(c.side)});
                r.parameters.push_back({"truncated", set.truncated ? "true" : "false"});
                return r;
            };
        });
    }
    // complexity
    std::size_t cx_n_max = 4;
    double cx_resolution = 0.005;
    {
        auto* s = app.add_subcommand("complexity", "largest number of singularity curves near one point");
        common(s, true);
        s->add_option("--n-max", cx_n_max)->capture_default_str();
        s->add_option("--resolution", cx_resolution)->capture_default_str();
        s->callback([&] {
            action = [&] {
                auto r = ctx.start("complexity");
                r.parameters = {{"n_max", std::to_string(cx_n_max)}, {"resolution", fmt(cx_resolution)}};
                const Billiard b = ctx.billiard();
                auto& tb = r.table("complexity", {"n", "K_n", "K", "scatterer", "r", "phi", "truncated",
                                                  "resolution_dependent"});
                for (std::size_t n = 1; n <= cx_n_max; ++n) {
                    SingularityOptions opt;
                    opt.resolution = cx_resolution;
                    opt.threads = ctx.common.threads;
                    const auto set = singularity_set(b, static_cast<int>(n), opt);
                    const auto e = complexity(b.table(), set);
                    tb.add({static_cast<long long>(n), static_cast<long long>(e.K_n), e.K,
                            static_cast<long long>(e.location.scatterer), e.location.r, e.location.phi, set.truncated,
                            e.resolution_dependent});
                }
                return r;
            };
        });
    }
    // orbits
    std::vector<std::size_t> periods{2, 3, 4, 5, 6};
    std::size_t window = 3, cap = 2'000'000;
    std::string potential = "zero";
    {
        auto* s = app.add_subcommand("orbits", "periodic-orbit census: Fix T^n and sum of e^{S_n g}");
        common(s, true);
        s->add_option("--n", periods, "periods")->capture_default_str();
        s->add_option("--window", window, "grammar window (0 = all chord-admissible words)")->capture_default_str();
        s->add_option("--max-itineraries", cap, "cap on words solved per period")->capture_default_str();
        s->add_option("--potential", potential, "zero or tau:<c>")->capture_default_str();
        s->callback([&] {
            action = [&] {
                auto r = ctx.start("orbits");
                r.parameters = {{"n", list_text(periods)}, {"window", std::to_string(window)},
                                {"max_itineraries", std::to_string(cap)}, {"potential", potential}};
                const Potential g = parse_potential(potential);
                const Billiard b = ctx.billiard();
                const auto fb = detail::flight(b, ctx.common);
                const OrbitEnumerator en(b, detail::census_options(ctx.common, window, cap, fb.tau_max + fb.slack));
                auto& summary = r.table("census", {"n", "orbits", "fixed_points", "weighted_sum",
                                                   "itineraries_tried", "nonconverged", "partial"});
                (void)summary;
                r.table("orbits", {"n", "itinerary", "period", "length", "grazing_margin", "S_n_g"});
                for (auto n : periods) {
                    try {
                        const auto c = en.census(n, g);
                        detail::census_rows(r, b.table(), c, g, r.tables[0], &r.tables[1]);
                    } catch (const BudgetExceeded& e) {
                        detail::census_rows(r, b.table(), e.census(), g, r.tables[0], &r.tables[1]);
                        throw PartialResult(r, e);
                    }
                }
                return r;
            };
        });
    }
    // graze-scan
    std::size_t scan_n_max = 6;
    double threshold = 1e-3;
    {
        auto* s = app.add_subcommand("graze-scan", "periodic orbits with a near-grazing collision");
        common(s, true);
        s->add_option("--n-max", scan_n_max)->capture_default_str();
        s->add_option("--threshold", threshold, "grazing margin threshold (radians)")->capture_default_str();
        s->add_option("--window", window)->capture_default_str();
        s->callback([&] {
            action = [&] {
                auto r = ctx.start("graze-scan");
                r.parameters = {{"n_max", std::to_string(scan_n_max)}, {"threshold", fmt(threshold)},
                                {"window", std::to_string(window)}};
                const Billiard b = ctx.billiard();
                const auto fb = detail::flight(b, ctx.common);
                const OrbitEnumerator en(b, detail::census_options(ctx.common, window, cap, fb.tau_max + fb.slack));
                const auto hits = grazing_orbit_scan(en, scan_n_max, threshold);
                auto& tb = r.table("grazing_orbits", {"period", "itinerary", "length", "grazing_margin"});
                for (const auto& h : hits)
                    tb.add({static_cast<long long>(h.orbit.period), format_itinerary(h.orbit.itinerary), h.orbit.length,
                            h.margin});
                auto& d = r.table("diagnostic", {"found", "statement"});
                d.add({static_cast<long long>(hits.size()),
                       hits.empty() ? "no grazing periodic orbit up to period " + std::to_string(scan_n_max) +
                                          " at threshold " + fmt(threshold) + " (diagnostic, not a proof)"
                                    : std::string("near-grazing periodic orbits found")});
                return r;
            };
        });
    }
    // sparse-recurrence
    std::string mode = "both";
    std::optional<double> pressure_lb;
    {
        auto* s = app.add_subcommand("sparse-recurrence", "P - sup g > s0 log 2 check");
        common(s, true);
        s->add_option("--mode", mode)->check(CLI::IsMember({"paper", "estimated", "both"}))->capture_default_str();
        s->add_option("--pressure-lb", pressure_lb, "pressure lower bound (required for nonzero potentials)");
        s->add_option("--potential", potential)->capture_default_str();
        s->add_option("--n0", n0s)->capture_default_str();
        s->add_option("--phi0", phi0s)->capture_default_str();
        s->add_option("--samples", s0_samples)->capture_default_str();
        s->callback([&] {
            action = [&] {
                auto r = ctx.start("sparse-recurrence");
                r.parameters = {{"mode", mode}, {"potential", potential}, {"n0", list_text(n0s)},
                                {"phi0", list_text(phi0s)}, {"samples", std::to_string(s0_samples)}};
                if (pressure_lb)
                    r.parameters.push_back({"pressure_lb", fmt(*pressure_lb)});
                const Billiard b = ctx.billiard();
                detail::sparse_rows(r, b, parse_potential(potential), mode, pressure_lb, n0s, phi0s, s0_samples,
                                    ctx.common);
                return r;
            };
        });
    }
    // tail-bound
    double s0_in = 0.0, K_in = 1.0;
    std::optional<double> tau_max_opt;
    {
        auto* s = app.add_subcommand("tail-bound", "(3 + 2 floor(tau_max/tau_min)) s0 log(2K)");
        common(s, false);
        s->add_option("--s0", s0_in)->required();
        s->add_option("--K", K_in)->required();
        s->add_option("--tau-min", tau_min_opt);
        s->add_option("--tau-max", tau_max_opt);
        s->callback([&] {
            action = [&] {
                const bool use_table = !(tau_min_opt && tau_max_opt);
                auto r = ctx.start("tail-bound", use_table);
                double tmin = tau_min_opt.value_or(0.0), tmax = tau_max_opt.value_or(0.0);
                if (use_table) {
                    const auto fb = detail::flight(ctx.billiard(), ctx.common);
                    tmin = tau_min_opt.value_or(fb.tau_min);
                    tmax = tau_max_opt.value_or(fb.tau_max + fb.slack);
                }
                const auto rep = tail_entropy_bound(s0_in, K_in, tmin, tmax);
                r.table("tail_entropy_bound", {"s0", "K", "tau_min", "tau_max", "value"})
                    .add({s0_in, K_in, tmin, tmax, rep.value});
                return r;
            };
        });
    }
    // usc-bound
    double p_mu = 0.0, mass = 0.0, p_top = 0.0, p_mus = 0.0;
    {
        auto* s = app.add_subcommand("usc-bound", "P_mu + m (P_top - P_muS)");
        common(s, false);
        s->add_option("--p-mu", p_mu)->required();
        s->add_option("--mass", mass, "singular mass")->required();
        s->add_option("--p-top", p_top)->required();
        s->add_option("--p-mus", p_mus)->capture_default_str();
        s->callback([&] {
            action = [&] {
                auto r = ctx.start("usc-bound", false);
                const auto rep = usc_defect_bound(p_mu, mass, p_top, p_mus);
                r.table("usc_defect_bound", {"P_mu", "mu_S_mass", "P_top", "P_muS", "value"})
                    .add({p_mu, mass, p_top, p_mus, rep.value});
                return r;
            };
        });
    }
    // equidistribution
    std::vector<std::size_t> eq_n{4, 6, 8};
    std::size_t dictionary = 32;
    {
        auto* s = app.add_subcommand("equidistribution", "weak-* distance between mu_n and mu_{n+2}");
        common(s, true);
        s->add_option("--n", eq_n)->capture_default_str();
        s->add_option("--dictionary", dictionary, "number of test functions")->capture_default_str();
        s->add_option("--window", window)->capture_default_str();
        s->add_option("--potential", potential)->capture_default_str();
        s->callback([&] {
            action = [&] {
                auto r = ctx.start("equidistribution");
                r.parameters = {{"n", list_text(eq_n)}, {"dictionary", std::to_string(dictionary)},
                                {"window", std::to_string(window)}, {"potential", potential}};
                const Potential g = parse_potential(potential);
                const Billiard b = ctx.billiard();
                const auto fb = detail::flight(b, ctx.common);
                const OrbitEnumerator en(b, detail::census_options(ctx.common, window, cap, fb.tau_max + fb.slack));
                auto& tb = r.table("weak_star", {"n", "m", "atoms_n", "atoms_m", "distance"});
                for (auto n : eq_n) {
                    const auto a = periodic_orbit_measure(b.table(), en.census(n, g), g);
                    const auto c = periodic_orbit_measure(b.table(), en.census(n + 2, g), g);
                    tb.add({static_cast<long long>(n), static_cast<long long>(n + 2), static_cast<long long>(a.size()),
                            static_cast<long long>(c.size()), weak_star_distance(b.table(), a, c, dictionary)});
                }
                return r;
            };
        });
    }
    // report
    std::size_t rep_n_max = 6;
    {
        auto* s = app.add_subcommand("report", "composite report for one table");
        common(s, true);
        s->add_option("--n-max", rep_n_max)->capture_default_str();
        s->add_option("--budget", budget, "cell-count samples per scatterer")->capture_default_str();
        s->add_option("--samples", s0_samples, "s0 samples per scatterer")->capture_default_str();
        s->callback([&] {
            action = [&] {
                if (rep_n_max < 2)
                    throw Error(ErrorCode::ConfigError, "--n-max must be at least 2");
                auto r = ctx.start("report");
                r.parameters = {{"n_max", std::to_string(rep_n_max)}, {"budget", std::to_string(budget)},
                                {"samples", std::to_string(s0_samples)}};
                const auto& spec = ctx.table_spec();
                const Billiard b = ctx.billiard();
                detail::domain_rows(r, spec);
                detail::horizon_rows(r, b.table(), 10);
                const auto fb = detail::flight(b, ctx.common);
                const double kappa = min_curvature(b.table());
                detail::flight_rows(r, fb, kappa);
                detail::srb_rows(r, fb.tau_min, kappa);
                detail::sparse_rows(r, b, ZeroPotential{}, "both", std::nullopt, n0s, phi0s, s0_samples, ctx.common);
                const auto counts = detail::cell_rows(r, b, 1, rep_n_max, budget, ctx.common);
                detail::growth_rows(r, counts);

                const OrbitEnumerator en(b, detail::census_options(ctx.common, 3, cap, fb.tau_max + fb.slack));
                std::vector<OrbitCensus> cs;
                auto& ct = r.table("census", {"n", "orbits", "fixed_points", "weighted_sum", "itineraries_tried",
                                              "nonconverged", "partial"});
                (void)ct;
                const std::size_t ci = r.tables.size() - 1;
                for (std::size_t n = 2; n <= rep_n_max; ++n) {
                    cs.push_back(en.census(n));
                    detail::census_rows(r, b.table(), cs.back(), ZeroPotential{}, r.tables[ci], nullptr);
                }
                const auto og = entropy_from_orbits(b.table(), cs);
                auto& gt = r.table("orbit_growth", {"n", "orbit_rate", "cell_rate", "fixed_points_le_cells"});
                for (std::size_t k = 0; k < og.sequence.size(); ++k) {
                    const auto n = og.sequence[k].first;
                    const auto cells = counts[n - 1].second;
                    gt.add({static_cast<long long>(n), og.sequence[k].second,
                            std::log(static_cast<double>(cells)) / static_cast<double>(n), cs[k].count <= cells});
                }

                // complexity constant from low orders, estimated s0, tail bound
                double K = 1.0;
                for (int n = 1; n <= 3; ++n) {
                    SingularityOptions opt;
                    opt.resolution = 0.005;
                    opt.threads = ctx.common.threads;
                    K = std::max(K, complexity(b.table(), singularity_set(b, n, opt)).K);
                }
                double s0_min = 1.0;
                for (const auto& row : r.tables[4].rows)
                    if (std::get<std::string>(row[0]) == "estimated")
                        s0_min = std::get<double>(row[2]);
                const auto tail = tail_entropy_bound(s0_min, K, fb.tau_min, fb.tau_max + fb.slack);
                r.table("tail_entropy_bound", {"s0", "K", "tau_min", "tau_max", "value", "caveats"})
                    .add({s0_min, K, fb.tau_min, fb.tau_max + fb.slack, tail.value,
                          std::string("s0 is a sampled lower bound; K is resolution dependent")});

                auto& wt = r.table("weak_star", {"n", "m", "distance"});
                for (std::size_t n = 2; n + 2 <= rep_n_max; n += 2) {
                    const auto a = periodic_orbit_measure(b.table(), cs[n - 2]);
                    const auto c = periodic_orbit_measure(b.table(), cs[n]);
                    wt.add({static_cast<long long>(n), static_cast<long long>(n + 2),
                            weak_star_distance(b.table(), a, c)});
                }

                const auto hits = grazing_orbit_scan(en, rep_n_max, 1e-3);
                double closest = half_pi;
                for (const auto& c : cs)
                    for (const auto& o : c.orbits)
                        closest = std::min(closest, o.grazing_margin);
                r.table("grazing_scan", {"n_max", "threshold", "found", "smallest_margin"})
                    .add({static_cast<long long>(rep_n_max), 1e-3, static_cast<long long>(hits.size()), closest});
                return r;
            };
        });
    }
    // run: subcommand and flags from a config file
    std::string config;
    {
        auto* s = app.add_subcommand("run", "run the command described by a config file's \"run\" block");
        s->add_option("--config", config, "JSON with \"table\" and \"run\" blocks")->required();
        s->add_option("--threads", ctx.common.threads)->capture_default_str();
    }

    try {
        std::reverse(args.begin(), args.end());
        app.parse(args);
    } catch (const CLI::CallForHelp& e) {
        out << app.help();
        return exit_ok;
    } catch (const CLI::CallForAllHelp& e) {
        out << app.help("", CLI::AppFormatMode::All);
        return exit_ok;
    } catch (const CLI::CallForVersion& e) {
        out << tool_name << " " << tool_version << "\n";
        return exit_ok;
    } catch (const CLI::ParseError& e) {
        err << "error: " << e.what() << "\n";
        return exit_config;
    } catch (const Error& e) {
        err << "error: " << e.what() << "\n";
        return exit_code_for(e.code());
    }

    if (app.got_subcommand("run")) {
        try {
            const json cfg = read_json_file(config);
            if (!cfg.contains("run") || !cfg["run"].contains("command"))
                throw Error(ErrorCode::ConfigError, "config needs a run block with a command");
            std::vector<std::string> sub{cfg["run"]["command"].get<std::string>()};
            if (sub[0] == "run")
                throw Error(ErrorCode::ConfigError, "run blocks cannot nest");
            if (cfg.contains("table"))
                sub.insert(sub.end(), {"--table", config});
            for (const auto& [k, v] : cfg["run"].items()) {
                if (k == "command")
                    continue;
                std::string flag = "--" + k;
                std::replace(flag.begin(), flag.end(), '_', '-');
                sub.push_back(flag);
                auto text = [](const json& x) { return x.is_string() ? x.get<std::string>() : x.dump(); };
                if (v.is_array())
                    for (const auto& x : v)
                        sub.push_back(text(x));
                else
                    sub.push_back(text(v));
            }
            if (std::find(sub.begin(), sub.end(), "--threads") == sub.end())
                sub.insert(sub.end(), {"--threads", std::to_string(ctx.common.threads)});
            return run_cli(sub, out, err);
        } catch (const Error& e) {
            err << "error: " << e.what() << "\n";
            return exit_code_for(e.code());
        }
    }

    auto emit = [&](const Report& r) {
        const std::string text = ctx.common.format == "json" ? to_json(r) : to_csv(r);
        if (ctx.common.output == "-")
            out << text;
        else
            write_text(ctx.common.output, text);
    };
    try {
        emit(action());
        return exit_ok;
    } catch (const PartialResult& p) {
        err << "error: " << p.what() << " (partial results written)\n";
        try {
            emit(p.report);
        } catch (const Error&) {
        }
        return exit_numeric;
    } catch (const Error& e) {
        err << "error: " << e.what() << "\n";
        return exit_code_for(e.code());
    }
}

} // namespace sinai::cli
