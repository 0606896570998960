// Acceptance run: one PASS/FAIL line per criterion, exit status 1 if any fail.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <numbers>
#include <sstream>
#include <string>

#include "sinai/cli.hpp"
#include "sinai/thermo.hpp"

using namespace sinai;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

int failures = 0;

void verdict(int id, bool ok, const std::string& detail)
{
    std::printf("%s %2d: %s\n", ok ? "PASS" : "FAIL", id, detail.c_str());
    std::fflush(stdout);
    failures += !ok;
}

// Exceptions count as failures with their message.
void criterion(int id, const std::function<void()>& body)
{
    try {
        body();
    } catch (const std::exception& e) {
        verdict(id, false, std::string("exception: ") + e.what());
    }
}

std::string f(double v, int prec = 6)
{
    char b[64];
    std::snprintf(b, sizeof b, "%.*g", prec, v);
    return b;
}

const Billiard& hex22()
{
    static const Billiard b(build_table(HexagonalFamily{2.2}));
    return b;
}

const OrbitEnumerator& hex22_enum()
{
    static const OrbitEnumerator en(hex22());
    return en;
}

const OrbitCensus& hex22_census(std::size_t n)
{
    static std::map<std::size_t, OrbitCensus> cache;
    auto it = cache.find(n);
    if (it == cache.end())
        it = cache.emplace(n, hex22_enum().census(n)).first;
    return it->second;
}

std::string cli_output(std::vector<std::string> args)
{
    std::ostringstream out, err;
    const int code = cli::run_cli(std::move(args), out, err);
    if (code != 0)
        throw std::runtime_error("cli exit " + std::to_string(code) + ": " + err.str());
    return out.str();
}

} // namespace

int main()
{
    criterion(1, [] {
        const auto t0 = Clock::now();
        const auto q = srb_entropy_quadrature(0.15, 1.0);
        const double dt = seconds_since(t0);
        verdict(1, q.value > 0.36 && q.value > 0.5 * std::log(2.0) && q.error_estimate < 1e-6 && dt < 1.0,
                "hexagonal SRB bound " + f(q.value, 9) + " (> 0.36, > log2/2), quadrature error " +
                    f(q.error_estimate, 2) + ", " + f(dt, 2) + " s");
    });

    criterion(2, [] {
        const auto t0 = Clock::now();
        const double v = srb_entropy_lower_bound(std::sqrt(2.0) / 2.0 - 0.65, 2.5);
        const double dt = seconds_since(t0);
        verdict(2, v > 0.347 && dt < 1.0, "square SRB bound " + f(v, 9) + " (> 0.347), " + f(dt, 2) + " s");
    });

    criterion(3, [] {
        Rng rng(2024);
        double smallest = INFINITY;
        for (int k = 0; k < 10; ++k) {
            const double t = rng.uniform(0.02, 1.0), kap = rng.uniform(0.5, 3.0), h = 1e-3;
            smallest = std::min(smallest, srb_entropy_lower_bound(t + h, kap) - srb_entropy_lower_bound(t, kap));
        }
        verdict(3, smallest > 0.0, "10 forward differences in tau_min, smallest " + f(smallest, 3));
    });

    criterion(4, [] {
        bool ok = true;
        std::string detail;
        const std::vector<std::pair<std::string, TableSpec>> cases = {
            {"hexagonal(2.2)", HexagonalFamily{2.2}},
            {"hexagonal(2.35)", HexagonalFamily{2.35}},
            {"square(0.25,0.4)", SquareFamily{0.25, 0.4}}};
        const bool expected[] = {true, false, true};
        for (std::size_t k = 0; k < cases.size(); ++k) {
            const auto t0 = Clock::now();
            const auto h = finite_horizon_check(build_table(cases[k].second));
            const double dt = seconds_since(t0);
            const bool good = h.finite == expected[k] && (h.finite || h.witness.has_value()) && dt < 5.0;
            ok = ok && good;
            detail += cases[k].first + (h.finite ? " finite" : " infinite");
            if (h.witness)
                detail += " (corridor " + std::to_string(h.witness->p) + "," + std::to_string(h.witness->q) +
                          " width " + f(h.witness->width, 4) + ")";
            detail += " " + f(dt, 2) + " s; ";
        }
        verdict(4, ok, detail);
    });

    criterion(5, [] {
        const auto& b = hex22();
        const auto t0 = Clock::now();
        const auto fb = free_flight_bounds(b);
        const double circ = b.table().scatterer(0).circumference();
        Rng rng(5);
        double roundtrip = 0.0, refl = 0.0, conj = 0.0, tmin = INFINITY, tmax = 0.0;
        std::size_t used = 0;
        while (used < 10000) {
            const PhasePoint x{0, rng.uniform(0.0, circ), rng.uniform(-half_pi, half_pi)};
            if (b.is_singular_input(x))
                continue;
            ++used;
            const auto fwd = b.map(x);
            tmin = std::min(tmin, fwd.tau);
            tmax = std::max(tmax, fwd.tau);
            refl = std::max(refl, reflection_residual(b, fwd.image, b.flow_state(x).direction));
            const auto back = b.inverse(fwd.image);
            roundtrip = std::max(roundtrip, detail::phase_distance(b.table(), back.image, x));
            // R T R = T^{-1}
            const auto rtr = reversed(b.map(reversed(x)).image);
            conj = std::max(conj, detail::phase_distance(b.table(), rtr, b.inverse(x).image));
        }
        const double dt = seconds_since(t0);
        verdict(5,
                roundtrip < 1e-9 && refl < 1e-10 && conj < 1e-10 && tmin >= 0.2 - 1e-9 && tmax <= fb.tau_max &&
                    dt < 10.0,
                "10^4 points: T^-1 T " + f(roundtrip, 2) + ", reflection " + f(refl, 2) + ", R T R vs T^-1 " +
                    f(conj, 2) + ", tau in [" + f(tmin, 8) + ", " + f(tmax, 8) + "] vs tau_max estimate " +
                    f(fb.tau_max, 8) + ", " + f(dt, 2) + " s");
    });

    criterion(6, [] {
        const auto o = find_periodic_orbit(hex22(), {0, {{0, {1, 0}}, {0, {-1, 0}}}});
        if (!o)
            return verdict(6, false, "no orbit returned");
        double phi = 0.0;
        for (const auto& x : o->points)
            phi = std::max(phi, std::abs(x.phi));
        verdict(6, std::abs(o->length - 0.4) < 1e-10 && phi < 1e-10,
                "length " + f(o->length, 15) + ", max |phi| " + f(phi, 2));
    });

    criterion(7, [] {
        bool ok = true;
        std::string detail;
        for (std::size_t n = 2; n <= 6; ++n) {
            const auto fix = hex22_census(n).count;
            const auto cells = count_cells(hex22(), n).cells;
            ok = ok && fix <= cells;
            detail += "n=" + std::to_string(n) + " " + std::to_string(fix) + "<=" + std::to_string(cells) + "; ";
        }
        verdict(7, ok, "#Fix T^n <= cells: " + detail);
    });

    criterion(8, [] {
        // timed from scratch, grammar construction included
        const auto t0 = Clock::now();
        const OrbitEnumerator en(hex22());
        std::vector<OrbitCensus> cs;
        for (std::size_t n = 4; n <= 8; ++n)
            cs.push_back(en.census(n));
        const auto og = entropy_from_orbits(hex22().table(), cs);
        const double dt = seconds_since(t0);
        std::string seq;
        for (const auto& [n, v] : og.sequence)
            seq += std::to_string(n) + ":" + f(v, 4) + " ";
        verdict(8, og.plateau > 0.3 && dt < 600.0,
                "hexagonal(2.2) (1/n) log #Fix T^n " + seq + "plateau " + f(og.plateau, 4) + ", " + f(dt, 1) + " s");
    });

    criterion(9, [] {
        bool ok = true;
        std::string detail;
        for (std::size_t n : {4u, 6u}) {
            const auto mu = periodic_orbit_measure(hex22().table(), hex22_census(n));
            const auto tmu = pushforward(hex22(), mu);
            std::vector<char> used(mu.size(), 0);
            double worst = 0.0;
            for (const auto& a : tmu.atoms()) {
                std::size_t best = mu.size();
                double bd = INFINITY;
                for (std::size_t k = 0; k < mu.size(); ++k) {
                    if (used[k] || mu.atoms()[k].weight != a.weight)
                        continue;
                    const double d = detail::phase_distance(hex22().table(), a.x, mu.atoms()[k].x);
                    if (d < bd) {
                        bd = d;
                        best = k;
                    }
                }
                if (best == mu.size()) {
                    ok = false;
                    break;
                }
                used[best] = 1;
                worst = std::max(worst, bd);
            }
            ok = ok && worst < 1e-8;
            detail += "n=" + std::to_string(n) + " " + std::to_string(mu.size()) + " atoms, worst match " +
                      f(worst, 2) + "; ";
        }
        verdict(9, ok, detail);
    });

    criterion(10, [] {
        double d[3];
        const std::size_t ns[] = {4, 6, 8};
        for (int k = 0; k < 2; ++k) {
            const auto a = periodic_orbit_measure(hex22().table(), hex22_census(ns[k]));
            const auto c = periodic_orbit_measure(hex22().table(), hex22_census(ns[k] + 2));
            d[k] = weak_star_distance(hex22().table(), a, c);
        }
        verdict(10, d[1] <= 1.1 * d[0],
                "d(mu_4, mu_6) = " + f(d[0], 4) + ", d(mu_6, mu_8) = " + f(d[1], 4));
    });

    criterion(11, [] {
        SparseRecurrenceInput paper;
        const Billiard hex(build_table(HexagonalFamily{2.15}));
        const Billiard sq(build_table(SquareFamily{0.25, 0.4}));
        const auto rh = sparse_recurrence_check(hex, ZeroPotential{}, paper);
        const auto rs = sparse_recurrence_check(sq, ZeroPotential{}, paper);
        SparseRecurrenceInput est;
        est.mode = S0Mode::Estimated;
        std::vector<S0Estimate> grid;
        sparse_recurrence_check(hex, ZeroPotential{}, est, &grid);
        bool in_range = !grid.empty(), monotone = true;
        for (const auto& e : grid) {
            in_range = in_range && e.value >= 0.0 && e.value <= 1.0;
            for (const auto& o : grid)
                if (o.n0 == e.n0 && o.phi0 > e.phi0 && o.value > e.value)
                    monotone = false;
        }
        verdict(11, rh.verdict.value_or(false) && rs.verdict.value_or(false) && in_range && monotone,
                "paper mode: hexagonal(2.15) margin " + f(rh.value, 4) + ", square(0.25,0.4) margin " +
                    f(rs.value, 4) + "; estimated grid " + std::to_string(grid.size()) + " values in [0,1]" +
                    (monotone ? ", nonincreasing in phi0" : ", NOT monotone in phi0"));
    });

    criterion(12, [] {
        Rng rng(12);
        double worst = 0.0;
        for (int k = 0; k < 100; ++k) {
            const double s0 = rng.uniform(), K = rng.uniform(1.0, 40.0);
            const double tmin = rng.uniform(0.05, 1.0), tmax = tmin * rng.uniform(1.0, 15.0);
            const double direct = (3.0 + 2.0 * std::floor(tmax / tmin)) * s0 * std::log(2.0 * K);
            worst = std::max(worst, std::abs(tail_entropy_bound(s0, K, tmin, tmax).value - direct));
            const double pm = rng.uniform(-1, 1), m = rng.uniform(), pt = rng.uniform(0, 2), ps = rng.uniform(-1, 1);
            worst = std::max(worst, std::abs(usc_defect_bound(pm, m, pt, ps).value - (pm + m * (pt - ps))));
        }
        const bool trivial = tail_entropy_bound(0.0, 3.0, 0.2, 2.0).value == 0.0 &&
                             usc_defect_bound(0.42, 0.0, 9.0, -3.0).value == 0.42;
        verdict(12, worst == 0.0 && trivial,
                "100 random tuples, largest deviation " + f(worst, 2) + (trivial ? ", trivial cases exact" : ""));
    });

    criterion(13, [] {
        const std::string hex = std::string(SINAI_TABLE_DIR) + "/hex_2.2.json";
        const std::vector<std::vector<std::string>> runs = {
            {"report", "--table", hex, "--n-max", "6", "--seed", "7"},
            {"cells", "--table", hex, "--n-max", "4", "--seed", "3"},
            {"s0", "--table", hex, "--seed", "3"},
            {"orbits", "--table", hex, "--n", "2", "3", "4", "5", "--format", "json"}};
        bool ok = true;
        for (const auto& args : runs) {
            std::string first;
            for (const char* t : {"1", "2", "8"}) {
                auto a = args;
                a.insert(a.end(), {"--threads", t});
                const auto out = cli_output(a);
                if (first.empty())
                    first = out;
                else
                    ok = ok && out == first;
            }
        }
        verdict(13, ok, "report, cells, s0 and orbits outputs compared under 1, 2 and 8 threads");
    });

    std::printf("%d of 13 criteria failed\n", failures);
    return failures == 0 ? 0 : 1;
}
