#include <gtest/gtest.h>

#include <boost/math/quadrature/tanh_sinh.hpp>
#include <cmath>
#include <numbers>

#include "sinai/thermo.hpp"

using namespace sinai;

namespace {

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

/// Independent quadrature: double-exponential rule over the full interval.
double srb_oracle(double tau, double kappa)
{
    boost::math::quadrature::tanh_sinh<double> ts;
    auto f = [&](double phi) {
        const double c = std::cos(phi);
        return c <= 0.0 ? 0.0 : std::log(1.0 + 2.0 * tau * kappa / c) * c;
    };
    return 0.5 * ts.integrate(f, -std::numbers::pi / 2, std::numbers::pi / 2, 1e-14);
}

} // namespace

TEST(SrbBound, ReferenceValues)
{
    EXPECT_EQ(srb_entropy_lower_bound(0.0, 1.0), 0.0);
    const double hex = srb_entropy_lower_bound(0.15, 1.0);
    EXPECT_GT(hex, 0.36);
    EXPECT_GT(hex, 0.5 * std::log(2.0));
    EXPECT_NEAR(hex, srb_oracle(0.15, 1.0), 1e-9);
    const double sq = srb_entropy_lower_bound(std::sqrt(2.0) / 2.0 - 0.65, 2.5);
    EXPECT_GT(sq, 0.347);
    EXPECT_NEAR(sq, srb_oracle(std::sqrt(2.0) / 2.0 - 0.65, 2.5), 1e-9);
    EXPECT_LT(srb_entropy_quadrature(0.15, 1.0).error_estimate, 1e-6);
    EXPECT_THROW(srb_entropy_lower_bound(-0.1, 1.0), Error);
}

TEST(SrbBound, MatchesOracleAndIsIncreasing)
{
    Rng rng(5);
    for (int k = 0; k < 10; ++k) {
        const double t = rng.uniform(0.01, 1.0), kap = rng.uniform(0.2, 5.0);
        const double v = srb_entropy_lower_bound(t, kap);
        EXPECT_NEAR(v, srb_oracle(t, kap), 1e-9);
        EXPECT_GT(srb_entropy_lower_bound(t + 1e-4, kap) - v, 0.0);
        EXPECT_GT(srb_entropy_lower_bound(t, kap + 1e-4) - v, 0.0);
        // tighter tolerance barely moves the value
        EXPECT_NEAR(srb_entropy_quadrature(t, kap, 1e-14).value, v, 1e-8);
    }
}

TEST(S0, BasicProperties)
{
    const std::vector<double> phis{0.0, 0.8, 1.2, 1.4, 1.5};
    const auto grid = s0_grid(hex22(), {10}, phis, {.samples = 1000});
    EXPECT_DOUBLE_EQ(grid[0].value, 1.0);
    for (std::size_t k = 0; k < grid.size(); ++k) {
        EXPECT_GE(grid[k].value, 0.0);
        EXPECT_LE(grid[k].value, 1.0);
        if (k) {
            EXPECT_LE(grid[k].value, grid[k - 1].value);
        }
    }
    EXPECT_LT(grid.back().value, 1.0);

    // the witness really achieves the reported frequency
    const auto e = s0_estimate(hex22(), 10, 1.4, {.samples = 1000});
    EXPECT_LT(e.value, 1.0);
    PhasePoint x = e.witness;
    int hits = 0;
    for (int k = 0; k < 10; ++k) {
        hits += std::abs(x.phi) > 1.4;
        x = hex22().map(x).image;
    }
    EXPECT_DOUBLE_EQ(hits / 10.0, e.value);
}

TEST(SparseRecurrence, HalfS0ModeCertifiesReferenceTables)
{
    const Billiard hex(build_table(HexagonalFamily{2.15}));
    const auto r = sparse_recurrence_check(hex, ZeroPotential{});
    EXPECT_NEAR(r.value, srb_entropy_lower_bound(0.15, 1.0) - 0.5 * std::log(2.0), 1e-12);
    ASSERT_TRUE(r.verdict);
    EXPECT_TRUE(*r.verdict);

    const Billiard sq(build_table(SquareFamily{0.25, 0.4}));
    const auto s = sparse_recurrence_check(sq, ZeroPotential{});
    EXPECT_TRUE(*s.verdict);
    EXPECT_LT(s.value, 1e-3);
    EXPECT_FALSE(s.caveats.empty());

    EXPECT_THROW(sparse_recurrence_check(hex, ScaledTauPotential{-0.5}), Error);
    SparseRecurrenceInput in;
    in.pressure_lower_bound = 1.0;
    const auto w = sparse_recurrence_check(hex, ScaledTauPotential{-0.5}, in);
    EXPECT_NEAR(w.value, 1.0 + 0.5 * 0.15 - 0.5 * std::log(2.0), 1e-12);
}

TEST(SparseRecurrence, EstimatedModeGrid)
{
    SparseRecurrenceInput in;
    in.mode = S0Mode::Estimated;
    in.search.samples = 1000;
    std::vector<S0Estimate> grid;
    const auto r = sparse_recurrence_check(hex22(), ZeroPotential{}, in, &grid);
    ASSERT_EQ(grid.size(), in.n0s.size() * in.phi0s.size());
    double m = 1.0;
    for (std::size_t i = 0; i < in.n0s.size(); ++i)
        for (std::size_t j = 0; j < in.phi0s.size(); ++j) {
            const auto& e = grid[i * in.phi0s.size() + j];
            EXPECT_GE(e.value, 0.0);
            EXPECT_LE(e.value, 1.0);
            if (j) {
                EXPECT_LE(e.value, grid[i * in.phi0s.size() + j - 1].value);
            }
            m = std::min(m, e.value);
        }
    EXPECT_NEAR(r.value, srb_entropy_lower_bound(0.2, 1.0) - m * std::log(2.0), 1e-12);
}

TEST(Growth, CellRates)
{
    std::vector<std::pair<std::size_t, std::size_t>> pow2, flat;
    for (std::size_t n = 1; n <= 6; ++n) {
        pow2.push_back({n, std::size_t{1} << n});
        flat.push_back({n, 7});
    }
    EXPECT_NEAR(entropy_from_cells(pow2).rate, std::log(2.0), 1e-14);
    EXPECT_NEAR(entropy_from_cells(flat).rate, 0.0, 1e-14);
    EXPECT_THROW(entropy_from_cells({{1, 2}, {2, 4}}), Error);

    std::vector<std::pair<std::size_t, std::size_t>> cells;
    for (std::size_t n = 1; n <= 5; ++n)
        cells.push_back({n, count_cells(hex22(), n, {.budget = 4000}).cells});
    EXPECT_GE(entropy_from_cells(cells).rate, srb_entropy_lower_bound(0.2, 1.0));
}

TEST(Growth, OrbitRatesBelowCellIncrements)
{
    std::vector<OrbitCensus> cs;
    std::vector<std::pair<std::size_t, std::size_t>> cells;
    for (std::size_t n = 2; n <= 5; ++n) {
        cs.push_back(hex22_enum().census(n));
        cells.push_back({n, count_cells(hex22(), n).cells});
    }
    const auto og = entropy_from_orbits(hex22().table(), cs);
    for (const auto& [n, v] : og.sequence) {
        const double cell_rate = std::log(static_cast<double>(cells[n - 2].second)) / static_cast<double>(n);
        EXPECT_LE(v, cell_rate) << "n=" << n;
    }
    EXPECT_NEAR(og.plateau, (og.sequence[1].second + og.sequence[2].second + og.sequence[3].second) / 3.0, 1e-15);
    EXPECT_THROW(entropy_from_orbits(hex22().table(), {OrbitCensus{}}), Error);
}

TEST(Bounds, MatchDirectArithmetic)
{
    Rng rng(8);
    for (int k = 0; k < 100; ++k) {
        const double s0 = rng.uniform(), K = rng.uniform(1.0, 50.0);
        const double tmin = rng.uniform(0.05, 1.0), tmax = tmin * rng.uniform(1.0, 20.0);
        const double direct = (3.0 + 2.0 * std::floor(tmax / tmin)) * s0 * std::log(2.0 * K);
        EXPECT_EQ(tail_entropy_bound(s0, K, tmin, tmax).value, direct);

        const double pm = rng.uniform(-1, 1), mass = rng.uniform(), pt = rng.uniform(0, 2), ps = rng.uniform(-1, 1);
        EXPECT_EQ(usc_defect_bound(pm, mass, pt, ps).value, pm + mass * (pt - ps));
    }
    EXPECT_EQ(tail_entropy_bound(0.0, 3.0, 0.2, 2.0).value, 0.0);
    EXPECT_EQ(tail_entropy_bound(1.0, 1.0, 0.5, 0.5).value, 5.0 * std::log(2.0));
    EXPECT_EQ(usc_defect_bound(0.42, 0.0, 9.0, -3.0).value, 0.42);
    EXPECT_EQ(usc_defect_bound(0.0, 1.0, 0.7, 0.0).value, 0.7);
    EXPECT_EQ(usc_defect_bound(0.5, 0.3, 1.0, 0.0).value, 0.5 + 0.3 * 1.0);
    EXPECT_THROW(usc_defect_bound(0.0, 1.5, 0.0, 0.0), Error);
    EXPECT_THROW(tail_entropy_bound(0.5, 0.5, 0.2, 1.0), Error);
}

TEST(Measures, PeriodicOrbitMeasureIsInvariant)
{
    const auto c = hex22_enum().census(6);
    const auto mu = periodic_orbit_measure(hex22().table(), c);
    EXPECT_NEAR(mu.total(), 1.0, 1e-12);
    EXPECT_EQ(mu.size(), c.count);
    for (const auto& a : mu.atoms())
        EXPECT_EQ(a.weight, mu.atoms()[0].weight);

    const auto tmu = pushforward(hex22(), mu);
    // every pushed atom lands on an original atom of identical weight
    std::vector<char> used(mu.size(), 0);
    for (const auto& a : tmu.atoms()) {
        std::size_t hit = mu.size();
        for (std::size_t k = 0; k < mu.size(); ++k)
            if (!used[k] && detail::phase_distance(hex22().table(), a.x, mu.atoms()[k].x) < 1e-8) {
                hit = k;
                break;
            }
        ASSERT_LT(hit, mu.size());
        EXPECT_EQ(a.weight, mu.atoms()[hit].weight);
        used[hit] = 1;
    }
    EXPECT_THROW(periodic_orbit_measure(hex22().table(), OrbitCensus{}), Error);
}

TEST(Measures, WeightedOrbitMeasure)
{
    const ScaledTauPotential g{-1.0};
    const auto c = hex22_enum().census(4);
    const auto mu = periodic_orbit_measure(hex22().table(), c, g);
    double z = 0.0;
    for (const auto& o : c.orbits)
        z += o.period * std::exp(-static_cast<double>(4 / o.period) * o.length);
    std::size_t k = 0;
    for (const auto& o : c.orbits)
        for (std::size_t m = 0; m < o.period; ++m, ++k)
            EXPECT_NEAR(mu.atoms()[k].weight, std::exp(-static_cast<double>(4 / o.period) * o.length) / z, 1e-14);
}

TEST(Measures, EquilibriumApproximation)
{
    const auto cells = count_cells(hex22(), 1, {.budget = 500});
    const auto one = equilibrium_approximation(hex22(), 1, ZeroPotential{}, cells.records);
    EXPECT_EQ(one.representatives, cells.cells);
    EXPECT_EQ(one.dropped, 0u);
    for (const auto& a : one.measure.atoms())
        EXPECT_NEAR(a.weight, 1.0 / static_cast<double>(cells.cells), 1e-15);

    const auto fb = free_flight_bounds(hex22());
    const auto c3 = count_cells(hex22(), 3, {.budget = 2000});
    for (const Potential& g : {Potential{ZeroPotential{}}, Potential{ScaledTauPotential{-0.8}}}) {
        const auto eq = equilibrium_approximation(hex22(), 3, g, c3.records);
        EXPECT_NEAR(eq.measure.total(), 1.0, 1e-12);
        EXPECT_EQ(eq.measure.size(), 3 * eq.representatives);
        const double tau = eq.measure.integrate([&](const PhasePoint& x) { return hex22().map(x).tau; });
        EXPECT_GE(tau, fb.tau_min);
        EXPECT_LE(tau, fb.tau_max + fb.slack);
    }
}

TEST(WeakStar, DistanceProperties)
{
    const auto a = periodic_orbit_measure(hex22().table(), hex22_enum().census(4));
    const auto b = periodic_orbit_measure(hex22().table(), hex22_enum().census(5));
    EXPECT_EQ(weak_star_distance(hex22().table(), a, a), 0.0);
    EXPECT_EQ(weak_star_distance(hex22().table(), a, b), weak_star_distance(hex22().table(), b, a));
    EXPECT_GT(weak_star_distance(hex22().table(), a, b), 0.0);
    EXPECT_EQ(test_dictionary(1).size(), 25u);
    EXPECT_EQ(test_dictionary(2).size(), 32u);
    // a point mass against its rotation by a quarter turn is told apart
    const EmpiricalMeasure p({{{0, 0.0, 0.0}, 1.0}});
    const EmpiricalMeasure q({{{0, std::numbers::pi / 2, 0.0}, 1.0}});
    EXPECT_NEAR(weak_star_distance(hex22().table(), p, q), 2.0, 1e-12);
}
