#pragma once

// Entropy and pressure estimators, the closed-form bounds, and atomic
// measures built from periodic orbits and partition cells.

#include <algorithm>
#include <cmath>
#include <functional>
#include <numbers>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <boost/math/quadrature/gauss_kronrod.hpp>

#include "sinai/dynamics.hpp"
#include "sinai/orbits.hpp"
#include "sinai/potential.hpp"
#include "sinai/singularity.hpp"

namespace sinai {

struct BoundReport {
    std::string name;
    double value = 0.0;
    std::vector<std::pair<std::string, double>> inputs;
    std::vector<std::string> caveats;
    /// For checks: whether the inequality being tested holds at the computed value.
    std::optional<bool> verdict;
};

// ---------------------------------------------------------------------------
// SRB entropy lower bound.

struct Quadrature {
    double value = 0.0;
    double error_estimate = 0.0;
};

/// (1/2) * integral over (-pi/2, pi/2) of log(1 + 2 a / cos phi) cos phi, a = tau_min * kappa_min.
/// Adaptive Gauss-Kronrod (15-point Kronrod extension of 7-point Gauss-Legendre)
/// on [0, pi/2] using the symmetry of the integrand.
inline Quadrature srb_entropy_quadrature(double tau_min, double kappa_min, double tolerance = 1e-12)
{
    if (!(tau_min >= 0.0) || !std::isfinite(tau_min))
        throw Error(ErrorCode::InvalidInput, "tau_min must be a nonnegative number");
    if (!(kappa_min > 0.0) || !std::isfinite(kappa_min))
        throw Error(ErrorCode::InvalidInput, "kappa_min must be positive");
    const double a = 2.0 * tau_min * kappa_min;
    if (a == 0.0)
        return {};
    auto f = [a](double phi) {
        const double c = std::cos(phi);
        // continuous extension by 0 at the grazing end
        return c <= 0.0 ? 0.0 : c * std::log1p(a / c);
    };
    Quadrature q;
    q.value = boost::math::quadrature::gauss_kronrod<double, 15>::integrate(f, 0.0, half_pi, 15, tolerance,
                                                                             &q.error_estimate);
    // the factor 1/2 and the factor 2 from symmetry cancel
    return q;
}

inline double srb_entropy_lower_bound(double tau_min, double kappa_min)
{
    return srb_entropy_quadrature(tau_min, kappa_min).value;
}

// ---------------------------------------------------------------------------
// s0: frequency of near-grazing collisions.

struct S0Estimate {
    std::size_t n0 = 0;
    double phi0 = 0.0;
    double value = 0.0;
    PhasePoint witness;
};

struct S0Search {
    /// Stratified samples per scatterer.
    std::size_t samples = 4000;
    std::uint64_t seed = 1;
    /// Hill-climbing restarts from the best samples, and steps per restart.
    std::size_t climb_starts = 16;
    std::size_t climb_steps = 200;
    unsigned threads = 1;
};

namespace detail {

/// |phi| along x, Tx, ..., T^{n-1}x, or empty when the orbit is singular.
inline std::vector<double> abs_angles(const Billiard& b, PhasePoint x, std::size_t n)
{
    std::vector<double> out;
    out.reserve(n);
    for (std::size_t k = 0; k < n; ++k) {
        out.push_back(std::abs(x.phi));
        if (k + 1 == n)
            break;
        if (b.is_singular_input(x))
            return {};
        try {
            x = b.map(x).image;
        } catch (const Error&) {
            return {};
        }
    }
    return out;
}

inline std::size_t grazing_hits(const std::vector<double>& a, std::size_t n0, double phi0)
{
    std::size_t c = 0;
    for (std::size_t k = 0; k < n0 && k < a.size(); ++k)
        c += a[k] > phi0;
    return c;
}

} // namespace detail

/// s0 on a grid of windows and thresholds from one shared sample set, with
/// hill climbing per grid point. Values are made nonincreasing in phi0 by
/// taking, at each phi0, the best witness found for any larger threshold
/// (which is a valid witness for the smaller one).
inline std::vector<S0Estimate> s0_grid(const Billiard& b, const std::vector<std::size_t>& n0s,
                                       const std::vector<double>& phi0s, const S0Search& cfg = {})
{
    for (double p : phi0s)
        if (!(p >= 0.0 && p < half_pi))
            throw Error(ErrorCode::InvalidInput, "phi0 must lie in [0, pi/2)");
    for (auto n0 : n0s)
        if (n0 == 0)
            throw Error(ErrorCode::InvalidInput, "window n0 must be positive");
    const std::size_t nmax = n0s.empty() ? 0 : *std::max_element(n0s.begin(), n0s.end());
    const auto samples = stratified_sample(b.table(), cfg.samples, cfg.seed);
    std::vector<std::vector<double>> angles(samples.size());
    parallel_for(samples.size(), cfg.threads, [&](std::size_t k) { angles[k] = detail::abs_angles(b, samples[k], nmax); });

    // grid points in order (n0 major, phi0 minor)
    std::vector<S0Estimate> out(n0s.size() * phi0s.size());
    parallel_for(out.size(), cfg.threads, [&](std::size_t g) {
        const std::size_t n0 = n0s[g / phi0s.size()];
        const double phi0 = phi0s[g % phi0s.size()];
        // rank samples, then climb from the best few
        std::vector<std::pair<std::size_t, std::size_t>> ranked;
        for (std::size_t k = 0; k < samples.size(); ++k)
            if (angles[k].size() == nmax)
                ranked.push_back({detail::grazing_hits(angles[k], n0, phi0), k});
        std::stable_sort(ranked.begin(), ranked.end(), [](auto& a, auto& c) { return a.first > c.first; });
        S0Estimate e{n0, phi0, 0.0, samples.empty() ? PhasePoint{} : samples[0]};
        std::size_t best = 0;
        if (!ranked.empty()) {
            best = ranked[0].first;
            e.witness = samples[ranked[0].second];
        }
        const std::size_t starts = std::min(cfg.climb_starts, ranked.size());
        for (std::size_t s = 0; s < starts && best < n0; ++s) {
            Rng rng(cfg.seed, g * 1000003 + s);
            PhasePoint x = samples[ranked[s].second];
            std::size_t cur = ranked[s].first;
            double scale = 0.05;
            for (std::size_t it = 0; it < cfg.climb_steps && cur < n0; ++it) {
                const double circ = b.table().scatterer(x.scatterer).circumference();
                PhasePoint y{x.scatterer, wrap_arclength(x.r + scale * circ * rng.uniform(-1.0, 1.0), circ),
                             std::clamp(x.phi + scale * half_pi * rng.uniform(-1.0, 1.0), -half_pi + 1e-9,
                                        half_pi - 1e-9)};
                const auto a = detail::abs_angles(b, y, n0);
                if (a.size() != n0)
                    continue;
                const std::size_t h = detail::grazing_hits(a, n0, phi0);
                if (h >= cur) {
                    x = y;
                    cur = h;
                } else {
                    scale = std::max(1e-6, scale * 0.97);
                }
            }
            if (cur > best) {
                best = cur;
                e.witness = x;
            }
        }
        e.value = static_cast<double>(best) / static_cast<double>(n0);
        out[g] = e;
    });
    const auto raw = out;
    for (std::size_t i = 0; i < n0s.size(); ++i)
        for (std::size_t j = 0; j < phi0s.size(); ++j)
            for (std::size_t k = 0; k < phi0s.size(); ++k) {
                const auto& hi = raw[i * phi0s.size() + k];
                auto& lo = out[i * phi0s.size() + j];
                if (phi0s[k] >= phi0s[j] && hi.value > lo.value) {
                    lo.value = hi.value;
                    lo.witness = hi.witness;
                }
            }
    return out;
}

inline S0Estimate s0_estimate(const Billiard& b, std::size_t n0, double phi0, const S0Search& cfg = {})
{
    return s0_grid(b, {n0}, {phi0}, cfg).front();
}

// ---------------------------------------------------------------------------
// Sparse recurrence.

enum class S0Mode { Paper, Estimated };

struct SparseRecurrenceInput {
    S0Mode mode = S0Mode::Paper;
    /// Lower bound for P_top(T, g); required unless g is zero.
    std::optional<double> pressure_lower_bound;
    std::vector<std::size_t> n0s{4, 6, 8, 10};
    std::vector<double> phi0s{1.2, 1.3, 1.4, 1.5};
    S0Search search{};
};

/// (P_lb - sup g) - s0 log 2. Positive means the sparse-recurrence
/// inequality holds with the s0 used.
inline BoundReport sparse_recurrence_check(const Billiard& b, const Potential& g, const SparseRecurrenceInput& in = {},
                                           std::vector<S0Estimate>* grid_out = nullptr)
{
    check_potential(b.table(), g);
    const auto fb = free_flight_bounds(b);
    BoundReport rep;
    rep.name = "sparse_recurrence";
    double p_lb = 0.0;
    if (in.pressure_lower_bound) {
        p_lb = *in.pressure_lower_bound;
    } else if (std::holds_alternative<ZeroPotential>(g)) {
        p_lb = srb_entropy_lower_bound(fb.tau_min, min_curvature(b.table()));
        rep.caveats.push_back("pressure lower bound is the SRB entropy bound with exact tau_min and kappa_min");
    } else {
        throw Error(ErrorCode::UnsupportedPotential, "a pressure lower bound is required for a nonzero potential");
    }
    const double sup_g = potential_sup(g, fb.tau_min, fb.tau_max + fb.slack);
    double s0 = 0.5;
    if (in.mode == S0Mode::Estimated) {
        const auto grid = s0_grid(b, in.n0s, in.phi0s, in.search);
        s0 = 1.0;
        for (const auto& e : grid)
            s0 = std::min(s0, e.value);
        if (grid_out)
            *grid_out = grid;
        rep.caveats.push_back("s0 estimates are sampled lower bounds; the check is one-sided");
    } else {
        rep.caveats.push_back("s0 taken as 1/2");
    }
    rep.value = (p_lb - sup_g) - s0 * std::numbers::ln2;
    rep.inputs = {{"pressure_lower_bound", p_lb}, {"sup_g", sup_g}, {"s0", s0}};
    rep.verdict = rep.value > 0.0;
    if (rep.value > 0.0 && rep.value < 1e-3)
        rep.caveats.push_back("margin below 1e-3");
    if (std::holds_alternative<ScaledTauPotential>(g))
        rep.caveats.push_back("sup g uses the estimated tau_max");
    return rep;
}

// ---------------------------------------------------------------------------
// Growth rates.

struct GrowthRate {
    double rate = 0.0;
    std::vector<std::pair<std::size_t, double>> increments; ///< log c_n - log c_{n-1}
};

/// Least-squares slope of log(count) against n.
inline GrowthRate entropy_from_cells(std::vector<std::pair<std::size_t, std::size_t>> counts)
{
    if (counts.size() < 3)
        throw Error(ErrorCode::InsufficientData, "need at least three (n, count) pairs");
    std::sort(counts.begin(), counts.end());
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    for (const auto& [n, c] : counts) {
        if (c == 0)
            throw Error(ErrorCode::InvalidInput, "cell counts must be positive");
        const double x = static_cast<double>(n), y = std::log(static_cast<double>(c));
        sx += x;
        sy += y;
        sxx += x * x;
        sxy += x * y;
    }
    const double m = static_cast<double>(counts.size());
    const double den = m * sxx - sx * sx;
    if (den == 0.0)
        throw Error(ErrorCode::InsufficientData, "need at least two distinct n");
    GrowthRate gr;
    gr.rate = (m * sxy - sx * sy) / den;
    for (std::size_t k = 1; k < counts.size(); ++k)
        gr.increments.push_back({counts[k].first, std::log(static_cast<double>(counts[k].second)) -
                                                      std::log(static_cast<double>(counts[k - 1].second))});
    return gr;
}

struct OrbitGrowth {
    std::vector<std::pair<std::size_t, double>> sequence; ///< (n, (1/n) log sum e^{S_n g})
    double plateau = 0.0;
};

inline double census_sum(const BilliardTable& table, const OrbitCensus& c, const Potential& g)
{
    double s = 0.0;
    for (const auto& o : c.orbits)
        s += static_cast<double>(o.period) *
             std::exp(static_cast<double>(c.period / o.period) * orbit_sum(table, g, o));
    return s;
}

/// Plateau = mean of the last `tail` terms.
inline OrbitGrowth entropy_from_orbits(const BilliardTable& table, const std::vector<OrbitCensus>& censuses,
                                       const Potential& g = ZeroPotential{}, std::size_t tail = 3)
{
    OrbitGrowth out;
    for (const auto& c : censuses) {
        const double s = census_sum(table, c, g);
        if (c.orbits.empty() || !(s > 0.0))
            throw Error(ErrorCode::EmptyCensus, "no periodic orbits at period " + std::to_string(c.period));
        out.sequence.push_back({c.period, std::log(s) / static_cast<double>(c.period)});
    }
    if (out.sequence.empty())
        throw Error(ErrorCode::EmptyCensus, "no censuses supplied");
    const std::size_t k = std::clamp<std::size_t>(tail, 1, out.sequence.size());
    for (std::size_t i = out.sequence.size() - k; i < out.sequence.size(); ++i)
        out.plateau += out.sequence[i].second / static_cast<double>(k);
    return out;
}

// ---------------------------------------------------------------------------
// Closed-form bounds.

inline BoundReport tail_entropy_bound(double s0, double K, double tau_min, double tau_max)
{
    if (!(s0 >= 0.0 && s0 <= 1.0) || !(K >= 1.0) || !(tau_min > 0.0) || !(tau_max >= tau_min) ||
        !std::isfinite(K) || !std::isfinite(tau_max))
        throw Error(ErrorCode::InvalidInput, "need 0 <= s0 <= 1, K >= 1, 0 < tau_min <= tau_max");
    BoundReport r;
    r.name = "tail_entropy_bound";
    r.value = (3.0 + 2.0 * std::floor(tau_max / tau_min)) * s0 * std::log(2.0 * K);
    r.inputs = {{"s0", s0}, {"K", K}, {"tau_min", tau_min}, {"tau_max", tau_max}};
    return r;
}

inline BoundReport usc_defect_bound(double P_mu, double mu_S_mass, double P_top, double P_muS)
{
    if (!(mu_S_mass >= 0.0 && mu_S_mass <= 1.0) || !std::isfinite(P_mu) || !std::isfinite(P_top) ||
        !std::isfinite(P_muS))
        throw Error(ErrorCode::InvalidInput, "singular mass must lie in [0, 1] and pressures must be finite");
    BoundReport r;
    r.name = "usc_defect_bound";
    r.value = mu_S_mass == 0.0 ? P_mu : P_mu + mu_S_mass * (P_top - P_muS);
    r.inputs = {{"P_mu", P_mu}, {"mu_S_mass", mu_S_mass}, {"P_top", P_top}, {"P_muS", P_muS}};
    return r;
}

// ---------------------------------------------------------------------------
// Atomic measures.

struct Atom {
    PhasePoint x;
    double weight = 0.0;
};

class EmpiricalMeasure {
public:
    EmpiricalMeasure() = default;
    explicit EmpiricalMeasure(std::vector<Atom> atoms) : atoms_(std::move(atoms))
    {
        for (const auto& a : atoms_) {
            if (!(a.weight >= 0.0) || std::abs(a.x.phi) > half_pi)
                throw Error(ErrorCode::InvalidInput, "atoms need nonnegative weight and |phi| <= pi/2");
        }
    }

    const std::vector<Atom>& atoms() const { return atoms_; }
    std::size_t size() const { return atoms_.size(); }
    double total() const
    {
        double s = 0.0;
        for (const auto& a : atoms_)
            s += a.weight;
        return s;
    }
    /// Rescales to total mass 1; returns the previous total.
    double normalize()
    {
        const double t = total();
        if (!(t > 0.0))
            throw Error(ErrorCode::EmptyCensus, "cannot normalize a zero measure");
        for (auto& a : atoms_)
            a.weight /= t;
        return t;
    }
    template <typename F>
    double integrate(F&& f) const
    {
        double s = 0.0;
        for (const auto& a : atoms_)
            s += a.weight * f(a.x);
        return s;
    }

private:
    std::vector<Atom> atoms_;
};

/// T_* mu: every atom moved one step, weights unchanged.
inline EmpiricalMeasure pushforward(const Billiard& b, const EmpiricalMeasure& mu)
{
    std::vector<Atom> out;
    out.reserve(mu.size());
    for (const auto& a : mu.atoms())
        out.push_back({b.map(a.x).image, a.weight});
    return EmpiricalMeasure(std::move(out));
}

/// mu_n: atoms at the points of Fix T^n weighted by e^{S_n g}, normalized.
inline EmpiricalMeasure periodic_orbit_measure(const BilliardTable& table, const OrbitCensus& c,
                                               const Potential& g = ZeroPotential{})
{
    if (c.orbits.empty())
        throw Error(ErrorCode::EmptyCensus, "no periodic orbits at period " + std::to_string(c.period));
    std::vector<double> sums;
    for (const auto& o : c.orbits)
        sums.push_back(static_cast<double>(c.period / o.period) * orbit_sum(table, g, o));
    const double shift = *std::max_element(sums.begin(), sums.end()); // avoids overflow
    std::vector<Atom> atoms;
    for (std::size_t k = 0; k < c.orbits.size(); ++k) {
        const double w = std::exp(sums[k] - shift);
        for (const auto& x : c.orbits[k].points)
            atoms.push_back({x, w});
    }
    EmpiricalMeasure mu(std::move(atoms));
    mu.normalize();
    return mu;
}

struct EquilibriumApproximation {
    EmpiricalMeasure measure;
    std::size_t representatives = 0;
    std::size_t dropped = 0;
};

/// Acceptance ratio for a representative: e^{S_n g(x)} >= chi * best found in its cell.
inline constexpr double representative_chi = 0.99;

/// nu_n = sum over cells of e^{S_n g(x_A)} delta_{x_A}, normalized, then
/// averaged along the orbit: (1/n) sum_{i<n} T^i_* nu_n. For nonconstant g each
/// representative is improved by a local search that stays in its cell.
inline EquilibriumApproximation equilibrium_approximation(const Billiard& b, std::size_t n, const Potential& g,
                                                          const std::vector<CellRecord>& cells,
                                                          std::uint64_t seed = 1, unsigned threads = 1)
{
    if (n == 0)
        throw Error(ErrorCode::InvalidInput, "n must be positive");
    check_potential(b.table(), g);
    struct Rep {
        bool ok = false;
        PhasePoint x;
        double s = 0.0;
    };
    std::vector<Rep> reps(cells.size());
    parallel_for(cells.size(), threads, [&](std::size_t k) {
        const auto& cell = cells[k];
        auto sum_in_cell = [&](const PhasePoint& y) -> std::optional<double> {
            const auto it = try_itinerary(b, y, n);
            if (!it || it->symbols != cell.itinerary.symbols || y.scatterer != cell.itinerary.start)
                return std::nullopt;
            return birkhoff_sum(b, g, y, n);
        };
        const auto s0 = sum_in_cell(cell.representative);
        if (!s0)
            return;
        Rep r{true, cell.representative, *s0};
        if (!std::holds_alternative<ZeroPotential>(g)) {
            Rng rng(seed, k);
            double scale = 1e-2;
            int stale = 0;
            for (int t = 0; t < 256 && stale < 16; ++t) {
                const double circ = b.table().scatterer(r.x.scatterer).circumference();
                const PhasePoint y{r.x.scatterer, wrap_arclength(r.x.r + scale * rng.uniform(-1.0, 1.0), circ),
                                   std::clamp(r.x.phi + scale * rng.uniform(-1.0, 1.0), -half_pi + 1e-9, half_pi - 1e-9)};
                const auto s = sum_in_cell(y);
                // stop once no trial beats the current point by more than the chi factor
                stale = s && *s > r.s - std::log(representative_chi) ? 0 : stale + 1;
                if (s && *s > r.s) {
                    r.x = y;
                    r.s = *s;
                } else {
                    scale *= 0.9;
                }
            }
        }
        reps[k] = r;
    });

    EquilibriumApproximation out;
    double shift = -std::numeric_limits<double>::infinity();
    for (const auto& r : reps)
        if (r.ok)
            shift = std::max(shift, r.s);
    std::vector<Atom> atoms;
    for (const auto& r : reps) {
        if (!r.ok) {
            ++out.dropped;
            continue;
        }
        ++out.representatives;
        const double w = std::exp(r.s - shift) / static_cast<double>(n);
        PhasePoint x = r.x;
        for (std::size_t i = 0; i < n; ++i) {
            atoms.push_back({x, w});
            if (i + 1 < n)
                x = b.map(x).image;
        }
    }
    out.measure = EmpiricalMeasure(std::move(atoms));
    if (out.measure.size() > 0)
        out.measure.normalize();
    return out;
}

// ---------------------------------------------------------------------------
// Weak-* comparison.

/// One test function: scatterer indicator times f_a(u) * h_b(w), with
/// u = r / circumference and w = phi / (pi/2); a, b index
/// {1, cos 2 pi u, sin 2 pi u, cos 4 pi u, sin 4 pi u} and
/// {1, cos pi w, sin pi w, cos 2 pi w, sin 2 pi w}.
struct TestFunction {
    std::size_t scatterer = 0;
    int a = 0;
    int b = 0;
};

inline int trig_order(int k) { return (k + 1) / 2; }

inline double trig_basis(int k, double t)
{
    switch (k) {
    case 0: return 1.0;
    case 1: return std::cos(2.0 * std::numbers::pi * t);
    case 2: return std::sin(2.0 * std::numbers::pi * t);
    case 3: return std::cos(4.0 * std::numbers::pi * t);
    default: return std::sin(4.0 * std::numbers::pi * t);
    }
}

/// The first m functions ordered by total trigonometric order, then scatterer, then (a, b).
inline std::vector<TestFunction> test_dictionary(std::size_t scatterers, std::size_t m = 32)
{
    std::vector<TestFunction> all;
    for (std::size_t i = 0; i < scatterers; ++i)
        for (int a = 0; a < 5; ++a)
            for (int c = 0; c < 5; ++c)
                all.push_back({i, a, c});
    std::stable_sort(all.begin(), all.end(), [](const TestFunction& x, const TestFunction& y) {
        const int ox = trig_order(x.a) + trig_order(x.b), oy = trig_order(y.a) + trig_order(y.b);
        if (ox != oy)
            return ox < oy;
        return x.scatterer < y.scatterer;
    });
    if (all.size() > m)
        all.resize(m);
    return all;
}

inline double evaluate(const BilliardTable& t, const TestFunction& f, const PhasePoint& x)
{
    if (x.scatterer != f.scatterer)
        return 0.0;
    const double u = x.r / t.scatterer(x.scatterer).circumference();
    // phi/(pi/2) in [-1, 1], mapped to half a period so that w = +-1 differ
    const double w = 0.5 * x.phi / half_pi;
    return trig_basis(f.a, u) * trig_basis(f.b, w);
}

inline double weak_star_distance(const BilliardTable& t, const EmpiricalMeasure& mu, const EmpiricalMeasure& nu,
                                 std::size_t m = 32)
{
    double d = 0.0;
    for (const auto& f : test_dictionary(t.size(), m)) {
        auto eval = [&](const PhasePoint& x) { return evaluate(t, f, x); };
        d = std::max(d, std::abs(mu.integrate(eval) - nu.integrate(eval)));
    }
    return d;
}

} // namespace sinai
