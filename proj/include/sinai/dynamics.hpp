#pragma once

// Collision map of the billiard, its inverse, and free-flight queries.
//
// Collisions are found in the universal cover: from a point on scatterer i in
// the reference cell, every translate whose center lies within the flight
// bound is tested with an exact ray-circle intersection. Symbols record the
// target scatterer and its lattice offset from the cell of the departure point.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <numeric>
#include <optional>
#include <string>
#include <vector>

#include "sinai/error.hpp"
#include "sinai/geometry.hpp"
#include "sinai/parallel.hpp"
#include "sinai/vec2.hpp"

namespace sinai {

inline constexpr double half_pi = 0.5 * std::numbers::pi;

/// Collision coordinates: phi is the angle from the outward normal to the
/// outgoing velocity, positive towards the counter-clockwise tangent.
struct PhasePoint {
    std::size_t scatterer = 0;
    double r = 0.0;
    double phi = 0.0;
};

struct Symbol {
    std::size_t scatterer = 0;
    Cell translate;

    friend constexpr bool operator==(const Symbol&, const Symbol&) = default;
    friend constexpr auto operator<=>(const Symbol&, const Symbol&) = default;
};

struct CollisionStep {
    PhasePoint image;
    double tau = 0.0;
    Symbol symbol;
    double grazing_margin = 0.0;
};

struct FlowState {
    Vec2 position;
    Vec2 direction;
};

struct RayHit {
    FlowState hit; ///< hit position in the plane (same frame as the input) and incoming direction
    double time = 0.0;
    Symbol symbol; ///< target scatterer and the lattice cell of the hit translate
    Vec2 target_center;
};

struct DynamicsOptions {
    /// Longest free flight searched; 0 selects 3 cell diameters.
    double flight_bound = 0.0;
    /// Points within this angle of +-pi/2 are rejected as singular input.
    double grazing_cutoff = 1e-12;
};

/// Reflects phase point angle: (r, phi) -> (r, -phi).
inline PhasePoint reversed(PhasePoint x) { return {x.scatterer, x.r, -x.phi}; }

inline double grazing_margin(double phi) { return std::max(0.0, half_pi - std::abs(phi)); }

class Billiard {
public:
    explicit Billiard(BilliardTable table, DynamicsOptions options = {})
        : table_(std::move(table)), options_(options)
    {
        if (options_.flight_bound <= 0.0)
            options_.flight_bound = 3.0 * table_.cell_diameter();
        candidates_.resize(table_.size());
        for (std::size_t i = 0; i < table_.size(); ++i)
            candidates_[i] = collect_candidates(table_.scatterer(i).center, table_.scatterer(i).radius, true, i);
    }

    const BilliardTable& table() const { return table_; }
    const DynamicsOptions& options() const { return options_; }
    double flight_bound() const { return options_.flight_bound; }

    FlowState flow_state(const PhasePoint& x) const
    {
        const auto frame = boundary_frame(table_, x.scatterer, x.r);
        return {frame.position, std::cos(x.phi) * frame.outward_normal + std::sin(x.phi) * frame.tangent};
    }

    /// Earliest positive-time hit of an arbitrary ray. The position is reduced
    /// to the fundamental cell first; the returned symbol cell is relative to
    /// the cell containing the start point.
    RayHit next_collision(const FlowState& state) const
    {
        const double det = cross(table_.a1(), table_.a2());
        const double s = cross(state.position, table_.a2()) / det;
        const double t = cross(table_.a1(), state.position) / det;
        const Cell base{static_cast<int>(std::floor(s)), static_cast<int>(std::floor(t))};
        const Vec2 local = state.position - table_.translate(base);
        const auto cands = collect_candidates(local, 0.0, false, 0);
        RayHit hit = trace(local, normalized(state.direction), cands);
        hit.hit.position += table_.translate(base);
        hit.target_center += table_.translate(base);
        return hit;
    }

    /// One step of the collision map.
    CollisionStep map(const PhasePoint& x) const
    {
        check_input(x);
        const FlowState st = flow_state(x);
        const RayHit hit = trace(st.position, st.direction, candidates_[x.scatterer]);
        return landing(hit, st.direction, hit.symbol);
    }

    /// One step of the inverse map, traced backwards along the incoming ray.
    CollisionStep inverse(const PhasePoint& x) const
    {
        check_input(x);
        const auto frame = boundary_frame(table_, x.scatterer, x.r);
        // incoming velocity: mirror image of the outgoing one across the tangent line
        const Vec2 incoming = -std::cos(x.phi) * frame.outward_normal + std::sin(x.phi) * frame.tangent;
        const RayHit hit = trace(frame.position, -incoming, candidates_[x.scatterer]);
        const Scatterer& s = table_.scatterer(hit.symbol.scatterer);
        const Vec2 n = normalized(hit.hit.position - hit.target_center);
        CollisionStep step;
        step.image.scatterer = hit.symbol.scatterer;
        step.image.r = arclength_of(s, n);
        step.image.phi = std::clamp(std::atan2(dot(incoming, perp(n)), dot(incoming, n)), -half_pi, half_pi);
        step.tau = hit.time;
        step.symbol = hit.symbol;
        step.grazing_margin = grazing_margin(step.image.phi);
        return step;
    }

    bool is_singular_input(const PhasePoint& x) const
    {
        return !(std::abs(x.phi) < half_pi - options_.grazing_cutoff);
    }

private:
    struct Candidate {
        std::size_t scatterer;
        Cell cell;
        Vec2 center;
        double radius;
        double lower_bound; ///< no hit on this translate can happen earlier
    };

    void check_input(const PhasePoint& x) const
    {
        if (x.scatterer >= table_.size())
            throw Error(ErrorCode::IndexOutOfRange, "scatterer index " + std::to_string(x.scatterer));
        if (!std::isfinite(x.phi) || !std::isfinite(x.r))
            throw Error(ErrorCode::InvalidInput, "non-finite phase point");
        if (is_singular_input(x))
            throw Error(ErrorCode::GrazingInput, "phi = " + std::to_string(x.phi) + " is within the grazing cutoff");
    }

    /// Translates whose center is within flight_bound + own radius + target radius of `origin`.
    std::vector<Candidate> collect_candidates(Vec2 origin, double origin_radius, bool exclude_self,
                                              std::size_t self) const
    {
        const Vec2 a1 = table_.a1(), a2 = table_.a2();
        // smallest singular value of [a1 a2] bounds |m a1 + n a2| from below
        const double p = norm2(a1) + norm2(a2);
        const double q = std::abs(cross(a1, a2));
        const double smin = std::sqrt(std::max(1e-300, 0.5 * (p - std::sqrt(std::max(0.0, p * p - 4.0 * q * q)))));
        const double reach = options_.flight_bound + origin_radius + table_.max_radius() + table_.cell_diameter();
        const int range = static_cast<int>(std::ceil(reach / smin)) + 1;

        std::vector<Candidate> out;
        for (int m = -range; m <= range; ++m) {
            for (int n = -range; n <= range; ++n) {
                for (std::size_t j = 0; j < table_.size(); ++j) {
                    if (exclude_self && j == self && m == 0 && n == 0)
                        continue;
                    const Scatterer& s = table_.scatterer(j);
                    const Vec2 c = s.center + table_.translate({m, n});
                    const double dist = norm(c - origin);
                    if (dist > options_.flight_bound + origin_radius + s.radius)
                        continue;
                    out.push_back({j, {m, n}, c, s.radius, dist - origin_radius - s.radius});
                }
            }
        }
        std::sort(out.begin(), out.end(), [](const Candidate& a, const Candidate& b) {
            if (a.lower_bound != b.lower_bound)
                return a.lower_bound < b.lower_bound;
            if (a.scatterer != b.scatterer)
                return a.scatterer < b.scatterer;
            return a.cell < b.cell;
        });
        return out;
    }

    RayHit trace(Vec2 p, Vec2 v, const std::vector<Candidate>& cands) const
    {
        double best = std::numeric_limits<double>::infinity();
        const Candidate* winner = nullptr;
        bool tie = false;
        for (const auto& c : cands) {
            if (c.lower_bound > best)
                break;
            const Vec2 w = p - c.center;
            const double b = dot(v, w);
            if (b >= 0.0)
                continue; // moving away from this disk
            const Vec2 off = w - b * v;
            const double disc = c.radius * c.radius - norm2(off);
            if (disc < 0.0)
                continue;
            const double wn = norm(w);
            const double num = (wn - c.radius) * (wn + c.radius);
            const double t = num / (-b + std::sqrt(disc));
            if (!(t > 0.0))
                continue;
            if (t < best) {
                tie = winner != nullptr && best - t <= 1e-15 * std::max(1.0, t);
                best = t;
                winner = &c;
            } else if (t - best <= 1e-15 * std::max(1.0, t)) {
                tie = true;
            }
        }
        if (winner == nullptr || best > options_.flight_bound)
            throw Error(ErrorCode::NoCollisionWithinBound,
                        "no scatterer within flight bound " + std::to_string(options_.flight_bound));
        if (tie)
            throw Error(ErrorCode::GrazingInput, "simultaneous collision with two scatterers");
        RayHit hit;
        hit.hit = {p + best * v, v};
        hit.time = best;
        hit.symbol = {winner->scatterer, winner->cell};
        hit.target_center = winner->center;
        return hit;
    }

    CollisionStep landing(const RayHit& hit, Vec2 v, Symbol symbol) const
    {
        const Scatterer& s = table_.scatterer(symbol.scatterer);
        const Vec2 n = normalized(hit.hit.position - hit.target_center);
        const Vec2 out = v - 2.0 * dot(v, n) * n;
        CollisionStep step;
        step.image.scatterer = symbol.scatterer;
        step.image.r = arclength_of(s, n);
        step.image.phi = std::clamp(std::atan2(dot(out, perp(n)), dot(out, n)), -half_pi, half_pi);
        step.tau = hit.time;
        step.symbol = symbol;
        step.grazing_margin = grazing_margin(step.image.phi);
        return step;
    }

    BilliardTable table_;
    DynamicsOptions options_;
    std::vector<std::vector<Candidate>> candidates_;
};

inline CollisionStep billiard_map(const Billiard& b, const PhasePoint& x) { return b.map(x); }
inline CollisionStep billiard_map_inverse(const Billiard& b, const PhasePoint& x) { return b.inverse(x); }

/// Outgoing velocity of a phase point against the reflection law at its
/// collision: returns | angle_in - angle_out | relative to the normal.
inline double reflection_residual(const Billiard& b, const PhasePoint& x, Vec2 incoming)
{
    const auto frame = boundary_frame(b.table(), x.scatterer, x.r);
    const Vec2 out = b.flow_state(x).direction;
    const double in_angle = std::atan2(dot(incoming, frame.tangent), -dot(incoming, frame.outward_normal));
    const double out_angle = std::atan2(dot(out, frame.tangent), dot(out, frame.outward_normal));
    return std::abs(in_angle - out_angle);
}

// ---------------------------------------------------------------------------
// Free-flight bounds.

struct FlightBounds {
    double tau_min = 0.0;
    double tau_max = 0.0;
    bool tau_min_exact = true;
    bool tau_max_estimate = true;
    /// Added to tau_max when used as an upper bound for sampled flights.
    double slack = 0.0;
    PhasePoint tau_max_witness;
};

struct FlightSampling {
    std::size_t budget = 40000;
    std::uint64_t seed = 1;
    std::size_t refine_starts = 48;
    std::size_t refine_iterations = 600;
    unsigned threads = 1;
};

/// Free-flight time from x, or nullopt when x is singular.
inline std::optional<double> free_flight(const Billiard& b, const PhasePoint& x)
{
    if (b.is_singular_input(x))
        return std::nullopt;
    try {
        return b.map(x).tau;
    } catch (const Error&) {
        return std::nullopt;
    }
}

/// Stratified sample of phase space: `per_scatterer` points per scatterer on a
/// jittered grid in (r, sin phi), so the sample is uniform for the invariant
/// measure cos(phi) dr dphi.
inline std::vector<PhasePoint> stratified_sample(const BilliardTable& table, std::size_t per_scatterer,
                                                 std::uint64_t seed)
{
    std::vector<PhasePoint> out;
    const auto side = static_cast<std::size_t>(std::max(1.0, std::floor(std::sqrt(static_cast<double>(per_scatterer)))));
    Rng rng(seed);
    for (std::size_t i = 0; i < table.size(); ++i) {
        const double circ = table.scatterer(i).circumference();
        for (std::size_t a = 0; a < side; ++a) {
            for (std::size_t c = 0; c < side; ++c) {
                const double u = (static_cast<double>(a) + rng.uniform()) / static_cast<double>(side);
                const double w = (static_cast<double>(c) + rng.uniform()) / static_cast<double>(side);
                out.push_back({i, u * circ, std::asin(std::clamp(2.0 * w - 1.0, -1.0, 1.0))});
            }
        }
    }
    return out;
}

inline FlightBounds free_flight_bounds(const Billiard& b, const FlightSampling& cfg = {})
{
    FlightBounds fb;
    // The shortest segment joining two disjoint disks runs along their line of
    // centers and cannot be obstructed, so the minimum gap is attained.
    fb.tau_min = b.table().min_gap();
    fb.tau_min_exact = true;

    // Long flights start close to grazing, where the invariant-measure grid is
    // sparse; search on a grid uniform in phi instead.
    const auto per = std::max<std::size_t>(1, cfg.budget / b.table().size());
    auto samples = stratified_sample(b.table(), per, cfg.seed);
    for (auto& x : samples)
        x.phi = std::sin(x.phi) * half_pi;
    std::vector<double> taus(samples.size(), -1.0);
    parallel_for(samples.size(), cfg.threads, [&](std::size_t k) {
        if (auto t = free_flight(b, samples[k]))
            taus[k] = *t;
    });

    std::vector<std::size_t> order(samples.size());
    std::iota(order.begin(), order.end(), 0);
    const std::size_t starts = std::min(cfg.refine_starts, order.size());
    std::partial_sort(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(starts), order.end(),
                      [&](std::size_t a, std::size_t c) { return taus[a] > taus[c] || (taus[a] == taus[c] && a < c); });

    std::vector<std::pair<double, PhasePoint>> refined(starts);
    parallel_for(starts, cfg.threads, [&](std::size_t s) {
        PhasePoint best = samples[order[s]];
        double best_tau = taus[order[s]];
        const double circ = b.table().scatterer(best.scatterer).circumference();
        double step_r = circ / std::sqrt(static_cast<double>(per));
        double step_phi = std::numbers::pi / std::sqrt(static_cast<double>(per));
        Rng rng(cfg.seed, 1000 + s);
        for (std::size_t it = 0; it < cfg.refine_iterations; ++it) {
            PhasePoint trial = best;
            trial.r = wrap_arclength(best.r + step_r * rng.uniform(-1.0, 1.0), circ);
            trial.phi = std::clamp(best.phi + step_phi * rng.uniform(-1.0, 1.0), -half_pi, half_pi);
            const auto t = free_flight(b, trial);
            if (t && *t > best_tau) {
                best_tau = *t;
                best = trial;
            } else if (it % 20 == 19) {
                step_r *= 0.7;
                step_phi *= 0.7;
            }
        }
        refined[s] = {best_tau, best};
    });

    fb.tau_max = 0.0;
    for (std::size_t k = 0; k < samples.size(); ++k) {
        if (taus[k] > fb.tau_max) {
            fb.tau_max = taus[k];
            fb.tau_max_witness = samples[k];
        }
    }
    for (const auto& [t, x] : refined) {
        if (t > fb.tau_max) {
            fb.tau_max = t;
            fb.tau_max_witness = x;
        }
    }
    fb.tau_max_estimate = true;
    fb.slack = 1e-3 * fb.tau_max;
    return fb;
}

// ---------------------------------------------------------------------------
// Corridor search.

struct Corridor {
    int p = 0;
    int q = 0;
    Vec2 direction;
    double width = 0.0;
    double offset = 0.0; ///< transversal coordinate of the corridor midline
};

struct HorizonVerdict {
    bool finite = true;
    std::optional<Corridor> witness;
    int d_max = 0;
    /// True when every direction outside the searched box is provably blocked.
    bool exhaustive = false;
    std::size_t directions_checked = 0;
};

/// Widest gap in the transversal shadow of all scatterers along lattice
/// direction p a1 + q a2, or nullopt when the shadows cover the transversal.
inline std::optional<Corridor> corridor_along(const BilliardTable& table, int p, int q, double tol = 1e-12)
{
    const Vec2 w = static_cast<double>(p) * table.a1() + static_cast<double>(q) * table.a2();
    const double len = norm(w);
    const Vec2 nu = (1.0 / len) * perp(w);
    const double h = table.cell_area() / len;

    std::vector<std::pair<double, double>> arcs;
    for (const auto& s : table.scatterers()) {
        if (2.0 * s.radius >= h)
            return std::nullopt;
        double c = std::fmod(dot(s.center, nu), h);
        if (c < 0.0)
            c += h;
        arcs.emplace_back(c - s.radius, c + s.radius);
    }
    std::sort(arcs.begin(), arcs.end());
    // sweep twice around the circle so wrapped arcs are accounted for
    double reach = arcs.front().second;
    double best = 0.0, best_mid = 0.0;
    const std::size_t m = arcs.size();
    for (std::size_t k = 1; k <= m; ++k) {
        const double lo = arcs[k % m].first + (k == m ? h : 0.0);
        const double hi = arcs[k % m].second + (k == m ? h : 0.0);
        if (lo - reach > best) {
            best = lo - reach;
            best_mid = 0.5 * (lo + reach);
        }
        reach = std::max(reach, hi);
    }
    if (best <= tol)
        return std::nullopt;
    Corridor c;
    c.p = p;
    c.q = q;
    c.direction = (1.0 / len) * w;
    c.width = best;
    c.offset = std::fmod(best_mid, h);
    return c;
}

inline HorizonVerdict finite_horizon_check(const BilliardTable& table, int d_max = 10)
{
    HorizonVerdict verdict;
    verdict.d_max = d_max;
    for (int p = 0; p <= d_max; ++p) {
        for (int q = -d_max; q <= d_max; ++q) {
            if (p == 0 && q <= 0)
                continue;
            if (std::gcd(p, q) != 1)
                continue;
            ++verdict.directions_checked;
            if (auto c = corridor_along(table, p, q)) {
                if (!verdict.witness || c->width > verdict.witness->width)
                    verdict.witness = c;
            }
        }
    }
    verdict.finite = !verdict.witness.has_value();

    const Vec2 a1 = table.a1(), a2 = table.a2();
    const double pp = norm2(a1) + norm2(a2);
    const double qq = std::abs(cross(a1, a2));
    const double smin = std::sqrt(std::max(0.0, 0.5 * (pp - std::sqrt(std::max(0.0, pp * pp - 4.0 * qq * qq)))));
    const double h_outside = table.cell_area() / (smin * (d_max + 1));
    verdict.exhaustive = h_outside <= 2.0 * table.max_radius();
    return verdict;
}

} // namespace sinai
