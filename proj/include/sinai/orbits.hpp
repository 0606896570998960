#pragma once

// Periodic orbits as critical points of the chord-length functional, their
// enumeration over cyclic itineraries, and a scan for grazing orbits.

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "sinai/dynamics.hpp"
#include "sinai/potential.hpp"
#include "sinai/singularity.hpp"

namespace sinai {

struct PeriodicOrbit {
    std::size_t period = 0;
    /// Symbols of points[0], ..., points[period-1]; start == points[0].scatterer.
    Itinerary itinerary;
    std::vector<PhasePoint> points;
    double length = 0.0;
    double grazing_margin = 0.0;
    double birkhoff_tau = 0.0;
    /// Largest reflection-law residual over the points.
    double reflection_residual = 0.0;
    /// Distance from T^period(points[0]) to points[0].
    double closure_error = 0.0;
};

struct OrbitSolverOptions {
    int max_iterations = 100;
    /// Stop when the gradient of the length functional is below this.
    double tolerance = 1e-14;
    /// Step-by-step re-simulation must land within this distance.
    double match_tolerance = 1e-9;
    /// Starting boundary angles (radians, one per point); empty selects the
    /// chord bisectors.
    std::vector<double> initial_angles;
};

namespace detail {

struct ChordSystem {
    std::vector<Vec2> centers;  ///< unfolded centers of the points 0..n-1
    std::vector<double> radii;
    Vec2 drift;                 ///< lattice translation after one period
};

inline ChordSystem chord_system(const BilliardTable& t, const Itinerary& it)
{
    ChordSystem cs;
    const std::size_t n = it.size();
    Cell acc{};
    cs.centers.push_back(t.scatterer(it.start).center);
    cs.radii.push_back(t.scatterer(it.start).radius);
    for (std::size_t m = 0; m + 1 < n; ++m) {
        acc = acc + it.symbols[m].translate;
        const auto& s = t.scatterer(it.symbols[m].scatterer);
        cs.centers.push_back(s.center + t.translate(acc));
        cs.radii.push_back(s.radius);
    }
    acc = acc + it.symbols[n - 1].translate;
    cs.drift = t.translate(acc);
    return cs;
}

struct ChordState {
    std::vector<Vec2> p, normal, tangent;
    std::vector<Vec2> e;      ///< e[k]: unit chord arriving at point k
    std::vector<double> len;  ///< len[k]: length of chord arriving at point k
};

inline ChordState chord_state(const ChordSystem& cs, const Eigen::VectorXd& theta)
{
    const std::size_t n = cs.centers.size();
    ChordState s;
    s.p.resize(n);
    s.normal.resize(n);
    s.tangent.resize(n);
    s.e.resize(n);
    s.len.resize(n);
    for (std::size_t m = 0; m < n; ++m) {
        s.normal[m] = {std::cos(theta[static_cast<Eigen::Index>(m)]), std::sin(theta[static_cast<Eigen::Index>(m)])};
        s.tangent[m] = perp(s.normal[m]);
        s.p[m] = cs.centers[m] + cs.radii[m] * s.normal[m];
    }
    for (std::size_t k = 0; k < n; ++k) {
        const Vec2 prev = k == 0 ? s.p[n - 1] - cs.drift : s.p[k - 1];
        const Vec2 d = s.p[k] - prev;
        s.len[k] = norm(d);
        s.e[k] = (1.0 / s.len[k]) * d;
    }
    return s;
}

inline Eigen::VectorXd chord_gradient(const ChordSystem& cs, const ChordState& s)
{
    const std::size_t n = cs.centers.size();
    Eigen::VectorXd g(static_cast<Eigen::Index>(n));
    for (std::size_t m = 0; m < n; ++m)
        g[static_cast<Eigen::Index>(m)] = cs.radii[m] * dot(s.tangent[m], s.e[m] - s.e[(m + 1) % n]);
    return g;
}

inline Eigen::MatrixXd chord_hessian(const ChordSystem& cs, const ChordState& s)
{
    const std::size_t n = cs.centers.size();
    Eigen::MatrixXd h = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
    for (std::size_t m = 0; m < n; ++m) {
        const std::size_t nx = (m + 1) % n;
        const auto im = static_cast<Eigen::Index>(m), in = static_cast<Eigen::Index>(nx);
        const Vec2 ein = s.e[m], eout = s.e[nx];
        const double Rm = cs.radii[m];
        const double ti = dot(s.tangent[m], ein), to = dot(s.tangent[m], eout);
        h(im, im) += -Rm * dot(s.normal[m], ein - eout) + Rm * Rm * ((1.0 - ti * ti) / s.len[m] + (1.0 - to * to) / s.len[nx]);
        // coupling through the outgoing chord m -> m+1
        const double Rn = cs.radii[nx];
        const double c = -Rm * Rn * (dot(s.tangent[m], s.tangent[nx]) - to * dot(s.tangent[nx], eout)) / s.len[nx];
        h(im, in) += c;
        h(in, im) += c;
    }
    return h;
}

inline double phase_distance(const BilliardTable& t, const PhasePoint& a, const PhasePoint& b)
{
    if (a.scatterer != b.scatterer)
        return std::numeric_limits<double>::infinity();
    const double circ = t.scatterer(a.scatterer).circumference();
    double dr = std::fmod(std::abs(a.r - b.r), circ);
    dr = std::min(dr, circ - dr);
    return std::max(dr, std::abs(a.phi - b.phi));
}

} // namespace detail

/// Periodic orbit with the given cyclic itinerary, or nullopt when the
/// critical point found is not a genuine billiard orbit (chord blocked,
/// reflection on the hidden side, or the itinerary cannot close).
/// Throws NonConvergence when Newton iteration stalls.
inline std::optional<PeriodicOrbit> find_periodic_orbit(const Billiard& b, const Itinerary& cyc,
                                                        const OrbitSolverOptions& opt = {})
{
    const auto& table = b.table();
    const std::size_t n = cyc.size();
    if (n < 2)
        throw Error(ErrorCode::InvalidInput, "periodic itineraries need at least two symbols");
    if (cyc.symbols.back().scatterer != cyc.start)
        throw Error(ErrorCode::InvalidInput, "itinerary is not cyclic: last target differs from the start");
    for (const auto& s : cyc.symbols)
        table.scatterer(s.scatterer);

    const auto cs = detail::chord_system(table, cyc);
    for (std::size_t k = 0; k < n; ++k) {
        const Vec2 prev = k == 0 ? cs.centers[n - 1] - cs.drift : cs.centers[k - 1];
        if (norm(cs.centers[k] - prev) <= cs.radii[k] + cs.radii[k == 0 ? n - 1 : k - 1])
            return std::nullopt; // same disk twice in a row, or overlapping translates
    }

    Eigen::VectorXd theta(static_cast<Eigen::Index>(n));
    if (!opt.initial_angles.empty()) {
        if (opt.initial_angles.size() != n)
            throw Error(ErrorCode::InvalidInput, "one initial angle per point is required");
        for (std::size_t m = 0; m < n; ++m)
            theta[static_cast<Eigen::Index>(m)] = opt.initial_angles[m];
    } else {
        for (std::size_t m = 0; m < n; ++m) {
            const Vec2 prev = m == 0 ? cs.centers[n - 1] - cs.drift : cs.centers[m - 1];
            const Vec2 next = m + 1 == n ? cs.centers[0] + cs.drift : cs.centers[m + 1];
            Vec2 dir = normalized(prev - cs.centers[m]) + normalized(next - cs.centers[m]);
            if (norm(dir) < 1e-9)
                dir = normalized(prev - cs.centers[m]);
            theta[static_cast<Eigen::Index>(m)] = std::atan2(dir.y, dir.x);
        }
    }

    auto merit = [&](const Eigen::VectorXd& th) {
        return detail::chord_gradient(cs, detail::chord_state(cs, th)).squaredNorm();
    };
    bool converged = false;
    for (int iter = 0; iter < opt.max_iterations; ++iter) {
        const auto st = detail::chord_state(cs, theta);
        const Eigen::VectorXd g = detail::chord_gradient(cs, st);
        if (g.lpNorm<Eigen::Infinity>() < opt.tolerance) {
            converged = true;
            break;
        }
        const Eigen::MatrixXd h = detail::chord_hessian(cs, st);
        const double f0 = g.squaredNorm();
        Eigen::VectorXd step = h.fullPivLu().solve(-g);
        bool moved = false;
        if (step.allFinite()) {
            for (double a = 1.0; a >= 1.0 / 1024.0; a *= 0.5) {
                const Eigen::VectorXd trial = theta + a * step;
                if (merit(trial) < f0) {
                    theta = trial;
                    moved = true;
                    break;
                }
            }
        }
        if (!moved) {
            // damped fallback: descend on |grad L|^2
            const Eigen::VectorXd dir = -(h * g);
            for (double a = 1.0; a >= 1e-12; a *= 0.5) {
                const Eigen::VectorXd trial = theta + a * dir;
                if (merit(trial) < f0) {
                    theta = trial;
                    moved = true;
                    break;
                }
            }
        }
        if (!moved) {
            // no descent direction left; accept if already at rounding level
            converged = g.lpNorm<Eigen::Infinity>() < 1e3 * opt.tolerance;
            break;
        }
    }
    if (!converged)
        throw Error(ErrorCode::NonConvergence,
                    "length functional did not reach a critical point in " + std::to_string(opt.max_iterations) +
                        " iterations");

    const auto st = detail::chord_state(cs, theta);
    PeriodicOrbit orb;
    orb.period = n;
    orb.itinerary = cyc;
    orb.grazing_margin = half_pi;
    for (std::size_t m = 0; m < n; ++m) {
        const Vec2 out = st.e[(m + 1) % n];
        // arrive from outside, leave to the outside
        if (!(dot(st.e[m], st.normal[m]) < 0.0) || !(dot(out, st.normal[m]) > 0.0))
            return std::nullopt;
        const std::size_t sc = m == 0 ? cyc.start : cyc.symbols[m - 1].scatterer;
        PhasePoint x;
        x.scatterer = sc;
        x.r = arclength_of(table.scatterer(sc), st.normal[m]);
        x.phi = std::atan2(dot(out, st.tangent[m]), dot(out, st.normal[m]));
        orb.points.push_back(x);
        orb.length += st.len[m];
        orb.grazing_margin = std::min(orb.grazing_margin, grazing_margin(x.phi));
    }
    orb.birkhoff_tau = orb.length;

    for (std::size_t m = 0; m < n; ++m) {
        const auto& x = orb.points[m];
        if (b.is_singular_input(x))
            return std::nullopt;
        CollisionStep step;
        try {
            step = b.map(x);
        } catch (const Error&) {
            return std::nullopt;
        }
        if (step.symbol != cyc.symbols[m])
            return std::nullopt;
        const auto& y = orb.points[(m + 1) % n];
        if (detail::phase_distance(table, step.image, y) > opt.match_tolerance)
            return std::nullopt;
        orb.reflection_residual =
            std::max(orb.reflection_residual, reflection_residual(b, y, b.flow_state(x).direction));
    }
    PhasePoint x = orb.points[0];
    try {
        for (std::size_t m = 0; m < n; ++m)
            x = b.map(x).image;
        orb.closure_error = detail::phase_distance(table, x, orb.points[0]);
    } catch (const Error&) {
        orb.closure_error = std::numeric_limits<double>::infinity();
    }
    return orb;
}

/// S_p g along one traversal of the orbit.
inline double orbit_sum(const BilliardTable& table, const Potential& g, const PeriodicOrbit& orb)
{
    if (std::holds_alternative<ZeroPotential>(g))
        return 0.0;
    if (const auto* s = std::get_if<ScaledTauPotential>(&g))
        return s->c * orb.length;
    double sum = 0.0;
    for (const auto& x : orb.points)
        sum += tabulated_value(table, std::get<TabulatedPotential>(g), x);
    return sum;
}

// ---------------------------------------------------------------------------
// Enumeration.

/// Cyclic words over the symbol alphabet. With window = 0 every chord-admissible
/// symbol may follow every other; otherwise each cyclic window of that many
/// symbols must occur among the sampled itineraries of count_cells.
struct CensusOptions {
    std::size_t window = 3;
    CellSampler grammar{};
    /// Cap on the number of cyclic words solved; 0 means no cap.
    std::size_t max_itineraries = 2'000'000;
    OrbitSolverOptions solver{};
    /// Points closer than this (phase-space sup distance) are the same orbit.
    double dedup_tolerance = 1e-6;
    /// Longest chord considered; 0 uses the free-flight maximum estimate.
    double flight_bound = 0.0;
    unsigned threads = 1;
};

struct OrbitCensus {
    std::size_t period = 0;
    /// Distinct orbits whose primitive period divides `period`, sorted by
    /// canonical itinerary.
    std::vector<PeriodicOrbit> orbits;
    /// Number of points of Fix T^n: each orbit contributes its primitive period.
    std::size_t count = 0;
    double weighted_sum = 0.0;
    std::size_t itineraries_tried = 0;
    std::size_t nonconverged = 0;
    bool partial = false;
    std::size_t window = 0;
};

class BudgetExceeded : public Error {
public:
    explicit BudgetExceeded(OrbitCensus partial)
        : Error(ErrorCode::BudgetExceeded, "itinerary cap reached at period " + std::to_string(partial.period)),
          census_(std::move(partial))
    {
    }
    const OrbitCensus& census() const noexcept { return census_; }

private:
    OrbitCensus census_;
};

/// Lexicographically least rotation of a cyclic symbol word.
inline Itinerary canonical_rotation(const Itinerary& it)
{
    const std::size_t n = it.size();
    std::size_t best = 0;
    for (std::size_t r = 1; r < n; ++r) {
        for (std::size_t k = 0; k < n; ++k) {
            const auto& a = it.symbols[(r + k) % n];
            const auto& c = it.symbols[(best + k) % n];
            if (a == c)
                continue;
            if (a < c)
                best = r;
            break;
        }
    }
    Itinerary out;
    out.start = it.symbols[(best + n - 1) % n].scatterer;
    for (std::size_t k = 0; k < n; ++k)
        out.symbols.push_back(it.symbols[(best + k) % n]);
    return out;
}

/// Smallest p with word = (first p symbols)^(n/p).
inline std::size_t primitive_period(const Itinerary& it)
{
    const std::size_t n = it.size();
    for (std::size_t p = 1; p < n; ++p) {
        if (n % p)
            continue;
        bool ok = true;
        for (std::size_t k = p; k < n && ok; ++k)
            ok = it.symbols[k] == it.symbols[k - p];
        if (ok)
            return p;
    }
    return n;
}

/// Chord-admissible successors of each scatterer: targets whose center lies
/// within flight bound + both radii and that do not overlap the departure disk.
inline std::vector<std::vector<Symbol>> symbol_alphabet(const BilliardTable& t, double flight_bound)
{
    std::vector<std::vector<Symbol>> out(t.size());
    const int range = static_cast<int>(std::ceil((flight_bound + 2.0 * t.max_radius() + t.cell_diameter()) /
                                                 std::min(norm(t.a1()), norm(t.a2())) * 2.0)) + 1;
    for (std::size_t i = 0; i < t.size(); ++i)
        for (std::size_t j = 0; j < t.size(); ++j)
            for (int m = -range; m <= range; ++m)
                for (int k = -range; k <= range; ++k) {
                    if (i == j && m == 0 && k == 0)
                        continue;
                    const double d = norm(t.scatterer(j).center + t.translate({m, k}) - t.scatterer(i).center);
                    const double rr = t.scatterer(i).radius + t.scatterer(j).radius;
                    if (d > rr && d <= flight_bound + rr)
                        out[i].push_back({j, {m, k}});
                }
    for (auto& v : out)
        std::sort(v.begin(), v.end());
    return out;
}

namespace detail {

struct WindowGrammar {
    std::size_t window = 0;
    std::vector<std::vector<Symbol>> alphabet;
    /// (start, s_1..s_j) -> allowed s_{j+1}, for j < window
    std::map<Itinerary, std::vector<Symbol>> next;
    std::set<Itinerary> windows;

    std::vector<Symbol> successors(const Itinerary& ctx) const
    {
        if (window == 0) {
            const std::size_t from = ctx.symbols.empty() ? ctx.start : ctx.symbols.back().scatterer;
            return alphabet[from];
        }
        const auto it = next.find(ctx);
        return it == next.end() ? std::vector<Symbol>{} : it->second;
    }

    bool admissible_cycle(const std::vector<Symbol>& w) const
    {
        const std::size_t n = w.size();
        for (std::size_t m = 0; m < n; ++m) {
            const Symbol& prev = w[(m + n - 1) % n];
            const Symbol& cur = w[m];
            if (!std::binary_search(alphabet[prev.scatterer].begin(), alphabet[prev.scatterer].end(), cur))
                return false;
        }
        if (window == 0)
            return true;
        Itinerary probe;
        for (std::size_t m = 0; m < n; ++m) {
            probe.start = w[(m + n - 1) % n].scatterer;
            probe.symbols.clear();
            for (std::size_t k = 0; k < window; ++k)
                probe.symbols.push_back(w[(m + k) % n]);
            if (!windows.count(probe))
                return false;
        }
        return true;
    }
};

inline WindowGrammar build_grammar(const Billiard& b, std::size_t window, const CellSampler& sampler,
                                   double flight_bound)
{
    WindowGrammar gr;
    gr.window = window;
    gr.alphabet = symbol_alphabet(b.table(), flight_bound);
    if (window == 0)
        return gr;
    const auto cc = count_cells(b, window, sampler);
    std::map<Itinerary, std::set<Symbol>> next;
    for (const auto& rec : cc.records) {
        gr.windows.insert(rec.itinerary);
        Itinerary ctx{rec.itinerary.start, {}};
        for (std::size_t j = 0; j < window; ++j) {
            next[ctx].insert(rec.itinerary.symbols[j]);
            ctx.symbols.push_back(rec.itinerary.symbols[j]);
        }
    }
    for (auto& [k, v] : next)
        gr.next[k] = std::vector<Symbol>(v.begin(), v.end());
    return gr;
}

/// Canonical admissible cyclic words of length n, in lexicographic order.
inline std::vector<Itinerary> cyclic_words(const WindowGrammar& gr, std::size_t nscat, std::size_t n,
                                           std::size_t cap, bool& capped)
{
    std::vector<Itinerary> out;
    std::vector<Symbol> w;
    capped = false;
    auto rec = [&](auto&& self, std::size_t start) -> void {
        if (capped)
            return;
        if (w.size() == n) {
            if (w.back().scatterer != start || !gr.admissible_cycle(w))
                return;
            Itinerary it{start, w};
            if (canonical_rotation(it) != it)
                return;
            if (cap && out.size() >= cap) {
                capped = true;
                return;
            }
            out.push_back(std::move(it));
            return;
        }
        const std::size_t L = w.size();
        Itinerary ctx;
        if (gr.window == 0) {
            ctx.start = start;
            ctx.symbols.assign(w.begin(), w.end());
        } else {
            const std::size_t m = L + 1 > gr.window ? L + 1 - gr.window : 0;
            ctx.start = m == 0 ? start : w[m - 1].scatterer;
            ctx.symbols.assign(w.begin() + static_cast<std::ptrdiff_t>(m), w.end());
        }
        for (const auto& s : gr.successors(ctx)) {
            // a canonical word starts with its least symbol
            if (L > 0 && s < w[0])
                continue;
            w.push_back(s);
            self(self, start);
            w.pop_back();
        }
    };
    for (std::size_t s = 0; s < nscat; ++s)
        rec(rec, s);
    std::sort(out.begin(), out.end(), [](const Itinerary& a, const Itinerary& b) { return a.symbols < b.symbols; });
    return out;
}

inline double orbit_distance(const BilliardTable& t, const PeriodicOrbit& a, const PeriodicOrbit& b)
{
    if (a.period != b.period)
        return std::numeric_limits<double>::infinity();
    // best cyclic alignment of the point lists
    double best = std::numeric_limits<double>::infinity();
    for (std::size_t r = 0; r < a.period; ++r) {
        double d = 0.0;
        for (std::size_t k = 0; k < a.period && d < best; ++k)
            d = std::max(d, phase_distance(t, a.points[k], b.points[(k + r) % b.period]));
        best = std::min(best, d);
    }
    return best;
}

} // namespace detail

/// Reusable state for censuses of several periods on one table.
class OrbitEnumerator {
public:
    OrbitEnumerator(const Billiard& b, CensusOptions opt = {}) : b_(b), opt_(std::move(opt))
    {
        double bound = opt_.flight_bound;
        if (bound <= 0.0) {
            const auto fb = free_flight_bounds(b_, {.threads = opt_.threads});
            bound = fb.tau_max + fb.slack;
        }
        flight_bound_ = bound;
        CellSampler s = opt_.grammar;
        s.threads = opt_.threads;
        grammar_ = detail::build_grammar(b_, opt_.window, s, bound);
    }

    double flight_bound() const { return flight_bound_; }
    const std::vector<std::vector<Symbol>>& alphabet() const { return grammar_.alphabet; }

    /// Candidate cyclic words of length n (canonical representatives).
    std::vector<Itinerary> words(std::size_t n, bool* capped = nullptr) const
    {
        bool c = false;
        auto w = detail::cyclic_words(grammar_, b_.table().size(), n, opt_.max_itineraries, c);
        if (capped)
            *capped = c;
        return w;
    }

    /// Fix T^n: every orbit whose primitive period divides n. Throws
    /// BudgetExceeded (carrying the partial census) when the cap is hit.
    OrbitCensus census(std::size_t n, const Potential& g = ZeroPotential{}) const
    {
        if (n < 2)
            throw Error(ErrorCode::InvalidInput, "census period must be at least 2");
        check_potential(b_.table(), g);
        OrbitCensus out;
        out.period = n;
        out.window = opt_.window;

        std::vector<Itinerary> all;
        bool capped = false;
        for (std::size_t p = 2; p <= n; ++p) {
            if (n % p)
                continue;
            bool c = false;
            auto w = words(p, &c);
            capped = capped || c;
            for (auto& it : w)
                if (primitive_period(it) == p)
                    all.push_back(std::move(it));
        }
        out.itineraries_tried = all.size();
        out.partial = capped;

        std::vector<std::optional<PeriodicOrbit>> solved(all.size());
        std::vector<char> failed(all.size(), 0);
        parallel_for(all.size(), opt_.threads, [&](std::size_t k) {
            try {
                solved[k] = find_periodic_orbit(b_, all[k], opt_.solver);
            } catch (const Error&) {
                failed[k] = 1;
            }
        });
        for (std::size_t k = 0; k < all.size(); ++k) {
            out.nonconverged += failed[k] ? 1 : 0;
            if (!solved[k])
                continue;
            bool dup = false;
            for (const auto& o : out.orbits) {
                if (std::abs(o.length - solved[k]->length) < opt_.dedup_tolerance &&
                    detail::orbit_distance(b_.table(), o, *solved[k]) < opt_.dedup_tolerance) {
                    dup = true;
                    break;
                }
            }
            if (!dup)
                out.orbits.push_back(std::move(*solved[k]));
        }
        for (const auto& o : out.orbits) {
            out.count += o.period;
            const double reps = static_cast<double>(n / o.period);
            out.weighted_sum += static_cast<double>(o.period) * std::exp(reps * orbit_sum(b_.table(), g, o));
        }
        if (capped)
            throw BudgetExceeded(std::move(out));
        return out;
    }

private:
    const Billiard& b_;
    CensusOptions opt_;
    double flight_bound_ = 0.0;
    detail::WindowGrammar grammar_;
};

inline OrbitCensus enumerate_fixed_points(const Billiard& b, std::size_t n, const Potential& g = ZeroPotential{},
                                          const CensusOptions& opt = {})
{
    return OrbitEnumerator(b, opt).census(n, g);
}

struct GrazingHit {
    PeriodicOrbit orbit;
    double margin = 0.0;
};

/// Primitive orbits of period 2..n_max with grazing margin below the threshold.
/// An empty result says no grazing periodic orbit was found at this threshold.
inline std::vector<GrazingHit> grazing_orbit_scan(const OrbitEnumerator& en, std::size_t n_max, double threshold)
{
    std::vector<GrazingHit> out;
    for (std::size_t n = 2; n <= n_max; ++n) {
        const auto c = en.census(n);
        for (const auto& o : c.orbits)
            if (o.period == n && o.grazing_margin < threshold)
                out.push_back({o, o.grazing_margin});
    }
    return out;
}

} // namespace sinai
