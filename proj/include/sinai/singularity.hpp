#pragma once

// Symbolic itineraries, cell counting for the partitions generated by the
// collision map, propagation of the grazing set and its complexity.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <tuple>
#include <unordered_map>
#include <vector>

#include "sinai/dynamics.hpp"
#include "sinai/error.hpp"
#include "sinai/parallel.hpp"

namespace sinai {

/// Symbols of x, Tx, ..., T^{n-1}x; `start` is the scatterer of x.
struct Itinerary {
    std::size_t start = 0;
    std::vector<Symbol> symbols;

    std::size_t size() const { return symbols.size(); }
    friend bool operator==(const Itinerary&, const Itinerary&) = default;
    friend auto operator<=>(const Itinerary&, const Itinerary&) = default;
};

class SingularOrbit : public Error {
public:
    SingularOrbit(std::size_t step, const std::string& what)
        : Error(ErrorCode::SingularOrbit, "step " + std::to_string(step) + ": " + what), step_(step)
    {
    }
    std::size_t step() const noexcept { return step_; }

private:
    std::size_t step_;
};

inline Itinerary itinerary(const Billiard& b, PhasePoint x, std::size_t n)
{
    Itinerary it;
    it.start = x.scatterer;
    it.symbols.reserve(n);
    for (std::size_t k = 0; k < n; ++k) {
        if (b.is_singular_input(x))
            throw SingularOrbit(k, "grazing collision");
        CollisionStep step;
        try {
            step = b.map(x);
        } catch (const Error& e) {
            throw SingularOrbit(k, e.what());
        }
        it.symbols.push_back(step.symbol);
        x = step.image;
    }
    return it;
}

/// Itinerary or nullopt when the orbit meets the grazing cutoff within n steps.
inline std::optional<Itinerary> try_itinerary(const Billiard& b, PhasePoint x, std::size_t n)
{
    Itinerary it;
    it.start = x.scatterer;
    it.symbols.reserve(n);
    for (std::size_t k = 0; k < n; ++k) {
        if (b.is_singular_input(x))
            return std::nullopt;
        try {
            const auto step = b.map(x);
            it.symbols.push_back(step.symbol);
            x = step.image;
        } catch (const Error&) {
            return std::nullopt;
        }
    }
    return it;
}

// ---------------------------------------------------------------------------
// Cell counting.

struct CellSampler {
    /// Sample points per scatterer. Samples form a nested low-discrepancy
    /// sequence, so a larger budget always contains a smaller one.
    std::size_t budget = 20000;
    std::uint64_t seed = 1;
    /// Probe distance (in normalized coordinates) for boundary refinement; 0 disables it.
    double probe = 2e-3;
    /// Bisection depth along a probe segment whose ends differ.
    int depth = 8;
    unsigned threads = 1;
};

/// A discovered cell: its itinerary and one sample point inside it.
struct CellRecord {
    Itinerary itinerary;
    PhasePoint representative;
};

struct CellCount {
    std::size_t n = 0;
    std::size_t cells = 0;
    std::size_t samples_used = 0;
    std::vector<CellRecord> records; ///< sorted by itinerary
};

namespace detail {

/// Normalized coordinates (u, w) in [0,1)^2 <-> (r, phi), uniform in sin(phi).
inline PhasePoint from_unit(const BilliardTable& t, std::size_t i, double u, double w)
{
    return {i, u * t.scatterer(i).circumference(), std::asin(std::clamp(2.0 * w - 1.0, -1.0, 1.0))};
}

/// k-th point of the additive R2 sequence shifted by a seeded offset.
inline std::array<double, 2> r2_point(std::uint64_t k, std::uint64_t seed)
{
    constexpr double g = 1.32471795724474602596; // plastic number
    constexpr double a1 = 1.0 / g;
    constexpr double a2 = 1.0 / (g * g);
    Rng rng(seed, 0x5eed);
    const double s1 = rng.uniform(), s2 = rng.uniform();
    const double kk = static_cast<double>(k);
    double u = s1 + kk * a1, w = s2 + kk * a2;
    return {u - std::floor(u), w - std::floor(w)};
}

struct Probe {
    std::optional<Itinerary> it;
    PhasePoint x;
};

inline void bisect_cells(const Billiard& b, std::size_t n, std::size_t i, std::array<double, 2> pa,
                         std::array<double, 2> pb, const Probe& a, const Probe& c, int depth,
                         std::vector<CellRecord>& out)
{
    if (depth <= 0)
        return;
    const std::array<double, 2> pm{0.5 * (pa[0] + pb[0]), 0.5 * (pa[1] + pb[1])};
    if (pm[1] <= 0.0 || pm[1] >= 1.0)
        return;
    Probe m;
    m.x = from_unit(b.table(), i, pm[0] - std::floor(pm[0]), pm[1]);
    m.it = try_itinerary(b, m.x, n);
    if (m.it)
        out.push_back({*m.it, m.x});
    if (m.it != a.it)
        bisect_cells(b, n, i, pa, pm, a, m, depth - 1, out);
    if (m.it != c.it)
        bisect_cells(b, n, i, pm, pb, m, c, depth - 1, out);
}

inline void dedupe_cells(std::vector<CellRecord>& recs)
{
    // stable: keep the first representative in sample order
    std::stable_sort(recs.begin(), recs.end(),
                     [](const CellRecord& a, const CellRecord& b) { return a.itinerary < b.itinerary; });
    recs.erase(std::unique(recs.begin(), recs.end(),
                           [](const CellRecord& a, const CellRecord& b) { return a.itinerary == b.itinerary; }),
               recs.end());
}

} // namespace detail

/// Distinct length-n itineraries found by sampling. A lower bound for the
/// number of cells of the n-step partition, nondecreasing in the budget.
inline CellCount count_cells(const Billiard& b, std::size_t n, const CellSampler& cfg = {})
{
    const auto& table = b.table();
    const std::size_t total = cfg.budget * table.size();
    std::vector<std::vector<CellRecord>> found(total);
    parallel_for(total, cfg.threads, [&](std::size_t k) {
        const std::size_t i = k % table.size();
        const auto p = detail::r2_point(k / table.size(), cfg.seed + 7919 * i);
        detail::Probe base;
        base.x = detail::from_unit(table, i, p[0], p[1]);
        base.it = try_itinerary(b, base.x, n);
        auto& out = found[k];
        if (base.it)
            out.push_back({*base.it, base.x});
        if (cfg.probe <= 0.0 || n == 0)
            return;
        const std::array<std::array<double, 2>, 4> offs{{{cfg.probe, 0.0}, {-cfg.probe, 0.0}, {0.0, cfg.probe},
                                                          {0.0, -cfg.probe}}};
        for (const auto& o : offs) {
            const std::array<double, 2> q{p[0] + o[0], p[1] + o[1]};
            if (q[1] <= 0.0 || q[1] >= 1.0)
                continue;
            detail::Probe pr;
            pr.x = detail::from_unit(table, i, q[0] - std::floor(q[0]), q[1]);
            pr.it = try_itinerary(b, pr.x, n);
            if (pr.it)
                out.push_back({*pr.it, pr.x});
            if (pr.it != base.it)
                detail::bisect_cells(b, n, i, p, q, base, pr, cfg.depth, out);
        }
        detail::dedupe_cells(out);
    });

    CellCount cc;
    cc.n = n;
    cc.samples_used = total;
    for (auto& f : found)
        for (auto& r : f)
            cc.records.push_back(std::move(r));
    detail::dedupe_cells(cc.records);
    cc.cells = cc.records.size();
    return cc;
}

// ---------------------------------------------------------------------------
// Singularity curves.

struct CurvePoint {
    double r = 0.0;
    double phi = 0.0;
};

struct Polyline {
    std::size_t scatterer = 0;
    std::size_t branch = 0;
    /// Number of iterates of the grazing set this curve comes from (0 for the
    /// lines phi = +-pi/2 themselves); negative for forward images.
    int order = 0;
    /// Symbols of the forward orbit from a curve point up to the grazing
    /// collision (positive order), or symbols from the grazing collision to
    /// the curve point (negative order).
    std::vector<Symbol> label;
    /// Which grazing line the curve was seeded from: +1, -1, or 0 for order 0.
    int side = 0;
    std::vector<CurvePoint> points;
};

/// Curves with the same order, label and side are pieces of one continuity
/// branch boundary.
inline auto curve_family(const Polyline& p) { return std::tuple(p.order, p.label, p.side); }

struct SingularityCurveSet {
    int order = 0;
    double resolution = 0.0;
    double offset = 0.0;
    /// Vertex budget ran out before every segment met the resolution.
    bool truncated = false;
    std::vector<Polyline> curves;
};

struct SingularityOptions {
    double resolution = 0.02;
    /// Seeds start this far (radians) inside the grazing lines.
    double offset = 1e-7;
    std::size_t seeds_per_line = 256;
    int max_depth = 24;
    std::size_t max_vertices = 4'000'000;
    unsigned threads = 1;
};

namespace detail {

struct Track {
    double seed_r = 0.0;
    bool ok = false;
    PhasePoint image;
    std::vector<Symbol> path;
};

inline double curve_distance(const BilliardTable& t, const PhasePoint& a, const PhasePoint& b)
{
    if (a.scatterer != b.scatterer)
        return std::numeric_limits<double>::infinity();
    const double circ = t.scatterer(a.scatterer).circumference();
    double dr = std::fmod(std::abs(a.r - b.r), circ);
    dr = std::min(dr, circ - dr);
    return std::hypot(dr, a.phi - b.phi);
}

/// Pushes a grazing seed k steps; forward = apply T, otherwise T^{-1}.
inline Track push_seed(const Billiard& b, std::size_t scatterer, double r, double phi, int k, bool forward)
{
    Track tr;
    tr.seed_r = r;
    PhasePoint x{scatterer, r, phi};
    std::vector<Symbol> back;
    for (int s = 0; s < k; ++s) {
        if (s > 0 && b.is_singular_input(x))
            return tr;
        try {
            const auto step = forward ? b.map(x) : b.inverse(x);
            if (forward) {
                tr.path.push_back(step.symbol);
            } else {
                back.push_back({x.scatterer, Cell{} - step.symbol.translate});
            }
            x = step.image;
        } catch (const Error&) {
            return tr;
        }
    }
    if (!forward)
        tr.path.assign(back.rbegin(), back.rend());
    tr.ok = true;
    tr.image = x;
    return tr;
}

inline bool connects(const BilliardTable& t, const Track& a, const Track& c, double resolution)
{
    return a.ok && c.ok && a.path == c.path && curve_distance(t, a.image, c.image) <= resolution;
}

inline void refine_tracks(const Billiard& b, std::size_t scatterer, double phi, int k, bool forward,
                          const Track& a, const Track& c, double resolution, int depth, std::vector<Track>& out,
                          std::size_t& budget)
{
    if (connects(b.table(), a, c, resolution) || depth <= 0 || budget == 0)
        return;
    const Track m = push_seed(b, scatterer, 0.5 * (a.seed_r + c.seed_r), phi, k, forward);
    --budget;
    refine_tracks(b, scatterer, phi, k, forward, a, m, resolution, depth - 1, out, budget);
    out.push_back(m);
    refine_tracks(b, scatterer, phi, k, forward, m, c, resolution, depth - 1, out, budget);
}

} // namespace detail

/// S_n for n >= 0 (preimages of the grazing set) or S_{-|n|} for n < 0
/// (images), as polylines in (r, phi) per scatterer.
inline SingularityCurveSet singularity_set(const Billiard& b, int n, const SingularityOptions& opt = {})
{
    const auto& table = b.table();
    SingularityCurveSet set;
    set.order = n;
    set.resolution = opt.resolution;
    set.offset = opt.offset;
    std::size_t branch = 0;
    for (std::size_t i = 0; i < table.size(); ++i) {
        for (double sign : {1.0, -1.0}) {
            Polyline line;
            line.scatterer = i;
            line.branch = branch++;
            line.side = static_cast<int>(sign);
            line.points = {{0.0, sign * half_pi}, {table.scatterer(i).circumference(), sign * half_pi}};
            set.curves.push_back(std::move(line));
        }
    }

    const bool forward = n < 0;
    const int steps = std::abs(n);
    struct Job {
        std::size_t scatterer;
        double phi;
        int k;
    };
    std::vector<Job> jobs;
    for (int k = 1; k <= steps; ++k)
        for (std::size_t i = 0; i < table.size(); ++i)
            for (double sign : {1.0, -1.0})
                jobs.push_back({i, sign * (half_pi - opt.offset), k});

    std::vector<std::vector<Polyline>> pieces(jobs.size());
    std::vector<char> exhausted(jobs.size(), 0);
    parallel_for(jobs.size(), opt.threads, [&](std::size_t j) {
        const Job job = jobs[j];
        const double circ = table.scatterer(job.scatterer).circumference();
        const std::size_t m = std::max<std::size_t>(4, opt.seeds_per_line);
        std::vector<detail::Track> coarse(m + 1);
        for (std::size_t s = 0; s <= m; ++s)
            coarse[s] = detail::push_seed(b, job.scatterer, circ * static_cast<double>(s) / static_cast<double>(m),
                                          job.phi, job.k, forward);
        std::vector<detail::Track> tracks;
        std::size_t budget = opt.max_vertices / std::max<std::size_t>(1, jobs.size());
        for (std::size_t s = 0; s < m; ++s) {
            tracks.push_back(coarse[s]);
            detail::refine_tracks(b, job.scatterer, job.phi, job.k, forward, coarse[s], coarse[s + 1],
                                  opt.resolution, opt.max_depth, tracks, budget);
        }
        tracks.push_back(coarse[m]);
        exhausted[j] = budget == 0;

        std::vector<Polyline>& out = pieces[j];
        Polyline cur;
        auto flush = [&] {
            if (cur.points.size() >= 2)
                out.push_back(cur);
            cur.points.clear();
        };
        for (std::size_t t = 0; t < tracks.size(); ++t) {
            const auto& tr = tracks[t];
            if (!tr.ok) {
                flush();
                continue;
            }
            if (!cur.points.empty() && !detail::connects(table, tracks[t - 1], tr, opt.resolution))
                flush();
            if (cur.points.empty()) {
                cur.scatterer = tr.image.scatterer;
                cur.label = tr.path;
                cur.order = forward ? -job.k : job.k;
                cur.side = job.phi > 0.0 ? 1 : -1;
            }
            cur.points.push_back({tr.image.r, tr.image.phi});
        }
        flush();
    });

    set.truncated = std::any_of(exhausted.begin(), exhausted.end(), [](char e) { return e != 0; });
    for (auto& ps : pieces) {
        for (auto& p : ps) {
            p.branch = branch++;
            set.curves.push_back(std::move(p));
        }
    }
    return set;
}

// ---------------------------------------------------------------------------
// Complexity.

struct ComplexityEstimate {
    int n = 0;
    std::size_t K_n = 0;
    PhasePoint location;
    double K = 0.0; ///< K_n / n, the implied linear-growth constant
    bool resolution_dependent = true;
};

/// Largest number of distinct polylines meeting one 2x2 block of
/// resolution-sized grid cells, so every polyline counted passes within
/// sqrt(2) * resolution of the reported location.
inline ComplexityEstimate complexity(const BilliardTable& table, const SingularityCurveSet& set,
                                     std::optional<double> resolution = std::nullopt)
{
    const double res = resolution.value_or(set.resolution);
    using Key = std::array<std::int64_t, 3>;
    std::map<Key, std::vector<std::size_t>> cells;

    const double phi_origin = -half_pi - res;
    for (std::size_t c = 0; c < set.curves.size(); ++c) {
        const auto& pl = set.curves[c];
        const double circ = table.scatterer(pl.scatterer).circumference();
        const auto nr = static_cast<std::int64_t>(std::ceil(circ / res));
        std::set<Key> mine;
        auto mark = [&](double r, double phi) {
            double rr = wrap_arclength(r, circ);
            auto ir = static_cast<std::int64_t>(std::floor(rr / res)) % nr;
            auto ip = static_cast<std::int64_t>(std::floor((phi - phi_origin) / res));
            mine.insert({static_cast<std::int64_t>(pl.scatterer), ir, ip});
        };
        for (std::size_t k = 0; k < pl.points.size(); ++k) {
            mark(pl.points[k].r, pl.points[k].phi);
            if (k + 1 == pl.points.size())
                break;
            const auto& a = pl.points[k];
            const auto& e = pl.points[k + 1];
            double dr = e.r - a.r;
            if (pl.order != 0) {
                // shortest way around the circle
                dr = std::remainder(dr, circ);
            }
            const double len = std::hypot(dr, e.phi - a.phi);
            const auto steps = static_cast<std::size_t>(std::ceil(len / (0.25 * res)));
            for (std::size_t s = 1; s < steps; ++s) {
                const double f = static_cast<double>(s) / static_cast<double>(steps);
                mark(a.r + f * dr, a.phi + f * (e.phi - a.phi));
            }
        }
        for (const auto& key : mine)
            cells[key].push_back(c);
    }

    std::map<Key, std::set<std::size_t>> blocks;
    for (const auto& [key, ids] : cells) {
        const double circ = table.scatterer(static_cast<std::size_t>(key[0])).circumference();
        const auto nr = static_cast<std::int64_t>(std::ceil(circ / res));
        for (std::int64_t dr = 0; dr <= 1; ++dr)
            for (std::int64_t dp = 0; dp <= 1; ++dp) {
                const Key bk{key[0], ((key[1] - dr) % nr + nr) % nr, key[2] - dp};
                blocks[bk].insert(ids.begin(), ids.end());
            }
    }

    ComplexityEstimate est;
    est.n = set.order;
    for (const auto& [key, ids] : blocks) {
        if (ids.size() > est.K_n) {
            est.K_n = ids.size();
            const auto sc = static_cast<std::size_t>(key[0]);
            est.location = {sc, wrap_arclength((static_cast<double>(key[1]) + 1.0) * res, table.scatterer(sc).circumference()),
                            phi_origin + (static_cast<double>(key[2]) + 1.0) * res};
        }
    }
    est.K = set.order != 0 ? static_cast<double>(est.K_n) / std::abs(set.order) : static_cast<double>(est.K_n);
    return est;
}

} // namespace sinai
