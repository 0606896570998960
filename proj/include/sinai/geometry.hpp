#pragma once

// Billiard tables on the two-torus: a lattice plus disjoint circular scatterers.

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include "sinai/error.hpp"
#include "sinai/vec2.hpp"

namespace sinai {

struct Scatterer {
    Vec2 center;
    double radius = 0.0;

    double circumference() const { return 2.0 * std::numbers::pi * radius; }
};

/// One radius-1 scatterer per rhombic cell, nearest centers at distance d.
struct HexagonalFamily {
    double d = 0.0;
};

/// Unit square cell, radius R disk at the cell center and radius R' disk at the corners.
struct SquareFamily {
    double R = 0.0;
    double Rprime = 0.0;
};

struct CustomFamily {
    Vec2 a1;
    Vec2 a2;
    std::vector<Scatterer> scatterers;
};

using TableSpec = std::variant<HexagonalFamily, SquareFamily, CustomFamily>;

inline std::string family_name(const TableSpec& spec)
{
    struct Visitor {
        std::string operator()(const HexagonalFamily&) const { return "hexagonal"; }
        std::string operator()(const SquareFamily&) const { return "square"; }
        std::string operator()(const CustomFamily&) const { return "custom"; }
    };
    return std::visit(Visitor{}, spec);
}

/// Immutable after construction. Scatterer centers live in the fundamental
/// parallelogram {s a1 + t a2 : s, t in [0,1)}.
class BilliardTable {
public:
    const Vec2& a1() const { return a1_; }
    const Vec2& a2() const { return a2_; }
    const std::vector<Scatterer>& scatterers() const { return scatterers_; }
    std::size_t size() const { return scatterers_.size(); }
    const Scatterer& scatterer(std::size_t i) const
    {
        if (i >= scatterers_.size())
            throw Error(ErrorCode::IndexOutOfRange, "scatterer index " + std::to_string(i));
        return scatterers_[i];
    }
    const TableSpec& spec() const { return spec_; }

    Vec2 translate(Cell c) const { return static_cast<double>(c.i) * a1_ + static_cast<double>(c.j) * a2_; }
    double cell_area() const { return std::abs(cross(a1_, a2_)); }
    double cell_diameter() const { return std::max(norm(a1_ + a2_), norm(a1_ - a2_)); }
    double max_radius() const
    {
        double r = 0.0;
        for (const auto& s : scatterers_)
            r = std::max(r, s.radius);
        return r;
    }
    double min_radius() const
    {
        double r = std::numeric_limits<double>::infinity();
        for (const auto& s : scatterers_)
            r = std::min(r, s.radius);
        return r;
    }

    /// Smallest gap between two distinct scatterer translates (checked within +-2 cells).
    double min_gap() const { return min_gap_; }

    friend BilliardTable build_table(const TableSpec& spec);

private:
    Vec2 a1_;
    Vec2 a2_;
    std::vector<Scatterer> scatterers_;
    TableSpec spec_;
    double min_gap_ = 0.0;
};

namespace detail {

inline constexpr int gap_window = 2;

inline Vec2 reduce_to_cell(Vec2 p, Vec2 a1, Vec2 a2)
{
    const double det = cross(a1, a2);
    double s = cross(p, a2) / det;
    double t = cross(a1, p) / det;
    s -= std::floor(s);
    t -= std::floor(t);
    // floor can leave 1.0 after rounding
    if (s >= 1.0) s = 0.0;
    if (t >= 1.0) t = 0.0;
    return s * a1 + t * a2;
}

} // namespace detail

inline BilliardTable build_table(const TableSpec& spec)
{
    BilliardTable table;
    table.spec_ = spec;

    if (const auto* hex = std::get_if<HexagonalFamily>(&spec)) {
        const double d = hex->d;
        if (!std::isfinite(d) || d <= 0.0)
            throw Error(ErrorCode::InvalidInput, "hexagonal spacing must be positive");
        table.a1_ = {d, 0.0};
        table.a2_ = {0.5 * d, 0.5 * std::sqrt(3.0) * d};
        table.scatterers_ = {{{0.0, 0.0}, 1.0}};
    } else if (const auto* sq = std::get_if<SquareFamily>(&spec)) {
        if (!std::isfinite(sq->R) || !std::isfinite(sq->Rprime))
            throw Error(ErrorCode::InvalidInput, "square radii must be finite");
        table.a1_ = {1.0, 0.0};
        table.a2_ = {0.0, 1.0};
        // index 0: corner disk, index 1: center disk
        table.scatterers_ = {{{0.0, 0.0}, sq->Rprime}, {{0.5, 0.5}, sq->R}};
    } else {
        const auto& custom = std::get<CustomFamily>(spec);
        table.a1_ = custom.a1;
        table.a2_ = custom.a2;
        table.scatterers_ = custom.scatterers;
    }

    const double det = cross(table.a1_, table.a2_);
    if (!std::isfinite(det) || std::abs(det) < 1e-12)
        throw Error(ErrorCode::DegenerateLattice, "lattice basis determinant is zero");
    if (table.scatterers_.empty())
        throw Error(ErrorCode::InvalidInput, "table has no scatterers");
    for (auto& s : table.scatterers_) {
        if (!(s.radius > 0.0) || !std::isfinite(s.radius))
            throw Error(ErrorCode::InvalidInput, "scatterer radius must be positive");
        s.center = detail::reduce_to_cell(s.center, table.a1_, table.a2_);
    }
    const double shortest = std::min({norm(table.a1_), norm(table.a2_), norm(table.a1_ - table.a2_),
                                      norm(table.a1_ + table.a2_)});
    if (table.max_radius() >= shortest)
        throw Error(ErrorCode::OverlappingScatterers, "scatterer radius exceeds the shortest lattice vector");

    double gap = std::numeric_limits<double>::infinity();
    const int w = detail::gap_window;
    const auto& sc = table.scatterers_;
    for (std::size_t i = 0; i < sc.size(); ++i) {
        for (std::size_t j = i; j < sc.size(); ++j) {
            for (int m = -w; m <= w; ++m) {
                for (int n = -w; n <= w; ++n) {
                    if (i == j && m == 0 && n == 0)
                        continue;
                    const Vec2 cj = sc[j].center + table.translate({m, n});
                    gap = std::min(gap, norm(cj - sc[i].center) - sc[i].radius - sc[j].radius);
                }
            }
        }
    }
    if (!(gap > 0.0))
        throw Error(ErrorCode::OverlappingScatterers, "minimum gap " + std::to_string(gap) + " is not positive");
    table.min_gap_ = gap;
    return table;
}

// ---------------------------------------------------------------------------
// Parameter domains of the two reference families.

struct DomainVerdict {
    bool accepted = false;
    std::vector<std::string> violated_constraints;
    double margin = 0.0;
};

inline DomainVerdict validate_domain(const TableSpec& spec)
{
    std::vector<std::pair<std::string, double>> slack;
    if (const auto* hex = std::get_if<HexagonalFamily>(&spec)) {
        slack = {{"d > 2", hex->d - 2.0}, {"d < 4/sqrt(3)", 4.0 / std::sqrt(3.0) - hex->d}};
    } else if (const auto* sq = std::get_if<SquareFamily>(&spec)) {
        const double R = sq->R, Rp = sq->Rprime;
        slack = {
            {"R > 0", R},
            {"R < R'", Rp - R},
            {"R' < 1/2", 0.5 - Rp},
            {"R + R' > 1/2", R + Rp - 0.5},
            {"R + R' < sqrt(2)/2", std::sqrt(2.0) / 2.0 - (R + Rp)},
            {"R' > sqrt(2)/4", Rp - std::sqrt(2.0) / 4.0},
        };
    } else {
        throw Error(ErrorCode::UnsupportedFamily, "domain membership is only defined for hexagonal and square tables");
    }

    DomainVerdict verdict;
    verdict.margin = std::numeric_limits<double>::infinity();
    for (const auto& [name, s] : slack) {
        if (s > 0.0)
            verdict.margin = std::min(verdict.margin, s);
        else
            verdict.violated_constraints.push_back(name);
    }
    if (!std::isfinite(verdict.margin))
        verdict.margin = 0.0;
    verdict.accepted = verdict.violated_constraints.empty();
    return verdict;
}

inline double min_curvature(const BilliardTable& table) { return 1.0 / table.max_radius(); }

// ---------------------------------------------------------------------------
// Boundary parametrization: arclength r = 0 at the rightmost point, counter-clockwise.

struct BoundaryFrame {
    Vec2 position;
    Vec2 outward_normal;
    Vec2 tangent;
    double curvature = 0.0;
};

inline double wrap_arclength(double r, double circumference)
{
    double w = std::fmod(r, circumference);
    if (w < 0.0)
        w += circumference;
    if (w >= circumference)
        w = 0.0;
    return w;
}

inline BoundaryFrame boundary_frame(const Scatterer& s, double r)
{
    const double theta = wrap_arclength(r, s.circumference()) / s.radius;
    const Vec2 n{std::cos(theta), std::sin(theta)};
    return {s.center + s.radius * n, n, perp(n), 1.0 / s.radius};
}

inline BoundaryFrame boundary_frame(const BilliardTable& table, std::size_t scatterer_index, double r)
{
    return boundary_frame(table.scatterer(scatterer_index), r);
}

/// Arclength of the boundary point in direction `outward` from the center.
inline double arclength_of(const Scatterer& s, Vec2 outward)
{
    double theta = std::atan2(outward.y, outward.x);
    if (theta < 0.0)
        theta += 2.0 * std::numbers::pi;
    return wrap_arclength(theta * s.radius, s.circumference());
}

} // namespace sinai
