#pragma once

// Potentials g on the collision space and their Birkhoff sums.

#include <algorithm>
#include <cmath>
#include <string>
#include <variant>
#include <vector>

#include "sinai/dynamics.hpp"
#include "sinai/error.hpp"

namespace sinai {

struct ZeroPotential {};

/// g(x) = c * tau(x), the free flight from x to Tx.
struct ScaledTauPotential {
    double c = 0.0;
};

/// Piecewise constant on a per-scatterer grid, uniform in r/circumference and
/// in phi over [-pi/2, pi/2]. values[i] is row-major (r bin, phi bin).
struct TabulatedPotential {
    std::size_t r_bins = 1;
    std::size_t phi_bins = 1;
    std::vector<std::vector<double>> values;
};

using Potential = std::variant<ZeroPotential, ScaledTauPotential, TabulatedPotential>;

inline std::string potential_name(const Potential& g)
{
    if (std::holds_alternative<ZeroPotential>(g))
        return "zero";
    if (std::holds_alternative<ScaledTauPotential>(g))
        return "scaled_tau";
    return "tabulated";
}

inline void check_potential(const BilliardTable& table, const Potential& g)
{
    if (const auto* t = std::get_if<TabulatedPotential>(&g)) {
        if (t->r_bins == 0 || t->phi_bins == 0 || t->values.size() != table.size())
            throw Error(ErrorCode::InvalidInput, "tabulated potential must have one grid per scatterer");
        for (const auto& v : t->values) {
            if (v.size() != t->r_bins * t->phi_bins)
                throw Error(ErrorCode::InvalidInput, "tabulated potential grid has the wrong size");
            for (double x : v)
                if (!std::isfinite(x))
                    throw Error(ErrorCode::InvalidInput, "tabulated potential value is not finite");
        }
    } else if (const auto* s = std::get_if<ScaledTauPotential>(&g)) {
        if (!std::isfinite(s->c))
            throw Error(ErrorCode::InvalidInput, "potential scale is not finite");
    }
}

inline double tabulated_value(const BilliardTable& table, const TabulatedPotential& t, const PhasePoint& x)
{
    const double u = wrap_arclength(x.r, table.scatterer(x.scatterer).circumference()) /
                     table.scatterer(x.scatterer).circumference();
    const double w = std::clamp((x.phi + half_pi) / std::numbers::pi, 0.0, 1.0);
    const auto ir = std::min(t.r_bins - 1, static_cast<std::size_t>(u * static_cast<double>(t.r_bins)));
    const auto ip = std::min(t.phi_bins - 1, static_cast<std::size_t>(w * static_cast<double>(t.phi_bins)));
    return t.values.at(x.scatterer)[ir * t.phi_bins + ip];
}

/// g at a point when the flight time tau(x) is already known.
inline double evaluate(const BilliardTable& table, const Potential& g, const PhasePoint& x, double tau)
{
    if (std::holds_alternative<ZeroPotential>(g))
        return 0.0;
    if (const auto* s = std::get_if<ScaledTauPotential>(&g))
        return s->c * tau;
    return tabulated_value(table, std::get<TabulatedPotential>(g), x);
}

inline double evaluate(const Billiard& b, const Potential& g, const PhasePoint& x)
{
    const double tau = std::holds_alternative<ScaledTauPotential>(g) ? b.map(x).tau : 0.0;
    return evaluate(b.table(), g, x, tau);
}

/// sup g, or an upper bound for it; scaled_tau needs the largest flight time.
inline double potential_sup(const Potential& g, double tau_min, double tau_max)
{
    if (std::holds_alternative<ZeroPotential>(g))
        return 0.0;
    if (const auto* s = std::get_if<ScaledTauPotential>(&g))
        return s->c >= 0.0 ? s->c * tau_max : s->c * tau_min;
    double m = -std::numeric_limits<double>::infinity();
    for (const auto& v : std::get<TabulatedPotential>(g).values)
        for (double x : v)
            m = std::max(m, x);
    return m;
}

/// S_n g(x) = sum of g over x, ..., T^{n-1}x. Throws on singular orbits.
inline double birkhoff_sum(const Billiard& b, const Potential& g, PhasePoint x, std::size_t n)
{
    double s = 0.0;
    for (std::size_t k = 0; k < n; ++k) {
        const auto step = b.map(x);
        s += evaluate(b.table(), g, x, step.tau);
        x = step.image;
    }
    return s;
}

} // namespace sinai
