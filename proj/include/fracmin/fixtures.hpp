#pragma once

// Reference sets used by tests, the acceptance suite and `fracmin gen-fixture`.
// Every fixture is voxelized by cell-centre membership, so generation is
// deterministic.

#include "fracmin/grid.hpp"

namespace fracmin::fixtures {

inline Point unit_axis(int n) {
    Point e{0, 0, 0};
    e[n - 1] = 1.0;
    return e;
}

/// {x . nu < offset}.
inline VoxelSet halfspace(const Grid& g, Point nu, double offset = 0.0) {
    const double l = norm(nu);
    if (!(l > 0)) throw Error("halfspace fixture: zero normal");
    nu = (1.0 / l) * nu;
    const auto rule = ExteriorRule::halfspace(nu, offset);
    return VoxelSet::from_predicate(g, rule, [&](const Point& x) { return rule.contains(x, g.n); });
}

/// Subgraph {x_n < slope x_1}.
inline VoxelSet tilted_plane(const Grid& g, double slope) {
    Point nu{0, 0, 0};
    nu[0] = -slope;
    nu[g.n - 1] = 1.0;
    return halfspace(g, nu, 0.0);
}

/// Open ball, empty outside the box.
inline VoxelSet ball(const Grid& g, Point center, double radius) {
    const Ball b{center, radius};
    return VoxelSet::from_predicate(g, ExteriorRule::empty(), [&](const Point& x) { return b.contains(x, g.n); });
}

/// Exterior of a ball (full outside the box).
inline VoxelSet ball_exterior(const Grid& g, Point center, double radius) {
    return ball(g, center, radius).complement();
}

/// The two-level step {x_n < gamma sign(x_1)}: lower on the left, upper on
/// the right. Outside the box it continues as {x_n < 0}, which agrees with
/// the step up to a slab of width gamma.
inline VoxelSet step(const Grid& g, double gamma) {
    const auto rule = ExteriorRule::halfspace(unit_axis(g.n), 0.0);
    return VoxelSet::from_predicate(g, rule, [&](const Point& x) {
        const double level = x[0] < 0 ? -gamma : gamma;
        return x[g.n - 1] < level;
    });
}

/// Subgraph of eps cos(2 pi x_1 / period).
inline VoxelSet cosine(const Grid& g, double eps, double period = 1.0) {
    const auto rule = ExteriorRule::halfspace(unit_axis(g.n), 0.0);
    return VoxelSet::from_predicate(g, rule, [&](const Point& x) {
        return x[g.n - 1] < eps * std::cos(2.0 * std::numbers::pi * x[0] / period);
    });
}

/// {x_n < tan(theta) |x'|}.
inline VoxelSet cone(const Grid& g, double theta) {
    const auto rule = ExteriorRule::cone(std::tan(theta));
    return VoxelSet::from_predicate(g, rule, [&](const Point& x) { return rule.contains(x, g.n); });
}

/// Graph function sampled from a callable on an (n-1)-dimensional base grid.
template <class Fn>
GraphFunction graph(const Grid& base, Fn&& u) {
    return GraphFunction::sample(base, std::forward<Fn>(u));
}

}  // namespace fracmin::fixtures
