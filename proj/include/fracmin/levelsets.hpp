#pragma once

// Level sets S^- = {d_E = -delta} (inside E) and S^+ = {d_E = +delta} of the
// signed distance, extracted as graphs in the x_n direction over the
// cylinder K_r centred at the origin.
//
// For n = 3 the base of K_{r-2delta} is a disk; graphs live on rectangular
// base grids, so extraction uses the inscribed square.

#include <cmath>
#include <optional>
#include <string>
#include <vector>

#include "fracmin/geometry.hpp"

namespace fracmin {

enum class Side { minus, plus };

inline Side parse_side(const std::string& s) {
    if (s == "minus" || s == "-") return Side::minus;
    if (s == "plus" || s == "+") return Side::plus;
    throw Error("side must be 'minus' or 'plus', got '" + s + "'");
}

struct LevelSetSpec {
    double delta = 0.25;
    Side side = Side::minus;
    double gamma = 0.0;  // flatness of the trap {x_n <= -gamma} <= E <= {x_n <= gamma} in K_r
    double r = 1.0;
    double c = 1.0 / 16;  // admissible gamma / delta

    void validate() const {
        if (!(delta > 0)) throw Error("level set: delta must be positive");
        if (!(r > 0) || !(delta < r / 4)) throw Error("level set: need 0 < delta < r/4");
        if (!(gamma >= 0) || !(gamma < r)) throw Error("level set: need 0 <= gamma < r");
        if (!(c > 0 && c < 1)) throw Error("level set: threshold c must lie in (0,1)");
        if (!(gamma / delta < c))
            throw HypothesisError("gamma/delta", "level set: gamma/delta = " + std::to_string(gamma / delta) +
                                                     " is not below c = " + std::to_string(c));
    }
    double level() const { return side == Side::minus ? -delta : delta; }
};

struct TouchingParaboloid {
    Point center{0, 0, 0};
    double radius = 0.0;
    double opening() const { return 1.0 / radius; }
};

namespace detail {

/// Columns of E's grid whose base centres lie in [-half, half]^{n-1}.
inline Grid base_columns(const Grid& g, double half, std::array<long, 3>& first) {
    const int m = g.n - 1;
    std::array<long, 3> dims{1, 1, 1};
    Point origin{0, 0, 0};
    first = {0, 0, 0};
    for (int a = 0; a < m; ++a) {
        const long lo = std::max<long>(0, long(std::ceil((-half - g.origin[a]) / g.h - 0.5 - 1e-9)));
        const long hi = std::min<long>(g.dims[a] - 1, long(std::floor((half - g.origin[a]) / g.h - 0.5 + 1e-9)));
        if (hi - lo < 1) throw Error("level set: base region holds fewer than two columns");
        first[a] = lo;
        dims[a] = hi - lo + 1;
        origin[a] = g.origin[a] + double(lo) * g.h;
    }
    return Grid(m, dims, origin, g.h);
}

/// Height where `sd` crosses `level` along each column, by linear
/// interpolation between cell centres with |x_n| < zmax. Exactly one sign
/// change per column is required.
inline GraphFunction extract_level(const SignedDistanceGrid& sd, double level, double half, double zmax) {
    const Grid& g = sd.grid;
    const int n = g.n;
    std::array<long, 3> first{};
    const Grid base = base_columns(g, half, first);
    long k0 = g.dims[n - 1], k1 = -1;
    for (long k = 0; k < g.dims[n - 1]; ++k) {
        const double z = g.origin[n - 1] + (double(k) + 0.5) * g.h;
        if (std::abs(z) < zmax) k0 = std::min(k0, k), k1 = std::max(k1, k);
    }
    if (k1 <= k0) throw Error("level set: vertical window holds fewer than two cells");
    auto vals = parallel_map<double>(base.size(), [&](std::size_t col) {
        const Index b = base.unflat(col);
        Index i{0, 0, 0};
        for (int a = 0; a < n - 1; ++a) i[a] = first[a] + b[a];
        int crossings = 0;
        double height = 0;
        i[n - 1] = k0;
        double prev = sd.at(i) - level;
        for (long k = k0 + 1; k <= k1; ++k) {
            i[n - 1] = k;
            const double cur = sd.at(i) - level;
            if ((prev >= 0) != (cur >= 0)) {
                ++crossings;
                const double z = g.origin[n - 1] + (double(k) - 0.5) * g.h;
                height = z + g.h * prev / (prev - cur);
            }
            prev = cur;
        }
        if (crossings != 1) {
            const Point c = base.center(b);
            throw Error("level set not a graph here (x' = " + std::to_string(c[0]) +
                        (n == 3 ? ", " + std::to_string(c[1]) : std::string()) + ", " + std::to_string(crossings) +
                        " crossings)");
        }
        return height;
    });
    return GraphFunction(base, std::move(vals));
}

inline void require_cylinder_in_box(const Grid& g, double r) {
    const Point lo = g.lower(), hi = g.upper();
    for (int a = 0; a < g.n; ++a)
        if (-r < lo[a] - 1e-12 || r > hi[a] + 1e-12) throw Error("level set: K_r exits the grid box");
}

inline long distance_margin(const Grid& g, double delta) { return long(std::ceil(delta / g.h)) + 2; }

}  // namespace detail

/// Checks {x_n <= -gamma} n K_r <= E n K_r <= {x_n <= gamma} n K_r on cell
/// centres, with half a cell of slack for voxelization.
inline void check_trap(const VoxelSet& E, double gamma, double r) {
    const Grid& g = E.grid;
    const int n = g.n;
    detail::require_cylinder_in_box(g, r);
    const Cylinder K{{0, 0, 0}, r};
    const double slack = 0.5 * g.h;
    for (std::size_t k = 0; k < g.size(); ++k) {
        const Point c = g.center(k);
        if (!K.contains(c, n)) continue;
        const double z = c[n - 1];
        if ((z < -gamma - slack && !E.at(k)) || (z > gamma + slack && E.at(k)))
            throw HypothesisError("Gt", "hypothesis (Gt) fails");
    }
}

/// The level set S^- or S^+ over K_{r-2delta}.
inline GraphFunction level_set_graph(const VoxelSet& E, const LevelSetSpec& spec) {
    spec.validate();
    check_trap(E, spec.gamma, spec.r);
    const Grid& g = E.grid;
    const auto sd = signed_distance(E, detail::distance_margin(g, spec.delta));
    const double half = (spec.r - 2 * spec.delta) / std::sqrt(double(g.n - 1));
    return detail::extract_level(sd, spec.level(), half, spec.r);
}

struct LipschitzReport {
    double measured = 0, bound = 0, slack = 0;
    bool pass = false;
};

inline LipschitzReport lipschitz_bound_check(const VoxelSet& E, const LevelSetSpec& spec, double C_check = 100.0) {
    const auto u = level_set_graph(E, spec);
    LipschitzReport rep;
    rep.measured = lipschitz_estimate(u);
    rep.bound = C_check * std::sqrt(spec.gamma / spec.delta);
    rep.slack = 4 * E.grid.h / spec.delta;
    rep.pass = rep.measured <= rep.bound + rep.slack;
    return rep;
}

struct TouchPoint {
    Point x{0, 0, 0};  // point of the level set
    TouchingParaboloid ball;
    double foot_distance = 0;      // |y - x|
    double boundary_distance = 0;  // |d_E(y)|
    double violation = 0;          // how far the graph enters the cap
    bool pass = false;
};

struct TouchReport {
    std::vector<TouchPoint> points;
    bool all_pass = true;
    std::size_t failures() const {
        std::size_t f = 0;
        for (const auto& p : points) f += !p.pass;
        return f;
    }
};

/// At each sample x' (base coordinates; every column when empty) takes
/// x = (x', u(x')), its nearest point y on the closed opposite-label cells,
/// and checks that the graph stays outside B_delta(y): below the lower cap
/// for S^-, above the upper cap for S^+. Tolerance 2h throughout.
inline TouchReport paraboloid_touch_check(const VoxelSet& E, const LevelSetSpec& spec,
                                          std::vector<Point> samples = {}) {
    const Grid& g = E.grid;
    const int n = g.n;
    if (spec.delta < 2 * g.h) throw Error("resolution insufficient");
    const auto u = level_set_graph(E, spec);
    const auto sd = signed_distance(E, detail::distance_margin(g, spec.delta));
    const Grid& b = u.base;
    if (samples.empty())
        for (std::size_t k = 0; k < b.size(); ++k) samples.push_back(b.center(k));
    const bool minus = spec.side == Side::minus;
    const double tol = 2 * g.h, delta = spec.delta;
    const long w = long(std::ceil(delta / g.h)) + 3;

    TouchReport rep;
    rep.points = parallel_map<TouchPoint>(samples.size(), [&](std::size_t t) {
        TouchPoint tp;
        Point x = samples[t];
        x[n - 1] = u(samples[t]);
        tp.x = x;
        // nearest point of the closed opposite-label cells
        const Index c = g.locate(x);
        double best = std::numeric_limits<double>::infinity();
        Point y = x;
        Index lo{0, 0, 0}, hi{0, 0, 0};
        for (int a = 0; a < n; ++a) lo[a] = c[a] - w, hi[a] = c[a] + w;
        for (long i0 = lo[0]; i0 <= hi[0]; ++i0)
            for (long i1 = lo[1]; i1 <= hi[1]; ++i1)
                for (long i2 = lo[2]; i2 <= hi[2]; ++i2) {
                    const Index i{i0, i1, i2};
                    if (E.at(i) == minus) continue;
                    Point q = x;
                    double d2 = 0;
                    for (int a = 0; a < n; ++a) {
                        const double l = g.origin[a] + double(i[a]) * g.h;
                        q[a] = std::clamp(x[a], l, l + g.h);
                        d2 += (q[a] - x[a]) * (q[a] - x[a]);
                    }
                    if (d2 < best) best = d2, y = q;
                }
        tp.ball = {y, delta};
        tp.foot_distance = std::sqrt(best);
        tp.boundary_distance = std::abs(sd(y));
        double worst = -std::numeric_limits<double>::infinity();
        for (std::size_t k = 0; k < b.size(); ++k) {
            const Point z = b.center(k);
            double q = 0;
            for (int a = 0; a < n - 1; ++a) q += (z[a] - y[a]) * (z[a] - y[a]);
            if (q >= delta * delta) continue;
            const double dz = std::sqrt(delta * delta - q);
            const double v = minus ? u.values[k] - (y[n - 1] - dz) : (y[n - 1] + dz) - u.values[k];
            worst = std::max(worst, v);
        }
        tp.violation = std::max(0.0, worst);
        tp.pass = std::abs(tp.foot_distance - delta) <= tol && tp.boundary_distance <= tol && tp.violation <= tol;
        return tp;
    });
    for (const auto& p : rep.points) rep.all_pass = rep.all_pass && p.pass;
    return rep;
}

struct SeparationReport {
    double max_gap = 0;     // sup of u^+ - u^- over |x'| <= 1/2
    double bound = 0;       // 2 (2 + M_o) (gamma + delta)
    double M_o = 0;
    double min_order = 0;   // inf of u^+ - u^-, never negative for valid data
    bool pass = false;
};

/// Lipschitz constant of a voxel boundary graph, from difference quotients
/// at a stride of `stride` columns so that the h-quantization of the heights
/// costs at most 1/stride.
inline double coarse_lipschitz(const GraphFunction& u, long stride) {
    const Grid& g = u.base;
    double best = 0;
    for (std::size_t k = 0; k < g.size(); ++k) {
        const Index i = g.unflat(k);
        for (int a = 0; a < g.n; ++a) {
            Index j = i;
            j[a] += stride;
            if (!g.in_range(j)) continue;
            best = std::max(best, std::abs(u.at(i) - u.at(j)) / (double(stride) * g.h));
        }
    }
    return best;
}

/// E against a reference E_star on the same grid. The neighbourhood
/// hypothesis is read two-sidedly: inside K_2 (as far as the box reaches)
/// cells of E lie within gamma of E_star and cells outside E within gamma of
/// its complement. M_o defaults to a coarse Lipschitz estimate of the
/// boundary graph of E_star over |x'| <= 1.
inline SeparationReport separation_check(const VoxelSet& E, const VoxelSet& E_star, double gamma, double delta,
                                         std::optional<double> M_o = std::nullopt) {
    const Grid& g = E.grid;
    const int n = g.n;
    if (!g.same_as(E_star.grid)) throw Error("separation: E and E_star must share a grid");
    if (!(gamma > 0 && gamma < 0.25) || !(delta > 0 && delta < 0.25))
        throw Error("separation: gamma and delta must lie in (0, 1/4)");
    detail::require_cylinder_in_box(g, 1.0);
    const auto sd_star = signed_distance(E_star, detail::distance_margin(g, 2 * gamma + 2 * g.h));
    const Cylinder K2{{0, 0, 0}, 2.0};
    for (std::size_t k = 0; k < g.size(); ++k) {
        if (!K2.contains(g.center(k), n)) continue;
        const double d = sd_star.values[k];
        if ((E.at(k) && d > gamma + g.h) || (!E.at(k) && d < -gamma - g.h))
            throw HypothesisError("gamma-neighbourhood", "separation: E is not within a gamma-neighbourhood of E_star");
    }
    SeparationReport rep;
    if (M_o) {
        rep.M_o = *M_o;
    } else {
        const auto star = detail::extract_level(sd_star, 0.0, 1.0, 1.0);
        rep.M_o = coarse_lipschitz(star, 8);
    }
    const auto sd = signed_distance(E, detail::distance_margin(g, delta));
    const auto lo = detail::extract_level(sd, -delta, 0.5, 1.0);
    const auto hi = detail::extract_level(sd, delta, 0.5, 1.0);
    rep.max_gap = -std::numeric_limits<double>::infinity();
    rep.min_order = std::numeric_limits<double>::infinity();
    for (std::size_t k = 0; k < lo.base.size(); ++k) {
        const Point c = lo.base.center(k);
        double q = 0;
        for (int a = 0; a < n - 1; ++a) q += c[a] * c[a];
        if (q > 0.25) continue;
        const double gap = hi.values[k] - lo.values[k];
        rep.max_gap = std::max(rep.max_gap, gap);
        rep.min_order = std::min(rep.min_order, gap);
    }
    rep.bound = 2 * (2 + rep.M_o) * (gamma + delta);
    rep.pass = rep.max_gap <= rep.bound + g.h && rep.min_order >= 0;
    return rep;
}

}  // namespace fracmin
