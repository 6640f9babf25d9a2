#pragma once

// Projections, boundary extraction, signed distance and flatness measurements
// on voxelized sets.

#include <limits>
#include <numbers>

#include "fracmin/grid.hpp"

namespace fracmin {

/// pi_nu x = x - (x . nu) nu.
inline Point project_tangent(const Point& x, const Point& nu) {
    if (std::abs(norm(nu) - 1.0) > 1e-12) throw Error("project_tangent: nu must be a unit vector");
    return x - dot(x, nu) * nu;
}

/// Face-neighbour offsets of a cell (2n of them).
inline std::vector<Index> face_neighbours(int n) {
    std::vector<Index> out;
    for (int a = 0; a < n; ++a)
        for (int sgn : {-1, 1}) {
            Index d{0, 0, 0};
            d[a] = sgn;
            out.push_back(d);
        }
    return out;
}

inline Index operator+(const Index& a, const Index& b) {
    return {a[0] + b[0], a[1] + b[1], a[2] + b[2]};
}

/// Occupied cells with at least one unoccupied face-neighbour; neighbours
/// outside the box follow the exterior rule.
inline std::vector<std::size_t> boundary_cells(const VoxelSet& E) {
    const auto nb = face_neighbours(E.grid.n);
    std::vector<std::size_t> out;
    for (std::size_t k = 0; k < E.grid.size(); ++k) {
        if (!E.at(k)) continue;
        const Index i = E.grid.unflat(k);
        for (const auto& d : nb)
            if (!E.at(i + d)) {
                out.push_back(k);
                break;
            }
    }
    return out;
}

/// Flips every cell whose face-neighbours all carry the opposite label, the
/// grid-scale stand-in for discarding measure-zero pieces of E and its
/// complement. Returns the number of flipped cells.
inline std::size_t normalize(VoxelSet& E) {
    const auto nb = face_neighbours(E.grid.n);
    std::vector<std::size_t> flips;
    for (std::size_t k = 0; k < E.grid.size(); ++k) {
        const Index i = E.grid.unflat(k);
        const bool v = E.at(k);
        bool isolated = true;
        for (const auto& d : nb)
            if (E.at(i + d) == v) {
                isolated = false;
                break;
            }
        if (isolated) flips.push_back(k);
    }
    for (auto k : flips) E.occ[k] ^= 1;
    return flips.size();
}

/// Sampled d_E at cell centres, >= 0 outside E.
struct SignedDistanceGrid {
    Grid grid;
    std::vector<double> values;

    double at(const Index& i) const { return values[grid.flat(i)]; }

    /// Multilinear interpolation between cell centres (clamped to the box).
    double operator()(const Point& p) const {
        std::array<long, 3> i0{0, 0, 0};
        std::array<double, 3> t{0, 0, 0};
        for (int a = 0; a < grid.n; ++a) {
            double u = (p[a] - grid.origin[a]) / grid.h - 0.5;
            u = std::clamp(u, 0.0, double(grid.dims[a] - 1));
            long i = std::min<long>(static_cast<long>(std::floor(u)), grid.dims[a] - 2);
            i0[a] = i;
            t[a] = u - double(i);
        }
        double v = 0;
        const int corners = 1 << grid.n;
        for (int c = 0; c < corners; ++c) {
            double w = 1;
            Index j = i0;
            for (int a = 0; a < grid.n; ++a) {
                const int bit = (c >> a) & 1;
                j[a] += bit;
                w *= bit ? t[a] : 1 - t[a];
            }
            if (w != 0) v += w * at(j);
        }
        return v;
    }
};

namespace detail {

/// One axis of the transform: out[i] = min_j gap(i - j)^2 + f[j] with
/// gap(d) = max(0, |d| - 1/2), the axis distance from a centre to a closed
/// cell. For j < i the cost is the parabola (x - j)^2 at x = i - 1/2, and
/// for j > i at x = i + 1/2; the lower envelope of all parabolas over-
/// estimates only the other side, so
///   out[i] = min(f[i], env(i - 1/2), env(i + 1/2)).
inline void gap_transform(const std::vector<double>& f, std::vector<double>& out) {
    const long len = static_cast<long>(f.size());
    const double inf = std::numeric_limits<double>::infinity();
    std::vector<long> v;
    std::vector<double> z;
    for (long j = 0; j < len; ++j) {
        if (f[j] == inf) continue;
        const double fj = f[j] + double(j) * double(j);
        while (!v.empty()) {
            const long q = v.back();
            const double x = (fj - (f[q] + double(q) * double(q))) / (2.0 * double(j - q));
            if (x <= z.back()) {
                v.pop_back();
                z.pop_back();
            } else {
                v.push_back(j);
                z.push_back(x);
                break;
            }
        }
        if (v.empty()) {
            v.push_back(j);
            z.push_back(-inf);
        }
    }
    out.assign(len, inf);
    if (v.empty()) return;
    std::vector<double> env(len + 1);
    std::size_t k = 0;
    for (long m = 0; m <= len; ++m) {
        const double x = double(m) - 0.5;
        while (k + 1 < v.size() && z[k + 1] < x) ++k;
        env[m] = (x - double(v[k])) * (x - double(v[k])) + f[v[k]];
    }
    for (long i = 0; i < len; ++i) out[i] = std::min({f[i], env[i], env[i + 1]});
}

/// Exact distance (units of h) from every cell centre to the union of the
/// closed target cells, by separable min-convolution. Produces the same values
/// as a brute-force minimum over all target cells.
inline std::vector<double> distance_to_cells(const Grid& g, const std::vector<std::uint8_t>& target) {
    const double inf = std::numeric_limits<double>::infinity();
    std::vector<double> cur(g.size());
    for (std::size_t k = 0; k < g.size(); ++k) cur[k] = target[k] ? 0.0 : inf;
    std::vector<double> line, out;
    for (int a = 0; a < g.n; ++a) {
        const long len = g.dims[a];
        line.resize(len);
        // stride of axis a in the flat layout
        long stride = 1;
        for (int b = a + 1; b < 3; ++b) stride *= g.dims[b];
        for (std::size_t k = 0; k < g.size(); ++k) {
            const Index idx = g.unflat(k);
            if (idx[a] != 0) continue;
            for (long i = 0; i < len; ++i) line[i] = cur[k + i * stride];
            gap_transform(line, out);
            for (long i = 0; i < len; ++i) cur[k + i * stride] = out[i];
        }
    }
    for (auto& v : cur) v = std::sqrt(v);
    return cur;
}

}  // namespace detail

/// Signed distance from each cell centre to the voxel interface, i.e. the
/// boundary of the union of closed occupied cells. A margin of ghost cells
/// (labelled by the exterior rule) lets the interface continue past the box.
inline SignedDistanceGrid signed_distance(const VoxelSet& E, long margin = 8) {
    E.validate();
    const std::size_t occupied = E.count();
    if (occupied == 0 || occupied == E.grid.size())
        throw Error("degenerate set, distance undefined");
    const Grid& g = E.grid;
    std::array<long, 3> pd{1, 1, 1};
    Point po = g.origin;
    for (int a = 0; a < g.n; ++a) {
        pd[a] = g.dims[a] + 2 * margin;
        po[a] -= double(margin) * g.h;
    }
    const Grid pg(g.n, pd, po, g.h);
    std::vector<std::uint8_t> in(pg.size()), out(pg.size());
    for (std::size_t k = 0; k < pg.size(); ++k) {
        Index i = pg.unflat(k);
        for (int a = 0; a < g.n; ++a) i[a] -= margin;
        const bool v = E.at(i);
        in[k] = v;
        out[k] = !v;
    }
    const auto d_to_in = detail::distance_to_cells(pg, in);
    const auto d_to_out = detail::distance_to_cells(pg, out);
    SignedDistanceGrid sd{g, std::vector<double>(g.size())};
    for (std::size_t k = 0; k < g.size(); ++k) {
        Index i = g.unflat(k);
        for (int a = 0; a < g.n; ++a) i[a] += margin;
        const std::size_t pk = pg.flat(i);
        sd.values[k] = in[pk] ? -d_to_out[pk] * g.h : d_to_in[pk] * g.h;
    }
    return sd;
}

/// Slab {|x . nu| <= half_width} containing the boundary cell centres of a
/// region.
struct SlabFit {
    Point nu{0, 0, 0};
    double half_width = 0.0;
};

namespace detail {

inline double slab_width(const std::vector<Point>& pts, const Point& nu) {
    double w = 0;
    for (const auto& p : pts) w = std::max(w, std::abs(dot(p, nu)));
    return w;
}

inline Point sphere_dir(double theta, double phi) {
    return {std::sin(theta) * std::cos(phi), std::sin(theta) * std::sin(phi), std::cos(theta)};
}

/// Golden-section minimization of f on [a, b].
template <class F>
double golden_min(F&& f, double a, double b, int iters = 60) {
    const double r = (std::sqrt(5.0) - 1.0) / 2.0;
    double c = b - r * (b - a), d = a + r * (b - a);
    double fc = f(c), fd = f(d);
    for (int k = 0; k < iters; ++k) {
        if (fc <= fd) {
            b = d, d = c, fd = fc;
            c = b - r * (b - a), fc = f(c);
        } else {
            a = c, c = d, fc = fd;
            d = a + r * (b - a), fd = f(d);
        }
    }
    return fc <= fd ? c : d;
}

}  // namespace detail

/// Minimal-width slab through the origin containing the boundary cell centres
/// in `region`. Directions: 720 uniform angles (n=2) or a 720-point Fibonacci
/// sphere (n=3), then golden-section refinement around the best sample.
inline SlabFit slab_fit(const VoxelSet& E, const Region& region) {
    const Grid& g = E.grid;
    std::vector<Point> pts;
    for (auto k : boundary_cells(E)) {
        const Point c = g.center(k);
        if (region_contains(region, c, g.n)) pts.push_back(c);
    }
    if (pts.empty()) throw Error("slab_fit: no boundary cells in region");
    constexpr int samples = 720;
    const double pi = std::numbers::pi;
    SlabFit best{{0, 0, 0}, std::numeric_limits<double>::infinity()};
    if (g.n == 2) {
        auto dir = [](double t) { return Point{std::cos(t), std::sin(t), 0.0}; };
        double t_best = 0;
        for (int k = 0; k < samples; ++k) {
            const double t = 2 * pi * k / samples;
            const double w = detail::slab_width(pts, dir(t));
            if (w < best.half_width) best = {dir(t), w}, t_best = t;
        }
        const double step = 2 * pi / samples;
        const double t = detail::golden_min([&](double x) { return detail::slab_width(pts, dir(x)); },
                                            t_best - step, t_best + step);
        const double w = detail::slab_width(pts, dir(t));
        if (w < best.half_width) best = {dir(t), w};
    } else {
        double th_best = 0, ph_best = 0;
        const double golden = pi * (3.0 - std::sqrt(5.0));
        for (int k = 0; k < samples; ++k) {
            const double z = 1.0 - (k + 0.5) * 2.0 / samples;
            const double th = std::acos(z), ph = golden * k;
            const Point nu = detail::sphere_dir(th, ph);
            const double w = detail::slab_width(pts, nu);
            if (w < best.half_width) best = {nu, w}, th_best = th, ph_best = ph;
        }
        const double step = std::sqrt(4 * pi / samples);
        for (int round = 0; round < 6; ++round) {
            th_best = detail::golden_min(
                [&](double t) { return detail::slab_width(pts, detail::sphere_dir(t, ph_best)); },
                th_best - step, th_best + step);
            ph_best = detail::golden_min(
                [&](double p) { return detail::slab_width(pts, detail::sphere_dir(th_best, p)); },
                ph_best - 2 * step, ph_best + 2 * step);
        }
        const Point nu = detail::sphere_dir(th_best, ph_best);
        const double w = detail::slab_width(pts, nu);
        if (w < best.half_width) best = {nu, w};
    }
    if (best.nu[g.n - 1] < 0) best.nu = -1.0 * best.nu;
    return best;
}

/// Supremum of neighbour difference quotients |u(x') - u(z')| / |x' - z'|
/// over axis and diagonal neighbours whose centres both lie in `region`
/// (coordinates of the base grid). An empty region gives 0.
inline double lipschitz_estimate(const GraphFunction& u, const std::optional<Region>& region = {}) {
    const Grid& g = u.base;
    std::vector<Index> offs;
    if (g.n == 1) {
        offs = {{1, 0, 0}};
    } else {
        offs = {{1, 0, 0}, {0, 1, 0}, {1, 1, 0}, {1, -1, 0}};
    }
    auto in = [&](const Index& i) {
        return g.in_range(i) && (!region || region_contains(*region, g.center(i), g.n));
    };
    double best = 0;
    for (std::size_t k = 0; k < g.size(); ++k) {
        const Index i = g.unflat(k);
        if (!in(i)) continue;
        for (const auto& d : offs) {
            const Index j = i + d;
            if (!in(j)) continue;
            const double len = g.h * std::sqrt(double(d[0] * d[0] + d[1] * d[1]));
            best = std::max(best, std::abs(u.at(i) - u.at(j)) / len);
        }
    }
    return best;
}

/// Oscillation (max - min of x_n) of the boundary cell centres inside a ball.
inline std::optional<double> boundary_oscillation(const VoxelSet& E, const Ball& ball) {
    double lo = std::numeric_limits<double>::infinity(), hi = -lo;
    const int n = E.grid.n;
    for (auto k : boundary_cells(E)) {
        const Point c = E.grid.center(k);
        if (!ball.contains(c, n)) continue;
        lo = std::min(lo, c[n - 1]);
        hi = std::max(hi, c[n - 1]);
    }
    if (hi < lo) return std::nullopt;
    return hi - lo;
}

}  // namespace fracmin
