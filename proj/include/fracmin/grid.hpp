#pragma once

// Regular grids, voxelized sets with an exterior rule, sampled graph
// functions and the simple regions (balls, cylinders, boxes) used to
// localize every computation.

#include <cstdint>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "fracmin/core.hpp"

namespace fracmin {

using Index = std::array<long, 3>;

/// Uniform cell-centred grid. Cell i along axis a spans
/// [origin[a] + i h, origin[a] + (i+1) h]. Storage is row-major with the last
/// axis fastest.
struct Grid {
    int n = 2;
    std::array<long, 3> dims{1, 1, 1};
    Point origin{0, 0, 0};
    double h = 1.0;

    Grid() = default;
    Grid(int dim, std::array<long, 3> d, Point o, double spacing)
        : n(dim), dims(d), origin(o), h(spacing) {
        for (int a = n; a < 3; ++a) dims[a] = 1, origin[a] = 0.0;
        validate();
    }

    /// Grid covering [lo, hi]^n with `cells` cells per axis.
    static Grid cube(int dim, double lo, double hi, long cells) {
        Point o{lo, lo, lo};
        return Grid(dim, {cells, cells, cells}, o, (hi - lo) / double(cells));
    }

    void validate() const {
        if (n < 1 || n > 3) throw Error("grid: dimension must be 1, 2 or 3");
        if (!(h > 0.0) || !std::isfinite(h)) throw Error("grid: spacing must be positive");
        for (int a = 0; a < n; ++a)
            if (dims[a] < 2) throw Error("grid: at least two cells per axis");
    }

    std::size_t size() const {
        return static_cast<std::size_t>(dims[0] * dims[1] * dims[2]);
    }
    std::size_t flat(const Index& i) const {
        return static_cast<std::size_t>((i[0] * dims[1] + i[1]) * dims[2] + i[2]);
    }
    Index unflat(std::size_t k) const {
        Index i{0, 0, 0};
        i[2] = static_cast<long>(k % dims[2]);
        k /= dims[2];
        i[1] = static_cast<long>(k % dims[1]);
        i[0] = static_cast<long>(k / dims[1]);
        return i;
    }
    bool in_range(const Index& i) const {
        for (int a = 0; a < 3; ++a)
            if (i[a] < 0 || i[a] >= dims[a]) return false;
        return true;
    }
    Point center(const Index& i) const {
        Point p{0, 0, 0};
        for (int a = 0; a < n; ++a) p[a] = origin[a] + (double(i[a]) + 0.5) * h;
        return p;
    }
    Point center(std::size_t k) const { return center(unflat(k)); }
    /// Cell containing p (may be out of range).
    Index locate(const Point& p) const {
        Index i{0, 0, 0};
        for (int a = 0; a < n; ++a) i[a] = static_cast<long>(std::floor((p[a] - origin[a]) / h));
        return i;
    }
    Point lower() const { return origin; }
    Point upper() const {
        Point p = origin;
        for (int a = 0; a < n; ++a) p[a] += double(dims[a]) * h;
        return p;
    }
    double diameter() const {
        double s = 0;
        for (int a = 0; a < n; ++a) s += std::pow(double(dims[a]) * h, 2);
        return std::sqrt(s);
    }
    /// Distance from p to the box boundary (negative outside).
    double distance_to_edge(const Point& p) const {
        double d = std::numeric_limits<double>::infinity();
        const Point hi = upper();
        for (int a = 0; a < n; ++a) d = std::min({d, p[a] - origin[a], hi[a] - p[a]});
        return d;
    }
    bool same_as(const Grid& o) const {
        return n == o.n && dims == o.dims && origin == o.origin && h == o.h;
    }
};

/// Describes a set outside the grid box.
struct ExteriorRule {
    enum class Kind { empty, full, halfspace, complement_halfspace, cone, complement_cone, periodic };
    Kind kind = Kind::empty;
    Point nu{0, 0, 0};    // halfspace normal, {x . nu < offset}
    double offset = 0.0;
    double slope = 0.0;   // cone: {x_n < slope |x'|}; complement_cone is its complement

    static ExteriorRule empty() { return {}; }
    static ExteriorRule full() { return {Kind::full}; }
    static ExteriorRule halfspace(Point nu, double offset) {
        return {Kind::halfspace, nu, offset};
    }
    static ExteriorRule complement_halfspace(Point nu, double offset) {
        return {Kind::complement_halfspace, nu, offset};
    }
    static ExteriorRule cone(double slope) {
        ExteriorRule r{Kind::cone};
        r.slope = slope;
        return r;
    }
    static ExteriorRule periodic() { return {Kind::periodic}; }

    /// Membership for the analytic rules. Periodic rules are resolved by
    /// VoxelSet, which owns the data being repeated.
    bool contains(const Point& x, int n) const {
        switch (kind) {
            case Kind::empty: return false;
            case Kind::full: return true;
            case Kind::halfspace: return dot(x, nu) < offset;
            case Kind::complement_halfspace: return !(dot(x, nu) < offset);
            case Kind::cone:
            case Kind::complement_cone: {
                double r2 = 0;
                for (int a = 0; a < n - 1; ++a) r2 += x[a] * x[a];
                return (x[n - 1] < slope * std::sqrt(r2)) == (kind == Kind::cone);
            }
            case Kind::periodic: break;
        }
        throw Error("exterior rule: periodic membership needs the voxel data");
    }

    ExteriorRule complement() const {
        ExteriorRule r = *this;
        switch (kind) {
            case Kind::empty: r.kind = Kind::full; break;
            case Kind::full: r.kind = Kind::empty; break;
            case Kind::halfspace: r.kind = Kind::complement_halfspace; break;
            case Kind::complement_halfspace: r.kind = Kind::halfspace; break;
            case Kind::cone: r.kind = Kind::complement_cone; break;
            case Kind::complement_cone: r.kind = Kind::cone; break;
            case Kind::periodic: break;
        }
        return r;
    }

    std::string name() const {
        switch (kind) {
            case Kind::empty: return "empty";
            case Kind::full: return "full";
            case Kind::halfspace: return "halfspace";
            case Kind::complement_halfspace: return "complement-halfspace";
            case Kind::cone: return "cone";
            case Kind::complement_cone: return "complement-cone";
            case Kind::periodic: return "periodic-extend";
        }
        return "?";
    }
};

/// Occupancy of a set E on a grid, completed outside the box by a rule.
struct VoxelSet {
    Grid grid;
    std::vector<std::uint8_t> occ;
    ExteriorRule exterior;

    VoxelSet() = default;
    VoxelSet(Grid g, ExteriorRule ext) : grid(g), occ(g.size(), 0), exterior(ext) {}

    void validate() const {
        grid.validate();
        if (occ.size() != grid.size()) throw Error("voxel set: occupancy length mismatch");
    }

    bool at(std::size_t k) const { return occ[k] != 0; }
    /// Occupancy for any index; out-of-range cells follow the exterior rule
    /// evaluated at the ghost cell centre.
    bool at(const Index& i) const {
        if (grid.in_range(i)) return occ[grid.flat(i)] != 0;
        if (exterior.kind == ExteriorRule::Kind::periodic) {
            Index j = i;
            for (int a = 0; a < grid.n; ++a) {
                j[a] %= grid.dims[a];
                if (j[a] < 0) j[a] += grid.dims[a];
            }
            return occ[grid.flat(j)] != 0;
        }
        return exterior.contains(grid.center(i), grid.n);
    }
    /// chi_E at an arbitrary point.
    bool contains(const Point& p) const {
        const Index i = grid.locate(p);
        return at(i);
    }
    std::size_t count() const {
        std::size_t c = 0;
        for (auto v : occ) c += v != 0;
        return c;
    }
    VoxelSet complement() const {
        VoxelSet c = *this;
        for (auto& v : c.occ) v = v ? 0 : 1;
        c.exterior = exterior.complement();
        return c;
    }

    /// Voxelizes an indicator: a cell is occupied when its centre is in E.
    template <class Pred>
    static VoxelSet from_predicate(const Grid& g, ExteriorRule ext, Pred&& inside) {
        VoxelSet v(g, ext);
        for (std::size_t k = 0; k < g.size(); ++k) v.occ[k] = inside(g.center(k)) ? 1 : 0;
        return v;
    }
};

/// u sampled at the cell centres of an (n-1)-dimensional base grid; the
/// represented set is the subgraph {x_n < u(x')}.
struct GraphFunction {
    Grid base;
    std::vector<double> values;
    std::optional<double> lipschitz_hint;

    GraphFunction() = default;
    GraphFunction(Grid g, std::vector<double> v) : base(g), values(std::move(v)) { validate(); }

    template <class Fn>
    static GraphFunction sample(const Grid& g, Fn&& u) {
        std::vector<double> v(g.size());
        for (std::size_t k = 0; k < g.size(); ++k) v[k] = u(g.center(k));
        return GraphFunction(g, std::move(v));
    }

    int ambient_dim() const { return base.n + 1; }

    void validate() const {
        base.validate();
        if (values.size() != base.size()) throw Error("graph function: value count mismatch");
        for (double v : values)
            if (!std::isfinite(v)) throw Error("graph function: non-finite value");
    }

    double at(const Index& i) const { return values[base.flat(i)]; }

    /// Separable Catmull-Rom interpolation (C^1, reproduces affine data).
    /// Points outside the sample hull are an error.
    double operator()(const Point& x) const {
        const int m = base.n;
        std::array<long, 3> i0{0, 0, 0};
        std::array<double, 3> t{0, 0, 0};
        for (int a = 0; a < m; ++a) {
            const double u = (x[a] - base.origin[a]) / base.h - 0.5;
            if (u < -1e-9 || u > double(base.dims[a] - 1) + 1e-9)
                throw Error("graph function: evaluation outside the sampled range");
            long i = static_cast<long>(std::floor(u));
            i = std::clamp<long>(i, 0, base.dims[a] - 2);
            i0[a] = i;
            t[a] = u - double(i);
        }
        auto weights = [](double s, long i, long dim) {
            std::array<double, 4> w{-0.5 * s * (1 - s) * (1 - s), 1 - 2.5 * s * s + 1.5 * s * s * s,
                                    0.5 * s * (1 + 4 * s - 3 * s * s), -0.5 * s * s * (1 - s)};
            // Fall back to linear interpolation on the first and last interval.
            if (i == 0 || i + 2 >= dim) w = {0.0, 1 - s, s, 0.0};
            return w;
        };
        auto clampi = [](long i, long dim) { return std::clamp<long>(i, 0, dim - 1); };
        if (m == 1) {
            const auto w = weights(t[0], i0[0], base.dims[0]);
            double v = 0;
            for (int p = 0; p < 4; ++p) {
                if (w[p] == 0.0) continue;
                v += w[p] * values[clampi(i0[0] - 1 + p, base.dims[0])];
            }
            return v;
        }
        const auto w0 = weights(t[0], i0[0], base.dims[0]);
        const auto w1 = weights(t[1], i0[1], base.dims[1]);
        double v = 0;
        for (int p = 0; p < 4; ++p) {
            if (w0[p] == 0.0) continue;
            const long a = clampi(i0[0] - 1 + p, base.dims[0]);
            for (int q = 0; q < 4; ++q) {
                if (w1[q] == 0.0) continue;
                const long b = clampi(i0[1] - 1 + q, base.dims[1]);
                v += w0[p] * w1[q] * values[base.flat({a, b, 0})];
            }
        }
        return v;
    }
};

struct Ball {
    Point center{0, 0, 0};
    double radius = 1.0;
    bool contains(const Point& p, int n) const {
        double s = 0;
        for (int a = 0; a < n; ++a) s += (p[a] - center[a]) * (p[a] - center[a]);
        return s < radius * radius;
    }
};

/// K_rho(P) = {|x' - P'| < rho} x {|x_n - P_n| < rho}, with x_n measured along
/// `axis`.
struct Cylinder {
    Point center{0, 0, 0};
    double rho = 1.0;
    Point axis{0, 0, 0};  // zero means e_n

    Point unit_axis(int n) const {
        if (norm(axis) == 0.0) {
            Point e{0, 0, 0};
            e[n - 1] = 1.0;
            return e;
        }
        if (std::abs(norm(axis) - 1.0) > 1e-12) throw Error("cylinder: axis must be a unit vector");
        return axis;
    }
    bool contains(const Point& p, int n) const {
        const Point e = unit_axis(n);
        Point d = p - center;
        for (int a = n; a < 3; ++a) d[a] = 0;
        const double along = dot(d, e);
        const Point perp = d - along * e;
        return std::abs(along) < rho && norm(perp) < rho;
    }
    double bounding_radius() const { return rho * std::sqrt(2.0); }
};

struct Box {
    Point lo{0, 0, 0}, hi{0, 0, 0};
    bool contains(const Point& p, int n) const {
        for (int a = 0; a < n; ++a)
            if (p[a] < lo[a] || p[a] >= hi[a]) return false;
        return true;
    }
};

using Region = std::variant<Ball, Cylinder, Box>;

inline bool region_contains(const Region& r, const Point& p, int n) {
    return std::visit([&](const auto& g) { return g.contains(p, n); }, r);
}

/// Cell-wise membership mask: a cell belongs to a region when its centre does.
inline std::vector<std::uint8_t> region_mask(const Grid& g, const Region& r) {
    std::vector<std::uint8_t> m(g.size());
    for (std::size_t k = 0; k < g.size(); ++k) m[k] = region_contains(r, g.center(k), g.n) ? 1 : 0;
    return m;
}

/// True when the closed region lies inside the grid box.
inline bool region_inside_box(const Region& r, const Grid& g) {
    const Point lo = g.lower(), hi = g.upper();
    auto inside = [&](const Point& c, double ext) {
        for (int a = 0; a < g.n; ++a)
            if (c[a] - ext < lo[a] - 1e-12 || c[a] + ext > hi[a] + 1e-12) return false;
        return true;
    };
    if (auto b = std::get_if<Ball>(&r)) return inside(b->center, b->radius);
    if (auto c = std::get_if<Cylinder>(&r)) return inside(c->center, c->bounding_radius());
    const auto& bx = std::get<Box>(r);
    for (int a = 0; a < g.n; ++a)
        if (bx.lo[a] < lo[a] - 1e-12 || bx.hi[a] > hi[a] + 1e-12) return false;
    return true;
}

inline double region_measure(const Region& r, int n) {
    if (auto b = std::get_if<Ball>(&r)) return unit_ball_volume(n) * std::pow(b->radius, n);
    if (auto c = std::get_if<Cylinder>(&r))
        return unit_ball_volume(n - 1) * std::pow(c->rho, n - 1) * 2.0 * c->rho;
    const auto& bx = std::get<Box>(r);
    double v = 1;
    for (int a = 0; a < n; ++a) v *= bx.hi[a] - bx.lo[a];
    return v;
}

}  // namespace fracmin
