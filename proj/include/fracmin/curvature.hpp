#pragma once

// Truncated fractional mean curvature
//   raw = int_{B_r(x0)} (chi_F - chi_cF)(y) |x0 - y|^{-(n+s)} dy,
//   normalized = raw (n-1)(1-s) / varpi(n),
// which tends to the classical mean curvature H (sum of principal
// curvatures, positive for the subgraph of a convex function) as s -> 1.
//
// Voxel sets: x0 is moved to a half-lattice point on the discrete interface,
// so that y -> 2 x0 - y maps cells onto cells. Cells are then summed in
// antipodal pairs; pairs with opposite labels cancel exactly and are never
// integrated, and the remaining ones use adaptive Gauss cubature of the
// kernel over cell n B_r.
//
// Graphs: integrating each vertical column in closed form reduces the ball
// integral to int 2 d^{1-p} G_s(z/d) dy' over |y' - x0'| < r with
// d = |y' - x0'|, z the height of the graph above x0 clamped to the ball and
// p = n + s. Antipodal pairing and dyadic radial panels resolve d -> 0.

#include <functional>
#include <string>
#include <tuple>
#include <variant>

#include "fracmin/geometry.hpp"
#include "fracmin/quadrature.hpp"

namespace fracmin {

inline double varpi(int n) {
    switch (n) {
        case 2: return 2.0;
        case 3: return 2.0 * std::numbers::pi;
        case 4: return 4.0 * std::numbers::pi;
        default: throw Error("varpi: dimension must be 2, 3 or 4");
    }
}

inline double normalization(int n, double s) { return (n - 1) * (1.0 - s) / varpi(n); }

/// G(tau) = int_0^tau (1+t^2)^{-p/2} dt. With t = tan(phi) this is
/// int_0^{atan tau} cos^{p-2}(phi) dphi, which is what gets integrated.
inline double gs(double tau, double p) {
    if (!(p > 1.0)) throw Error("gs: exponent must exceed 1");
    if (tau == 0.0) return 0.0;
    const double sign = tau < 0 ? -1.0 : 1.0;
    const double theta = std::atan(std::abs(tau));
    const double v = quad::adaptive([&](double phi) { return std::pow(std::cos(phi), p - 2.0); }, 0.0, theta,
                                    1e-13);
    return sign * v;
}

/// Tabulated G for bulk evaluation: cumulative integrals on a uniform phi
/// grid plus a short Gauss rule from the nearest node.
class GsTable {
public:
    explicit GsTable(double p, int nodes = 4096) : p_(p), step_(0.5 * std::numbers::pi / nodes) {
        if (!(p > 1.0)) throw Error("gs: exponent must exceed 1");
        cum_.resize(nodes + 1, 0.0);
        for (int k = 0; k < nodes; ++k)
            cum_[k + 1] = cum_[k] + quad::fixed([&](double phi) { return integrand(phi); }, k * step_,
                                                (k + 1) * step_, 12);
    }
    double operator()(double tau) const {
        if (tau == 0.0) return 0.0;
        const double theta = std::atan(std::abs(tau));
        const std::size_t k = std::min(cum_.size() - 1, std::size_t(theta / step_));
        const double v = cum_[k] + quad::fixed([&](double phi) { return integrand(phi); }, k * step_, theta, 4);
        return tau < 0 ? -v : v;
    }
    double limit() const { return cum_.back(); }

private:
    double integrand(double phi) const { return std::pow(std::max(0.0, std::cos(phi)), p_ - 2.0); }
    double p_, step_;
    std::vector<double> cum_;
};

struct CurvatureReport {
    double raw_integral = 0;
    double normalized = 0;
    double r = 0;
    double s = 0;
    int n = 2;
    double quad_error_est = 0;
    Point x0{0, 0, 0};  // point actually used (snapped for voxel sets)
    std::string region = "ball";
    std::size_t active_pairs = 0;  // non-cancelling antipodal pairs (voxel)
};

inline CurvatureReport make_report(double raw, double err, int n, double r, double s) {
    CurvatureReport rep;
    rep.raw_integral = raw;
    rep.normalized = raw * normalization(n, s);
    rep.r = r;
    rep.s = s;
    rep.n = n;
    rep.quad_error_est = err;
    return rep;
}

/// Second-order Taylor model of a graph at a point: D^2 g eigenvalues, the
/// C^{2,alpha} bound M and the exponent alpha.
struct GraphLocalModel {
    std::vector<double> eigenvalues;
    double holder_norm = 0;  // M
    double alpha = 0.5;

    void validate() const {
        if (!(alpha > 0 && alpha < 1)) throw Error("graph model: alpha must lie in (0,1)");
        for (double l : eigenvalues)
            if (holder_norm < std::abs(l) / 2) throw Error("graph model: M must dominate |lambda_i|/2");
    }
    double mean_curvature() const {
        double h = 0;
        for (double l : eigenvalues) h += l;
        return h;
    }
    /// min{1/n, 1/(2M)} with n the ambient dimension.
    double radius() const {
        const int n = int(eigenvalues.size()) + 1;
        return holder_norm > 0 ? std::min(1.0 / n, 1.0 / (2 * holder_norm)) : 1.0 / n;
    }
};

enum class CurvatureRegion { ball, cylinder };

namespace detail {

/// Half-lattice point p = origin + q h/2.
inline Point half_point(const Grid& g, const Index& q) {
    Point p{0, 0, 0};
    for (int a = 0; a < g.n; ++a) p[a] = g.origin[a] + 0.5 * g.h * double(q[a]);
    return p;
}

inline Index reflect(const Index& i, const Index& q, int n) {
    Index r{0, 0, 0};
    for (int a = 0; a < n; ++a) r[a] = q[a] - i[a] - 1;
    return r;
}

inline double chi_hat(const VoxelSet& F, const Index& i) { return F.at(i) ? 1.0 : -1.0; }

/// True when the closed cells meeting p carry both labels and every
/// antipodal pair among them cancels, so the integrand is integrable at p.
inline bool admissible(const VoxelSet& F, const Index& q) {
    const int n = F.grid.n;
    bool seen_in = false, seen_out = false;
    std::array<long, 3> lo{0, 0, 0}, hi{0, 0, 0};
    for (int a = 0; a < n; ++a) {
        // cells i with |2i + 1 - q| <= 1 lie in [floor(q/2) - 1, floor(q/2)]
        const long h = q[a] >= 0 ? q[a] / 2 : -((1 - q[a]) / 2);
        lo[a] = h - 1;
        hi[a] = h;
    }
    for (long i0 = lo[0]; i0 <= hi[0]; ++i0)
        for (long i1 = lo[1]; i1 <= hi[1]; ++i1)
            for (long i2 = lo[2]; i2 <= hi[2]; ++i2) {
                const Index i{i0, i1, i2};
                bool touch = true;
                for (int a = 0; a < n; ++a)
                    if (std::abs(2 * i[a] + 1 - q[a]) > 1) touch = false;
                if (!touch) continue;
                const bool in = F.at(i);
                (in ? seen_in : seen_out) = true;
                if (in == F.at(reflect(i, q, n))) return false;
            }
    return seen_in && seen_out;
}

/// Weighted count of non-cancelling antipodal pairs near p.
inline double asymmetry(const VoxelSet& F, const Index& q, double window) {
    const Grid& g = F.grid;
    const int n = g.n;
    const Point p = half_point(g, q);
    const long w = long(std::ceil(window / g.h)) + 1;
    double score = 0;
    std::array<long, 3> lo{0, 0, 0}, hi{0, 0, 0};
    for (int a = 0; a < n; ++a) lo[a] = q[a] / 2 - w, hi[a] = q[a] / 2 + w;
    for (long i0 = lo[0]; i0 <= hi[0]; ++i0)
        for (long i1 = lo[1]; i1 <= hi[1]; ++i1)
            for (long i2 = lo[2]; i2 <= hi[2]; ++i2) {
                const Index i{i0, i1, i2};
                const double d = norm(g.center(i) - p);
                if (d > window) continue;
                if (F.at(i) == F.at(reflect(i, q, n))) score += std::pow(d, -(n + 1));
            }
    return score;
}

struct CellIntegrator {
    int n;
    double s;
    Point p;
    double r;
    CurvatureRegion region;

    bool inside(const Point& y) const {
        if (region == CurvatureRegion::ball) {
            double d2 = 0;
            for (int a = 0; a < n; ++a) d2 += (y[a] - p[a]) * (y[a] - p[a]);
            return d2 < r * r;
        }
        double d2 = 0;
        for (int a = 0; a < n - 1; ++a) d2 += (y[a] - p[a]) * (y[a] - p[a]);
        return d2 < r * r && std::abs(y[n - 1] - p[n - 1]) < r;
    }
    double bounding_radius() const { return region == CurvatureRegion::ball ? r : r * std::sqrt(2.0); }

    /// int over box [lo, lo + size]^n of |y - p|^{-n-s} restricted to the region.
    double box(const Point& lo, double size, int depth, int order) const {
        double dmin2 = 0, dmax2 = 0;
        for (int a = 0; a < n; ++a) {
            const double l = lo[a] - p[a], u = l + size;
            const double m = std::max({0.0, l, -u});
            dmin2 += m * m;
            dmax2 += std::max(l * l, u * u);
        }
        const double dmin = std::sqrt(dmin2);
        if (dmin >= bounding_radius()) return 0.0;
        bool all_in = true;
        for (unsigned c = 0; c < (1u << n); ++c) {
            Point y = lo;
            for (int a = 0; a < n; ++a)
                if ((c >> a) & 1u) y[a] += size;
            if (!inside(y)) {
                all_in = false;
                break;
            }
        }
        const bool near = dmin < 1.5 * size * std::sqrt(double(n));
        const bool split = (near && depth < 14) || (!all_in && depth < 4);
        if (split) {
            double acc = 0;
            const double hs = 0.5 * size;
            for (unsigned c = 0; c < (1u << n); ++c) {
                Point y = lo;
                for (int a = 0; a < n; ++a)
                    if ((c >> a) & 1u) y[a] += hs;
                acc += box(y, hs, depth + 1, order);
            }
            return acc;
        }
        const auto& rule = quad::gl(order);
        double acc = 0;
        const int m = order;
        std::array<int, 3> lim{m, n > 1 ? m : 1, n > 2 ? m : 1};
        for (int i0 = 0; i0 < lim[0]; ++i0)
            for (int i1 = 0; i1 < lim[1]; ++i1)
                for (int i2 = 0; i2 < lim[2]; ++i2) {
                    const std::array<int, 3> ii{i0, i1, i2};
                    Point y{0, 0, 0};
                    double wt = 1, d2 = 0;
                    for (int a = 0; a < n; ++a) {
                        y[a] = lo[a] + 0.5 * size * (1.0 + rule.x[ii[a]]);
                        wt *= 0.5 * size * rule.w[ii[a]];
                        d2 += (y[a] - p[a]) * (y[a] - p[a]);
                    }
                    if (!all_in && !inside(y)) continue;
                    acc += wt * std::pow(d2, -0.5 * (n + s));
                }
        return acc;
    }
};

}  // namespace detail

/// Snaps a requested point to the most symmetric admissible half-lattice
/// point of the voxel interface within `window` (default 3h).
inline Point snap_to_interface(const VoxelSet& F, const Point& x0, double window = 0.0) {
    const Grid& g = F.grid;
    const int n = g.n;
    if (window <= 0) window = 3.0 * g.h;
    const long w = long(std::ceil(2.0 * window / g.h)) + 1;
    Index qc{0, 0, 0};
    for (int a = 0; a < n; ++a) qc[a] = std::lround(2.0 * (x0[a] - g.origin[a]) / g.h);
    struct Best {
        double score = std::numeric_limits<double>::infinity(), dist = 0;
        Index q{0, 0, 0};
        bool found = false;
    } best;
    std::array<long, 3> lo{0, 0, 0}, hi{0, 0, 0};
    for (int a = 0; a < n; ++a) lo[a] = qc[a] - w, hi[a] = qc[a] + w;
    for (long i0 = lo[0]; i0 <= hi[0]; ++i0)
        for (long i1 = lo[1]; i1 <= hi[1]; ++i1)
            for (long i2 = lo[2]; i2 <= hi[2]; ++i2) {
                const Index q{i0, i1, i2};
                bool centre = true;  // cell centres are never on the interface
                for (int a = 0; a < n; ++a)
                    if (q[a] % 2 == 0) centre = false;
                if (centre) continue;
                const double dist = norm(detail::half_point(g, q) - x0);
                if (dist > window) continue;
                if (!detail::admissible(F, q)) continue;
                const double score = detail::asymmetry(F, q, 3.0 * g.h);
                const bool better = !best.found || score < best.score - 1e-9 * std::max(1.0, best.score) ||
                                    (std::abs(score - best.score) <= 1e-9 * std::max(1.0, best.score) &&
                                     dist < best.dist - 1e-12);
                if (better) best = {score, dist, q, true};
            }
    if (!best.found) throw Error("frac_curvature: point is not on the boundary of the set");
    return detail::half_point(g, best.q);
}

/// Voxel fractional curvature at (a snapped version of) x0 over B_r(x0) or
/// the cylinder K_r(x0).
inline CurvatureReport frac_curvature(const VoxelSet& F, const Point& x0, double r, double s,
                                      CurvatureRegion region = CurvatureRegion::ball) {
    F.validate();
    const Grid& g = F.grid;
    const int n = g.n;
    if (!(s > 0 && s < 1)) throw Error("frac_curvature: s must lie in (0,1)");
    if (!(r > 0)) throw Error("frac_curvature: r must be positive");
    const Point p = snap_to_interface(F, x0);
    const double reach = region == CurvatureRegion::ball ? r : r * std::sqrt(2.0);
    {
        const Point lo = g.lower(), hi = g.upper();
        for (int a = 0; a < n; ++a) {
            if (p[a] - r < lo[a] - 1e-12 || p[a] + r > hi[a] + 1e-12)
                throw Error("frac_curvature: integration region exits the grid box");
        }
    }
    Index q{0, 0, 0};
    for (int a = 0; a < n; ++a) q[a] = std::lround(2.0 * (p[a] - g.origin[a]) / g.h);
    // Cells meeting the region; each antipodal pair is visited once.
    std::array<long, 3> lo{0, 0, 0}, hi{0, 0, 0};
    for (int a = 0; a < n; ++a) {
        lo[a] = long(std::floor((p[a] - reach - g.origin[a]) / g.h)) - 1;
        hi[a] = long(std::floor((p[a] + reach - g.origin[a]) / g.h)) + 1;
    }
    struct Pair {
        Index cell;
        double sign;
    };
    std::vector<Pair> active;
    for (long i0 = lo[0]; i0 <= hi[0]; ++i0)
        for (long i1 = lo[1]; i1 <= hi[1]; ++i1)
            for (long i2 = lo[2]; i2 <= hi[2]; ++i2) {
                const Index i{i0, i1, i2};
                const Index j = detail::reflect(i, q, n);
                if (!(i < j)) continue;
                const double sig = detail::chi_hat(F, i) + detail::chi_hat(F, j);
                if (sig != 0.0) active.push_back({i, sig});
            }
    const detail::CellIntegrator integ{n, s, p, r, region};
    auto vals = parallel_map<std::pair<double, double>>(active.size(), [&](std::size_t t) {
        Point c = g.lower();
        for (int a = 0; a < n; ++a) c[a] += double(active[t].cell[a]) * g.h;
        const double fine = integ.box(c, g.h, 0, 4), coarse = integ.box(c, g.h, 0, 3);
        return std::pair{active[t].sign * fine, std::abs(active[t].sign) * std::abs(fine - coarse)};
    });
    CompensatedSum raw, err;
    for (const auto& [v, e] : vals) raw += v, err += e;
    auto rep = make_report(raw.value(), err.value() * normalization(n, s), n, r, s);
    rep.x0 = p;
    rep.region = region == CurvatureRegion::ball ? "ball" : "cylinder";
    rep.active_pairs = active.size();
    return rep;
}

namespace detail {

/// int_{|y'| < r} f(y') dy' for a function of y' in R^{m}, m = 1 or 2, whose
/// antipodal sum f(y') + f(-y') behaves like c |y'|^{1-m-s} near 0. Dyadic
/// radial panels down to r 2^{-levels}; the rest is the power-law tail.
/// Deeper levels would only see round-off in g(y) - g(x0), which is of
/// order |y'|^2, while for s near 1 the tail carries most of the mass.
template <class F>
double radial_integral(int m, double s, double r, F&& f, int order, int angles, int levels = 16) {
    const auto& rule = quad::gl(order);
    auto ring = [&](double d) {
        if (m == 1) return f(Point{d, 0, 0}) + f(Point{-d, 0, 0});
        const auto& ar = quad::gl(angles);
        double acc = 0;
        for (int k = 0; k < angles; ++k) {
            const double th = 0.5 * std::numbers::pi * (1.0 + ar.x[k]);
            const Point u{d * std::cos(th), d * std::sin(th), 0};
            acc += 0.5 * std::numbers::pi * ar.w[k] * (f(u) + f(-1.0 * u));
        }
        return acc * d;
    };
    auto panel = [&](double lo, double b) {
        double v = 0;
        for (int i = 0; i < order; ++i) {
            const double d = 0.5 * (lo + b) + 0.5 * (b - lo) * rule.x[i];
            v += 0.5 * (b - lo) * rule.w[i] * ring(d);
        }
        return v;
    };
    CompensatedSum total;
    // the ball truncation has a square-root edge at |y'| = r
    for (int j = 1; j <= 20; ++j) total += panel(r - r * std::ldexp(1.0, -j), r - r * std::ldexp(1.0, -j - 1));
    double a = 0.5 * r;
    for (int k = 1; k < levels; ++k) {
        total += panel(0.5 * a, a);
        a *= 0.5;
    }
    total += ring(a) * a / (1.0 - s);
    return total.value();
}

}  // namespace detail

/// Ball-truncated fractional curvature of the subgraph {y_n < g(y')} at
/// x0 = (x0', g(x0')). `g` takes points whose first n-1 coordinates are y'.
template <class Fn>
CurvatureReport graph_frac_curvature(Fn&& g, int n, const Point& x0p, double r, double s) {
    if (n < 2 || n > 3) throw Error("graph curvature: dimension must be 2 or 3");
    if (!(s > 0 && s < 1)) throw Error("graph curvature: s must lie in (0,1)");
    const double p = n + s;
    const GsTable G(p);
    const double xn = g(x0p);
    auto f = [&](int) {
        return [&](const Point& v) {
            const double d = norm(v);
            Point y = x0p;
            for (int a = 0; a < n - 1; ++a) y[a] += v[a];
            const double T = std::sqrt(std::max(0.0, r * r - d * d));
            const double z = std::clamp(g(y) - xn, -T, T);
            return 2.0 * std::pow(d, 1.0 - p) * G(z / d);
        };
    };
    const double fine = detail::radial_integral(n - 1, s, r, f(0), 10, 48);
    const double coarse = detail::radial_integral(n - 1, s, r, f(0), 6, 24);
    auto rep = make_report(fine, std::abs(fine - coarse) * normalization(n, s), n, r, s);
    Point x = x0p;
    x[n - 1] = xn;
    rep.x0 = x;
    return rep;
}

/// Cylinder form 2 int_{|y'|<=r} G_s(u(y')/|y'|) |y'|^{-(n+s-1)} dy' for a
/// graph already centred so that u(0) = 0 and grad u(0) = 0.
template <class U>
double graph_curvature_integral_fn(U&& u, int n, double r, double s) {
    const double p = n + s;
    const GsTable G(p);
    bool exits = false;
    auto f = [&](const Point& v) {
        const double d = norm(v);
        const double z = u(v);
        if (std::abs(z) > 0.5 * r + 1e-12) exits = true;
        return 2.0 * std::pow(d, 1.0 - p) * G(z / d);
    };
    const double val = detail::radial_integral(n - 1, s, r, f, 10, 48);
    if (exits) throw Error("graph exits cylinder");
    return val;
}

/// graph_curvature_integral for a sampled graph (base coordinates centred at
/// the origin).
inline double graph_curvature_integral(const GraphFunction& u, double r, double s) {
    const int n = u.ambient_dim();
    const Grid& b = u.base;
    const double h = b.h;
    Point o{0, 0, 0};
    const double u0 = u(o);
    double grad2 = 0;
    // the interpolant is C^1, so a short step measures its own gradient
    const double step = 1e-4 * h;
    for (int a = 0; a < b.n; ++a) {
        Point e{0, 0, 0};
        e[a] = step;
        const double d = (u(o + e) - u(o - e)) / (2 * step);
        grad2 += d * d;
    }
    // loose enough for sampled data, tight enough to catch a missing
    // recentring or rotation
    if (std::abs(u0) > 1e-6 * r || std::sqrt(grad2) > 1e-3)
        throw Error("graph curvature: u must satisfy u(0) = 0 and grad u(0) = 0");
    return graph_curvature_integral_fn([&](const Point& v) { return u(v); }, n, r, s);
}

/// Mean curvature of the graph of u at x0' by centred second-order
/// differences of step h on the interpolant:
///   H = (Lap u (1 + |Du|^2) - (D^2u Du) . Du) / (1 + |Du|^2)^{3/2}.
inline double classical_mean_curvature(const GraphFunction& u, const Point& x0p) {
    const Grid& b = u.base;
    const int m = b.n;
    const double h = b.h;
    for (int a = 0; a < m; ++a) {
        const double lo = b.origin[a] + 2.5 * h, hi = b.origin[a] + (b.dims[a] - 2.5) * h;
        if (x0p[a] < lo - 1e-12 || x0p[a] > hi + 1e-12)
            throw Error("classical_mean_curvature: point too close to the edge of the base grid");
    }
    auto at = [&](int a, int da, int c, int dc) {
        Point x = x0p;
        if (a >= 0) x[a] += da * h;
        if (c >= 0) x[c] += dc * h;
        return u(x);
    };
    const double u0 = at(-1, 0, -1, 0);
    std::array<double, 2> D{0, 0};
    std::array<std::array<double, 2>, 2> H{};
    for (int a = 0; a < m; ++a) {
        D[a] = (at(a, 1, -1, 0) - at(a, -1, -1, 0)) / (2 * h);
        H[a][a] = (at(a, 1, -1, 0) - 2 * u0 + at(a, -1, -1, 0)) / (h * h);
    }
    if (m == 2) {
        H[0][1] = H[1][0] =
            (at(0, 1, 1, 1) - at(0, 1, 1, -1) - at(0, -1, 1, 1) + at(0, -1, 1, -1)) / (4 * h * h);
    }
    double lap = 0, g2 = 0, hdd = 0;
    for (int a = 0; a < m; ++a) {
        lap += H[a][a];
        g2 += D[a] * D[a];
        for (int c = 0; c < m; ++c) hdd += H[a][c] * D[a] * D[c];
    }
    return (lap * (1 + g2) - hdd) / std::pow(1 + g2, 1.5);
}

/// Exact truncated fractional curvature of a ball of radius rho (F = ball,
/// or its complement when `exterior`) at any boundary point. Along an
/// inward direction at angle phi from the normal the chord has length
/// 2 rho cos(phi); pairing opposite rays leaves
///   raw = -/+ 2 int (m^{-s} - r^{-s}) / s dsigma,  m = min(2 rho cos phi, r),
/// over inward directions. The integrand vanishes where m = r; near
/// grazing directions psi = pi/2 - phi = w^{1/(1-s)} removes the psi^{-s}
/// singularity.
inline double ball_curvature_exact(int n, double rho, double r, double s, bool exterior) {
    if (n != 2 && n != 3) throw Error("ball_curvature_exact: dimension must be 2 or 3");
    const double pi = std::numbers::pi;
    const double psi_max = r < 2 * rho ? std::asin(r / (2 * rho)) : 0.5 * pi;
    const double e = 1.0 / (1.0 - s);
    auto g = [&](double w) {
        const double psi = std::pow(w, e);
        const double sinc = psi > 1e-8 ? std::sin(psi) / psi : 1.0;
        // (m^{-s} - r^{-s}) dpsi/dw with dpsi/dw = psi^s / (1 - s); here m < r
        const double val = (std::pow(2 * rho * sinc, -s) - std::pow(r, -s) * std::pow(psi, s)) * e / s;
        const double jac = n == 2 ? 2.0 : 2 * pi * std::cos(psi);
        return val * jac;
    };
    const double v = quad::adaptive(g, 0.0, std::pow(psi_max, 1.0 - s), 1e-12);
    return exterior ? 2.0 * v : -2.0 * v;
}


/// Smooth reference shapes for the s -> 1 study, each written as the
/// subgraph {y_n < u(y')} near the origin: the exterior of a sphere of
/// radius rho resting on the origin (H = (n-1)/rho), the paraboloid
/// u = lambda |y'|^2 / 2 (H = (n-1) lambda) and the halfspace.
struct CurvatureShape {
    enum class Kind { halfspace, sphere, paraboloid };
    Kind kind = Kind::halfspace;
    int n = 2;
    double param = 0.0;

    double u(const Point& y) const {
        double q = 0;
        for (int a = 0; a < n - 1; ++a) q += y[a] * y[a];
        switch (kind) {
            case Kind::halfspace: return 0.0;
            case Kind::sphere: return param - std::sqrt(std::max(0.0, param * param - q));
            case Kind::paraboloid: return 0.5 * param * q;
        }
        return 0.0;
    }
    double classical() const { return kind == Kind::halfspace ? 0.0 : (n - 1) * (kind == Kind::sphere ? 1.0 / param : param); }
    std::string name() const {
        switch (kind) {
            case Kind::halfspace: return "halfspace";
            case Kind::sphere: return (n == 2 ? "circle:" : "sphere:") + std::to_string(param);
            case Kind::paraboloid: return "paraboloid:" + std::to_string(param);
        }
        return "";
    }

    /// "halfspace", "circle:RHO" (n = 2), "sphere:RHO", "paraboloid:LAMBDA".
    static CurvatureShape parse(const std::string& text, int n) {
        CurvatureShape sh;
        sh.n = n;
        const auto colon = text.find(':');
        const std::string head = text.substr(0, colon);
        if (head == "halfspace") return sh;
        if (colon == std::string::npos) throw Error("shape: expected KIND:VALUE, got '" + text + "'");
        std::size_t used = 0;
        try {
            sh.param = std::stod(text.substr(colon + 1), &used);
        } catch (const std::exception&) {
            throw Error("shape: bad parameter in '" + text + "'");
        }
        if (used != text.size() - colon - 1) throw Error("shape: bad parameter in '" + text + "'");
        if (head == "circle") {
            if (n != 2) throw Error("shape: circle needs n = 2");
            sh.kind = Kind::sphere;
        } else if (head == "sphere") {
            sh.kind = Kind::sphere;
        } else if (head == "paraboloid") {
            sh.kind = Kind::paraboloid;
        } else {
            throw Error("shape: unknown kind '" + head + "'");
        }
        if (!(sh.param > 0)) throw Error("shape: parameter must be positive");
        return sh;
    }
};

struct ConvergenceRow {
    double s, normalized, classical, abs_error, h;
};

/// Rows for each s at spacings h, h/2 and h/4. A and B come from the
/// least-squares fit abs_error ~ A (1-s) + B h over the rows at h and h/2;
/// A_refined and B_refined from the rows at h/2 and h/4.
struct ConvergenceTable {
    std::string shape;
    double r = 0, h = 0;
    std::vector<ConvergenceRow> rows;
    double A = 0, B = 0, A_refined = 0, B_refined = 0;

    std::vector<ConvergenceRow> at(double spacing) const {
        std::vector<ConvergenceRow> out;
        for (const auto& row : rows)
            if (row.h == spacing) out.push_back(row);
        return out;
    }
};

namespace detail {

inline std::pair<double, double> fit_rate(const std::vector<ConvergenceRow>& rows) {
    double a11 = 0, a12 = 0, a22 = 0, b1 = 0, b2 = 0;
    for (const auto& row : rows) {
        const double x = 1 - row.s, y = row.h;
        a11 += x * x, a12 += x * y, a22 += y * y;
        b1 += x * row.abs_error, b2 += y * row.abs_error;
    }
    const double det = a11 * a22 - a12 * a12;
    if (!(std::abs(det) > 1e-300)) throw Error("convergence study: degenerate fit (need two s values)");
    return {(b1 * a22 - b2 * a12) / det, (a11 * b2 - a12 * b1) / det};
}

}  // namespace detail

/// The shape is sampled on an (n-1)-dimensional grid of spacing h and the
/// ball-truncated curvature of the interpolated subgraph is evaluated at the
/// origin. h defaults to r/16.
inline ConvergenceTable convergence_study(const CurvatureShape& shape, const std::vector<double>& s_list, double r,
                                          double h = 0.0) {
    if (shape.n != 2 && shape.n != 3) throw Error("convergence study: dimension must be 2 or 3");
    if (s_list.empty()) throw Error("convergence study: empty s list");
    for (double s : s_list)
        if (!(s > 0 && s < 1)) throw Error("convergence study: s must lie in (0,1)");
    if (!(r > 0)) throw Error("convergence study: r must be positive");
    if (h == 0.0) h = r / 16;
    if (!(h > 0 && h <= r)) throw Error("convergence study: h must lie in (0, r]");
    // past |y'| = rho the sampled sphere is clamped flat; the graph has left
    // B_r well before that when r < rho
    if (shape.kind == CurvatureShape::Kind::sphere && r >= shape.param)
        throw Error("convergence study: r must stay below the sphere radius");

    const int m = shape.n - 1;
    const std::array<double, 3> spacings{h, h / 2, h / 4};
    std::vector<GraphFunction> graphs;
    for (double hh : spacings) {
        const long half = static_cast<long>(std::ceil(r / hh)) + 4;
        std::array<long, 3> dims{2 * half, m == 2 ? 2 * half : 1, 1};
        Point origin{-half * hh, m == 2 ? -half * hh : 0.0, 0};
        graphs.push_back(GraphFunction::sample(Grid(m, dims, origin, hh), [&](const Point& y) { return shape.u(y); }));
    }
    const std::size_t ns = s_list.size();
    auto rows = parallel_map<ConvergenceRow>(3 * ns, [&](std::size_t t) {
        const std::size_t level = t / ns;
        const double s = s_list[t % ns];
        const GraphFunction& u = graphs[level];
        const auto rep = graph_frac_curvature([&](const Point& y) { return u(y); }, shape.n, Point{0, 0, 0}, r, s);
        const double H = shape.classical();
        return ConvergenceRow{s, rep.normalized, H, std::abs(rep.normalized - H), spacings[level]};
    });
    ConvergenceTable tab;
    tab.shape = shape.name();
    tab.r = r;
    tab.h = h;
    tab.rows = rows;
    auto pick = [&](double a, double b) {
        std::vector<ConvergenceRow> out;
        for (const auto& row : rows)
            if (row.h == a || row.h == b) out.push_back(row);
        return out;
    };
    std::tie(tab.A, tab.B) = detail::fit_rate(pick(spacings[0], spacings[1]));
    std::tie(tab.A_refined, tab.B_refined) = detail::fit_rate(pick(spacings[1], spacings[2]));
    return tab;
}

}  // namespace fracmin
