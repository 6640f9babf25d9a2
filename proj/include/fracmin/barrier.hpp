#pragma once

// The explicit barrier Phi, checks of its defining properties, the convex
// envelope used for the measure estimate, dyadic ring detachment and the
// improvement schedule arithmetic.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "curvature.hpp"
#include "geometry.hpp"

namespace fracmin {

/// Parameters of the radial barrier. At scale R = 1 the tail is
///   Phi(rho) = eps (c0^q mu_q / c1^q - 4 - c0^q mu_q / rho^q),  rho > c0,
/// and at scale R the barrier is R Phi(x'/R).
struct BarrierSpec {
    int n = 2;
    double R = 1.0;
    double eps = 0.01;
    double q = 2.0;
    double mu_q = 0.0;
    double c0 = 0.25, c1 = 0.0, c2 = 0.0, c3 = 1.0, c4 = 2.0, c5 = 0.0;

    /// c1 = c2 = 3 sqrt(n)/2, c5 = 100 sqrt(n), mu_q the smallest amplitude
    /// allowed by the footnote condition.
    static BarrierSpec standard(int n, double eps = 0.01, double R = 1.0, double q = 2.0) {
        BarrierSpec b;
        b.n = n;
        b.eps = eps;
        b.R = R;
        b.q = q;
        b.c1 = b.c2 = 1.5 * std::sqrt(double(n));
        b.c5 = 100.0 * std::sqrt(double(n));
        b.mu_q = b.footnote_minimal_mu();
        return b;
    }

    /// c0^q mu_q (c1^{-q} - (c1+c2)^{-q}); must be at least 6.
    double footnote_factor() const {
        return std::pow(c0, q) * mu_q * (std::pow(c1, -q) - std::pow(c1 + c2, -q));
    }
    double footnote_minimal_mu() const {
        return 6.0 / (std::pow(c0, q) * (std::pow(c1, -q) - std::pow(c1 + c2, -q)));
    }
    double outer_radius() const { return (c1 + c2 + c5) * R; }

    /// Structural checks; the footnote bound is optional so that the
    /// property check can report on deliberately weak amplitudes.
    void validate(bool footnote = true) const {
        if (n < 2 || n > 3) throw Error("barrier: dimension must be 2 or 3");
        if (!(R > 0) || !(eps > 0)) throw Error("barrier: R and eps must be positive");
        if (!(0 < c0 && c0 < c1)) throw Error("barrier: need 0 < c0 < c1");
        if (!(c2 > 0) || !(c3 > 0) || !(c4 > 0) || !(c5 >= 0)) throw Error("barrier: constants must be positive");
        if (!(q > n - 3) || !(q > 0)) throw Error("barrier: need q > n - 3 and q > 0");
        if (!(mu_q > 0)) throw Error("barrier: mu_q must be positive");
        if (footnote && footnote_factor() < 6.0 * (1 - 1e-12))
            throw Error("barrier: mu_q violates c0^q mu_q (c1^-q - (c1+c2)^-q) >= 6");
    }
};

/// Radial profile of the unit-scale barrier and its first two derivatives.
/// Inside rho <= c0 it is a cubic in t = (rho/c0)^2 with P'(0) = 0 matching
/// value, slope and second derivative of the tail at t = 1:
///   P(t) = a0 + a2 t^2 + a3 t^3,  k = q/2,
///   a3 = -eps mu k (k+2)/3,  a2 = eps mu k (k+3)/2,  a0 = T(1) - a2 - a3,
/// where T(t) = eps (A - mu t^{-k}) is the tail in the variable t.
/// P'(t) = eps mu k t ((k+3) - (k+2) t) > 0 on (0,1], so the profile is
/// increasing, with a flat minimum at the origin.
struct RadialProfile {
    double phi = 0, d1 = 0, d2 = 0;
};

inline RadialProfile barrier_profile_unit(const BarrierSpec& b, double rho) {
    const double k = 0.5 * b.q;
    const double e = b.eps, mu = b.mu_q;
    const double A = std::pow(b.c0, b.q) * mu / std::pow(b.c1, b.q) - 4.0;
    const double B = std::pow(b.c0, b.q) * mu;
    RadialProfile p;
    if (rho > b.c0) {
        p.phi = e * (A - B * std::pow(rho, -b.q));
        p.d1 = e * b.q * B * std::pow(rho, -b.q - 1);
        p.d2 = -e * b.q * (b.q + 1) * B * std::pow(rho, -b.q - 2);
        return p;
    }
    const double a3 = -e * mu * k * (k + 2) / 3.0;
    const double a2 = e * mu * k * (k + 3) / 2.0;
    const double a0 = e * (A - mu) - a2 - a3;
    const double t = rho * rho / (b.c0 * b.c0);
    const double P1 = 2 * a2 * t + 3 * a3 * t * t;  // dP/dt
    const double P2 = 2 * a2 + 6 * a3 * t;          // d2P/dt2
    const double dt = 2 * rho / (b.c0 * b.c0);
    p.phi = a0 + a2 * t * t + a3 * t * t * t;
    p.d1 = P1 * dt;
    p.d2 = P2 * dt * dt + P1 * 2 / (b.c0 * b.c0);
    return p;
}

/// R Phi(rho / R) with derivatives in rho.
inline RadialProfile barrier_profile(const BarrierSpec& b, double rho) {
    auto p = barrier_profile_unit(b, rho / b.R);
    p.phi *= b.R;
    p.d2 /= b.R;
    return p;
}

inline double barrier_value(const BarrierSpec& b, const Point& xp) {
    double r2 = 0;
    for (int a = 0; a < b.n - 1; ++a) r2 += xp[a] * xp[a];
    return barrier_profile(b, std::sqrt(r2)).phi;
}

/// Phi sampled on a base grid covering |x'| <= extent (default: 5% past the
/// outer radius of the annulus) with `cells` cells per axis.
inline GraphFunction build_barrier(const BarrierSpec& b, double extent = 0.0, long cells = 0) {
    b.validate();
    if (extent <= 0) extent = 1.05 * b.outer_radius();
    if (cells <= 0) cells = b.n == 2 ? 4096 : 512;
    const Grid base = Grid::cube(b.n - 1, -extent, extent, cells);
    return GraphFunction::sample(base, [&](const Point& x) { return barrier_value(b, x); });
}

struct BarrierPropertyReport {
    double grid_h = 0, grid_extent = 0;
    double sup_grad = 0;       // sup |grad Phi|
    double R_sup_hess = 0;     // R sup |D^2 Phi| (spectral norm)
    double sup_abs = 0;        // sup |Phi|
    double C_report = 0;       // (sup|grad| + R sup|D^2|) / eps
    double C_sup = 0;          // sup|Phi| / (eps R)
    double min_outside = 0;    // min Phi over (c1+c2)R <= |x'| <= outer radius
    double max_inside = 0;     // max Phi over |x'| <= c1 R
    bool outside_ok = false;   // Phi >= 2 eps R for |x'| >= (c1+c2)R
    bool outside_weak_ok = false;  // Phi > eps R there
    bool inside_ok = false;    // Phi <= -4 eps R for |x'| <= c1 R
    bool bounds_ok = false;    // derivative sups finite
    bool monotone = false;     // radially nondecreasing along the sampled ray
    bool footnote_ok = false;
    bool pass = false;
};

/// Finite differences (step h) of Phi at the nodes of a declared grid:
/// n = 2 uses the line |x'| <= 1.05 (c1+c2+c5)R at spacing R/64, n = 3 the
/// square of half-width 1.05 (c1+c2)R at spacing R/32 (derivative sups are
/// attained near the core). The level conditions and monotonicity are
/// checked along a ray out to the outer radius at spacing R/64.
inline BarrierPropertyReport barrier_property_check(const BarrierSpec& b) {
    b.validate(false);
    BarrierPropertyReport rep;
    const int m = b.n - 1;
    const double h = b.R / (m == 1 ? 64.0 : 32.0);
    const double ext = 1.05 * (m == 1 ? b.outer_radius() : (b.c1 + b.c2) * b.R);
    const long cells = 2 * static_cast<long>(std::ceil(ext / h));
    const Grid g(m, {cells, cells, 1}, Point{-0.5 * cells * h, -0.5 * cells * h, 0}, h);
    rep.grid_h = h;
    rep.grid_extent = 0.5 * cells * h;
    auto f = [&](const Point& x) { return barrier_value(b, x); };
    struct Local {
        double grad = 0, hess = 0, abs = 0;
    };
    const auto loc = parallel_map<Local>(g.size(), [&](std::size_t k) {
        const Point x = g.center(k);
        Local l;
        const double f0 = f(x);
        l.abs = std::abs(f0);
        std::array<double, 2> D{0, 0};
        std::array<std::array<double, 2>, 2> H{};
        for (int a = 0; a < m; ++a) {
            Point xp = x, xm = x;
            xp[a] += h;
            xm[a] -= h;
            const double fp = f(xp), fm = f(xm);
            D[a] = (fp - fm) / (2 * h);
            H[a][a] = (fp - 2 * f0 + fm) / (h * h);
        }
        if (m == 2) {
            auto at = [&](double dx, double dy) { return f(Point{x[0] + dx, x[1] + dy, 0}); };
            H[0][1] = H[1][0] = (at(h, h) - at(h, -h) - at(-h, h) + at(-h, -h)) / (4 * h * h);
        }
        l.grad = std::sqrt(D[0] * D[0] + D[1] * D[1]);
        if (m == 1) {
            l.hess = std::abs(H[0][0]);
        } else {
            const double tr = 0.5 * (H[0][0] + H[1][1]);
            const double dd = std::sqrt(0.25 * (H[0][0] - H[1][1]) * (H[0][0] - H[1][1]) + H[0][1] * H[0][1]);
            l.hess = std::max(std::abs(tr + dd), std::abs(tr - dd));
        }
        return l;
    });
    for (const auto& l : loc) {
        rep.sup_grad = std::max(rep.sup_grad, l.grad);
        rep.R_sup_hess = std::max(rep.R_sup_hess, b.R * l.hess);
        rep.sup_abs = std::max(rep.sup_abs, l.abs);
    }

    const double step = b.R / 64.0;
    const double in_r = b.c1 * b.R, out_r = (b.c1 + b.c2) * b.R;
    rep.min_outside = std::numeric_limits<double>::infinity();
    rep.max_inside = -rep.min_outside;
    rep.monotone = true;
    double prev = -std::numeric_limits<double>::infinity();
    auto visit = [&](double rho) {
        const double v = barrier_profile(b, rho).phi;
        rep.sup_abs = std::max(rep.sup_abs, std::abs(v));
        if (v < prev) rep.monotone = false;
        prev = v;
        if (rho <= in_r) rep.max_inside = std::max(rep.max_inside, v);
        if (rho >= out_r) rep.min_outside = std::min(rep.min_outside, v);
    };
    // the two thresholds are visited exactly
    std::vector<double> radii;
    for (double rho = 0; rho <= b.outer_radius(); rho += step) radii.push_back(rho);
    radii.push_back(in_r);
    radii.push_back(out_r);
    radii.push_back(b.outer_radius());
    std::sort(radii.begin(), radii.end());
    for (double rho : radii) visit(rho);

    rep.C_report = (rep.sup_grad + rep.R_sup_hess) / b.eps;
    rep.C_sup = rep.sup_abs / (b.eps * b.R);
    // the footnote level 2 eps R, which is tight for the minimal amplitude;
    // the statement itself only needs eps R
    rep.outside_ok = rep.min_outside >= 2 * b.eps * b.R * (1 - 1e-12);
    rep.outside_weak_ok = rep.min_outside > b.eps * b.R;
    rep.inside_ok = rep.max_inside <= -4 * b.eps * b.R * (1 - 1e-12);
    rep.bounds_ok = std::isfinite(rep.C_report);
    rep.footnote_ok = b.footnote_factor() >= 6.0 * (1 - 1e-12);
    rep.pass = rep.outside_ok && rep.inside_ok && rep.bounds_ok && rep.monotone;
    return rep;
}

/// Affine L(x') = offset + slope . x'.
struct Affine {
    Point slope{0, 0, 0};
    double offset = 0;
    double operator()(const Point& x) const { return offset + slope[0] * x[0] + slope[1] * x[1]; }
};

struct BarrierSample {
    Point x{0, 0, 0};          // boundary point (x', L - Phi)
    double radius = 0;         // |x'|
    double value = 0;          // (1-s) * curvature integral over B_{c3 R}(x)
    double classical = 0;      // mean curvature of the graph of L - Phi
    double classical_bound = 0;
    bool pass = false;
    bool classical_pass = false;
};

struct BarrierCurvatureReport {
    double s = 0, threshold = 0;  // threshold = c4 eps / R^s
    double inner = 0, outer = 0;
    std::vector<BarrierSample> samples;
    std::size_t passed = 0;
    bool pass = false;
    double min_value() const {
        double v = std::numeric_limits<double>::infinity();
        for (const auto& p : samples) v = std::min(v, p.value);
        return v;
    }
};

/// Mean curvature of the graph of L - Phi at x' from the radial derivatives.
inline double barrier_graph_curvature(const BarrierSpec& b, const Affine& L, const Point& xp) {
    const int m = b.n - 1;
    double rho = 0;
    for (int a = 0; a < m; ++a) rho += xp[a] * xp[a];
    rho = std::sqrt(rho);
    const auto p = barrier_profile(b, rho);
    std::array<double, 2> e{1, 0};
    if (rho > 0)
        for (int a = 0; a < m; ++a) e[a] = xp[a] / rho;
    std::array<double, 2> D{};
    std::array<std::array<double, 2>, 2> H{};
    // tangential eigenvalue Phi'/rho tends to Phi''(0) at the origin
    const double tang = rho > 0 ? p.d1 / rho : p.d2;
    for (int a = 0; a < m; ++a) {
        D[a] = L.slope[a] - p.d1 * e[a];
        for (int c = 0; c < m; ++c)
            H[a][c] = -(p.d2 * e[a] * e[c] + tang * ((a == c ? 1.0 : 0.0) - e[a] * e[c]));
    }
    double lap = 0, g2 = 0, hdd = 0;
    for (int a = 0; a < m; ++a) {
        lap += H[a][a];
        g2 += D[a] * D[a];
        for (int c = 0; c < m; ++c) hdd += H[a][c] * D[a] * D[c];
    }
    return (lap * (1 + g2) - hdd) / std::pow(1 + g2, 1.5);
}

/// (1-s) times the curvature integral of F = {x_n < L - Phi} over
/// B_{c3 R}(x) at `count` boundary points with c0 R < |x'| <= outer radius
/// (geometrically spaced radii, directions turning by the golden angle when
/// n = 3, alternating sides when n = 2). Each must reach c4 eps / R^s.
/// The classical curvature is compared with
///   eps q (q+3-n) mu_q c0^q (|x'|/R)^{-q-2} / (4R).
inline BarrierCurvatureReport barrier_curvature_check(const BarrierSpec& b, const Affine& L, double s,
                                                      std::size_t count = 32, double inner = 0.0,
                                                      double outer = 0.0) {
    b.validate();
    double gl = 0;
    for (int a = 0; a < b.n - 1; ++a) gl += L.slope[a] * L.slope[a];
    if (std::sqrt(gl) > 0.05) throw Error("barrier curvature: regime requires |grad L| <= 0.05");
    if (!(s < 1) || 1 - s > 0.1) throw Error("barrier curvature: regime requires 1 - s <= 0.1");
    if (b.eps > 0.02) throw Error("barrier curvature: regime requires eps <= 0.02");
    if (count < 2) throw Error("barrier curvature: need at least two samples");
    if (inner <= 0) inner = b.c0 * b.R;
    if (outer <= 0) outer = b.outer_radius();
    if (!(inner < outer)) throw Error("barrier curvature: empty annulus");

    BarrierCurvatureReport rep;
    rep.s = s;
    rep.threshold = b.c4 * b.eps / std::pow(b.R, s);
    rep.inner = inner;
    rep.outer = outer;
    const double golden = std::numbers::pi * (3.0 - std::sqrt(5.0));
    auto g = [&](const Point& y) { return L(y) - barrier_value(b, y); };
    rep.samples = parallel_map<BarrierSample>(count, [&](std::size_t k) {
        // radii inner * (outer/inner)^((k+1)/count): the open inner end is skipped
        const double rho = inner * std::pow(outer / inner, double(k + 1) / double(count));
        Point xp{0, 0, 0};
        if (b.n == 2) {
            xp[0] = k % 2 == 0 ? rho : -rho;
        } else {
            xp[0] = rho * std::cos(golden * double(k));
            xp[1] = rho * std::sin(golden * double(k));
        }
        BarrierSample p;
        p.radius = rho;
        const auto c = graph_frac_curvature(g, b.n, xp, b.c3 * b.R, s);
        p.x = c.x0;
        p.value = (1 - s) * c.raw_integral;
        p.pass = p.value >= rep.threshold;
        p.classical = barrier_graph_curvature(b, L, xp);
        p.classical_bound = b.eps * b.q * (b.q + 3 - b.n) * b.mu_q * std::pow(b.c0, b.q) *
                            std::pow(rho / b.R, -b.q - 2) / (4 * b.R);
        p.classical_pass = p.classical >= p.classical_bound;
        return p;
    });
    for (const auto& p : rep.samples) rep.passed += p.pass ? 1 : 0;
    rep.pass = rep.passed == rep.samples.size();
    return rep;
}

struct EnvelopeDiagnostic {
    GraphFunction gamma_values;             // Gamma on the base grid, 0 outside the ball
    std::vector<std::size_t> touching_set;  // base cells with Gamma >= v - tol_touch
    double m0 = 0;                          // -min of v over Q_{3R}
    double grad_image_measure = 0;          // |grad Gamma(T)|
    double contact_fraction = 0;            // |T| / cells in the ball
    double domain_radius = 0, R = 0, tol_touch = 0;  // largest per-cell tolerance used
    double convexity_defect = 0;            // most negative second difference inside the ball
    std::size_t ball_cells = 0;

    /// C in |grad Gamma(T)| >= (m0 / (6 sqrt(n) R))^{n-1} / C, as measured.
    double slope_constant() const {
        const int m = gamma_values.base.n;
        const double lhs = std::pow(m0 / (6 * std::sqrt(double(m + 1)) * R), m);
        return grad_image_measure > 0 ? lhs / grad_image_measure : std::numeric_limits<double>::infinity();
    }
};

/// The constant guaranteed by the supporting-plane argument: every slope of
/// length below m0 / (2 rho_d) supports v^- at a touching point, so with
/// rho_d = 6 sqrt(n) R the measure is at least |B_1^{n-1}| 2^{1-n} times
/// the left side.
inline double slope_constant_bound(int n) { return std::pow(2.0, n - 1) / unit_ball_volume(n - 1); }

namespace detail {

struct Polygon {
    std::vector<std::array<double, 2>> pts;
    double area() const {
        double a = 0;
        for (std::size_t i = 0; i < pts.size(); ++i) {
            const auto& p = pts[i];
            const auto& q = pts[(i + 1) % pts.size()];
            a += p[0] * q[1] - p[1] * q[0];
        }
        return 0.5 * std::abs(a);
    }
};

/// Keeps {p : a . p <= c} (Sutherland-Hodgman against one half-plane,
/// without tolerance so that the polygon stays convex).
inline void clip(Polygon& poly, double a0, double a1, double c) {
    if (poly.pts.empty()) return;
    std::vector<std::array<double, 2>> out;
    out.reserve(poly.pts.size() + 1);
    const std::size_t k = poly.pts.size();
    for (std::size_t i = 0; i < k; ++i) {
        const auto& p = poly.pts[i];
        const auto& q = poly.pts[(i + 1) % k];
        const double fp = a0 * p[0] + a1 * p[1] - c, fq = a0 * q[0] + a1 * q[1] - c;
        if (fp <= 0) out.push_back(p);
        if ((fp < 0 && fq > 0) || (fp > 0 && fq < 0)) {
            const double t = fp / (fp - fq);
            out.push_back({p[0] + t * (q[0] - p[0]), p[1] + t * (q[1] - p[1])});
        }
    }
    poly.pts = std::move(out);
}

}  // namespace detail

/// Lower convex envelope of v^- = min(v, 0) on the ball |x'| < rho_d, with
/// value 0 outside. The envelope is the lower hull of the points
/// (x_i, v^-_i) at cell centres in the ball together with points (y, 0) on
/// the sphere |y| = rho_d (the two endpoints in one dimension, a ring at
/// spacing h/4 in two). The subdifferential of the hull at x_i is
///   {p : p . (x_j - x_i) <= w_j - w_i for all j},
/// an interval or a polygon found by clipping; it is nonempty exactly at
/// hull vertices and its measure is the facet-normal image of that vertex.
/// Gamma at a cell is the largest supporting plane among the corners of all
/// these cells.
inline EnvelopeDiagnostic convex_envelope(const GraphFunction& v, double rho_d, double R) {
    const Grid& g = v.base;
    const int m = g.n;
    if (m < 1 || m > 2) throw Error("convex envelope: base dimension must be 1 or 2");
    if (!(rho_d > 0) || !(R > 0)) throw Error("convex envelope: radii must be positive");
    for (int a = 0; a < m; ++a)
        if (g.origin[a] > -rho_d + 1e-12 || g.origin[a] + g.dims[a] * g.h < rho_d - 1e-12)
            throw Error("convex envelope: ball not inside the base grid");

    EnvelopeDiagnostic out;
    out.domain_radius = rho_d;
    out.R = R;
    std::vector<std::size_t> cells;
    std::vector<std::array<double, 2>> X;
    std::vector<double> W;
    for (std::size_t k = 0; k < g.size(); ++k) {
        const Point c = g.center(k);
        double r2 = 0;
        for (int a = 0; a < m; ++a) r2 += c[a] * c[a];
        if (r2 >= rho_d * rho_d) continue;
        cells.push_back(k);
        X.push_back({c[0], m == 2 ? c[1] : 0.0});
        W.push_back(std::min(v.values[k], 0.0));
    }
    const std::size_t N = cells.size();
    if (N == 0) throw Error("convex envelope: no cells inside the ball");
    out.ball_cells = N;
    if (m == 1) {
        X.push_back({-rho_d, 0});
        X.push_back({rho_d, 0});
        W.push_back(0);
        W.push_back(0);
    } else {
        const auto K = static_cast<std::size_t>(std::max(64.0, std::ceil(8 * std::numbers::pi * rho_d / g.h)));
        for (std::size_t k = 0; k < K; ++k) {
            const double th = 2 * std::numbers::pi * double(k) / double(K);
            X.push_back({rho_d * std::cos(th), rho_d * std::sin(th)});
            W.push_back(0);
        }
    }
    double wmax = 0;
    for (double w : W) wmax = std::max(wmax, std::abs(w));
    const double big = 1e3 * (wmax + 1.0) / g.h;

    std::vector<long> slot(g.size(), -1);
    for (std::size_t i = 0; i < N; ++i) slot[cells[i]] = static_cast<long>(i);
    const std::vector<Index> nb{{1, 0, 0}, {0, 1, 0}, {1, 1, 0}, {1, -1, 0}};

    struct Cell {
        double measure = 0;
        std::vector<std::array<double, 2>> corners;
    };
    const auto dual = parallel_map<Cell>(N, [&](std::size_t i) {
        Cell c;
        if (m == 1) {
            double lo = -big, hi = big;
            for (std::size_t j = 0; j < X.size(); ++j) {
                if (j == i) continue;
                const double dx = X[j][0] - X[i][0], dw = W[j] - W[i];
                if (dx > 0) hi = std::min(hi, dw / dx);
                else if (dx < 0) lo = std::max(lo, dw / dx);
            }
            if (lo <= hi + 1e-12 * (1 + std::abs(hi))) {
                c.measure = std::max(0.0, hi - lo);
                c.corners = {{lo, 0}, {hi, 0}};
            }
            return c;
        }
        // a cell lying on or above the chord between two opposite neighbours
        // is not a strict hull vertex; its subdifferential has no area
        const Index gi = g.unflat(cells[i]);
        for (const auto& d : nb) {
            const Index a = gi + d, b{gi[0] - d[0], gi[1] - d[1], 0};
            if (!g.in_range(a) || !g.in_range(b) || slot[g.flat(a)] < 0 || slot[g.flat(b)] < 0) continue;
            if (W[i] >= 0.5 * (W[slot[g.flat(a)]] + W[slot[g.flat(b)]])) return c;
        }
        detail::Polygon poly{{{-big, -big}, {big, -big}, {big, big}, {-big, big}}};
        // neighbours first: the polygon shrinks fast and usually empties early
        for (const auto& d : nb) {
            for (const Index& j : {gi + d, Index{gi[0] - d[0], gi[1] - d[1], 0}}) {
                if (!g.in_range(j) || slot[g.flat(j)] < 0) continue;
                const auto jj = static_cast<std::size_t>(slot[g.flat(j)]);
                detail::clip(poly, X[jj][0] - X[i][0], X[jj][1] - X[i][1], W[jj] - W[i]);
            }
        }
        for (std::size_t j = X.size(); j-- > 0 && !poly.pts.empty();) {
            if (j == i) continue;
            detail::clip(poly, X[j][0] - X[i][0], X[j][1] - X[i][1], W[j] - W[i]);
        }
        if (!poly.pts.empty()) {
            c.measure = poly.area();
            c.corners = poly.pts;
        }
        return c;
    });

    // supporting planes w_i + P . (x - x_i) at every corner of every cell
    struct Plane {
        double p0, p1, b;
    };
    std::vector<Plane> planes;
    for (std::size_t i = 0; i < N; ++i)
        for (const auto& P : dual[i].corners)
            planes.push_back({P[0], P[1], W[i] - P[0] * X[i][0] - P[1] * X[i][1]});
    const auto gam = parallel_map<double>(N, [&](std::size_t i) {
        double best = planes.empty() ? 0.0 : -std::numeric_limits<double>::infinity();
        for (const auto& pl : planes) best = std::max(best, pl.p0 * X[i][0] + pl.p1 * X[i][1] + pl.b);
        return std::min(best, W[i]);
    });

    std::vector<double> G(g.size(), 0.0);
    for (std::size_t i = 0; i < N; ++i) G[cells[i]] = gam[i];
    out.gamma_values = GraphFunction(g, G);

    // h |grad v| measured at the cell itself: one steep region must not
    // loosen the test everywhere else
    CompensatedSum meas;
    for (std::size_t i = 0; i < N; ++i) {
        const Index gi = g.unflat(cells[i]);
        double slope_h = 0;
        for (int a = 0; a < m; ++a)
            for (int sgn : {-1, 1}) {
                Index j = gi;
                j[a] += sgn;
                if (g.in_range(j)) slope_h = std::max(slope_h, std::abs(v.at(j) - v.values[cells[i]]));
            }
        const double tol = 1e-9 + slope_h;
        out.tol_touch = std::max(out.tol_touch, tol);
        if (gam[i] >= v.values[cells[i]] - tol) {
            out.touching_set.push_back(cells[i]);
            meas += dual[i].measure;
        }
    }
    out.grad_image_measure = meas.value();
    out.contact_fraction = double(out.touching_set.size()) / double(N);

    double vmin = std::numeric_limits<double>::infinity();
    for (std::size_t k = 0; k < g.size(); ++k) {
        const Point c = g.center(k);
        bool in = true;
        for (int a = 0; a < m; ++a) in = in && std::abs(c[a]) <= 1.5 * R;
        if (in) vmin = std::min(vmin, v.values[k]);
    }
    if (!std::isfinite(vmin)) throw Error("convex envelope: Q_{3R} contains no cell centre");
    out.m0 = -vmin;

    // second differences along the axes and diagonals, all three cells in the ball
    std::vector<std::uint8_t> inball(g.size(), 0);
    for (auto k : cells) inball[k] = 1;
    std::vector<Index> dirs = m == 1 ? std::vector<Index>{{1, 0, 0}}
                                     : std::vector<Index>{{1, 0, 0}, {0, 1, 0}, {1, 1, 0}, {1, -1, 0}};
    for (auto k : cells) {
        const Index i = g.unflat(k);
        for (const auto& d : dirs) {
            const Index a = i + d, b{i[0] - d[0], i[1] - d[1], i[2] - d[2]};
            if (!g.in_range(a) || !g.in_range(b) || !inball[g.flat(a)] || !inball[g.flat(b)]) continue;
            out.convexity_defect = std::min(out.convexity_defect, G[g.flat(a)] - 2 * G[k] + G[g.flat(b)]);
        }
    }
    return out;
}

namespace detail {

inline double base_radius(const Point& x, int m) {
    double r2 = 0;
    for (int a = 0; a < m; ++a) r2 += x[a] * x[a];
    return std::sqrt(r2);
}

inline bool in_cube(const Point& x, int m, double side) {
    for (int a = 0; a < m; ++a)
        if (std::abs(x[a]) > 0.5 * side + 1e-12) return false;
    return true;
}

/// Half-width of the base grid about the origin along its narrowest axis.
inline double base_reach(const Grid& g, const Point& c = {0, 0, 0}) {
    double r = std::numeric_limits<double>::infinity();
    for (int a = 0; a < g.n; ++a) {
        const double lo = g.origin[a] + 0.5 * g.h, hi = g.origin[a] + (double(g.dims[a]) - 0.5) * g.h;
        r = std::min({r, c[a] - lo, hi - c[a]});
    }
    return r;
}

}  // namespace detail

/// Constants of the measure estimate. M and mu are calibration outputs (see
/// the tests), not values fixed by the lemma.
struct MeasureEstimateConfig {
    double kappa = 0, R = 1, eps = 0.02, s = 0.95;
    double Cbar = 1;
    double M = 4, mu = 0.25;
    std::size_t curvature_samples = 16;
};

struct MeasureEstimateReport {
    double lipschitz = 0;         // on |x'| <= 3R
    double inf_Q3R = 0;           // inf of u - kappa over Q_{3R}
    double max_curvature = 0;     // largest (1-s) curvature integral over B_R(x) sampled
    std::size_t curvature_points = 0;
    double fraction = 0;          // |{u - kappa <= M eps R} cap Q_R| / R^{n-1}
    double mu = 0, M = 0;
    bool trap_holds = false;      // touching set of v = u - kappa + Phi inside Q_R
    std::size_t touching = 0, touching_outside = 0;
    double m0 = 0, grad_image_measure = 0;
    bool pass = false;
};

/// Gate on the hypotheses of the measure estimate, then measure the sublevel
/// fraction in Q_R. The curvature smallness is sampled at boundary points
/// (x', u(x')) inside B_{4n} whose ball B_R(x) stays over the base grid.
/// Each failed hypothesis raises a HypothesisError naming its display.
inline MeasureEstimateReport measure_estimate_check(const GraphFunction& u, const MeasureEstimateConfig& cfg) {
    const Grid& g = u.base;
    const int m = g.n, n = m + 1;
    if (!(cfg.R > 0) || !(cfg.eps > 0) || !(cfg.s > 0 && cfg.s < 1) || !(cfg.M > 1) || !(cfg.mu > 0 && cfg.mu < 1))
        throw Error("measure estimate: invalid configuration");
    const double R = cfg.R;
    const double rho_d = 6 * std::sqrt(double(n)) * R;
    if (detail::base_reach(g) < rho_d) throw Error("measure estimate: base grid must cover |x'| <= 6 sqrt(n) R");

    MeasureEstimateReport rep;
    rep.mu = cfg.mu;
    rep.M = cfg.M;
    rep.lipschitz = lipschitz_estimate(u, Region{Ball{{0, 0, 0}, 3 * R}});
    if (rep.lipschitz > cfg.Cbar * (1 + 1e-12))
        throw HypothesisError("AL", "hypothesis (AL) fails: |grad u| = " + std::to_string(rep.lipschitz) +
                                        " exceeds Cbar on |x'| <= 3R");
    rep.inf_Q3R = std::numeric_limits<double>::infinity();
    for (std::size_t k = 0; k < g.size(); ++k) {
        const Point c = g.center(k);
        if (detail::base_radius(c, m) >= R && u.values[k] < cfg.kappa - 1e-12)
            throw HypothesisError("USE", "hypothesis (USE) fails: u < kappa at |x'| >= R");
        if (detail::in_cube(c, m, 3 * R)) rep.inf_Q3R = std::min(rep.inf_Q3R, u.values[k] - cfg.kappa);
    }
    if (rep.inf_Q3R > cfg.eps * R)
        throw HypothesisError("901212-bis", "hypothesis (901212-bis) fails: inf over Q_3R of u exceeds kappa + eps R");

    // curvature smallness on a lattice of base points
    const double reach = std::min(4.0 * n, detail::base_reach(g) - R - 2 * g.h);
    if (reach > 0) {
        const auto per_axis = static_cast<long>(m == 1 ? cfg.curvature_samples
                                                       : std::max<std::size_t>(2, std::size_t(std::sqrt(double(cfg.curvature_samples)))));
        std::vector<Point> pts;
        for (long i = 0; i < per_axis; ++i)
            for (long j = 0; j < (m == 1 ? 1 : per_axis); ++j) {
                Point x{0, 0, 0};
                x[0] = -reach + 2 * reach * (double(i) + 0.5) / double(per_axis);
                if (m == 2) x[1] = -reach + 2 * reach * (double(j) + 0.5) / double(per_axis);
                double h2 = detail::base_radius(x, m);
                const double un = u(x);
                if (h2 * h2 + un * un <= 16.0 * n * n) pts.push_back(x);
            }
        const auto vals = parallel_map<double>(pts.size(), [&](std::size_t k) {
            return (1 - cfg.s) *
                   graph_frac_curvature([&](const Point& y) { return u(y); }, n, pts[k], R, cfg.s).raw_integral;
        });
        rep.curvature_points = vals.size();
        rep.max_curvature = vals.empty() ? 0.0 : *std::max_element(vals.begin(), vals.end());
        if (rep.max_curvature > cfg.eps / std::pow(R, cfg.s))
            throw HypothesisError("sd77ef12345d", "hypothesis (sd77ef12345d) fails: curvature integral " +
                                                       std::to_string(rep.max_curvature) + " exceeds eps / R^s");
    }

    std::size_t low = 0;
    for (std::size_t k = 0; k < g.size(); ++k) {
        if (!detail::in_cube(g.center(k), m, R)) continue;
        if (u.values[k] - cfg.kappa <= cfg.M * cfg.eps * R) ++low;
    }
    rep.fraction = double(low) * std::pow(g.h, m) / std::pow(R, m);

    const auto bar = BarrierSpec::standard(n, cfg.eps, R);
    std::vector<double> vv(g.size());
    for (std::size_t k = 0; k < g.size(); ++k) vv[k] = u.values[k] - cfg.kappa + barrier_value(bar, g.center(k));
    const GraphFunction v(g, std::move(vv));
    const auto env = convex_envelope(v, rho_d, R);
    rep.m0 = env.m0;
    rep.grad_image_measure = env.grad_image_measure;
    rep.touching = env.touching_set.size();
    for (auto k : env.touching_set)
        if (!detail::in_cube(g.center(k), m, R)) ++rep.touching_outside;
    rep.trap_holds = rep.touching_outside == 0;
    rep.pass = rep.fraction >= cfg.mu;
    return rep;
}

struct RingConfig {
    double eps = 0.01, R = 1, s = 0.9, Cbar = 1, M = 50;
    double C_o = 0;       // 0: the smallest value for which selection is guaranteed
    double C_star = 1;    // PASS iff excess_fraction <= C_star / M
    int m_max = 12;
    int radial = 256, angular = 512;  // quadrature of the ring measure
};

struct RingDiagnostic {
    int m_star = 0;
    std::vector<double> r_m;
    std::vector<double> b_values;
    std::vector<double> thresholds;   // C_o eps r_m^{1-s} / R
    std::pair<double, double> ring{0, 0};
    double excess_fraction = 0;
    double M = 0, C_o = 0, C_star = 0;
    double C_report = 0;              // excess_fraction * M
    double curvature = 0;             // (1-s) times the curvature integral over B_R(xbar)
    bool pass = false;
};

/// C_o = (1 - lambda^{-(1-s)}) / (1-s) with lambda = (2 + Cbar) n: if every
/// b_m exceeded C_o eps r_m^{1-s} / R the rings would sum past eps / ((1-s) R^s).
inline double ring_selection_constant(int n, double s, double Cbar) {
    const double lambda = (2 + Cbar) * n;
    return (1 - std::pow(lambda, -(1 - s))) / (1 - s);
}

/// Dyadic ring detachment at xbar' for the subgraph of u touched from below
/// by P. b_m is the curvature integral over the shell r_{m+1} < |y - xbar|
/// < r_m; the first m with b_m <= C_o eps r_m^{1-s} / R is selected and the
/// ring S = (r_{m+1}, r_m / (Cbar sqrt n)) is measured.
inline RingDiagnostic ring_detachment(const GraphFunction& u, const Point& xbar, const GraphFunction& P,
                                      const RingConfig& cfg) {
    const Grid& g = u.base;
    const int m = g.n, n = m + 1;
    if (!P.base.same_as(g)) throw Error("ring: P must share the base grid of u");
    if (!(cfg.eps > 0) || !(cfg.R > 0) || !(cfg.s > 0 && cfg.s < 1) || !(cfg.Cbar >= 1) || !(cfg.M > 0) ||
        cfg.m_max < 0)
        throw Error("ring: invalid configuration");
    const double R = cfg.R;
    if (detail::base_reach(g, xbar) < R + 2 * g.h) throw Error("ring: base grid must cover |x' - xbar'| <= R");
    const Region ball = Ball{xbar, R};

    const double lip = lipschitz_estimate(u, ball);
    if (lip > cfg.Cbar * (1 + 1e-12))
        throw HypothesisError("gradient", "hypothesis (gradient) fails: |grad u| exceeds Cbar");
    const double ubar = u(xbar);
    if (std::abs(P(xbar) - ubar) > 1e-9 * (1 + std::abs(ubar)))
        throw HypothesisError("above gamma", "hypothesis (above gamma) fails: P(xbar') != u(xbar')");
    double c11 = 0;
    for (std::size_t k = 0; k < g.size(); ++k) {
        const Point c = g.center(k);
        if (!region_contains(ball, c, m)) continue;
        if (P.values[k] > u.values[k] + 1e-9 * (1 + std::abs(u.values[k])))
            throw HypothesisError("above gamma", "hypothesis (above gamma) fails: P exceeds u");
        const Index i = g.unflat(k);
        double grad2 = 0, hess = 0;
        bool interior = true;
        for (int a = 0; a < m && interior; ++a) {
            Index lo = i, hi = i;
            --lo[a];
            ++hi[a];
            if (!g.in_range(lo) || !g.in_range(hi)) interior = false;
        }
        if (!interior) continue;
        std::array<std::array<double, 2>, 2> H{};
        for (int a = 0; a < m; ++a) {
            Index lo = i, hi = i;
            --lo[a];
            ++hi[a];
            const double d = (P.at(hi) - P.at(lo)) / (2 * g.h);
            grad2 += d * d;
            H[a][a] = (P.at(hi) - 2 * P.values[k] + P.at(lo)) / (g.h * g.h);
        }
        if (m == 2) {
            auto at = [&](long da, long db) {
                Index j{i[0] + da, i[1] + db, 0};
                return g.in_range(j) ? P.at(j) : P.values[k];
            };
            H[0][1] = H[1][0] = (at(1, 1) - at(1, -1) - at(-1, 1) + at(-1, -1)) / (4 * g.h * g.h);
            const double tr = 0.5 * (H[0][0] + H[1][1]);
            const double dd = std::sqrt(0.25 * (H[0][0] - H[1][1]) * (H[0][0] - H[1][1]) + H[0][1] * H[0][1]);
            hess = std::max(std::abs(tr + dd), std::abs(tr - dd));
        } else {
            hess = std::abs(H[0][0]);
        }
        c11 = std::max(c11, std::sqrt(grad2) + R * hess);
    }
    if (c11 > cfg.eps * (1 + 1e-9))
        throw HypothesisError("C1.1", "hypothesis (C1.1) fails: |grad P| + R|D^2 P| exceeds eps");

    auto ug = [&](const Point& y) { return u(y); };
    auto raw = [&](double r) { return graph_frac_curvature(ug, n, xbar, r, cfg.s).raw_integral; };
    RingDiagnostic out;
    out.M = cfg.M;
    out.C_star = cfg.C_star;
    out.C_o = cfg.C_o > 0 ? cfg.C_o : ring_selection_constant(n, cfg.s, cfg.Cbar);
    const double full = raw(R);
    out.curvature = (1 - cfg.s) * full;
    if (out.curvature > cfg.eps / std::pow(R, cfg.s))
        throw HypothesisError("the eq", "hypothesis (the eq) fails: curvature integral exceeds eps / R^s");

    const double lambda = (2 + cfg.Cbar) * n;
    for (int k = 0; k <= cfg.m_max + 1; ++k) out.r_m.push_back(R / std::pow(lambda, k));
    std::vector<double> inner(cfg.m_max + 2);
    inner[0] = full;
    const auto partial = parallel_map<double>(cfg.m_max + 1, [&](std::size_t k) { return raw(out.r_m[k + 1]); });
    for (int k = 0; k <= cfg.m_max; ++k) inner[k + 1] = partial[k];
    out.m_star = -1;
    for (int k = 0; k <= cfg.m_max; ++k) {
        out.b_values.push_back(inner[k] - inner[k + 1]);
        out.thresholds.push_back(out.C_o * cfg.eps * std::pow(out.r_m[k], 1 - cfg.s) / R);
        if (out.m_star < 0 && out.b_values.back() <= out.thresholds.back()) out.m_star = k;
    }
    if (out.m_star < 0) throw Error("selection failed; increase m_max or C_o");

    const double lo = out.r_m[out.m_star + 1];
    const double hi = out.r_m[out.m_star] / (cfg.Cbar * std::sqrt(double(n)));
    out.ring = {lo, hi};
    const double thr = cfg.M * cfg.eps * hi * hi / R;
    Point grad{0, 0, 0};
    const double step = 1e-4 * g.h;
    for (int a = 0; a < m; ++a) {
        Point e{0, 0, 0};
        e[a] = step;
        grad[a] = (P(xbar + e) - P(xbar - e)) / (2 * step);
    }
    auto excess = [&](const Point& y) {
        const Point d = y - xbar;
        return u(y) - ubar - dot(grad, d) > thr;
    };
    // midpoint rule in (rho, theta) with the rho weight; in one dimension two intervals
    CompensatedSum bad, total;
    for (int i = 0; i < cfg.radial; ++i) {
        const double rho = lo + (hi - lo) * (double(i) + 0.5) / double(cfg.radial);
        if (m == 1) {
            for (double sgn : {-1.0, 1.0}) {
                Point y = xbar;
                y[0] += sgn * rho;
                total += 1.0;
                if (excess(y)) bad += 1.0;
            }
            continue;
        }
        for (int j = 0; j < cfg.angular; ++j) {
            const double th = 2 * std::numbers::pi * (double(j) + 0.5) / double(cfg.angular);
            Point y = xbar;
            y[0] += rho * std::cos(th);
            y[1] += rho * std::sin(th);
            total += rho;
            if (excess(y)) bad += rho;
        }
    }
    out.excess_fraction = bad.value() / total.value();
    out.C_report = out.excess_fraction * cfg.M;
    out.pass = out.excess_fraction <= cfg.C_star / cfg.M;
    return out;
}

struct ImprovementSchedule {
    double mu = 0, M = 0;
    int k0 = 0;
    double d = 0;
};

/// k0 = smallest integer with (1 - mu)^k0 <= 1/4 and d = 1 / (2 M^k0).
inline ImprovementSchedule improvement_schedule(double mu, double M) {
    if (!(mu > 0 && mu < 1)) throw Error("schedule: mu must lie in (0,1)");
    if (!(M > 1)) throw Error("schedule: M must exceed 1");
    ImprovementSchedule out{mu, M, 0, 0};
    double p = 1.0;
    while (p > 0.25) {
        p *= 1.0 - mu;
        ++out.k0;
    }
    out.d = 0.5 / std::pow(M, out.k0);
    return out;
}

}  // namespace fracmin
