#pragma once

// Gauss-Legendre rules and adaptive bisection quadrature on intervals.

#include <map>
#include <mutex>
#include <algorithm>
#include <utility>
#include <vector>

#include "fracmin/core.hpp"

namespace fracmin::quad {

struct Rule {
    std::vector<double> x, w;  // on [-1, 1]
};

/// m-point Gauss-Legendre rule (Newton iteration on P_m).
inline Rule gauss_legendre(int m) {
    Rule r;
    r.x.resize(m);
    r.w.resize(m);
    const double pi = std::numbers::pi;
    for (int i = 0; i < (m + 1) / 2; ++i) {
        double z = std::cos(pi * (i + 0.75) / (m + 0.5));
        double dp = 0;
        for (int it = 0; it < 100; ++it) {
            double p0 = 1, p1 = 0;
            for (int j = 1; j <= m; ++j) {
                const double p2 = p1;
                p1 = p0;
                p0 = ((2.0 * j - 1.0) * z * p1 - (j - 1.0) * p2) / j;
            }
            dp = m * (z * p0 - p1) / (z * z - 1.0);
            const double dz = p0 / dp;
            z -= dz;
            if (std::abs(dz) < 1e-16) break;
        }
        r.x[i] = -z;
        r.x[m - 1 - i] = z;
        r.w[i] = r.w[m - 1 - i] = 2.0 / ((1.0 - z * z) * dp * dp);
    }
    return r;
}

/// Cached rule lookup.
inline const Rule& gl(int m) {
    static std::map<int, Rule> cache;
    static std::mutex mu;
    std::lock_guard<std::mutex> lock(mu);
    auto it = cache.find(m);
    if (it == cache.end()) it = cache.emplace(m, gauss_legendre(m)).first;
    return it->second;
}

/// Fixed-order Gauss-Legendre on [a, b].
template <class F>
double fixed(F&& f, double a, double b, int m = 8) {
    const Rule& r = gl(m);
    const double c = 0.5 * (a + b), hw = 0.5 * (b - a);
    double s = 0;
    for (int i = 0; i < m; ++i) s += r.w[i] * f(c + hw * r.x[i]);
    return s * hw;
}

/// Globally adaptive Gauss-Legendre: the panel with the largest error
/// estimate (10-point rule against its two halves) is bisected until the
/// summed estimate drops below tol or `max_panels` is reached.
template <class F>
double adaptive(F&& f, double a, double b, double tol = 1e-12, int max_panels = 4000) {
    if (a == b) return 0.0;
    struct Panel {
        double a, b, value, err;
    };
    auto make = [&](double lo, double hi) {
        const double c = 0.5 * (lo + hi);
        const double whole = fixed(f, lo, hi, 10);
        const double halves = fixed(f, lo, c, 10) + fixed(f, c, hi, 10);
        return Panel{lo, hi, halves, std::abs(halves - whole)};
    };
    auto worse = [](const Panel& x, const Panel& y) { return x.err < y.err; };
    std::vector<Panel> heap{make(a, b)};
    double err = heap[0].err;
    while (err > tol && int(heap.size()) < max_panels) {
        std::pop_heap(heap.begin(), heap.end(), worse);
        const Panel p = heap.back();
        heap.pop_back();
        const double c = 0.5 * (p.a + p.b);
        if (!(c > std::min(p.a, p.b) && c < std::max(p.a, p.b))) {
            heap.push_back(p);
            std::push_heap(heap.begin(), heap.end(), worse);
            break;
        }
        for (const Panel& q : {make(p.a, c), make(c, p.b)}) {
            heap.push_back(q);
            std::push_heap(heap.begin(), heap.end(), worse);
        }
        err = 0;
        for (const auto& q : heap) err += q.err;
    }
    // sum in position order for reproducibility
    std::sort(heap.begin(), heap.end(), [](const Panel& x, const Panel& y) { return x.a < y.a; });
    double v = 0;
    for (const auto& q : heap) v += q.value;
    return v;
}

}  // namespace fracmin::quad
