// Acceptance run: one PASS/FAIL line per criterion, then a determinism pass
// that repeats criteria 1-9 under FRACMIN_THREADS=1 and =4 and compares the
// hashes of the CSV tables each criterion produces.
//
// Criterion 5 is known to fail (see README, "Barrier curvature"). It is run
// and reported like the others; the exit status is 0 when every failure is a
// documented one and all other criteria pass.

#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <random>

#include "cli.hpp"

using namespace fracmin;
using cli::csv_table;
using cli::num;

namespace {

struct Outcome {
    bool pass = true;
    std::string csv;
    std::string note;
};

struct Criterion {
    int id;
    std::string title;
    double budget_seconds;
    std::function<Outcome()> run;
};

const std::set<int> kKnownFailures{5};

std::uint64_t fnv1a(const std::string& s) {
    std::uint64_t h = 1469598103934665603ull;
    for (unsigned char c : s) {
        h ^= c;
        h *= 1099511628211ull;
    }
    return h;
}

GraphFunction graph1(double half, long cells, const std::function<double(double)>& f) {
    return GraphFunction::sample(Grid::cube(1, -half, half, cells), [&](const Point& x) { return f(x[0]); });
}

// ---- 1
Outcome halfspace_cancellation() {
    Outcome o;
    std::vector<std::vector<double>> rows;
    double worst = 0;
    for (int n : {2, 3}) {
        const Grid g = Grid::cube(n, -0.5, 0.5, 128);
        const auto F = fixtures::halfspace(g, fixtures::unit_axis(n));
        for (double s : {0.3, 0.6, 0.9, 0.99}) {
            const auto c = frac_curvature(F, Point{0.01, 0, 0}, 0.45, s);
            rows.push_back({double(n), s, c.normalized, c.raw_integral});
            worst = std::max(worst, std::abs(c.normalized));
        }
    }
    o.pass = worst <= 1e-3;
    o.csv = csv_table({"n", "s", "normalized", "raw_integral"}, rows);
    o.note = "max |normalized| = " + num(worst);
    return o;
}

// ---- 2
Outcome curvature_limit() {
    Outcome o;
    const auto t = convergence_study(CurvatureShape::parse("circle:0.5", 2), {0.8, 0.9, 0.95, 0.99}, 0.45);
    std::vector<std::vector<double>> rows;
    for (const auto& r : t.rows) rows.push_back({r.s, r.h, r.normalized, r.classical, r.abs_error});
    rows.push_back({0, 0, t.A, t.B, t.A_refined});
    o.csv = csv_table({"s", "h", "normalized", "classical", "abs_error"}, rows);
    const auto coarse = t.at(t.h);
    bool decreasing = coarse.size() == 4;
    for (std::size_t i = 1; i < coarse.size(); ++i) decreasing = decreasing && coarse[i].abs_error < coarse[i - 1].abs_error;
    const double drift = std::abs(t.A_refined / t.A - 1);
    o.pass = decreasing && t.A > 0 && drift <= 0.3;
    o.note = "A = " + num(t.A) + ", A(h/2) = " + num(t.A_refined) + ", errors " +
             (decreasing ? "decreasing" : "NOT decreasing");
    return o;
}

// ---- 3
VoxelSet random_balls(const Grid& g, double scale, unsigned seed) {
    std::mt19937_64 rng(seed);
    std::vector<std::array<double, 3>> balls(3);
    for (auto& b : balls) {
        // raw draws, so the fixture does not depend on the library's distributions
        auto u = [&] { return double(rng() >> 11) * 0x1p-53; };
        b = {-0.5 + u(), -0.5 + u(), 0.2 + 0.3 * u()};
    }
    return VoxelSet::from_predicate(g, ExteriorRule::empty(), [&](const Point& x) {
        for (const auto& b : balls)
            if (std::hypot(x[0] - b[0] * scale, x[1] - b[1] * scale) < b[2] * scale) return true;
        return false;
    });
}

Outcome energy_symmetry() {
    Outcome o;
    const double s = 0.5, lambda = 2.0, expected = std::pow(lambda, 2 - s);
    std::vector<std::vector<double>> rows;
    double worst_sym = 0, worst_scale = 0;
    for (unsigned seed : {11u, 12u, 13u}) {
        auto at = [&](double scale) {
            const Grid g = Grid::cube(2, -1.25 * scale, 1.25 * scale, 60);
            const auto E = random_balls(g, scale, seed);
            const Ball omega{{0, 0, 0}, scale};
            const KernelSpec k{2, s};
            return std::pair{js_energy(E, omega, k, 8 * scale), js_energy(E.complement(), omega, k, 8 * scale)};
        };
        const auto [a, ac] = at(1.0);
        const auto [b, bc] = at(lambda);
        const double sym = std::max({std::abs(a.total - ac.total), std::abs(a.inside_out - ac.out_inside),
                                     std::abs(a.out_inside - ac.inside_out)}) / a.total;
        const double ratio = b.total / a.total;
        worst_sym = std::max(worst_sym, sym);
        worst_scale = std::max(worst_scale, std::abs(ratio / expected - 1));
        rows.push_back({double(seed), a.total, ac.total, b.total, ratio});
    }
    o.pass = worst_sym <= 1e-10 && worst_scale <= 0.01;
    o.csv = csv_table({"seed", "J", "J_complement", "J_scaled", "ratio"}, rows);
    o.note = "complement rel. diff " + num(worst_sym) + ", scaling rel. error " + num(worst_scale);
    return o;
}

// ---- 4
Outcome levelset_lipschitz() {
    Outcome o;
    std::vector<std::vector<double>> rows;
    bool ok = true;
    const double delta = 0.25;
    for (double ratio : {0.01, 0.04}) {
        const double gamma = ratio * delta;
        const Grid g = Grid::cube(2, -1.2, 1.2, 960);
        LevelSetSpec sp;
        sp.delta = delta;
        sp.side = Side::minus;
        sp.gamma = gamma;
        sp.r = 1.1;
        const auto rep = lipschitz_bound_check(fixtures::step(g, gamma), sp);
        const double lower = 0.5 * std::sqrt(ratio);
        ok = ok && rep.pass && rep.measured >= lower;
        rows.push_back({ratio, rep.measured, lower, rep.bound + rep.slack});
    }
    // separation pairs: identical, shifted, wavy around a tilted plane, step around a plane
    const Grid g = Grid::cube(2, -2.1, 2.1, 420);
    const double gamma = 0.05, sd = 0.1;
    const auto plane = fixtures::halfspace(g, {0, 1, 0});
    const auto tilted = fixtures::tilted_plane(g, 0.2);
    const auto wavy = VoxelSet::from_predicate(g, tilted.exterior, [&](const Point& x) {
        return x[1] < 0.2 * x[0] + 0.5 * gamma * std::cos(4 * std::numbers::pi * x[0]);
    });
    const std::vector<std::pair<VoxelSet, VoxelSet>> pairs{{plane, plane},
                                                           {fixtures::halfspace(g, {0, 1, 0}, 0.5 * gamma), plane},
                                                           {wavy, tilted},
                                                           {fixtures::step(g, 0.5 * gamma), plane}};
    double k = 0;
    for (const auto& [E, star] : pairs) {
        const auto sep = separation_check(E, star, gamma, sd);
        ok = ok && sep.pass;
        rows.push_back({-(++k), sep.max_gap, sep.M_o, sep.bound});
    }
    o.pass = ok;
    o.csv = csv_table({"ratio_or_pair", "measured", "lower_or_Mo", "upper"}, rows);
    o.note = "L(0.01) = " + num(rows[0][1]) + ", L(0.04) = " + num(rows[1][1]) + ", 4 separation pairs";
    return o;
}

// ---- 5
Outcome barrier() {
    Outcome o;
    const auto b = BarrierSpec::standard(2, 0.01);
    const auto p = barrier_property_check(b);
    const auto c = barrier_curvature_check(b, Affine{}, 0.95);
    std::vector<std::vector<double>> rows;
    for (const auto& q : c.samples) rows.push_back({q.radius, q.value, c.threshold, double(q.pass)});
    o.csv = csv_table({"radius", "scaled_curvature", "threshold", "pass"}, rows);
    o.pass = p.pass && c.pass && c.samples.size() >= 32;
    o.note = std::string("properties ") + (p.pass ? "PASS" : "FAIL") + ", curvature bound at " +
             std::to_string(c.passed) + "/" + std::to_string(c.samples.size()) + " samples (threshold " +
             num(c.threshold) + ")";
    return o;
}

// ---- 6
Outcome abp_envelope() {
    Outcome o;
    const double L = 3;
    const auto v = graph1(L, 601, [](double x) { return std::abs(x) - 1; });
    const auto e = convex_envelope(v, L, 1.0);
    double hull_err = 0;
    for (std::size_t k = 0; k < v.base.size(); ++k)
        hull_err = std::max(hull_err, std::abs(e.gamma_values.values[k] - (std::abs(v.base.center(k)[0]) / L - 1)));
    const double meas_err = std::abs(e.grad_image_measure - 2 / L);

    const double R = 1, rd = 6 * std::sqrt(3.0) * R;
    const Grid g = Grid::cube(2, -11, 11, 88);
    const auto cone = GraphFunction::sample(g, [](const Point& x) { return std::hypot(x[0], x[1]) - 1; });
    const auto ce = convex_envelope(cone, rd, R);
    const double C = slope_constant_bound(3);
    const double lower = std::pow(ce.m0 / rd, 2) / C;

    o.pass = hull_err <= 1e-9 && meas_err <= 1e-9 && ce.grad_image_measure >= lower;
    o.csv = csv_table({"hull_error", "measure_error", "cone_measure", "cone_lower_bound", "C"},
                      {{hull_err, meas_err, ce.grad_image_measure, lower, C}});
    o.note = "1-D hull error " + num(hull_err) + ", cone " + num(ce.grad_image_measure) + " >= " + num(lower);
    return o;
}

// ---- 7
Outcome ring() {
    Outcome o;
    const auto zero = graph1(1.5, 600, [](double) { return 0.0; });
    RingConfig rc;
    rc.eps = 0.01;
    rc.s = 0.9;
    rc.M = 50;
    const auto t = ring_detachment(zero, {0, 0, 0}, zero, rc);
    const auto q = ring_detachment(graph1(1.5, 600, [](double x) { return 0.01 * 0.2 * x * x; }), {0, 0, 0}, zero, rc);

    RingConfig vc;
    vc.eps = 0.01;
    vc.s = 0.995;
    vc.M = 4;
    vc.C_o = 200;
    const double lo = 1.0 / 6, hi = 1 / std::sqrt(2.0), hb = 2 * vc.M * vc.eps * hi * hi;
    const auto bump = graph1(1.5, 600, [&](double x) {
        if (x <= 0) return 0.0;
        const double up = std::clamp((x - (lo - hb)) / hb, 0.0, 1.0), dn = std::clamp((hi + hb - x) / hb, 0.0, 1.0);
        return hb * std::min(up, dn);
    });
    const auto v = ring_detachment(bump, {0, 0, 0}, zero, vc);

    o.pass = t.m_star == 0 && t.excess_fraction == 0 && t.pass && q.excess_fraction <= 0.1 && !v.pass;
    o.csv = csv_table({"fixture", "m_star", "excess_fraction", "pass"},
                      {{0, double(t.m_star), t.excess_fraction, double(t.pass)},
                       {1, double(q.m_star), q.excess_fraction, double(q.pass)},
                       {2, double(v.m_star), v.excess_fraction, double(v.pass)}});
    o.note = "quadratic excess " + num(q.excess_fraction) + ", violator excess " + num(v.excess_fraction) +
             (v.pass ? " (not flagged)" : " (FAIL as intended)");
    return o;
}

// ---- 8
Outcome minimizer() {
    Outcome o;
    const Grid g = Grid::cube(2, -1.25, 1.25, 128);
    MinimizeConfig cfg;
    cfg.s = 0.9;
    std::vector<std::vector<double>> rows;
    bool ok = true;
    std::string note;
    for (double slope : {0.0, 0.2}) {
        const auto E = slope == 0 ? fixtures::halfspace(g, {0, 1, 0}) : fixtures::tilted_plane(g, slope);
        const auto r = minimize(E, cfg);
        bool monotone = r.final_energy <= r.initial_energy;
        for (std::size_t t = 1; t < r.trace.size(); ++t) monotone = monotone && r.trace[t] <= r.trace[t - 1];
        const auto u = column_heights(r.set);
        double dev = 0;
        for (std::size_t k = 0; k < u.base.size(); ++k) {
            const double x = u.base.center(k)[0];
            if (std::abs(x) <= 1) dev = std::max(dev, std::abs(u.values[k] - slope * x));
        }
        const auto el = el_residual(r.set, cfg);
        const double limit = 5 * (g.h + el.quad_tol);
        ok = ok && r.converged && monotone && dev <= g.h + 1e-12 && el.max_residual <= limit;
        rows.push_back({slope, dev, el.max_residual, limit, r.final_energy, double(r.sweeps)});
        note += "slope " + num(slope) + ": dev " + num(dev / g.h) + " cells, residual " + num(el.max_residual) + "; ";
    }
    const auto C = minimize(fixtures::cosine(g, 0.05, 1.0), cfg);
    const auto inner = boundary_oscillation(C.set, Ball{{0, 0, 0}, 0.5});
    const auto outer = boundary_oscillation(C.set, Ball{{0, 0, 0}, 1.0});
    ok = ok && inner && outer && *inner <= *outer;
    rows.push_back({-1, inner.value_or(-1), outer.value_or(-1), 0, C.final_energy, double(C.sweeps)});
    o.pass = ok;
    o.csv = csv_table({"slope", "deviation", "residual", "limit", "energy", "sweeps"}, rows);
    o.note = note + "cosine osc " + num(inner.value_or(-1)) + " <= " + num(outer.value_or(-1));
    return o;
}

// ---- 9, through the command line
Outcome schedule() {
    Outcome o;
    struct Case {
        const char *mu, *M;
        int k0;
        double d;
    };
    const std::vector<Case> cases{{"0.75", "3", 1, 1.0 / 6}, {"0.5", "4", 2, 1.0 / 32}, {"0.1", "2", 14, 1.0 / 32768}};
    std::vector<std::vector<double>> rows;
    for (const auto& c : cases) {
        const char* argv[] = {"fracmin", "schedule", "--mu", c.mu, "--M", c.M, "--json"};
        std::ostringstream out, err;
        const int rc = cli::run(7, argv, out, err);
        const auto j = cli::json::parse(out.str());
        const int k0 = j["result"]["k0"];
        const double d = j["result"]["d"];
        o.pass = o.pass && rc == 0 && k0 == c.k0 && d == c.d;
        rows.push_back({std::stod(c.mu), std::stod(c.M), double(k0), d});
    }
    o.csv = csv_table({"mu", "M", "k0", "d"}, rows);
    o.note = "k0 = 1, 2, 14";
    return o;
}

struct Timed {
    Outcome outcome;
    double seconds;
};

Timed timed(const Criterion& c) {
    const auto t0 = std::chrono::steady_clock::now();
    Timed t;
    try {
        t.outcome = c.run();
    } catch (const std::exception& e) {
        t.outcome.pass = false;
        t.outcome.note = std::string("exception: ") + e.what();
    }
    t.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return t;
}

std::string seconds(double s) {
    std::ostringstream os;
    os << std::fixed << std::setprecision(1) << s << " s";
    return os.str();
}

}  // namespace

int main() {
    const std::vector<Criterion> criteria{
        {1, "halfspace cancellation", 30, halfspace_cancellation},
        {2, "curvature limit", 120, curvature_limit},
        {3, "energy symmetry and scaling", 60, energy_symmetry},
        {4, "level-set Lipschitz bound", 60, levelset_lipschitz},
        {5, "barrier", 120, barrier},
        {6, "ABP envelope", 30, abp_envelope},
        {7, "ring diagnostic", 30, ring},
        {8, "minimizer sanity", 600, minimizer},
        {9, "schedule arithmetic", 1, schedule},
    };

    std::vector<int> failed;
    std::vector<std::uint64_t> hashes;
    for (const auto& c : criteria) {
        const auto t = timed(c);
        const bool in_time = t.seconds <= c.budget_seconds;
        const bool pass = t.outcome.pass && in_time;
        if (!pass) failed.push_back(c.id);
        hashes.push_back(fnv1a(t.outcome.csv));
        std::cout << (pass ? "PASS" : "FAIL") << "  " << c.id << ". " << c.title << ": " << t.outcome.note << " ["
                  << seconds(t.seconds) << (in_time ? "" : ", over the " + seconds(c.budget_seconds) + " budget")
                  << "]" << (!pass && kKnownFailures.count(c.id) ? " (known, documented in README)" : "") << "\n"
                  << std::flush;
    }

    // 10: the same tables under one and four worker threads
    std::string mismatch;
    for (const char* threads : {"1", "4"}) {
        setenv("FRACMIN_THREADS", threads, 1);
        for (std::size_t i = 0; i < criteria.size(); ++i) {
            const auto t = timed(criteria[i]);
            if (fnv1a(t.outcome.csv) != hashes[i])
                mismatch += (mismatch.empty() ? "" : ", ") + std::to_string(criteria[i].id) + "@" + threads;
        }
    }
    unsetenv("FRACMIN_THREADS");
    const bool det = mismatch.empty();
    if (!det) failed.push_back(10);
    std::cout << (det ? "PASS" : "FAIL") << "  10. determinism: "
              << (det ? "CSV hashes of criteria 1-9 identical with FRACMIN_THREADS = 1 and 4"
                      : "hash mismatch in " + mismatch)
              << "\n";

    bool unexpected = false;
    for (int id : failed) unexpected = unexpected || !kKnownFailures.count(id);
    std::cout << (criteria.size() + 1 - failed.size()) << "/" << criteria.size() + 1 << " criteria pass"
              << (failed.empty() || unexpected ? "" : "; remaining failures are documented") << "\n";
    return unexpected ? 1 : 0;
}
