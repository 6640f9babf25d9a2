#pragma once

// Descent for J_s with frozen exterior data, Euler-Lagrange residuals, the
// flatness ladder and the cone experiment.
//
// Both descent modes keep the field A(k) of EnergyModel::field up to date
// incrementally: flipping cell k (label chi_k) adds -2 chi_k w(j - k) to A(j).
// A flip of j then costs chi_j A(j), so every accepted move is an exact
// energy decrease and the trace is nonincreasing by construction.

#include <algorithm>
#include <cstdint>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "fracmin/curvature.hpp"
#include "fracmin/energy.hpp"
#include "fracmin/geometry.hpp"

namespace fracmin {

struct MinimizeConfig {
    enum class Mode { graph, voxel };

    double s = 0.9;
    Region omega = Ball{{0, 0, 0}, 1.0};
    double far_cutoff = 0;  // 0: four grid diameters
    int max_sweeps = 200;
    double tol_energy = 1e-9;
    Mode mode = Mode::graph;
    std::uint64_t sweep_order = 0;  // 0 visits in lexicographic order
    int max_move = 3;               // graph mode: cells per column per sweep

    void validate() const {
        if (!(s > 0 && s < 1)) throw Error("minimize: s must lie in (0,1)");
        if (!(tol_energy > 0)) throw Error("minimize: tol_energy must be positive");
        if (max_sweeps < 1) throw Error("minimize: max_sweeps must be at least 1");
        if (max_move < 1) throw Error("minimize: max_move must be at least 1");
    }
    static const char* mode_name(Mode m) { return m == Mode::graph ? "graph" : "voxel"; }
};

struct MinimizeResult {
    VoxelSet set;
    std::vector<double> trace;  // energy before the first sweep and after each one
    int sweeps = 0;
    std::size_t flips = 0;
    bool converged = false;
    bool warning = false;  // max_sweeps reached while still decreasing
    double initial_energy = 0;
    double final_energy = 0;  // recomputed from scratch
    double tail_bound = 0;
};

namespace detail {

inline std::vector<std::size_t> sweep_permutation(std::size_t count, std::uint64_t seed) {
    std::vector<std::size_t> p(count);
    for (std::size_t i = 0; i < count; ++i) p[i] = i;
    if (seed == 0) return p;
    // Fisher-Yates with raw engine output, so the order does not depend on
    // the standard library's distribution implementation.
    std::mt19937_64 rng(seed);
    for (std::size_t i = count; i > 1; --i) std::swap(p[i - 1], p[rng() % i]);
    return p;
}

class FlipState {
public:
    FlipState(EnergyModel& model, VoxelSet& E) : model_(model), E_(E), g_(E.grid) {
        A_ = model.field(E);
        const double h = g_.h;
        tau_ = 1e-9 * std::pow(h, g_.n - model.kernel().s);
    }

    double delta(std::size_t k) const { return E_.at(k) ? A_[k] : -A_[k]; }
    double tie_tolerance() const { return tau_; }
    double field(std::size_t k) const { return A_[k]; }
    double w(std::size_t a, std::size_t b) const {
        const Index i = g_.unflat(a), j = g_.unflat(b);
        return model_.weight({i[0] - j[0], i[1] - j[1], i[2] - j[2]});
    }

    void flip(std::size_t k) {
        const double c = E_.at(k) ? 1.0 : -1.0;
        const Index ik = g_.unflat(k);
        for (auto j : model_.omega_cells()) {
            const Index ij = g_.unflat(j);
            A_[j] -= 2.0 * c * model_.weight({ij[0] - ik[0], ij[1] - ik[1], ij[2] - ik[2]});
        }
        E_.occ[k] = E_.occ[k] ? 0 : 1;
    }

private:
    EnergyModel& model_;
    VoxelSet& E_;
    const Grid& g_;
    std::vector<double> A_;
    double tau_ = 0;
};

/// Omega cells of one vertical column, bottom to top.
struct Column {
    std::vector<std::size_t> cells;
    std::size_t filled = 0;  // occupied prefix length
};

inline std::vector<Column> omega_columns(const EnergyModel& model, const VoxelSet& E) {
    const Grid& g = E.grid;
    const int v = g.n - 1;
    std::vector<Column> cols;
    // Cells are stored with the last axis fastest, so a column is a run of
    // consecutive flat indices.
    const long height = g.dims[v];
    for (std::size_t base = 0; base < g.size(); base += std::size_t(height)) {
        Column c;
        for (long t = 0; t < height; ++t) {
            const std::size_t k = base + std::size_t(t);
            if (model.in_omega(k)) c.cells.push_back(k);
        }
        if (c.cells.empty()) continue;
        for (std::size_t t = 1; t < c.cells.size(); ++t)
            if (c.cells[t] != c.cells[t - 1] + 1) throw Error("minimize: Omega column is not an interval");
        std::size_t t = 0;
        while (t < c.cells.size() && E.at(c.cells[t])) ++t;
        c.filled = t;
        for (; t < c.cells.size(); ++t)
            if (E.at(c.cells[t])) throw Error("minimize: graph mode needs a subgraph inside Omega");
        cols.push_back(std::move(c));
    }
    return cols;
}

/// Cost of moving a column interface by m cells (m > 0 fills upwards),
/// flipping the cells one by one with the pair corrections inside the column.
inline double column_move_cost(const FlipState& st, const Column& c, long m) {
    double total = 0;
    std::vector<std::size_t> done;
    const long step = m > 0 ? 1 : -1;
    for (long t = 0; t != m; t += step) {
        const std::size_t k = m > 0 ? c.cells[c.filled + std::size_t(t)] : c.cells[c.filled - 1 - std::size_t(-t)];
        // earlier flips in this move turned cells to the label k is about to get
        double corr = 0;
        for (auto u : done) corr += st.w(k, u);
        total += st.delta(k) - 2.0 * corr;
        done.push_back(k);
    }
    return total;
}

}  // namespace detail

/// Descent from E0; cells outside Omega keep E0's labels.
inline MinimizeResult minimize(const VoxelSet& E0, const MinimizeConfig& cfg) {
    cfg.validate();
    E0.validate();
    const Grid& g = E0.grid;
    KernelSpec kernel;
    kernel.n = g.n;
    kernel.s = cfg.s;
    const double cutoff = cfg.far_cutoff > 0 ? cfg.far_cutoff : 4.0 * g.diameter();
    EnergyModel model(E0, cfg.omega, kernel, cutoff);

    MinimizeResult res;
    res.set = E0;
    VoxelSet& E = res.set;
    res.initial_energy = model.evaluate(E).total;
    res.tail_bound = model.tail_bound();
    res.trace.push_back(res.initial_energy);
    detail::FlipState st(model, E);
    const double tau = st.tie_tolerance();

    std::vector<detail::Column> cols;
    if (cfg.mode == MinimizeConfig::Mode::graph) cols = detail::omega_columns(model, E);
    const std::size_t units = cfg.mode == MinimizeConfig::Mode::graph ? cols.size() : model.omega_cells().size();
    const auto order = detail::sweep_permutation(units, cfg.sweep_order);

    for (int sweep = 0; sweep < cfg.max_sweeps; ++sweep) {
        CompensatedSum dE;
        std::size_t flips = 0;
        for (auto u : order) {
            if (cfg.mode == MinimizeConfig::Mode::voxel) {
                const std::size_t k = model.omega_cells()[u];
                const double d = st.delta(k);
                if (d < -tau) {
                    st.flip(k);
                    dE += d;
                    ++flips;
                }
                continue;
            }
            auto& c = cols[u];
            const long lo = -std::min<long>(cfg.max_move, long(c.filled));
            const long hi = std::min<long>(cfg.max_move, long(c.cells.size() - c.filled));
            long best_m = 0;
            double best = 0;
            // candidates by increasing |m|; a move must beat the current best
            // by more than the tie tolerance
            for (long a = 1; a <= cfg.max_move; ++a)
                for (long m : {a, -a}) {
                    if (m < lo || m > hi) continue;
                    const double cost = detail::column_move_cost(st, c, m);
                    if (cost < best - tau) best = cost, best_m = m;
                }
            if (best_m == 0) continue;
            if (best_m > 0)
                for (long t = 0; t < best_m; ++t) st.flip(c.cells[c.filled + std::size_t(t)]);
            else
                for (long t = 0; t < -best_m; ++t) st.flip(c.cells[c.filled - 1 - std::size_t(t)]);
            c.filled = std::size_t(long(c.filled) + best_m);
            dE += best;
            flips += std::size_t(std::abs(best_m));
        }
        const double before = res.trace.back();
        res.trace.push_back(flips ? before + dE.value() : before);
        res.sweeps = sweep + 1;
        res.flips += flips;
        if (flips == 0 || -dE.value() < cfg.tol_energy * std::abs(before)) {
            res.converged = true;
            break;
        }
    }
    res.warning = !res.converged;
    res.final_energy = model.evaluate(E).total;
    return res;
}

/// Interface heights of a set that is a subgraph along every column: the top
/// of the highest occupied cell below the first empty one, sampled on the
/// base grid of columns.
inline GraphFunction column_heights(const VoxelSet& E) {
    const Grid& g = E.grid;
    const int v = g.n - 1;
    std::array<long, 3> bd{1, 1, 1};
    Point bo{0, 0, 0};
    for (int a = 0; a < v; ++a) bd[a] = g.dims[a], bo[a] = g.origin[a];
    const Grid base(v, bd, bo, g.h);
    std::vector<double> vals(base.size());
    for (std::size_t b = 0; b < base.size(); ++b) {
        const Index bi = base.unflat(b);
        long t = 0;
        Index i = bi;
        for (; t < g.dims[v]; ++t) {
            i[v] = t;
            if (!E.at(i)) break;
        }
        vals[b] = g.origin[v] + double(t) * g.h;
    }
    return GraphFunction(base, std::move(vals));
}

struct ELResidualReport {
    double max_residual = 0;   // sup |normalized curvature| over the samples
    double mean_residual = 0;
    std::size_t sample_count = 0;
    std::size_t sign_violations = 0;  // samples with curvature > h + quad_tol
    double quad_tol = 0;              // largest quadrature error estimate
    double h = 0;
    std::vector<Point> points;        // snapped evaluation points
    std::vector<double> values;       // normalized curvature
    std::vector<double> radii;
};

/// Normalized fractional curvature at interface points of E inside Omega.
/// Candidates are face midpoints between an occupied cell and an empty
/// neighbour, ordered by cell index; `sample_count` of them are taken at even
/// spacing. The ball radius is r, shrunk where the box edge is closer.
inline ELResidualReport el_residual(const VoxelSet& E, const MinimizeConfig& cfg, std::size_t sample_count = 32,
                                    double r = 0.25) {
    cfg.validate();
    E.validate();
    const Grid& g = E.grid;
    const int n = g.n;
    if (sample_count == 0) throw Error("el_residual: sample_count must be positive");
    const double margin = 5.0 * g.h;  // snapping moves points by at most 3h
    std::vector<Point> cand;
    const auto nbrs = face_neighbours(n);
    for (auto k : boundary_cells(E)) {
        const Index i = g.unflat(k);
        for (const auto& d : nbrs) {
            const Index j = i + d;
            if (E.at(j)) continue;
            const Point p = 0.5 * (g.center(i) + g.center(j));
            if (region_contains(cfg.omega, p, n) && g.distance_to_edge(p) >= margin + 2.0 * g.h) cand.push_back(p);
            break;
        }
    }
    ELResidualReport rep;
    rep.h = g.h;
    if (cand.empty()) return rep;
    const std::size_t m = std::min(sample_count, cand.size());
    std::vector<Point> picks;
    for (std::size_t t = 0; t < m; ++t) picks.push_back(cand[(t * cand.size()) / m]);
    auto reps = parallel_map<CurvatureReport>(picks.size(), [&](std::size_t t) {
        const double rr = std::min(r, g.distance_to_edge(picks[t]) - margin);
        return frac_curvature(E, picks[t], rr, cfg.s);
    });
    CompensatedSum sum;
    for (const auto& c : reps) {
        rep.points.push_back(c.x0);
        rep.values.push_back(c.normalized);
        rep.radii.push_back(c.r);
        rep.max_residual = std::max(rep.max_residual, std::abs(c.normalized));
        rep.quad_tol = std::max(rep.quad_tol, c.quad_error_est);
        sum += std::abs(c.normalized);
    }
    rep.sample_count = reps.size();
    rep.mean_residual = sum.value() / double(reps.size());
    for (double v : rep.values)
        if (v > g.h + rep.quad_tol) ++rep.sign_violations;
    return rep;
}

struct FlatnessLevel {
    int i = 0;
    double radius = 0;  // 2^i, in ladder units
    Point nu{0, 0, 0};
    double half_width = 0;  // ladder units
    double required = 0;    // a 2^{i(1+alpha)}
    bool pass = false;
};

/// Slabs |x . nu_i| <= a 2^{i(1+alpha)} on B_{2^i}, i = 0..K, with a = 2^{-K alpha}.
/// `unit` is the physical length of one ladder unit, so that B_{2^K} fits
/// in a desk-sized box.
struct FlatnessLadder {
    int K = 4;
    double alpha = 0.5;
    double a = 0.25;
    double unit = 1.0;
    std::vector<FlatnessLevel> levels;

    static FlatnessLadder make(int K, double alpha, double unit = 1.0) {
        if (K < 0) throw Error("flatness ladder: K must be nonnegative");
        if (!(alpha > 0 && alpha < 1)) throw Error("flatness ladder: alpha must lie in (0,1)");
        if (!(unit > 0)) throw Error("flatness ladder: unit must be positive");
        FlatnessLadder l;
        l.K = K;
        l.alpha = alpha;
        l.a = std::exp2(-double(K) * alpha);
        l.unit = unit;
        for (int i = 0; i <= K; ++i) {
            FlatnessLevel v;
            v.i = i;
            v.radius = std::exp2(double(i));
            v.required = l.a * std::exp2(double(i) * (1.0 + alpha));
            l.levels.push_back(v);
        }
        return l;
    }
};

struct FlatnessReport {
    FlatnessLadder ladder;
    double slack = 0;  // voxel resolution h, in ladder units
    double x51_width = 0;
    bool x51_pass = false;
    bool levels_pass = false;
    double d = 0;
    std::size_t d_points = 0;  // boundary cells in B_d
    double top = 0, bottom = 0;
    bool lower_branch = false;  // boundary in B_d below a(1 - d^2)
    bool upper_branch = false;  // boundary in B_d above -a(1 - d^2)
    bool pass = false;          // hypotheses hold
    std::string branch() const {
        if (lower_branch && upper_branch) return "both";
        if (lower_branch) return "lower";
        if (upper_branch) return "upper";
        return "neither";
    }
};

/// Checks the slab hypotheses level by level and, separately, which of the
/// two one-sided conclusions holds on B_d. Boundary cell centres sit within
/// h of the interface, so every containment gets h of slack.
inline FlatnessReport flatness_ladder_check(const VoxelSet& E, FlatnessLadder ladder, double d) {
    E.validate();
    const Grid& g = E.grid;
    const int n = g.n;
    if (!(d > 0 && d < 1)) throw Error("flatness: d must lie in (0,1)");
    const double big = ladder.unit * std::exp2(double(ladder.K));
    for (int a = 0; a < n; ++a)
        if (g.lower()[a] > -big || g.upper()[a] < big) throw Error("flatness: grid box must contain B_{2^K}");
    FlatnessReport rep;
    rep.slack = g.h / ladder.unit;
    std::vector<Point> pts;  // boundary centres in ladder units
    for (auto k : boundary_cells(E)) pts.push_back((1.0 / ladder.unit) * g.center(k));
    auto within = [&](double radius) {
        std::vector<Point> out;
        for (const auto& p : pts)
            if (norm(p) < radius) out.push_back(p);
        return out;
    };
    {
        double w = 0;
        for (const auto& p : within(1.0)) w = std::max(w, std::abs(p[n - 1]));
        rep.x51_width = w;
        rep.x51_pass = w <= ladder.a + rep.slack;
    }
    rep.levels_pass = true;
    for (auto& lv : ladder.levels) {
        const auto inside = within(lv.radius);
        if (inside.empty()) throw Error("flatness: no boundary cells in B_" + std::to_string(int(lv.radius)));
        const auto fit = slab_fit(E, Ball{{0, 0, 0}, lv.radius * ladder.unit});
        lv.nu = fit.nu;
        lv.half_width = fit.half_width / ladder.unit;
        lv.pass = lv.half_width <= lv.required + rep.slack;
        rep.levels_pass = rep.levels_pass && lv.pass;
    }
    rep.ladder = ladder;
    rep.d = d;
    const double bound = ladder.a * (1.0 - d * d);
    rep.top = -std::numeric_limits<double>::infinity();
    rep.bottom = std::numeric_limits<double>::infinity();
    for (const auto& p : within(d)) {
        rep.top = std::max(rep.top, p[n - 1]);
        rep.bottom = std::min(rep.bottom, p[n - 1]);
        ++rep.d_points;
    }
    rep.lower_branch = rep.d_points == 0 || rep.top <= bound + rep.slack;
    rep.upper_branch = rep.d_points == 0 || rep.bottom >= -bound - rep.slack;
    rep.pass = rep.x51_pass && rep.levels_pass;
    return rep;
}

struct ConeConfig {
    long cells = 64;         // per axis
    double half_box = 1.25;  // box [-half_box, half_box]^2
    double omega_radius = 1.0;
    double probe_radius = 0.5;  // deviations are measured for |x_1| <= probe_radius
    int max_sweeps = 200;
    double tol_energy = 1e-9;
};

struct ConeRow {
    double s = 0;
    double h = 0;
    double vertex_height = 0;  // u(0) after minimizing
    double cone_deviation = 0;  // max |u - tan(theta)|x_1|| on the probe
    double line_slope = 0;
    double line_deviation = 0;  // min over lines through 0 of max |u - m x_1|
    double vertex_curvature = 0;  // normalized curvature of the data at 0
    bool pull_consistent = false;  // the vertex moved the way the curvature pushes it
    int sweeps = 0;
    bool converged = false;
};

struct ConeTable {
    double theta = 0;  // radians
    ConeConfig cfg;
    std::vector<ConeRow> rows;
};

/// Minimizes in B_{omega_radius} with the subgraph of tan(theta)|x_1| as
/// data, for each s. A positive curvature at the vertex means the set is too
/// small there, so the interface should rise, and conversely.
inline ConeTable cone_experiment(double theta, const std::vector<double>& s_list, const ConeConfig& cc = {}) {
    if (!(theta >= 0 && theta < std::numbers::pi / 4)) throw Error("cone: theta must lie in [0, 45 degrees)");
    if (s_list.empty()) throw Error("cone: empty s list");
    const Grid g = Grid::cube(2, -cc.half_box, cc.half_box, cc.cells);
    const double t = std::tan(theta);
    const auto rule = ExteriorRule::cone(t);
    const auto data = VoxelSet::from_predicate(g, rule, [&](const Point& x) { return rule.contains(x, 2); });
    ConeTable table;
    table.theta = theta;
    table.cfg = cc;
    for (double s : s_list) {
        MinimizeConfig cfg;
        cfg.s = s;
        cfg.omega = Ball{{0, 0, 0}, cc.omega_radius};
        cfg.max_sweeps = cc.max_sweeps;
        cfg.tol_energy = cc.tol_energy;
        const auto res = minimize(data, cfg);
        const auto u = column_heights(res.set);
        std::vector<std::pair<double, double>> probe;
        for (std::size_t k = 0; k < u.base.size(); ++k) {
            const double x = u.base.center(k)[0];
            if (std::abs(x) <= cc.probe_radius) probe.push_back({x, u.values[k]});
        }
        ConeRow row;
        row.s = s;
        row.h = g.h;
        row.sweeps = res.sweeps;
        row.converged = res.converged;
        double best_abs = std::numeric_limits<double>::infinity();
        for (const auto& [x, v] : probe) {
            row.cone_deviation = std::max(row.cone_deviation, std::abs(v - t * std::abs(x)));
            if (std::abs(x) < best_abs) best_abs = std::abs(x), row.vertex_height = v;
        }
        auto line_dev = [&](double m) {
            double w = 0;
            for (const auto& [x, v] : probe) w = std::max(w, std::abs(v - m * x));
            return w;
        };
        row.line_slope = detail::golden_min(line_dev, -2.0, 2.0, 100);
        row.line_deviation = line_dev(row.line_slope);
        row.vertex_curvature = frac_curvature(data, {0, 0, 0}, 0.25, s).normalized;
        const double tol = 1e-9;
        row.pull_consistent = (row.vertex_curvature > tol && row.vertex_height > 0) ||
                              (row.vertex_curvature < -tol && row.vertex_height < 0) ||
                              (std::abs(row.vertex_curvature) <= tol && std::abs(row.vertex_height) <= g.h);
        table.rows.push_back(row);
    }
    return table;
}

}  // namespace fracmin
