#pragma once

// The fracmin command line. run() is the whole program; main() only forwards
// to it, so tests can drive subcommands in-process.
//
// Exit codes: 0 success or PASS, 2 a check failed (including a failed
// hypothesis), 1 any other error, 64 malformed invocation.

#include <charconv>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "fracmin/fracmin.hpp"

namespace fracmin::cli {

using nlohmann::json;

inline constexpr int kSchemaVersion = 1;
inline constexpr const char* kVersion = "1.0.0";

namespace code {
inline constexpr int ok = 0, error = 1, fail = 2, usage = 64;
}

/// Malformed flag values and config files; mapped to exit 64.
class UsageError : public Error {
public:
    using Error::Error;
};

// ---------------------------------------------------------------- parsing

inline std::vector<std::string> split(const std::string& s, char sep) {
    std::vector<std::string> out;
    std::string cur;
    for (char c : s) {
        if (c == sep) {
            out.push_back(cur);
            cur.clear();
        } else {
            cur += c;
        }
    }
    out.push_back(cur);
    return out;
}

inline std::string trim(const std::string& s) {
    const auto a = s.find_first_not_of(" \t\r");
    if (a == std::string::npos) return "";
    const auto b = s.find_last_not_of(" \t\r");
    return s.substr(a, b - a + 1);
}

inline double to_number(const std::string& text, const std::string& what) {
    const std::string t = trim(text);
    double v = 0;
    const auto [p, ec] = std::from_chars(t.data(), t.data() + t.size(), v);
    if (t.empty() || ec != std::errc() || p != t.data() + t.size())
        throw UsageError(what + ": expected a number, got '" + text + "'");
    return v;
}

inline std::vector<double> parse_list(const std::string& text, const std::string& what) {
    std::vector<double> out;
    for (const auto& part : split(text, ',')) out.push_back(to_number(part, what));
    return out;
}

/// "x,y[,z]" with exactly `count` coordinates; an empty string is the origin.
inline Point parse_point(const std::string& text, int count, const std::string& what) {
    Point p{0, 0, 0};
    if (trim(text).empty()) return p;
    const auto v = parse_list(text, what);
    if (int(v.size()) != count)
        throw UsageError(what + ": expected " + std::to_string(count) + " coordinates, got '" + text + "'");
    for (int a = 0; a < count; ++a) p[a] = v[a];
    return p;
}

/// "ball:C:R", "cylinder:C:RHO" or "box:LO:HI" with comma-separated points.
/// An empty string is the unit ball at the origin.
inline Region parse_region(const std::string& text, int n) {
    if (trim(text).empty()) return Ball{{0, 0, 0}, 1.0};
    const auto parts = split(text, ':');
    if (parts.size() != 3) throw UsageError("region: expected KIND:POINT:VALUE, got '" + text + "'");
    if (parts[0] == "ball") {
        const double r = to_number(parts[2], "region radius");
        if (!(r > 0)) throw UsageError("region: radius must be positive");
        return Ball{parse_point(parts[1], n, "region centre"), r};
    }
    if (parts[0] == "cylinder") {
        const double r = to_number(parts[2], "region radius");
        if (!(r > 0)) throw UsageError("region: radius must be positive");
        return Cylinder{parse_point(parts[1], n, "region centre"), r, {0, 0, 0}};
    }
    if (parts[0] == "box") return Box{parse_point(parts[1], n, "box corner"), parse_point(parts[2], n, "box corner")};
    throw UsageError("region: unknown kind '" + parts[0] + "' (ball, cylinder, box)");
}

inline json point_json(const Point& p, int n) {
    json a = json::array();
    for (int i = 0; i < n; ++i) a.push_back(p[i]);
    return a;
}

inline std::string num(double v) { return json(v).dump(); }

// ---------------------------------------------------------------- fixtures

struct FixtureParams {
    double slope = 0.2, gamma = 0.01, rho = 0.5, eps = 0.05, period = 1.0, theta = 10.0;
    double coef = 0.002, kappa = 0.0, a = 0.01, rho0 = 1.0;
};

inline const std::vector<std::string>& fixture_names() {
    static const std::vector<std::string> names{"halfspace", "tilted-plane", "disk",    "ball",
                                                "disk-exterior", "ball-exterior", "step", "cosine",
                                                "cone",      "graph-flat",   "graph-quadratic", "graph-cone"};
    return names;
}

inline bool is_graph_fixture(const std::string& name) { return name.rfind("graph-", 0) == 0; }

inline std::string fixture_list() {
    std::string s;
    for (const auto& n : fixture_names()) s += (s.empty() ? "" : ", ") + n;
    return s;
}

inline VoxelSet voxel_fixture(const std::string& name, const Grid& g, const FixtureParams& p) {
    const double deg = std::numbers::pi / 180.0;
    if (name == "halfspace") return fixtures::halfspace(g, fixtures::unit_axis(g.n));
    if (name == "tilted-plane") return fixtures::tilted_plane(g, p.slope);
    if (name == "disk" || name == "ball") return fixtures::ball(g, {0, 0, 0}, p.rho);
    if (name == "disk-exterior" || name == "ball-exterior") return fixtures::ball_exterior(g, {0, 0, 0}, p.rho);
    if (name == "step") return fixtures::step(g, p.gamma);
    if (name == "cosine") return fixtures::cosine(g, p.eps, p.period);
    if (name == "cone") return fixtures::cone(g, p.theta * deg);
    throw Error("unknown fixture '" + name + "'; available: " + fixture_list());
}

/// Graph fixtures live on an (n-1)-dimensional base grid.
inline GraphFunction graph_fixture(const std::string& name, const Grid& base, const FixtureParams& p) {
    auto sq = [&](const Point& y) {
        double q = 0;
        for (int a = 0; a < base.n; ++a) q += y[a] * y[a];
        return q;
    };
    if (name == "graph-flat") return fixtures::graph(base, [&](const Point&) { return p.kappa; });
    if (name == "graph-quadratic") return fixtures::graph(base, [&](const Point& y) { return p.kappa + p.coef * sq(y); });
    if (name == "graph-cone")
        return fixtures::graph(base, [&](const Point& y) {
            return p.kappa + p.a * (std::sqrt(sq(y) + p.rho0 * p.rho0) - p.rho0);
        });
    throw Error("unknown fixture '" + name + "'; available: " + fixture_list());
}

/// Minimizer data: "plane:SLOPE", "halfspace", "cosine:EPS[:PERIOD]",
/// "cone:DEGREES", "step:GAMMA", "disk:RHO".
inline VoxelSet data_fixture(const std::string& spec, const Grid& g) {
    const auto parts = split(spec, ':');
    FixtureParams p;
    auto arg = [&](std::size_t i, const char* what) {
        if (parts.size() <= i) throw UsageError("data: '" + spec + "' needs a " + what);
        return to_number(parts[i], std::string("data ") + what);
    };
    const std::string& kind = parts[0];
    if (kind == "halfspace") return voxel_fixture("halfspace", g, p);
    if (kind == "plane") {
        p.slope = arg(1, "slope");
        return voxel_fixture("tilted-plane", g, p);
    }
    if (kind == "cosine") {
        p.eps = arg(1, "amplitude");
        if (parts.size() > 2) p.period = arg(2, "period");
        return voxel_fixture("cosine", g, p);
    }
    if (kind == "cone") {
        p.theta = arg(1, "angle");
        return voxel_fixture("cone", g, p);
    }
    if (kind == "step") {
        p.gamma = arg(1, "height");
        return voxel_fixture("step", g, p);
    }
    if (kind == "disk" || kind == "ball") {
        p.rho = arg(1, "radius");
        return voxel_fixture("disk", g, p);
    }
    throw UsageError("data: unknown kind '" + kind + "' (plane, halfspace, cosine, cone, step, disk)");
}

// ---------------------------------------------------------------- reports

struct Report {
    json result = json::object();
    bool checked = false;  // the command is a check with a PASS/FAIL verdict
    bool pass = true;
    std::vector<std::string> lines;  // human summary
    std::string csv;                 // table, written when --csv is given
};

inline std::string csv_table(const std::vector<std::string>& header, const std::vector<std::vector<double>>& rows) {
    std::string out;
    for (std::size_t i = 0; i < header.size(); ++i) out += (i ? "," : "") + header[i];
    out += "\n";
    for (const auto& r : rows) {
        for (std::size_t i = 0; i < r.size(); ++i) out += (i ? "," : "") + num(r[i]);
        out += "\n";
    }
    return out;
}

inline void write_text(const std::string& path, const std::string& text) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw Error("cannot write '" + path + "'");
    f << text;
}

inline VoxelSet load_set(const std::string& path) { return nlsg::decode_voxels(nlsg::read_file(path)); }
inline GraphFunction load_graph(const std::string& path) { return nlsg::decode_graph(nlsg::read_file(path)); }

struct Outputs {
    bool json_stdout = false;
    std::string report;  // JSON report path
    std::string csv;
};

/// Echo of every option of a subcommand: given values, else defaults.
inline json echo_params(const CLI::App& sub) {
    static const std::set<std::string> skip{"help", "config", "json", "report", "csv"};
    json p = json::object();
    for (const CLI::Option* opt : sub.get_options()) {
        std::string name = opt->get_lnames().empty() ? opt->get_name() : opt->get_lnames()[0];
        if (skip.count(name)) continue;
        if (opt->get_expected_max() == 0) {
            p[name] = opt->count() > 0;
            continue;
        }
        std::string v;
        if (opt->count() > 0) {
            for (const auto& r : opt->results()) v += (v.empty() ? "" : ",") + r;
        } else {
            v = opt->get_default_str();
        }
        double d = 0;
        const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), d);
        if (!v.empty() && ec == std::errc() && ptr == v.data() + v.size())
            p[name] = d;
        else
            p[name] = v;
    }
    return p;
}

// ---------------------------------------------------------------- commands

struct GridOpts {
    int n = 2;
    long cells = 128;
    double half = 1.25;
    Grid make() const {
        if (n < 2 || n > 3) throw UsageError("--n must be 2 or 3");
        if (cells < 2) throw UsageError("--grid must be at least 2");
        if (!(half > 0)) throw UsageError("--half must be positive");
        return Grid::cube(n, -half, half, cells);
    }
};

inline void add_grid(CLI::App* sub, GridOpts& g) {
    sub->add_option("--n", g.n, "ambient dimension (2 or 3)")->capture_default_str();
    sub->add_option("--grid", g.cells, "cells per axis")->capture_default_str();
    sub->add_option("--half", g.half, "box half-width")->capture_default_str();
}

inline json curvature_json(const CurvatureReport& c) {
    return {{"raw_integral", c.raw_integral}, {"normalized", c.normalized}, {"r", c.r},
            {"s", c.s}, {"n", c.n}, {"quad_error_est", c.quad_error_est},
            {"x0", point_json(c.x0, c.n)}, {"region", c.region}, {"active_pairs", c.active_pairs}};
}

inline int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
    CLI::App app{"Numerical companion for nonlocal minimal surfaces"};
    app.set_version_flag("--version", std::string(kVersion));
    app.require_subcommand(1);
    app.allow_config_extras(CLI::config_extras_mode::error);

    std::map<std::string, std::function<Report()>> handlers;
    std::map<std::string, Outputs> outputs;
    std::map<std::string, std::string> config_paths;

    auto add = [&](const std::string& name, const std::string& desc, bool table) {
        CLI::App* sub = app.add_subcommand(name, desc);
        auto& o = outputs[name];
        sub->add_flag("--json", o.json_stdout, "print the JSON report instead of the summary");
        sub->add_option("--report", o.report, "write the JSON report to FILE");
        if (table) sub->add_option("--csv", o.csv, "write the table to FILE");
        sub->add_option("--config", config_paths[name], "key = value file; flags override it");
        return sub;
    };

    // energy
    struct {
        std::string set, omega, reg = "near-exact", out;
        double s = 0.5, cutoff = 0;
        int k = 4;
    } en;
    {
        auto* sub = add("energy", "J_s(E, Omega) with its three interaction terms", false);
        sub->add_option("--set", en.set, "voxel set (NLSG1)")->required();
        sub->add_option("--omega", en.omega, "ball:C:R | cylinder:C:RHO | box:LO:HI (default unit ball)");
        sub->add_option("--s", en.s, "order s in (0,1)")->capture_default_str();
        sub->add_option("--cutoff", en.cutoff, "far-field cutoff (0: four grid diameters)")->capture_default_str();
        sub->add_option("--regularization", en.reg, "near-exact | exclude-self | subcell-average")
            ->capture_default_str();
        sub->add_option("--k", en.k, "subcell-average subdivisions")->capture_default_str();
        sub->add_option("--out", en.out, "write the JSON report to FILE");
        handlers["energy"] = [&] {
            const auto E = load_set(en.set);
            KernelSpec k;
            k.n = E.grid.n;
            k.s = en.s;
            k.k = en.k;
            if (en.reg == "near-exact") k.regularization = KernelSpec::Regularization::near_exact;
            else if (en.reg == "exclude-self") k.regularization = KernelSpec::Regularization::exclude_self;
            else if (en.reg == "subcell-average") k.regularization = KernelSpec::Regularization::subcell_average;
            else throw UsageError("--regularization: unknown value '" + en.reg + "'");
            const double cutoff = en.cutoff > 0 ? en.cutoff : 4 * E.grid.diameter();
            const auto b = js_energy(E, parse_region(en.omega, E.grid.n), k, cutoff);
            Report r;
            r.result = {{"inside_inside", b.inside_inside}, {"inside_out", b.inside_out},
                        {"out_inside", b.out_inside},       {"total", b.total},
                        {"truncation_radius", b.truncation_radius}, {"tail_bound", b.tail_bound},
                        {"kernel", k.name()}};
            r.lines = {"total=" + num(b.total), "inside_inside=" + num(b.inside_inside),
                       "inside_out=" + num(b.inside_out), "out_inside=" + num(b.out_inside),
                       "tail_bound=" + num(b.tail_bound)};
            return r;
        };
    }

    // curvature
    struct {
        std::string set, point, region = "ball", out;
        double r = 0.45, s = 0.5;
    } cu;
    {
        auto* sub = add("curvature", "ball-truncated fractional curvature of a voxel set", false);
        sub->add_option("--set", cu.set, "voxel set (NLSG1)")->required();
        sub->add_option("--point", cu.point, "boundary point x0 (default origin)");
        sub->add_option("--r", cu.r, "truncation radius")->capture_default_str();
        sub->add_option("--s", cu.s, "order s in (0,1)")->capture_default_str();
        sub->add_option("--region", cu.region, "ball | cylinder")->capture_default_str();
        sub->add_option("--out", cu.out, "write the JSON report to FILE");
        handlers["curvature"] = [&] {
            const auto F = load_set(cu.set);
            CurvatureRegion reg = CurvatureRegion::ball;
            if (cu.region == "cylinder") reg = CurvatureRegion::cylinder;
            else if (cu.region != "ball") throw UsageError("--region: expected ball or cylinder");
            const auto c = frac_curvature(F, parse_point(cu.point, F.grid.n, "--point"), cu.r, cu.s, reg);
            Report r;
            r.result = curvature_json(c);
            r.lines = {"normalized=" + num(c.normalized), "raw_integral=" + num(c.raw_integral),
                       "quad_error_est=" + num(c.quad_error_est)};
            return r;
        };
    }

    // sweep-s
    struct {
        std::string shape = "circle:0.5", s = "0.8,0.9,0.95,0.99";
        int n = 2;
        double r = 0.45, h = 0;
    } sw;
    {
        auto* sub = add("sweep-s", "curvature of a smooth shape against its classical limit", true);
        sub->set_help_flag("--help", "print this help");  // frees -h for the step size
        sub->add_option("--shape", sw.shape, "halfspace | circle:RHO | sphere:RHO | paraboloid:LAMBDA")
            ->capture_default_str();
        sub->add_option("--n", sw.n, "ambient dimension")->capture_default_str();
        sub->add_option("--s", sw.s, "comma-separated orders")->capture_default_str();
        sub->add_option("--r", sw.r, "truncation radius")->capture_default_str();
        sub->add_option("--h", sw.h, "coarsest sampling step (0: r/16)")->capture_default_str();
        handlers["sweep-s"] = [&] {
            const auto t = convergence_study(CurvatureShape::parse(sw.shape, sw.n), parse_list(sw.s, "--s"), sw.r, sw.h);
            Report r;
            json rows = json::array();
            std::vector<std::vector<double>> table;
            for (const auto& row : t.rows) {
                rows.push_back({{"s", row.s}, {"h", row.h}, {"normalized", row.normalized},
                                {"classical", row.classical}, {"abs_error", row.abs_error}});
                table.push_back({row.s, row.normalized, row.classical, row.abs_error, row.h});
            }
            r.result = {{"shape", t.shape}, {"r", t.r}, {"h", t.h}, {"rows", rows}, {"A", t.A},
                        {"B", t.B}, {"A_refined", t.A_refined}, {"B_refined", t.B_refined}};
            r.csv = csv_table({"s", "normalized", "classical", "abs_error", "h"}, table);
            for (const auto& row : t.at(t.h))
                r.lines.push_back("s=" + num(row.s) + " normalized=" + num(row.normalized) +
                                  " abs_error=" + num(row.abs_error));
            r.lines.push_back("A=" + num(t.A) + " A_refined=" + num(t.A_refined));
            return r;
        };
    }

    // levelset / levelset-check share the level-set parameters
    struct LevelOpts {
        std::string set, side = "minus";
        double delta = 0.25, gamma = 0, r = 1.1, c = 1.0 / 16;
        LevelSetSpec spec() const {
            LevelSetSpec sp;
            sp.delta = delta;
            sp.side = parse_side(side);
            sp.gamma = gamma;
            sp.r = r;
            sp.c = c;
            return sp;
        }
    };
    auto add_level = [](CLI::App* sub, LevelOpts& o) {
        sub->add_option("--set", o.set, "voxel set (NLSG1)")->required();
        sub->add_option("--delta", o.delta, "distance level")->capture_default_str();
        sub->add_option("--side", o.side, "minus | plus")->capture_default_str();
        sub->add_option("--gamma", o.gamma, "trap flatness")->capture_default_str();
        sub->add_option("--r", o.r, "cylinder radius")->capture_default_str();
        sub->add_option("--c", o.c, "admissible gamma/delta threshold")->capture_default_str();
    };
    LevelOpts ls;
    std::string ls_out;
    {
        auto* sub = add("levelset", "the level set S^- or S^+ as a graph", false);
        add_level(sub, ls);
        sub->add_option("--out", ls_out, "write the graph (NLSG1)");
        handlers["levelset"] = [&] {
            const auto u = level_set_graph(load_set(ls.set), ls.spec());
            if (!ls_out.empty()) nlsg::write_file(ls_out, nlsg::encode(u));
            double lo = std::numeric_limits<double>::infinity(), hi = -lo;
            for (double v : u.values) lo = std::min(lo, v), hi = std::max(hi, v);
            Report r;
            r.result = {{"columns", u.values.size()}, {"lipschitz", lipschitz_estimate(u)}, {"min", lo}, {"max", hi}};
            r.lines = {"columns=" + std::to_string(u.values.size()), "lipschitz=" + num(lipschitz_estimate(u))};
            return r;
        };
    }
    LevelOpts lc;
    struct {
        std::string star;
        double mo = -1, C = 100;
    } lcx;
    {
        auto* sub = add("levelset-check", "Lipschitz bound, touching balls and separation", false);
        add_level(sub, lc);
        sub->add_option("--star", lcx.star, "comparison set E_star (NLSG1) for the separation bound");
        sub->add_option("--mo", lcx.mo, "Lipschitz constant of E_star (negative: estimate)")->capture_default_str();
        sub->add_option("--C", lcx.C, "constant of the Lipschitz bound")->capture_default_str();
        handlers["levelset-check"] = [&] {
            const auto E = load_set(lc.set);
            const auto spec = lc.spec();
            Report r;
            r.checked = true;
            const auto lip = lipschitz_bound_check(E, spec, lcx.C);
            r.result["lipschitz"] = {{"measured", lip.measured}, {"bound", lip.bound}, {"slack", lip.slack},
                                     {"pass", lip.pass}};
            const auto touch = paraboloid_touch_check(E, spec);
            r.result["touch"] = {{"points", touch.points.size()}, {"failures", touch.failures()},
                                 {"pass", touch.all_pass}};
            r.pass = lip.pass && touch.all_pass;
            r.lines = {"lipschitz=" + num(lip.measured) + " bound=" + num(lip.bound + lip.slack),
                       "touch_failures=" + std::to_string(touch.failures())};
            if (!lcx.star.empty()) {
                std::optional<double> mo;
                if (lcx.mo >= 0) mo = lcx.mo;
                const auto sep = separation_check(E, load_set(lcx.star), lc.gamma, lc.delta, mo);
                r.result["separation"] = {{"max_gap", sep.max_gap}, {"bound", sep.bound}, {"M_o", sep.M_o},
                                          {"min_order", sep.min_order}, {"pass", sep.pass}};
                r.pass = r.pass && sep.pass;
                r.lines.push_back("separation_gap=" + num(sep.max_gap) + " bound=" + num(sep.bound));
            }
            return r;
        };
    }

    // barrier-check
    struct {
        int n = 2;
        double s = 0.95, eps = 0.01, R = 1, q = 2, mu = 0, inner = 0, outer = 0, tilt = 0;
        std::size_t samples = 32;
    } bc;
    {
        auto* sub = add("barrier-check", "barrier properties and its curvature on the annulus", true);
        sub->add_option("--n", bc.n, "ambient dimension")->capture_default_str();
        sub->add_option("--s", bc.s, "order s")->capture_default_str();
        sub->add_option("--eps", bc.eps, "amplitude eps")->capture_default_str();
        sub->add_option("--R", bc.R, "scale R")->capture_default_str();
        sub->add_option("--q", bc.q, "tail exponent q")->capture_default_str();
        sub->add_option("--mu", bc.mu, "tail coefficient mu_q (0: smallest allowed)")->capture_default_str();
        sub->add_option("--samples", bc.samples, "annulus samples")->capture_default_str();
        sub->add_option("--inner", bc.inner, "innermost sample radius (0: default)")->capture_default_str();
        sub->add_option("--outer", bc.outer, "outermost sample radius (0: default)")->capture_default_str();
        sub->add_option("--tilt", bc.tilt, "slope of the affine L along x_1")->capture_default_str();
        handlers["barrier-check"] = [&] {
            auto b = BarrierSpec::standard(bc.n, bc.eps, bc.R, bc.q);
            if (bc.mu > 0) b.mu_q = bc.mu;
            const auto p = barrier_property_check(b);
            Affine L;
            L.slope[0] = bc.tilt;
            const auto c = barrier_curvature_check(b, L, bc.s, bc.samples, bc.inner, bc.outer);
            Report r;
            r.checked = true;
            r.pass = p.pass && c.pass;
            r.result["spec"] = {{"n", b.n}, {"R", b.R}, {"eps", b.eps}, {"q", b.q}, {"mu_q", b.mu_q},
                                {"c0", b.c0}, {"c1", b.c1}, {"c2", b.c2}, {"c3", b.c3}, {"c4", b.c4}, {"c5", b.c5}};
            r.result["properties"] = {{"sup_grad", p.sup_grad}, {"R_sup_hess", p.R_sup_hess},
                                      {"sup_abs", p.sup_abs}, {"C_report", p.C_report}, {"C_sup", p.C_sup},
                                      {"min_outside", p.min_outside}, {"max_inside", p.max_inside},
                                      {"outside_ok", p.outside_ok}, {"outside_weak_ok", p.outside_weak_ok},
                                      {"inside_ok", p.inside_ok}, {"bounds_ok", p.bounds_ok},
                                      {"monotone", p.monotone}, {"footnote_ok", p.footnote_ok}, {"pass", p.pass}};
            json samples = json::array();
            std::vector<std::vector<double>> table;
            for (const auto& q : c.samples) {
                samples.push_back({{"x", point_json(q.x, b.n)}, {"radius", q.radius}, {"value", q.value},
                                   {"classical", q.classical}, {"classical_bound", q.classical_bound},
                                   {"pass", q.pass}, {"classical_pass", q.classical_pass}});
                table.push_back({q.radius, q.value, q.classical, q.classical_bound, double(q.pass)});
            }
            r.result["curvature"] = {{"s", c.s}, {"threshold", c.threshold}, {"inner", c.inner},
                                     {"outer", c.outer}, {"passed", c.passed}, {"count", c.samples.size()},
                                     {"pass", c.pass}, {"samples", samples}};
            r.csv = csv_table({"radius", "value", "classical", "classical_bound", "pass"}, table);
            r.lines = {"properties=" + std::string(p.pass ? "PASS" : "FAIL"),
                       "curvature_samples_passed=" + std::to_string(c.passed) + "/" + std::to_string(c.samples.size()),
                       "threshold=" + num(c.threshold)};
            return r;
        };
    }

    // abp
    struct {
        std::string graph;
        MeasureEstimateConfig cfg;
    } ab;
    {
        auto* sub = add("abp", "measure estimate through the convex envelope", false);
        sub->add_option("--graph", ab.graph, "graph u (NLSG1)")->required();
        sub->add_option("--kappa", ab.cfg.kappa, "level kappa")->capture_default_str();
        sub->add_option("--R", ab.cfg.R, "scale R")->capture_default_str();
        sub->add_option("--eps", ab.cfg.eps, "eps")->capture_default_str();
        sub->add_option("--s", ab.cfg.s, "order s")->capture_default_str();
        sub->add_option("--Cbar", ab.cfg.Cbar, "Lipschitz bound")->capture_default_str();
        sub->add_option("--M", ab.cfg.M, "level multiplier M")->capture_default_str();
        sub->add_option("--mu", ab.cfg.mu, "required measure fraction mu")->capture_default_str();
        sub->add_option("--samples", ab.cfg.curvature_samples, "curvature samples")->capture_default_str();
        handlers["abp"] = [&] {
            const auto m = measure_estimate_check(load_graph(ab.graph), ab.cfg);
            Report r;
            r.checked = true;
            r.pass = m.pass;
            r.result = {{"lipschitz", m.lipschitz}, {"inf_Q3R", m.inf_Q3R}, {"max_curvature", m.max_curvature},
                        {"curvature_points", m.curvature_points}, {"fraction", m.fraction}, {"mu", m.mu},
                        {"M", m.M}, {"trap_holds", m.trap_holds}, {"touching", m.touching},
                        {"touching_outside", m.touching_outside}, {"m0", m.m0},
                        {"grad_image_measure", m.grad_image_measure}, {"pass", m.pass}};
            r.lines = {"fraction=" + num(m.fraction) + " mu=" + num(m.mu),
                       "trap_holds=" + std::string(m.trap_holds ? "true" : "false")};
            return r;
        };
    }

    // ring
    struct {
        std::string graph, plane, xbar;
        RingConfig cfg;
    } rg;
    {
        auto* sub = add("ring", "dyadic ring selection and quadratic detachment", true);
        sub->add_option("--graph", rg.graph, "graph u (NLSG1)")->required();
        sub->add_option("--plane", rg.plane, "touching function P (NLSG1, default: the constant u(xbar))");
        sub->add_option("--xbar", rg.xbar, "base point xbar' (default origin)");
        sub->add_option("--eps", rg.cfg.eps, "eps")->capture_default_str();
        sub->add_option("--R", rg.cfg.R, "scale R")->capture_default_str();
        sub->add_option("--s", rg.cfg.s, "order s")->capture_default_str();
        sub->add_option("--M", rg.cfg.M, "excess level M")->capture_default_str();
        sub->add_option("--Cbar", rg.cfg.Cbar, "Lipschitz bound")->capture_default_str();
        sub->add_option("--Co", rg.cfg.C_o, "selection constant (0: smallest guaranteed)")->capture_default_str();
        sub->add_option("--Cstar", rg.cfg.C_star, "PASS iff excess <= Cstar / M")->capture_default_str();
        sub->add_option("--m-max", rg.cfg.m_max, "deepest ring index")->capture_default_str();
        handlers["ring"] = [&] {
            const auto u = load_graph(rg.graph);
            // x' alone, or a full point (x', x_n) whose height is ignored
            const int given = trim(rg.xbar).empty() ? 0 : int(split(rg.xbar, ',').size());
            Point xb = parse_point(rg.xbar, given == u.base.n + 1 ? given : u.base.n, "--xbar");
            xb[u.base.n] = 0;
            GraphFunction P;
            if (rg.plane.empty()) {
                const double c = u(xb);
                P = GraphFunction(u.base, std::vector<double>(u.base.size(), c));
            } else {
                P = load_graph(rg.plane);
            }
            const auto d = ring_detachment(u, xb, P, rg.cfg);
            Report r;
            r.checked = true;
            r.pass = d.pass;
            r.result = {{"m_star", d.m_star}, {"r_m", d.r_m}, {"b_values", d.b_values},
                        {"thresholds", d.thresholds}, {"ring", {d.ring.first, d.ring.second}},
                        {"excess_fraction", d.excess_fraction}, {"M", d.M}, {"C_o", d.C_o},
                        {"C_star", d.C_star}, {"C_report", d.C_report}, {"curvature", d.curvature},
                        {"pass", d.pass}};
            std::vector<std::vector<double>> table;
            for (std::size_t m = 0; m < d.b_values.size(); ++m)
                table.push_back({double(m), d.r_m[m], d.b_values[m], d.thresholds[m]});
            r.csv = csv_table({"m", "r_m", "b_m", "threshold"}, table);
            r.lines = {"m_star=" + std::to_string(d.m_star), "excess_fraction=" + num(d.excess_fraction),
                       "limit=" + num(d.C_star / d.M)};
            return r;
        };
    }

    // minimize
    struct {
        std::string data = "plane:0", set, omega, mode = "graph", out, trace;
        GridOpts grid;
        MinimizeConfig cfg;
        std::size_t samples = 32;
        double residual_r = 0.25;
    } mn;
    {
        auto* sub = add("minimize", "descent for J_s with frozen exterior data", false);
        sub->add_option("--data", mn.data, "plane:SLOPE | halfspace | cosine:EPS[:PERIOD] | cone:DEG | step:G | disk:RHO")
            ->capture_default_str();
        sub->add_option("--set", mn.set, "start from a voxel set (NLSG1) instead of --data");
        add_grid(sub, mn.grid);
        sub->add_option("--omega", mn.omega, "region where cells may change (default unit ball)");
        sub->add_option("--s", mn.cfg.s, "order s")->capture_default_str();
        sub->add_option("--mode", mn.mode, "graph | voxel")->capture_default_str();
        sub->add_option("--max-sweeps", mn.cfg.max_sweeps, "sweep limit")->capture_default_str();
        sub->add_option("--tol", mn.cfg.tol_energy, "relative energy decrease that stops the descent")
            ->capture_default_str();
        sub->add_option("--seed", mn.cfg.sweep_order, "sweep order seed (0: lexicographic)")->capture_default_str();
        sub->add_option("--residual-samples", mn.samples, "Euler-Lagrange residual samples")->capture_default_str();
        sub->add_option("--residual-r", mn.residual_r, "residual ball radius")->capture_default_str();
        sub->add_option("--out", mn.out, "write the minimized set (NLSG1)");
        sub->add_option("--trace", mn.trace, "write the energy trace (CSV)");
        handlers["minimize"] = [&] {
            const VoxelSet E0 = mn.set.empty() ? data_fixture(mn.data, mn.grid.make()) : load_set(mn.set);
            MinimizeConfig cfg = mn.cfg;
            cfg.omega = parse_region(mn.omega, E0.grid.n);
            if (mn.mode == "graph") cfg.mode = MinimizeConfig::Mode::graph;
            else if (mn.mode == "voxel") cfg.mode = MinimizeConfig::Mode::voxel;
            else throw UsageError("--mode: expected graph or voxel");
            const auto res = minimize(E0, cfg);
            const auto el = el_residual(res.set, cfg, mn.samples, mn.residual_r);
            if (!mn.out.empty()) nlsg::write_file(mn.out, nlsg::encode(res.set));
            std::vector<std::vector<double>> rows;
            for (std::size_t t = 0; t < res.trace.size(); ++t) rows.push_back({double(t), res.trace[t]});
            if (!mn.trace.empty()) write_text(mn.trace, csv_table({"sweep", "energy"}, rows));
            std::size_t changed = 0;
            for (std::size_t k = 0; k < E0.occ.size(); ++k) changed += E0.occ[k] != res.set.occ[k];
            Report r;
            r.result = {{"sweeps", res.sweeps}, {"flips", res.flips}, {"changed_cells", changed},
                        {"converged", res.converged}, {"warning", res.warning},
                        {"initial_energy", res.initial_energy}, {"final_energy", res.final_energy},
                        {"tail_bound", res.tail_bound}, {"trace", res.trace}, {"h", E0.grid.h},
                        {"el_residual", {{"max_residual", el.max_residual}, {"mean_residual", el.mean_residual},
                                         {"sample_count", el.sample_count}, {"sign_violations", el.sign_violations},
                                         {"quad_tol", el.quad_tol}}}};
            r.lines = {"sweeps=" + std::to_string(res.sweeps) + " flips=" + std::to_string(res.flips),
                       "energy=" + num(res.initial_energy) + " -> " + num(res.final_energy),
                       "el_residual=" + num(el.max_residual)};
            if (res.warning) {
                r.result["warning_text"] = "max_sweeps reached before the energy settled";
                r.lines.push_back("warning: max_sweeps reached before the energy settled");
            }
            return r;
        };
    }

    // cone
    struct {
        double theta = 10;
        std::string s = "0.5,0.9";
        ConeConfig cfg;
    } co;
    {
        auto* sub = add("cone", "minimize with cone data and measure the deviation", true);
        sub->add_option("--theta", co.theta, "cone angle in degrees")->capture_default_str();
        sub->add_option("--s", co.s, "comma-separated orders")->capture_default_str();
        sub->add_option("--grid", co.cfg.cells, "cells per axis")->capture_default_str();
        sub->add_option("--half", co.cfg.half_box, "box half-width")->capture_default_str();
        sub->add_option("--omega-radius", co.cfg.omega_radius, "radius of Omega")->capture_default_str();
        sub->add_option("--probe", co.cfg.probe_radius, "deviation window |x_1| <= probe")->capture_default_str();
        sub->add_option("--max-sweeps", co.cfg.max_sweeps, "sweep limit")->capture_default_str();
        handlers["cone"] = [&] {
            const auto t = cone_experiment(co.theta * std::numbers::pi / 180.0, parse_list(co.s, "--s"), co.cfg);
            Report r;
            json rows = json::array();
            std::vector<std::vector<double>> table;
            for (const auto& row : t.rows) {
                rows.push_back({{"s", row.s}, {"h", row.h}, {"vertex_height", row.vertex_height},
                                {"cone_deviation", row.cone_deviation}, {"line_slope", row.line_slope},
                                {"line_deviation", row.line_deviation}, {"vertex_curvature", row.vertex_curvature},
                                {"pull_consistent", row.pull_consistent}, {"sweeps", row.sweeps},
                                {"converged", row.converged}});
                table.push_back({row.s, row.h, row.vertex_height, row.cone_deviation, row.line_deviation,
                                 row.vertex_curvature});
                r.lines.push_back("s=" + num(row.s) + " vertex_height=" + num(row.vertex_height) +
                                  " cone_deviation=" + num(row.cone_deviation));
            }
            r.result = {{"theta_degrees", co.theta}, {"rows", rows}};
            r.csv = csv_table({"s", "h", "vertex_height", "cone_deviation", "line_deviation", "vertex_curvature"}, table);
            return r;
        };
    }

    // flatness
    struct {
        std::string set;
        int K = 4;
        double alpha = 0.5, unit = 1, d = 0, mu = 0.5, M = 4;
    } fl;
    {
        auto* sub = add("flatness", "slab ladder hypotheses and the two one-sided conclusions", true);
        sub->add_option("--set", fl.set, "voxel set (NLSG1)")->required();
        sub->add_option("--K", fl.K, "level count")->capture_default_str();
        sub->add_option("--alpha", fl.alpha, "exponent alpha")->capture_default_str();
        sub->add_option("--unit", fl.unit, "physical length of one ladder unit")->capture_default_str();
        sub->add_option("--d", fl.d, "scale d (0: from the schedule)")->capture_default_str();
        sub->add_option("--mu", fl.mu, "schedule mu")->capture_default_str();
        sub->add_option("--M", fl.M, "schedule M")->capture_default_str();
        handlers["flatness"] = [&] {
            const double d = fl.d > 0 ? fl.d : improvement_schedule(fl.mu, fl.M).d;
            const auto f = flatness_ladder_check(load_set(fl.set), FlatnessLadder::make(fl.K, fl.alpha, fl.unit), d);
            Report r;
            r.checked = true;
            r.pass = f.pass;
            json levels = json::array();
            std::vector<std::vector<double>> table;
            const int n = load_set(fl.set).grid.n;
            for (const auto& lv : f.ladder.levels) {
                levels.push_back({{"i", lv.i}, {"radius", lv.radius}, {"nu", point_json(lv.nu, n)},
                                  {"half_width", lv.half_width}, {"required", lv.required}, {"pass", lv.pass}});
                table.push_back({double(lv.i), lv.radius, lv.half_width, lv.required, double(lv.pass)});
            }
            r.result = {{"K", f.ladder.K}, {"alpha", f.ladder.alpha}, {"a", f.ladder.a}, {"unit", f.ladder.unit},
                        {"slack", f.slack}, {"x51_width", f.x51_width}, {"x51_pass", f.x51_pass},
                        {"levels", levels}, {"levels_pass", f.levels_pass}, {"d", f.d}, {"d_points", f.d_points},
                        {"lower_branch", f.lower_branch}, {"upper_branch", f.upper_branch},
                        {"branch", f.branch()}, {"pass", f.pass}};
            r.csv = csv_table({"i", "radius", "half_width", "required", "pass"}, table);
            r.lines = {"a=" + num(f.ladder.a), "unit_slab=" + std::string(f.x51_pass ? "PASS" : "FAIL"),
                       "levels=" + std::string(f.levels_pass ? "PASS" : "FAIL"), "branch=" + f.branch()};
            return r;
        };
    }

    // schedule
    struct {
        double mu = 0, M = 0;
    } sc;
    {
        auto* sub = add("schedule", "k0 and d of the improvement schedule", false);
        sub->add_option("--mu", sc.mu, "measure fraction mu in (0,1)")->required();
        sub->add_option("--M", sc.M, "level multiplier M > 1")->required();
        handlers["schedule"] = [&] {
            const auto s = improvement_schedule(sc.mu, sc.M);
            Report r;
            const double inv = 1.0 / s.d;
            std::string dtext = num(s.d);
            if (std::abs(inv - std::round(inv)) <= 1e-9 * inv) dtext = "1/" + std::to_string(std::llround(inv));
            r.result = {{"mu", s.mu}, {"M", s.M}, {"k0", s.k0}, {"d", s.d}, {"d_text", dtext}};
            r.lines = {"k0=" + std::to_string(s.k0) + " d=" + dtext};
            return r;
        };
    }

    // gen-fixture
    struct {
        std::string name, out;
        GridOpts grid{2, 0, 0};
        FixtureParams p;
    } gf;
    {
        auto* sub = add("gen-fixture", "write a reference set or graph", false);
        sub->add_option("name", gf.name, "fixture: " + fixture_list())->required();
        sub->add_option("--out", gf.out, "output file (NLSG1)")->required();
        sub->add_option("--n", gf.grid.n, "ambient dimension")->capture_default_str();
        sub->add_option("--grid", gf.grid.cells, "cells per axis (0: 128, graphs 400)")->capture_default_str();
        sub->add_option("--half", gf.grid.half, "box half-width (0: 1.25, graphs 10)")->capture_default_str();
        sub->add_option("--slope", gf.p.slope, "tilted-plane slope")->capture_default_str();
        sub->add_option("--gamma", gf.p.gamma, "step height")->capture_default_str();
        sub->add_option("--rho", gf.p.rho, "disk radius")->capture_default_str();
        sub->add_option("--eps", gf.p.eps, "cosine amplitude")->capture_default_str();
        sub->add_option("--period", gf.p.period, "cosine period")->capture_default_str();
        sub->add_option("--theta", gf.p.theta, "cone angle in degrees")->capture_default_str();
        sub->add_option("--coef", gf.p.coef, "graph-quadratic coefficient")->capture_default_str();
        sub->add_option("--kappa", gf.p.kappa, "graph offset")->capture_default_str();
        sub->add_option("--a", gf.p.a, "graph-cone slope")->capture_default_str();
        sub->add_option("--rho0", gf.p.rho0, "graph-cone smoothing radius")->capture_default_str();
        handlers["gen-fixture"] = [&] {
            const bool graph = is_graph_fixture(gf.name);
            if (!graph && std::find(fixture_names().begin(), fixture_names().end(), gf.name) == fixture_names().end())
                throw Error("unknown fixture '" + gf.name + "'; available: " + fixture_list());
            GridOpts go = gf.grid;
            if (go.cells == 0) go.cells = graph ? 400 : 128;
            if (go.half == 0) go.half = graph ? 10.0 : 1.25;
            Report r;
            if (graph) {
                const Grid full = go.make();
                std::array<long, 3> dims{1, 1, 1};
                for (int a = 0; a < go.n - 1; ++a) dims[a] = go.cells;
                const Grid base(go.n - 1, dims, full.origin, full.h);
                const auto u = graph_fixture(gf.name, base, gf.p);
                nlsg::write_file(gf.out, nlsg::encode(u));
                r.result = {{"kind", "graph"}, {"columns", u.values.size()}, {"h", base.h}};
            } else {
                const auto E = voxel_fixture(gf.name, go.make(), gf.p);
                nlsg::write_file(gf.out, nlsg::encode(E));
                r.result = {{"kind", "voxels"}, {"cells", E.grid.size()}, {"occupied", E.count()}, {"h", E.grid.h},
                            {"exterior", E.exterior.name()}};
            }
            r.lines = {"wrote " + gf.out};
            return r;
        };
    }

    // ---- parse, with config files expanded into flags the command line did not set
    std::vector<std::string> args(argv + 1, argv + argc);
    CLI::App* active = nullptr;
    try {
        if (!args.empty()) {
            if (auto* sub = app.get_subcommand_no_throw(args[0])) {
                active = sub;
                std::string cfg;
                for (std::size_t i = 1; i < args.size(); ++i) {
                    if (args[i] == "--config" && i + 1 < args.size()) cfg = args[i + 1];
                    else if (args[i].rfind("--config=", 0) == 0) cfg = args[i].substr(9);
                }
                if (!cfg.empty()) {
                    std::ifstream f(cfg);
                    if (!f) throw UsageError("cannot read config '" + cfg + "'");
                    std::string line;
                    int lineno = 0;
                    std::vector<std::string> extra;
                    while (std::getline(f, line)) {
                        ++lineno;
                        const auto hash = line.find('#');
                        if (hash != std::string::npos) line = line.substr(0, hash);
                        if (trim(line).empty()) continue;
                        const auto eq = line.find('=');
                        if (eq == std::string::npos)
                            throw UsageError(cfg + ":" + std::to_string(lineno) + ": expected key = value");
                        const std::string key = trim(line.substr(0, eq)), val = trim(line.substr(eq + 1));
                        const CLI::Option* opt = key == "config" ? nullptr : sub->get_option_no_throw("--" + key);
                        if (!opt) throw UsageError(cfg + ":" + std::to_string(lineno) + ": unknown key '" + key + "'");
                        bool given = false;
                        for (const auto& a : args)
                            if (a == "--" + key || a.rfind("--" + key + "=", 0) == 0) given = true;
                        if (given) continue;
                        if (opt->get_expected_max() == 0) {
                            if (val == "true" || val == "1" || val == "yes") extra.push_back("--" + key);
                            else if (!(val == "false" || val == "0" || val == "no"))
                                throw UsageError(cfg + ":" + std::to_string(lineno) + ": '" + key + "' is a flag");
                        } else {
                            extra.push_back("--" + key);
                            extra.push_back(val);
                        }
                    }
                    args.insert(args.end(), extra.begin(), extra.end());
                }
            }
        }
        std::vector<const char*> cargv{argv[0]};
        for (const auto& a : args) cargv.push_back(a.c_str());
        app.parse(int(cargv.size()), cargv.data());
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e, out, err);
        if (rc == 0) return code::ok;
        err << (active ? active->help() : app.help());
        return code::usage;
    } catch (const UsageError& e) {
        err << "error: " << e.what() << "\n" << (active ? active->help() : app.help());
        return code::usage;
    }

    CLI::App* sub = app.get_subcommands().front();
    const std::string name = sub->get_name();
    const Outputs& o = outputs[name];
    json doc{{"schema_version", kSchemaVersion}, {"command", name}, {"version", kVersion},
             {"params", echo_params(*sub)}};
    int rc = code::ok;
    Report rep;
    try {
        rep = handlers.at(name)();
        rc = rep.checked && !rep.pass ? code::fail : code::ok;
        doc["status"] = rep.checked ? (rep.pass ? "PASS" : "FAIL") : "ok";
        doc["result"] = rep.result;
    } catch (const HypothesisError& e) {
        rc = code::fail;
        doc["status"] = "FAIL";
        doc["hypothesis"] = e.display();
        doc["message"] = e.what();
        rep.lines = {"FAIL: hypothesis (" + e.display() + ") does not hold", e.what()};
    } catch (const UsageError& e) {
        err << "error: " << e.what() << "\n" << sub->help();
        return code::usage;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << "\n";
        return code::error;
    }

    try {
        const std::string text = doc.dump(2) + "\n";
        // commands whose --out is a JSON report write it there as well
        std::string out_json;
        if (name == "energy") out_json = en.out;
        if (name == "curvature") out_json = cu.out;
        if (!out_json.empty()) write_text(out_json, text);
        if (!o.report.empty()) write_text(o.report, text);
        if (!o.csv.empty()) {
            if (rep.csv.empty()) throw Error("this run produced no table");
            write_text(o.csv, rep.csv);
        }
        if (o.json_stdout) {
            out << text;
        } else {
            for (const auto& l : rep.lines) out << l << "\n";
            if (rep.checked || doc["status"] == "FAIL") out << doc["status"].get<std::string>() << "\n";
        }
    } catch (const std::exception& e) {
        err << "error: " << e.what() << "\n";
        return code::error;
    }
    return rc;
}

}  // namespace fracmin::cli
