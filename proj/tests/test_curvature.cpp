#include <gtest/gtest.h>

#include "fracmin/curvature.hpp"
#include "fracmin/fixtures.hpp"

using namespace fracmin;

namespace {

Point on_circle(Point c, double rho, double angle) {
    return Point{c[0] + rho * std::cos(angle), c[1] + rho * std::sin(angle), 0};
}

}  // namespace

TEST(Varpi, Constants) {
    EXPECT_EQ(varpi(2), 2.0);
    EXPECT_DOUBLE_EQ(varpi(3), 2 * std::numbers::pi);
    EXPECT_DOUBLE_EQ(varpi(4), 4 * std::numbers::pi);
    EXPECT_THROW(varpi(5), Error);
    EXPECT_THROW(varpi(1), Error);
}

TEST(Gs, ClosedForms) {
    EXPECT_EQ(gs(0.0, 2.5), 0.0);
    EXPECT_NEAR(gs(1.0, 2.0), std::numbers::pi / 4, 1e-10);
    EXPECT_NEAR(gs(1.0, 3.0), 1 / std::sqrt(2.0), 1e-10);
    EXPECT_NEAR(gs(3.0, 3.0), 3 / std::sqrt(10.0), 1e-10);
    EXPECT_NEAR(gs(1e-6, 2.9) / 1e-6, 1.0, 1e-9);
    EXPECT_THROW(gs(1.0, 1.0), Error);
}

TEST(Gs, OddIncreasingBounded) {
    for (double p : {2.3, 2.99, 3.5}) {
        const GsTable G(p);
        const double cap = gs(1e6, p);
        double prev = -1e300;
        for (double t = -20; t <= 20; t += 0.37) {
            const double v = gs(t, p);
            EXPECT_EQ(v, -gs(-t, p));
            EXPECT_GT(v, prev);
            EXPECT_LE(std::abs(v), std::min(std::abs(t), cap) + 1e-12);
            EXPECT_NEAR(G(t), v, 1e-10);
            prev = v;
        }
    }
}

TEST(FracCurvature, HalfspaceCancels) {
    for (int n : {2, 3}) {
        const Grid g = Grid::cube(n, -0.5, 0.5, 128);
        const auto F = fixtures::halfspace(g, fixtures::unit_axis(n));
        for (double s : {0.3, 0.99}) {
            const auto rep = frac_curvature(F, Point{0.01, 0, 0}, 0.45, s);
            EXPECT_LE(std::abs(rep.normalized), 1e-3) << n << " " << s;
            EXPECT_EQ(rep.normalized, rep.raw_integral * normalization(n, s));
        }
    }
}

TEST(FracCurvature, ComplementNegatesExactly) {
    const Grid g = Grid::cube(2, -1, 1, 64);
    const auto F = fixtures::ball(g, {0.13, -0.07, 0}, 0.5);
    const Point x0 = on_circle({0.13, -0.07, 0}, 0.5, 0.5);
    const auto a = frac_curvature(F, x0, 0.4, 0.7);
    const auto b = frac_curvature(F.complement(), x0, 0.4, 0.7);
    EXPECT_EQ(a.raw_integral, -b.raw_integral);
    EXPECT_LT(a.raw_integral, 0.0);
}

TEST(FracCurvature, QuarterTurnInvariant) {
    const Grid g = Grid::cube(2, -1, 1, 64);
    const Point c{0.13, -0.07, 0}, rc{0.07, 0.13, 0};
    const auto F = fixtures::ball(g, c, 0.5), Fr = fixtures::ball(g, rc, 0.5);
    const Point x0 = on_circle(c, 0.5, 0.5), x0r = on_circle(rc, 0.5, 0.5 + 0.5 * std::numbers::pi);
    const auto a = frac_curvature(F, x0, 0.4, 0.7);
    const auto b = frac_curvature(Fr, x0r, 0.4, 0.7);
    EXPECT_NEAR(a.raw_integral, b.raw_integral, 1e-10 * std::abs(a.raw_integral));
    EXPECT_EQ(a.active_pairs, b.active_pairs);
}

TEST(FracCurvature, Preconditions) {
    const Grid g = Grid::cube(2, -0.5, 0.5, 64);
    const auto F = fixtures::halfspace(g, {0, 1, 0});
    EXPECT_THROW(frac_curvature(F, Point{0, 0.3, 0}, 0.2, 0.5), Error);
    EXPECT_THROW(frac_curvature(F, Point{0, 0, 0}, 0.6, 0.5), Error);
    EXPECT_THROW(frac_curvature(F, Point{0, 0, 0}, 0.2, 1.0), Error);
}

// The voxel evaluator against a separate implementation on the same set:
// the voxelized subgraph of y^2/2 is the subgraph of its column-height step
// function U, and over K_r the curvature integral of a subgraph reduces to
// 2 int G(U(y)/|y|) |y|^{1-p} dy, integrated here column by column.
TEST(FracCurvature, StaircaseMatchesReducedIntegral) {
    const double s = 0.9, r = 0.25, p = 2 + s;
    const Grid g = Grid::cube(2, -0.3, 0.3, 240);
    const auto F = VoxelSet::from_predicate(g, ExteriorRule::halfspace({0, 1, 0}, 0.0),
                                            [](const Point& x) { return x[1] < 0.5 * x[0] * x[0]; });
    const auto rep = frac_curvature(F, Point{0, 0, 0}, r, s, CurvatureRegion::cylinder);
    ASSERT_NEAR(rep.x0[0], 0.0, 1e-12);
    ASSERT_NEAR(rep.x0[1], 0.0, 1e-12);

    CompensatedSum oracle;
    for (long i = 0; i < g.dims[0]; ++i) {
        long count = 0;
        for (long j = 0; j < g.dims[1]; ++j) count += F.at(Index{i, j, 0});
        const double U = g.origin[1] + count * g.h;
        const double edge = g.origin[0] + i * g.h;
        const double lo = std::max(-r, edge), hi = std::min(r, edge + g.h);
        if (U == 0.0 || !(hi > lo)) continue;
        oracle += 2 * quad::adaptive([&](double y) { return gs(U / std::abs(y), p) * std::pow(std::abs(y), 1 - p); },
                                     lo, hi, 1e-13);
    }
    EXPECT_NEAR(rep.raw_integral / oracle.value(), 1.0, 1e-6);
}

TEST(BallExact, GraphEvaluatorAgrees) {
    for (double s : {0.3, 0.9, 0.99}) {
        const auto circle = graph_frac_curvature([](const Point& y) { return 0.5 - std::sqrt(0.25 - y[0] * y[0]); }, 2,
                                                 Point{0, 0, 0}, 0.45, s);
        const double exact = ball_curvature_exact(2, 0.5, 0.45, s, true);
        EXPECT_NEAR(circle.raw_integral / exact, 1.0, 1e-4) << s;

        const auto sphere = graph_frac_curvature(
            [](const Point& y) { return -0.5 + std::sqrt(std::max(0.0, 0.25 - y[0] * y[0] - y[1] * y[1])); }, 3,
            Point{0, 0, 0}, 0.45, s);
        EXPECT_NEAR(sphere.raw_integral / ball_curvature_exact(3, 0.5, 0.45, s, false), 1.0, 1e-4) << s;
    }
    EXPECT_EQ(ball_curvature_exact(2, 0.5, 0.45, 0.6, true), -ball_curvature_exact(2, 0.5, 0.45, 0.6, false));
}

// The exterior of the disk of radius 1/2 near its boundary: normalized
// curvature tends to 1/rho = 2 with an O(1-s) error.
TEST(BallExact, CircleLimit) {
    const double v = ball_curvature_exact(2, 0.5, 0.45, 0.99, true) * normalization(2, 0.99);
    EXPECT_NEAR(v, 2.0, 10 * 0.01);
    const double v3 = ball_curvature_exact(3, 0.5, 0.45, 0.999, true) * normalization(3, 0.999);
    EXPECT_NEAR(v3, 4.0, 10 * 0.001 * 2);
}

TEST(ClassicalCurvature, Examples) {
    const Grid b2(2, {40, 40, 1}, {-1, -1, 0}, 0.05);
    const auto affine = fixtures::graph(b2, [](const Point& y) { return 0.3 * y[0] - 0.7 * y[1] + 2; });
    EXPECT_NEAR(classical_mean_curvature(affine, {0.1, 0.2, 0}), 0.0, 1e-10);

    const double lambda = 1.3;
    const auto para = fixtures::graph(b2, [&](const Point& y) { return 0.5 * lambda * (y[0] * y[0] + y[1] * y[1]); });
    EXPECT_NEAR(classical_mean_curvature(para, {0, 0, 0}), 2 * lambda, 1e-8);

    const double rho = 0.8;
    const Grid fine(2, {64, 64, 1}, {-0.4, -0.4, 0}, 0.0125);
    const auto cup = fixtures::graph(fine, [&](const Point& y) { return rho - std::sqrt(rho * rho - y[0] * y[0] - y[1] * y[1]); });
    EXPECT_NEAR(classical_mean_curvature(cup, {0, 0, 0}), 2 / rho, 0.02 * 2 / rho);

    EXPECT_THROW(classical_mean_curvature(para, {-0.95, 0, 0}), Error);
}

TEST(GraphIntegral, ZeroOddAndTrapped) {
    const Grid b(1, {80, 1, 1}, {-0.5, 0, 0}, 0.0125);
    const auto zero = fixtures::graph(b, [](const Point&) { return 0.0; });
    EXPECT_EQ(graph_curvature_integral(zero, 0.25, 0.9), 0.0);

    const auto u = fixtures::graph(b, [](const Point& y) { return 0.5 * y[0] * y[0] + 0.3 * y[0] * y[0] * y[0]; });
    const auto v = fixtures::graph(b, [](const Point& y) { return -0.5 * y[0] * y[0] - 0.3 * y[0] * y[0] * y[0]; });
    const double a = graph_curvature_integral(u, 0.25, 0.9);
    EXPECT_GT(a, 0.0);
    EXPECT_NEAR(a, -graph_curvature_integral(v, 0.25, 0.9), 1e-12 * a);

    const auto steep = fixtures::graph(b, [](const Point& y) { return 8 * y[0] * y[0]; });
    EXPECT_THROW(graph_curvature_integral(steep, 0.25, 0.9), Error);
    const auto tilted = fixtures::graph(b, [](const Point& y) { return 0.2 * y[0]; });
    EXPECT_THROW(graph_curvature_integral(tilted, 0.25, 0.9), Error);
}

TEST(ConvergenceStudy, CircleLinearRate) {
    const auto tab = convergence_study(CurvatureShape::parse("circle:0.5", 2), {0.8, 0.9, 0.95, 0.99}, 0.45);
    const auto rows = tab.at(tab.h);
    ASSERT_EQ(rows.size(), 4u);
    for (std::size_t i = 1; i < rows.size(); ++i) EXPECT_LT(rows[i].abs_error, rows[i - 1].abs_error);
    for (const auto& row : rows) {
        EXPECT_EQ(row.classical, 2.0);
        EXPECT_LT(row.abs_error / (1 - row.s), 3.0);
    }
    EXPECT_GT(tab.A, 0.0);
    EXPECT_NEAR(tab.A_refined / tab.A, 1.0, 0.3);
}

TEST(ConvergenceStudy, HalfspaceAndParaboloid) {
    const auto flat = convergence_study(CurvatureShape::parse("halfspace", 2), {0.8, 0.99}, 0.45);
    for (const auto& row : flat.rows) EXPECT_LE(row.abs_error, 1e-10);
    EXPECT_NEAR(flat.A, 0.0, 1e-10);

    for (int n : {2, 3}) {
        const auto tab = convergence_study(CurvatureShape::parse("paraboloid:0.5", n), {0.8, 0.9, 0.95, 0.99}, 0.3);
        double lo = 1e300, hi = 0;
        for (const auto& row : tab.at(tab.h)) {
            EXPECT_DOUBLE_EQ(row.classical, 0.5 * (n - 1));
            lo = std::min(lo, row.abs_error / (1 - row.s));
            hi = std::max(hi, row.abs_error / (1 - row.s));
        }
        EXPECT_LT(hi / lo, 2.0);
        EXPECT_NEAR(tab.A_refined / tab.A, 1.0, 0.3);
    }
}

TEST(CurvatureShape, Parse) {
    EXPECT_EQ(CurvatureShape::parse("sphere:0.25", 3).classical(), 8.0);
    EXPECT_THROW(CurvatureShape::parse("circle:0.5", 3), Error);
    EXPECT_THROW(CurvatureShape::parse("torus:1", 2), Error);
    EXPECT_THROW(CurvatureShape::parse("circle:x", 2), Error);
    EXPECT_THROW(CurvatureShape::parse("circle:-1", 2), Error);
    EXPECT_THROW(convergence_study(CurvatureShape::parse("circle:0.3", 2), {0.9}, 0.45), Error);
}
