#include <gtest/gtest.h>

#include <random>

#include "fracmin/fixtures.hpp"
#include "fracmin/geometry.hpp"
#include "fracmin/nlsg.hpp"

using namespace fracmin;

TEST(ProjectTangent, Examples) {
    const Point a = project_tangent({1, 1, 0}, {0, 1, 0});
    EXPECT_DOUBLE_EQ(a[0], 1);
    EXPECT_DOUBLE_EQ(a[1], 0);
    const Point b = project_tangent({2, 0, 0}, {0, 1, 0});
    EXPECT_DOUBLE_EQ(b[0], 2);
    EXPECT_DOUBLE_EQ(b[1], 0);
    const Point c = project_tangent({1, 1, 1}, {1, 0, 0});
    EXPECT_DOUBLE_EQ(c[0], 0);
    EXPECT_DOUBLE_EQ(c[1], 1);
    EXPECT_DOUBLE_EQ(c[2], 1);
    EXPECT_THROW(project_tangent({1, 1, 0}, {0, 2, 0}), Error);
}

TEST(ProjectTangent, LinearIdempotentContracting) {
    std::mt19937_64 rng(7);
    std::normal_distribution<double> N;
    for (int t = 0; t < 200; ++t) {
        Point nu{N(rng), N(rng), N(rng)};
        nu = (1.0 / norm(nu)) * nu;
        const Point x{N(rng), N(rng), N(rng)}, y{N(rng), N(rng), N(rng)};
        const Point px = project_tangent(x, nu);
        EXPECT_NEAR(dot(px, nu), 0.0, 1e-12);
        const Point ppx = project_tangent(px, nu);
        for (int a = 0; a < 3; ++a) EXPECT_NEAR(ppx[a], px[a], 1e-12);
        EXPECT_LE(norm(px), norm(x) + 1e-12);
        const Point lin = project_tangent(x + 2.0 * y, nu) - (px + 2.0 * project_tangent(y, nu));
        EXPECT_LT(norm(lin), 1e-12);
    }
}

TEST(SignedDistance, Examples) {
    const Grid g = Grid::cube(2, -1, 1, 80);
    const double h = g.h;
    const auto half = fixtures::halfspace(g, {0, 1, 0});
    EXPECT_NEAR(signed_distance(half)({0, 0.3, 0}), 0.3, h);

    // odd cell count: the query point is a cell centre
    const Grid odd = Grid::cube(2, -1, 1, 81);
    const auto disk = fixtures::ball(odd, {0, 0, 0}, 0.5);
    EXPECT_NEAR(signed_distance(disk)({0, 0, 0}), -0.5, odd.h);

    const Grid fine = Grid::cube(2, -1, 1, 400);
    const auto st = fixtures::step(fine, 0.02);
    EXPECT_NEAR(signed_distance(st)({0.5, 0, 0}), -0.02, fine.h);
}

TEST(SignedDistance, DegenerateSetsThrow) {
    const Grid g = Grid::cube(2, -1, 1, 8);
    VoxelSet E(g, ExteriorRule::empty());
    EXPECT_THROW(signed_distance(E), Error);
    for (auto& v : E.occ) v = 1;
    EXPECT_THROW(signed_distance(E), Error);
}

// Brute force: distance from each centre to the nearest closed cell of the
// opposite label, with the exterior rule supplying ghost cells.
TEST(SignedDistance, MatchesBruteForce) {
    const Grid g = Grid::cube(2, -1, 1, 24);
    std::mt19937_64 rng(3);
    std::bernoulli_distribution coin(0.3);
    VoxelSet E(g, ExteriorRule::halfspace({0, 1, 0}, 0.1));
    for (auto& v : E.occ) v = coin(rng);
    const auto sd = signed_distance(E, 6);
    const long m = 6;
    for (std::size_t k = 0; k < g.size(); ++k) {
        const Index i = g.unflat(k);
        const Point c = g.center(i);
        double best = 1e300;
        for (long a = -m; a < g.dims[0] + m; ++a)
            for (long b = -m; b < g.dims[1] + m; ++b) {
                if (E.at(Index{a, b, 0}) == E.at(k)) continue;
                double d2 = 0;
                const std::array<long, 2> lo{a, b};
                for (int ax = 0; ax < 2; ++ax) {
                    const double l = g.origin[ax] + lo[ax] * g.h, u = l + g.h;
                    const double gap = std::max({0.0, l - c[ax], c[ax] - u});
                    d2 += gap * gap;
                }
                best = std::min(best, std::sqrt(d2));
            }
        const double expect = E.at(k) ? -best : best;
        EXPECT_NEAR(sd.values[k], expect, 1e-12) << "cell " << k;
    }
}

TEST(SignedDistance, ComplementFlipsSign) {
    const Grid g = Grid::cube(2, -1, 1, 40);
    const auto E = fixtures::ball(g, {0.1, -0.2, 0}, 0.45);
    const auto a = signed_distance(E), b = signed_distance(E.complement());
    for (std::size_t k = 0; k < g.size(); ++k) EXPECT_DOUBLE_EQ(a.values[k], -b.values[k]);
}

TEST(SignedDistance, DiscreteLipschitz) {
    const Grid g = Grid::cube(3, -1, 1, 20);
    const auto E = fixtures::ball(g, {0, 0, 0.1}, 0.6);
    const auto d = signed_distance(E);
    for (std::size_t k = 0; k < g.size(); ++k) {
        const Index i = g.unflat(k);
        for (const auto& off : face_neighbours(3)) {
            const Index j = i + off;
            if (!g.in_range(j)) continue;
            EXPECT_LE(std::abs(d.at(i) - d.at(j)), g.h + 2 * g.h * std::sqrt(3.0));
        }
    }
}

TEST(SlabFit, Examples) {
    const Grid g = Grid::cube(2, -1.2, 1.2, 120);
    const Ball b1{{0, 0, 0}, 1.0};
    const auto flat = slab_fit(fixtures::halfspace(g, {0, 1, 0}), b1);
    EXPECT_LE(flat.half_width, g.h);
    EXPECT_NEAR(std::abs(flat.nu[1]), 1.0, 1e-3);

    const auto tilt = slab_fit(fixtures::tilted_plane(g, 0.1), b1);
    EXPECT_LE(tilt.half_width, g.h);
    const double expect = 1.0 / std::sqrt(1.01);
    EXPECT_NEAR(tilt.nu[1], expect, 0.02);

    const Grid fine = Grid::cube(2, -1.2, 1.2, 480);
    const auto cos = slab_fit(fixtures::cosine(fine, 0.05), b1);
    EXPECT_GE(cos.half_width, 0.04);
    EXPECT_LE(cos.half_width, 0.06);
    EXPECT_NEAR(norm(cos.nu), 1.0, 1e-12);
}

TEST(SlabFit, MonotoneInRadius) {
    const Grid g = Grid::cube(2, -1.2, 1.2, 160);
    const auto E = fixtures::cosine(g, 0.05, 1.7);
    double prev = 0;
    for (double r : {0.2, 0.4, 0.6, 0.8, 1.0}) {
        const double w = slab_fit(E, Ball{{0, 0, 0}, r}).half_width;
        EXPECT_GE(w, prev - 1e-9);
        prev = w;
    }
}

TEST(SlabFit, EmptyBoundaryThrows) {
    const Grid g = Grid::cube(2, -1, 1, 20);
    const auto E = fixtures::halfspace(g, {0, 1, 0}, -0.8);
    EXPECT_THROW(slab_fit(E, Ball{{0, 0.5, 0}, 0.2}), Error);
}

TEST(Lipschitz, Examples) {
    const Grid base(1, {100, 1, 1}, {-1, 0, 0}, 0.02);
    EXPECT_DOUBLE_EQ(lipschitz_estimate(fixtures::graph(base, [](const Point&) { return 0.7; })), 0.0);
    EXPECT_NEAR(lipschitz_estimate(fixtures::graph(base, [](const Point& x) { return 0.3 * x[0]; })), 0.3, 1e-12);
}

TEST(Lipschitz, AffineShift) {
    const Grid base(2, {40, 40, 1}, {-1, -1, 0}, 0.05);
    auto u = [](const Point& x) { return 0.2 * std::sin(3 * x[0]) * std::cos(2 * x[1]); };
    const double L = lipschitz_estimate(fixtures::graph(base, u));
    const double slope = 0.45;
    const double L2 = lipschitz_estimate(fixtures::graph(base, [&](const Point& x) { return u(x) + slope * x[1]; }));
    EXPECT_LE(std::abs(L2 - L), slope + 1e-12);
}

TEST(Normalize, RemovesIsolatedCells) {
    const Grid g = Grid::cube(2, -1, 1, 10);
    auto E = fixtures::halfspace(g, {0, 1, 0});
    const Index lone{2, 8, 0};
    E.occ[g.flat(lone)] = 1;
    const Index hole{5, 1, 0};
    E.occ[g.flat(hole)] = 0;
    EXPECT_EQ(normalize(E), 2u);
    EXPECT_FALSE(E.at(lone));
    EXPECT_TRUE(E.at(hole));
}

TEST(Nlsg, RoundTrip) {
    const Grid g(2, {13, 7, 1}, {-0.5, 0.25, 0}, 0.125);
    std::mt19937_64 rng(11);
    std::bernoulli_distribution coin(0.5);
    VoxelSet E(g, ExteriorRule::halfspace({0.6, 0.8, 0}, 0.1));
    for (auto& v : E.occ) v = coin(rng);
    const auto back = nlsg::decode_voxels(nlsg::encode(E));
    EXPECT_TRUE(back.grid.same_as(g));
    EXPECT_EQ(back.occ, E.occ);
    EXPECT_EQ(back.exterior.name(), "halfspace");
    EXPECT_DOUBLE_EQ(back.exterior.offset, 0.1);

    const Grid base(1, {9, 1, 1}, {0, 0, 0}, 0.1);
    auto u = fixtures::graph(base, [](const Point& x) { return x[0] * x[0]; });
    u.lipschitz_hint = 2.0;
    const auto ub = nlsg::decode_graph(nlsg::encode(u));
    EXPECT_EQ(ub.values, u.values);
    EXPECT_DOUBLE_EQ(*ub.lipschitz_hint, 2.0);

    const auto cone = fixtures::cone(Grid::cube(2, -1, 1, 8), 0.3).complement();
    EXPECT_EQ(nlsg::decode_voxels(nlsg::encode(cone)).exterior.name(), "complement-cone");
}

TEST(Nlsg, MalformedInput) {
    EXPECT_THROW(nlsg::decode_voxels("no newline"), Error);
    EXPECT_THROW(nlsg::decode_voxels("{\"magic\":\"XX\"}\n"), Error);
    const Grid g = Grid::cube(2, 0, 1, 4);
    std::string bytes = nlsg::encode(VoxelSet(g, ExteriorRule::empty()));
    bytes.pop_back();
    EXPECT_THROW(nlsg::decode_voxels(bytes), Error);
}
