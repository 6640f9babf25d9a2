#include <gtest/gtest.h>

#include <random>

#include "fracmin/energy.hpp"
#include "fracmin/fixtures.hpp"

using namespace fracmin;

namespace {

KernelSpec kernel2(double s) { return KernelSpec{2, s}; }

// Tent integrals for unit cells at offsets (1,0) and (1,1); polar coordinates
// around the singular corner, scipy quad elsewhere.
constexpr double kAdjacent05 = 3.6470875155031424;
constexpr double kDiagonal05 = 0.6760083986859471;
constexpr double kAdjacent09 = 19.379525543386585;
constexpr double kHalfspaceJ05 = 25.600086093329026;

VoxelSet single(const Grid& g, Index i) {
    VoxelSet E(g, ExteriorRule::empty());
    E.occ[g.flat(i)] = 1;
    return E;
}

}  // namespace

TEST(Interaction, EmptyIsZero) {
    const Grid g = Grid::cube(2, 0, 1, 8);
    VoxelSet A(g, ExteriorRule::empty());
    const auto B = single(g, {3, 3, 0});
    EXPECT_EQ(interaction(A, B, kernel2(0.5)), 0.0);
}

TEST(Interaction, FarCellsFollowKernel) {
    const Grid g = Grid::cube(2, 0, 4, 40);
    const auto A = single(g, {2, 5, 0}), B = single(g, {32, 5, 0});
    const double d = 30 * g.h;
    const double expect = std::pow(g.h, 4) / std::pow(d, 2.5);
    EXPECT_NEAR(interaction(A, B, kernel2(0.5)) / expect, 1.0, 0.01);
}

// Reference value from an independent adaptive quadrature of the tent
// representation int T1(z1) T2(z2) |z|^{-5/2} dz (scipy dblquad, rel 1e-12).
TEST(Interaction, SeparatedBlocksMatchReference) {
    constexpr double kReference = 0.20328767214612797;
    const Grid g(2, {30, 10, 1}, {0, 0, 0}, 0.1);
    VoxelSet A(g, ExteriorRule::empty()), B(g, ExteriorRule::empty());
    for (std::size_t k = 0; k < g.size(); ++k) {
        const Point c = g.center(k);
        if (c[0] < 1) A.occ[k] = 1;
        if (c[0] > 2) B.occ[k] = 1;
    }
    for (auto reg : {KernelSpec::Regularization::near_exact, KernelSpec::Regularization::subcell_average}) {
        KernelSpec k = kernel2(0.5);
        k.regularization = reg;
        EXPECT_NEAR(interaction(A, B, k) / kReference, 1.0, 0.005) << k.name();
    }
}

// Adjacent unit cells: the near-field weight against an independent
// quadrature of the same tent integral.
TEST(PairWeights, AdjacentCellsMatchReference) {
    struct Case {
        double s;
        long dx, dy;
        double ref;
    };
    for (const Case& c : {Case{0.5, 1, 0, kAdjacent05}, Case{0.5, 1, 1, kDiagonal05},
                          Case{0.9, 1, 0, kAdjacent09}}) {
        const PairWeights w(kernel2(c.s), 1.0, {4, 4, 1});
        EXPECT_NEAR(w(c.dx, c.dy, 0) / c.ref, 1.0, 1e-8) << c.s << " " << c.dx << c.dy;
    }
}

TEST(Interaction, SymmetricPositiveAndDisjoint) {
    const Grid g = Grid::cube(2, -1, 1, 24);
    std::mt19937_64 rng(5);
    std::uniform_int_distribution<int> pick(0, 2);
    VoxelSet A(g, ExteriorRule::empty()), B(g, ExteriorRule::empty());
    for (std::size_t k = 0; k < g.size(); ++k) {
        const int p = pick(rng);
        A.occ[k] = p == 1;
        B.occ[k] = p == 2;
    }
    const auto K = kernel2(0.3);
    const double ab = interaction(A, B, K), ba = interaction(B, A, K);
    EXPECT_EQ(ab, ba);
    EXPECT_GT(ab, 0.0);
    B.occ[0] = A.occ[0] = 1;
    EXPECT_THROW(interaction(A, B, K), Error);
}

TEST(JsEnergy, FullSpaceIsZero) {
    const Grid g = Grid::cube(2, -1.25, 1.25, 40);
    VoxelSet E(g, ExteriorRule::full());
    for (auto& v : E.occ) v = 1;
    const auto b = js_energy(E, Ball{{0, 0, 0}, 1.0}, kernel2(0.5), 8.0);
    EXPECT_EQ(b.inside_inside, 0.0);
    EXPECT_EQ(b.inside_out, 0.0);
    EXPECT_EQ(b.out_inside, 0.0);
    EXPECT_EQ(b.total, 0.0);
}

TEST(JsEnergy, RejectsShortCutoff) {
    const Grid g = Grid::cube(2, -1.25, 1.25, 20);
    const auto E = fixtures::halfspace(g, {0, 1, 0});
    EXPECT_THROW(js_energy(E, Ball{{0, 0, 0}, 1.0}, kernel2(0.5), 1.0), Error);
}

TEST(JsEnergy, ComplementInvariance) {
    const Grid g = Grid::cube(2, -1.25, 1.25, 36);
    std::mt19937_64 rng(9);
    std::bernoulli_distribution coin(0.5);
    auto E = fixtures::halfspace(g, {0.6, 0.8, 0}, 0.1);
    for (std::size_t k = 0; k < g.size(); ++k)
        if (Ball{{0, 0, 0}, 0.7}.contains(g.center(k), 2)) E.occ[k] = coin(rng);
    const Ball omega{{0, 0, 0}, 1.0};
    const auto a = js_energy(E, omega, kernel2(0.4), 8.0);
    const auto b = js_energy(E.complement(), omega, kernel2(0.4), 8.0);
    EXPECT_NEAR(a.inside_inside, b.inside_inside, 1e-12 * a.total);
    EXPECT_NEAR(a.inside_out, b.out_inside, 1e-12 * a.total);
    EXPECT_NEAR(a.out_inside, b.inside_out, 1e-12 * a.total);
    EXPECT_NEAR(a.total, b.total, 1e-12 * a.total);

    const auto C = fixtures::cone(g, 0.4);
    const auto c1 = js_energy(C, omega, kernel2(0.4), 8.0);
    const auto c2 = js_energy(C.complement(), omega, kernel2(0.4), 8.0);
    EXPECT_NEAR(c1.total, c2.total, 1e-12 * c1.total);
}

// J_s({x_2 < 0}, B_1) for s = 1/2 via 2 int_{E n B_1} C t^{-s}/s - L(E n B_1, cE n B_1),
// integrated independently with scipy (ray integrals for the inner L).
TEST(JsEnergy, HalfspaceMatchesReference) {
    const Grid g = Grid::cube(2, -1.25, 1.25, 100);
    const auto E = fixtures::halfspace(g, {0, 1, 0});
    const auto b = js_energy(E, Ball{{0, 0, 0}, 1.0}, kernel2(0.5), 8.0);
    EXPECT_NEAR(b.total / kHalfspaceJ05, 1.0, 0.01);
    EXPECT_NEAR(b.total, b.inside_inside + b.inside_out + b.out_inside, 1e-12 * b.total);
    EXPECT_GE(b.inside_inside, 0.0);
    EXPECT_EQ(b.tail_bound, 0.0);
}

TEST(JsEnergy, ScalingLaw) {
    const double s = 0.5, lambda = 2.0;
    auto energy = [&](double scale) {
        const Grid g = Grid::cube(2, -1.25 * scale, 1.25 * scale, 60);
        const auto E = fixtures::ball(g, {0.1 * scale, 0, 0}, 0.6 * scale);
        return js_energy(E, Ball{{0, 0, 0}, scale}, kernel2(s), 8.0 * scale).total;
    };
    EXPECT_NEAR(energy(lambda) / energy(1.0), std::pow(lambda, 2 - s), 0.01 * std::pow(lambda, 2 - s));
}

TEST(FlipDelta, InvolutionAndOutsideOmega) {
    const Grid g = Grid::cube(2, -1.25, 1.25, 30);
    auto E = fixtures::halfspace(g, {0, 1, 0});
    const Ball omega{{0, 0, 0}, 1.0};
    const Index c{14, 16, 0};
    const double d1 = flip_delta(E, c, omega, kernel2(0.5));
    E.occ[g.flat(c)] ^= 1;
    const double d2 = flip_delta(E, c, omega, kernel2(0.5));
    EXPECT_NEAR(d1 + d2, 0.0, 1e-10 * std::abs(d1));
    EXPECT_THROW(flip_delta(E, Index{0, 0, 0}, omega, kernel2(0.5)), Error);
}

TEST(FlipDelta, EmptyOmegaSingleCell) {
    const Grid g = Grid::cube(2, -1.25, 1.25, 30);
    const VoxelSet E(g, ExteriorRule::empty());
    const Ball omega{{0, 0, 0}, 1.0};
    const Index c{15, 15, 0};
    const double d = flip_delta(E, c, omega, kernel2(0.5), 8.0);
    // J_s(empty) = 0 and E' = {cell} has no mass outside Omega.
    auto F = E;
    F.occ[g.flat(c)] = 1;
    const auto b = js_energy(F, omega, kernel2(0.5), 8.0);
    EXPECT_EQ(b.out_inside, 0.0);
    EXPECT_NEAR(d, b.total, 1e-10 * b.total);
    EXPECT_GT(d, 0.0);
}

TEST(FlipDelta, MatchesFullRecompute) {
    const Grid g = Grid::cube(2, -1.25, 1.25, 28);
    std::mt19937_64 rng(21);
    std::bernoulli_distribution coin(0.5);
    auto E = fixtures::halfspace(g, {0, 1, 0}, 0.05);
    const Ball omega{{0, 0, 0}, 1.0};
    for (std::size_t k = 0; k < g.size(); ++k)
        if (omega.contains(g.center(k), 2)) E.occ[k] = coin(rng);
    EnergyModel model(E, omega, kernel2(0.6), 8.0);
    const double base = model.evaluate(E).total;
    std::uniform_int_distribution<std::size_t> cell(0, model.omega_cells().size() - 1);
    for (int t = 0; t < 6; ++t) {
        const std::size_t k = model.omega_cells()[cell(rng)];
        const double d = model.flip_delta(E, k);
        auto F = E;
        F.occ[k] ^= 1;
        const double full = js_energy(F, omega, kernel2(0.6), 8.0).total - base;
        EXPECT_NEAR(d, full, 1e-10 * std::max(std::abs(d), 1e-3 * base));
    }
}

TEST(EnergyModel, FieldAgreesWithFlipDelta) {
    const Grid g = Grid::cube(2, -1.25, 1.25, 24);
    const auto E = fixtures::ball(g, {0.1, 0, 0}, 0.5);
    const Ball omega{{0, 0, 0}, 1.0};
    EnergyModel model(E, omega, kernel2(0.5), 8.0);
    const auto A = model.field(E);
    for (std::size_t t = 0; t < model.omega_cells().size(); t += 17) {
        const std::size_t k = model.omega_cells()[t];
        const double d = model.flip_delta(E, k);
        EXPECT_NEAR(E.at(k) ? A[k] : -A[k], d, 1e-12 * std::abs(d));
    }
}

TEST(EnergyModel, Deterministic) {
    const Grid g = Grid::cube(3, -1.25, 1.25, 14);
    const auto E = fixtures::ball(g, {0, 0, 0.1}, 0.6);
    const Ball omega{{0, 0, 0}, 1.0};
    KernelSpec k{3, 0.5};
    const auto a = js_energy(E, omega, k, 8.0), b = js_energy(E, omega, k, 8.0);
    EXPECT_EQ(a.total, b.total);
    EXPECT_GT(a.total, 0.0);
}
