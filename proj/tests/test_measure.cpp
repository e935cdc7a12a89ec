#include <gtest/gtest.h>

#include <random>

#include "contlab/measure.hpp"

using namespace contlab;

namespace {

SignedMeasure random_atomic(std::mt19937_64& rng, std::size_t n, double lo, double hi) {
    std::uniform_real_distribution<double> ux(lo, hi), uw(-1.0, 1.0);
    std::vector<Atom> at;
    for (std::size_t i = 0; i < n; ++i) at.push_back({{ux(rng)}, uw(rng)});
    return SignedMeasure(1, at);
}

}  // namespace

TEST(SignedMeasure, MergesCoincidentAtomsAndDropsZeros) {
    SignedMeasure m(1, {{{0.0}, 1.0}, {{0.0}, -1.0}, {{2.0}, 0.5}, {{1.0}, 0.25}, {{2.0}, 0.5}});
    ASSERT_EQ(m.atoms().size(), 2u);
    EXPECT_DOUBLE_EQ(m.atoms()[0].x[0], 1.0);
    EXPECT_DOUBLE_EQ(m.atoms()[1].w, 1.0);
}

TEST(SignedMeasure, RejectsNonFiniteWeights) {
    EXPECT_THROW(SignedMeasure(1, {{{0.0}, std::nan("")}}), Error);
    EXPECT_THROW(SignedMeasure(2, {}, {DensityPiece{{0, 1}, {1, 1}}}), Error);
}

TEST(TotalVariation, SingleAtom) {
    EXPECT_EQ(total_variation(SignedMeasure::dirac1(0.0), Box::interval(-1, 1)), 1.0);
}

TEST(TotalVariation, CancellationOnMerge) {
    SignedMeasure m = SignedMeasure::dirac1(0.0) - SignedMeasure::dirac1(0.0);
    EXPECT_TRUE(m.empty());
    EXPECT_EQ(total_variation(m, Box::interval(-1, 1)), 0.0);
}

TEST(TotalVariation, UniformDensityHalfRegion) {
    auto m = SignedMeasure(1, {}, {DensityPiece{linspace(0, 2, 9), std::vector<double>(9, 1.0)}});
    EXPECT_NEAR(total_variation(m, Box::interval(0, 1)), 1.0, 1e-15);
}

TEST(TotalVariation, SignChangingDensityIsExact) {
    // density x on [-1, 1]: |x| integrates to 1.
    auto m = SignedMeasure(1, {}, {DensityPiece{{-1, 1}, {-1, 1}}});
    EXPECT_NEAR(total_variation(m, Box::interval(-2, 2)), 1.0, 1e-15);
    EXPECT_NEAR(signed_mass(m, Box::interval(-2, 2)), 0.0, 1e-15);
    EXPECT_NEAR(m.abs().total_mass(), 1.0, 1e-15);
}

TEST(TotalVariation, UnboundedRegionRejected) {
    Box b{{-std::numeric_limits<double>::infinity()}, {1.0}};
    try {
        total_variation(SignedMeasure::dirac1(0.0), b);
        FAIL();
    } catch (const Error& e) {
        EXPECT_STREQ(e.what(), "region must be bounded");
    }
}

TEST(TotalVariation, AdditiveOverDisjointRegions) {
    std::mt19937_64 rng(3);
    for (int rep = 0; rep < 20; ++rep) {
        auto m = random_atomic(rng, 30, -2, 2) +
                 SignedMeasure(1, {}, {DensityPiece{linspace(-1.5, 1.7, 13),
                                                    {0.3, -0.2, 1, 2, -1, 0.5, 0.1, 0, 0, 0.7, -0.4, 0.2, 0.9}}});
        std::uniform_real_distribution<double> uc(-1.9, 1.9);
        const double c = uc(rng);
        // right piece is half-open so atoms on the cut are not double counted
        const double c2 = std::nextafter(c, 3.0);
        const double whole = total_variation(m, Box::interval(-2, 2));
        const double parts = total_variation(m, Box::interval(-2, c)) + total_variation(m, Box::interval(c2, 2));
        EXPECT_NEAR(whole, parts, 1e-12);
    }
}

TEST(Integrate, Examples) {
    EXPECT_DOUBLE_EQ(integrate(SignedMeasure::dirac1(0.7), [](const Point& x) { return x[0]; }), 0.7);
    auto two = SignedMeasure::dirac1(0.0) + SignedMeasure::dirac1(1.0);
    EXPECT_DOUBLE_EQ(integrate(two, [](const Point& x) { return x[0] * x[0]; }), 1.0);
    EXPECT_NEAR(integrate(SignedMeasure::uniform(0, 1), [](const Point& x) { return x[0]; }), 0.5, 1e-10);
}

TEST(Integrate, NonFiniteIntegrandRejected) {
    EXPECT_THROW(integrate(SignedMeasure::dirac1(0.0), [](const Point& x) { return 1.0 / x[0]; }), Error);
}

TEST(Integrate, SmoothIntegrandAgainstClosedForm) {
    auto m = SignedMeasure(1, {}, {DensityPiece{{0.0, 1.0, 3.0}, {0.0, 2.0, 2.0}}});
    // int_0^1 2x sin x dx + int_1^3 2 sin x dx
    const double exact = 2.0 * (std::sin(1.0) - std::cos(1.0)) + 2.0 * (std::cos(1.0) - std::cos(3.0));
    EXPECT_NEAR(integrate(m, [](const Point& x) { return std::sin(x[0]); }), exact, 1e-10);
}

TEST(Pushforward, Translation) {
    auto m = pushforward(SignedMeasure::dirac1(0.0, 2.5), [](const Point& x) { return Point{x[0] + 3}; });
    ASSERT_EQ(m.atoms().size(), 1u);
    EXPECT_EQ(m.atoms()[0].x[0], 3.0);
    EXPECT_EQ(m.atoms()[0].w, 2.5);
}

TEST(Pushforward, IdentityPreservesMeasure) {
    auto m = SignedMeasure(1, {{{0.5}, 1.0}}, {DensityPiece{{0, 1, 2}, {1, 3, 1}}});
    auto p = pushforward(m, [](const Point& x) { return x; });
    EXPECT_EQ(p.atoms().size(), 1u);
    EXPECT_NEAR(p.total_mass(), m.total_mass(), 1e-14);
    for (double x : linspace(-0.5, 2.5, 31)) EXPECT_NEAR(p.density_at(x), m.density_at(x), 1e-14);
}

TEST(Pushforward, DilationHalvesDensity) {
    auto p = pushforward(SignedMeasure::uniform(0, 1), [](const Point& x) { return Point{2 * x[0]}; });
    EXPECT_NEAR(p.total_mass(), 1.0, 1e-15);
    ASSERT_EQ(p.density().size(), 1u);
    EXPECT_DOUBLE_EQ(p.density()[0].lo(), 0.0);
    EXPECT_DOUBLE_EQ(p.density()[0].hi(), 2.0);
    for (double x : linspace(0, 2, 21)) EXPECT_NEAR(p.density_at(x), 0.5, 1e-14);
}

TEST(Pushforward, CellMassesPreservedForNonlinearMap) {
    auto grid = linspace(0.0, 1.0, 11);
    std::vector<double> vals;
    for (double x : grid) vals.push_back(1.0 + x * x);
    DensityPiece pc{grid, vals};
    auto map = [](const Point& x) { return Point{std::exp(x[0]) + 0.3 * x[0] * x[0]}; };
    auto p = pushforward(SignedMeasure(1, {}, {pc}), map);
    for (std::size_t i = 0; i + 1 < grid.size(); ++i) {
        const double mass_in = 0.5 * (grid[i + 1] - grid[i]) * (vals[i] + vals[i + 1]);
        const double a = map({grid[i]})[0], b = map({grid[i + 1]})[0];
        EXPECT_NEAR(signed_mass(p, Box::interval(a, b)), mass_in, 1e-14);
    }
}

TEST(Pushforward, DecreasingMapAllowed) {
    auto p = pushforward(SignedMeasure::uniform(0, 1), [](const Point& x) { return Point{-x[0]}; });
    EXPECT_NEAR(p.total_mass(), 1.0, 1e-15);
    EXPECT_NEAR(p.density_at(-0.5), 1.0, 1e-14);
}

TEST(Pushforward, NonMonotoneMapWithDensityRejected) {
    try {
        pushforward(SignedMeasure::uniform(-1, 1), [](const Point& x) { return Point{x[0] * x[0]}; });
        FAIL();
    } catch (const Error& e) {
        EXPECT_STREQ(e.what(), "density push-forward requires monotone map");
    }
}

TEST(Pushforward, PreservesAtomicMassOnRandomMaps) {
    std::mt19937_64 rng(11);
    for (int rep = 0; rep < 50; ++rep) {
        auto m = random_atomic(rng, 40, -3, 3);
        std::uniform_real_distribution<double> ua(-2, 2);
        const double a = ua(rng), b = ua(rng);
        auto p = pushforward(m, [&](const Point& x) { return Point{a * x[0] * x[0] + b * std::sin(x[0])}; });
        EXPECT_NEAR(p.atomic_mass(), m.atomic_mass(), 1e-14);
    }
}

TEST(Pushforward, MultidimensionalAtoms) {
    auto m = SignedMeasure::dirac({1.0, 2.0}, 0.5);
    auto p = pushforward(m, [](const Point& x) { return Point{x[1], -x[0]}; });
    EXPECT_EQ(p.atoms()[0].x, (Point{2.0, -1.0}));
    EXPECT_EQ(p.atoms()[0].w, 0.5);
}

// Brute-force oracle: exhaustive maximization over hat-basis test functions
// with values on a coarse lattice (exact for atoms on mesh nodes).
static double brute_flat(const std::vector<double>& s, int levels_per_unit) {
    const std::size_t n = s.size() - 1;
    const double h = 1.0 / levels_per_unit;
    double best = -1e300;
    std::vector<int> phi(n + 1, 0);
    std::function<void(std::size_t, double)> rec = [&](std::size_t j, double acc) {
        if (j == n) {
            if (phi[n - 1] >= -1 && phi[n - 1] <= 1) best = std::max(best, acc);
            return;
        }
        for (int d = -1; d <= 1; ++d) {
            const int v = phi[j - 1] + d;
            if (std::abs(v) > levels_per_unit) continue;
            phi[j] = v;
            rec(j + 1, acc + s[j] * v * h);
        }
    };
    rec(1, 0.0);
    return best;
}

TEST(BlDistance, Examples) {
    Box r = Box::interval(-1, 1);
    auto a = SignedMeasure::dirac1(0.0);
    EXPECT_EQ(bl_distance(a, a, r).value, 0.0);
    auto d2 = bl_distance(a, SignedMeasure::dirac1(0.0, 2.0), r);
    EXPECT_NEAR(d2.value, 1.0, d2.error_bound + 1e-12);
    auto d3 = bl_distance(a, SignedMeasure::dirac1(0.3), r);
    EXPECT_NEAR(d3.value, 0.3, d3.error_bound + 1e-12);
    EXPECT_EQ(d3.error_bound, 0.0);  // atomic: exact transport
}

TEST(BlDistance, MatchesExhaustiveSearchOnSmallMesh) {
    // atoms on a mesh with 8 cells over [0, 1]; h = 1/8 so phi levels are k/8.
    std::mt19937_64 rng(5);
    std::uniform_int_distribution<int> node(1, 7);
    std::uniform_real_distribution<double> uw(-1, 1);
    for (int rep = 0; rep < 20; ++rep) {
        std::vector<double> s(9, 0.0);
        std::vector<Atom> at;
        for (int i = 0; i < 4; ++i) {
            const int j = node(rng);
            const double w = uw(rng);
            s[j] += w;
            at.push_back({{j / 8.0}, w});
        }
        SignedMeasure m(1, at);
        auto d = bl_distance(m, SignedMeasure(1), Box::interval(0, 1), 1.0 / 8.0);
        EXPECT_NEAR(d.value, brute_flat(s, 8), 1e-12);
    }
}

TEST(BlDistance, DensityAgainstClosedForm) {
    // uniform on [0,1] vs delta at 0.5 on a wide region: W1 = 1/4.
    auto d = bl_distance(SignedMeasure::uniform(0, 1), SignedMeasure::dirac1(0.5), Box::interval(-3, 4));
    EXPECT_NEAR(d.value, 0.25, d.error_bound + 1e-12);
}

TEST(BlDistance, SymmetryAndTriangle) {
    std::mt19937_64 rng(17);
    Box r = Box::interval(-2, 2);
    for (int rep = 0; rep < 15; ++rep) {
        auto a = random_atomic(rng, 6, -1.5, 1.5);
        auto b = random_atomic(rng, 6, -1.5, 1.5);
        auto c = random_atomic(rng, 6, -1.5, 1.5);
        auto ab = bl_distance(a, b, r), ba = bl_distance(b, a, r);
        auto bc = bl_distance(b, c, r), ac = bl_distance(a, c, r);
        EXPECT_EQ(ab.value, ba.value);
        EXPECT_LE(ac.value, ab.value + bc.value + ab.error_bound + bc.error_bound + ac.error_bound);
    }
}

TEST(BlDistance, TwoDimensionalAtoms) {
    Box r = Box::cube(2, -2, 2);
    auto a = SignedMeasure::dirac({0.0, 0.0});
    auto b = SignedMeasure::dirac({0.3, 0.4});
    EXPECT_NEAR(bl_distance(a, b, r).value, 0.5, 1e-12);
    EXPECT_NEAR(bl_distance(a, a.scaled(2.0), r).value, 1.0, 1e-12);
    // Far apart: cheaper to send both to the boundary-free constant level.
    auto c = SignedMeasure::dirac({1.9, 0.0});
    auto e = SignedMeasure::dirac({-1.9, 0.0});
    EXPECT_NEAR(bl_distance(c, e, r).value, 0.2, 1e-12);
}

TEST(MeasurePath, PathIntegrateExamples) {
    std::vector<SignedMeasure> delta0(11, SignedMeasure::dirac1(0.0));
    MeasurePath p(1.0, delta0);
    EXPECT_NEAR(path_integrate(p, [](const Point&, double) { return 1.0; }, Box::interval(-1, 1)), 1.0, 1e-14);

    const std::size_t M = 1000;
    std::vector<SignedMeasure> sl;
    for (std::size_t i = 0; i <= M; ++i) {
        const double t = static_cast<double>(i) / M;
        sl.push_back(SignedMeasure::dirac1(t * t / 4));
    }
    MeasurePath q(1.0, sl);
    const double v = path_integrate(q, [](const Point& x, double) { return x[0]; }, Box::interval(-1, 1));
    EXPECT_NEAR(v, 1.0 / 12.0, 0.25 / M);
    // Simpson in time is exact for the quadratic.
    const double s = path_integrate(q, [](const Point& x, double) { return x[0]; }, Box::interval(-1, 1),
                                    TimeRule::Simpson);
    EXPECT_NEAR(s, 1.0 / 12.0, 1e-14);

    MeasurePath empty(1.0, std::vector<SignedMeasure>(5, SignedMeasure(1)));
    EXPECT_EQ(path_integrate(empty, [](const Point&, double) { return 1.0; }, Box::interval(-1, 1)), 0.0);
}

TEST(MeasurePath, PathIntegrateIsLinear) {
    std::mt19937_64 rng(23);
    std::vector<SignedMeasure> sl;
    for (int i = 0; i <= 20; ++i) sl.push_back(random_atomic(rng, 5, -1, 1));
    MeasurePath p(2.0, sl);
    Box r = Box::interval(-1, 1);
    auto u = [](const Point& x, double t) { return std::sin(3 * x[0]) + t; };
    auto v = [](const Point& x, double t) { return x[0] * x[0] * t; };
    std::uniform_real_distribution<double> uc(-3, 3);
    for (int rep = 0; rep < 10; ++rep) {
        const double a = uc(rng), b = uc(rng);
        const double lhs = path_integrate(p, [&](const Point& x, double t) { return a * u(x, t) + b * v(x, t); }, r);
        const double rhs = a * path_integrate(p, u, r) + b * path_integrate(p, v, r);
        EXPECT_NEAR(lhs, rhs, 1e-12);
    }
}

TEST(MeasurePath, TimeWindow) {
    std::vector<SignedMeasure> sl(5, SignedMeasure::dirac1(0.0));
    MeasurePath p(1.0, sl);
    EXPECT_NEAR(path_integrate(p, [](const Point&, double) { return 1.0; }, Box::interval(-1, 1),
                               TimeRule::LeftEndpoint, 0.5),
                0.5, 1e-15);
    EXPECT_THROW(p.index_of(0.3), Error);
}

TEST(TimeWeights, SimpsonVariantsIntegrateCubicsExactly) {
    for (std::size_t I : {2u, 3u, 4u, 5u, 7u, 10u}) {
        const double dt = 1.0 / static_cast<double>(I);
        auto w = time_weights(I, dt, TimeRule::Simpson);
        double s = 0.0;
        for (std::size_t i = 0; i <= I; ++i) {
            const double t = i * dt;
            s += w[i] * t * t * t;
        }
        EXPECT_NEAR(s, 0.25, 1e-14) << I;
    }
}

TEST(TestFunction, DerivativesMatchFiniteDifferences) {
    auto u = bump_test_function({0.3}, 0.8, 1.5, 0.4, 2.0, 0.3);
    EXPECT_LT(test_function_derivative_error(u, 1, 1.0), 1e-5);
    auto v = bump_test_function({0.3, -0.2}, 0.6, 1.0, 0.2, 1.0, 0.0);
    EXPECT_LT(test_function_derivative_error(v, 2, 1.0), 1e-5);
    EXPECT_EQ(u.value({2.0}, 0.0), 0.0);
}

TEST(TestFunction, LaplacianMatchesFiniteDifferences) {
    auto u = bump_test_function({0.1, 0.2}, 0.7);
    for (Point x : {Point{0.3, 0.1}, Point{0.0, 0.5}, Point{0.1, 0.2}}) {
        const double h = 1e-4;
        double fd = 0.0;
        for (std::size_t i = 0; i < 2; ++i) {
            Point p = x, m = x;
            p[i] += h;
            m[i] -= h;
            fd += (u.value(p, 0) - 2 * u.value(x, 0) + u.value(m, 0)) / (h * h);
        }
        EXPECT_NEAR(u.laplacian(x, 0), fd, 1e-5 * (1 + std::abs(fd)));
    }
}

TEST(Quantile, AtomsAndDensity) {
    EXPECT_DOUBLE_EQ(quantile(SignedMeasure::dirac1(0.25), 0.5), 0.25);
    EXPECT_NEAR(quantile(SignedMeasure::uniform(0, 2), 0.5), 1.0, 1e-14);
    auto tri = SignedMeasure(1, {}, {DensityPiece{{0, 1}, {0, 2}}});
    EXPECT_NEAR(quantile(tri, 0.5), std::sqrt(0.5), 1e-14);
}

TEST(Density, CanonicalSumOfOverlappingPieces) {
    auto m = SignedMeasure::uniform(0, 2) + SignedMeasure::uniform(1, 3);
    EXPECT_NEAR(m.total_mass(), 4.0, 1e-15);
    EXPECT_NEAR(m.density_at(1.5), 2.0, 1e-15);
    EXPECT_NEAR(m.density_at(0.5), 1.0, 1e-15);
    auto z = SignedMeasure::uniform(0, 1) - SignedMeasure::uniform(0, 1);
    EXPECT_TRUE(z.empty());
}

TEST(Density, RestrictionSplits) {
    auto m = SignedMeasure::uniform(-1, 2);
    EXPECT_NEAR(m.restricted(Box::interval(0, 1)).total_mass(), 1.0, 1e-15);
}
