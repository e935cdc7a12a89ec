#include <gtest/gtest.h>

#include <sstream>

#include "contlab/dual.hpp"
#include "contlab/field_catalog.hpp"

using namespace contlab;

namespace {

TestFunction psi_bump() { return bump_test_function({0.25}, 0.5); }

MeasurePath atom_path(std::function<double(double)> x_of_t, std::size_t M = 1000) {
    std::vector<SignedMeasure> sl;
    for (std::size_t i = 0; i <= M; ++i) sl.push_back(SignedMeasure::dirac1(x_of_t(static_cast<double>(i) / M)));
    return MeasurePath(1.0, sl);
}

std::vector<Point> grid1(double a, double b, std::size_t n) {
    std::vector<Point> xs;
    for (double x : linspace(a, b, n)) xs.push_back({x});
    return xs;
}

}  // namespace

TEST(DualRadius, Formula) {
    EXPECT_DOUBLE_EQ(dual_support_radius(1.0, 0.0, 1.0), 1.0);
    EXPECT_NEAR(dual_support_radius(0.75, 1.0, 1.0), std::sqrt((0.5625 + 1.0) * std::exp(3.0)), 1e-12);
}

TEST(SolveDual, ConstantAndZeroFields) {
    auto psi = psi_bump();
    auto f = solve_dual(field_from_name("const:0.5"), psi, 1.0, 0.5, 0.0);
    for (double x : linspace(-1, 1, 21))
        for (double t : {0.0, 0.3, 1.0}) EXPECT_NEAR(f({x}, t), psi.value({x + 0.5 * (1 - t)}, 0), 1e-13);
    auto z = solve_dual(field_from_name("const:0"), psi, 1.0, 0.0, 0.0);
    for (double x : linspace(-1, 1, 21)) EXPECT_EQ(z({x}, 0.0), psi.value({x}, 0));
}

TEST(SolveDual, SqrtPairApproachesUpperValue) {
    auto psi = psi_bump();
    double prev = 1e9;
    for (double k : {10.0, 100.0, 1000.0, 10000.0}) {
        auto p = sqrt_pair(k);
        auto f = solve_dual(p, psi, 1.0);
        const double xk = flow_map(p.bk, {0.0}, 0.0, 1.0)[0];
        EXPECT_DOUBLE_EQ(f({0.0}, 0.0), psi.value({xk}, 0.0));
        const double gap = std::abs(f({0.0}, 0.0) - psi.value({0.25}, 0.0));
        EXPECT_LT(gap, prev);
        prev = gap;
    }
    EXPECT_LT(prev, 1e-3);
}

TEST(GradientBound, ZeroFieldEquality) {
    auto psi = psi_bump();
    auto f = solve_dual(field_from_name("const:0"), psi, 1.0, 0.0, 0.0);
    auto c = gradient_bound_check(f, [](const Point&) { return 1.0; }, grid1(-1, 1, 401), {0.0, 0.5});
    EXPECT_GE(c.margin, -1e-8);
    EXPECT_LT(c.margin, 1e-6);  // attained near the argmax of |psi'|
    EXPECT_NEAR(c.ratio_max, std::pow(M_PI / (2 * 0.5), 2), 1e-10);
    EXPECT_GE(c.max_principle, 0.0);
}

TEST(GradientBound, SqrtPairMargins) {
    auto p = sqrt_pair(100);
    auto f = solve_dual(p, psi_bump(), 1.0);
    auto c = gradient_bound_check(f, p.V, grid1(-2, 2, 201), linspace(0, 1, 5));
    EXPECT_GE(c.margin, -1e-6);
    EXPECT_GE(c.max_principle, 0.0);
    EXPECT_EQ(support_violation(f, linspace(0, 1, 11)), 0.0);
}

TEST(GradientBound, WrongWeightDetected) {
    auto p = sqrt_pair(100);
    auto f = solve_dual(p, psi_bump(), 1.0);
    auto c = gradient_bound_check(f, [](const Point&) { return 1e-3; }, grid1(-2, 2, 201), {0.0});
    EXPECT_LT(c.margin, 0.0);
}

TEST(CutoffDual, InactiveAndFrozen) {
    auto p = sqrt_pair(100);
    auto psi = psi_bump();
    auto f = solve_dual(p, psi, 1.0);
    auto wide = cutoff_dual(p.bk, psi, 1.0, CutoffProfile::at_scale(50.0), 0.5, p.C2, p.C1);
    auto one = cutoff_dual(p.bk, psi, 1.0, CutoffProfile::identically(1.0), 0.5, p.C2, p.C1);
    auto zero = cutoff_dual(p.bk, psi, 1.0, CutoffProfile::identically(0.0), 0.5, p.C2, p.C1);
    for (double x : linspace(-2, 2, 41))
        for (double t : {0.0, 0.5}) {
            EXPECT_NEAR(wide({x}, t), f({x}, t), 1e-10);
            EXPECT_NEAR(one({x}, t), f({x}, t), 1e-10);
            EXPECT_EQ(zero({x}, t), psi.value({x}, 0.0));
        }
    EXPECT_NEAR(wide.rate, p.C2 + std::pow(M_PI / 50.0, 2) / 0.5, 1e-15);
}

TEST(CutoffProfile, ConstantBoundsTheRatio) {
    auto z = CutoffProfile::at_scale(2.0);
    double sup = 0.0;
    for (double x : linspace(-5, 5, 20001)) {
        const double v = z.value({x});
        ASSERT_GE(v, 0.0);
        ASSERT_LE(v, 1.0);
        if (v > 0) {
            const double g = z.gradient({x})[0];
            sup = std::max(sup, g * g / v);
            EXPECT_LE(g * g / v, z.C() * (1 + 1e-12));
        }
    }
    EXPECT_NEAR(sup, z.C(), 1e-6);
    // gradient matches finite differences
    for (double x : {2.3, 3.1, 3.9, -2.7}) {
        const double h = 1e-6;
        EXPECT_NEAR(z.gradient({x})[0], (z.value({x + h}) - z.value({x - h})) / (2 * h), 1e-7);
    }
}

TEST(DualityGap, SharpExampleDoesNotExcludeNonUniqueness) {
    auto psi = psi_bump();
    auto b = field_from_name("sqrt_abs");
    auto diff = atom_path([](double t) { return t * t / 4; }) - atom_path([](double) { return 0.0; });
    for (double k : {10.0, 100.0, 1000.0, 10000.0}) {
        auto p = sqrt_pair(k, Box::interval(-12, 12));
        auto g = duality_gap(psi, 1.0, diff, b, p);
        EXPECT_NEAR(g.lhs, 0.5, 1e-12);
        EXPECT_LE(g.lhs, g.bound + 1e-9);
        EXPECT_GE(g.J_k, 1.0 - 1e-9);  // the stationary atom contributes T
    }
    auto p = sqrt_pair(100, Box::interval(-12, 12));
    auto same = atom_path([](double t) { return t * t / 4; });
    auto zero = duality_gap(psi, 1.0, same - same, b, p);
    EXPECT_EQ(zero.lhs, 0.0);
    EXPECT_LE(zero.lhs, zero.bound);
}

TEST(DualityGap, CertifiedPairShrinks) {
    auto psi = psi_bump();
    auto b = field_from_name("sqrt_abs");
    FlowConfig cfg{1e-3, 1.0, 1000};
    auto exact = atom_path([](double t) { return std::pow(std::sqrt(0.1) + t / 2, 2); });
    auto numeric = solve_atomic(b, SignedMeasure::dirac1(0.1), cfg);
    double prev = 1e9;
    for (double k : {10.0, 100.0, 1000.0, 10000.0}) {
        auto g = duality_gap(psi, 1.0, exact - numeric, b, sqrt_pair(k, Box::interval(-12, 12)));
        EXPECT_LE(g.lhs, g.bound + 1e-9);
        EXPECT_LT(g.bound, prev);
        prev = g.bound;
    }
    EXPECT_LT(prev, 0.05);
}

TEST(DualityGap, RegionTooSmall) {
    try {
        duality_gap(psi_bump(), 1.0, atom_path([](double) { return 0.0; }), field_from_name("sqrt_abs"), sqrt_pair(10));
        FAIL();
    } catch (const Error& e) {
        EXPECT_STREQ(e.what(), "pair region must contain the dual support radius 2R");
    }
}

TEST(DualConsistency, HolmgrenIdentityWithExactField) {
    auto psi = psi_bump();
    for (double k : {10.0, 1000.0}) {
        auto p = sqrt_pair(k);
        auto path = solve_atomic(p.bk, SignedMeasure::dirac1(0.0), FlowConfig{1e-3, 1.0, 100});
        auto f = solve_dual(p, psi, 1.0);
        const double lhs = integrate(path.slices().back(), [&](const Point& x) { return psi.value(x, 0.0); });
        const double rhs = f({0.0}, 0.0);
        EXPECT_NEAR(lhs, rhs, 1e-12);
    }
}

TEST(TailFunctional, Examples) {
    auto one = field_from_name("const:1");
    EXPECT_EQ(tail_functional(atom_path([](double) { return 0.3; }), one, 5.0), 0.0);
    const double N0 = 2.0;
    EXPECT_NEAR(tail_functional(atom_path([&](double) { return 1.5 * N0; }), one, N0), 1.0 / N0, 1e-12);
    for (double N : {1.0, 4.0}) {
        MeasurePath p(1.0, std::vector<SignedMeasure>(11, SignedMeasure::uniform(0, 3 * N, 1.0 / (3 * N))));
        EXPECT_NEAR(tail_functional(p, one, N), 1.0 / (3 * N), 1e-12);
    }
}

TEST(DualGridCsv, Header) {
    auto p = sqrt_pair(10);
    auto f = solve_dual(p, psi_bump(), 1.0);
    std::ostringstream os;
    write_dual_grid_csv(os, f, p.V, {0.0, 0.25}, {0.0, 1.0});
    const std::string s = os.str();
    EXPECT_EQ(s.rfind("x,t,f,grad_f_sq,rhs_bound\n", 0), 0u);
    EXPECT_EQ(std::count(s.begin(), s.end(), '\n'), 5);
    EXPECT_EQ(to_json(GapReport{}).size(), 7u);
}
