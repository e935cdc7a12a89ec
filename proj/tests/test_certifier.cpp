#include <gtest/gtest.h>

#include <random>
#include <sstream>

#include "contlab/certificate.hpp"
#include "contlab/field_catalog.hpp"
#include "contlab/pairs.hpp"
#include "contlab/zero_set.hpp"

using namespace contlab;

namespace {

MeasurePath atom_path(std::function<double(double)> x_of_t, double T = 1.0, std::size_t M = 1000) {
    std::vector<SignedMeasure> sl;
    for (std::size_t i = 0; i <= M; ++i) sl.push_back(SignedMeasure::dirac1(x_of_t(T * static_cast<double>(i) / M)));
    return MeasurePath(T, sl);
}

std::vector<ApproximationPair> sqrt_pairs() {
    std::vector<ApproximationPair> ps;
    for (double k : {10.0, 100.0, 1000.0, 10000.0}) ps.push_back(sqrt_pair(k));
    return ps;
}

double vgrad_fd_error(const ApproximationPair& p, const std::vector<double>& xs) {
    double worst = 0.0;
    for (double x : xs) {
        const double h = 1e-6 * (1 + std::abs(x));
        const double fd = (p.V({x + h}) - p.V({x - h})) / (2 * h);
        const double g = p.gradV({x})[0];
        worst = std::max(worst, std::abs(fd - g) / std::max(1.0, std::abs(g)));
    }
    return worst;
}

}  // namespace

TEST(ZeroSet, SqrtHasIsolatedZero) {
    auto z = zero_set(field_from_name("sqrt_abs"), -1, 1, 1e-9);
    ASSERT_EQ(z.intervals.size(), 1u);
    EXPECT_EQ(z.intervals[0].lo, 0.0);
    EXPECT_EQ(z.intervals[0].hi, 0.0);
    ASSERT_EQ(z.boundary.size(), 1u);
    EXPECT_EQ(z.boundary[0], 0.0);
    EXPECT_TRUE(z.interior.empty());
}

TEST(ZeroSet, TouchingZeroOffGrid) {
    auto z = zero_set(field_from_name("sqrt_abs"), -1, 1.3, 1e-9);
    ASSERT_EQ(z.boundary.size(), 1u);
    EXPECT_NEAR(z.boundary[0], 0.0, 1e-15);
}

TEST(ZeroSet, RampTouchesWorkingEdge) {
    auto z = zero_set(field_from_name("ramp:1"), 0, 3);
    ASSERT_EQ(z.intervals.size(), 1u);
    EXPECT_EQ(z.intervals[0].lo, 0.0);
    EXPECT_NEAR(z.intervals[0].hi, 1.0, 1e-8);
    ASSERT_EQ(z.boundary.size(), 1u);
    EXPECT_NEAR(z.boundary[0], 1.0, 1e-8);
    ASSERT_EQ(z.interior.size(), 1u);
    EXPECT_TRUE(z.in_interior(0.0));
    EXPECT_TRUE(z.in_interior(0.5));
    EXPECT_FALSE(z.in_interior(z.boundary[0]));
}

TEST(ZeroSet, NonvanishingAndSignChange) {
    EXPECT_TRUE(zero_set(field_from_name("const:1"), -2, 2).empty());
    auto z = zero_set(field_from_name("linear:1"), -1, 1.37);
    ASSERT_EQ(z.boundary.size(), 1u);
    EXPECT_NEAR(z.boundary[0], 0.0, 1e-12);
    EXPECT_THROW(zero_set(field_from_name("const:1"), -1, 1, 0.0), Error);
}

TEST(ZeroSet, InteriorInterval) {
    auto b = VectorField::scalar([](double x, double) { return std::max(0.0, std::abs(x - 0.5) - 0.5); });
    auto z = zero_set(b, -2, 2);
    ASSERT_EQ(z.boundary.size(), 2u);
    EXPECT_NEAR(z.boundary[0], 0.0, 1e-8);
    EXPECT_NEAR(z.boundary[1], 1.0, 1e-8);
    EXPECT_TRUE(z.in_interior(0.5));
    EXPECT_FALSE(z.in_interior(1.5));
    // Z^0 union dZ = Z
    for (double x : linspace(-2, 2, 401))
        EXPECT_EQ(z.in_zero_set(x), z.in_interior(x) || std::abs(x - z.boundary[0]) < 1e-15 ||
                                        std::abs(x - z.boundary[1]) < 1e-15)
            << x;
}

TEST(SplitStationary, Examples) {
    auto zs = zero_set(field_from_name("sqrt_abs"), -1, 1, 1e-9);
    auto [nu0, rest] = split_stationary(SignedMeasure::dirac1(0.0), zs);
    EXPECT_TRUE(nu0.empty());
    EXPECT_EQ(rest.atoms().size(), 1u);

    ZeroSetInfo z;
    z.intervals = {{0.0, 1.0, false, false}};
    z.boundary = {0.0, 1.0};
    z.interior = {{0.0, 1.0, false, false}};
    auto [a0, ar] = split_stationary(SignedMeasure::dirac1(0.5), z);
    EXPECT_EQ(a0.atoms().size(), 1u);
    EXPECT_TRUE(ar.empty());

    auto u = SignedMeasure::uniform(-1, 2);
    auto [u0, ur] = split_stationary(u, z);
    EXPECT_NEAR(u0.total_mass(), 1.0, 1e-15);
    EXPECT_NEAR(ur.total_mass(), 2.0, 1e-15);
}

TEST(SplitStationary, RecombinationIsExact) {
    std::mt19937_64 rng(4);
    std::uniform_real_distribution<double> ux(-2, 3), uw(-1, 1);
    auto z = zero_set(VectorField::scalar([](double x, double) { return std::max(0.0, std::abs(x - 0.5) - 0.5); }), -3, 3);
    for (int rep = 0; rep < 10; ++rep) {
        std::vector<Atom> at;
        for (int i = 0; i < 8; ++i) at.push_back({{ux(rng)}, uw(rng)});
        at.push_back({{0.5}, 1.0});
        at.push_back({{z.boundary[0]}, 0.5});
        auto grid = linspace(-1.5, 2.5, 9);
        std::vector<double> vals;
        for (std::size_t i = 0; i < grid.size(); ++i) vals.push_back(uw(rng));
        SignedMeasure nu(1, at, {DensityPiece{grid, vals}});
        auto [n0, nr] = split_stationary(nu, z);
        auto sum = n0 + nr;
        ASSERT_EQ(sum.atoms().size(), nu.atoms().size());
        for (std::size_t i = 0; i < nu.atoms().size(); ++i) {
            EXPECT_EQ(sum.atoms()[i].x, nu.atoms()[i].x);
            EXPECT_EQ(sum.atoms()[i].w, nu.atoms()[i].w);
        }
        for (double x : grid) EXPECT_NEAR(sum.density_at(x), nu.density_at(x), 1e-15);
        for (std::size_t i = 0; i + 1 < grid.size(); ++i) {
            Box cell = Box::interval(grid[i], grid[i + 1]);
            EXPECT_NEAR(signed_mass(sum, cell) - sum.atomic_mass() * 0, signed_mass(nu, cell), 1e-14);
        }
        for (const auto& a : n0.atoms()) EXPECT_TRUE(z.in_interior(a.x[0]));
    }
}

TEST(SqrtPair, ClosedFormBounds) {
    auto b = field_from_name("sqrt_abs");
    for (double k : {10.0, 100.0, 1e4}) {
        auto p = sqrt_pair(k);
        EXPECT_DOUBLE_EQ(pair_gap(p, b, {0.0}), 1.0);
        for (double x : linspace(-2, 2, 1001)) {
            const double g = pair_gap(p, b, {x});
            EXPECT_LE(g, 1.0 + 1e-15);
            if (x != 0.0) { EXPECT_LE(g, 1.0 / std::sqrt(k * std::abs(x)) + 1e-15); }
        }
        EXPECT_LT(vgrad_fd_error(p, linspace(-2, 2, 97)), 1e-6);
    }
}

TEST(SqrtPair, ConditionsHoldWithZeroC2) {
    for (double k : {10.0, 1e4}) {
        auto p = sqrt_pair(k);
        auto m = check_conditions(p, region_samples(p.region));
        EXPECT_GE(m.growth, 0.0);
        EXPECT_TRUE(m.passes());
        EXPECT_GE(m.floor, 0.0);
        for (double x : linspace(-2, 2, 1001)) {
            const double lhs = p.bk.at(x) * p.gradV({x})[0] + 2 * p.bk.derivative(x) * p.V({x});
            EXPECT_LE(std::abs(lhs), 1e-10 * (1 + std::abs(p.bk.derivative(x) * p.V({x}))));
        }
    }
}

TEST(Corollary1, ConstantFieldsUseTrivialPair) {
    for (double c : {0.0, 1.0}) {
        auto p = corollary1_pair(field_from_name("const:" + std::to_string(c)), 100, Box::interval(-2, 2));
        EXPECT_EQ(p.recipe, "corollary1_constant");
        EXPECT_EQ(p.bk.at(0.7), c);
        EXPECT_EQ(p.V({0.7}), 1.0);
        EXPECT_TRUE(check_conditions(p, region_samples(p.region, 51)).passes());
    }
}

TEST(Corollary1, SqrtGapBoundAndIdentity) {
    auto b = field_from_name("sqrt_abs");
    for (double k : {10.0, 1000.0}) {
        auto p = corollary1_pair(b, k, Box::interval(-2, 2));
        const double omega = p.constants.at("omega");
        auto conv = mollify(b, k);
        for (double x : linspace(-2, 2, 201)) {
            const double g = pair_gap(p, b, {x});
            EXPECT_LE(g, 2.0 + 1e-12);
            if (b.at(x) > 0) { EXPECT_LE(g, 2 * omega / (conv.at(x) + omega) + 1e-12); }
            const double bk = p.bk.at(x), dbk = p.bk.derivative(x), V = p.V({x});
            EXPECT_LE(std::abs(bk * p.gradV({x})[0] + 2 * dbk * V), 1e-9 * std::abs(dbk * V) + 1e-12);
            EXPECT_GE(V, p.V_floor);
        }
        EXPECT_NEAR(pair_gap(p, b, {0.0}), 1.0, 1e-12 + 2 * omega);
        EXPECT_TRUE(check_conditions(p, region_samples(p.region, 201)).passes());
        EXPECT_LT(vgrad_fd_error(p, linspace(-1.9, 1.9, 41)), 1e-6);
        ASSERT_EQ(p.boundary_points.size(), 1u);
        EXPECT_EQ(p.boundary_points[0], 0.0);
    }
}

TEST(Corollary1, NegativeFieldRejected) {
    try {
        corollary1_pair(field_from_name("linear:1"), 10, Box::interval(-1, 1));
        FAIL();
    } catch (const Error& e) {
        EXPECT_STREQ(e.what(), "Corollary 1 requires b ≥ 0 (apply mirror or Corollary 2)");
    }
    // mirror of a nonpositive field is admissible
    auto neg = VectorField::scalar([](double x, double) { return -std::sqrt(std::abs(x)); });
    EXPECT_NO_THROW(corollary1_pair(mirror(neg), 10, Box::interval(-1, 1)));
}

TEST(Corollary2, DemoRatioAndLimits) {
    FieldDecomposition dec{field_from_name("neg_ramp:0"), field_from_name("ramp:1"), 1.0};
    Box U = Box::interval(-2, 3);
    auto b = dec.sum();
    auto ft = corollary2_ftilde(dec, U);
    std::vector<double> prev_nonzero;
    for (double k : {100.0, 1e4}) {
        auto p = corollary2_pair(dec, k, U);
        const double bound = p.constants.at("ratio_bound");
        EXPECT_DOUBLE_EQ(bound, 4.0);
        EXPECT_DOUBLE_EQ(p.C2, 16.0);
        const double eps = p.constants.at("eps_k");
        EXPECT_NEAR(eps, 8.0 / std::sqrt(k), 1e-15);
        for (double x : linspace(-2, 3, 101)) EXPECT_LE(std::abs(p.ratio({x})), bound + 1e-9) << x;
        // f~ = 0 only at the boundary of Z_f
        ASSERT_EQ(p.boundary_points.size(), 1u);
        const double z = p.boundary_points[0];
        EXPECT_NEAR(z, 1.0, 1e-8);
        const double gz = pair_gap(p, b, {z});
        const double slack = 1.0 / (k * eps);
        EXPECT_GE(gz, 1.0 - slack - 1e-6);
        EXPECT_LE(gz, 1.0 + slack + 1e-6);
        std::vector<double> nz;
        for (double x : {-1.5, 0.5, 2.0}) {
            ASSERT_GT(ft(x), 0.0);
            nz.push_back(pair_gap(p, b, {x}));
        }
        if (!prev_nonzero.empty()) {
            for (std::size_t i = 0; i < nz.size(); ++i) EXPECT_LT(nz[i], prev_nonzero[i]);
        }
        prev_nonzero = nz;
        EXPECT_TRUE(check_conditions(p, region_samples(U, 201)).passes());
        EXPECT_LT(vgrad_fd_error(p, linspace(-1.9, 2.9, 25)), 1e-6);
    }
}

TEST(Corollary2, ZeroLipschitzPartReducesToCorollary1) {
    auto f = field_from_name("ramp:0");
    FieldDecomposition dec{field_from_name("const:0"), f, 0.0};
    Box U = Box::interval(-1, 2);
    const double k = 1e3;
    auto p2 = corollary2_pair(dec, k, U);
    auto p1 = corollary1_pair(f, k, U);
    for (double x : {0.5, 1.0, 1.5}) {
        EXPECT_LT(pair_gap(p2, f, {x}), 0.05);
        EXPECT_LT(pair_gap(p1, f, {x}), 0.05);
    }
    ASSERT_EQ(p2.boundary_points.size(), 1u);
    EXPECT_NEAR(p2.boundary_points[0], 0.0, 1e-8);
}

TEST(Corollary2, DecompositionFailureIsNamed) {
    FieldDecomposition bad{field_from_name("linear:1"), field_from_name("const:1"), 1.0};
    try {
        corollary2_pair(bad, 10, Box::interval(-1, 1));
        FAIL();
    } catch (const Error& e) {
        EXPECT_NE(std::string(e.what()).find("g(x) < 0 => f(x) = 0"), std::string::npos);
    }
}

TEST(Radial, ConstantBetaIsLinearContraction) {
    auto p = radial_pair(beta_profile("one"), 100, 4, 2);
    EXPECT_EQ(p.constants.at("omega"), 0.0);
    const Point x{0.3, -0.8};
    EXPECT_NEAR(p.bk(x)[0], -0.3, 1e-15);
    EXPECT_NEAR(p.bk(x)[1], 0.8, 1e-15);
    EXPECT_EQ(p.V(x), 1.0);
    auto j = p.bk.jacobian(x);
    EXPECT_EQ(j(0, 0), -1.0);
    EXPECT_EQ(j(0, 1), 0.0);
    EXPECT_TRUE(check_conditions(p, region_samples(p.region)).passes());
}

TEST(Radial, HingeProfileBoundsAndConditions) {
    auto prof = beta_profile("hinge");
    auto b = radial_field(prof, 2);
    for (double k : {10.0, 100.0}) {
        auto p = radial_pair(prof, k, 4, 2);
        EXPECT_DOUBLE_EQ(p.C2, 16.0);
        for (const auto& x : region_samples(p.region)) {
            const double g = pair_gap(p, b, x);
            EXPECT_LE(g, 2 * norm(x) + 1e-12);
            // beta vanishes for |x| <= 1 (away from the mollification layer): the ratio is |x|
            if (norm(x) > 0 && norm(x) * norm(x) < 1 - 1.0 / k) { EXPECT_NEAR(g, norm(x), 1e-9); }
            EXPECT_GE(p.V(x), p.V_floor);
        }
        EXPECT_LT(jacobian_fd_error(p.bk, {{0.4, 0.3}, {1.1, -0.2}, {-0.6, 0.9}}), 1e-6);
        EXPECT_TRUE(check_conditions(p, region_samples(p.region)).passes());
    }
}

TEST(Radial, PotentialVariantConditions) {
    auto p = radial_pair(beta_profile("decay"), 50, 4, 2, RadialVariant::Potential, potential("gauss_bump"));
    EXPECT_TRUE(check_conditions(p, region_samples(p.region)).passes());
    EXPECT_LT(jacobian_fd_error(p.bk, {{0.4, 0.3}, {1.1, -0.2}}), 1e-6);
}

TEST(Radial, NegativeBetaRejected) {
    BetaProfile neg{"neg", [](double s) { return -s; }, 0.0, 1.0};
    EXPECT_THROW(radial_pair(neg, 10, 2, 2), Error);
}

TEST(OneSided, ConditionHoldsWithTwiceC3) {
    auto b = VectorField::scalar([](double x, double) { return -std::cbrt(x); });
    auto est = one_sided_constant(b, Box::interval(-1, 1));
    EXPECT_LE(est.estimate, 1e-12);
    auto p = one_sided_pair(b, 100, Box::interval(-1, 1), std::max(0.0, est.estimate));
    EXPECT_TRUE(check_conditions(p, region_samples(p.region, 201)).passes());
    auto q = one_sided_pair(SmoothField::scalar([](double x, double) { return 0.5 * x; },
                                                [](double, double) { return 0.5; }),
                            1, Box::interval(-1, 1), 0.5);
    auto m = check_conditions(q, region_samples(q.region, 51));
    EXPECT_TRUE(m.passes());
    EXPECT_NEAR(m.lyapunov, 0.0, 1e-15);
}

TEST(CheckConditions, DetectsViolation) {
    auto p = sqrt_pair(100);
    p.C2 = -1.0;  // too small
    EXPECT_FALSE(check_conditions(p, region_samples(p.region, 101)).passes());
    auto q = sqrt_pair(100);
    q.C1 = 0.1;
    EXPECT_FALSE(check_conditions(q, region_samples(q.region, 101)).passes());
}

TEST(CheckConditions, QuadraticPenaltyVariant) {
    auto p = sqrt_pair(100);
    p.delta = 0.5;
    auto m = check_conditions(p, region_samples(p.region, 101));
    ASSERT_TRUE(m.quadratic.has_value());
    EXPECT_GE(*m.quadratic, -1e-9);
}

TEST(Certificate, SharpExample) {
    auto b = field_from_name("sqrt_abs");
    Box U = Box::interval(-2, 2);
    auto moving = certify(atom_path([](double t) { return t * t / 4; }), b, sqrt_pairs(), U);
    for (std::size_t i = 0; i < moving.J.size(); ++i) {
        const double k = moving.ks[i];
        const double bound = 2 / std::sqrt(k) * (1 + std::log(std::sqrt(k) / 2));
        EXPECT_LE(moving.J[i], bound + 1e-3) << k;
        if (i > 0) { EXPECT_LT(moving.J[i], moving.J[i - 1]); }
    }
    EXPECT_LE(moving.J.back(), 0.1);
    EXPECT_EQ(moving.verdict, "certified");

    auto stat = certify(atom_path([](double) { return 0.0; }), b, sqrt_pairs(), U);
    for (double J : stat.J) EXPECT_NEAR(J, 1.0, 1e-9);
    EXPECT_EQ(stat.verdict, "rejected");
    EXPECT_NEAR(*stat.boundary_mass, 1.0, 1e-12);
}

TEST(Certificate, QuadratureOracleForSharpPath) {
    // independent oracle: fine composite Simpson in t of g_k(t^2/4) on the left-endpoint grid
    auto p = sqrt_pair(1000);
    auto b = field_from_name("sqrt_abs");
    double oracle = 0.0;
    for (int i = 0; i < 1000; ++i) {
        const double t = i * 1e-3;
        const double x = t * t / 4;
        oracle += 1e-3 * std::abs(std::sqrt(x) - std::pow(x * x + 1e-6, 0.25)) * std::pow(x * x + 1e-6, -0.25);
    }
    auto path = atom_path([](double t) { return t * t / 4; });
    EXPECT_NEAR(certificate_functional(path.abs(), b, p, Box::interval(-2, 2)), oracle, 1e-12);
}

TEST(Certificate, EmptyPathCertified) {
    MeasurePath empty(1.0, std::vector<SignedMeasure>(11, SignedMeasure(1)));
    auto c = certify(empty, field_from_name("sqrt_abs"), sqrt_pairs(), Box::interval(-2, 2));
    for (double J : c.J) EXPECT_EQ(J, 0.0);
    EXPECT_EQ(c.verdict, "certified");
}

TEST(Certificate, MonotoneUnderRegionRestriction) {
    auto b = field_from_name("sqrt_abs");
    std::vector<SignedMeasure> sl;
    for (int i = 0; i <= 50; ++i) sl.push_back(SignedMeasure(1, {{{-0.5 + 0.01 * i}, 1.0}, {{0.3}, -0.5}, {{1.2}, 2.0}}));
    MeasurePath path(1.0, sl);
    auto p = sqrt_pair(100);
    const double wide = certificate_functional(path.abs(), b, p, Box::interval(-2, 2));
    const double mid = certificate_functional(path.abs(), b, p, Box::interval(-1, 1));
    const double narrow = certificate_functional(path.abs(), b, p, Box::interval(0, 0.5));
    EXPECT_LE(mid, wide);
    EXPECT_LE(narrow, mid);
}

TEST(Certificate, DimensionMismatchRejected) {
    auto p2 = radial_pair(beta_profile("one"), 10, 2, 2);
    MeasurePath path(1.0, std::vector<SignedMeasure>(3, SignedMeasure::dirac1(0.0)));
    EXPECT_THROW(certify(path, field_from_name("radial_beta:one"), {p2}, Box::cube(2, -1, 1)), Error);
}

TEST(Certificate, JsonAndCsv) {
    auto c = certify(atom_path([](double t) { return t * t / 4; }, 1.0, 100), field_from_name("sqrt_abs"), sqrt_pairs(),
                     Box::interval(-2, 2));
    auto j = to_json(c);
    for (const char* key : {"recipe", "ks", "J", "margins", "boundary_mass", "verdict"}) EXPECT_TRUE(j.contains(key)) << key;
    std::ostringstream os;
    write_certificate_csv(os, c);
    const std::string csv = os.str();
    EXPECT_EQ(csv.rfind("k,J_k,margin_i,margin_ii\n", 0), 0u);
    EXPECT_EQ(std::count(csv.begin(), csv.end(), '\n'), 5);
}
