#pragma once

#include <cmath>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "contlab/field_catalog.hpp"
#include "contlab/fields.hpp"
#include "contlab/zero_set.hpp"

namespace contlab {

/// One approximation (b_k, V_k) with the constants of the growth and
/// Lyapunov conditions on the region U.
struct ApproximationPair {
    std::string recipe;
    double k = 1.0;
    SmoothField bk;
    std::function<double(const Point&)> V;
    std::function<Point(const Point&)> gradV;
    Box region;
    double C1 = 0.0;
    double C2 = 0.0;
    std::optional<double> delta;
    double V_floor = 0.0;
    std::vector<double> boundary_points;  ///< dZ inside U (1D recipes)
    std::map<std::string, double> constants;
    std::function<double(const Point&)> ratio;  ///< g-to-f ratio diagnostic

    std::size_t dimension() const { return bk.dimension(); }
};

/// g_k(x) = |b(x) - b_k(x)| sqrt(V_k(x))
inline double pair_gap(const ApproximationPair& p, const VectorField& b, const Point& x, double t = 0.0) {
    return norm(axpy(-1.0, p.bk(x, t), b(x, t))) * std::sqrt(p.V(x));
}

namespace detail {

inline SmoothField constant_smooth(double c, const std::string& id) {
    return SmoothField::scalar([c](double, double) { return c; }, [](double, double) { return 0.0; }, id);
}

inline std::vector<double> interior_boundary(const ZeroSetInfo& z, const Box& region) {
    std::vector<double> out;
    for (double p : z.boundary)
        if (p >= region.lo[0] && p <= region.hi[0]) out.push_back(p);
    return out;
}

/// x -> distance from x to the complement of int Z (interior components);
/// components reaching the working edge continue beyond it.
inline std::function<double(double)> complement_distance(std::vector<InteriorInterval> interior) {
    return [interior](double x) {
        const double inf = std::numeric_limits<double>::infinity();
        for (const auto& c : interior) {
            if (x > c.lo && x < c.hi) return std::min(c.lo_closed ? inf : x - c.lo, c.hi_closed ? inf : c.hi - x);
            if (c.lo_closed && x <= c.lo) return c.hi_closed ? inf : c.hi - x;
            if (c.hi_closed && x >= c.hi) return c.lo_closed ? inf : x - c.lo;
        }
        return 0.0;
    };
}

inline double sampled_growth(const VectorField& b, double lo, double hi) {
    double c = 0.0;
    for (double x : linspace(lo, hi, 2001)) c = std::max(c, std::abs(b.at(x)) / (1.0 + std::abs(x)));
    return c;
}

}  // namespace detail

/// Analytic pair for sqrt|x|: b_k = (x^2 + k^-2)^{1/4}, V_k = (x^2 + k^-2)^{-1/2}.
inline ApproximationPair sqrt_pair(double k, Box region = Box::interval(-2, 2)) {
    require(k >= 1, "sqrt_pair requires k >= 1");
    const double e = 1.0 / (k * k);
    ApproximationPair p;
    p.recipe = "sqrt_pair";
    p.k = k;
    p.bk = SmoothField::scalar([e](double x, double) { return std::pow(x * x + e, 0.25); },
                               [e](double x, double) { return x / (2.0 * std::pow(x * x + e, 0.75)); },
                               "sqrt_pair");
    p.bk.with_growth(1.0);
    p.V = [e](const Point& x) { return 1.0 / std::sqrt(x[0] * x[0] + e); };
    p.gradV = [e](const Point& x) { return Point{-x[0] / std::pow(x[0] * x[0] + e, 1.5)}; };
    p.region = region;
    p.C1 = 1.0;
    p.C2 = 0.0;
    const double R = std::max(std::abs(region.lo[0]), std::abs(region.hi[0]));
    p.V_floor = 1.0 / std::sqrt(R * R + 1.0);
    if (region.lo[0] <= 0 && region.hi[0] >= 0) p.boundary_points = {0.0};
    return p;
}

/// b_k = b * rho_{1/k} + omega(1/k), V_k = b_k^{-2} for 0 <= b <= C + C|x| (d = 1).
/// A constant field (omega = 0) takes b_k = b, V_k = 1.
inline ApproximationPair corollary1_pair(const VectorField& b, double k, Box region, Mollifier rho = {}) {
    require(b.dimension() == 1, "corollary1_pair requires d = 1");
    require_bounded(region);
    const double lo = region.lo[0] - 1.0, hi = region.hi[0] + 1.0;
    const double mn = sampled_min(b, lo, hi);
    if (mn < 0) throw Error("Corollary 1 requires b ≥ 0 (apply mirror or Corollary 2)");
    const double omega = modulus_of_continuity(b, lo, hi, std::min(1.0 / k, hi - lo));
    const double CN = sampled_max_abs(b, lo, hi);
    const double C = b.growth() ? *b.growth() : detail::sampled_growth(b, lo, hi);
    ApproximationPair p;
    p.recipe = "corollary1";
    p.k = k;
    p.region = region;
    p.constants["omega"] = omega;
    p.constants["C_N"] = CN;
    p.C2 = 0.0;
    if (omega == 0.0) {
        const double c = b.at(region.lo[0]);
        p.bk = detail::constant_smooth(c, "const");
        p.bk.with_growth(std::abs(c));
        p.V = [](const Point&) { return 1.0; };
        p.gradV = [](const Point&) { return Point{0.0}; };
        p.C1 = std::abs(c);
        p.V_floor = 1.0;
        p.recipe = "corollary1_constant";
        return p;
    }
    SmoothField conv = mollify(b, k, rho);
    auto cv = std::make_shared<SmoothField>(conv);
    p.bk = SmoothField::scalar([cv, omega](double x, double t) { return cv->at(x, t) + omega; },
                               [cv](double x, double t) { return cv->derivative(x, t); }, "corollary1");
    p.bk.with_growth(2.0 * C);
    auto bk = std::make_shared<SmoothField>(p.bk);
    p.V = [bk](const Point& x) {
        const double v = bk->at(x[0]);
        return 1.0 / (v * v);
    };
    p.gradV = [bk](const Point& x) {
        const double v = bk->at(x[0]);
        return Point{-2.0 * bk->derivative(x[0]) / (v * v * v)};
    };
    p.C1 = 2.0 * C;
    p.V_floor = 1.0 / (16.0 * CN * CN);
    // The additive shift must dominate the smoothing error.
    for (double x : linspace(region.lo[0], region.hi[0], 401)) {
        if (cv->at(x) + omega < b.at(x) - 1e-12)
            throw Error("modulus estimate too small: b*rho + omega < b at x=" + std::to_string(x));
    }
    p.boundary_points = detail::interior_boundary(zero_set(b, lo, hi), region);
    return p;
}

/// Split pair for b = g + f (d = 1).
inline ApproximationPair corollary2_pair(const FieldDecomposition& dec, double k, Box region, Mollifier rho = {}) {
    require_bounded(region);
    const double lo = region.lo[0] - 1.0, hi = region.hi[0] + 1.0;
    validate_decomposition(dec, lo, hi);
    const double lambda = dec.lambda;
    const double lambda_used = std::max(lambda, 1e-3);
    const double eps = 8.0 * lambda_used / std::sqrt(k);
    const double omega3 = modulus_of_continuity(dec.f, lo, hi, std::min(3.0 / k, hi - lo));
    const ZeroSetInfo zf = zero_set(dec.f, lo - 1.0, hi + 1.0);
    auto h = detail::complement_distance(zf.interior);
    VectorField g = dec.g, f = dec.f;
    auto gt = [g, h](double x, double t) { return g.at(x, t) - h(x); };
    auto ftk = [f, h, omega3](double x, double t) { return std::max(f.at(x, t) - 2.0 * omega3, 0.0) + h(x); };
    auto num = std::make_shared<Convolution1D>(
        Convolution1D{[gt, ftk](double x, double t) { return gt(x, t) + ftk(x, t); }, k, rho});
    auto den = std::make_shared<Convolution1D>(
        Convolution1D{[gt, ftk](double x, double t) { return std::abs(gt(x, t)) + ftk(x, t); }, k, rho});
    auto neg = std::make_shared<Convolution1D>(
        Convolution1D{[gt](double x, double t) { const double v = gt(x, t); return v - std::abs(v); }, k, rho});

    ApproximationPair p;
    p.recipe = "corollary2";
    p.k = k;
    p.region = region;
    p.bk = SmoothField::scalar([num, eps](double x, double t) { return num->value(x, t) + eps; },
                               [num](double x, double t) { return num->derivative(x, t); }, "corollary2");
    const double C = detail::sampled_growth(dec.sum(), lo, hi);
    p.bk.with_growth(2.0 * C + eps);
    p.V = [den, eps](const Point& x) {
        const double d = den->value(x[0]) + eps;
        return 1.0 / (d * d);
    };
    p.gradV = [den, eps](const Point& x) {
        const double d = den->value(x[0]) + eps;
        return Point{-2.0 * den->derivative(x[0]) / (d * d * d)};
    };
    p.ratio = [den, neg, eps](const Point& x) {
        return neg->value(x[0]) * den->derivative(x[0]) / (den->value(x[0]) + eps);
    };
    p.C1 = 2.0 * C + eps;
    p.C2 = 8.0 * (lambda + 1.0);
    double dmax = 0.0;
    for (double x : linspace(lo, hi, 2001)) dmax = std::max(dmax, std::abs(gt(x, 0.0)) + ftk(x, 0.0));
    p.V_floor = 1.0 / std::pow(1.1 * (dmax + eps), 2);
    p.constants["eps_k"] = eps;
    p.constants["omega_3k"] = omega3;
    p.constants["lambda"] = lambda;
    p.constants["ratio_bound"] = 2.0 * (lambda + 1.0);
    p.boundary_points = detail::interior_boundary(zf, region);
    return p;
}

/// f~(x) = f(x) + h(x) for the split-pair auxiliary; zero exactly on dZ_f.
inline std::function<double(double)> corollary2_ftilde(const FieldDecomposition& dec, Box region) {
    const double lo = region.lo[0] - 2.0, hi = region.hi[0] + 2.0;
    const ZeroSetInfo zf = zero_set(dec.f, lo, hi);
    auto h = detail::complement_distance(zf.interior);
    VectorField f = dec.f;
    return [h, f](double x) { return f.at(x) + h(x); };
}

enum class RadialVariant { Radial, Potential };

/// b_k = -(beta_k(|x|^2) + omega) x, V_k = (beta_k + omega)^{-2} on the cube
/// inscribed in {|x| <= sqrt(N)}; the potential variant replaces |x|^2 by W
/// and x by grad W.
inline ApproximationPair radial_pair(const BetaProfile& prof, double k, double N, std::size_t d,
                                     RadialVariant variant = RadialVariant::Radial,
                                     std::optional<Potential> W = std::nullopt, Mollifier rho = {}) {
    require(N > 0 && d >= 1 && d <= 3, "radial_pair requires N > 0 and 1 <= d <= 3");
    const double smax = variant == RadialVariant::Radial ? N + 1.0 : (W ? W->sup : 1.0) + 1.0;
    for (double s : linspace(0.0, smax, 2001))
        if (prof.beta(s) < 0) throw Error("radial recipe requires beta >= 0");
    auto beta = prof.beta;
    auto ext = [beta](double s, double) { return beta(std::max(s, 0.0)); };
    VectorField bext = VectorField::scalar(ext);
    const double omega = modulus_of_continuity(bext, 0.0, smax, std::min(1.0 / k, smax));
    const double B = prof.sup;
    const double half = variant == RadialVariant::Radial ? std::sqrt(N / static_cast<double>(d)) : std::sqrt(N);

    ApproximationPair p;
    p.k = k;
    p.region = Box::cube(d, -half, half);
    p.constants["omega"] = omega;
    p.constants["Lambda"] = prof.lambda;
    p.C1 = B + omega;
    p.V_floor = 1.0 / ((B + omega) * (B + omega));

    std::shared_ptr<Convolution1D> bk1;
    if (omega == 0.0) {
        const double c = beta(0.0);
        bk1 = std::make_shared<Convolution1D>(Convolution1D{[c](double, double) { return c; }, k, rho});
    } else {
        bk1 = std::make_shared<Convolution1D>(Convolution1D{ext, k, rho});
    }
    const bool constant = omega == 0.0;
    const double c0 = beta(0.0);
    auto value = [bk1, constant, c0](double s) { return constant ? c0 : bk1->value(s); };
    auto slope = [bk1, constant](double s) { return constant ? 0.0 : bk1->derivative(s); };

    if (variant == RadialVariant::Radial) {
        p.recipe = constant ? "radial_constant" : "radial";
        auto fn = [value, omega](const Point& x, double) {
            const double c = -(value(dot(x, x)) + omega);
            Point r = x;
            for (auto& v : r) v *= c;
            return r;
        };
        auto jac = [value, slope, omega](const Point& x, double) {
            const double s = dot(x, x);
            const double bs = value(s) + omega, ds = slope(s);
            Matrix m(x.size());
            for (std::size_t i = 0; i < x.size(); ++i)
                for (std::size_t j = 0; j < x.size(); ++j) m(i, j) = -2.0 * ds * x[i] * x[j] - (i == j ? bs : 0.0);
            return m;
        };
        p.bk = SmoothField(VectorField::make(d, fn, "radial_pair"), jac);
        p.bk.with_growth(B + omega);
        if (constant) {
            p.V = [](const Point&) { return 1.0; };
            p.gradV = [d](const Point&) { return Point(d, 0.0); };
            p.V_floor = 1.0;
            p.C2 = 0.0;
        } else {
            p.V = [value, omega](const Point& x) {
                const double v = value(dot(x, x)) + omega;
                return 1.0 / (v * v);
            };
            p.gradV = [value, slope, omega](const Point& x) {
                const double s = dot(x, x);
                const double v = value(s) + omega;
                const double c = -4.0 * slope(s) / (v * v * v);
                Point g = x;
                for (auto& e : g) e *= c;
                return g;
            };
            p.C2 = 4.0 * N * prof.lambda;
        }
        return p;
    }

    require(W.has_value(), "potential variant requires a potential W");
    const Potential w = *W;
    p.recipe = constant ? "potential_constant" : "potential";
    auto fn = [value, omega, w](const Point& x, double) {
        const double c = -(value(w.value(x)) + omega);
        Point g = w.gradient(x);
        for (auto& v : g) v *= c;
        return g;
    };
    auto jac = [value, slope, omega, w](const Point& x, double) {
        const double s = w.value(x);
        const double bs = value(s) + omega, ds = slope(s);
        const Point g = w.gradient(x);
        const Matrix hs = w.hessian(x);
        Matrix m(x.size());
        for (std::size_t i = 0; i < x.size(); ++i)
            for (std::size_t j = 0; j < x.size(); ++j) m(i, j) = -ds * g[i] * g[j] - bs * hs(i, j);
        return m;
    };
    p.bk = SmoothField(VectorField::make(d, fn, "potential_pair"), jac);
    p.bk.with_growth((B + omega) * w.G);
    p.C1 = (B + omega) * w.G;
    if (constant) {
        p.V = [](const Point&) { return 1.0; };
        p.gradV = [d](const Point&) { return Point(d, 0.0); };
        p.V_floor = 1.0;
        p.C2 = 2.0 * (B + omega) * w.H;
    } else {
        p.V = [value, omega, w](const Point& x) {
            const double v = value(w.value(x)) + omega;
            return 1.0 / (v * v);
        };
        p.gradV = [value, slope, omega, w](const Point& x) {
            const double s = w.value(x);
            const double v = value(s) + omega;
            const double c = -2.0 * slope(s) / (v * v * v);
            Point g = w.gradient(x);
            for (auto& e : g) e *= c;
            return g;
        };
        p.C2 = 2.0 * prof.lambda * w.G * w.G + 2.0 * (B + omega) * w.H;
    }
    return p;
}

/// V_k = 1 with a smooth b_k satisfying one-sided Lipschitz bound C3: condition
/// (ii) holds with C2 = 2 C3.
inline ApproximationPair one_sided_pair(const SmoothField& bk, double k, Box region, double C3) {
    ApproximationPair p;
    p.recipe = "one_sided";
    p.k = k;
    p.bk = bk;
    const std::size_t d = bk.dimension();
    p.V = [](const Point&) { return 1.0; };
    p.gradV = [d](const Point&) { return Point(d, 0.0); };
    p.region = region;
    if (bk.growth()) {
        p.C1 = *bk.growth();
    } else {
        require(d == 1, "one_sided_pair needs a growth constant on b_k for d >= 2");
        p.C1 = 1.01 * detail::sampled_growth(bk, region.lo[0], region.hi[0]);
    }
    p.C2 = 2.0 * C3;
    p.V_floor = 1.0;
    p.constants["C3"] = C3;
    return p;
}

inline ApproximationPair one_sided_pair(const VectorField& b, double k, Box region, double C3) {
    require(b.dimension() == 1, "one_sided_pair mollifies 1D fields only; pass a SmoothField for d >= 2");
    return one_sided_pair(mollify(b, k), k, region, C3);
}

struct ConditionMargins {
    double growth = 0.0;             ///< min (C1 + C1|x| - |b_k|)
    double growth_normalized = 0.0;  ///< same divided by (|lhs| + |rhs|)
    double lyapunov = 0.0;           ///< min ((C2 - 2 lambda_max) V - <b_k, grad V>)
    double lyapunov_normalized = 0.0;
    std::optional<double> quadratic;  ///< same with the -delta |b_k|^2 term
    std::optional<double> quadratic_C;
    double floor = 0.0;  ///< min V - recorded floor
    std::size_t samples = 0;

    bool passes(double tol = 1e-9) const {
        return growth_normalized >= -tol && lyapunov_normalized >= -tol && floor >= -1e-12 * std::max(1.0, std::abs(floor)) &&
               (!quadratic || *quadratic >= -tol);
    }
};

/// Default sample grid over a region: 1001 points in 1D, 41^2 or 13^3 above.
inline std::vector<Point> region_samples(const Box& region, std::size_t n1 = 1001) {
    const std::size_t d = region.dimension();
    return box_grid(region, d == 1 ? n1 : (d == 2 ? 41 : 13));
}

inline ConditionMargins check_conditions(const ApproximationPair& p, const std::vector<Point>& xs,
                                         const std::vector<double>& ts = {0.0}) {
    ConditionMargins m;
    m.growth = m.growth_normalized = m.lyapunov = m.lyapunov_normalized = m.floor =
        std::numeric_limits<double>::infinity();
    std::optional<double> C_t2;
    if (p.delta) {
        double bmax = 0.0;
        for (const auto& x : xs)
            for (double t : ts) bmax = std::max(bmax, norm(p.bk(x, t)));
        C_t2 = p.C2 + *p.delta * bmax * bmax;
        m.quadratic = std::numeric_limits<double>::infinity();
        m.quadratic_C = C_t2;
    }
    for (const auto& x : xs) {
        const double V = p.V(x);
        const Point gV = p.gradV(x);
        m.floor = std::min(m.floor, V - p.V_floor);
        for (double t : ts) {
            const Point b = p.bk(x, t);
            const double nb = norm(b);
            const double grhs = p.C1 + p.C1 * norm(x);
            m.growth = std::min(m.growth, grhs - nb);
            m.growth_normalized = std::min(m.growth_normalized, (grhs - nb) / (std::abs(grhs) + nb + 1e-300));
            const double lam = max_quadratic_form(p.bk.jacobian(x, t));
            const double lhs = dot(b, gV);
            const double rhs = (p.C2 - 2.0 * lam) * V;
            m.lyapunov = std::min(m.lyapunov, rhs - lhs);
            const double scale = std::abs(lhs) + std::abs(rhs) + (std::abs(p.C2) + 2.0 * std::abs(lam)) * V + 1e-300;
            m.lyapunov_normalized = std::min(m.lyapunov_normalized, (rhs - lhs) / scale);
            if (C_t2) {
                const double r2 = (*C_t2 - *p.delta * nb * nb - 2.0 * lam) * V;
                const double s2 = std::abs(lhs) + std::abs(r2) + (*C_t2 + *p.delta * nb * nb + 2.0 * std::abs(lam)) * V;
                m.quadratic = std::min(*m.quadratic, (r2 - lhs) / (s2 + 1e-300));
            }
            ++m.samples;
        }
    }
    return m;
}

}  // namespace contlab
