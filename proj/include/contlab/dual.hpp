#pragma once

#include <cmath>
#include <limits>
#include <ostream>
#include <vector>

#include "contlab/certificate.hpp"
#include "contlab/transport.hpp"

namespace contlab {

/// Radius beyond which the backward characteristic never reaches supp psi
/// (|x| <= r) before time s, for fields with |h| <= C1 + C1|x|.
inline double dual_support_radius(double r, double C1, double s) {
    require(r >= 0 && C1 >= 0 && s >= 0, "dual radius needs r, C1, s >= 0");
    return std::sqrt((r * r + C1 * s) * std::exp(3.0 * C1 * s));
}

/// f(x, t) = psi(x(s)) along the flow of `field` started at (x, t).
/// psi is the spatial profile of the test function at time 0.
struct DualSolution {
    VectorField field;
    TestFunction psi;
    double s = 1.0;
    double dt = 1e-3;
    double C1 = 0.0;
    double R = 0.0;
    double rate = 0.0;  ///< C2, or M for the cutoff problem

    double operator()(const Point& x, double t) const {
        require(t <= s + 1e-12, "dual solution is defined for t <= s");
        return psi.value(flow_map(field, x, t, s, dt), 0.0);
    }

    /// Central differences with step 1e-5 (1 + |x|).
    Point gradient(const Point& x, double t) const {
        const double h = 1e-5 * (1.0 + norm(x));
        Point g(x.size());
        for (std::size_t i = 0; i < x.size(); ++i) {
            Point a = x, b = x;
            a[i] += h;
            b[i] -= h;
            g[i] = ((*this)(a, t) - (*this)(b, t)) / (2.0 * h);
        }
        return g;
    }
};

inline DualSolution solve_dual(const VectorField& bk, const TestFunction& psi, double s, double C1, double C2,
                               double dt = 1e-3) {
    require(s > 0, "dual terminal time must be positive");
    DualSolution f;
    f.field = bk;
    f.psi = psi;
    f.s = s;
    f.dt = dt;
    f.C1 = C1;
    f.rate = C2;
    f.R = dual_support_radius(psi.support_radius, C1, s);
    return f;
}

inline DualSolution solve_dual(const ApproximationPair& p, const TestFunction& psi, double s, double dt = 1e-3) {
    return solve_dual(p.bk, psi, s, p.C1, p.C2, dt);
}

namespace detail {

/// max over supp psi of |grad psi|^2 / V, on a fine grid refined by golden
/// search along each axis around the best node.
inline double max_gradient_ratio(const TestFunction& psi, const std::function<double(const Point&)>& V, std::size_t d) {
    const double r = psi.support_radius;
    const std::size_t n = d == 1 ? 20001 : (d == 2 ? 401 : 61);
    auto ratio = [&](const Point& y) {
        const Point g = psi.gradient(y, 0.0);
        return dot(g, g) / V(y);
    };
    Point best;
    double vbest = 0.0;
    for (const auto& y : box_grid(Box::cube(d, -r, r), n)) {
        const double v = ratio(y);
        if (v > vbest) {
            vbest = v;
            best = y;
        }
    }
    if (best.empty()) return 0.0;
    const double h = 2.0 * r / static_cast<double>(n - 1);
    for (int sweep = 0; sweep < 2; ++sweep)
        for (std::size_t i = 0; i < d; ++i) {
            Point y = best;
            auto [xm, fm] = golden_min(
                [&](double u) {
                    y[i] = u;
                    return -ratio(y);
                },
                best[i] - h, best[i] + h, 200);
            if (-fm > vbest) {
                vbest = -fm;
                best[i] = xm;
            }
        }
    return vbest;
}

}  // namespace detail

struct GradientCheck {
    double margin = std::numeric_limits<double>::infinity();      ///< min (rhs - |grad f|^2)
    double max_principle = std::numeric_limits<double>::infinity();  ///< min (max|psi| - |f|)
    double ratio_max = 0.0;  ///< max_y |grad psi|^2 / V
    std::size_t samples = 0;
};

/// Samples |grad f|^2 <= V(x) e^{rate (s - t)} max_y |grad psi(y)|^2 / V(y)
/// and |f| <= max |psi| on xs x ts.
inline GradientCheck gradient_bound_check(const DualSolution& f, const std::function<double(const Point&)>& V,
                                          const std::vector<Point>& xs, const std::vector<double>& ts) {
    require(!xs.empty() && !ts.empty(), "gradient_bound_check needs samples");
    GradientCheck c;
    const std::size_t d = xs.front().size();
    c.ratio_max = detail::max_gradient_ratio(f.psi, V, d);
    std::vector<double> margin(xs.size() * ts.size()), mp(xs.size() * ts.size());
    parallel_for(xs.size() * ts.size(), [&](std::size_t q) {
        const Point& x = xs[q / ts.size()];
        const double t = ts[q % ts.size()];
        const Point g = f.gradient(x, t);
        margin[q] = V(x) * std::exp(f.rate * (f.s - t)) * c.ratio_max - dot(g, g);
        mp[q] = f.psi.max_abs - std::abs(f(x, t));
    });
    for (std::size_t q = 0; q < margin.size(); ++q) {
        c.margin = std::min(c.margin, margin[q]);
        c.max_principle = std::min(c.max_principle, mp[q]);
    }
    c.samples = margin.size();
    return c;
}

/// max |f| over points at and beyond the support radius R (1D: +-R, +-1.05R,
/// +-1.5R; d >= 2: a ring of directions at those radii).
inline double support_violation(const DualSolution& f, const std::vector<double>& ts) {
    const std::size_t d = f.field.dimension();
    std::vector<Point> dirs;
    if (d == 1) {
        dirs = {{1.0}, {-1.0}};
    } else {
        for (int i = 0; i < 16; ++i) {
            Point u(d, 0.0);
            u[0] = std::cos(2 * M_PI * i / 16.0);
            u[1] = std::sin(2 * M_PI * i / 16.0);
            dirs.push_back(u);
        }
    }
    double worst = 0.0;
    for (double scale : {1.0, 1.05, 1.5})
        for (const auto& u : dirs)
            for (double t : ts) {
                Point x = u;
                for (double& xi : x) xi *= scale * f.R;
                worst = std::max(worst, std::abs(f(x, t)));
            }
    return worst;
}

/// zeta(x) = eta(|x| / N)^2, eta = 1 on [0, 1], cos(pi (u - 1) / 2) on [1, 2], 0 beyond.
struct CutoffProfile {
    double N = 1.0;
    std::optional<double> constant;  ///< zeta identically equal to this value

    static CutoffProfile at_scale(double N) {
        require(N > 0, "cutoff scale must be positive");
        return CutoffProfile{N, std::nullopt};
    }
    static CutoffProfile identically(double c) {
        require(c >= 0 && c <= 1, "cutoff constant must lie in [0, 1]");
        return CutoffProfile{1.0, c};
    }

    double value(const Point& x) const {
        if (constant) return *constant;
        const double u = norm(x) / N;
        if (u <= 1.0) return 1.0;
        if (u >= 2.0) return 0.0;
        const double e = std::cos(0.5 * M_PI * (u - 1.0));
        return e * e;
    }
    Point gradient(const Point& x) const {
        Point g(x.size(), 0.0);
        if (constant) return g;
        const double r = norm(x), u = r / N;
        if (u <= 1.0 || u >= 2.0) return g;
        const double dz = -0.5 * M_PI * std::sin(M_PI * (u - 1.0)) / N;
        for (std::size_t i = 0; i < x.size(); ++i) g[i] = dz * x[i] / r;
        return g;
    }
    /// sup |grad zeta|^2 / zeta = 4 sup |grad sqrt(zeta)|^2 = (pi / N)^2.
    double C() const { return constant ? 0.0 : (M_PI / N) * (M_PI / N); }
};

/// Dual problem along zeta b_k; the gradient bound uses M = C + C(zeta) / delta.
inline DualSolution cutoff_dual(const VectorField& bk, const TestFunction& psi, double s, const CutoffProfile& zeta,
                                double delta, double C, double C1, double dt = 1e-3) {
    require(delta > 0, "cutoff delta must be positive");
    const std::size_t d = bk.dimension();
    VectorField cut = VectorField::make(
        d,
        [bk, zeta](const Point& x, double t) {
            const double z = zeta.value(x);
            Point v(x.size(), 0.0);
            if (z == 0.0) return v;
            v = bk(x, t);
            for (double& vi : v) vi *= z;
            return v;
        },
        bk.id() + "*zeta");
    return solve_dual(cut, psi, s, C1, C + zeta.C() / delta, dt);
}

struct GapReport {
    double k = 0.0;
    double lhs = 0.0;
    double bound = 0.0;
    double C_tilde = 0.0;
    double C_tilde_sqrt = 0.0;  ///< same with C(U)^{-1/2} in place of (2C(U))^{-1}
    double J_k = 0.0;
    double R = 0.0;
};

/// lhs = int psi dmu_s against bound = C~ J_k, J_k over {|x| < 2R} and [0, s].
inline GapReport duality_gap(const TestFunction& psi, double s, const MeasurePath& path, const VectorField& b,
                             const ApproximationPair& p) {
    const std::size_t d = path.dimension();
    require(p.dimension() == d && b.dimension() == d, "duality_gap: dimension mismatch");
    GapReport g;
    g.k = p.k;
    g.R = dual_support_radius(psi.support_radius, p.C1, s);
    const Box ball = Box::cube(d, -2.0 * g.R, 2.0 * g.R);
    if (!p.region.contains_box(ball)) throw Error("pair region must contain the dual support radius 2R");
    const std::size_t I = path.index_of(s);
    g.lhs = integrate(path.slice(I), [&](const Point& x) { return psi.value(x, 0.0); },
                      Box::cube(d, -psi.support_radius, psi.support_radius));
    g.J_k = path_integrate(
        path.abs(),
        [&](const Point& x, double t) { return norm(x) < 2.0 * g.R ? pair_gap(p, b, x, t) : 0.0; }, ball,
        TimeRule::LeftEndpoint, path.times()[I]);
    const double growth = std::exp(p.C2 * path.horizon() / 2.0) * psi.max_gradient;
    g.C_tilde = growth / (2.0 * p.V_floor);
    g.C_tilde_sqrt = growth / std::sqrt(p.V_floor);
    g.bound = g.C_tilde * g.J_k;
    return g;
}

/// N^{-1} int_0^T int_{N < |x| < 2N} |b| d|mu_t| dt (left-endpoint rule).
inline double tail_functional(const MeasurePath& path, const VectorField& b, double N) {
    require(N > 0, "tail functional needs N > 0");
    const double dt = path.dt();
    double s = 0.0;
    for (std::size_t i = 0; i < path.steps(); ++i) {
        const double t = path.times()[i];
        const SignedMeasure a = path.slice(i).abs();
        double v = 0.0;
        for (const auto& at : a.atoms()) {
            const double r = norm(at.x);
            if (r > N && r < 2.0 * N) v += at.w * norm(b(at.x, t));
        }
        if (a.has_density()) {
            const SignedMeasure dens(1, {}, a.density());
            auto mag = [&](const Point& x) { return norm(b(x, t)); };
            v += integrate(dens, mag, Box::interval(N, 2.0 * N)) + integrate(dens, mag, Box::interval(-2.0 * N, -N));
        }
        s += dt * v;
    }
    return s / N;
}

inline Json to_json(const GapReport& g) {
    return Json{{"k", g.k},           {"lhs", g.lhs}, {"bound", g.bound}, {"C_tilde", g.C_tilde},
                {"J_k", g.J_k},       {"R", g.R},     {"C_tilde_sqrt", g.C_tilde_sqrt}};
}

/// CSV rows x, t, f, |grad f|^2, rhs_bound (1D).
inline void write_dual_grid_csv(std::ostream& os, const DualSolution& f, const std::function<double(const Point&)>& V,
                                const std::vector<double>& xs, const std::vector<double>& ts) {
    const double ratio = detail::max_gradient_ratio(f.psi, V, 1);
    os << "x,t,f,grad_f_sq,rhs_bound\n";
    os.precision(17);
    for (double t : ts)
        for (double x : xs) {
            const Point g = f.gradient({x}, t);
            os << x << ',' << t << ',' << f({x}, t) << ',' << dot(g, g) << ','
               << V({x}) * std::exp(f.rate * (f.s - t)) * ratio << '\n';
        }
}

}  // namespace contlab
