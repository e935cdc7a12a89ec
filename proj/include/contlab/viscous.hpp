#pragma once

#include <cmath>
#include <limits>
#include <ostream>
#include <vector>

#include "contlab/fields.hpp"
#include "contlab/measure.hpp"
#include "contlab/measure_io.hpp"
#include "contlab/quadrature.hpp"

namespace contlab {

/// n cells on [a, b], time step dt, diffusion eps. `implicit` selects the
/// fully implicit upwind/diffusion step, which has no step-size restriction.
struct FPGrid {
    double a = -0.5, b = 1.5;
    std::size_t n = 4000;
    double dt = 0.0;  ///< 0: largest stable step dividing the output spacing
    double eps = 1e-3;
    bool implicit = false;

    double dx() const { return (b - a) / static_cast<double>(n); }
    double center(std::size_t i) const { return a + (static_cast<double>(i) + 0.5) * dx(); }
    double face(std::size_t i) const { return a + static_cast<double>(i) * dx(); }

    /// 0.5 min(dx^2 / eps, dx / bmax).
    double cfl_limit(double bmax) const {
        const double h = dx();
        double lim = std::numeric_limits<double>::infinity();
        if (eps > 0) lim = std::min(lim, h * h / eps);
        if (bmax > 0) lim = std::min(lim, h / bmax);
        return 0.5 * lim;
    }
};

namespace detail {

/// Thomas algorithm; lo[0] and up[n-1] are ignored.
inline void solve_tridiagonal(const std::vector<double>& lo, const std::vector<double>& di, const std::vector<double>& up,
                              std::vector<double>& rhs) {
    const std::size_t n = di.size();
    std::vector<double> c(n);
    double d = di[0];
    c[0] = up[0] / d;
    rhs[0] /= d;
    for (std::size_t i = 1; i < n; ++i) {
        d = di[i] - lo[i] * c[i - 1];
        c[i] = up[i] / d;
        rhs[i] = (rhs[i] - lo[i] * rhs[i - 1]) / d;
    }
    for (std::size_t i = n - 1; i-- > 0;) rhs[i] -= c[i] * rhs[i + 1];
}

/// Cell averages of nu: densities by exact cell integrals, atoms as unit hats of
/// half-width dx.
inline std::vector<double> splat(const SignedMeasure& nu, const FPGrid& g) {
    const double h = g.dx();
    std::vector<double> u(g.n, 0.0);
    auto hat_mass = [&](double c, double x0, double x1) {
        // mass of the hat (1/h)(1 - |x - c|/h) over [x0, x1]
        auto F = [&](double x) {
            const double s = std::clamp((x - c) / h, -1.0, 1.0);
            return s < 0 ? 0.5 * (1 + s) * (1 + s) : 1.0 - 0.5 * (1 - s) * (1 - s);
        };
        return F(x1) - F(x0);
    };
    for (const auto& at : nu.atoms()) {
        const double c = at.x[0];
        require(c - h >= g.a && c + h <= g.b, "initial atom too close to the viscous grid boundary");
        const std::size_t i0 = static_cast<std::size_t>(std::max(0.0, std::floor((c - h - g.a) / h)));
        for (std::size_t i = i0; i < g.n && g.face(i) < c + h; ++i)
            u[i] += at.w * hat_mass(c, g.face(i), g.face(i + 1)) / h;
    }
    if (nu.has_density()) {
        for (std::size_t i = 0; i < g.n; ++i)
            u[i] += signed_mass(SignedMeasure(1, {}, nu.density()), Box::interval(g.face(i), g.face(i + 1))) / h;
        const double inside = signed_mass(SignedMeasure(1, {}, nu.density()), Box::interval(g.a, g.b));
        require(std::abs(inside - SignedMeasure(1, {}, nu.density()).total_mass()) <= 1e-12 * (1 + std::abs(inside)),
                "initial density must lie inside the viscous grid");
    }
    return u;
}

/// Piecewise-linear slice through cell centres, flat on the two half cells at
/// the ends, so its mass equals sum u_i dx.
inline SignedMeasure cells_to_measure(const std::vector<double>& u, const FPGrid& g) {
    DensityPiece pc;
    pc.grid.reserve(u.size() + 2);
    pc.values.reserve(u.size() + 2);
    pc.grid.push_back(g.a);
    pc.values.push_back(u.front());
    for (std::size_t i = 0; i < u.size(); ++i) {
        pc.grid.push_back(g.center(i));
        pc.values.push_back(u[i]);
    }
    pc.grid.push_back(g.b);
    pc.values.push_back(u.back());
    return SignedMeasure(1, {}, {std::move(pc)});
}

}  // namespace detail

struct FPRun {
    MeasurePath path;
    FPGrid grid;
    double dt = 0.0;
    std::size_t steps = 0;
    double mass_error = 0.0;  ///< max over steps of |sum u dx - initial mass|
    double min_value = 0.0;   ///< smallest cell value seen
};

/// Finite-volume solve of u_t - eps u_xx + (b u)_x = 0 with zero-flux walls:
/// upwind fluxes, Crank-Nicolson diffusion (or fully implicit when flagged).
inline FPRun solve_fp_1d(const VectorField& b, const SignedMeasure& nu, FPGrid g, double T,
                         std::size_t output_steps = 100) {
    require(b.dimension() == 1 && nu.dimension() == 1, "viscous solver is 1D");
    require(g.n >= 3 && g.b > g.a, "viscous grid needs n >= 3 cells on a nonempty interval");
    require(g.eps > 0, "viscous solver needs eps > 0");
    require(T > 0 && output_steps >= 1, "viscous horizon and output grid must be positive");
    const std::size_t n = g.n;
    const double h = g.dx();
    const double out_dt = T / static_cast<double>(output_steps);

    std::vector<double> faces(n + 1);
    for (std::size_t i = 0; i <= n; ++i) faces[i] = g.face(i);
    double bmax = 0.0;
    for (double x : faces) bmax = std::max(bmax, std::abs(b.at(x, 0.0)));
    const double lim = g.cfl_limit(bmax);
    std::size_t sub;
    if (g.dt > 0) {
        sub = static_cast<std::size_t>(std::llround(out_dt / g.dt));
        require(sub >= 1 && std::abs(out_dt / g.dt - static_cast<double>(sub)) < 1e-9 * static_cast<double>(sub),
                "viscous dt must divide the output spacing");
        if (!g.implicit && g.dt > lim * (1 + 1e-12))
            throw Error("viscous step violates the CFL bound dt <= 0.5 min(dx^2/eps, dx/max|b|); set implicit");
    } else {
        // Also keep every explicit-part coefficient nonnegative: 2 dt max|b| / dx + eps dt / dx^2 <= 1.
        const double pos = 1.0 / (2.0 * bmax / h + g.eps / (h * h));
        sub = static_cast<std::size_t>(std::ceil(out_dt / std::min(lim, pos) - 1e-9));
    }
    const double dt = out_dt / static_cast<double>(sub);

    std::vector<double> u = detail::splat(nu, g);
    auto total = [&](const std::vector<double>& v) {
        long double s = 0.0L;
        for (double x : v) s += x;
        return static_cast<double>(s * h);
    };
    const double mass0 = total(u);
    FPRun run;
    run.grid = g;
    run.dt = dt;
    run.min_value = *std::min_element(u.begin(), u.end());

    const double r = g.eps * dt / (h * h);
    const double c = dt / h;
    std::vector<double> bf(n + 1, 0.0), lo(n), di(n), up(n), rhs(n);
    std::vector<SignedMeasure> slices;
    slices.reserve(output_steps + 1);
    slices.push_back(detail::cells_to_measure(u, g));
    for (std::size_t o = 0; o < output_steps; ++o) {
        for (std::size_t s = 0; s < sub; ++s) {
            const double t = out_dt * static_cast<double>(o) + dt * static_cast<double>(s);
            const double tb = g.implicit ? t + dt : t;
            for (std::size_t i = 1; i < n; ++i) bf[i] = b.at(faces[i], tb);  // walls keep bf = 0
            if (g.implicit) {
                for (std::size_t i = 0; i < n; ++i) {
                    const double bl = bf[i], br = bf[i + 1];
                    const double kl = i > 0 ? r : 0.0, kr = i + 1 < n ? r : 0.0;
                    di[i] = 1.0 + c * (std::max(br, 0.0) - std::min(bl, 0.0)) + kl + kr;
                    up[i] = c * std::min(br, 0.0) - kr;
                    lo[i] = -c * std::max(bl, 0.0) - kl;
                    rhs[i] = u[i];
                }
            } else {
                for (std::size_t i = 0; i < n; ++i) {
                    const double kl = i > 0 ? 0.5 * r : 0.0, kr = i + 1 < n ? 0.5 * r : 0.0;
                    const double fl = i > 0 ? std::max(bf[i], 0.0) * u[i - 1] + std::min(bf[i], 0.0) * u[i] : 0.0;
                    const double fr =
                        i + 1 < n ? std::max(bf[i + 1], 0.0) * u[i] + std::min(bf[i + 1], 0.0) * u[i + 1] : 0.0;
                    double v = u[i] - c * (fr - fl);
                    if (i > 0) v += kl * (u[i - 1] - u[i]);
                    if (i + 1 < n) v += kr * (u[i + 1] - u[i]);
                    rhs[i] = v;
                    di[i] = 1.0 + kl + kr;
                    up[i] = -kr;
                    lo[i] = -kl;
                }
            }
            detail::solve_tridiagonal(lo, di, up, rhs);
            u.swap(rhs);
            run.mass_error = std::max(run.mass_error, std::abs(total(u) - mass0));
            run.min_value = std::min(run.min_value, *std::min_element(u.begin(), u.end()));
            ++run.steps;
        }
        slices.push_back(detail::cells_to_measure(u, g));
    }
    run.path = MeasurePath(T, std::move(slices));
    return run;
}

/// Time to go from x0 to x along x' = b(x): int_{x0}^x dy / b(y).
inline double time_map(const VectorField& b, double x0, double x) {
    if (x == x0) return 0.0;
    return quad::tanh_sinh([&](double y) { return 1.0 / b.at(y); }, x0, x, 1e-12);
}

/// Upper extreme trajectory from x0 (b >= 0): the inverse of the time map.
inline double upper_extreme(const VectorField& b, double x0, double t) {
    if (t <= 0) return x0;
    double lo = x0, step = 1e-3, hi = x0 + step;
    while (time_map(b, x0, hi) < t) {
        lo = hi;
        step *= 2.0;
        hi = x0 + step;
        require(step < 1e12, "upper extreme trajectory escapes");
    }
    for (int i = 0; i < 200 && hi - lo > 1e-15 * std::max(1.0, std::abs(hi)); ++i) {
        const double m = 0.5 * (lo + hi);
        (time_map(b, x0, m) < t ? lo : hi) = m;
    }
    return 0.5 * (lo + hi);
}

/// Integrability of 1/b on (x0, x0 + delta]: the tail increments
/// int_{x0 + 10^{-4(j+1)} delta}^{x0 + 10^{-4j} delta} must shrink geometrically.
inline bool reciprocal_integrable(const VectorField& b, double x0, double delta = 0.1) {
    auto piece = [&](double a, double c) {
        // substitute y = x0 + e^s to resolve the singular end
        return quad::gauss_kronrod(
                   [&](double s) {
                       const double y = x0 + std::exp(s);
                       const double v = b.at(y);
                       return v > 0 ? std::exp(s) / v : std::numeric_limits<double>::infinity();
                   },
                   std::log(a), std::log(c), 1e-12)
            .value;
    };
    std::vector<double> inc;
    double hi = delta;
    for (int j = 0; j < 4; ++j) {
        const double lo = hi * 1e-4;
        const double v = piece(lo, hi);
        if (!std::isfinite(v)) return false;
        inc.push_back(v);
        hi = lo;
    }
    for (std::size_t j = 1; j < inc.size(); ++j)
        if (inc[j] > 0.5 * inc[j - 1] + 1e-300) return false;
    return true;
}

struct SelectionRow {
    double eps = 0.0;
    std::vector<double> medians, mass_near_zero, distance;
    double terminal_median = 0.0, terminal_distance = 0.0, sup_distance = 0.0, terminal_mass_near_zero = 0.0;
    double mass_error = 0.0, min_value = 0.0, dt = 0.0;
};

struct SelectionResult {
    double x0 = 0.0;
    double dx = 0.0;
    std::vector<double> times, extreme;
    std::vector<SelectionRow> rows;
    bool distance_non_increasing = false;  ///< terminal distances, tolerance 1.5 dx
    bool mass_decreasing = false;          ///< terminal mass in [x0 - dx, x0 + dx]
};

/// Vanishing-viscosity runs over an eps schedule from nu (median x0), tracked
/// against the upper extreme trajectory from x0.
inline SelectionResult selection_experiment(const VectorField& b, const SignedMeasure& nu, const std::vector<double>& eps,
                                            FPGrid grid, double T, std::size_t output_steps = 100) {
    require(!eps.empty(), "selection experiment needs an eps schedule");
    require(sampled_min(b, grid.a, grid.b) >= 0.0, "selection experiment requires b >= 0");
    SelectionResult res;
    res.x0 = quantile(nu, 0.5);
    res.dx = grid.dx();
    if (!reciprocal_integrable(b, res.x0)) throw Error("1/b not integrable: selection result does not apply");
    for (std::size_t i = 0; i <= output_steps; ++i) {
        const double t = T * static_cast<double>(i) / static_cast<double>(output_steps);
        res.times.push_back(t);
        res.extreme.push_back(upper_extreme(b, res.x0, t));
    }
    require(res.extreme.back() <= grid.b - 0.1 * (grid.b - grid.a),
            "viscous grid too short: the upper extreme trajectory must stay 10% of the width inside");
    res.rows.resize(eps.size());
    parallel_for(eps.size(), [&](std::size_t j) {
        FPGrid g = grid;
        g.eps = eps[j];
        const FPRun run = solve_fp_1d(b, nu, g, T, output_steps);
        SelectionRow& row = res.rows[j];
        row.eps = eps[j];
        row.dt = run.dt;
        row.mass_error = run.mass_error;
        row.min_value = run.min_value;
        const Box near = Box::interval(res.x0 - res.dx, res.x0 + res.dx);
        for (std::size_t i = 0; i <= output_steps; ++i) {
            const auto& s = run.path.slice(i);
            const double m = quantile(s, 0.5);
            row.medians.push_back(m);
            row.mass_near_zero.push_back(signed_mass(s, near));
            row.distance.push_back(std::abs(m - res.extreme[i]));
            row.sup_distance = std::max(row.sup_distance, row.distance.back());
        }
        row.terminal_median = row.medians.back();
        row.terminal_distance = row.distance.back();
        row.terminal_mass_near_zero = row.mass_near_zero.back();
    });
    res.distance_non_increasing = true;
    res.mass_decreasing = true;
    for (std::size_t j = 1; j < res.rows.size(); ++j) {
        if (res.rows[j].terminal_distance > res.rows[j - 1].terminal_distance + 1.5 * res.dx)
            res.distance_non_increasing = false;
        if (!(res.rows[j].terminal_mass_near_zero < res.rows[j - 1].terminal_mass_near_zero))
            res.mass_decreasing = false;
    }
    return res;
}

inline void write_selection_csv(std::ostream& os, const SelectionResult& r) {
    os << "eps,t,median,mass_near_zero,distance_to_extreme\n";
    os.precision(17);
    for (const auto& row : r.rows)
        for (std::size_t i = 0; i < r.times.size(); ++i)
            os << row.eps << ',' << r.times[i] << ',' << row.medians[i] << ',' << row.mass_near_zero[i] << ','
               << row.distance[i] << '\n';
}

inline Json to_json(const SelectionResult& r) {
    Json rows = Json::array();
    for (const auto& row : r.rows)
        rows.push_back(Json{{"eps", row.eps},
                            {"dt", row.dt},
                            {"terminal_median", row.terminal_median},
                            {"terminal_distance", row.terminal_distance},
                            {"sup_distance", row.sup_distance},
                            {"terminal_mass_near_zero", row.terminal_mass_near_zero},
                            {"mass_error", row.mass_error},
                            {"min_value", row.min_value}});
    return Json{{"x0", r.x0},
                {"dx", r.dx},
                {"terminal_extreme", r.extreme.back()},
                {"rows", rows},
                {"distance_non_increasing", r.distance_non_increasing},
                {"mass_decreasing", r.mass_decreasing}};
}

}  // namespace contlab
