#pragma once

#include <cmath>
#include <limits>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "contlab/fields.hpp"
#include "contlab/measure.hpp"
#include "contlab/measure_io.hpp"
#include "contlab/pairs.hpp"

namespace contlab {

/// Fixed-step RK4 settings and the output grid t_i = i T / M.
struct FlowConfig {
    double dt_ode = 1e-3;
    double horizon = 1.0;
    std::size_t output_steps = 1000;

    double output_dt() const { return horizon / static_cast<double>(output_steps); }

    /// ODE steps per output interval; throws unless dt_ode divides it.
    std::size_t substeps() const {
        require(dt_ode > 0 && std::isfinite(dt_ode), "dt_ode must be positive");
        require(horizon > 0 && output_steps >= 1, "flow horizon and output grid must be positive");
        const double r = output_dt() / dt_ode;
        const double n = std::round(r);
        require(n >= 1 && std::abs(r - n) <= 1e-9 * std::max(1.0, r), "dt_ode must divide the output spacing");
        return static_cast<std::size_t>(n);
    }
};

namespace detail {

using LPoint = std::vector<long double>;

inline Point to_point(const LPoint& x) { return Point(x.begin(), x.end()); }

[[noreturn]] inline void blow_up(double t) {
    std::ostringstream os;
    os.precision(6);
    os << "trajectory blow-up at t=" << t;
    throw Error(os.str());
}

/// n RK4 steps of size h from (x, t). The state is accumulated in long double
/// so the O(h^4) error stays visible above rounding.
inline void rk4_steps(const VectorField& b, LPoint& x, double t0, double h, std::size_t n) {
    const std::size_t d = x.size();
    Point y(d);
    auto stage = [&](const LPoint& base, const Point& k, long double c) {
        for (std::size_t i = 0; i < d; ++i) y[i] = static_cast<double>(base[i] + c * k[i]);
        return y;
    };
    for (std::size_t s = 0; s < n; ++s) {
        const double t = t0 + h * static_cast<double>(s);
        const long double lh = h;
        for (std::size_t i = 0; i < d; ++i) y[i] = static_cast<double>(x[i]);
        const Point k1 = b(y, t);
        const Point k2 = b(stage(x, k1, 0.5L * lh), t + 0.5 * h);
        const Point k3 = b(stage(x, k2, 0.5L * lh), t + 0.5 * h);
        const Point k4 = b(stage(x, k3, lh), t + h);
        for (std::size_t i = 0; i < d; ++i) {
            x[i] += lh / 6.0L * (static_cast<long double>(k1[i]) + 2.0L * k2[i] + 2.0L * k3[i] + k4[i]);
            if (!std::isfinite(static_cast<double>(x[i]))) blow_up(t + h);
        }
    }
}

}  // namespace detail

/// Endpoint of x' = b(x, t), x(t0) = x0, integrated to t1 (t1 < t0 runs
/// backward) with steps of at most dt.
inline Point flow_map(const VectorField& b, const Point& x0, double t0, double t1, double dt = 1e-3) {
    require(x0.size() == b.dimension(), "flow_map: dimension mismatch");
    require(dt > 0, "dt_ode must be positive");
    require(all_finite(x0), "flow_map: non-finite initial point");
    if (t1 == t0) return x0;
    const std::size_t n = static_cast<std::size_t>(std::max(1.0, std::ceil(std::abs(t1 - t0) / dt - 1e-9)));
    const double h = (t1 - t0) / static_cast<double>(n);
    detail::LPoint x(x0.begin(), x0.end());
    detail::rk4_steps(b, x, t0, h, n);
    return detail::to_point(x);
}

inline Point flow_map(const VectorField& b, const Point& x0, double t0, double t1, const FlowConfig& cfg) {
    return flow_map(b, x0, t0, t1, cfg.dt_ode);
}

/// Positions on the output grid of cfg, starting from x0 at t = 0.
inline std::vector<Point> flow_trajectory(const VectorField& b, const Point& x0, const FlowConfig& cfg) {
    require(x0.size() == b.dimension(), "flow_map: dimension mismatch");
    const std::size_t sub = cfg.substeps();
    const double h = cfg.output_dt() / static_cast<double>(sub);
    std::vector<Point> out;
    out.reserve(cfg.output_steps + 1);
    out.push_back(x0);
    detail::LPoint x(x0.begin(), x0.end());
    for (std::size_t i = 0; i < cfg.output_steps; ++i) {
        const double t = cfg.horizon * static_cast<double>(i) / static_cast<double>(cfg.output_steps);
        detail::rk4_steps(b, x, t, h, sub);
        out.push_back(detail::to_point(x));
    }
    return out;
}

/// Transports each atom along its characteristic; weights are unchanged.
inline MeasurePath solve_atomic(const VectorField& b, const SignedMeasure& nu, const FlowConfig& cfg,
                                std::size_t workers = thread_cap()) {
    require(nu.purely_atomic(), "solve_atomic requires a purely atomic initial measure");
    require(nu.dimension() == b.dimension(), "solve_atomic: dimension mismatch");
    cfg.substeps();
    const auto& atoms = nu.atoms();
    std::vector<std::vector<Point>> traj(atoms.size());
    parallel_for(atoms.size(), [&](std::size_t j) { traj[j] = flow_trajectory(b, atoms[j].x, cfg); }, workers);
    std::vector<SignedMeasure> slices;
    slices.reserve(cfg.output_steps + 1);
    for (std::size_t i = 0; i <= cfg.output_steps; ++i) {
        std::vector<Atom> at;
        at.reserve(atoms.size());
        for (std::size_t j = 0; j < atoms.size(); ++j) at.push_back({traj[j][i], atoms[j].w});
        slices.emplace_back(nu.dimension(), std::move(at));
    }
    return MeasurePath(cfg.horizon, std::move(slices));
}

namespace detail {

/// Same density on a grid with at least `cells` cells (original nodes kept).
inline DensityPiece refine_piece(const DensityPiece& pc, std::size_t cells) {
    const double width = pc.hi() - pc.lo();
    DensityPiece out;
    for (std::size_t i = 0; i + 1 < pc.grid.size(); ++i) {
        const double a = pc.grid[i], c = pc.grid[i + 1];
        const std::size_t m =
            std::max<std::size_t>(1, static_cast<std::size_t>(std::ceil(static_cast<double>(cells) * (c - a) / width - 1e-9)));
        for (std::size_t q = 0; q < m; ++q) {
            const double s = static_cast<double>(q) / static_cast<double>(m);
            out.grid.push_back(q == 0 ? a : a + s * (c - a));
            out.values.push_back(q == 0 ? pc.values[i] : pc.values[i] + s * (pc.values[i + 1] - pc.values[i]));
        }
    }
    out.grid.push_back(pc.grid.back());
    out.values.push_back(pc.values.back());
    return out;
}

}  // namespace detail

/// 1D transport of densities (and any atoms) by advecting the grid nodes and
/// cell midpoints; every cell keeps its mass. Pieces are first refined to at
/// least `cells` cells each.
inline MeasurePath solve_density_1d(const VectorField& b, const SignedMeasure& input, const FlowConfig& cfg,
                                    std::size_t workers = thread_cap(), std::size_t cells = 1000) {
    require(input.dimension() == 1 && b.dimension() == 1, "solve_density_1d requires d = 1");
    cfg.substeps();
    std::vector<DensityPiece> refined;
    for (const auto& pc : input.density()) refined.push_back(detail::refine_piece(pc, cells));
    const SignedMeasure nu(1, input.atoms(), std::move(refined));
    // All tracked points: atoms first, then per piece nodes and midpoints.
    std::vector<double> starts;
    for (const auto& a : nu.atoms()) starts.push_back(a.x[0]);
    std::vector<std::size_t> piece_offset;
    for (const auto& pc : nu.density()) {
        piece_offset.push_back(starts.size());
        for (std::size_t i = 0; i < pc.grid.size(); ++i) {
            starts.push_back(pc.grid[i]);
            if (i + 1 < pc.grid.size()) starts.push_back(0.5 * (pc.grid[i] + pc.grid[i + 1]));
        }
    }
    std::vector<std::vector<Point>> traj(starts.size());
    parallel_for(starts.size(), [&](std::size_t j) { traj[j] = flow_trajectory(b, {starts[j]}, cfg); }, workers);

    std::vector<SignedMeasure> slices;
    slices.reserve(cfg.output_steps + 1);
    const std::size_t na = nu.atoms().size();
    for (std::size_t i = 0; i <= cfg.output_steps; ++i) {
        std::vector<Atom> at;
        for (std::size_t j = 0; j < na; ++j) at.push_back({traj[j][i], nu.atoms()[j].w});
        std::vector<DensityPiece> pieces;
        double prev_hi = -std::numeric_limits<double>::infinity();
        for (std::size_t p = 0; p < nu.density().size(); ++p) {
            const auto& pc = nu.density()[p];
            const std::size_t n = pc.grid.size();
            std::vector<double> yn(n), ym(n - 1);
            std::size_t idx = piece_offset[p];
            double last = prev_hi;
            for (std::size_t q = 0; q < n; ++q) {
                yn[q] = traj[idx++][i][0];
                if (!(yn[q] > last)) throw Error("characteristics crossed; use viscous solver");
                last = yn[q];
                if (q + 1 < n) {
                    ym[q] = traj[idx++][i][0];
                    if (!(ym[q] > last)) throw Error("characteristics crossed; use viscous solver");
                    last = ym[q];
                }
            }
            prev_hi = last;
            pieces.push_back(transport_piece(pc, yn, ym));
        }
        slices.emplace_back(1, std::move(at), std::move(pieces));
    }
    return MeasurePath(cfg.horizon, std::move(slices));
}

/// Atomic measures go through solve_atomic, anything with a density through
/// solve_density_1d.
inline MeasurePath solve(const VectorField& b, const SignedMeasure& nu, const FlowConfig& cfg,
                         std::size_t workers = thread_cap()) {
    return nu.purely_atomic() ? solve_atomic(b, nu, cfg, workers) : solve_density_1d(b, nu, cfg, workers);
}

/// lhs - rhs of int u(t) dmu_t = int u(0) dnu + int_0^t int [u_t + <b, grad u> + eps lap u] dmu_s ds,
/// with Simpson weights in time.
inline double weak_residual(const MeasurePath& path, const VectorField& b, const TestFunction& u, double t,
                            double eps = 0.0) {
    require(path.dimension() == b.dimension(), "weak_residual: dimension mismatch");
    const std::size_t I = path.index_of(t);
    const double tt = path.times()[I];
    const Box region = Box::cube(path.dimension(), -u.support_radius, u.support_radius);
    const double lhs = integrate(path.slice(I), [&](const Point& x) { return u.value(x, tt); }, region);
    const double init = integrate(path.slice(0), [&](const Point& x) { return u.value(x, 0.0); }, region);
    if (eps != 0.0) require(static_cast<bool>(u.laplacian), "viscous weak form needs the test-function laplacian");
    auto integrand = [&](const Point& x, double s) {
        double v = u.time_derivative(x, s);
        const Point g = u.gradient(x, s);
        bool any = false;
        for (double gi : g) any = any || gi != 0.0;
        if (any) v += dot(b(x, s), g);
        if (eps != 0.0) v += eps * u.laplacian(x, s);
        return v;
    };
    const double flux = path_integrate(path, integrand, region, TimeRule::Simpson, tt);
    return lhs - (init + flux);
}

struct ExistenceOptions {
    double gate_factor = 2.0;       ///< moment gate: int V_k dnu <= factor * int V_{k_1} dnu
    std::size_t distance_stride = 1;  ///< output times between bl_distance evaluations
    std::optional<Box> region;      ///< bl_distance region; default: support hull + 1
};

struct ExistenceRun {
    std::vector<double> ks;
    std::vector<MeasurePath> paths;
    std::vector<double> initial_moments;        ///< int V_k dnu
    std::vector<std::vector<double>> moments;   ///< m_k(t_i)
    std::vector<double> distance_times;
    std::vector<std::vector<double>> distances;  ///< [j][i]: paths j and j+1 at distance_times[i]
    Box region;
    bool cauchy = false;
    double mass_error = 0.0;
    std::size_t candidate = 0;

    const MeasurePath& candidate_path() const { return paths.at(candidate); }
};

namespace detail {

inline bool nonnegative(const SignedMeasure& m) {
    for (const auto& a : m.atoms())
        if (a.w < 0) return false;
    for (const auto& pc : m.density())
        for (double v : pc.values)
            if (v < 0) return false;
    return true;
}

/// Bounding box of every slice support of every path, inflated by `pad`.
inline Box support_hull(const std::vector<MeasurePath>& paths, double pad) {
    const std::size_t d = paths.front().dimension();
    const double inf = std::numeric_limits<double>::infinity();
    Point lo(d, inf), hi(d, -inf);
    for (const auto& p : paths)
        for (const auto& s : p.slices()) {
            for (const auto& a : s.atoms())
                for (std::size_t i = 0; i < d; ++i) {
                    lo[i] = std::min(lo[i], a.x[i]);
                    hi[i] = std::max(hi[i], a.x[i]);
                }
            for (const auto& pc : s.density()) {
                lo[0] = std::min(lo[0], pc.lo());
                hi[0] = std::max(hi[0], pc.hi());
            }
        }
    for (std::size_t i = 0; i < d; ++i)
        if (lo[i] > hi[i]) lo[i] = hi[i] = 0.0;
    return Box{lo, hi}.inflated(pad);
}

inline std::string format_k(double k) {
    std::ostringstream os;
    os << k;
    return os.str();
}

}  // namespace detail

/// Solves with each b_k of the schedule and records V-moments and
/// consecutive flat distances; the largest-k path is the candidate limit.
inline ExistenceRun existence_sequence(const std::vector<ApproximationPair>& pairs, const SignedMeasure& nu,
                                       const FlowConfig& cfg, const ExistenceOptions& opt = {}) {
    require(!pairs.empty(), "existence_sequence needs at least one pair");
    require(detail::nonnegative(nu), "existence_sequence requires a nonnegative initial measure");
    require(opt.distance_stride >= 1, "distance_stride must be >= 1");
    ExistenceRun run;
    for (const auto& p : pairs) {
        require(p.dimension() == nu.dimension(), "existence_sequence: dimension mismatch");
        run.ks.push_back(p.k);
        const double M = integrate(nu, [&](const Point& x) { return p.V(x); });
        if (!std::isfinite(M)) throw Error("moment gate failed at k=" + detail::format_k(p.k) + ": int V_k dnu is not finite");
        run.initial_moments.push_back(M);
    }
    const double M0 = run.initial_moments.front();
    for (std::size_t j = 0; j < pairs.size(); ++j)
        if (run.initial_moments[j] > opt.gate_factor * M0 + 1e-12) {
            std::ostringstream os;
            os.precision(6);
            os << "moment gate failed at k=" << pairs[j].k << ": int V_k dnu = " << run.initial_moments[j]
               << " exceeds " << opt.gate_factor << " x " << M0 << " (k=" << pairs.front().k
               << "); sup_k int V_k dnu looks unbounded";
            throw Error(os.str());
        }

    const std::size_t K = pairs.size();
    run.paths.resize(K);
    run.moments.resize(K);
    parallel_for(K, [&](std::size_t j) {
        run.paths[j] = solve(pairs[j].bk, nu, cfg, 1);
        auto& m = run.moments[j];
        for (const auto& s : run.paths[j].slices()) m.push_back(integrate(s, [&](const Point& x) { return pairs[j].V(x); }));
    });
    const double mass0 = nu.total_mass();
    for (const auto& p : run.paths)
        for (const auto& s : p.slices()) run.mass_error = std::max(run.mass_error, std::abs(s.total_mass() - mass0));

    run.region = opt.region ? *opt.region : detail::support_hull(run.paths, 1.0);
    const auto& times = run.paths.front().times();
    std::vector<std::size_t> idx;
    for (std::size_t i = 0; i < times.size(); i += opt.distance_stride) idx.push_back(i);
    if (idx.back() != times.size() - 1) idx.push_back(times.size() - 1);
    for (std::size_t i : idx) run.distance_times.push_back(times[i]);
    run.distances.assign(K > 0 ? K - 1 : 0, std::vector<double>(idx.size(), 0.0));
    parallel_for((K - 1) * idx.size(), [&](std::size_t q) {
        const std::size_t j = q / idx.size(), i = q % idx.size();
        run.distances[j][i] = bl_distance(run.paths[j].slice(idx[i]), run.paths[j + 1].slice(idx[i]), run.region).value;
    });
    run.cauchy = K >= 3;
    for (std::size_t j = 0; j + 1 < run.distances.size(); ++j) {
        const double a = *std::max_element(run.distances[j].begin(), run.distances[j].end());
        const double c = *std::max_element(run.distances[j + 1].begin(), run.distances[j + 1].end());
        if (!(c < a)) run.cauchy = false;
    }
    run.candidate = K - 1;
    return run;
}

struct GronwallReport {
    double C3 = 0.0;
    std::vector<std::vector<double>> slack;  ///< [k][t] e^{C3 t} m_k(0) - m_k(t)
    double min_slack = std::numeric_limits<double>::infinity();
    double compat_C1 = 9.0, compat_C2 = 0.0;
    double compat_margin = std::numeric_limits<double>::infinity();  ///< min (C1 V_m + C2 - V_k), k > m
    std::size_t compat_points = 0;
};

/// Gronwall slack of the recorded moments plus the compatibility bound
/// V_k <= C1 V_m + C2 (k > m) at the support points visited by the run.
inline GronwallReport gronwall_check(const ExistenceRun& run, const std::vector<ApproximationPair>& pairs, double C3,
                                     double compat_C1 = 9.0, double compat_C2 = 0.0) {
    require(pairs.size() == run.paths.size(), "gronwall_check: pairs do not match the run");
    GronwallReport r;
    r.C3 = C3;
    r.compat_C1 = compat_C1;
    r.compat_C2 = compat_C2;
    for (std::size_t j = 0; j < run.moments.size(); ++j) {
        const auto& m = run.moments[j];
        const auto& times = run.paths[j].times();
        std::vector<double> s(m.size());
        for (std::size_t i = 0; i < m.size(); ++i) {
            s[i] = std::exp(C3 * times[i]) * m[0] - m[i];
            r.min_slack = std::min(r.min_slack, s[i]);
        }
        r.slack.push_back(std::move(s));
    }
    std::vector<Point> pts;
    for (const auto& p : run.paths)
        for (const auto& sl : p.slices()) {
            for (const auto& a : sl.atoms()) pts.push_back(a.x);
            for (const auto& pc : sl.density())
                for (double x : pc.grid) pts.push_back({x});
        }
    std::sort(pts.begin(), pts.end(), detail::point_less);
    pts.erase(std::unique(pts.begin(), pts.end()), pts.end());
    r.compat_points = pts.size();
    for (std::size_t k = 0; k < pairs.size(); ++k)
        for (std::size_t m = 0; m < k; ++m)
            for (const auto& x : pts)
                r.compat_margin = std::min(r.compat_margin, compat_C1 * pairs[m].V(x) + compat_C2 - pairs[k].V(x));
    return r;
}

inline Json to_json(const ExistenceRun& run) {
    Json j{{"ks", run.ks},
           {"initial_moments", run.initial_moments},
           {"times", run.paths.empty() ? std::vector<double>{} : run.paths.front().times()},
           {"moments", run.moments},
           {"distance_times", run.distance_times},
           {"distances", run.distances},
           {"cauchy", run.cauchy},
           {"mass_error", run.mass_error},
           {"candidate_k", run.ks.empty() ? 0.0 : run.ks[run.candidate]}};
    return j;
}

inline Json to_json(const GronwallReport& g) {
    Json j{{"C3", g.C3}, {"min_slack", g.min_slack}, {"compat_C1", g.compat_C1}, {"compat_C2", g.compat_C2},
           {"compat_margin", g.compat_margin}, {"compat_points", g.compat_points}};
    return j;
}

}  // namespace contlab
