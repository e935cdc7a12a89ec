#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <map>
#include <optional>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "contlab/core.hpp"
#include "contlab/quadrature.hpp"

namespace contlab {

struct Atom {
    Point x;
    double w = 0.0;
};

/// One piecewise-linear density segment; zero outside [grid.front(), grid.back()].
struct DensityPiece {
    std::vector<double> grid;
    std::vector<double> values;

    double lo() const { return grid.front(); }
    double hi() const { return grid.back(); }

    /// Linear interpolation inside the span, 0 outside.
    double at(double x) const {
        if (x < grid.front() || x > grid.back()) return 0.0;
        auto it = std::upper_bound(grid.begin(), grid.end(), x);
        std::size_t j = static_cast<std::size_t>(it - grid.begin());
        if (j == 0) j = 1;
        if (j >= grid.size()) j = grid.size() - 1;
        const double x0 = grid[j - 1], x1 = grid[j];
        const double s = (x - x0) / (x1 - x0);
        return values[j - 1] + s * (values[j] - values[j - 1]);
    }
};

namespace detail {

inline bool point_less(const Point& a, const Point& b) {
    return std::lexicographical_compare(a.begin(), a.end(), b.begin(), b.end());
}

inline std::vector<Atom> canonical_atoms(std::vector<Atom> atoms, std::size_t d) {
    for (const auto& a : atoms) {
        require(a.x.size() == d, "atom location has wrong dimension");
        require(all_finite(a.x), "atom location must be finite");
        require(std::isfinite(a.w), "atom weight must be finite");
    }
    std::stable_sort(atoms.begin(), atoms.end(),
                     [](const Atom& a, const Atom& b) { return point_less(a.x, b.x); });
    std::vector<Atom> out;
    out.reserve(atoms.size());
    for (auto& a : atoms) {
        if (!out.empty() && out.back().x == a.x)
            out.back().w += a.w;
        else
            out.push_back(std::move(a));
    }
    out.erase(std::remove_if(out.begin(), out.end(), [](const Atom& a) { return a.w == 0.0; }),
              out.end());
    return out;
}

/// Value of a piece just right of p (from) / just left of q (to), where
/// [p, q] lies inside a single cell of the piece.
inline std::pair<double, double> piece_segment_values(const DensityPiece& pc, double p, double q) {
    const double mid = 0.5 * (p + q);
    auto it = std::upper_bound(pc.grid.begin(), pc.grid.end(), mid);
    std::size_t j = static_cast<std::size_t>(it - pc.grid.begin());
    const double x0 = pc.grid[j - 1], x1 = pc.grid[j];
    const double v0 = pc.values[j - 1], v1 = pc.values[j];
    auto lerp = [&](double x) {
        if (x == x0) return v0;
        if (x == x1) return v1;
        return v0 + (x - x0) / (x1 - x0) * (v1 - v0);
    };
    return {lerp(p), lerp(q)};
}

/// Sum of (possibly overlapping) pieces rewritten as disjoint pieces. Jumps
/// split pieces; identically-zero stretches are dropped.
inline std::vector<DensityPiece> canonical_density(const std::vector<DensityPiece>& pieces) {
    for (const auto& pc : pieces) {
        require(pc.grid.size() >= 2 && pc.grid.size() == pc.values.size(),
                "density grid and values must have equal length >= 2");
        for (std::size_t i = 0; i < pc.grid.size(); ++i) {
            require(std::isfinite(pc.grid[i]) && std::isfinite(pc.values[i]),
                    "density entries must be finite");
            if (i > 0) require(pc.grid[i] > pc.grid[i - 1], "density grid must be strictly increasing");
        }
    }
    if (pieces.empty()) return {};
    if (pieces.size() == 1) {
        // Fast path: only drop zero stretches.
        bool any_zero_cell = false;
        const auto& pc = pieces[0];
        for (std::size_t i = 0; i + 1 < pc.grid.size(); ++i)
            if (pc.values[i] == 0.0 && pc.values[i + 1] == 0.0) any_zero_cell = true;
        if (!any_zero_cell) return pieces;
    }
    std::vector<double> bp;
    for (const auto& pc : pieces) bp.insert(bp.end(), pc.grid.begin(), pc.grid.end());
    std::sort(bp.begin(), bp.end());
    bp.erase(std::unique(bp.begin(), bp.end()), bp.end());

    std::vector<DensityPiece> out;
    bool open = false;
    double prev_right = 0.0, prev_q = 0.0;
    for (std::size_t s = 0; s + 1 < bp.size(); ++s) {
        const double p = bp[s], q = bp[s + 1];
        double l = 0.0, r = 0.0;
        for (const auto& pc : pieces) {
            if (p < pc.lo() || q > pc.hi()) continue;
            auto [a, b] = piece_segment_values(pc, p, q);
            l += a;
            r += b;
        }
        if (l == 0.0 && r == 0.0) {
            open = false;
            continue;
        }
        if (open && prev_q == p && prev_right == l) {
            out.back().grid.push_back(q);
            out.back().values.push_back(r);
        } else {
            out.push_back(DensityPiece{{p, q}, {l, r}});
        }
        open = true;
        prev_right = r;
        prev_q = q;
    }
    return out;
}

/// Exact integral of |v| for v linear on [x0, x1].
inline double abs_linear_integral(double x0, double x1, double v0, double v1) {
    const double w = x1 - x0;
    if ((v0 >= 0 && v1 >= 0) || (v0 <= 0 && v1 <= 0)) return 0.5 * w * (std::abs(v0) + std::abs(v1));
    const double r = w * v0 / (v0 - v1);
    return 0.5 * (std::abs(v0) * r + std::abs(v1) * (w - r));
}

}  // namespace detail

/// Locally bounded signed measure: finitely many atoms plus, in 1D, a
/// piecewise-linear density. Atoms are merged and sorted on construction.
class SignedMeasure {
  public:
    explicit SignedMeasure(std::size_t d = 1) : d_(d) { require(d >= 1, "dimension must be positive"); }

    SignedMeasure(std::size_t d, std::vector<Atom> atoms, std::vector<DensityPiece> density = {})
        : d_(d) {
        require(d >= 1, "dimension must be positive");
        require(density.empty() || d == 1, "densities are supported only in dimension 1");
        atoms_ = detail::canonical_atoms(std::move(atoms), d);
        density_ = detail::canonical_density(density);
    }

    static SignedMeasure dirac(Point x, double w = 1.0) {
        const std::size_t d = x.size();
        return SignedMeasure(d, {Atom{std::move(x), w}});
    }
    static SignedMeasure dirac1(double x, double w = 1.0) { return dirac(Point{x}, w); }

    /// Density c on [a, b] (1D).
    static SignedMeasure uniform(double a, double b, double c = 1.0) {
        return SignedMeasure(1, {}, {DensityPiece{{a, b}, {c, c}}});
    }

    std::size_t dimension() const { return d_; }
    const std::vector<Atom>& atoms() const { return atoms_; }
    const std::vector<DensityPiece>& density() const { return density_; }
    bool has_density() const { return !density_.empty(); }
    bool empty() const { return atoms_.empty() && density_.empty(); }
    bool purely_atomic() const { return density_.empty(); }

    double density_at(double x) const {
        double s = 0.0;
        for (const auto& pc : density_) s += pc.at(x);
        return s;
    }

    double atomic_mass() const {
        double s = 0.0;
        for (const auto& a : atoms_) s += a.w;
        return s;
    }

    double density_mass() const {
        double s = 0.0;
        for (const auto& pc : density_)
            for (std::size_t i = 0; i + 1 < pc.grid.size(); ++i)
                s += 0.5 * (pc.grid[i + 1] - pc.grid[i]) * (pc.values[i] + pc.values[i + 1]);
        return s;
    }

    /// Signed total mass m(R^d).
    double total_mass() const { return atomic_mass() + density_mass(); }

    SignedMeasure scaled(double c) const {
        std::vector<Atom> at = atoms_;
        for (auto& a : at) a.w *= c;
        std::vector<DensityPiece> dn = density_;
        for (auto& pc : dn)
            for (auto& v : pc.values) v *= c;
        return SignedMeasure(d_, std::move(at), std::move(dn));
    }

    SignedMeasure operator+(const SignedMeasure& o) const {
        require(o.d_ == d_, "measures must share dimension");
        std::vector<Atom> at = atoms_;
        at.insert(at.end(), o.atoms_.begin(), o.atoms_.end());
        std::vector<DensityPiece> dn = density_;
        dn.insert(dn.end(), o.density_.begin(), o.density_.end());
        return SignedMeasure(d_, std::move(at), std::move(dn));
    }
    SignedMeasure operator-(const SignedMeasure& o) const { return *this + o.scaled(-1.0); }

    /// Total variation measure |m|. Density cells with a sign change are split
    /// at the root so |density| stays piecewise linear.
    SignedMeasure abs() const {
        std::vector<Atom> at = atoms_;
        for (auto& a : at) a.w = std::abs(a.w);
        std::vector<DensityPiece> dn;
        for (const auto& pc : density_) {
            DensityPiece q;
            for (std::size_t i = 0; i < pc.grid.size(); ++i) {
                if (i > 0) {
                    const double v0 = pc.values[i - 1], v1 = pc.values[i];
                    if ((v0 < 0 && v1 > 0) || (v0 > 0 && v1 < 0)) {
                        const double x0 = pc.grid[i - 1], x1 = pc.grid[i];
                        const double r = x0 + (x1 - x0) * v0 / (v0 - v1);
                        if (r > x0 && r < x1) {
                            q.grid.push_back(r);
                            q.values.push_back(0.0);
                        }
                    }
                }
                q.grid.push_back(pc.grid[i]);
                q.values.push_back(std::abs(pc.values[i]));
            }
            dn.push_back(std::move(q));
        }
        return SignedMeasure(d_, std::move(at), std::move(dn));
    }

    /// Restriction to a closed box (atoms inside, density clipped).
    SignedMeasure restricted(const Box& region) const {
        std::vector<Atom> at;
        for (const auto& a : atoms_)
            if (region.contains(a.x)) at.push_back(a);
        std::vector<DensityPiece> dn;
        if (!density_.empty()) {
            const double lo = region.lo[0], hi = region.hi[0];
            for (const auto& pc : density_) {
                const double a = std::max(lo, pc.lo()), b = std::min(hi, pc.hi());
                if (!(a < b)) continue;
                DensityPiece q;
                q.grid.push_back(a);
                q.values.push_back(pc.at(a));
                for (std::size_t i = 0; i < pc.grid.size(); ++i)
                    if (pc.grid[i] > a && pc.grid[i] < b) {
                        q.grid.push_back(pc.grid[i]);
                        q.values.push_back(pc.values[i]);
                    }
                q.grid.push_back(b);
                q.values.push_back(pc.at(b));
                dn.push_back(std::move(q));
            }
        }
        return SignedMeasure(d_, std::move(at), std::move(dn));
    }

  private:
    std::size_t d_;
    std::vector<Atom> atoms_;
    std::vector<DensityPiece> density_;
};

namespace detail {

/// Calls fn(x0, x1, v0, v1) on every density cell clipped to [lo, hi].
template <class Fn>
void for_each_cell(const SignedMeasure& m, double lo, double hi, Fn&& fn) {
    for (const auto& pc : m.density()) {
        if (pc.hi() <= lo || pc.lo() >= hi) continue;
        for (std::size_t i = 0; i + 1 < pc.grid.size(); ++i) {
            double x0 = pc.grid[i], x1 = pc.grid[i + 1];
            double v0 = pc.values[i], v1 = pc.values[i + 1];
            if (x1 <= lo || x0 >= hi) continue;
            if (x0 < lo) {
                v0 = v0 + (lo - x0) / (x1 - x0) * (v1 - v0);
                x0 = lo;
            }
            if (x1 > hi) {
                v1 = pc.values[i] + (hi - pc.grid[i]) / (pc.grid[i + 1] - pc.grid[i]) * (v1 - pc.values[i]);
                x1 = hi;
            }
            fn(x0, x1, v0, v1);
        }
    }
}

}  // namespace detail

/// |m|(region) with exact piecewise-linear quadrature for the density part.
inline double total_variation(const SignedMeasure& m, const Box& region) {
    require_bounded(region);
    require(region.dimension() == m.dimension(), "region dimension mismatch");
    double s = 0.0;
    for (const auto& a : m.atoms())
        if (region.contains(a.x)) s += std::abs(a.w);
    if (m.has_density())
        detail::for_each_cell(m, region.lo[0], region.hi[0], [&](double x0, double x1, double v0, double v1) {
            s += detail::abs_linear_integral(x0, x1, v0, v1);
        });
    return s;
}

/// Signed mass m(region), exact.
inline double signed_mass(const SignedMeasure& m, const Box& region) {
    require_bounded(region);
    double s = 0.0;
    for (const auto& a : m.atoms())
        if (region.contains(a.x)) s += a.w;
    if (m.has_density())
        detail::for_each_cell(m, region.lo[0], region.hi[0],
                              [&](double x0, double x1, double v0, double v1) { s += 0.5 * (x1 - x0) * (v0 + v1); });
    return s;
}

using ScalarFn = std::function<double(const Point&)>;

namespace detail {

inline double checked(double v) {
    if (!std::isfinite(v)) throw Error("integrand is not finite on the support of the measure");
    return v;
}

inline double integrate_impl(const SignedMeasure& m, const ScalarFn& phi, const Box* region,
                             double tol) {
    double s = 0.0;
    for (const auto& a : m.atoms())
        if (!region || region->contains(a.x)) s += a.w * checked(phi(a.x));
    if (m.has_density()) {
        const double lo = region ? region->lo[0] : -std::numeric_limits<double>::infinity();
        const double hi = region ? region->hi[0] : std::numeric_limits<double>::infinity();
        Point buf(1);
        detail::for_each_cell(m, lo, hi, [&](double x0, double x1, double v0, double v1) {
            const double slope = (v1 - v0) / (x1 - x0);
            auto f = [&](double x) {
                buf[0] = x;
                return checked(phi(buf)) * (v0 + slope * (x - x0));
            };
            s += quad::simpson(f, x0, x1, tol);
        });
    }
    return s;
}

}  // namespace detail

/// Integral of phi against m. Atoms exactly, density cells by adaptive
/// Simpson with absolute tolerance `tol` per cell.
inline double integrate(const SignedMeasure& m, const ScalarFn& phi, double tol = 1e-12) {
    return detail::integrate_impl(m, phi, nullptr, tol);
}

/// Integral of phi over m restricted to a closed box.
inline double integrate(const SignedMeasure& m, const ScalarFn& phi, const Box& region,
                        double tol = 1e-12) {
    require_bounded(region);
    return detail::integrate_impl(m, phi, &region, tol);
}

/// Maps each density piece given the images of its nodes and cell midpoints.
/// Nodal values follow the local Jacobian; an extra node at each mapped
/// midpoint restores every cell's mass exactly.
inline DensityPiece transport_piece(const DensityPiece& pc, const std::vector<double>& y_nodes,
                                    const std::vector<double>& y_mids) {
    const std::size_t n = pc.grid.size();
    // Interleaved sequence x0, m0, x1, m1, ..., x_{n-1}.
    std::vector<double> seq;
    seq.reserve(2 * n - 1);
    for (std::size_t i = 0; i < n; ++i) {
        seq.push_back(y_nodes[i]);
        if (i + 1 < n) seq.push_back(y_mids[i]);
    }
    bool inc = true, dec = true;
    for (std::size_t i = 1; i < seq.size(); ++i) {
        if (!(seq[i] > seq[i - 1])) inc = false;
        if (!(seq[i] < seq[i - 1])) dec = false;
    }
    if (!inc && !dec) throw Error("density push-forward requires monotone map");

    auto xmid = [&](std::size_t i) { return 0.5 * (pc.grid[i] + pc.grid[i + 1]); };
    std::vector<double> v(n);
    for (std::size_t i = 0; i < n; ++i) {
        double jac;
        if (n == 2 || i == 0)
            jac = (i == 0) ? (y_mids[0] - y_nodes[0]) / (xmid(0) - pc.grid[0])
                           : (y_nodes[1] - y_mids[0]) / (pc.grid[1] - xmid(0));
        else if (i == n - 1)
            jac = (y_nodes[i] - y_mids[i - 1]) / (pc.grid[i] - xmid(i - 1));
        else
            jac = (y_mids[i] - y_mids[i - 1]) / (xmid(i) - xmid(i - 1));
        v[i] = pc.values[i] / std::abs(jac);
    }
    DensityPiece out;
    out.grid.reserve(2 * n - 1);
    out.values.reserve(2 * n - 1);
    for (std::size_t i = 0; i < n; ++i) {
        out.grid.push_back(y_nodes[i]);
        out.values.push_back(v[i]);
        if (i + 1 < n) {
            const double mass = 0.5 * (pc.grid[i + 1] - pc.grid[i]) * (pc.values[i] + pc.values[i + 1]);
            const double wl = std::abs(y_mids[i] - y_nodes[i]);
            const double wr = std::abs(y_nodes[i + 1] - y_mids[i]);
            const double vm = (2.0 * mass - wl * v[i] - wr * v[i + 1]) / (wl + wr);
            out.grid.push_back(y_mids[i]);
            out.values.push_back(vm);
        }
    }
    if (dec) {
        std::reverse(out.grid.begin(), out.grid.end());
        std::reverse(out.values.begin(), out.values.end());
    }
    return out;
}

using PointMap = std::function<Point(const Point&)>;

/// Image measure under `map`. Atom weights are carried unchanged; densities
/// (1D) require a strictly monotone map and keep every cell's mass.
inline SignedMeasure pushforward(const SignedMeasure& m, const PointMap& map) {
    std::vector<Atom> at;
    at.reserve(m.atoms().size());
    for (const auto& a : m.atoms()) {
        Point y = map(a.x);
        require(y.size() == m.dimension(), "map changes dimension");
        at.push_back(Atom{std::move(y), a.w});
    }
    std::vector<DensityPiece> dn;
    for (const auto& pc : m.density()) {
        const std::size_t n = pc.grid.size();
        std::vector<double> yn(n), ym(n - 1);
        for (std::size_t i = 0; i < n; ++i) yn[i] = map(Point{pc.grid[i]})[0];
        for (std::size_t i = 0; i + 1 < n; ++i) ym[i] = map(Point{0.5 * (pc.grid[i] + pc.grid[i + 1])})[0];
        dn.push_back(transport_piece(pc, yn, ym));
    }
    return SignedMeasure(m.dimension(), std::move(at), std::move(dn));
}

/// Point where the cumulative mass of a nonnegative 1D measure first reaches
/// q * total mass.
inline double quantile(const SignedMeasure& m, double q) {
    require(m.dimension() == 1, "quantile requires a 1D measure");
    const double total = m.total_mass();
    require(total > 0, "quantile requires positive mass");
    const double target = q * total;
    struct Event {
        double x0, x1, v0, v1, w;  // w > 0 for atoms (x0 == x1)
    };
    std::vector<Event> ev;
    for (const auto& a : m.atoms()) ev.push_back({a.x[0], a.x[0], 0, 0, a.w});
    detail::for_each_cell(m, -std::numeric_limits<double>::infinity(), std::numeric_limits<double>::infinity(),
                          [&](double x0, double x1, double v0, double v1) { ev.push_back({x0, x1, v0, v1, 0.0}); });
    std::stable_sort(ev.begin(), ev.end(), [](const Event& a, const Event& b) { return a.x0 < b.x0; });
    double cum = 0.0;
    for (const auto& e : ev) {
        if (e.w != 0.0) {
            cum += e.w;
            if (cum >= target) return e.x0;
            continue;
        }
        const double len = e.x1 - e.x0;
        const double mass = 0.5 * len * (e.v0 + e.v1);
        if (cum + mass >= target && mass > 0) {
            // Solve v0 s + (v1 - v0) s^2 / (2 len) = need for s in [0, len].
            const double need = target - cum;
            const double a = 0.5 * (e.v1 - e.v0) / len, b = e.v0;
            double s;
            if (std::abs(a) * len < 1e-14 * std::max(std::abs(b), 1e-300))
                s = need / b;
            else {
                const double disc = std::max(0.0, b * b + 4.0 * a * need);
                s = 2.0 * need / (b + std::sqrt(disc));
            }
            return e.x0 + std::clamp(s, 0.0, len);
        }
        cum += mass;
    }
    return ev.empty() ? 0.0 : ev.back().x1;
}

struct FlatDistance {
    double value = 0.0;
    double error_bound = 0.0;  ///< mesh error bound h * (|a| + |b|)(region)
    double mesh = 0.0;
};

namespace detail {

/// Chain LP max sum s_j phi_j, |phi_j| <= 1, |phi_{j+1} - phi_j| <= h,
/// phi_0 = phi_n = 0, solved over the level set h*Z (its vertices).
inline double chain_lp(const std::vector<double>& s, double h) {
    const std::size_t n = s.size() - 1;
    const long cap_levels = static_cast<long>(std::floor(1.0 / h + 1e-9));
    const long L = std::min<long>(cap_levels, static_cast<long>(n / 2) + 1);
    const std::size_t W = static_cast<std::size_t>(2 * L + 1);
    const double NEG = -std::numeric_limits<double>::infinity();
    std::vector<double> cur(W, NEG), nxt(W, NEG);
    cur[static_cast<std::size_t>(L)] = 0.0;
    for (std::size_t j = 1; j <= n; ++j) {
        for (std::size_t l = 0; l < W; ++l) {
            double best = cur[l];
            if (l > 0) best = std::max(best, cur[l - 1]);
            if (l + 1 < W) best = std::max(best, cur[l + 1]);
            nxt[l] = best == NEG ? NEG : best + s[j] * h * (static_cast<double>(l) - static_cast<double>(L));
        }
        std::swap(cur, nxt);
    }
    return cur[static_cast<std::size_t>(L)];
}

struct Arc {
    std::size_t to;
    double cap, cost;
    std::size_t rev;
};

/// Min-cost balanced transportation by successive shortest paths.
inline double min_cost_transport(const std::vector<double>& supply, const std::vector<double>& demand,
                                 const std::vector<std::vector<double>>& cost) {
    const std::size_t ns = supply.size(), nd = demand.size();
    const std::size_t S = ns + nd, T = S + 1, V = T + 1;
    std::vector<std::vector<Arc>> g(V);
    auto add = [&](std::size_t u, std::size_t v, double cap, double c) {
        g[u].push_back({v, cap, c, g[v].size()});
        g[v].push_back({u, 0.0, -c, g[u].size() - 1});
    };
    const double inf = std::numeric_limits<double>::infinity();
    double total = 0.0;
    for (std::size_t i = 0; i < ns; ++i) {
        add(S, i, supply[i], 0.0);
        total += supply[i];
    }
    for (std::size_t j = 0; j < nd; ++j) add(ns + j, T, demand[j], 0.0);
    for (std::size_t i = 0; i < ns; ++i)
        for (std::size_t j = 0; j < nd; ++j) add(i, ns + j, inf, cost[i][j]);
    double flow = 0.0, result = 0.0;
    const double eps = 1e-15 * std::max(1.0, total);
    for (int iter = 0; iter < 100000 && flow < total - eps; ++iter) {
        std::vector<double> dist(V, inf);
        std::vector<std::size_t> pv(V, V), pe(V, 0);
        dist[S] = 0.0;
        for (std::size_t round = 0; round < V; ++round) {
            bool changed = false;
            for (std::size_t u = 0; u < V; ++u) {
                if (dist[u] == inf) continue;
                for (std::size_t e = 0; e < g[u].size(); ++e) {
                    const auto& a = g[u][e];
                    if (a.cap > eps && dist[u] + a.cost < dist[a.to] - 1e-15) {
                        dist[a.to] = dist[u] + a.cost;
                        pv[a.to] = u;
                        pe[a.to] = e;
                        changed = true;
                    }
                }
            }
            if (!changed) break;
        }
        if (dist[T] == inf) break;
        double push = total - flow;
        for (std::size_t v = T; v != S; v = pv[v]) push = std::min(push, g[pv[v]][pe[v]].cap);
        for (std::size_t v = T; v != S; v = pv[v]) {
            auto& a = g[pv[v]][pe[v]];
            a.cap -= push;
            g[v][a.rev].cap += push;
        }
        flow += push;
        result += push * dist[T];
    }
    return result;
}

inline double boundary_gap(const Point& x, const Box& region) {
    double g = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < x.size(); ++i)
        g = std::min({g, x[i] - region.lo[i], region.hi[i] - x[i]});
    return std::min(1.0, std::max(0.0, g));
}

}  // namespace detail

/// Flat (bounded-Lipschitz) distance sup{ int phi d(a - b) : |phi| <= 1,
/// Lip(phi) <= 1, supp phi in region }.
///
/// 1D: the difference is projected onto hat functions of a uniform mesh of
/// spacing h = mesh_fraction * width and the resulting chain LP is solved
/// exactly (error O(h * TV)). Purely atomic measures (up to 512 atoms in the
/// difference) use the exact dual transport problem with a ground node at the
/// region boundary.
inline FlatDistance bl_distance(const SignedMeasure& a, const SignedMeasure& b, const Box& region,
                                double mesh_fraction = 1e-3) {
    require_bounded(region);
    require(a.dimension() == b.dimension() && region.dimension() == a.dimension(),
            "bl_distance: dimension mismatch");
    const SignedMeasure diff = a - b;
    const double tv = total_variation(a, region) + total_variation(b, region);
    FlatDistance out;
    const bool atomic = a.purely_atomic() && b.purely_atomic() && diff.atoms().size() <= 512;
    if (a.dimension() == 1 && !atomic) {
        const double lo = region.lo[0], hi = region.hi[0];
        const double width = hi - lo;
        if (width <= 0) return out;
        const std::size_t n = std::max<std::size_t>(2, static_cast<std::size_t>(std::llround(1.0 / mesh_fraction)));
        const double h = width / static_cast<double>(n);
        std::vector<double> s(n + 1, 0.0);
        auto node_of = [&](double x) {
            std::size_t j = static_cast<std::size_t>(std::floor((x - lo) / h));
            return std::min(j, n - 1);
        };
        for (const auto& at : diff.atoms()) {
            const double x = at.x[0];
            if (x < lo || x > hi) continue;
            const std::size_t j = node_of(x);
            const double t = (x - (lo + h * static_cast<double>(j))) / h;
            s[j] += at.w * (1.0 - t);
            s[j + 1] += at.w * t;
        }
        detail::for_each_cell(diff, lo, hi, [&](double x0, double x1, double v0, double v1) {
            // Split the cell at mesh nodes; Simpson is exact for linear * linear.
            std::size_t j = node_of(x0);
            double u = x0;
            while (u < x1) {
                const double zj = lo + h * static_cast<double>(j);
                const double v = std::min(x1, zj + h);
                auto rho = [&](double x) { return v0 + (x - x0) / (x1 - x0) * (v1 - v0); };
                auto left = [&](double x) { return rho(x) * (zj + h - x) / h; };
                auto right = [&](double x) { return rho(x) * (x - zj) / h; };
                const double m = 0.5 * (u + v);
                s[j] += (v - u) / 6.0 * (left(u) + 4.0 * left(m) + left(v));
                s[j + 1] += (v - u) / 6.0 * (right(u) + 4.0 * right(m) + right(v));
                u = v;
                if (j + 1 < n) ++j;
                else break;
            }
        });
        out.value = std::max(0.0, detail::chain_lp(s, h));
        out.mesh = h;
        out.error_bound = h * tv;
        return out;
    }
    require(a.purely_atomic() && b.purely_atomic(), "bl_distance in d >= 2 requires atomic measures");
    std::vector<Point> px, nx;
    std::vector<double> pw, nw;
    for (const auto& at : diff.atoms()) {
        if (!region.contains(at.x)) continue;
        if (at.w > 0) {
            px.push_back(at.x);
            pw.push_back(at.w);
        } else {
            nx.push_back(at.x);
            nw.push_back(-at.w);
        }
    }
    double ptot = 0.0, ntot = 0.0;
    for (double w : pw) ptot += w;
    for (double w : nw) ntot += w;
    // Balanced problem: positives + ground supply ntot, negatives + ground demand ptot.
    std::vector<double> supply = pw, demand = nw;
    supply.push_back(ntot);
    demand.push_back(ptot);
    std::vector<std::vector<double>> cost(supply.size(), std::vector<double>(demand.size(), 0.0));
    for (std::size_t i = 0; i < px.size(); ++i) {
        const double gi = detail::boundary_gap(px[i], region);
        for (std::size_t j = 0; j < nx.size(); ++j) {
            Point d = axpy(-1.0, nx[j], px[i]);
            cost[i][j] = std::min(norm(d), gi + detail::boundary_gap(nx[j], region));
        }
        cost[i][nx.size()] = gi;
    }
    for (std::size_t j = 0; j < nx.size(); ++j) cost[px.size()][j] = detail::boundary_gap(nx[j], region);
    out.value = detail::min_cost_transport(supply, demand, cost);
    out.error_bound = 0.0;
    return out;
}

/// Time-indexed family of measures on a uniform grid t_i = i T / M,
/// interpreted as piecewise constant on [t_i, t_{i+1}).
class MeasurePath {
  public:
    MeasurePath() = default;
    MeasurePath(double horizon, std::vector<SignedMeasure> slices)
        : horizon_(horizon), slices_(std::move(slices)) {
        require(horizon > 0, "path horizon must be positive");
        require(slices_.size() >= 2, "path needs at least two time nodes");
        for (const auto& s : slices_)
            require(s.dimension() == slices_.front().dimension(), "all slices must share dimension");
        const std::size_t M = slices_.size() - 1;
        times_.resize(M + 1);
        for (std::size_t i = 0; i <= M; ++i) times_[i] = horizon_ * static_cast<double>(i) / static_cast<double>(M);
    }

    double horizon() const { return horizon_; }
    std::size_t steps() const { return slices_.size() - 1; }
    double dt() const { return horizon_ / static_cast<double>(steps()); }
    const std::vector<double>& times() const { return times_; }
    const std::vector<SignedMeasure>& slices() const { return slices_; }
    const SignedMeasure& slice(std::size_t i) const { return slices_.at(i); }
    std::size_t dimension() const { return slices_.empty() ? 1 : slices_.front().dimension(); }

    /// Index of the grid node equal to t (within 1e-9 of the spacing).
    std::size_t index_of(double t) const {
        const double r = t / dt();
        const double k = std::round(r);
        require(std::abs(r - k) < 1e-9 && k >= 0 && k <= static_cast<double>(steps()),
                "time is not on the output grid");
        return static_cast<std::size_t>(k);
    }

    MeasurePath abs() const {
        std::vector<SignedMeasure> s;
        s.reserve(slices_.size());
        for (const auto& m : slices_) s.push_back(m.abs());
        return MeasurePath(horizon_, std::move(s));
    }

    MeasurePath operator-(const MeasurePath& o) const {
        require(o.slices_.size() == slices_.size() && std::abs(o.horizon_ - horizon_) < 1e-12,
                "paths must share the time grid");
        std::vector<SignedMeasure> s;
        s.reserve(slices_.size());
        for (std::size_t i = 0; i < slices_.size(); ++i) s.push_back(slices_[i] - o.slices_[i]);
        return MeasurePath(horizon_, std::move(s));
    }

  private:
    double horizon_ = 1.0;
    std::vector<double> times_;
    std::vector<SignedMeasure> slices_;
};

using SpacetimeFn = std::function<double(const Point&, double)>;

enum class TimeRule { LeftEndpoint, Trapezoid, Simpson };

/// Quadrature weights over nodes 0..I of spacing dt.
inline std::vector<double> time_weights(std::size_t I, double dt, TimeRule rule) {
    std::vector<double> w(I + 1, 0.0);
    if (I == 0) return w;
    switch (rule) {
        case TimeRule::LeftEndpoint:
            for (std::size_t i = 0; i < I; ++i) w[i] = dt;
            break;
        case TimeRule::Trapezoid:
            for (std::size_t i = 0; i <= I; ++i) w[i] = (i == 0 || i == I) ? 0.5 * dt : dt;
            break;
        case TimeRule::Simpson: {
            if (I == 1) return time_weights(1, dt, TimeRule::Trapezoid);
            // Composite Simpson on an even prefix, 3/8 rule on a trailing triple.
            const std::size_t even = (I % 2 == 0) ? I : I - 3;
            for (std::size_t i = 0; i + 2 <= even; i += 2) {
                w[i] += dt / 3.0;
                w[i + 1] += 4.0 * dt / 3.0;
                w[i + 2] += dt / 3.0;
            }
            if (even != I) {
                w[even] += 3.0 * dt / 8.0;
                w[even + 1] += 9.0 * dt / 8.0;
                w[even + 2] += 9.0 * dt / 8.0;
                w[even + 3] += 3.0 * dt / 8.0;
            }
            break;
        }
    }
    return w;
}

/// int_0^{t_end} int_region u(x, t) mu_t(dx) dt. The default left-endpoint rule
/// is exact for the piecewise-constant path; `t_end` must be a grid node.
inline double path_integrate(const MeasurePath& p, const SpacetimeFn& u, const Box& region,
                             TimeRule rule = TimeRule::LeftEndpoint,
                             std::optional<double> t_end = std::nullopt) {
    require_bounded(region);
    if (p.slices().empty()) return 0.0;
    const std::size_t I = t_end ? p.index_of(*t_end) : p.steps();
    const auto w = time_weights(I, p.dt(), rule);
    double s = 0.0;
    for (std::size_t i = 0; i <= I; ++i) {
        if (w[i] == 0.0 || p.slice(i).empty()) continue;
        const double t = p.times()[i];
        s += w[i] * integrate(p.slice(i), [&](const Point& x) { return u(x, t); }, region);
    }
    return s;
}

/// C^{1,1} test function with compact support in x.
struct TestFunction {
    SpacetimeFn value;
    std::function<Point(const Point&, double)> gradient;
    SpacetimeFn time_derivative;
    SpacetimeFn laplacian;  ///< optional; used by the viscous weak form
    double support_radius = 1.0;
    double max_abs = 1.0;       ///< max |u|
    double max_gradient = 0.0;  ///< max |grad u| (spatial)
};

/// A (1 + alpha sin(omega t + phase)) cos^2(pi |x - c| / (2 r)) on |x - c| < r.
inline TestFunction bump_test_function(Point center, double radius, double amplitude = 1.0,
                                       double alpha = 0.0, double omega = 0.0, double phase = 0.0) {
    require(radius > 0, "bump radius must be positive");
    const std::size_t d = center.size();
    auto temporal = [=](double t) { return amplitude * (1.0 + alpha * std::sin(omega * t + phase)); };
    auto temporal_dt = [=](double t) { return amplitude * alpha * omega * std::cos(omega * t + phase); };
    auto radial = [=](const Point& x) {
        double s2 = 0.0;
        for (std::size_t i = 0; i < d; ++i) s2 += (x[i] - center[i]) * (x[i] - center[i]);
        return std::sqrt(s2) / radius;
    };
    const double pi = M_PI;
    TestFunction u;
    u.value = [=](const Point& x, double t) {
        const double s = radial(x);
        if (s >= 1.0) return 0.0;
        const double c = std::cos(0.5 * pi * s);
        return temporal(t) * c * c;
    };
    u.time_derivative = [=](const Point& x, double t) {
        const double s = radial(x);
        if (s >= 1.0) return 0.0;
        const double c = std::cos(0.5 * pi * s);
        return temporal_dt(t) * c * c;
    };
    u.gradient = [=](const Point& x, double t) {
        Point g(d, 0.0);
        const double s = radial(x);
        if (s >= 1.0 || s == 0.0) return g;
        // d/ds cos^2(pi s / 2) = -(pi/2) sin(pi s)
        const double ds = -0.5 * pi * std::sin(pi * s) * temporal(t);
        for (std::size_t i = 0; i < d; ++i) g[i] = ds * (x[i] - center[i]) / (s * radius * radius);
        return g;
    };
    u.laplacian = [=](const Point& x, double t) {
        const double s = radial(x);
        if (s >= 1.0) return 0.0;
        const double dd = -0.5 * pi * pi * std::cos(pi * s);
        const double d1_over_s = s == 0.0 ? -0.5 * pi * pi : -0.5 * pi * std::sin(pi * s) / s;
        return temporal(t) * (dd + static_cast<double>(d - 1) * d1_over_s) / (radius * radius);
    };
    u.support_radius = norm(center) + radius;
    u.max_abs = std::abs(amplitude) * (1.0 + std::abs(alpha));
    u.max_gradient = u.max_abs * 0.5 * pi / radius;
    return u;
}

/// Largest relative mismatch between supplied derivatives and central
/// differences at random points around the support.
inline double test_function_derivative_error(const TestFunction& u, std::size_t d, double horizon,
                                             std::size_t samples = 200, unsigned seed = 7) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> ux(-u.support_radius, u.support_radius), ut(0.0, horizon);
    double worst = 0.0;
    for (std::size_t k = 0; k < samples; ++k) {
        Point x(d);
        for (auto& xi : x) xi = ux(rng);
        const double t = ut(rng);
        const double scale = std::max(1.0, u.max_abs + u.max_gradient);
        for (std::size_t i = 0; i < d; ++i) {
            const double h = 1e-6;
            Point xp = x, xm = x;
            xp[i] += h;
            xm[i] -= h;
            const double fd = (u.value(xp, t) - u.value(xm, t)) / (2 * h);
            worst = std::max(worst, std::abs(fd - u.gradient(x, t)[i]) / scale);
        }
        const double h = 1e-6;
        const double fdt = (u.value(x, t + h) - u.value(x, t - h)) / (2 * h);
        worst = std::max(worst, std::abs(fdt - u.time_derivative(x, t)) / scale);
    }
    return worst;
}

}  // namespace contlab
