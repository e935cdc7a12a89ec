#pragma once

#include <cmath>
#include <optional>
#include <utility>
#include <vector>

#include "contlab/fields.hpp"
#include "contlab/measure.hpp"

namespace contlab {

/// A maximal closed interval of {|b| <= eta}. Ends that reach the working
/// interval edge are open-ended: the set may continue beyond, so they are not
/// boundary points.
struct ZeroInterval {
    double lo = 0.0, hi = 0.0;
    bool lo_open_ended = false, hi_open_ended = false;
};

/// Component of Z^0 = Z \ dZ. `*_closed` marks ends that belong to the set.
struct InteriorInterval {
    double lo = 0.0, hi = 0.0;
    bool lo_closed = false, hi_closed = false;

    bool contains(double x) const {
        return (lo_closed ? x >= lo : x > lo) && (hi_closed ? x <= hi : x < hi);
    }
};

struct ZeroSetInfo {
    double eta = 0.0;
    double lo = 0.0, hi = 0.0;  ///< working interval
    std::vector<ZeroInterval> intervals;
    std::vector<double> boundary;
    std::vector<InteriorInterval> interior;

    bool empty() const { return intervals.empty(); }

    bool in_zero_set(double x) const {
        for (const auto& z : intervals)
            if (x >= z.lo && x <= z.hi) return true;
        return false;
    }
    bool in_interior(double x) const {
        for (const auto& z : interior)
            if (z.contains(x)) return true;
        return false;
    }
};

namespace detail {

template <class P>
double bisect_edge(P&& inside, double in, double out, int iters = 200) {
    for (int i = 0; i < iters; ++i) {
        const double m = 0.5 * (in + out);
        if (m == in || m == out) break;
        (inside(m) ? in : out) = m;
    }
    return in;
}

template <class F>
std::pair<double, double> golden_min(F&& f, double a, double b, int iters = 400) {
    const double g = 0.5 * (std::sqrt(5.0) - 1.0);
    double c = b - g * (b - a), d = a + g * (b - a);
    double fc = f(c), fd = f(d);
    for (int i = 0; i < iters; ++i) {
        if (fc < fd) {
            b = d;
            d = c;
            fd = fc;
            c = b - g * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + g * (b - a);
            fd = f(d);
        }
        if (!(b > a) || c <= a || d >= b) break;
    }
    return fc < fd ? std::pair{c, fc} : std::pair{d, fd};
}

}  // namespace detail

/// Zero set of a 1D field on [lo, hi] detected as {|b| <= eta} by a grid scan
/// with bisection refinement; sign changes and touching minima between grid
/// nodes become isolated zeros. eta <= 0 selects the default
/// 1e-9 (1 + max |b|).
inline ZeroSetInfo zero_set(const VectorField& b, double lo, double hi, std::optional<double> eta = std::nullopt,
                            std::size_t nodes = 4001, double t = 0.0) {
    require(b.dimension() == 1, "zero_set requires d = 1");
    require(hi > lo, "zero_set requires a nonempty interval");
    if (eta) require(*eta > 0, "zero-set threshold eta must be positive");
    const auto xs = linspace(lo, hi, nodes);
    std::vector<double> v(nodes);
    double vmax = 0.0;
    for (std::size_t i = 0; i < nodes; ++i) {
        v[i] = b.at(xs[i], t);
        require(std::isfinite(v[i]), "non-finite field sample in zero_set");
        vmax = std::max(vmax, std::abs(v[i]));
    }
    ZeroSetInfo z;
    z.lo = lo;
    z.hi = hi;
    z.eta = eta ? *eta : 1e-9 * (1.0 + vmax);
    const double e = z.eta;
    const double spacing = xs[1] - xs[0];
    auto inside = [&](double x) { return std::abs(b.at(x, t)) <= e; };

    std::vector<ZeroInterval> found;
    std::size_t i = 0;
    while (i < nodes) {
        if (std::abs(v[i]) <= e) {
            std::size_t j = i;
            while (j + 1 < nodes && std::abs(v[j + 1]) <= e) ++j;
            ZeroInterval zi;
            zi.lo_open_ended = (i == 0);
            zi.hi_open_ended = (j == nodes - 1);
            zi.lo = zi.lo_open_ended ? lo : detail::bisect_edge(inside, xs[i], xs[i - 1]);
            zi.hi = zi.hi_open_ended ? hi : detail::bisect_edge(inside, xs[j], xs[j + 1]);
            if (!zi.lo_open_ended && !zi.hi_open_ended && zi.hi - zi.lo < 1e-6 * spacing) {
                const double c = 0.5 * (zi.lo + zi.hi);
                zi.lo = zi.hi = c;
            }
            found.push_back(zi);
            i = j + 1;
            continue;
        }
        if (i + 1 < nodes && std::abs(v[i + 1]) > e && v[i] * v[i + 1] < 0) {
            // sign change between nodes
            const bool left_pos = v[i] > 0;
            double a = xs[i], c = xs[i + 1];
            for (int it = 0; it < 200; ++it) {
                const double m = 0.5 * (a + c);
                if (m == a || m == c) break;
                const double fm = b.at(m, t);
                if (fm == 0.0) {
                    a = c = m;
                    break;
                }
                ((fm > 0) == left_pos ? a : c) = m;
            }
            const double r = 0.5 * (a + c);
            found.push_back({r, r, false, false});
        } else if (i > 0 && i + 1 < nodes && std::abs(v[i]) <= std::abs(v[i - 1]) &&
                   std::abs(v[i]) <= std::abs(v[i + 1]) && std::abs(v[i + 1]) > e && std::abs(v[i - 1]) > e &&
                   v[i - 1] * v[i + 1] > 0) {
            auto [xm, fm] = detail::golden_min([&](double x) { return std::abs(b.at(x, t)); }, xs[i - 1], xs[i + 1]);
            if (fm <= e) found.push_back({xm, xm, false, false});
        }
        ++i;
    }
    std::sort(found.begin(), found.end(), [](const ZeroInterval& a, const ZeroInterval& c) { return a.lo < c.lo; });
    for (const auto& zi : found) {
        if (!z.intervals.empty() && zi.lo <= z.intervals.back().hi) {
            auto& last = z.intervals.back();
            last.hi = std::max(last.hi, zi.hi);
            last.hi_open_ended = last.hi_open_ended || zi.hi_open_ended;
            continue;
        }
        z.intervals.push_back(zi);
    }
    for (const auto& zi : z.intervals) {
        if (!zi.lo_open_ended) z.boundary.push_back(zi.lo);
        if (!zi.hi_open_ended && !(zi.hi == zi.lo && !zi.lo_open_ended)) z.boundary.push_back(zi.hi);
        if (zi.hi > zi.lo) z.interior.push_back({zi.lo, zi.hi, zi.lo_open_ended, zi.hi_open_ended});
    }
    return z;
}

/// (nu restricted to Z^0, remainder); the two parts sum to nu.
inline std::pair<SignedMeasure, SignedMeasure> split_stationary(const SignedMeasure& nu, const ZeroSetInfo& z) {
    require(nu.dimension() == 1, "split_stationary requires d = 1");
    std::vector<Atom> in_atoms, out_atoms;
    for (const auto& a : nu.atoms()) (z.in_interior(a.x[0]) ? in_atoms : out_atoms).push_back(a);
    // Density: clip to interior components and to the gaps between them.
    std::vector<DensityPiece> in_d, out_d;
    std::vector<std::pair<double, double>> cuts;
    for (const auto& c : z.interior) cuts.push_back({c.lo, c.hi});
    auto clip = [&](double a, double c, std::vector<DensityPiece>& dst) {
        if (!(c > a)) return;
        auto r = nu.restricted(Box::interval(a, c));
        dst.insert(dst.end(), r.density().begin(), r.density().end());
    };
    if (nu.has_density()) {
        const double inf = std::numeric_limits<double>::infinity();
        double lo_all = inf, hi_all = -inf;
        for (const auto& pc : nu.density()) {
            lo_all = std::min(lo_all, pc.lo());
            hi_all = std::max(hi_all, pc.hi());
        }
        double left = lo_all;
        for (const auto& [a, c] : cuts) {
            clip(left, std::min(a, hi_all), out_d);
            clip(std::max(a, lo_all), std::min(c, hi_all), in_d);
            left = std::max(left, c);
        }
        clip(left, hi_all, out_d);
    }
    return {SignedMeasure(1, std::move(in_atoms), std::move(in_d)), SignedMeasure(1, std::move(out_atoms), std::move(out_d))};
}

}  // namespace contlab
