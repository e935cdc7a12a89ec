#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <queue>
#include <vector>

#include <boost/math/quadrature/tanh_sinh.hpp>

#include "contlab/core.hpp"

namespace contlab::quad {

struct Estimate {
    double value = 0.0;
    double error = 0.0;
};

namespace detail {

// Gauss-Kronrod 7/15 nodes and weights (QUADPACK qk15).
inline constexpr std::array<double, 8> kXgk = {
    0.991455371120812639206854697526329, 0.949107912342758524526189684047851,
    0.864864423359769072789712788640926, 0.741531185599394439863864773280788,
    0.586087235467691130294144845693013, 0.405845151377397166906606412076961,
    0.207784955007898467600689403773245, 0.000000000000000000000000000000000};
inline constexpr std::array<double, 8> kWgk = {
    0.022935322010529224963732008058970, 0.063092092629978553290700663189204,
    0.104790010322250183839876322541518, 0.140653259715525918745189590510238,
    0.169004726639267902826583426598550, 0.190350578064785409913256402421014,
    0.204432940075298892414161999234649, 0.209482141084727828012999174891714};
inline constexpr std::array<double, 4> kWg = {
    0.129484966168869693270611432679082, 0.279705391489276667901467771423780,
    0.381830050505118944950369775488975, 0.417959183673469387755102040816327};

template <class F>
Estimate gk15(F& f, double a, double b) {
    const double c = 0.5 * (a + b);
    const double h = 0.5 * (b - a);
    const double fc = f(c);
    double kron = fc * kWgk[7];
    double gauss = fc * kWg[3];
    for (int j = 0; j < 7; ++j) {
        const double dx = h * kXgk[j];
        const double f1 = f(c - dx);
        const double f2 = f(c + dx);
        kron += kWgk[j] * (f1 + f2);
        if (j % 2 == 1) gauss += kWg[j / 2] * (f1 + f2);
    }
    return {kron * h, std::abs((kron - gauss) * h)};
}

struct Segment {
    double a, b;
    Estimate est;
    bool operator<(const Segment& o) const { return est.error < o.est.error; }
};

template <class F>
double simpson_rec(F& f, double a, double b, double fa, double fm, double fb, double whole,
                   double tol, int depth) {
    const double m = 0.5 * (a + b);
    const double lm = 0.5 * (a + m), rm = 0.5 * (m + b);
    const double flm = f(lm), frm = f(rm);
    const double left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
    const double right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
    const double delta = left + right - whole;
    if (depth <= 0 || std::abs(delta) <= 15.0 * tol) return left + right + delta / 15.0;
    return simpson_rec(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1) +
           simpson_rec(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1);
}

}  // namespace detail

/// Globally adaptive Gauss-Kronrod 7/15 with an absolute error target.
/// Bisects the worst segment until the summed error estimate meets `abs_tol`.
template <class F>
Estimate gauss_kronrod(F&& f, double a, double b, double abs_tol = 1e-10,
                       std::size_t max_segments = 4000) {
    if (a == b) return {};
    std::priority_queue<detail::Segment> heap;
    auto first = detail::gk15(f, a, b);
    heap.push({a, b, first});
    double err = first.error;
    while (err > abs_tol && heap.size() < max_segments) {
        auto worst = heap.top();
        const double m = 0.5 * (worst.a + worst.b);
        if (!(m > worst.a && m < worst.b)) break;
        heap.pop();
        auto l = detail::gk15(f, worst.a, m);
        auto r = detail::gk15(f, m, worst.b);
        err += l.error + r.error - worst.est.error;
        heap.push({worst.a, m, l});
        heap.push({m, worst.b, r});
    }
    // Re-sum to avoid drift from incremental updates.
    double v = 0.0, e = 0.0;
    while (!heap.empty()) {
        v += heap.top().est.value;
        e += heap.top().est.error;
        heap.pop();
    }
    return {v, e};
}

/// Adaptive Simpson with absolute tolerance.
template <class F>
double simpson(F&& f, double a, double b, double abs_tol = 1e-12, int max_depth = 40) {
    if (a == b) return 0.0;
    const double fa = f(a), fb = f(b), fm = f(0.5 * (a + b));
    const double whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    return detail::simpson_rec(f, a, b, fa, fm, fb, whole, abs_tol, max_depth);
}

/// Double-exponential quadrature for integrands with endpoint singularities.
template <class F>
double tanh_sinh(F&& f, double a, double b, double rel_tol = 1e-13) {
    if (a == b) return 0.0;
    boost::math::quadrature::tanh_sinh<double> integrator;
    return integrator.integrate(f, a, b, rel_tol);
}

}  // namespace contlab::quad
