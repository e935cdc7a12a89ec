#pragma once

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <cstdlib>
#include <functional>
#include <limits>
#include <numeric>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

namespace contlab {

/// Point in R^d. Dimensions in this library are small (1..3), so a plain
/// vector keeps the call sites simple.
using Point = std::vector<double>;

/// Thrown for every contract violation (bad input, failed precondition).
class Error : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

inline void require(bool cond, const std::string& msg) {
    if (!cond) throw Error(msg);
}

inline double dot(const Point& a, const Point& b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
    return s;
}

inline double norm(const Point& a) { return std::sqrt(dot(a, a)); }

inline Point axpy(double alpha, const Point& x, const Point& y) {
    Point r(y);
    for (std::size_t i = 0; i < r.size(); ++i) r[i] += alpha * x[i];
    return r;
}

inline bool all_finite(const Point& p) {
    return std::all_of(p.begin(), p.end(), [](double v) { return std::isfinite(v); });
}

/// Closed axis-aligned box [lo, hi].
struct Box {
    Point lo;
    Point hi;

    static Box interval(double a, double b) { return Box{{a}, {b}}; }
    static Box cube(std::size_t d, double a, double b) {
        return Box{Point(d, a), Point(d, b)};
    }

    std::size_t dimension() const { return lo.size(); }

    bool bounded() const {
        if (lo.size() != hi.size() || lo.empty()) return false;
        for (std::size_t i = 0; i < lo.size(); ++i)
            if (!std::isfinite(lo[i]) || !std::isfinite(hi[i]) || lo[i] > hi[i]) return false;
        return true;
    }

    bool contains(const Point& p) const {
        for (std::size_t i = 0; i < lo.size(); ++i)
            if (p[i] < lo[i] || p[i] > hi[i]) return false;
        return true;
    }

    double width(std::size_t i = 0) const { return hi[i] - lo[i]; }

    /// Box grown by `m` on every side (shrunk for m < 0).
    Box inflated(double m) const {
        Box b = *this;
        for (std::size_t i = 0; i < lo.size(); ++i) {
            b.lo[i] -= m;
            b.hi[i] += m;
        }
        return b;
    }

    bool contains_box(const Box& o) const {
        for (std::size_t i = 0; i < lo.size(); ++i)
            if (o.lo[i] < lo[i] || o.hi[i] > hi[i]) return false;
        return true;
    }
};

inline void require_bounded(const Box& region) {
    if (!region.bounded()) throw Error("region must be bounded");
}

/// Uniform grid of `n` points spanning [a, b] (n >= 2).
inline std::vector<double> linspace(double a, double b, std::size_t n) {
    std::vector<double> g(n);
    if (n == 1) {
        g[0] = a;
        return g;
    }
    const double h = (b - a) / static_cast<double>(n - 1);
    for (std::size_t i = 0; i < n; ++i) g[i] = a + h * static_cast<double>(i);
    g[n - 1] = b;
    return g;
}

/// Tensor grid over a box with `per_axis` points along every axis.
inline std::vector<Point> box_grid(const Box& box, std::size_t per_axis) {
    const std::size_t d = box.dimension();
    std::vector<std::vector<double>> axes(d);
    for (std::size_t i = 0; i < d; ++i) axes[i] = linspace(box.lo[i], box.hi[i], per_axis);
    std::size_t total = 1;
    for (std::size_t i = 0; i < d; ++i) total *= per_axis;
    std::vector<Point> pts;
    pts.reserve(total);
    std::vector<std::size_t> idx(d, 0);
    for (std::size_t c = 0; c < total; ++c) {
        Point p(d);
        for (std::size_t i = 0; i < d; ++i) p[i] = axes[i][idx[i]];
        pts.push_back(std::move(p));
        for (std::size_t i = 0; i < d; ++i) {
            if (++idx[i] < per_axis) break;
            idx[i] = 0;
        }
    }
    return pts;
}

/// Small dense row-major square matrix.
struct Matrix {
    std::size_t n = 0;
    std::vector<double> a;

    Matrix() = default;
    explicit Matrix(std::size_t n_, double fill = 0.0) : n(n_), a(n_ * n_, fill) {}

    static Matrix identity(std::size_t n, double s = 1.0) {
        Matrix m(n);
        for (std::size_t i = 0; i < n; ++i) m(i, i) = s;
        return m;
    }

    double& operator()(std::size_t i, std::size_t j) { return a[i * n + j]; }
    double operator()(std::size_t i, std::size_t j) const { return a[i * n + j]; }
};

/// Eigenvalues of a symmetric matrix by cyclic Jacobi rotations, ascending.
inline std::vector<double> symmetric_eigenvalues(Matrix m, double tol = 1e-12) {
    const std::size_t n = m.n;
    if (n == 1) return {m(0, 0)};
    if (n == 2) {
        const double tr = m(0, 0) + m(1, 1);
        const double diff = m(0, 0) - m(1, 1);
        const double disc = std::hypot(diff, 2.0 * m(0, 1));
        return {0.5 * (tr - disc), 0.5 * (tr + disc)};
    }
    double scale = 0.0;
    for (double v : m.a) scale = std::max(scale, std::abs(v));
    for (int sweep = 0; sweep < 100; ++sweep) {
        double off = 0.0;
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = i + 1; j < n; ++j) off = std::max(off, std::abs(m(i, j)));
        if (off <= tol * std::max(scale, 1e-300)) break;
        for (std::size_t p = 0; p < n; ++p) {
            for (std::size_t q = p + 1; q < n; ++q) {
                if (m(p, q) == 0.0) continue;
                const double theta = (m(q, q) - m(p, p)) / (2.0 * m(p, q));
                const double t = (theta >= 0 ? 1.0 : -1.0) /
                                 (std::abs(theta) + std::sqrt(theta * theta + 1.0));
                const double c = 1.0 / std::sqrt(t * t + 1.0);
                const double s = t * c;
                for (std::size_t r = 0; r < n; ++r) {
                    const double mrp = m(r, p), mrq = m(r, q);
                    m(r, p) = c * mrp - s * mrq;
                    m(r, q) = s * mrp + c * mrq;
                }
                for (std::size_t r = 0; r < n; ++r) {
                    const double mpr = m(p, r), mqr = m(q, r);
                    m(p, r) = c * mpr - s * mqr;
                    m(q, r) = s * mpr + c * mqr;
                }
            }
        }
    }
    std::vector<double> ev(n);
    for (std::size_t i = 0; i < n; ++i) ev[i] = m(i, i);
    std::sort(ev.begin(), ev.end());
    return ev;
}

/// max_{|xi|=1} <J xi, xi>: the top eigenvalue of the symmetric part of J.
inline double max_quadratic_form(const Matrix& jac) {
    Matrix sym(jac.n);
    for (std::size_t i = 0; i < jac.n; ++i)
        for (std::size_t j = 0; j < jac.n; ++j) sym(i, j) = 0.5 * (jac(i, j) + jac(j, i));
    return symmetric_eigenvalues(sym).back();
}

/// Worker count from CONTLAB_THREADS (default 1).
inline std::size_t thread_cap() {
    if (const char* env = std::getenv("CONTLAB_THREADS")) {
        const long v = std::strtol(env, nullptr, 10);
        if (v > 0) return static_cast<std::size_t>(v);
    }
    return 1;
}

/// Runs fn(i) for i in [0, n). Each index writes its own output slot, so
/// results do not depend on the schedule.
template <class Fn>
void parallel_for(std::size_t n, Fn&& fn, std::size_t workers = thread_cap()) {
    workers = std::min(workers, n);
    if (workers <= 1) {
        for (std::size_t i = 0; i < n; ++i) fn(i);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::vector<std::exception_ptr> errors(n);
    std::vector<std::thread> pool;
    pool.reserve(workers);
    for (std::size_t w = 0; w < workers; ++w) {
        pool.emplace_back([&] {
            for (std::size_t i = next.fetch_add(1); i < n; i = next.fetch_add(1)) {
                try {
                    fn(i);
                } catch (...) {
                    errors[i] = std::current_exception();
                }
            }
        });
    }
    for (auto& t : pool) t.join();
    for (auto& e : errors)
        if (e) std::rethrow_exception(e);
}

}  // namespace contlab
