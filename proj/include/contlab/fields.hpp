#pragma once

#include <cmath>
#include <functional>
#include <memory>
#include <optional>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "contlab/core.hpp"
#include "contlab/quadrature.hpp"

namespace contlab {

using FieldFn = std::function<Point(const Point&, double)>;
using JacobianFn = std::function<Matrix(const Point&, double)>;
using Scalar1Fn = std::function<double(double, double)>;

/// Drift b(x, t). One-dimensional fields carry a scalar fast path so the
/// integrators avoid allocating points.
class VectorField {
  public:
    VectorField() = default;

    static VectorField make(std::size_t d, FieldFn fn, std::string id = {}) {
        VectorField v;
        v.d_ = d;
        v.fn_ = std::move(fn);
        v.id_ = std::move(id);
        return v;
    }

    static VectorField scalar(Scalar1Fn f, std::string id = {}) {
        VectorField v;
        v.d_ = 1;
        v.f1_ = std::make_shared<Scalar1Fn>(std::move(f));
        auto f1 = v.f1_;
        v.fn_ = [f1](const Point& x, double t) { return Point{(*f1)(x[0], t)}; };
        v.id_ = std::move(id);
        return v;
    }

    std::size_t dimension() const { return d_; }
    const std::string& id() const { return id_; }
    std::optional<double> growth() const { return growth_; }
    const std::optional<Box>& domain() const { return domain_; }
    bool has_scalar() const { return static_cast<bool>(f1_); }

    VectorField& with_growth(double c1) {
        growth_ = c1;
        return *this;
    }
    VectorField& with_domain(Box b) {
        domain_ = std::move(b);
        return *this;
    }
    VectorField& with_id(std::string id) {
        id_ = std::move(id);
        return *this;
    }

    Point operator()(const Point& x, double t = 0.0) const {
        check_domain(x);
        return fn_(x, t);
    }

    /// Scalar value for d = 1.
    double at(double x, double t = 0.0) const {
        if (domain_ && (x < domain_->lo[0] || x > domain_->hi[0]))
            throw Error("field evaluated outside its domain at x=" + std::to_string(x));
        return f1_ ? (*f1_)(x, t) : fn_(Point{x}, t)[0];
    }

  protected:
    void check_domain(const Point& x) const {
        if (domain_ && !domain_->contains(x)) throw Error("field evaluated outside its domain");
    }

    std::size_t d_ = 1;
    FieldFn fn_;
    std::shared_ptr<Scalar1Fn> f1_;
    std::string id_;
    std::optional<double> growth_;
    std::optional<Box> domain_;
};

/// VectorField with spatial Jacobian access (d x d, row i = component i).
class SmoothField : public VectorField {
  public:
    SmoothField() = default;
    SmoothField(VectorField base, JacobianFn jac) : VectorField(std::move(base)), jac_(std::move(jac)) {}

    static SmoothField scalar(Scalar1Fn f, Scalar1Fn df, std::string id = {}) {
        auto dfp = std::make_shared<Scalar1Fn>(std::move(df));
        SmoothField s(VectorField::scalar(std::move(f), std::move(id)), [dfp](const Point& x, double t) {
            Matrix m(1);
            m(0, 0) = (*dfp)(x[0], t);
            return m;
        });
        s.df1_ = dfp;
        return s;
    }

    Matrix jacobian(const Point& x, double t = 0.0) const {
        check_domain(x);
        return jac_(x, t);
    }

    /// db/dx for d = 1.
    double derivative(double x, double t = 0.0) const {
        if (domain_ && (x < domain_->lo[0] || x > domain_->hi[0]))
            throw Error("field evaluated outside its domain at x=" + std::to_string(x));
        return df1_ ? (*df1_)(x, t) : jac_(Point{x}, t)(0, 0);
    }

  private:
    JacobianFn jac_;
    std::shared_ptr<Scalar1Fn> df1_;
};

/// Largest relative mismatch between the Jacobian and central differences.
inline double jacobian_fd_error(const SmoothField& b, const std::vector<Point>& xs, double t = 0.0,
                                double h = 1e-6) {
    const std::size_t d = b.dimension();
    double worst = 0.0;
    for (const auto& x : xs) {
        const Matrix j = b.jacobian(x, t);
        double scale = 1e-300;
        for (double v : j.a) scale = std::max(scale, std::abs(v));
        for (std::size_t c = 0; c < d; ++c) {
            Point xp = x, xm = x;
            xp[c] += h;
            xm[c] -= h;
            const Point fp = b(xp, t), fm = b(xm, t);
            for (std::size_t r = 0; r < d; ++r) {
                const double fd = (fp[r] - fm[r]) / (2 * h);
                worst = std::max(worst, std::abs(fd - j(r, c)) / std::max(scale, 1.0));
            }
        }
    }
    return worst;
}

/// Largest value of |b(x, t)| - C1 (1 + |x|) over samples (<= 0 means the
/// declared growth bound holds there).
inline double growth_excess(const VectorField& b, double c1, const std::vector<Point>& xs,
                            const std::vector<double>& ts = {0.0}) {
    double worst = -std::numeric_limits<double>::infinity();
    for (const auto& x : xs)
        for (double t : ts) worst = std::max(worst, norm(b(x, t)) - c1 * (1.0 + norm(x)));
    return worst;
}

/// Even bump c cos^2(pi u / 2) on [-1, 1]; c = 1 gives unit mass exactly.
struct Mollifier {
    double value(double u) const {
        if (u <= -1.0 || u >= 1.0) return 0.0;
        const double c = std::cos(0.5 * M_PI * u);
        return c * c;
    }
    double derivative(double u) const {
        if (u <= -1.0 || u >= 1.0) return 0.0;
        return -0.5 * M_PI * std::sin(M_PI * u);
    }
    /// rho_{1/k}(x) = k rho(k x)
    double scaled(double x, double k) const { return k * value(k * x); }
    double scaled_derivative(double x, double k) const { return k * k * derivative(k * x); }
};

/// Convolution of a scalar profile with rho_{1/k}, value and derivative.
struct Convolution1D {
    Scalar1Fn f;
    double k = 1.0;
    Mollifier rho{};
    double tol = 1e-14;

    double value(double x, double t = 0.0) const {
        auto g = [&](double u) { return f(x - u / k, t) * rho.value(u); };
        return quad::gauss_kronrod(g, -1.0, 1.0, tol).value;
    }
    /// d/dx (f * rho_{1/k})(x) = k int f(x - u/k) rho'(u) du
    double derivative(double x, double t = 0.0) const {
        auto g = [&](double u) { return f(x - u / k, t) * rho.derivative(u); };
        return k * quad::gauss_kronrod(g, -1.0, 1.0, tol).value;
    }
};

/// b * rho_{1/k} with derivative b * rho'_{1/k} (d = 1).
inline SmoothField mollify(const VectorField& b, double k, Mollifier rho = {}) {
    require(b.dimension() == 1, "mollify requires d = 1");
    require(k > 0, "mollifier scale must be positive");
    VectorField src = b;
    auto conv = std::make_shared<Convolution1D>(
        Convolution1D{[src](double x, double t) { return src.at(x, t); }, k, rho});
    SmoothField s = SmoothField::scalar([conv](double x, double t) { return conv->value(x, t); },
                                        [conv](double x, double t) { return conv->derivative(x, t); },
                                        b.id().empty() ? std::string{} : b.id() + "*rho");
    if (b.domain()) s.with_domain(b.domain()->inflated(-1.0 / k));
    if (b.growth()) s.with_growth(*b.growth() * (1.0 + 1.0 / k));
    return s;
}

inline SmoothField mollify_scalar(Scalar1Fn f, double k, Mollifier rho = {}) {
    return mollify(VectorField::scalar(std::move(f)), k, rho);
}

/// x -> -b(-x, t)
inline VectorField mirror(const VectorField& b) {
    require(b.dimension() == 1, "mirror requires d = 1");
    VectorField src = b;
    VectorField m = VectorField::scalar([src](double x, double t) { return -src.at(-x, t); },
                                        b.id().empty() ? std::string{} : "mirror(" + b.id() + ")");
    if (b.growth()) m.with_growth(*b.growth());
    if (b.domain()) m.with_domain(Box::interval(-b.domain()->hi[0], -b.domain()->lo[0]));
    return m;
}

inline SmoothField mirror(const SmoothField& b) {
    require(b.dimension() == 1, "mirror requires d = 1");
    SmoothField src = b;
    SmoothField m = SmoothField::scalar([src](double x, double t) { return -src.at(-x, t); },
                                        [src](double x, double t) { return src.derivative(-x, t); },
                                        b.id().empty() ? std::string{} : "mirror(" + b.id() + ")");
    if (b.growth()) m.with_growth(*b.growth());
    if (b.domain()) m.with_domain(Box::interval(-b.domain()->hi[0], -b.domain()->lo[0]));
    return m;
}

/// omega_hat(delta) = 1.1 max |b(x) - b(y)| over grid pairs with |x - y| <= delta,
/// grid spacing <= delta / 16.
inline double modulus_of_continuity(const VectorField& b, double lo, double hi, double delta,
                                    double t = 0.0) {
    require(b.dimension() == 1, "modulus_of_continuity requires d = 1");
    require(delta > 0 && delta <= hi - lo, "delta must lie in (0, interval width]");
    const auto n = static_cast<std::size_t>(std::ceil((hi - lo) / (delta / 16.0) - 1e-9));
    const double h = (hi - lo) / static_cast<double>(n);
    std::vector<double> v(n + 1);
    for (std::size_t i = 0; i <= n; ++i) {
        v[i] = b.at(i == n ? hi : lo + h * static_cast<double>(i), t);
        if (!std::isfinite(v[i])) throw Error("non-finite field sample in modulus_of_continuity");
    }
    const auto off = static_cast<std::size_t>(std::floor(delta / h + 1e-9));
    double m = 0.0;
    for (std::size_t i = 0; i <= n; ++i)
        for (std::size_t o = 1; o <= off && i + o <= n; ++o) m = std::max(m, std::abs(v[i] - v[i + o]));
    return 1.1 * m;
}

/// Sampled maximum of |b| on [lo, hi].
inline double sampled_max_abs(const VectorField& b, double lo, double hi, std::size_t n = 4001, double t = 0.0) {
    double m = 0.0;
    for (double x : linspace(lo, hi, n)) m = std::max(m, std::abs(b.at(x, t)));
    return m;
}

inline double sampled_min(const VectorField& b, double lo, double hi, std::size_t n = 4001, double t = 0.0) {
    double m = std::numeric_limits<double>::infinity();
    for (double x : linspace(lo, hi, n)) m = std::min(m, b.at(x, t));
    return m;
}

struct OneSidedEstimate {
    double estimate = 0.0;
    std::size_t samples = 0;
    bool unbounded = false;
    std::vector<std::pair<double, double>> by_scale;  ///< (|xi| scale, estimate)
};

/// Empirical max of <b(x + xi) - b(x), xi> / |xi|^2 over random and grid
/// points, refined over |xi| scales 1e-1 .. 1e-6. Flagged unbounded when the
/// finest-scale estimate exceeds ten times the coarsest.
inline OneSidedEstimate one_sided_constant(const VectorField& b, const Box& region, std::size_t samples = 2000,
                                           double t = 0.0, unsigned seed = 1) {
    require_bounded(region);
    const std::size_t d = b.dimension();
    std::mt19937_64 rng(seed);
    std::vector<Point> xs;
    const std::size_t per_axis = d == 1 ? 101 : (d == 2 ? 21 : 9);
    for (auto& p : box_grid(region, per_axis)) xs.push_back(p);
    for (std::size_t s = 0; s < samples; ++s) {
        Point x(d);
        for (std::size_t i = 0; i < d; ++i) x[i] = std::uniform_real_distribution<double>(region.lo[i], region.hi[i])(rng);
        xs.push_back(std::move(x));
    }
    std::normal_distribution<double> gauss;
    OneSidedEstimate out;
    out.estimate = -std::numeric_limits<double>::infinity();
    for (int e = 1; e <= 6; ++e) {
        const double scale = std::pow(10.0, -e);
        double best = -std::numeric_limits<double>::infinity();
        for (const auto& x : xs) {
            for (int dir = 0; dir < 2; ++dir) {
                Point xi(d);
                if (d == 1) {
                    xi[0] = dir == 0 ? scale : -scale;
                } else {
                    for (auto& v : xi) v = gauss(rng);
                    const double nr = norm(xi);
                    for (auto& v : xi) v *= scale / nr;
                }
                const Point y = axpy(1.0, xi, x);
                const Point diff = axpy(-1.0, b(x, t), b(y, t));
                best = std::max(best, dot(diff, xi) / dot(xi, xi));
                ++out.samples;
            }
        }
        out.by_scale.push_back({scale, best});
        out.estimate = std::max(out.estimate, best);
    }
    const double coarse = out.by_scale.front().second, fine = out.by_scale.back().second;
    out.unbounded = fine > 10.0 * std::max(std::abs(coarse), 1e-12);
    return out;
}

/// b = g + f with f >= 0 continuous, g Lipschitz with constant Lambda (d = 1),
/// and g(x) < 0 implying f(x) = 0.
struct FieldDecomposition {
    VectorField g;
    VectorField f;
    double lambda = 0.0;

    VectorField sum() const {
        VectorField gg = g, ff = f;
        return VectorField::scalar([gg, ff](double x, double t) { return gg.at(x, t) + ff.at(x, t); });
    }
};

/// Throws naming the violated hypothesis.
inline void validate_decomposition(const FieldDecomposition& dec, double lo, double hi, std::size_t n = 4001) {
    require(dec.g.dimension() == 1 && dec.f.dimension() == 1, "decomposition requires d = 1");
    require(dec.lambda >= 0, "decomposition: Lipschitz constant must be nonnegative");
    const auto xs = linspace(lo, hi, n);
    double prev = 0.0;
    for (std::size_t i = 0; i < xs.size(); ++i) {
        const double gv = dec.g.at(xs[i]), fv = dec.f.at(xs[i]);
        if (fv < 0) throw Error("decomposition violates f >= 0 at x=" + std::to_string(xs[i]));
        if (gv < 0 && fv != 0) throw Error("decomposition violates g(x) < 0 => f(x) = 0 at x=" + std::to_string(xs[i]));
        if (i > 0 && std::abs(gv - prev) > dec.lambda * (xs[i] - xs[i - 1]) * (1 + 1e-9) + 1e-12)
            throw Error("decomposition violates Lipschitz bound for g near x=" + std::to_string(xs[i]));
        prev = gv;
    }
}

}  // namespace contlab
